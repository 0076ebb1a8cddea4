"""Reproducible batch front-end.

Subcommands: build, sample, analyze, tv, verify, verify-switcher, inspect.
Every run writes a manifest whose digest is stamped into each output file;
identical manifests produce byte-identical outputs.  Wall-clock timestamps
are omitted unless --stamp is passed, keeping reruns byte-comparable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .analysis import trajectory_report, write_analysis_json
from .construction import Config, Construction
from .errors import LampwalkError
from .groups import decode, encode, lamplighter_group
from .sampling import (
    KDistribution,
    read_trajectory_csv,
    walk,
    write_trajectory_csv,
)
from .setalg import read_set
from .switchers import is_superswitcher, is_switcher
from .tvbound import certified_marginal_bound, exact_marginal, translate, tv, write_tv_curve
from .verify import run_verification_suite

DEFAULT_GENERATORS = ["0|0", "1|", "-1|"]


def trajectory_rng(master_seed: int, index: int) -> random.Random:
    digest = hashlib.sha256(f"lampwalk:{master_seed}:{index}".encode()).digest()
    return random.Random(int.from_bytes(digest, "big"))


def load_config_file(path) -> dict:
    """KEY = VALUE lines; '#' comments; values kept as strings."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LampwalkError(f"{path}:{lineno}: expected KEY = VALUE")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass
class Manifest:
    command: list
    config: dict
    seed: int
    construction_digest: str = ""
    version: str = __version__
    timestamp: str = ""

    def digest(self) -> str:
        payload = json.dumps(
            {
                "command": self.command,
                "config": self.config,
                "seed": self.seed,
                "construction": self.construction_digest,
                "version": self.version,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def write(self, path) -> str:
        digest = self.digest()
        payload = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "construction": self.construction_digest,
            "version": self.version,
            "timestamp": self.timestamp,
            "digest": digest,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return digest


def _effective_config(args) -> dict:
    cfg = {}
    if args.config:
        cfg.update(load_config_file(args.config))
    for key in (
        "mode", "schedule", "truncation_level", "seed", "threads",
        "x_level_cap", "horizon", "n_traj", "max_level",
    ):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key.replace("_", "-")] = str(val)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, construction_digest="") -> Manifest:
    return Manifest(
        command=[a for a in sys.argv[1:]],
        config=_effective_config(args),
        seed=args.seed,
        construction_digest=construction_digest,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()) if args.stamp else "",
    )


def _int_or_none(text):
    if text is None or text == "none":
        return None
    return int(text)


# -- subcommands --------------------------------------------------------------


def cmd_build(args) -> int:
    if args.max_level < 1:
        print("error: --max-level must be >= 1", file=sys.stderr)
        return 2
    cfg = Config()
    cfg.mini_box_cap = args.mini_box_cap
    if args.no_brute_verify:
        cfg.brute_verify = False
    c = Construction(mode=args.mode, schedule=args.schedule, config=cfg)
    for i in range(1, args.max_level + 1):
        level = c.build_level(i)
        n_text = str(level.n) if level.n.bit_length() <= 64 else f"2^~{level.n.bit_length() - 1}"
        ratio = level.folner_ratio
        print(
            f"level {i}: box n={n_text} |F|=n*2^n"
            f" folner={'certified' if level.folner_certified else 'recorded'}"
            f" ratio={'n/a' if ratio is None else f'{float(ratio):.6g}'}"
        )
        for j in (1, 2):
            fl = level.factor(j)
            cert = fl.a_cert
            print(
                f"  factor {j}: |core(A)|={fl.core_len}"
                f" cert=({cert.cursor_radius},{cert.lamp_radius})"
                f" b1={_short(fl.b1)} b2={_short(fl.b2)} c={_short(fl.c)}"
            )
    out = Path(args.out)
    c.save(out)
    manifest = _manifest(args, c.digest())
    digest = manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"saved {out} (construction {c.digest()[:12]}, manifest {digest[:12]})")
    return 0


def _short(g) -> str:
    text = encode(g)
    return text if len(text) <= 40 else text[:37] + "..."


def cmd_sample(args) -> int:
    c = Construction.load(args.construction)
    kdist = KDistribution(truncation=args.truncation_level)
    out_dir = _out_dir(args)
    manifest = _manifest(args, c.digest())
    digest = manifest.write(out_dir / "manifest.json")
    for idx in range(args.n_traj):
        rng = trajectory_rng(args.seed, idx)
        traj = walk(
            c, args.horizon, rng, kdist=kdist,
            x_level_cap=_int_or_none(args.x_level_cap),
            seed_label=f"{args.seed}/{idx}",
        )
        write_trajectory_csv(out_dir / f"trajectory-{idx:04d}.csv", traj, digest)
    print(f"wrote {args.n_traj} trajectories to {out_dir} (manifest {digest[:12]})")
    return 0


def cmd_analyze(args) -> int:
    c = Construction.load(args.construction) if args.construction else None
    freeness = [decode(t) for t in _split_elements(args.freeness)]
    reports = []
    for path in args.trajectories:
        traj = read_trajectory_csv(path)
        reports.append(trajectory_report(traj, c, freeness))
    manifest = _manifest(args, c.digest() if c else "")
    out = Path(args.out)
    write_analysis_json(out, reports, manifest.digest())
    stabilized = sum(1 for r in reports if r["stabilization_time"] is not None)
    print(f"analyzed {len(reports)} trajectories ({stabilized} stabilized) -> {out}")
    return 0


def _split_elements(items) -> list:
    """Flatten space-separated encodings (lets '-1|' ride inside one token)."""
    out = []
    for item in items or []:
        out.extend(item.split())
    return out


def cmd_tv(args) -> int:
    c = Construction.load(args.construction)
    kdist = KDistribution(truncation=args.truncation_level)
    gens = _split_elements(args.generators) or DEFAULT_GENERATORS
    grid = [int(x) for x in args.n_grid.split(",")]
    rows = []
    for text in gens:
        h = decode(text)
        for n in grid:
            report = certified_marginal_bound(c, h, n, j=args.factor, kdist=kdist)
            exact = None
            if args.oracle and n <= args.oracle_n_cap:
                marginal = exact_marginal(c, args.factor, n, kdist)
                exact = tv(translate(h, marginal), marginal)
            rows.append((report, exact))
    manifest = _manifest(args, c.digest())
    out = Path(args.out)
    write_tv_curve(out, rows, manifest.digest())
    for report, exact in rows:
        extra = "" if exact is None else f" exact={exact:.6g}"
        print(
            f"{report.generator} n={report.horizon}: bound={report.bound:.6g} "
            f"(failure={report.record_failure_term:.6g}, loss={report.loss_term:.6g})"
            + extra
        )
    return 0


def cmd_verify(args) -> int:
    c = Construction.load(args.construction)
    results = run_verification_suite(c)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_verify_switcher(args) -> int:
    group = lamplighter_group()
    a = read_set(args.set_file, group)
    b = decode(args.candidate)
    check = is_superswitcher if args.super else is_switcher
    report = check(b, a)
    payload = {
        "candidate": encode(report.candidate),
        "kind": report.kind,
        "passed": report.passed,
        "mode": report.mode,
        "verified_against": report.verified_against,
        "witness": None
        if report.witness is None
        else json.loads(json.dumps(report.witness, default=lambda g: encode(g))),
        "reason": report.reason,
    }
    print(json.dumps(payload, indent=1, sort_keys=True))
    return 0 if report.passed else 1


def cmd_inspect(args) -> int:
    c = Construction.load(args.construction)
    print(f"mode: {c.mode}")
    print(f"schedule: {c.schedule}")
    print(f"levels built: {c.max_built}")
    print(f"digest: {c.digest()}")
    for level in c.levels:
        n_text = str(level.n) if level.n.bit_length() <= 64 else f"~2^{level.n.bit_length() - 1}"
        print(f"level {level.index}: box n={n_text}")
        for j in (1, 2):
            fl = level.factor(j)
            print(
                f"  factor {j}: cert=({fl.a_cert.cursor_radius},{fl.a_cert.lamp_radius})"
                f" core={fl.core_len} exact={'yes' if fl.a_exact else 'no'}"
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--config", help="KEY = VALUE config file; flags win")
    common.add_argument("--threads", type=int, default=1, help="reserved; runs are sequential")
    common.add_argument("--out-dir", default="out", help="directory for multi-file outputs")
    common.add_argument("--stamp", action="store_true", help="embed a wall-clock timestamp")
    parser = argparse.ArgumentParser(
        prog="lampwalk",
        description="Coupled lamplighter walks: build, simulate, verify, bound.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build and save a construction", parents=[common])
    p.add_argument("--mode", choices=["asymmetric", "symmetric"], default="asymmetric")
    p.add_argument("--schedule", choices=["paper", "mini"], default="mini")
    p.add_argument("--max-level", type=int, default=2)
    p.add_argument("--mini-box-cap", type=int, default=2,
                   help="window-size ceiling for mini boxes (1 keeps oracles tiny)")
    p.add_argument("--no-brute-verify", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("sample", help="simulate coupled trajectories", parents=[common])
    p.add_argument("construction")
    p.add_argument("--n-traj", type=int, default=10)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--truncation-level", type=int, default=1_000_000)
    p.add_argument("--x-level-cap", default="0",
                   help="materialize increments up to this level; 'none' = all")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze", help="records, stabilization, tails, freeness", parents=[common])
    p.add_argument("trajectories", nargs="+")
    p.add_argument("--construction")
    p.add_argument("--freeness", nargs="*", help="encoded product elements to test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tv", help="certified marginal total-variation bounds", parents=[common])
    p.add_argument("construction")
    p.add_argument("--generators", nargs="*",
                   help="encoded lamplighter elements; space-separate inside "
                        "one quoted argument to pass encodings starting with '-'")
    p.add_argument("--factor", type=int, choices=[1, 2], default=1)
    p.add_argument("--n-grid", default="10,100,1000")
    p.add_argument("--truncation-level", type=int, default=30)
    p.add_argument("--oracle", action="store_true", help="add exact TV where feasible")
    p.add_argument("--oracle-n-cap", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tv)

    p = sub.add_parser("verify", help="run the verification suite on a construction", parents=[common])
    p.add_argument("construction")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("verify-switcher", help="check one candidate against a set file", parents=[common])
    p.add_argument("set_file")
    p.add_argument("candidate")
    p.add_argument("--super", action="store_true", help="check the symmetric clauses too")
    p.set_defaults(func=cmd_verify_switcher)

    p = sub.add_parser("inspect", help="summarize a construction file", parents=[common])
    p.add_argument("construction")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LampwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
