"""End-to-end CLI: build, sample, analyze, tv, verify; determinism contract."""

import json
import subprocess
import sys
from pathlib import Path

CLI = [sys.executable, "-m", "lampwalk.cli"]


def run(args, cwd, check=True):
    proc = subprocess.run(
        CLI + args, cwd=cwd, capture_output=True, text=True
    )
    if check and proc.returncode != 0:
        raise AssertionError(f"{args} failed:\n{proc.stdout}\n{proc.stderr}")
    return proc


def pipeline(root: Path, seed: int):
    root.mkdir(parents=True, exist_ok=True)
    run(["build", "--schedule", "mini", "--mode", "asymmetric", "--max-level", "2",
         "--mini-box-cap", "1", "--out", "mini.lwc"], root)
    run(["sample", "mini.lwc", "--seed", str(seed), "--n-traj", "3", "--horizon", "60",
         "--truncation-level", "500", "--x-level-cap", "500", "--out-dir", "runs"], root)
    trajs = sorted(str(p.relative_to(root)) for p in (root / "runs").glob("trajectory-*.csv"))
    run(["analyze", *trajs, "--construction", "mini.lwc",
         "--freeness", "(0|0;0|)", "(0|;0|)", "--out", "analysis.json",
         "--seed", str(seed)], root)
    run(["tv", "mini.lwc", "--generators", "0|0", "0|", "--n-grid", "2,4",
         "--truncation-level", "2", "--oracle", "--out", "tv.csv",
         "--seed", str(seed)], root)
    return root


def snapshot(root: Path) -> dict:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = path.read_bytes()
    return out


def test_pipeline_deterministic(tmp_path):
    a = pipeline(tmp_path / "a", seed=11)
    b = pipeline(tmp_path / "b", seed=11)
    sa, sb = snapshot(a), snapshot(b)
    assert set(sa) == set(sb)
    for name in sa:
        assert sa[name] == sb[name], f"{name} differs between identical runs"


def test_pipeline_seed_changes_outputs(tmp_path):
    a = pipeline(tmp_path / "a", seed=11)
    b = pipeline(tmp_path / "b", seed=12)
    assert snapshot(a)["runs/trajectory-0000.csv"] != snapshot(b)["runs/trajectory-0000.csv"]


def test_analysis_contents(tmp_path):
    root = pipeline(tmp_path / "a", seed=13)
    payload = json.loads((root / "analysis.json").read_text())
    assert payload["trajectories"]
    for report in payload["trajectories"]:
        assert "record_times" in report and "conditions" in report
        if report["stabilization_time"] is not None:
            assert report["freeness"]["(0|;0|)"] in ("identical", "censored")


def test_tv_csv_contents(tmp_path):
    root = pipeline(tmp_path / "a", seed=14)
    lines = (root / "tv.csv").read_text().splitlines()
    assert lines[0].startswith("# manifest ")
    header = lines[1].split(",")
    assert header == [
        "generator", "factor", "n", "certified_bound", "record_failure_term",
        "loss_term", "exact_tv",
    ]
    rows = [line.split(",") for line in lines[2:]]
    assert all(row[6] != "" for row in rows)  # oracle column filled at n <= 4
    identity_rows = [row for row in rows if row[0] == "0|"]
    assert identity_rows and all(float(row[5]) == 0.0 for row in identity_rows)


def test_verify_passes_and_corruption_fails(tmp_path):
    root = tmp_path / "a"
    root.mkdir()
    run(["build", "--schedule", "mini", "--mode", "asymmetric", "--max-level", "1",
         "--out", "mini.lwc"], root)
    proc = run(["verify", "mini.lwc"], root)
    assert "checks passed" in proc.stdout

    # corrupt the inner switcher and refresh the integrity line: the loader
    # accepts the file, the verification suite must reject it with a witness
    import hashlib

    path = root / "mini.lwc"
    body = path.read_text().rsplit("sha256: ", 1)[0]
    body = body.replace("b1: 2|1", "b1: 0|1", 1)
    digest = hashlib.sha256(body.encode()).hexdigest()
    path.write_text(body + f"sha256: {digest}\n")
    proc = run(["verify", "mini.lwc"], root, check=False)
    assert proc.returncode != 0
    assert "FAIL" in proc.stdout
    assert "witness" in proc.stdout or "diverges" in proc.stdout


def test_verify_rejects_truncated_file(tmp_path):
    root = tmp_path / "a"
    root.mkdir()
    run(["build", "--schedule", "mini", "--max-level", "1", "--out", "mini.lwc"], root)
    text = (root / "mini.lwc").read_text()
    (root / "mini.lwc").write_text(text[: len(text) // 2])
    proc = run(["verify", "mini.lwc"], root, check=False)
    assert proc.returncode != 0


def test_build_rejects_bad_level(tmp_path):
    proc = run(["build", "--max-level", "0", "--out", "x.lwc"], tmp_path, check=False)
    assert proc.returncode != 0


def test_verify_switcher_subcommand(tmp_path):
    (tmp_path / "set.txt").write_text("0|\n0|0\n")
    passing = run(["verify-switcher", "set.txt", "2|1"], tmp_path)
    payload = json.loads(passing.stdout)
    assert payload["passed"] and payload["kind"] == "switcher"
    failing = run(["verify-switcher", "set.txt", "0|0"], tmp_path, check=False)
    assert failing.returncode == 1
    payload = json.loads(failing.stdout)
    assert not payload["passed"] and payload["witness"] is not None


def test_inspect(tmp_path):
    run(["build", "--schedule", "mini", "--max-level", "1", "--out", "mini.lwc"], tmp_path)
    proc = run(["inspect", "mini.lwc"], tmp_path)
    assert "levels built: 1" in proc.stdout
    assert "digest:" in proc.stdout


def test_config_file_with_flag_override(tmp_path):
    (tmp_path / "run.cfg").write_text("horizon = 40\n# comment\nn-traj = 2\n")
    run(["build", "--schedule", "mini", "--max-level", "1", "--out", "mini.lwc"],
        tmp_path)
    run(["sample", "mini.lwc", "--config", "run.cfg", "--seed", "3", "--n-traj", "1",
         "--horizon", "30", "--truncation-level", "100", "--x-level-cap", "100",
         "--out-dir", "runs"], tmp_path)
    manifest = json.loads((tmp_path / "runs" / "manifest.json").read_text())
    # the flag wins over the config file and the effective value is recorded
    assert manifest["config"]["horizon"] == "30"
    assert manifest["config"]["n-traj"] == "1"
