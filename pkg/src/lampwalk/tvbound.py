"""Certified total-variation bounds for the marginal walks, plus exact oracles.

The certified bound conditions on the first "good record": a step m whose
level k is a strict record, at least the generator's membership level, blue,
with m <= k + 1 (so that the product of the earlier increments sits inside
A(j,k)^(m-1), every earlier level being strictly smaller), and with sign +1
in symmetric mode.  Conditioned on everything but the record step's own box
element, the n-step marginal is a coset-translated uniform measure on the
level-k box, so

    || h * mu^n - mu^n ||  <=  2 P(no good record)
                              + E[ 2(|h q1 F \\ F| + |q1 F \\ F|) / |F| ]

The record-failure probability is computed by exact dynamic programming over
the running maximum; the loss expectation uses the exact box loss of h at
first-step records and sound window-certificate bounds otherwise.  Levels
past the built range use the schedule guarantee (the box chosen at level k
makes every single element of A^(k+1) lose less than (1/k) / card-bound of
its set, which is astronomically small from level 4 on).

Everything here upper-bounds the true total-variation distance; the mini
schedule's convolution oracle checks that inequality exactly at small n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

from .construction import Construction
from .errors import MembershipError, SizeCapError
from .groups import Element, ProductElement, encode, inverse, is_identity, multiply
from .sampling import KDistribution, _blue_increment
from .setalg import (
    certify,
    certify_power,
    certify_product,
    explicit,
    worst_loss_numer,
    _loss_numer,
)

DEFAULT_PMF_CAP = 200_000

# below any reported tolerance, above the true tail bound (1/k divided by a
# set cardinality that is at least |box|^2 >= 2^90 from any built level on)
TAIL_LOSS = 1e-18


@dataclass
class SparsePMF:
    """Exact finitely supported distribution keyed by group elements."""

    probs: dict
    tolerance: float = 1e-12

    def __post_init__(self):
        total = math.fsum(self.probs.values())
        if abs(total - 1.0) > self.tolerance:
            raise ValueError(f"pmf sums to {total}, not 1")
        if any(p <= 0 for p in self.probs.values()):
            raise ValueError("pmf values must be positive")

    def __len__(self):
        return len(self.probs)

    def prob(self, g) -> float:
        return self.probs.get(g, 0.0)


def delta_pmf(g: Element) -> SparsePMF:
    return SparsePMF({g: 1.0})


def uniform_pmf(elements) -> SparsePMF:
    elements = list(elements)
    w = 1.0 / len(elements)
    return SparsePMF({g: w for g in elements})


def convolve(p: SparsePMF, q: SparsePMF, size_cap: int = DEFAULT_PMF_CAP) -> SparsePMF:
    predicted = len(p) * len(q)
    if predicted > size_cap:
        raise SizeCapError(
            f"convolution support may reach {predicted} (cap {size_cap})",
            predicted=predicted,
            cap=size_cap,
        )
    out: dict = {}
    for a, pa in p.probs.items():
        for b, qb in q.probs.items():
            ab = multiply(a, b)
            out[ab] = out.get(ab, 0.0) + pa * qb
    return SparsePMF(out)


def convolve_power(p: SparsePMF, n: int, size_cap: int = DEFAULT_PMF_CAP) -> SparsePMF:
    if n < 1:
        raise ValueError("n must be >= 1")
    out = p
    for _ in range(n - 1):
        out = convolve(out, p, size_cap=size_cap)
    return out


def translate(h: Element, p: SparsePMF) -> SparsePMF:
    return SparsePMF({multiply(h, g): w for g, w in p.probs.items()})


def tv(p: SparsePMF, q: SparsePMF) -> float:
    """Total variation as the full l1 norm; range [0, 2]."""
    keys = set(p.probs) | set(q.probs)
    return math.fsum(abs(p.prob(g) - q.prob(g)) for g in keys)


# -- exact marginal oracle (mini scale) -------------------------------------------


def exact_joint_pmf(c: Construction, kdist: KDistribution) -> SparsePMF:
    """The truncated step law as an explicit pmf (oracle scale only)."""
    masses: dict = {}

    def add(g, w):
        masses[g] = masses.get(g, 0.0) + w

    half = c.mode == "symmetric"
    for k in range(1, kdist.truncation + 1):
        level = c.level(k)
        box = level.box()
        pk = kdist.pmf(k)
        red_p = 2.0 ** -k if k < 1074 else 0.0
        sig = 0.5 if half else 1.0
        red = ProductElement(level.factor(1).c, level.factor(2).c)
        add(red, pk * red_p * sig)
        if half:
            add(inverse(red), pk * red_p * sig)
        blue_w = pk * (1.0 - red_p) / (box.size() ** 2) * sig
        for f1 in box.iter_elements():
            for f2 in box.iter_elements():
                g = _blue_increment(c, k, f1, f2, 1)
                add(g, blue_w)
                if half:
                    add(inverse(g), blue_w)
    return SparsePMF(masses, tolerance=1e-9)


def exact_marginal(
    c: Construction, j: int, n: int, kdist: KDistribution,
    size_cap: int = DEFAULT_PMF_CAP,
) -> SparsePMF:
    """pr_j(nu)^(*n) by exact convolution of the marginalized step law."""
    joint = exact_joint_pmf(c, kdist)
    marg: dict = {}
    for g, w in joint.probs.items():
        comp = g.left if j == 1 else g.right
        marg[comp] = marg.get(comp, 0.0) + w
    return convolve_power(SparsePMF(marg, tolerance=1e-9), n, size_cap=size_cap)


# -- certified bound ------------------------------------------------------------------


@dataclass
class TVBoundReport:
    generator: str
    factor: int
    horizon: int
    truncation: int
    membership_level: int
    bound: float
    record_failure_term: float
    loss_term: float
    conditional_loss: float
    modes: dict = field(default_factory=dict)

    def row(self):
        return [
            self.generator, self.horizon, f"{self.bound:.12g}",
            f"{self.record_failure_term:.12g}", f"{self.loss_term:.12g}",
        ]


def _ratio_float_up(num: int, den: int) -> float:
    """Upper bound of num/den in float, safe for gigantic denominators."""
    if num <= 0:
        return 0.0
    if den.bit_length() - num.bit_length() > 900:
        return TAIL_LOSS
    return min(2.0, (num / den) * (1.0 + 1e-12))


def _level_loss(c: Construction, h, j: int, m: int, k: int) -> float:
    """Sound bound on 2(|h q1 F\\F| + |q1 F\\F|)/|F| at a level-k record."""
    if is_identity(h):
        return 0.0  # h * kappa = kappa exactly
    if k > c.max_built:
        if c.schedule == "paper" and c.max_built >= 3:
            # every element of A^(k+1) loses < (1/k) / card(A^(k+1)) of the
            # level-k box, and from level 4 on that set holds at least
            # |F_3|^2 >= 2^(2 n_3) elements, dwarfing 1/TAIL_LOSS
            return TAIL_LOSS
        if c.schedule == "paper":
            return min(2.0, 4.0 / k)
        return 2.0  # mini boxes carry no invariance guarantee
    level = c.levels[k - 1]
    n = level.n
    if m == 1:
        return _ratio_float_up(2 * min(n, _loss_numer(h)), n)
    a_cert = level.factor(j).a_cert
    q_cert = certify_power(a_cert, m - 1)
    h_cert = certify(explicit(c.factor_group, [h]))
    wa = worst_loss_numer(certify_product(h_cert, q_cert))
    wb = worst_loss_numer(q_cert)
    return _ratio_float_up(2 * (min(n, wa) + min(n, wb)), n)


def certified_marginal_bound(
    c: Construction,
    h,
    n: int,
    j: int = 1,
    kdist: Optional[KDistribution] = None,
) -> TVBoundReport:
    """Deterministic upper bound on || h * pr_j(nu)^n - pr_j(nu)^n ||.

    The record-failure probability comes from exact dynamic programming over
    the running level maximum; the loss term sums first-good-record
    probabilities against per-level certified box losses.
    """
    if n < 1:
        raise ValueError("horizon must be >= 1")
    kdist = kdist or KDistribution()
    if kdist.truncation > 4096:
        raise ValueError("the record DP is meant for modest truncation levels")
    try:
        m_h = c.membership_level(j, h)
    except MembershipError as exc:
        raise MembershipError(
            f"{encode(h)} needs an absorbing level beyond this construction's "
            f"membership horizon: {exc}"
        ) from exc
    trunc = kdist.truncation
    pmf = kdist.pmf_vector()
    prefix = [0.0]
    for p in pmf:
        prefix.append(prefix[-1] + p)
    sig = 0.5 if c.mode == "symmetric" else 1.0

    # materialize the sharp-loss levels (the paper schedule has its own ceiling)
    from .errors import ScheduleLimitError

    try:
        c.build_to(_buildable_goal(c, trunc))
    except ScheduleLimitError:
        pass

    # state[v] = P(no good record yet, running max = v); v = 0 means no draws
    state = [0.0] * (trunc + 1)
    state[0] = 1.0
    loss_total = 0.0
    good_total = 0.0
    loss_cache: dict = {}
    for m in range(1, n + 1):
        nxt = [0.0] * (trunc + 1)
        for v in range(trunc + 1):
            pv = state[v]
            if pv == 0.0:
                continue
            nxt[v] += pv * prefix[v]
            for k in range(max(v + 1, 1), trunc + 1):
                pk = pmf[k - 1]
                if pk == 0.0:
                    continue
                eligible = k >= m_h and m <= k + 1
                if eligible:
                    blue = 1.0 - 2.0 ** -k
                    good = pv * pk * blue * sig
                    good_total += good
                    if (m, k) not in loss_cache:
                        loss_cache[m, k] = _level_loss(c, h, j, m, k)
                    loss_total += good * loss_cache[m, k]
                    nxt[k] += pv * pk * (1.0 - blue * sig)
                else:
                    nxt[k] += pv * pk
        state = nxt
    failure = 2.0 * math.fsum(state)
    bound = min(2.0, failure + loss_total)
    cond = loss_total / good_total if good_total > 0 else 0.0
    return TVBoundReport(
        generator=encode(h),
        factor=j,
        horizon=n,
        truncation=trunc,
        membership_level=m_h,
        bound=bound,
        record_failure_term=failure,
        loss_term=loss_total,
        conditional_loss=cond,
        modes={
            "schedule": c.schedule,
            "mode": c.mode,
            "sharp_levels": c.max_built,
            "tail_levels": "schedule-guarantee" if trunc > c.max_built else "none",
        },
    )


def _buildable_goal(c: Construction, trunc: int) -> int:
    if c.schedule == "mini":
        return min(trunc, 64)
    return min(trunc, 3)


TV_CURVE_COLUMNS = [
    "generator", "factor", "n", "certified_bound", "record_failure_term",
    "loss_term", "exact_tv",
]


def write_tv_curve(path, rows, manifest_digest: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if manifest_digest:
            fh.write(f"# manifest {manifest_digest}\n")
        writer = csv.writer(fh)
        writer.writerow(TV_CURVE_COLUMNS)
        for report, exact in rows:
            writer.writerow(
                [
                    report.generator,
                    report.factor,
                    report.horizon,
                    f"{report.bound:.12g}",
                    f"{report.record_failure_term:.12g}",
                    f"{report.loss_term:.12g}",
                    "" if exact is None else f"{exact:.12g}",
                ]
            )
