"""Record analytics, window-form decompositions, tail extraction, freeness.

Definitions (over a level sequence k_1, k_2, ...):

* i is a record time if k_i > k_j for all j < i, a non-strict record time if
  k_i >= k_j for all j < i, and a record is simple if every later non-strict
  record strictly exceeds it.
* a trajectory is "stable so far" at i if the maximum over k_1..k_i is
  attained exactly once, exceeds i, and its step is blue.  The detected
  stabilization time is the last index that is not stable so far, provided
  the horizon itself is stable (otherwise the trajectory is censored).

Window forms: at level i, W is the set of pairs

    ( q1_1 (f1 b1 psi1(f2) b2)^sigma q2_1,  q1_2 (f2 b1' psi2(f1) b2')^sigma q2_2 )

with q1_j in A(j,i)^p1, f_j in the level box, q2_j in A(j,i)^p2 (sigma only
in symmetric mode); W' lowers the q1 power.  On the mini schedule both are
indexed exhaustively through per-factor maps, which supports decomposition
queries, uniqueness certification, and disjointness checks without ever
materializing the joint set.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from typing import Optional

from .construction import Construction
from .errors import MembershipError, OracleRangeError
from .groups import (
    ProductElement,
    encode,
    inverse,
    multiply,
)
from .sampling import Trajectory
from .setalg import certify_power

# -- records -------------------------------------------------------------------


@dataclass(frozen=True)
class RecordReport:
    record_times: tuple
    non_strict_record_times: tuple
    simple_record_times: tuple
    max_exceeds_index_from: Optional[int]


def analyze_records(ks) -> RecordReport:
    """Exact classification of record, non-strict record, and simple times."""
    if not ks:
        raise ValueError("empty level sequence")
    records = []
    non_strict = []
    best = None
    for i, k in enumerate(ks, start=1):
        if best is None or k > best:
            records.append(i)
            non_strict.append(i)
            best = k
        elif k == best:
            non_strict.append(i)
    ns_values = {i: ks[i - 1] for i in non_strict}
    simple = []
    for i in records:
        later = [ns_values[j] for j in non_strict if j > i]
        if all(ks[i - 1] < v for v in later):
            simple.append(i)
    last_bad = 0
    best = 0
    for i, k in enumerate(ks, start=1):
        best = max(best, k)
        if best <= i:
            last_bad = i
    from_index = last_bad + 1 if last_bad < len(ks) else None
    return RecordReport(tuple(records), tuple(non_strict), tuple(simple), from_index)


def stable_so_far_flags(traj: Trajectory) -> list[bool]:
    """Per step i: max over 1..i unique, exceeding i, and blue."""
    flags = []
    best = None
    count = 0
    argmax = 0
    for i, step in enumerate(traj.steps, start=1):
        if best is None or step.k > best:
            best, count, argmax = step.k, 1, i
        elif step.k == best:
            count += 1
        blue = traj.steps[argmax - 1].y == "blue"
        flags.append(count == 1 and best > i and blue)
    return flags


def dominant_record_times(traj: Trajectory) -> list[int]:
    """argmax of k_1..k_i for each i (first attainment)."""
    out = []
    best = None
    argmax = 0
    for i, step in enumerate(traj.steps, start=1):
        if best is None or step.k > best:
            best, argmax = step.k, i
        out.append(argmax)
    return out


def detect_stabilization(traj: Trajectory) -> Optional[int]:
    """Smallest i0 with every later step stable so far; None when censored.

    Such an i0 exists iff the final step is stable so far, in which case it
    is the last unstable index (0 when every step qualifies).  The flag is
    "stable so far": data beyond the horizon could still revoke it.
    """
    flags = stable_so_far_flags(traj)
    if not flags[-1]:
        return None
    last_bad = 0
    for i, ok in enumerate(flags, start=1):
        if not ok:
            last_bad = i
    return last_bad


# -- tracked decompositions ------------------------------------------------------


@dataclass
class Decomposition:
    level: int
    record_time: Optional[int]
    q1: Optional[ProductElement]
    f1: Optional[object]
    f2: Optional[object]
    q2: Optional[ProductElement]
    sigma: int = 1

    @property
    def materialized(self) -> bool:
        return None not in (self.q1, self.f1, self.f2, self.q2)


def recompose(c: Construction, d: Decomposition) -> ProductElement:
    from .sampling import _blue_increment

    mid = _blue_increment(c, d.level, d.f1, d.f2, d.sigma)
    return multiply(multiply(d.q1, mid), d.q2)


def p_map(d: Decomposition) -> ProductElement:
    """The level-drop map: a window form is sent to its left coset factor."""
    if d.q1 is None:
        raise MembershipError("decomposition does not carry a materialized q1")
    return d.q1


def rank_tracked(traj: Trajectory, n: int) -> int:
    """Level of the window the tracked walk inhabits at step n (0 if none)."""
    flags = stable_so_far_flags(traj)
    if not (1 <= n <= traj.horizon) or not flags[n - 1]:
        return 0
    return traj.steps[dominant_record_times(traj)[n - 1] - 1].k


def decompose_tracked(traj: Trajectory, n: int, c: Optional[Construction] = None) -> Optional[Decomposition]:
    """Decomposition of z_n implied by the coupled metadata, when stable.

    q1 = z_{m-1}, f from the record step m, q2 = x_{m+1} ... x_n.  Every
    prior step has level strictly below k_m, so its increment lies in the
    matching absorbing set and q1 lands in A^(m-1); stabilization gives
    k_m > n >= m, so the power fits the window's coset factor.  When the
    elements are materialized the window certificates are asserted too.
    """
    level = rank_tracked(traj, n)
    if level == 0:
        return None
    m = dominant_record_times(traj)[n - 1]
    step = traj.steps[m - 1]
    if step.y != "blue":
        raise AssertionError("stable step with a red dominant record")
    q1 = traj.z(m - 1) if traj.z_materialized(m - 1) else None
    q2 = None
    if all(traj.steps[i].x is not None for i in range(m, n)):
        q2 = _product_tail(traj, m, n, c)
    d = Decomposition(level, m, q1, step.f1, step.f2, q2, step.sigma)
    if c is not None and q1 is not None and m > 1:
        _assert_window_membership(c, d, m, n)
    return d


def _product_tail(traj: Trajectory, m: int, n: int, c) -> ProductElement:
    if m == n:
        from .groups import lamplighter_group, product_group

        return product_group(lamplighter_group(), lamplighter_group()).identity()
    out = None
    for i in range(m, n):
        x = traj.steps[i].x
        out = x if out is None else multiply(out, x)
    return out


def _assert_window_membership(c: Construction, d: Decomposition, m: int, n: int) -> None:
    """Sound certificate check that q1 fits the window's left coset power."""
    for j, comp in ((1, d.q1.left), (2, d.q1.right)):
        if m - 1 == 0:
            continue
        if d.level <= c.max_built + 1:
            cert = (
                c.levels[d.level - 1].factor(j).a_cert
                if d.level <= c.max_built
                else c._state[j - 1].cert
            )
            power_cert = certify_power(cert, m - 1)
            if not power_cert.covers(comp):
                raise AssertionError(
                    f"tracked q1 escapes the A({j},{d.level})^{m - 1} certificate"
                )


# -- exhaustive window index (mini schedule) ---------------------------------------


@dataclass
class _FactorMap:
    values: dict              # element -> list of (slice_id, qa_idx, qb_idx)
    qa_list: list
    qb_list: list


class WindowIndex:
    """Exhaustive per-factor index of the level-i window forms."""

    def __init__(self, c: Construction, i: int, prime: bool = False):
        prof = c.profile
        self.construction = c
        self.level = i
        self.prime = prime
        q1p = prof.wprime_q1_power(i) if prime else prof.w_q1_power(i)
        q2p = prof.w_q2_power(i)
        lv = c.level(i)
        box = lv.box()
        if box.n.bit_length() > 16 or box.size() > 512:
            raise OracleRangeError(f"level {i} box too large for window enumeration")
        self.fs = list(box.iter_elements())
        self.sigmas = (1, -1) if c.mode == "symmetric" else (1,)
        self.slices = [
            (i1, i2, s)
            for i1 in range(len(self.fs))
            for i2 in range(len(self.fs))
            for s in self.sigmas
        ]
        self.factors = []
        for j in (1, 2):
            qa = c.a_power(j, i, q1p).sorted_elements() if q1p else [c.identity]
            qb = c.a_power(j, i, q2p).sorted_elements() if q2p else [c.identity]
            self.factors.append(self._build_factor(j, qa, qb))

    def _mid(self, j: int, f1, f2, sigma: int):
        c, i = self.construction, self.level
        fl = c.level(i).factor(j)
        own, other = (f1, f2) if j == 1 else (f2, f1)
        v = multiply(multiply(multiply(own, fl.b1), c.psi_apply(j, i, other)), fl.b2)
        return inverse(v) if sigma == -1 else v

    def _build_factor(self, j: int, qa_list, qb_list) -> _FactorMap:
        values = {}
        for sid, (i1, i2, s) in enumerate(self.slices):
            mid = self._mid(j, self.fs[i1], self.fs[i2], s)
            for ia, qa in enumerate(qa_list):
                left = multiply(qa, mid)
                for ib, qb in enumerate(qb_list):
                    values.setdefault(multiply(left, qb), []).append((sid, ia, ib))
        return _FactorMap(values, qa_list, qb_list)

    # -- queries --

    def decompositions(self, g: ProductElement) -> list[Decomposition]:
        if not isinstance(g, ProductElement):
            return []
        c1 = self.factors[0].values.get(g.left)
        c2 = self.factors[1].values.get(g.right)
        if not c1 or not c2:
            return []
        by_slice = {}
        for sid, ia, ib in c1:
            by_slice.setdefault(sid, []).append((ia, ib))
        out = []
        for sid, ia2, ib2 in c2:
            for ia1, ib1 in by_slice.get(sid, ()):
                i1, i2, s = self.slices[sid]
                out.append(
                    Decomposition(
                        self.level,
                        None,
                        ProductElement(self.factors[0].qa_list[ia1], self.factors[1].qa_list[ia2]),
                        self.fs[i1],
                        self.fs[i2],
                        ProductElement(self.factors[0].qb_list[ib1], self.factors[1].qb_list[ib2]),
                        s,
                    )
                )
        return out

    def __contains__(self, g) -> bool:
        return bool(self.decompositions(g))

    def certify_unique(self):
        """Prove every window form decomposes uniquely, or return witnesses.

        Joint multiplicity arises either from a same-slice collision inside
        one factor, or from a pair of slices whose factor-1 images and
        factor-2 images both intersect.  Both are checked exhaustively; the
        joint set itself is never materialized.
        """
        pair_witnesses = []
        for fm in self.factors:
            for g, entries in fm.values.items():
                per_slice = {}
                for sid, ia, ib in entries:
                    per_slice.setdefault(sid, []).append((ia, ib))
                for sid, qs in per_slice.items():
                    if len(qs) > 1:
                        pair_witnesses.append((g, sid, qs[:2]))
            if pair_witnesses:
                return False, pair_witnesses
        cross = [set(), set()]
        for fi, fm in enumerate(self.factors):
            for g, entries in fm.values.items():
                sids = sorted({sid for sid, _, _ in entries})
                if len(sids) > 1:
                    cross[fi].update(itertools.combinations(sids, 2))
        both = cross[0] & cross[1]
        if both:
            return False, sorted(both)
        return True, []

    def element_count_bound(self) -> int:
        return min(len(self.factors[0].values), len(self.factors[1].values))

    def iter_elements(self, limit: Optional[int] = None):
        """Joint window forms, one per (slice, q-choice) tuple combination."""
        count = 0
        f0, f1 = self.factors
        rev = {}
        for g2, entries in f1.values.items():
            for sid, _, _ in entries:
                rev.setdefault(sid, []).append(g2)
        for g1, entries in f0.values.items():
            for sid, _, _ in entries:
                for g2 in rev.get(sid, ()):
                    yield ProductElement(g1, g2)
                    count += 1
                    if limit is not None and count >= limit:
                        return


class WindowOracle:
    """Cache of window indexes per (level, prime) for one construction."""

    def __init__(self, c: Construction):
        self.construction = c
        self._cache = {}

    def index(self, i: int, prime: bool = False) -> WindowIndex:
        key = (i, prime)
        if key not in self._cache:
            self._cache[key] = WindowIndex(self.construction, i, prime)
        return self._cache[key]

    def rank(self, g: ProductElement, max_level: int) -> int:
        for i in range(1, max_level + 1):
            if g in self.index(i):
                return i
        return 0


MULTIPLE = "multiple"


def decompose_oracle(c_or_oracle, g: ProductElement, i: int):
    """Exhaustive decomposition at level i: Decomposition, None, or 'multiple'."""
    oracle = c_or_oracle if isinstance(c_or_oracle, WindowOracle) else WindowOracle(c_or_oracle)
    decs = oracle.index(i).decompositions(g)
    if not decs:
        return None
    if len(decs) > 1:
        return MULTIPLE
    return decs[0]


# -- tail sequences and freeness ----------------------------------------------------


@dataclass(frozen=True)
class TailEntry:
    level: int
    time: int
    element: Optional[ProductElement]


@dataclass
class TailSequence:
    entries: tuple
    stabilization_time: Optional[int]

    @property
    def censored(self) -> bool:
        return self.stabilization_time is None

    def deposit_levels(self):
        return [e.level for e in self.entries]


def tau_extract(traj: Trajectory) -> TailSequence:
    """Deposited prefix of the tail map: z_{m-1} at post-stabilization records."""
    i0 = detect_stabilization(traj)
    if i0 is None:
        return TailSequence((), None)
    dom = dominant_record_times(traj)
    times = sorted({dom[i - 1] for i in range(i0 + 1, traj.horizon + 1)})
    entries = []
    for m in times:
        element = traj.z(m - 1) if traj.z_materialized(m - 1) else None
        entries.append(TailEntry(traj.steps[m - 1].k, m, element))
    return TailSequence(tuple(entries), i0)


def freeness_test(traj: Trajectory, h: ProductElement, c: Construction) -> str:
    """'distinct' | 'identical' | 'censored' for the translated tail.

    Translation by h multiplies every deposited entry from h's membership
    level onward, so the matched comparison is gamma versus h*gamma with
    exact element equality.
    """
    tail = tau_extract(traj)
    if tail.censored or not tail.entries:
        return "censored"
    level_needed = max(
        c.membership_level(1, h.left), c.membership_level(2, h.right)
    )
    compared = 0
    differs = False
    for entry in tail.entries:
        if entry.level < level_needed or entry.element is None:
            continue
        compared += 1
        if multiply(h, entry.element) != entry.element:
            differs = True
    if compared == 0:
        return "censored"
    return "distinct" if differs else "identical"


# -- non-triviality conditions -------------------------------------------------------


@dataclass
class ConditionStatus:
    status: str  # "pass" | "fail" | "censored"
    detail: str = ""
    first_index: Optional[int] = None


@dataclass
class ConditionReport:
    stabilization_time: Optional[int]
    window_membership: ConditionStatus      # eventually z_i in some W'
    p_dynamics: ConditionStatus             # p(z_{i+1}) in {p(z_i), z_i}
    rank_growth: ConditionStatus            # max rank keeps growing
    checked_steps: int = 0

    def all_pass(self) -> bool:
        return all(
            s.status == "pass"
            for s in (self.window_membership, self.p_dynamics, self.rank_growth)
        )


def check_nontriviality_conditions(traj: Trajectory, c: Optional[Construction] = None) -> ConditionReport:
    i0 = detect_stabilization(traj)
    horizon = traj.horizon
    if i0 is None:
        censored = ConditionStatus("censored", "no stabilization within horizon")
        return ConditionReport(None, censored, censored,
                               _rank_growth_status(traj), 0)

    flags = stable_so_far_flags(traj)
    first_bad = next((i for i in range(i0 + 1, horizon + 1) if not flags[i - 1]), None)
    membership = ConditionStatus(
        "pass" if first_bad is None else "fail",
        "tracked window membership holds at every post-stabilization step"
        if first_bad is None
        else f"step {first_bad} lost the window form",
        i0 + 1,
    )

    dom = dominant_record_times(traj)
    checked = 0
    p_bad = None
    for i in range(max(i0 + 1, 1), horizon):
        checked += 1
        same = dom[i] == dom[i - 1]
        fresh = dom[i] == i + 1
        if not (same or fresh):
            p_bad = i + 1
            break
        if traj.z_materialized(i + 1) and traj.z_materialized(i):
            d_next = decompose_tracked(traj, i + 1, c)
            d_here = decompose_tracked(traj, i, c)
            if d_next is not None and d_here is not None and d_next.q1 is not None:
                target = d_here.q1 if same else traj.z(i)
                if d_next.q1 != target:
                    p_bad = i + 1
                    break
    p_dyn = ConditionStatus(
        "pass" if p_bad is None else "fail",
        "level-drop map moved by a step or stayed fixed at every transition"
        if p_bad is None
        else f"transition into step {p_bad} broke the level-drop law",
        i0 + 1,
    )
    return ConditionReport(i0, membership, p_dyn, _rank_growth_status(traj), checked)


def _rank_growth_status(traj: Trajectory) -> ConditionStatus:
    horizon = traj.horizon
    flags = stable_so_far_flags(traj)
    dom = dominant_record_times(traj)

    def rank_at(i):
        return traj.steps[dom[i - 1] - 1].k if flags[i - 1] else 0

    early = rank_at(max(1, horizon // 10))
    late = rank_at(horizon)
    if late > early:
        return ConditionStatus(
            "pass", f"max rank grew {early} -> {late} over the last decade of steps"
        )
    return ConditionStatus(
        "censored" if late == early and late > 0 else "fail",
        f"max rank {early} -> {late}; growth exhausted (truncated levels rank out)",
    )


# -- report serialization ---------------------------------------------------------------


ENCODE_CAP = 4096


def element_json(g) -> object:
    if g is None:
        return None
    text = encode(g)
    if len(text) <= ENCODE_CAP:
        return text
    return {
        "digest": hashlib.sha256(text.encode()).hexdigest(),
        "encoded_length": len(text),
    }


def trajectory_report(traj: Trajectory, c: Optional[Construction] = None,
                      freeness_elements=()) -> dict:
    report = analyze_records(traj.ks())
    conditions = check_nontriviality_conditions(traj, c)
    tail = tau_extract(traj)
    out = {
        "horizon": traj.horizon,
        "record_times": list(report.record_times),
        "non_strict_record_times": list(report.non_strict_record_times),
        "simple_record_times": list(report.simple_record_times),
        "stabilization_time": conditions.stabilization_time,
        "conditions": {
            "window_membership": vars(conditions.window_membership),
            "p_dynamics": vars(conditions.p_dynamics),
            "rank_growth": vars(conditions.rank_growth),
        },
        "tail": [
            {
                "level": e.level,
                "time": e.time,
                "element": element_json(e.element),
                "materialized": e.element is not None,
            }
            for e in tail.entries
        ],
        "tail_censored": tail.censored,
    }
    if c is not None and freeness_elements:
        out["freeness"] = {
            encode(h): freeness_test(traj, h, c) for h in freeness_elements
        }
    return out


def write_analysis_json(path, reports: list, manifest_digest: str = "") -> None:
    payload = {"manifest": manifest_digest, "trajectories": reports}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
