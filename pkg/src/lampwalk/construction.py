"""Level schedules over a product of two lamplighter groups.

Each level i carries, per factor j: the absorbing set A(j,i) (window
certificate, cardinality bound, and an explicit core while it fits), a shared
skew box F to be nearly invariant under powers of A, S := F, two switchers
b1 (inner) and b2 (outer), and the i-th element c(j,i) of a fixed
breadth-first enumeration of the product group.  The recursion is

    A(j,i+1) = A(j,i)  U  F b1 S b2  U  {c(j,i)}            (asymmetric)
    A(j,i+1) = A(j,i)  U  (F b1 S b2 F)^+-  U  {c(j,i)}^+-  (symmetric)

Two schedules exist:

* ``paper``: exponents grow with the level (invariance set A^(i+1) with
  delta = 1/i, switcher sets to powers i+2 and 2i+8).  Boxes are certified by
  the subadditive union bound, switchers analytically; nothing large is ever
  materialized.  Cardinality bounds become unrepresentable past level 3, at
  which point building refuses (desk-scale ceiling).
* ``mini``: exponents frozen at their level-1 values (2, 3, 10), boxes capped
  at window size 2, everything small enough to materialize and brute-verify.
  The mini schedule exists to cross-validate the certificate machinery the
  paper schedule trusts; its boxes are NOT delta-invariant (a box that small
  cannot absorb the outer switcher's cursor), so the achieved invariance
  ratio is recorded instead of enforced.

Levels are deterministic given (mode, schedule, config); two builds agree
byte for byte.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import (
    CorruptFileError,
    MembershipError,
    ScheduleLimitError,
)
from .groups import (
    LamplighterElement,
    LazyEnumeration,
    ProductElement,
    decode,
    encode,
    inverse,
    is_identity,
    lamplighter_group,
    multiply,
    product_group,
)
from .setalg import (
    BoundCertificate,
    ExplicitSet,
    SkewBox,
    certify,
    certify_power,
    certify_product,
    certify_symmetrize,
    certify_union,
    exact_union_loss,
    explicit,
    folner_for,
    power_set,
    symmetrize,
)
from .switchers import (
    analytic_superswitcher,
    analytic_switcher,
    is_superswitcher,
    is_switcher,
)

FORMAT_VERSION = "lampwalk-construction v1"

# past this window-size bit length, n*2^n and set cardinalities stop being
# representable and the schedule is at its desk-scale ceiling
REPRESENTABLE_BOX_BITS = 24


@dataclass(frozen=True)
class ScheduleProfile:
    """Exponent and box policy of a schedule."""

    name: str
    folner_enforced: bool

    def folner_power(self, i: int) -> int:
        return i + 1 if self.name == "paper" else 2

    def b1_power(self, i: int) -> int:
        return i + 2 if self.name == "paper" else 3

    def b2_power(self, i: int) -> int:
        return 2 * i + 8 if self.name == "paper" else 10

    def w_q1_power(self, i: int) -> int:
        """Power of A carried by the left coset factor of a level-i window."""
        return i + 1 if self.name == "paper" else 2

    def w_q2_power(self, i: int) -> int:
        return i if self.name == "paper" else 1

    def wprime_q1_power(self, i: int) -> int:
        return i if self.name == "paper" else 1

    def delta(self, i: int) -> Optional[Fraction]:
        return Fraction(1, i) if self.name == "paper" else None

    def box_param(self, i: int) -> Optional[int]:
        return None if self.name == "paper" else min(i, 2)


PAPER = ScheduleProfile("paper", folner_enforced=True)
MINI = ScheduleProfile("mini", folner_enforced=False)

PROFILES = {"paper": PAPER, "mini": MINI}


@dataclass
class Config:
    size_cap: int = 1_000_000
    core_block_cap: int = 4096      # materialize F b1 S b2 [F] when this small
    core_level_cap: int = 4         # ... and the level is at most this
    folner_power_cap: int = 1000    # materialize A^p for exact sums when under
    brute_verify: bool = True       # mini: brute-check switchers at build time
    brute_level_cap: int = 2
    brute_power: int = 2            # mini: power of the materialized check set
    mini_box_cap: int = 2           # mini: window size grows min(i, cap)
    membership_scan_cap: int = 100_000

    def as_lines(self):
        return [
            f"size-cap: {self.size_cap}",
            f"core-block-cap: {self.core_block_cap}",
            f"core-level-cap: {self.core_level_cap}",
            f"folner-power-cap: {self.folner_power_cap}",
            f"brute-verify: {'yes' if self.brute_verify else 'no'}",
            f"brute-level-cap: {self.brute_level_cap}",
            f"brute-power: {self.brute_power}",
            f"mini-box-cap: {self.mini_box_cap}",
            f"membership-scan-cap: {self.membership_scan_cap}",
        ]


@dataclass
class FactorLevel:
    """Per-factor data of one level: the input set A(j,i) and its products.

    Cores are nested across levels, so each level only records how many
    entries of the construction's shared append-only core list belong to it.
    """

    a_cert: BoundCertificate
    a_card: Optional[int]           # sound upper bound; None once unrepresentable
    core_len: int                   # prefix of the shared core list
    a_exact: bool                   # core IS the whole set
    b1: LamplighterElement
    b2: LamplighterElement
    c: LamplighterElement


@dataclass
class Level:
    index: int
    n: int                          # shared skew-box window size
    factors: tuple                  # (FactorLevel, FactorLevel)
    folner_certified: bool
    folner_ratio: Optional[Fraction]

    def factor(self, j: int) -> FactorLevel:
        return self.factors[j - 1]

    def box(self) -> SkewBox:
        return SkewBox(self.n)


@dataclass
class _FactorState:
    cert: BoundCertificate
    card: Optional[int]
    core_len: int
    exact: bool


class Construction:
    """Lazily built, deterministic level data for one (mode, schedule) pair."""

    def __init__(self, mode: str = "asymmetric", schedule: str = "paper",
                 config: Optional[Config] = None):
        if mode not in ("asymmetric", "symmetric"):
            raise ValueError(f"unknown mode {mode!r}")
        if schedule not in PROFILES:
            raise ValueError(f"unknown schedule {schedule!r}")
        self.mode = mode
        self.schedule = schedule
        self.profile = PROFILES[schedule]
        self.config = config or Config()
        self.factor_group = lamplighter_group()
        self.group = product_group(self.factor_group, self.factor_group)
        self.identity = self.factor_group.identity()
        self.levels: list[Level] = []
        self._enum = LazyEnumeration(self.group)
        self._core_lists = ([self.identity], [self.identity])
        self._core_index = ({self.identity: 0}, {self.identity: 0})
        start = _FactorState(cert=BoundCertificate(0, 0), card=1, core_len=1, exact=True)
        self._state = (start, _FactorState(**vars(start)))

    # -- building -------------------------------------------------------------

    @property
    def max_built(self) -> int:
        return len(self.levels)

    def build_to(self, i: int) -> None:
        while self.max_built < i:
            self.build_level(self.max_built + 1)

    def level(self, i: int) -> Level:
        self.build_to(i)
        return self.levels[i - 1]

    def c_pair(self, i: int) -> ProductElement:
        """The i-th element of the product-group enumeration (1-based)."""
        return self._enum.element(i - 1)

    def build_level(self, i: int) -> Level:
        if i != self.max_built + 1:
            raise ValueError(f"levels build sequentially; next is {self.max_built + 1}")
        prof, cfg = self.profile, self.config
        sym = self.mode == "symmetric"
        states = self._state

        n = self._choose_box(i, states)
        if self.max_built:
            n = max(n, self.levels[-1].n)
        box = SkewBox(n)
        box_cert = certify(box)
        box_cert_pm = certify_symmetrize(box_cert) if sym else box_cert

        pair = self.c_pair(i)
        cs = (pair.left, pair.right)

        factors = []
        next_states = []
        for idx, st in enumerate(states):
            j = idx + 1
            alphabet = certify_union(st.cert, box_cert_pm)  # A u S(+-) u F(+-)
            c1 = certify_power(alphabet, prof.b1_power(i))
            b1 = analytic_superswitcher(c1) if sym else analytic_switcher(c1)
            b1_cert = certify(explicit(self.factor_group, [b1]))
            if sym:
                b1_cert = certify_symmetrize(b1_cert)
            c2 = certify_power(certify_union(alphabet, b1_cert), prof.b2_power(i))
            b2 = analytic_superswitcher(c2) if sym else analytic_switcher(c2)
            fl = FactorLevel(
                a_cert=st.cert, a_card=st.card, core_len=st.core_len,
                a_exact=st.exact, b1=b1, b2=b2, c=cs[idx],
            )
            factors.append(fl)
            next_states.append(self._advance_state(i, j, st, fl, box, box_cert))

        level = Level(
            index=i,
            n=n,
            factors=tuple(factors),
            folner_certified=prof.folner_enforced,
            folner_ratio=self._exact_ratio(i, states, box),
        )
        if cfg.brute_verify and self.schedule == "mini" and i <= cfg.brute_level_cap:
            self._brute_verify(level, box)
        self.levels.append(level)
        self._state = tuple(next_states)
        return level

    def _choose_box(self, i: int, states) -> int:
        prof, cfg = self.profile, self.config
        fixed = prof.box_param(i)
        if fixed is not None:
            return min(fixed, cfg.mini_box_cap)
        p = prof.folner_power(i)
        delta = prof.delta(i)
        n = 1
        for idx, st in enumerate(states):
            if st.card is None:
                raise ScheduleLimitError(
                    f"level {i}: cardinality bound no longer representable; "
                    f"the paper schedule tops out at level {self.max_built}"
                )
            cert_p = certify_power(st.cert, p)
            elements = None
            if st.exact and st.core_len ** p <= cfg.folner_power_cap:
                elements = power_set(
                    self._core_set(idx + 1, st.core_len), p, size_cap=cfg.size_cap
                )
            card = None if elements is not None else st.card ** p
            nj = folner_for(cert_p, delta, card_bound=card, elements=elements).n
            n = max(n, nj)
        return n

    def _core_set(self, j: int, core_len: int) -> ExplicitSet:
        return explicit(self.factor_group, self._core_lists[j - 1][:core_len])

    def _exact_ratio(self, i, states, box) -> Optional[Fraction]:
        """Exact invariance ratio of the box under A^p, when A^p materializes."""
        p = self.profile.folner_power(i)
        worst = None
        for idx, st in enumerate(states):
            if not (st.exact and st.core_len ** p <= self.config.folner_power_cap):
                return None
            aset = power_set(self._core_set(idx + 1, st.core_len), p,
                             size_cap=self.config.size_cap)
            ratio = exact_union_loss(aset, box)
            worst = ratio if worst is None else max(worst, ratio)
        return worst

    def _core_append(self, j: int, g) -> None:
        index = self._core_index[j - 1]
        if g not in index:
            index[g] = len(self._core_lists[j - 1])
            self._core_lists[j - 1].append(g)

    def _advance_state(self, i, j, st: _FactorState, fl: FactorLevel,
                       box: SkewBox, box_cert) -> _FactorState:
        sym = self.mode == "symmetric"
        cfg = self.config
        b1_cert = certify(explicit(self.factor_group, [fl.b1]))
        b2_cert = certify(explicit(self.factor_group, [fl.b2]))
        block_cert = certify_product(
            certify_product(certify_product(box_cert, b1_cert), box_cert), b2_cert
        )
        if sym:
            block_cert = certify_symmetrize(certify_product(block_cert, box_cert))
        c_cert = certify(explicit(self.factor_group, [fl.c]))
        if sym:
            c_cert = certify_symmetrize(c_cert)
        cert = certify_union(st.cert, block_cert, c_cert)

        card = None
        if st.card is not None and box.n.bit_length() <= REPRESENTABLE_BOX_BITS:
            f_size = box.size()
            block_card = f_size * f_size * (f_size if sym else 1) * (2 if sym else 1)
            card = st.card + block_card + (2 if sym else 1)
        else:
            block_card = None

        exact = st.exact
        if (
            block_card is not None
            and block_card <= cfg.core_block_cap
            and i <= cfg.core_level_cap
        ):
            for g in sorted(self._materialize_block(fl, box), key=encode):
                self._core_append(j, g)
        else:
            exact = False
        self._core_append(j, fl.c)
        if sym:
            self._core_append(j, inverse(fl.c))
        core_len = len(self._core_lists[j - 1])
        if exact and card is not None:
            card = core_len
        return _FactorState(cert=cert, card=card, core_len=core_len, exact=exact)

    def _materialize_block(self, fl: FactorLevel, box: SkewBox):
        out = set()
        fs = list(box.iter_elements(self.config.size_cap))
        sym = self.mode == "symmetric"
        for f in fs:
            head = multiply(f, fl.b1)
            for s in fs:
                g = multiply(multiply(head, s), fl.b2)
                if sym:
                    for tail in fs:
                        gg = multiply(g, tail)
                        out.add(gg)
                        out.add(inverse(gg))
                else:
                    out.add(g)
        return out

    def _brute_verify(self, level: Level, box: SkewBox) -> None:
        """Mini-schedule cross-check: analytic switchers vs materialized sets."""
        cfg = self.config
        sym = self.mode == "symmetric"
        fbox = box.as_explicit(self.factor_group, cfg.size_cap)
        if sym:
            fbox = symmetrize(fbox)
        for j in (1, 2):
            fl = level.factor(j)
            core = set(self._core_lists[j - 1][: fl.core_len])
            base = explicit(self.factor_group, core | fbox.elements)
            step3 = power_set(base, cfg.brute_power, size_cap=cfg.size_cap)
            rep = (is_superswitcher if sym else is_switcher)(fl.b1, step3)
            if not rep.passed:
                raise ScheduleLimitError(
                    f"level {level.index} j={j}: inner switcher failed brute "
                    f"verification: {rep.reason}; witness {rep.witness}"
                )
            with_b1 = {fl.b1, inverse(fl.b1)} if sym else {fl.b1}
            base4 = explicit(self.factor_group, base.elements | with_b1)
            step4 = power_set(base4, cfg.brute_power, size_cap=cfg.size_cap)
            rep = (is_superswitcher if sym else is_switcher)(fl.b2, step4)
            if not rep.passed:
                raise ScheduleLimitError(
                    f"level {level.index} j={j}: outer switcher failed brute "
                    f"verification: {rep.reason}; witness {rep.witness}"
                )

    # -- queries ----------------------------------------------------------------

    def box(self, i: int) -> SkewBox:
        return self.level(i).box()

    def psi_apply(self, j: int, i: int, f: LamplighterElement) -> LamplighterElement:
        """The fixed bijection F(3-j, i) -> S(j, i): rank in F, unrank in S."""
        box = self.box(i)
        return box.unrank(box.rank(f))

    def psi_invert(self, j: int, i: int, s: LamplighterElement) -> LamplighterElement:
        box = self.box(i)
        return box.unrank(box.rank(s))

    def a_core(self, j: int, i: int) -> tuple:
        """Explicit known members of A(j,i), in deterministic build order."""
        if i == self.max_built + 1:
            core_len = self._state[j - 1].core_len
        else:
            core_len = self.level(i).factor(j).core_len
        return tuple(self._core_lists[j - 1][:core_len])

    def a_set(self, j: int, i: int) -> ExplicitSet:
        """Materialized A(j,i); requires the core to be exact."""
        if i == self.max_built + 1:
            st = self._state[j - 1]
            if not st.exact:
                raise MembershipError(f"A({j},{i}) is not fully materialized")
            return self._core_set(j, st.core_len)
        fl = self.level(i).factor(j)
        if not fl.a_exact:
            raise MembershipError(f"A({j},{i}) is not fully materialized")
        return self._core_set(j, fl.core_len)

    def a_power(self, j: int, i: int, p: int) -> ExplicitSet:
        return power_set(self.a_set(j, i), p, size_cap=self.config.size_cap)

    def membership_a(self, j: int, i: int, g: LamplighterElement) -> str:
        """'yes' | 'no' | 'unknown-sound' membership of g in A(j,i)."""
        if i <= self.max_built:
            fl = self.levels[i - 1].factor(j)
            cert, core_len, exact = fl.a_cert, fl.core_len, fl.a_exact
        elif i == self.max_built + 1:
            st = self._state[j - 1]
            cert, core_len, exact = st.cert, st.core_len, st.exact
        else:
            raise ValueError(f"level {i} not built (have {self.max_built})")
        pos = self._core_index[j - 1].get(g)
        if pos is not None and pos < core_len:
            return "yes"
        if exact:
            return "no"
        if not cert.covers(g):
            return "no"
        return "unknown-sound"

    def membership_level(self, j: int, g: LamplighterElement) -> int:
        """Smallest i with g in A(j,i) that this construction can certify.

        Uses built cores first, then the enumeration chain: the component
        c(j,i) enters A(j,i+1), so membership is known far beyond the built
        levels without any box data.
        """
        if is_identity(g):
            return 1
        for i in range(1, self.max_built + 2):
            if self.membership_a(j, i, g) == "yes":
                return i
        for idx in range(self.config.membership_scan_cap):
            pair = self._enum.element(idx)
            comp = pair.left if j == 1 else pair.right
            if comp == g:
                return idx + 2  # pair index idx+1 feeds level idx+1 -> A(j, idx+2)
        raise MembershipError(
            f"{encode(g)} not located in any A({j},i) within the scan cap"
        )

    # -- persistence --------------------------------------------------------------

    def save(self, path) -> None:
        text = self.serialize()
        with open(path, "w") as fh:
            fh.write(text)

    def serialize(self) -> str:
        lines = [FORMAT_VERSION, f"mode: {self.mode}", f"schedule: {self.schedule}"]
        lines += self.config.as_lines()
        lines.append(f"levels: {self.max_built}")
        prev_len = [1, 1]  # level 1 starts from {identity}
        for level in self.levels:
            lines.append(f"[level {level.index}]")
            lines.append(f"box: skewbox:{_int_text(level.n)}")
            lines.append(f"folner-certified: {'yes' if level.folner_certified else 'no'}")
            r = level.folner_ratio
            lines.append(f"folner-ratio: {'none' if r is None else f'{r.numerator}/{r.denominator}'}")
            for j in (1, 2):
                fl = level.factor(j)
                lines.append(f"[factor {j}]")
                lines.append(
                    f"a-cert: certificate:{fl.a_cert.cursor_radius},{fl.a_cert.lamp_radius}"
                )
                lines.append(f"a-card: {'none' if fl.a_card is None else hex(fl.a_card)}")
                lines.append(f"a-exact: {'yes' if fl.a_exact else 'no'}")
                lines.append(f"b1: {encode(fl.b1)}")
                lines.append(f"b2: {encode(fl.b2)}")
                lines.append(f"c: {encode(fl.c)}")
                added = self._core_lists[j - 1][prev_len[j - 1]: fl.core_len]
                lines.append(f"a-core-added: {len(added)}")
                lines.extend(encode(g) for g in added)
                prev_len[j - 1] = fl.core_len
        lines.append("[next]")
        for j in (1, 2):
            st = self._state[j - 1]
            lines.append(f"[factor {j}]")
            lines.append(f"a-cert: certificate:{st.cert.cursor_radius},{st.cert.lamp_radius}")
            lines.append(f"a-card: {'none' if st.card is None else hex(st.card)}")
            lines.append(f"a-exact: {'yes' if st.exact else 'no'}")
            added = self._core_lists[j - 1][prev_len[j - 1]: st.core_len]
            lines.append(f"a-core-added: {len(added)}")
            lines.extend(encode(g) for g in added)
        body = "\n".join(lines) + "\n"
        digest = hashlib.sha256(body.encode()).hexdigest()
        return body + f"sha256: {digest}\n"

    def digest(self) -> str:
        return self.serialize().rsplit("sha256: ", 1)[1].strip()

    @classmethod
    def load(cls, path) -> "Construction":
        with open(path) as fh:
            text = fh.read()
        return cls.deserialize(text)

    @classmethod
    def deserialize(cls, text: str) -> "Construction":
        if "sha256: " not in text:
            raise CorruptFileError("missing integrity line (file truncated?)")
        body, digest_line = text.rsplit("sha256: ", 1)
        if hashlib.sha256(body.encode()).hexdigest() != digest_line.strip():
            raise CorruptFileError("sha256 mismatch: file corrupt or truncated")
        lines = body.splitlines()
        reader = _Reader(lines)
        if reader.take() != FORMAT_VERSION:
            raise CorruptFileError(f"unsupported format (want {FORMAT_VERSION!r})")
        mode = reader.field("mode")
        schedule = reader.field("schedule")
        cfg = Config(
            size_cap=int(reader.field("size-cap")),
            core_block_cap=int(reader.field("core-block-cap")),
            core_level_cap=int(reader.field("core-level-cap")),
            folner_power_cap=int(reader.field("folner-power-cap")),
            brute_verify=reader.field("brute-verify") == "yes",
            brute_level_cap=int(reader.field("brute-level-cap")),
            brute_power=int(reader.field("brute-power")),
            mini_box_cap=int(reader.field("mini-box-cap")),
            membership_scan_cap=int(reader.field("membership-scan-cap")),
        )
        out = cls(mode=mode, schedule=schedule, config=cfg)
        n_levels = int(reader.field("levels"))
        for i in range(1, n_levels + 1):
            if reader.take() != f"[level {i}]":
                raise CorruptFileError(f"expected level {i} section")
            n = _int_parse(reader.field("box").removeprefix("skewbox:"))
            certified = reader.field("folner-certified") == "yes"
            ratio_text = reader.field("folner-ratio")
            ratio = None
            if ratio_text != "none":
                num, den = ratio_text.split("/")
                ratio = Fraction(int(num), int(den))
            factors = []
            for j in (1, 2):
                cert, card, exact, b1, b2, c, added = reader.factor_block(j)
                for g in added:
                    out._core_append(j, g)
                factors.append(FactorLevel(
                    cert, card, len(out._core_lists[j - 1]), exact, b1, b2, c,
                ))
            out.levels.append(Level(i, n, tuple(factors), certified, ratio))
        if reader.take() != "[next]":
            raise CorruptFileError("expected [next] section")
        states = []
        for j in (1, 2):
            cert, card, exact, added = reader.state_block(j)
            for g in added:
                out._core_append(j, g)
            states.append(_FactorState(cert, card, len(out._core_lists[j - 1]), exact))
        out._state = tuple(states)
        return out


def _int_text(n: int) -> str:
    return hex(n)


def _int_parse(text: str) -> int:
    return int(text, 16) if text.startswith("0x") else int(text)


class _Reader:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def take(self) -> str:
        if self.pos >= len(self.lines):
            raise CorruptFileError("unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def field(self, name: str) -> str:
        line = self.take()
        prefix = f"{name}: "
        if not line.startswith(prefix):
            raise CorruptFileError(f"expected field {name!r}, got {line!r}")
        return line[len(prefix):]

    def _common(self, j):
        if self.take() != f"[factor {j}]":
            raise CorruptFileError(f"expected factor {j} section")
        cert_text = self.field("a-cert").removeprefix("certificate:")
        m, r = cert_text.split(",")
        cert = BoundCertificate(int(m), int(r))
        card_text = self.field("a-card")
        card = None if card_text == "none" else _int_parse(card_text)
        exact = self.field("a-exact") == "yes"
        return cert, card, exact

    def factor_block(self, j):
        cert, card, exact = self._common(j)
        b1 = decode(self.field("b1"))
        b2 = decode(self.field("b2"))
        c = decode(self.field("c"))
        count = int(self.field("a-core-added"))
        added = [decode(self.take()) for _ in range(count)]
        return cert, card, exact, b1, b2, c, added

    def state_block(self, j):
        cert, card, exact = self._common(j)
        count = int(self.field("a-core-added"))
        added = [decode(self.take()) for _ in range(count)]
        return cert, card, exact, added
