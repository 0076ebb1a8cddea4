"""Sparse pmf algebra, exact marginals, and the certified TV bound."""

import math
import random

import pytest

from lampwalk.errors import SizeCapError
from lampwalk.groups import (
    LAMP_A,
    LAMP_S,
    LamplighterElement,
    decode,
    inverse,
    lamplighter_group,
    multiply,
)
from lampwalk.sampling import KDistribution, walk
from lampwalk.setalg import SkewBox
from lampwalk.tvbound import (
    SparsePMF,
    certified_marginal_bound,
    convolve,
    delta_pmf,
    exact_joint_pmf,
    exact_marginal,
    translate,
    tv,
    uniform_pmf,
)

LAMP = lamplighter_group()
E = LAMP.identity()


def test_delta_convolution_identities():
    q = uniform_pmf([E, LAMP_S, LAMP_A])
    assert convolve(delta_pmf(E), q).probs == q.probs
    got = convolve(delta_pmf(LAMP_A), delta_pmf(LAMP_S))
    assert got.probs == {multiply(LAMP_A, LAMP_S): 1.0}


def test_hand_convolution_uniform_es():
    p = uniform_pmf([E, LAMP_S])
    got = convolve(p, p)
    want = {E: 0.25, LAMP_S: 0.5, LamplighterElement((), 2): 0.25}
    assert set(got.probs) == set(want)
    for g, w in want.items():
        assert abs(got.probs[g] - w) < 1e-15


def test_convolution_cap():
    big = uniform_pmf(list(SkewBox(4).iter_elements()))
    with pytest.raises(SizeCapError):
        convolve(big, big, size_cap=100)


def test_pmf_validation():
    with pytest.raises(ValueError):
        SparsePMF({E: 0.5})
    with pytest.raises(ValueError):
        SparsePMF({E: 1.5, LAMP_S: -0.5})


def test_tv_examples():
    p = uniform_pmf([E, LAMP_S])
    assert tv(p, p) == 0.0
    assert tv(delta_pmf(E), delta_pmf(LAMP_S)) == 2.0
    lam = uniform_pmf(list(SkewBox(3).iter_elements()))
    shifted = translate(LAMP_S, lam)
    assert abs(tv(shifted, lam) - 2 / 3) < 1e-12


def test_tv_metric_properties():
    rng = random.Random(41)
    pool = list(SkewBox(3).iter_elements())

    def random_pmf():
        support = rng.sample(pool, rng.randrange(2, 6))
        weights = [rng.random() + 0.05 for _ in support]
        total = sum(weights)
        return SparsePMF({g: w / total for g, w in zip(support, weights)}, tolerance=1e-9)

    for _ in range(100):
        p, q, r = random_pmf(), random_pmf(), random_pmf()
        assert abs(tv(p, q) - tv(q, p)) < 1e-12
        assert tv(p, r) <= tv(p, q) + tv(q, r) + 1e-12
        assert -1e-15 <= tv(p, q) <= 2 + 1e-15


def test_exact_marginal_normalized_and_symmetric(mini_asym_small, mini_sym_small):
    kd = KDistribution(truncation=2)
    m1 = exact_marginal(mini_asym_small, 1, 1, kd)
    assert abs(math.fsum(m1.probs.values()) - 1.0) < 1e-9
    msym = exact_marginal(mini_sym_small, 1, 1, kd)
    for g, w in msym.probs.items():
        assert abs(msym.probs[inverse(g)] - w) < 1e-15


def test_marginal_matches_sampler(mini_asym_small):
    kd = KDistribution(truncation=2)
    marg = exact_marginal(mini_asym_small, 1, 1, kd)
    rng = random.Random(42)
    n = 10**5
    counts = {}
    for _ in range(n):
        traj = walk(mini_asym_small, 1, rng, kdist=kd)
        g = traj.steps[0].x.left
        counts[g] = counts.get(g, 0) + 1
    total = math.fsum(
        abs(counts.get(g, 0) / n - marg.probs.get(g, 0.0))
        for g in set(counts) | set(marg.probs)
    )
    assert total < 4 / math.sqrt(n)


def test_joint_pmf_matches_pmf_eval(mini_asym_small):
    from lampwalk.sampling import pmf_eval, support_enumeration

    kd = KDistribution(truncation=2)
    joint = exact_joint_pmf(mini_asym_small, kd)
    for g in support_enumeration(mini_asym_small, kd):
        assert abs(joint.probs[g] - pmf_eval(mini_asym_small, g, kd)) < 1e-12


def test_bound_identity_has_zero_loss(paper_asym):
    kd = KDistribution(truncation=30)
    report = certified_marginal_bound(paper_asym, E, 50, kdist=kd)
    assert report.loss_term == 0.0
    assert report.bound == report.record_failure_term


def test_bound_monotone_in_horizon(paper_asym):
    kd = KDistribution(truncation=30)
    h = LAMP_A
    grid = [5, 10, 20, 50, 100, 400]
    bounds = [certified_marginal_bound(paper_asym, h, n, kdist=kd).bound for n in grid]
    for earlier, later in zip(bounds, bounds[1:]):
        assert later <= earlier + 1e-12


def test_bound_decreases_substantially(paper_asym):
    kd = KDistribution(truncation=30)
    for h in (LAMP_A, LAMP_S, decode("-1|")):
        b10 = certified_marginal_bound(paper_asym, h, 10, kdist=kd).bound
        b1000 = certified_marginal_bound(paper_asym, h, 1000, kdist=kd).bound
        assert b1000 < b10 / 3


def test_bound_sound_against_oracle(mini_asym_small):
    kd = KDistribution(truncation=2)
    for text in ("0|0", "1|", "-1|", "0|"):
        h = decode(text)
        for n in (1, 2, 3, 4):
            report = certified_marginal_bound(mini_asym_small, h, n, j=1, kdist=kd)
            marg = exact_marginal(mini_asym_small, 1, n, kd)
            exact = tv(translate(h, marg), marg)
            assert report.bound >= exact - 1e-9


def test_bound_sound_against_oracle_symmetric(mini_sym_small):
    kd = KDistribution(truncation=2)
    for text in ("0|0", "1|"):
        h = decode(text)
        for n in (1, 2, 3):
            report = certified_marginal_bound(mini_sym_small, h, n, j=1, kdist=kd)
            marg = exact_marginal(mini_sym_small, 1, n, kd)
            exact = tv(translate(h, marg), marg)
            assert report.bound >= exact - 1e-9


def test_bound_second_factor(paper_asym):
    kd = KDistribution(truncation=30)
    report = certified_marginal_bound(paper_asym, LAMP_A, 100, j=2, kdist=kd)
    assert 0.0 < report.bound < 2.0
    assert report.membership_level == 6  # (e,a) is the fifth enumerated pair
