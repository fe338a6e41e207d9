import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailkit.core import (
    EnumerationCapError,
    GroundSet,
    IndicatorFamily,
    compute_stats,
    exact_distribution,
    exact_laplace,
    exact_lower_tail,
    exact_variance,
    expect_indicator,
    format_family,
    mc_lower_tail,
    parse_family,
    read_family,
    wilson_interval,
    write_family,
)

from .oracles import binomial_family, brute_pmf, brute_stats


def test_expect_indicator_examples():
    fam = IndicatorFamily.from_members(GroundSet.uniform(3, 0.5), [[0, 1], [], [0]])
    assert expect_indicator(fam, 0) == pytest.approx(0.25)
    assert expect_indicator(fam, 1) == 1.0
    zero = IndicatorFamily.from_members(GroundSet((0.0, 0.5)), [[0]])
    assert expect_indicator(zero, 0) == 0.0
    with pytest.raises(IndexError):
        expect_indicator(fam, 3)


def test_ground_set_rejects_bad_probability():
    with pytest.raises(ValueError):
        GroundSet((0.5, 1.5))
    with pytest.raises(ValueError):
        IndicatorFamily.from_members(GroundSet.uniform(2, 0.5), [[0, 2]])


def test_stats_overlapping_pair(pair_family):
    s = compute_stats(pair_family)
    assert s.mu == pytest.approx(0.5)
    assert s.pi == pytest.approx(0.25)
    assert s.lam == pytest.approx(0.75)
    assert s.delta == pytest.approx(0.5)
    assert s.ordered_overlap_pairs == 2


def test_stats_independent_and_single():
    s = compute_stats(binomial_family(5, 0.3))
    assert s.delta == 0.0 and s.lam == pytest.approx(s.mu)
    one = IndicatorFamily.from_members(GroundSet.uniform(3, 0.5), [[0, 1, 2]])
    s1 = compute_stats(one)
    assert s1.lam == s1.mu and s1.delta == 0.0


def test_stats_empty_family():
    s = compute_stats(IndicatorFamily.from_members(GroundSet.uniform(2, 0.5), []))
    assert s.mu == 0 and s.lam == 0 and s.pi == 0
    assert not s.delta_defined


def test_duplicates_count_as_dependent_pair():
    fam = IndicatorFamily.from_members(GroundSet.uniform(2, 0.5), [[0], [0]])
    s = compute_stats(fam)
    assert s.ordered_overlap_pairs == 2
    assert s.lam == pytest.approx(1.0 + 2 * 0.5)  # mu = 1, each ordered pair adds 1/2


def test_exact_distribution_examples(pair_family):
    d = exact_distribution(binomial_family(2, 0.5)).as_dict()
    assert d == pytest.approx({0: 0.25, 1: 0.5, 2: 0.25})
    d = exact_distribution(pair_family).as_dict()
    assert d[0] == pytest.approx(0.625)
    empty = IndicatorFamily.from_members(GroundSet.uniform(3, 0.5), [])
    assert exact_distribution(empty).as_dict() == {0: 1.0}


def test_cap_refusal_names_size_and_cap():
    with pytest.raises(EnumerationCapError, match="N=6.*cap 4"):
        exact_distribution(binomial_family(6, 0.5), cap=4)


def test_exact_lower_tail_examples(pair_family):
    assert exact_lower_tail(binomial_family(4, 0.5), 1) == pytest.approx(0.0625)
    single = IndicatorFamily.from_members(GroundSet.uniform(1, 0.3), [[0]])
    assert exact_lower_tail(single, 0) == pytest.approx(0.7)
    assert exact_lower_tail(pair_family, 1) == pytest.approx(0.625)


def test_exact_threshold_uses_rationals():
    # 5 singletons at p=1/2: mu = 5/2, eps = 0.2 gives threshold exactly 2
    fam = binomial_family(5, Fraction(1, 2))
    assert exact_lower_tail(fam, 0.2) == pytest.approx(16 / 32)
    assert exact_lower_tail(fam, 0.2, strict=True) == pytest.approx(6 / 32)


def test_laplace_examples(pair_family):
    assert exact_laplace(pair_family, 0) == pytest.approx(1.0)
    single = IndicatorFamily.from_members(GroundSet.uniform(1, 0.5), [[0]])
    assert exact_laplace(single, math.log(2)) == pytest.approx(0.75)
    assert exact_laplace(pair_family, 50) == pytest.approx(0.625, abs=1e-10)


def test_laplace_monotone_and_log_convex(pair_family):
    grid = np.linspace(0, 6, 61)
    logs = np.array([math.log(exact_laplace(pair_family, s)) for s in grid])
    assert np.all(np.diff(logs) <= 1e-15)
    assert np.all(logs[:-2] + logs[2:] - 2 * logs[1:-1] >= -1e-12)


def test_variance_examples(pair_family):
    assert exact_variance(binomial_family(2, 0.5)) == pytest.approx(0.5)
    assert exact_variance(pair_family) <= 0.75 + 1e-10
    one = IndicatorFamily.from_members(GroundSet.uniform(2, 1.0), [[0, 1]])
    assert exact_variance(one) == 0.0


families = st.integers(1, 7).flatmap(lambda n: st.tuples(
    st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.7, 1.0]), min_size=n, max_size=n),
    st.lists(st.lists(st.integers(0, n - 1), max_size=n), max_size=8)))


@settings(max_examples=60, deadline=None)
@given(families)
def test_enumeration_matches_brute_force(spec):
    probs, members = spec
    fam = IndicatorFamily.from_members(GroundSet(tuple(probs)), members)
    dist = exact_distribution(fam)
    ref = brute_pmf(fam)
    assert dist.as_dict() == pytest.approx({k: float(v) for k, v in ref.items() if v > 0}, abs=1e-14)
    assert math.fsum(dist.pmf) == pytest.approx(1.0, abs=1e-12)
    s = compute_stats(fam)
    mu, pi, lam = brute_stats(fam)
    assert s.mu == pytest.approx(mu, rel=1e-12, abs=1e-15)
    assert s.pi == pytest.approx(pi, rel=1e-12, abs=1e-15)
    assert s.lam == pytest.approx(lam, rel=1e-12, abs=1e-15)
    assert dist.mean == pytest.approx(s.mu, rel=1e-10, abs=1e-14)
    assert dist.variance <= s.lam + 1e-10


def test_ordered_lambda_equals_doubled_unordered():
    fam = IndicatorFamily.from_members(GroundSet.uniform(5, 0.4), [[0, 1], [1, 2], [2, 3], [0, 4], [1]])
    s = compute_stats(fam)
    members = fam.members
    unordered = 0.0
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            if members[a] & members[b]:
                unordered += 0.4 ** len(members[a] | members[b])
    assert s.lam == pytest.approx(s.mu + 2 * unordered, rel=1e-13)


def test_mc_deterministic_and_close(pair_family):
    a = mc_lower_tail(pair_family, 1, 100_000, seed=7)
    b = mc_lower_tail(pair_family, 1, 100_000, seed=7)
    assert a == b
    assert a.ci_low <= a.point <= a.ci_high
    assert abs(a.point - 0.625) <= 3 * a.sigma


def test_mc_worker_count_is_part_of_the_contract(pair_family):
    a = mc_lower_tail(pair_family, 1, 20_000, seed=3, workers=4)
    b = mc_lower_tail(pair_family, 1, 20_000, seed=3, workers=4)
    assert a == b and a.workers == 4


def test_mc_degenerate_all_included():
    fam = IndicatorFamily.from_members(GroundSet.uniform(3, 1.0), [[0, 1], [2]])
    est = mc_lower_tail(fam, 1, 1000, seed=1)
    assert est.point == 0.0


def test_mc_large_ground_set_path():
    # more than 62 elements forces the sparse sampling path
    fam = binomial_family(80, 0.05)
    est = mc_lower_tail(fam, 1, 20_000, seed=11)
    exact = 0.95 ** 80
    assert abs(est.point - exact) <= 4 * est.sigma


def test_wilson_interval_shrinks():
    w1 = wilson_interval(50, 100)
    w2 = wilson_interval(5000, 10000)
    assert (w2[1] - w2[0]) < (w1[1] - w1[0]) / 5
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and hi > 0


def test_family_file_roundtrip(tmp_path):
    text = "# demo\n3\n1/2 1/2 0.25\n0 1\n-\n1 2\n"
    fam = parse_family(text)
    assert fam.ground.probs[0] == Fraction(1, 2) and fam.ground.probs[2] == 0.25
    assert fam.members == (frozenset({0, 1}), frozenset(), frozenset({1, 2}))
    path = tmp_path / "f.family"
    write_family(fam, path, comment="roundtrip")
    again = read_family(path)
    assert again.members == fam.members and again.ground.probs == fam.ground.probs
    assert format_family(again).startswith("3\n")


def test_family_file_single_probability_token():
    fam = parse_family("4\n0.5\n0 1\n")
    assert fam.ground.probs == (0.5,) * 4
