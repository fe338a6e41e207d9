import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats as sps

from tailkit.bootstrap import (
    conditional_moments_by_enumeration,
    conditional_moments_given_size,
    correlation_counterexample,
    exact_mu_lambda,
    harris_conditional_check,
    hypergeometric_inclusion,
    is_decreasing,
    one_sided_chebyshev,
    rcor_transfer,
    rsize2_transfer,
    rsize_transfer,
    vxsym_constants,
    vxsym_transfer,
)
from tailkit.core import GroundSet, IndicatorFamily, compute_stats, exact_lower_tail
from tailkit.instances import ap_family, complete, path, schur_family, single_edge, subgraph_family

from .oracles import brute_stats

HALF = Fraction(1, 2)


def test_chebyshev_examples():
    assert one_sided_chebyshev(0, 1) == 0
    assert one_sided_chebyshev(1, 1) == 0.5
    with pytest.raises(ValueError):
        one_sided_chebyshev(1, 0)


def test_chebyshev_is_valid_for_binomial():
    n, p = 20, 0.3
    v = n * p * (1 - p)
    for t in (1.0, 2.5, 4.0):
        assert sps.binom.sf(math.ceil(n * p + t) - 1, n, p) <= one_sided_chebyshev(v, t)


def test_hypergeometric_inclusion():
    assert hypergeometric_inclusion(4, 2, 2) == Fraction(1, 6)
    assert hypergeometric_inclusion(4, 0, 1) == 0
    assert hypergeometric_inclusion(4, 4, 3) == 1
    assert hypergeometric_inclusion(5, 3, 0) == 1


@pytest.mark.parametrize("seed", range(6))
def test_conditional_moments_match_enumeration(seed):
    rng = random.Random(seed)
    n = rng.randint(4, 9)
    members = [set(rng.sample(range(n), rng.randint(1, 3))) for _ in range(rng.randint(1, 7))]
    fam = IndicatorFamily.from_members(GroundSet.uniform(n, HALF), members)
    for j in range(n + 1):
        a = conditional_moments_given_size(fam, j)
        b = conditional_moments_by_enumeration(fam, j)
        assert (a.cond_mean, a.cond_var) == (b.cond_mean, b.cond_var)


def test_conditional_moments_need_uniform():
    fam = IndicatorFamily.from_members(GroundSet([0.2, 0.3]), [{0, 1}])
    with pytest.raises(ValueError):
        conditional_moments_given_size(fam, 1)


def test_exact_mu_lambda_matches_brute_force():
    ground = GroundSet([Fraction(1, 3), Fraction(1, 2), Fraction(1, 5), Fraction(2, 3)])
    fam = IndicatorFamily.from_members(ground, [{0, 1}, {1, 2}, {2, 3}, {0, 3}, {1, 3}])
    mu, lam = exact_mu_lambda(fam, compute_stats(fam))
    b_mu, _, b_lam = brute_stats(fam)
    assert isinstance(mu, Fraction) and isinstance(lam, Fraction)
    assert float(mu) == pytest.approx(b_mu, rel=1e-14)
    assert float(lam) == pytest.approx(b_lam, rel=1e-14)


def test_rsize_example_eps_one():
    inst = subgraph_family(complete(2, 3), 4, HALF)
    r = rsize_transfer(inst.family, 1)
    assert r.applicable
    assert r.value == pytest.approx(0.5 ** 6, rel=1e-12)
    assert r.value <= exact_lower_tail(inst.family, 1)
    assert r.alternatives["evar"]["mean_ok"] and r.alternatives["evar"]["var_ok"]


def test_rsize_gate_fails_for_small_mean():
    inst = subgraph_family(complete(2, 3), 4, HALF)
    r = rsize_transfer(inst.family, 0.5)
    assert not r.applicable
    assert "(eps mu)^2 >= 1{eps<1} Lambda" in r.failing()


def test_rsize_needs_two_element_members():
    fam = IndicatorFamily.singletons(GroundSet.uniform(6, HALF))
    assert "min |Q(alpha)| >= 2" in rsize_transfer(fam, 1).failing()


def test_rsize_domain():
    fam = IndicatorFamily.from_members(GroundSet.uniform(3, HALF), [{0, 1}])
    for eps in (0, 1.5):
        with pytest.raises(ValueError):
            rsize_transfer(fam, eps)


def test_rsize_valid_when_applicable():
    # the bound must sit below the exact tail whenever its hypotheses hold
    seen = 0
    for n in (5, 6):
        for p in (Fraction(1, 2), Fraction(3, 4)):
            inst = subgraph_family(path(2), n, p)
            for eps in (0.5, 0.75, 1.0):
                r = rsize_transfer(inst.family, eps)
                if r.applicable:
                    seen += 1
                    assert r.value <= exact_lower_tail(inst.family, eps) * (1 + 1e-12)
    assert seen > 0


def test_rsize2_gates():
    inst = subgraph_family(complete(2, 3), 4, HALF)
    r = rsize2_transfer(inst.family, 0.1, 0.6)
    assert r.constants["k"] == 3
    assert set(r.failing()) == {"tau >= 1{k>1} 6 eps", "(eps mu)^2 >= 4 Lambda / tau^2"}
    with pytest.raises(ValueError):
        rsize2_transfer(inst.family, 0.1, 1.2)
    r1 = rsize2_transfer(inst.family, 0.1, 0.6, k=1)
    assert "tau >= 1{k>1} 6 eps" not in r1.failing()


def test_rsize2_value_is_half_binomial_cdf():
    inst = subgraph_family(complete(2, 3), 6, HALF)
    r = rsize2_transfer(inst.family, 0.1, 0.8, check_evar=False)
    m = (1 - 1.8 * 0.1 / 3) * 15 * 0.5
    assert r.value == pytest.approx(0.5 * sps.binom.cdf(math.floor(m), 15, 0.5), rel=1e-10)


def test_rcor_kappa_boundary():
    fam, d = ap_family(3, 5, HALF)
    assert d.kappa == 1
    at = rcor_transfer(d, HALF, 4)          # gamma eps = 2 = 2 kappa
    below = rcor_transfer(d, HALF, Fraction(39, 10))
    assert at.applicable
    assert "gamma eps >= 2 kappa" in below.failing()


def test_rcor_valid_on_ap_and_schur():
    for fam, d in (ap_family(3, 8, HALF), schur_family(8, HALF)):
        for eps in (Fraction(1, 10), Fraction(1, 4), Fraction(1, 2), Fraction(1)):
            for gamma in (Fraction(1, 2), Fraction(2), Fraction(8)):
                r = rcor_transfer(d, eps, gamma)
                if r.applicable:
                    assert r.value <= exact_lower_tail(fam, eps) * (1 + 1e-12)
        zero = rcor_transfer(d, 1, 1).alternatives["log_pr_y_zero"]
        assert math.exp(zero) <= exact_lower_tail(fam, 1)


def test_rcor_mc_truth_is_conservative():
    fam, d = ap_family(3, 10, 0.5)
    ex = rcor_transfer(d, 0.5, 0.5, truth="exact")
    mc = rcor_transfer(d, 0.5, 0.5, truth="mc", samples=20000, seed=1)
    assert mc.constants["y_tail_source"] == "mc"
    assert mc.log_value <= ex.log_value + 0.05


def test_counterexample_values():
    c = correlation_counterexample()
    assert c.pr_d == Fraction(5, 8)
    assert c.pr_i1_i2_given_d == Fraction(1, 5)
    assert c.pr_i1 * c.pr_i2_given_d == Fraction(1, 5)
    assert c.pr_i1_given_d * c.pr_i2_given_d == Fraction(4, 25)
    assert c.independent and c.claim_holds and c.claim_equality and not c.wrong_holds


def test_harris_disjoint_supports_and_monotonicity():
    ground = GroundSet.uniform(4, Fraction(1, 3))
    d = lambda s: bin(s).count("1") <= 2
    assert is_decreasing(4, d)
    c = harris_conditional_check(ground, [0], [1, 2], d)
    assert c.claim_holds
    with pytest.raises(ValueError):
        harris_conditional_check(ground, [0], [1], lambda s: bin(s).count("1") >= 2)


def test_harris_float_ground():
    c = harris_conditional_check(GroundSet.uniform(3, 0.5), [0], [1],
                                 lambda s: bin(s).count("1") <= 1 or s == 0b11)
    assert c.claim_equality and not c.wrong_holds


def test_vxsym_constants():
    lam, log_c = vxsym_constants(3, 2)
    assert lam == 64
    assert log_c / math.log(2) == pytest.approx(-258)


def test_vxsym_vacuous_and_validation():
    r = vxsym_transfer(complete(2, 3), single_edge(2), 6, 0.5, 0.1, [0, 1, 2])
    assert r.constants["vacuous"] and r.log_value == -math.inf
    with pytest.raises(ValueError):
        vxsym_transfer(complete(2, 3), path(2), 6, 0.5, 0.01, [0, 1, 2])
    with pytest.raises(ValueError):
        vxsym_transfer(complete(2, 3), single_edge(2), 6, 0.5, 0.01, [0, 7])


def test_vxsym_non_vacuous_small_eps():
    r = vxsym_transfer(complete(2, 3), single_edge(2), 6, 0.5, 0.005, [0, 1, 2])
    assert not r.constants["vacuous"]
    assert r.log_value < 0 and r.constants["lambda"] == 64
    assert "||U| - n/2| <= l" not in r.failing()
