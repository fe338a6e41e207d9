import math
from fractions import Fraction

import numpy as np
import pytest

from tailkit import bounds as B
from tailkit.core import (
    FamilyStats,
    GroundSet,
    IndicatorFamily,
    compute_stats,
    exact_distribution,
    exact_laplace,
    exact_lower_tail,
)
from tailkit.phi import ONE_MINUS_INV_E, phi_neg

from .oracles import binomial_family


def stats_of(mu, pi, lam):
    return FamilyStats(mu, pi, lam, lam / mu - 1 if mu > 0 else None, 1, 0)


def test_constant_table():
    assert B.LT_CAP == 2.0 ** -14
    assert B.LT_XI == 135.0
    assert B.CONSTANTS["lt2_K_numerator"] == 5000.0


def test_janson_examples(pair_family):
    s = compute_stats(pair_family)
    assert B.janson_upper(s, 0).log_value == 0.0
    j = B.janson_upper(s, 1)
    assert j.value == pytest.approx(math.exp(-1 / 3))
    assert exact_lower_tail(pair_family, 1) <= j.value
    jb = B.janson_upper(compute_stats(binomial_family(4, 0.5)), 1)
    assert jb.value == pytest.approx(math.exp(-2))
    assert B.janson_upper(stats_of(0, 0, 0), 0.5).log_value == 0.0


def test_janson_nonincreasing_in_eps(pair_family):
    s = compute_stats(pair_family)
    v = [B.janson_upper(s, e).log_value for e in np.linspace(0, 1, 101)]
    assert all(b <= a for a, b in zip(v, v[1:]))


def test_harris_examples(pair_family):
    h = B.harris_lower(pair_family)
    assert h.value == pytest.approx(0.5625)
    assert h.value <= exact_lower_tail(pair_family, 1)
    assert h.log_value >= h.alternatives["log_exponential"]
    empty = IndicatorFamily.from_members(GroundSet.uniform(2, 0.5), [])
    assert B.harris_lower(empty).value == 1.0
    sure = IndicatorFamily.from_members(GroundSet((1.0, 0.5)), [[0], [1]])
    hs = B.harris_lower(sure)
    assert hs.value == 0.0 and hs.failing() == ["Pi<1 (exponential form)"]


def test_lt_main_eps_one():
    s = stats_of(10.0, 2.0 ** -16, 10.5)
    r = B.lt_main(s, 1.0)
    xi = 135 * (2.0 ** -16) ** (1 / 8)
    assert r.applicable
    assert r.constants["xi"] == pytest.approx(xi)
    assert r.log_value == pytest.approx(-(1 + xi) * 10.0)


def test_lt_main_gate_on_delta():
    s = stats_of(10.0, 1e-6, 10.0 * (1 + 1e-3))
    r = B.lt_main(s, 0.5)
    assert not r.applicable
    assert r.failing() == ["max{Pi, 1{eps<1} delta} <= 2^-14"]
    assert math.isfinite(r.log_value)


def test_lt2_examples(pair_family):
    s = compute_stats(pair_family)
    r = B.lt2(s, 0.6)
    assert r.constants["K"] == pytest.approx(5000 / 0.75 ** 5)
    assert r.log_value <= math.log(exact_lower_tail(pair_family, 0.6))
    one = B.lt2(stats_of(2.0, 0.1, 3.0), 1.0)
    assert one.constants["delta_star"] == 0.0
    assert one.log_value == pytest.approx(-5000 / 0.9 ** 5 * 2.0)
    assert B.lt2(stats_of(0, 0, 0), 0.5).log_value == 0.0
    assert not B.lt2(stats_of(1.0, 1.0, 1.0), 0.5).applicable


def test_lt2_small_eps_uses_delta():
    r = B.lt2(stats_of(1e4, 0.01, 1.5e4), 0.01)
    assert r.constants["delta_star"] == pytest.approx(0.5)
    assert r.alternatives["log_eps2_form"] <= r.log_value


def test_lt3_plugin_arithmetic():
    r = B.lt3(stats_of(8.0, 0.0, 8.0), 0.5)
    xi = 135 * (math.e * 0.5 * 2) ** -0.5
    assert r.constants["xi"] == pytest.approx(xi)
    assert r.log_value == pytest.approx(-(1 + xi) * phi_neg(0.5) * 8.0)
    assert r.applicable and r.tail == "lt"
    assert not B.lt3(stats_of(8.0, 0.0, 8.0), 0.0).applicable


def test_lt4_examples(pair_family):
    s = compute_stats(pair_family)
    r = B.lt4(s, 1.0)
    assert r.constants["zeta"] == pytest.approx(10 * 0.25 / 0.75)
    assert r.value <= 0.625
    assert B.lt4(s, ONE_MINUS_INV_E).applicable
    assert not B.lt4(s, 0.5).applicable
    tiny = B.lt4(stats_of(3.0, 1e-9, 3.0), 1.0)
    assert tiny.log_value == pytest.approx(-3.0, rel=1e-6)


def test_log_value_never_positive():
    r = B.BoundResult("x", 0.3, True, B.LOWER)
    assert r.log_value == 0.0


def test_laplace_lower_examples(pair_family):
    s = compute_stats(pair_family)
    assert B.laplace_lower(s, 0) == 0.0
    assert B.laplace_lower(s, 1.0) <= math.log(exact_laplace(pair_family, 1.0))
    empty = FamilyStats(0.0, 0.0, 0.0, None, 0, 0)
    assert B.laplace_lower(empty, 3.0) == 0.0
    with pytest.raises(ValueError):
        B.laplace_lower(stats_of(1.0, 1.0, 1.0), 50.0)


def test_laplace_ratio_examples(pair_family):
    s = compute_stats(pair_family)
    assert B.laplace_ratio_lower(s, 0.7, 0.7) == 0.0
    assert B.laplace_ratio_lower(s, 0, 1) <= -math.log(exact_laplace(pair_family, 1.0))
    ind = compute_stats(binomial_family(3, 0.2))
    assert B.laplace_ratio_lower(ind, 0.5, 2.0) == pytest.approx(ind.mu * (math.exp(-0.5) - math.exp(-2.0)))
    with pytest.raises(ValueError):
        B.laplace_ratio_lower(s, 2, 1)


@pytest.mark.parametrize("members,p", [
    ([[0, 1], [1, 2]], 0.5),
    ([[0, 1], [1, 2], [2, 3], [3, 0]], 0.3),
    ([[0], [1], [0, 1, 2], [2, 3, 4]], 0.6),
])
def test_laplace_bounds_on_grid(members, p):
    fam = IndicatorFamily.from_members(GroundSet.uniform(5, p), members)
    s = compute_stats(fam)
    dist = exact_distribution(fam)
    grid = np.linspace(0, 4, 21)
    for x in grid:
        if s.pi * (1 - math.exp(-x)) < 1:
            assert B.laplace_lower(s, x) <= dist.log_laplace(x) + 1e-12
    for r in grid:
        for t in grid[grid >= r]:
            assert B.laplace_ratio_lower(s, r, t) <= dist.log_laplace(r) - dist.log_laplace(t) + 1e-12


def test_holder_pair_family(pair_family):
    rep = B.holder_report(pair_family, 0.5, 0.5, 5 / 8)
    assert rep.p_holder == 1.5 and 1 / rep.p_holder + 1 / rep.q_holder == pytest.approx(1.0)
    assert rep.z == pytest.approx(-math.log(0.5)) and rep.s == pytest.approx(rep.p_holder * rep.z)
    assert rep.holder_ok and rep.lemma_lower_ok and rep.ok


def test_holder_binomial():
    fam = binomial_family(10, 0.1)
    rep = B.holder_report(fam, 0.5, 0.25, 0.5)
    assert rep.holder_ok
    assert rep.factor_A + rep.factor_B + rep.factor_C <= rep.log_strict_tail + 1e-10


def test_holder_parameter_domain(pair_family):
    with pytest.raises(ValueError):
        B.holder_report(pair_family, 1.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        B.holder_report(pair_family, 0.5, 0.0, 0.5)


def test_holder_negl_lemma_when_it_applies():
    # many nearly independent singletons make the second lemma's precondition hold
    fam = binomial_family(22, Fraction(1, 64))
    rep = B.holder_report(fam, 0.5, 0.9, 0.5)
    assert rep.lemma_negl_applies
    assert rep.lemma_negl_ok


def test_sandwich_on_small_families():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(3, 9))
        members = [sorted(set(rng.integers(0, n, size=int(rng.integers(1, 4))).tolist())) for _ in range(int(rng.integers(1, 7)))]
        fam = IndicatorFamily.from_members(GroundSet.uniform(n, float(rng.choice([0.1, 0.3, 0.5, 0.8]))), members)
        s = compute_stats(fam)
        dist = exact_distribution(fam)
        zero = float(dist.pmf[0]) if dist.support[0] == 0 else 0.0
        for eps in np.linspace(0.05, 1, 20):
            le = exact_lower_tail(fam, eps, dist=dist, mu=s.mu)
            lt = exact_lower_tail(fam, eps, strict=True, dist=dist, mu=s.mu)
            for b in B.all_bounds(fam, eps, s):
                truth = {"le": le, "lt": lt, "eq0": zero}[b.tail]
                lt_ = math.log(truth) if truth > 0 else -math.inf
                if b.direction == B.UPPER:
                    assert lt_ <= b.log_value + 1e-10
                elif b.applicable:
                    assert b.log_value <= lt_ + 1e-10, (b.name, eps, members)
