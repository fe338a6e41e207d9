"""Transfer bounds that reduce the lower tail of ``X`` to a simpler variable.

Three routes are covered: conditioning on the size of the random subset,
symmetric decompositions ``X = sum_beta I_beta X_beta``, and vertex
symmetry for subgraph counts. The module also carries the one-sided
Chebyshev bound and an exact checker for the conditional Harris claim.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .bounds import LOWER, BoundResult
from .core import (
    DEFAULT_ENUMERATION_CAP,
    FamilyStats,
    GroundSet,
    IndicatorFamily,
    binomial_log_cdf,
    compute_stats,
    count_members,
    exact_distribution,
    mc_lower_tail,
    tail_threshold,
)
from .decomposition import SymmetricDecomposition
from .instances import KGraph, copies_all_induced, count_copies_in, expected_count, subgraph_family

SUBSET_ORACLE_CAP = 10 ** 6
EVAR_MEMBER_CAP = 5000
VXSYM_LAMBDA_BASE = 3         # lambda = 2^(v_H + 3)


def _frac(x) -> Fraction:
    """Exact value of ``x``; floats are read as the literal they print as."""
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    return Fraction(repr(float(x)))


def one_sided_chebyshev(v: float, t: float) -> float:
    """``Pr(Z >= E Z + t) <= v / (v + t^2)`` whenever ``Var Z <= v``."""
    if t <= 0:
        raise ValueError("t must be > 0")
    if v < 0:
        raise ValueError("v must be >= 0")
    return v / (v + t * t)


# ------------------------------------------------------------ size conditioning


@dataclass(frozen=True)
class SizeConditional:
    j: int
    cond_mean: Fraction
    cond_var: Fraction

    def to_dict(self) -> dict:
        return {"j": self.j, "cond_mean": str(self.cond_mean), "cond_var": str(self.cond_var),
                "cond_mean_float": float(self.cond_mean), "cond_var_float": float(self.cond_var)}


def _require_uniform(family: IndicatorFamily) -> None:
    if not family.ground.is_uniform:
        raise ValueError("size conditioning needs a uniform probability vector")


def hypergeometric_inclusion(n: int, j: int, q: int) -> Fraction:
    """Probability that a fixed ``q``-set lies inside a uniform random ``j``-subset of ``[n]``."""
    if q > j:
        return Fraction(0)
    return Fraction(math.comb(n - q, j - q), math.comb(n, j))


@dataclass(frozen=True)
class _SizeProfile:
    n: int
    singles: Counter
    pairs: Counter        # ordered pairs including the diagonal, keyed by |Q(a) u Q(b)|


def _size_profile(family: IndicatorFamily) -> _SizeProfile:
    sizes = family.sizes.astype(np.int64)
    singles = Counter(int(s) for s in sizes)
    pairs: Counter = Counter()
    if len(family):
        inc = family.incidence.astype(np.int64)
        inter = (inc @ inc.T).toarray()
        union = sizes[:, None] + sizes[None, :] - inter
        vals, cnt = np.unique(union, return_counts=True)
        pairs.update({int(v): int(c) for v, c in zip(vals, cnt)})
    return _SizeProfile(family.ground.size, singles, pairs)


def _moments_from_profile(prof: _SizeProfile, j: int) -> SizeConditional:
    mean = sum((c * hypergeometric_inclusion(prof.n, j, q) for q, c in prof.singles.items()), Fraction(0))
    second = sum((c * hypergeometric_inclusion(prof.n, j, u) for u, c in prof.pairs.items()), Fraction(0))
    return SizeConditional(j, mean, second - mean * mean)


def conditional_moments_given_size(family: IndicatorFamily, j: int) -> SizeConditional:
    """``E_j(X)`` and ``Var_j(X)`` given ``|Gamma_p| = j``, from hypergeometric inclusion probabilities."""
    _require_uniform(family)
    if not 0 <= j <= family.ground.size:
        raise ValueError(f"j={j} outside [0, {family.ground.size}]")
    return _moments_from_profile(_size_profile(family), j)


def conditional_moments_by_enumeration(family: IndicatorFamily, j: int,
                                       cap: int = SUBSET_ORACLE_CAP) -> SizeConditional:
    """Same quantities by listing every ``j``-subset (reference oracle)."""
    n = family.ground.size
    total = math.comb(n, j)
    if total > cap:
        raise ValueError(f"C({n},{j})={total} exceeds the subset oracle cap {cap}")
    masks = np.fromiter((sum(1 << i for i in c) for c in itertools.combinations(range(n), j)),
                        dtype=np.int64, count=total)
    x = count_members(family.masks, masks)
    s1 = int(x.sum())
    s2 = int((x * x).sum())
    mean = Fraction(s1, total)
    return SizeConditional(j, mean, Fraction(s2, total) - mean * mean)


def _size_threshold(family: IndicatorFamily, shrink) -> Fraction | float:
    """``(1 - shrink) N p`` exactly when ``p`` is a Fraction."""
    n = family.ground.size
    p = family.ground.probs[0] if n else Fraction(0)
    if isinstance(p, Fraction):
        return (1 - _frac(shrink)) * n * p
    return (1.0 - float(shrink)) * n * float(p)


def evar_check(family: IndicatorFamily, m, mean_cap, var_cap,
               member_cap: int = EVAR_MEMBER_CAP) -> dict | None:
    """Check ``E_j(X) <= mean_cap`` and ``Var_j(X) <= var_cap`` for every ``0 <= j <= m``.

    Returns ``None`` when the family is too large for the pairwise profile.
    """
    if len(family) > member_cap:
        return None
    prof = _size_profile(family)
    top = math.floor(m) if isinstance(m, Fraction) else math.floor(float(m) * (1 + 1e-12))
    top = min(top, family.ground.size)
    worst_mean, worst_var, ok_mean, ok_var = None, None, True, True
    for j in range(0, top + 1):
        sc = _moments_from_profile(prof, j)
        worst_mean = sc.cond_mean if worst_mean is None else max(worst_mean, sc.cond_mean)
        worst_var = sc.cond_var if worst_var is None else max(worst_var, sc.cond_var)
        ok_mean &= _le(sc.cond_mean, mean_cap)
        ok_var &= _le(sc.cond_var, var_cap)
    return {"j_max": top, "max_mean": None if worst_mean is None else float(worst_mean),
            "max_var": None if worst_var is None else float(worst_var),
            "mean_cap": float(mean_cap), "var_cap": float(var_cap),
            "mean_ok": ok_mean, "var_ok": ok_var}


def _le(a, b, rel: float = 1e-12) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a <= b
    return float(a) <= float(b) + rel * max(1.0, abs(float(b)))


def exact_mu_lambda(family: IndicatorFamily, stats: FamilyStats):
    """``mu`` and ``Lambda`` as Fractions when the ground set is exact, else floats."""
    if not family.ground.is_exact:
        return stats.mu, stats.lam
    probs = family.ground.probs
    mu = Fraction(0)
    for q in family.members:
        mu += math.prod((probs[i] for i in q), start=Fraction(1))
    # ordered overlapping pairs plus the diagonal
    lam = mu
    members = family.members
    for a in range(len(members)):
        for b in range(len(members)):
            if a != b and members[a] & members[b]:
                lam += math.prod((probs[i] for i in members[a] | members[b]), start=Fraction(1))
    return mu, lam


def rsize_transfer(family: IndicatorFamily, eps, stats: FamilyStats | None = None,
                   check_evar: bool = True) -> BoundResult:
    """``Pr(X <= (1-eps) mu) >= c Pr(Bin(N, p) <= (1-eps) N p)``, ``c = 1/2 + 1{eps=1}/2``."""
    e = float(eps)
    if not 0.0 < e <= 1.0:
        raise ValueError(f"eps={eps} outside (0, 1]")
    stats = stats or compute_stats(family)
    n = family.ground.size
    uniform = family.ground.is_uniform and n > 0
    min_q = int(family.sizes.min()) if len(family) else 0
    small = e < 1.0
    gate = (e * stats.mu) ** 2 >= (stats.lam if small else 0.0)
    conds = [("uniform p", uniform), ("min |Q(alpha)| >= 2", min_q >= 2),
             ("(eps mu)^2 >= 1{eps<1} Lambda", gate)]
    c = 1.0 if e == 1.0 else 0.5
    p = family.ground.probs[0] if n else 0.0
    m = _size_threshold(family, eps) if uniform else (1.0 - e) * float(sum(family.ground.array))
    log_bin = binomial_log_cdf(n, float(p), m) if uniform else math.nan
    alt = {}
    if check_evar and uniform and min_q >= 2:
        mu_x, lam_x = (exact_mu_lambda(family, stats) if len(family) <= 400
                       else (stats.mu, stats.lam))
        shrink = (1 - _frac(eps)) ** 2 if isinstance(mu_x, Fraction) else (1 - e) ** 2
        alt["evar"] = evar_check(family, m, shrink * mu_x, shrink * lam_x)
    return BoundResult("rsize", math.log(c) + log_bin, all(ok for _, ok in conds), LOWER, conds,
                       {"c": c, "m": float(m), "N": n, "p": float(p)}, alternatives=alt)


def rsize2_transfer(family: IndicatorFamily, eps, tau, k: int | None = None,
                    stats: FamilyStats | None = None, check_evar: bool = True) -> BoundResult:
    """``Pr(X <= (1-eps) mu) >= Pr(Bin(N, p) <= (1 - (1+tau) eps / k) N p) / 2``."""
    e, t = float(eps), float(tau)
    if not 0.0 < e <= 1.0 or not 0.0 < t <= 1.0:
        raise ValueError("eps and tau must lie in (0, 1]")
    stats = stats or compute_stats(family)
    n = family.ground.size
    min_q = int(family.sizes.min()) if len(family) else 0
    k = min_q if k is None else int(k)
    uniform = family.ground.is_uniform and n > 0
    conds = [("uniform p", uniform), ("min |Q(alpha)| >= k >= 1", min_q >= k >= 1),
             ("tau >= 1{k>1} 6 eps", t >= (6.0 * e if k > 1 else 0.0)),
             ("(eps mu)^2 >= 4 Lambda / tau^2", (e * stats.mu) ** 2 >= 4.0 * stats.lam / (t * t))]
    shrink = (1 + _frac(tau)) * _frac(eps) / max(k, 1)
    p = family.ground.probs[0] if n else 0.0
    m = _size_threshold(family, shrink) if uniform else math.nan
    log_bin = binomial_log_cdf(n, float(p), m) if uniform else math.nan
    alt = {}
    if check_evar and uniform and min_q >= k >= 1 and shrink <= 1:
        mu_x, lam_x = (exact_mu_lambda(family, stats) if len(family) <= 400
                       else (stats.mu, stats.lam))
        factor = (1 - shrink) ** k
        if not isinstance(mu_x, Fraction):
            factor = float(factor)
        alt["evar"] = evar_check(family, m, factor * mu_x, lam_x)
    return BoundResult("rsize2", math.log(0.5) + log_bin, all(ok for _, ok in conds), LOWER, conds,
                       {"c": 0.5, "k": k, "tau": t, "shrink": float(shrink), "m": float(m)},
                       alternatives=alt)


# ------------------------------------------------------------ Y tails


def _log_tail_of(family: IndicatorFamily, shrink, truth: str = "exact", samples: int = 100_000,
                 seed: int = 0, cap: int = DEFAULT_ENUMERATION_CAP) -> tuple[float, float, str]:
    """``log Pr(Y <= (1 - shrink) E Y)`` and ``log Pr(Y = 0)`` plus the source used.

    With Monte Carlo truth the lower Wilson end point is reported, so the
    transferred bound stays conservative.
    """
    threshold = tail_threshold(family, shrink)
    if truth == "exact" and family.ground.size <= cap:
        dist = exact_distribution(family, cap)
        zero = float(dist.pmf[0]) if dist.support[0] == 0 else 0.0
        if threshold < 0:
            return -math.inf, _log(zero), "exact"
        return _log(dist.tail(threshold)), _log(zero), "exact"
    if truth == "exact":
        raise ValueError(f"exact Y tail needs N <= {cap}, got {family.ground.size}; use mc truth")
    zero = mc_lower_tail(family, 1, samples, seed)
    if threshold < 0:
        return -math.inf, _log(zero.ci_low), "mc"
    est = mc_lower_tail(family, min(float(shrink), 1.0), samples, seed)
    return _log(est.ci_low), _log(zero.ci_low), "mc"


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def rcor_transfer(decomp: SymmetricDecomposition, eps, gamma, truth: str = "exact",
                  samples: int = 100_000, seed: int = 0,
                  cap: int = DEFAULT_ENUMERATION_CAP) -> BoundResult:
    """``Pr(X <= (1-eps) E X) >= (gamma eps / 2) Pr(Y <= (1 - (1+gamma) eps) E Y)``.

    ``alternatives["log_pr_y_zero"]`` carries ``log Pr(Y = 0)``, which is
    also a lower bound on ``Pr(X = 0)``.
    """
    e, g = _frac(eps), _frac(gamma)
    if not 0 <= e <= 1 or g < 0:
        raise ValueError("need eps in [0, 1] and gamma >= 0")
    kappa = decomp.kappa
    ge = g * e
    if isinstance(kappa, Fraction):
        kappa_ok = ge >= 2 * kappa
    else:
        kappa_ok = float(ge) >= 2.0 * kappa * (1 - 1e-12)
    ey = decomp.y_family.exact_mean()
    ey = float(ey) if ey is not None else float(np.exp(decomp.y_family.log_expectations).sum())
    conds = [("gamma eps >= 2 kappa", bool(kappa_ok)),
             ("1{EY=0} gamma eps <= 2", ey > 0 or ge <= 2)]
    shrink = (1 + g) * e
    log_tail, log_zero, source = _log_tail_of(decomp.y_family, shrink, truth, samples, seed, cap)
    log_value = (math.log(float(ge) / 2.0) if ge > 0 else -math.inf) + log_tail
    return BoundResult("rcor", log_value, all(ok for _, ok in conds), LOWER, conds,
                       {"c": 0.5, "gamma": float(g), "kappa": float(kappa), "kappa_exact": str(kappa),
                        "EY": ey, "y_tail_source": source},
                       alternatives={"log_pr_y_zero": log_zero, "log_y_tail": log_tail})


# ------------------------------------------------------------ conditional Harris


@dataclass(frozen=True)
class HarrisCheck:
    pr_d: object
    pr_i1: object
    pr_i2: object
    pr_i1_i2: object
    pr_i1_given_d: object
    pr_i2_given_d: object
    pr_i1_i2_given_d: object
    independent: bool
    claim_holds: bool
    claim_equality: bool
    wrong_holds: bool

    def to_dict(self) -> dict:
        def enc(x):
            return str(x) if isinstance(x, Fraction) else x
        return {k: enc(v) for k, v in self.__dict__.items()}


def _outcome_weights(ground: GroundSet) -> list:
    n = ground.size
    exact = ground.is_exact
    probs = ground.probs if exact else [float(p) for p in ground.probs]
    one = Fraction(1) if exact else 1.0
    w = []
    for s in range(1 << n):
        acc = one
        for i in range(n):
            acc *= probs[i] if (s >> i) & 1 else (1 - probs[i])
        w.append(acc)
    return w


def is_decreasing(n: int, predicate: Callable[[int], bool]) -> bool:
    """True when ``predicate`` is closed under removing single elements."""
    for s in range(1 << n):
        if predicate(s):
            for i in range(n):
                if (s >> i) & 1 and not predicate(s & ~(1 << i)):
                    return False
    return True


def harris_conditional_check(ground: GroundSet, i1, i2, d: Callable[[int], bool],
                             max_n: int = 16, tol: float = 1e-12) -> HarrisCheck:
    """Evaluate the conditional Harris claim and its naive strengthening exactly.

    ``i1`` and ``i2`` are element sets (the events ``i1 in Gamma_p`` and
    ``i2 in Gamma_p``); ``d`` maps an outcome bitmask to a boolean and must
    describe a decreasing event.
    """
    n = ground.size
    if n > max_n:
        raise ValueError(f"conditional check enumerates 2^N outcomes; N={n} exceeds {max_n}")
    if not is_decreasing(n, d):
        raise ValueError("event D is not decreasing")
    m1 = sum(1 << i for i in i1)
    m2 = sum(1 << i for i in i2)
    w = _outcome_weights(ground)
    zero = w[0] * 0
    pd = p1 = p2 = p12 = p1d = p2d = p12d = zero
    for s, ws in enumerate(w):
        a, b, dd = (s & m1) == m1, (s & m2) == m2, d(s)
        if a:
            p1 += ws
        if b:
            p2 += ws
        if a and b:
            p12 += ws
        if dd:
            pd += ws
            if a:
                p1d += ws
            if b:
                p2d += ws
            if a and b:
                p12d += ws
    if pd == 0:
        raise ValueError("Pr(D) = 0")
    c1, c2, c12 = p1d / pd, p2d / pd, p12d / pd
    exact = isinstance(pd, Fraction)

    def le(x, y):
        return x <= y if exact else x <= y + tol

    def eq(x, y):
        return x == y if exact else abs(x - y) <= tol

    return HarrisCheck(pd, p1, p2, p12, c1, c2, c12,
                       independent=eq(p12, p1 * p2),
                       claim_holds=le(c12, p1 * c2),
                       claim_equality=eq(c12, p1 * c2),
                       wrong_holds=le(c12, c1 * c2))


def correlation_counterexample(n: int = 3, p=Fraction(1, 2)) -> HarrisCheck:
    """Ground ``[n]``, ``I_i = {i in Gamma_p}``, ``D = {|Gamma_p| <= 1 or Gamma_p = {1, 2}}``."""
    if n < 3:
        raise ValueError("the construction needs n >= 3")
    ground = GroundSet.uniform(n, p)

    def d(s: int) -> bool:
        return bin(s).count("1") <= 1 or s == 0b11

    return harris_conditional_check(ground, [0], [1], d)


# ------------------------------------------------------------ vertex symmetry


def vxsym_constants(v_h: int, v_g: int) -> tuple[int, float]:
    """``lambda = 2^(v_H+3)`` and ``log c = -(4^(v_G^2) + 2) log 2``."""
    lam = 2 ** (v_h + VXSYM_LAMBDA_BASE)
    log_c = -float(4 ** (v_g * v_g) + 2) * math.log(2.0)
    return lam, log_c


def vxsym_transfer(h: KGraph, g: KGraph, n: int, p, eps, u, ell: int = 1, truth: str = "exact",
                   samples: int = 100_000, seed: int = 0,
                   cap: int = DEFAULT_ENUMERATION_CAP) -> BoundResult:
    """Statement-level evaluator: ``Pr(X_H <= (1-eps) E X_H) >= c Pr(Y_G <= (1 - lambda eps) E Y_G)``.

    ``Y_G`` counts copies of ``g`` inside the vertex set ``u``. The minimum
    size ``n_0(H, l)`` above which this holds is not checked.
    """
    e = float(eps)
    if not 0.0 < e <= 1.0:
        raise ValueError(f"eps={eps} outside (0, 1]")
    if g.k != h.k:
        raise ValueError("G and H must have the same uniformity")
    u = sorted(set(int(x) for x in u))
    if u and (u[0] < 0 or u[-1] >= n):
        raise ValueError("U must be a subset of 0..n-1")
    sub = count_copies_in(g, h) >= 1
    induced = sub and copies_all_induced(g, h)
    if not sub or not induced or g.e < 1:
        raise ValueError("G must be a subgraph of H with e_G >= 1 whose copies in H are all induced")
    xh = subgraph_family(h, n, p)
    stats = compute_stats(xh.family)
    lam, log_c = vxsym_constants(h.v, g.v)
    conds = [("G subset H, copies induced", True),
             ("||U| - n/2| <= l", abs(len(u) - n / 2) <= ell),
             ("(eps E X_H)^2 >= Lambda(X_H)", (e * stats.mu) ** 2 >= stats.lam)]
    shrink = lam * _frac(eps)
    n_u = len(u)
    ey = expected_count(g, n_u, p)
    vacuous = shrink > 1 and ey > 0
    if vacuous or n_u < g.v:
        log_tail = -math.inf if vacuous else 0.0
        source = "degenerate"
    else:
        yg = subgraph_family(g, n_u, p).family
        log_tail, _, source = _log_tail_of(yg, shrink, truth, samples, seed, cap)
    return BoundResult("vxsym", log_c + log_tail, all(ok for _, ok in conds), LOWER, conds,
                       {"lambda": lam, "log_c": log_c, "log2_c": -(4 ** (g.v * g.v) + 2),
                        "ell": ell, "EY_G": ey, "y_tail_source": source, "vacuous": vacuous,
                        "mu": stats.mu, "Lambda": stats.lam})
