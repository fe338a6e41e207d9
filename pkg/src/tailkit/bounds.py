"""Closed-form lower-tail bounds, evaluated in log space.

Every evaluator returns a :class:`BoundResult`. Gates that fail only flip
``applicable``; the formal value is still reported so that harness output
can show a formula next to its validity region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import (
    ExactDistribution,
    FamilyStats,
    IndicatorFamily,
    compute_stats,
    exact_distribution,
    tail_threshold,
)
from .phi import ONE_MINUS_INV_E, phi_neg

UPPER = "upper-bound-on-tail"
LOWER = "lower-bound-on-tail"

# Named constants of the theorems; nothing below inlines them.
LT_CAP = 2.0 ** -14           # max{Pi, 1{eps<1} delta} allowed by the main theorem
LT_XI = 135.0                 # xi prefactor (main theorem and the strict-tail variant)
LT_XI_ROOT = 8                # xi uses Pi^(1/8), delta^(1/8), (eps^2 mu)^(-1/4)
LT2_K = 5000.0                # K = 5000 / (1 - Pi)^5
LT2_K_POWER = 5
LT2_SMALL_EPS = 1.0 / 50.0    # delta* = 1{eps < 1/50} delta
LT3_EPS_GAP = 4.0             # eps <= 1 - 4 max{Pi^(1/4), delta^(1/4)}
LT4_ZETA = 10.0               # zeta = 10 max{sqrt(1-eps), Pi/(1-Pi)}

CONSTANTS = {
    "lt_cap": LT_CAP,
    "lt_xi": LT_XI,
    "lt2_K_numerator": LT2_K,
    "lt2_K_power": LT2_K_POWER,
    "lt2_small_eps": LT2_SMALL_EPS,
    "lt3_eps_gap": LT3_EPS_GAP,
    "lt4_zeta": LT4_ZETA,
}


@dataclass
class BoundResult:
    name: str
    log_value: float
    applicable: bool
    direction: str
    conditions: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    tail: str = "le"
    alternatives: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isnan(self.log_value):
            self.log_value = min(0.0, self.log_value)

    @property
    def value(self) -> float:
        return math.exp(self.log_value)

    def failing(self) -> list[str]:
        return [name for name, ok in self.conditions if not ok]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "log_value": self.log_value,
            "value": self.value,
            "applicable": self.applicable,
            "direction": self.direction,
            "tail": self.tail,
            "conditions": [[n, bool(ok)] for n, ok in self.conditions],
            "constants": dict(self.constants),
            "alternatives": dict(self.alternatives),
        }


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")
    return eps


def _neg_rate(coef: float, rate: float) -> float:
    """``-coef * rate`` with ``0 * inf = 0``."""
    if rate == 0.0:
        return 0.0
    return -coef * rate


def janson_upper(stats: FamilyStats, eps: float) -> BoundResult:
    """``Pr(X <= (1-eps) mu) <= exp(-phi(-eps) mu^2 / Lambda)``."""
    eps = _check_eps(eps)
    ph = phi_neg(eps)
    log = 0.0 if stats.mu == 0 else -ph * stats.mu ** 2 / stats.lam
    return BoundResult("janson", log, True, UPPER, [], {"phi": ph})


def harris_lower(family: IndicatorFamily, stats: FamilyStats | None = None) -> BoundResult:
    """Harris lower bound on ``Pr(X = 0)``: the product form and its exponential relaxation."""
    stats = stats or compute_stats(family)
    e = [math.exp(le) for le in family.log_expectations]
    log_prod = 0.0
    for x in e:
        if x >= 1.0:
            log_prod = -math.inf
            break
        log_prod += math.log1p(-x)
    exp_ok = stats.pi < 1.0
    log_exp = -stats.mu / (1.0 - stats.pi) if exp_ok else -math.inf
    return BoundResult(
        "harris", log_prod, True, LOWER,
        [("Pi<1 (exponential form)", exp_ok)],
        {"mu": stats.mu, "Pi": stats.pi},
        tail="eq0",
        alternatives={"log_exponential": log_exp},
    )


def lt_main(stats: FamilyStats, eps: float) -> BoundResult:
    """Main lower bound ``exp{-(1+xi) phi(-eps) mu}`` for nearly Poisson sums."""
    eps = _check_eps(eps)
    mu, pi, delta = stats.mu, stats.pi, stats.delta_or_zero
    small = eps < 1.0
    x = eps * eps * mu
    conds = [
        ("max{Pi, 1{eps<1} delta} <= 2^-14", max(pi, delta if small else 0.0) <= LT_CAP),
        ("eps^2 mu >= 1{eps<1}", x >= (1.0 if small else 0.0)),
    ]
    terms = [pi ** (1.0 / LT_XI_ROOT)]
    if small:
        terms.append(delta ** (1.0 / LT_XI_ROOT))
        terms.append(math.inf if x == 0 else x ** (-2.0 / LT_XI_ROOT))
    xi = LT_XI * max(terms)
    ph = phi_neg(eps)
    log = _neg_rate(1.0 + xi, ph * mu)
    return BoundResult("lt_main", log, all(ok for _, ok in conds), LOWER, conds,
                       {"xi": xi, "phi": ph, "cap": LT_CAP})


def lt2(stats: FamilyStats, eps: float) -> BoundResult:
    """``exp{-K phi(-eps) mu (1+delta*)}`` with ``K = 5000/(1-Pi)^5``; valid for any ``Pi < 1``."""
    eps = _check_eps(eps)
    mu, pi, delta = stats.mu, stats.pi, stats.delta_or_zero
    small = eps < LT2_SMALL_EPS
    conds = [
        ("Pi < 1", pi < 1.0),
        ("eps^2 mu >= 1{eps<1/50} (1+delta)^-1/2",
         eps * eps * mu >= ((1.0 + delta) ** -0.5 if small else 0.0)),
    ]
    K = LT2_K / (1.0 - pi) ** LT2_K_POWER if pi < 1.0 else math.inf
    dstar = delta if small else 0.0
    ph = phi_neg(eps)
    log = _neg_rate(K * (1.0 + dstar), ph * mu)
    weak = _neg_rate(K * (1.0 + dstar), eps * eps * mu)
    return BoundResult("lt2", log, all(ok for _, ok in conds), LOWER, conds,
                       {"K": K, "delta_star": dstar, "phi": ph},
                       alternatives={"log_eps2_form": min(0.0, weak)})


def lt3(stats: FamilyStats, eps: float) -> BoundResult:
    """Strict-tail bound ``Pr(X < (1-eps) mu) >= exp{-(1+xi) phi(-eps) mu}``."""
    eps = _check_eps(eps)
    mu, pi, delta = stats.mu, stats.pi, stats.delta_or_zero
    g = math.e * (1.0 - eps) * eps * eps * mu
    root = max(pi ** 0.25, delta ** 0.25)
    conds = [
        ("e (1-eps) eps^2 mu >= 1", g >= 1.0),
        ("0 <= eps <= 1 - 4 max{Pi^1/4, delta^1/4}", eps <= 1.0 - LT3_EPS_GAP * root),
    ]
    xi = LT_XI * max(pi ** 0.25, delta ** 0.25, math.inf if g == 0 else g ** -0.5)
    ph = phi_neg(eps)
    log = _neg_rate(1.0 + xi, ph * mu)
    return BoundResult("lt3", log, all(ok for _, ok in conds), LOWER, conds,
                       {"xi": xi, "phi": ph}, tail="lt")


def lt4(stats: FamilyStats, eps: float) -> BoundResult:
    """Near-total-deviation bound, valid for both ``X <= (1-eps) mu`` and ``X = 0``."""
    eps = _check_eps(eps)
    mu, pi = stats.mu, stats.pi
    conds = [
        ("1 - 1/e <= eps <= 1", eps >= ONE_MINUS_INV_E - 1e-15),
        ("Pi < 1", pi < 1.0),
    ]
    ratio = pi / (1.0 - pi) if pi < 1.0 else math.inf
    zeta = LT4_ZETA * max(math.sqrt(1.0 - eps), ratio)
    ph = phi_neg(eps)
    log = _neg_rate(1.0 + zeta, ph * mu)
    return BoundResult("lt4", log, all(ok for _, ok in conds), LOWER, conds,
                       {"zeta": zeta, "phi": ph})


def all_bounds(family: IndicatorFamily, eps: float, stats: FamilyStats | None = None) -> list[BoundResult]:
    stats = stats or compute_stats(family)
    return [
        janson_upper(stats, eps),
        harris_lower(family, stats),
        lt_main(stats, eps),
        lt2(stats, eps),
        lt3(stats, eps),
        lt4(stats, eps),
    ]


def laplace_lower(stats: FamilyStats, s: float) -> float:
    """Log of the FKG lower bound on ``E exp(-s X)``."""
    if s < 0:
        raise ValueError("s must be >= 0")
    a = -math.expm1(-s)
    lam = stats.pi * a
    if lam >= 1.0:
        raise ValueError(f"lambda = Pi (1 - e^-s) = {lam} must be < 1")
    return -stats.mu * a - stats.mu * stats.pi * a * a / (2.0 * (1.0 - lam))


def laplace_ratio_lower(stats: FamilyStats, r: float, t: float) -> float:
    """Log lower bound on ``E exp(-rX) / E exp(-tX)`` for ``t >= r >= 0``."""
    if r < 0 or t < r:
        raise ValueError(f"need t >= r >= 0, got r={r}, t={t}")
    if stats.mu == 0:
        return 0.0
    d = 1.0 + stats.delta_or_zero
    return stats.mu / d * (math.exp(-d * r) - math.exp(-d * t))


@dataclass
class HolderReport:
    eps: float
    sigma: float
    tau: float
    p_holder: float
    q_holder: float
    z: float
    s: float
    lam: float
    factor_A: float
    factor_B: float
    factor_C: float
    log_strict_tail: float
    holder_ok: bool
    lemma_lower_applies: bool
    lemma_lower_rhs: float
    lemma_lower_ok: bool | None
    lemma_negl_applies: bool
    lemma_negl_rhs: float
    lemma_negl_ok: bool | None
    eta: float

    @property
    def ok(self) -> bool:
        return self.holder_ok and self.lemma_lower_ok is not False and self.lemma_negl_ok is not False

    def to_dict(self) -> dict:
        return dict(self.__dict__, ok=self.ok)


def holder_report(family: IndicatorFamily, eps: float, sigma: float, tau: float,
                  dist: ExactDistribution | None = None, slack: float = 1e-10) -> HolderReport:
    """Evaluate the three Hoelder factors exactly and compare them with the two lemma bounds.

    Factor A is the restricted-Laplace ratio to the power ``p/(p-1)``, B the
    Laplace ratio ``(E e^{-sX} / E e^{-psX})^{1/(p-1)}``, C is ``E e^{-sX}``;
    all are reported as natural logs.
    """
    eps, sigma, tau = float(eps), float(sigma), float(tau)
    if not 0.0 < eps < 1.0 or not 0.0 < tau < 1.0:
        raise ValueError("eps and tau must lie in (0, 1)")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    stats = compute_stats(family)
    dist = dist if dist is not None else exact_distribution(family)
    p = 1.0 + sigma
    q = 1.0 + 1.0 / sigma
    z = -math.log1p(-eps)
    s = p * z
    mu, pi, delta = stats.mu, stats.pi, stats.delta_or_zero

    threshold = tail_threshold(family, eps, stats.mu)
    log_c = dist.log_laplace(s)
    log_ps = dist.log_laplace(p * s)
    log_restricted = dist.log_restricted_laplace(s, threshold, strict=True)
    factor_c = log_c
    factor_b = (log_c - log_ps) / sigma
    factor_a = (log_restricted - log_c) * p / sigma
    tail = dist.tail(threshold, strict=True)
    log_tail = math.log(tail) if tail > 0 else -math.inf
    product = factor_a + factor_b + factor_c
    holder_ok = product <= log_tail + slack

    ph = phi_neg(eps)
    a = -math.expm1(-s)
    lam = pi * a
    eta = 2 * p * p * (sigma + p * delta + pi) + 2 * p * sigma
    lower_applies = lam <= 0.5
    lower_rhs = _neg_rate(1.0 + eta, ph * mu)
    lower_ok = (lower_rhs <= factor_b + factor_c + slack) if lower_applies else None

    negl_applies = lam < 1.0 and (
        (1 - tau) * sigma ** 2 * (1 - eps) ** p >= p * p * pi / (1 - lam) + delta / (1 + delta))
    if mu > 0:
        coef = 4 * p / (tau * sigma ** 3 * (1 - eps) ** p * eps ** 4 * mu ** 2)
        negl_rhs = -coef * ph * mu
    else:
        negl_rhs = 0.0
    negl_ok = (negl_rhs <= factor_a + slack) if negl_applies else None
    return HolderReport(eps, sigma, tau, p, q, z, s, lam, factor_a, factor_b, factor_c, log_tail,
                        holder_ok, lower_applies, lower_rhs, lower_ok, negl_applies, negl_rhs, negl_ok, eta)
