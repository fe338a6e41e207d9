"""The Poisson rate function ``phi(x) = (1+x) log(1+x) - x`` and its elementary bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

SERIES_CUTOFF = 1e-4
TOL = 1e-12
ONE_MINUS_INV_E = 1.0 - math.exp(-1.0)


def phi(x: float) -> float:
    """``(1+x) log(1+x) - x`` on ``[-1, inf)`` with ``phi(-1) = 1``."""
    x = float(x)
    if x < -1.0:
        raise ValueError(f"phi is undefined for x={x} < -1")
    if x == -1.0:
        return 1.0
    if abs(x) < SERIES_CUTOFF:
        # sum_{k>=2} (-x)^k / (k (k-1))
        total, term = 0.0, x * x
        for k in range(2, 10):
            total += term / (k * (k - 1))
            term *= -x
        return total
    return (1.0 + x) * math.log1p(x) - x


def phi_neg(eps: float) -> float:
    """``phi(-eps)`` for ``eps`` in ``[0, 1]``."""
    return phi(-float(eps))


def _x_log2(one_minus: float) -> float:
    """``(1-eps) log^2(1-eps)`` with the ``0 log^2 0 = 0`` convention."""
    if one_minus == 0.0:
        return 0.0
    return one_minus * math.log(one_minus) ** 2


@dataclass(frozen=True)
class LemmaCheck:
    eps: float
    values: dict
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def varphi_bounds_check(eps: float, tol: float = TOL) -> LemmaCheck:
    """``max{(1-e) log^2(1-e), e^2} <= 2 phi(-e) <= min{log^2(1-e), 2 e^2}``."""
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")
    two_phi = 2.0 * phi_neg(eps)
    om = 1.0 - eps
    log2 = math.inf if om == 0.0 else math.log(om) ** 2
    left_a, left_b = _x_log2(om), eps * eps
    values = {"2phi": two_phi, "xlog2": left_a, "eps2": left_b, "log2": log2, "2eps2": 2 * eps * eps}
    checks = {
        "xlog2_le_2phi": left_a <= two_phi + tol,
        "eps2_le_2phi": left_b <= two_phi + tol,
        "2phi_le_log2": two_phi <= log2 + tol,
        "2phi_le_2eps2": two_phi <= 2 * eps * eps + tol,
    }
    return LemmaCheck(eps, values, checks)


def varphi2_check(eps: float, tol: float = TOL) -> LemmaCheck:
    """``phi(-e) <= 1 <= (1 + 5 sqrt(1-e)) phi(-e)`` for ``e`` in ``[1 - 1/e, 1]``."""
    eps = float(eps)
    if eps < ONE_MINUS_INV_E - 1e-15 or eps > 1.0:
        raise ValueError(f"eps={eps} outside [1 - 1/e, 1]")
    ph = phi_neg(eps)
    upper = (1.0 + 5.0 * math.sqrt(max(0.0, 1.0 - eps))) * ph
    return LemmaCheck(eps, {"phi": ph, "scaled": upper},
                      {"phi_le_1": ph <= 1.0 + tol, "1_le_scaled": 1.0 <= upper + tol})


@dataclass(frozen=True)
class Varphi3Result:
    eps: float
    A: float
    branch: int
    factor: float
    lhs: float
    rhs: float
    holds: bool


def varphi3_factor(eps: float, A: float, branch: int | None = None, tol: float = TOL) -> Varphi3Result:
    """Upper-bound factor for ``phi(-A eps) / phi(-eps)``.

    Branch 1 (``A eps <= 1``) gives ``(1 + A eps) A^2``; branch 2
    (``0 <= 3 sqrt(A-1) <= 1 - eps``) gives ``1 + sqrt(A-1)``. Without an
    explicit ``branch`` the second one is used whenever ``A > 1`` admits it.
    """
    eps, A = float(eps), float(A)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")
    if A < 0:
        raise ValueError("A must be >= 0")
    gamma = A - 1.0
    b1 = A * eps <= 1.0
    b2 = gamma >= 0.0 and 3.0 * math.sqrt(gamma) <= 1.0 - eps
    if branch is None:
        branch = 2 if (b2 and gamma > 0) else 1 if b1 else 2 if b2 else 0
    if branch == 1 and not b1 or branch == 2 and not b2 or branch == 0:
        raise ValueError(f"no branch of the phi(-A eps) estimate applies for eps={eps}, A={A}")
    factor = (1.0 + A * eps) * A * A if branch == 1 else 1.0 + math.sqrt(gamma)
    lhs = phi_neg(A * eps) if A * eps <= 1.0 else math.nan
    rhs = factor * phi_neg(eps)
    holds = True if eps == 0.0 else lhs <= rhs + tol * max(1.0, rhs)
    return Varphi3Result(eps, A, branch, factor, lhs, rhs, holds)
