"""Symmetric decompositions ``X = sum_beta I_beta X_beta``."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce

import numpy as np

from .core import (
    DEFAULT_ENUMERATION_CAP,
    GroundSet,
    IndicatorFamily,
    count_members,
    outcome_chunks,
)


def _as_weight(w):
    if isinstance(w, (Fraction, int)) and not isinstance(w, bool):
        return Fraction(w)
    if isinstance(w, str):
        return Fraction(w)
    return float(w)


@dataclass(frozen=True, eq=False)
class SymmetricDecomposition:
    """``X_beta = sum_alpha w_{alpha,beta} 1{Q(alpha) minus Q(beta) in Gamma_p}``.

    ``x_parts[b]`` lists ``(weight, Q(alpha))`` pairs for the b-th member of
    ``y_family``; ``Q(alpha)`` is the full set, the difference with ``Q(beta)``
    is taken on evaluation.
    """

    y_family: IndicatorFamily
    x_parts: tuple

    def __post_init__(self):
        if len(self.x_parts) != len(self.y_family):
            raise ValueError("need one part list per member of the Y family")
        parts = []
        for plist in self.x_parts:
            cleaned = []
            for w, q in plist:
                w = _as_weight(w)
                if w < 0:
                    raise ValueError(f"negative weight {w}")
                cleaned.append((w, frozenset(int(i) for i in q)))
            parts.append(tuple(cleaned))
        object.__setattr__(self, "x_parts", tuple(parts))

    @property
    def ground(self) -> GroundSet:
        return self.y_family.ground

    @property
    def exact(self) -> bool:
        return self.ground.is_exact and all(isinstance(w, Fraction) for pl in self.x_parts for w, _ in pl)

    @cached_property
    def part_means(self) -> list:
        """``E X_beta`` per beta (Fractions when everything is exact)."""
        probs = self.ground.probs if self.exact else [float(p) for p in self.ground.probs]
        zero = Fraction(0) if self.exact else 0.0
        out = []
        for beta, plist in zip(self.y_family.members, self.x_parts):
            total = zero
            for w, q in plist:
                term = w if self.exact else float(w)
                for i in q - beta:
                    term *= probs[i]
                total += term
            out.append(total)
        return out

    @cached_property
    def kappa(self):
        """Symmetry defect ``max_beta E X_beta / min_beta E X_beta - 1``."""
        means = self.part_means
        if not means:
            return Fraction(0) if self.exact else 0.0
        lo, hi = min(means), max(means)
        if lo == 0:
            return (Fraction(0) if self.exact else 0.0) if hi == 0 else math.inf
        return hi / lo - 1

    def reconstruction_check(self, target: IndicatorFamily, cap: int = DEFAULT_ENUMERATION_CAP) -> tuple[bool, float]:
        """Compare ``sum_beta I_beta X_beta`` with the target count on every outcome.

        Returns ``(holds, max_abs_deviation)``. Exact weights are scaled to
        integers so the comparison is exact.
        """
        n = self.ground.size
        if target.ground.size != n:
            raise ValueError("target family lives on a different ground set")
        exact = all(isinstance(w, Fraction) for pl in self.x_parts for w, _ in pl)
        if exact:
            denoms = [w.denominator for pl in self.x_parts for w, _ in pl] or [1]
            scale = reduce(math.lcm, denoms, 1)
        else:
            scale = 1
        beta_masks = self.y_family.masks
        terms = []
        for bmask, beta, plist in zip(beta_masks, self.y_family.members, self.x_parts):
            for w, q in plist:
                rest = sum(1 << i for i in q - beta)
                wv = int(w * scale) if exact else float(w)
                terms.append((np.int64(bmask | rest), wv))
        worst = 0.0
        for s in outcome_chunks(n, cap):
            x = count_members(target.masks, s) * scale
            acc = np.zeros(s.shape, dtype=np.int64 if exact else np.float64)
            for m, wv in terms:
                acc += wv * ((s & m) == m)
            dev = float(np.abs(acc - x).max()) / scale
            worst = max(worst, dev)
        return (worst == 0.0 if exact else worst <= 1e-9), worst

    def to_json(self) -> dict:
        def enc(w):
            return str(w) if isinstance(w, Fraction) else w
        return {str(b): [[enc(w), sorted(q)] for w, q in plist] for b, plist in enumerate(self.x_parts)}

    @classmethod
    def from_json(cls, y_family: IndicatorFamily, data: dict) -> "SymmetricDecomposition":
        parts = [[] for _ in range(len(y_family))]
        for key, plist in data.items():
            parts[int(key)] = [(w, q) for w, q in plist]
        return cls(y_family, tuple(parts))


def load_decomposition(y_family: IndicatorFamily, path) -> SymmetricDecomposition:
    with open(path) as fh:
        return SymmetricDecomposition.from_json(y_family, json.load(fh))
