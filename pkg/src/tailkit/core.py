"""Indicator families over binomial random subsets and their ground truth.

A family is a ground set ``{0, ..., N-1}`` whose elements are kept
independently with probabilities ``p_i``, together with subsets ``Q(alpha)``.
The random variable of interest is ``X = sum_alpha 1{Q(alpha) in Gamma_p}``.

Exact tails come from brute-force enumeration of all ``2**N`` outcomes;
Monte Carlo tails come from plain seeded sampling with Wilson intervals.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.special import logsumexp
from scipy.stats import binom

DEFAULT_ENUMERATION_CAP = 26
REL_SLACK = 1e-12
WILSON_Z = 1.959963984540054
_LOW_BITS = 20
_TABLE_BUDGET = 1 << 26


class EnumerationCapError(ValueError):
    """Raised when a ground set is too large for 2**N enumeration."""

    def __init__(self, n: int, cap: int):
        super().__init__(f"exact enumeration refused: ground set size N={n} exceeds cap {cap}")
        self.n = n
        self.cap = cap


def _as_prob(x) -> float | Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x) if "/" in x else float(x)
    return float(x)


@dataclass(frozen=True)
class GroundSet:
    """Ground set of ``size`` elements with inclusion probabilities.

    Probabilities may be given as :class:`fractions.Fraction`; when all of
    them are, thresholds and means are compared in exact arithmetic.
    """

    probs: tuple

    def __post_init__(self):
        probs = tuple(_as_prob(p) for p in self.probs)
        for i, p in enumerate(probs):
            if not (0 <= p <= 1):
                raise ValueError(f"probability p_{i}={p} outside [0, 1]")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, size: int, p) -> "GroundSet":
        return cls((p,) * size)

    @property
    def size(self) -> int:
        return len(self.probs)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(p, Fraction) for p in self.probs)

    @property
    def is_uniform(self) -> bool:
        return len(set(self.probs)) <= 1

    @cached_property
    def array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs], dtype=float)


@dataclass(frozen=True, eq=False)
class IndicatorFamily:
    """Ordered list of subsets ``Q(alpha)`` of a ground set.

    Members are stored in CSR form (``indptr``/``indices``) so that very
    large families (e.g. a million singletons) stay cheap. Duplicate members
    are allowed and count as distinct summands.
    """

    ground: GroundSet
    indptr: np.ndarray
    indices: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        if indptr.ndim != 1 or indptr.size == 0 or indptr[0] != 0 or indptr[-1] != indices.size:
            raise ValueError("malformed member index pointer")
        if indices.size and (indices.min() < 0 or indices.max() >= self.ground.size):
            raise ValueError(f"member element out of range for ground set of size {self.ground.size}")
        if self.labels is not None and len(self.labels) != indptr.size - 1:
            raise ValueError("labels must have one entry per member")
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_members(cls, ground: GroundSet, members: Iterable[Iterable[int]], labels=None) -> "IndicatorFamily":
        indptr = [0]
        indices: list[int] = []
        for q in members:
            q = sorted(set(int(i) for i in q))
            indices.extend(q)
            indptr.append(len(indices))
        return cls(ground, np.array(indptr), np.array(indices, dtype=np.int64),
                   None if labels is None else tuple(labels))

    @classmethod
    def singletons(cls, ground: GroundSet) -> "IndicatorFamily":
        n = ground.size
        return cls(ground, np.arange(n + 1), np.arange(n))

    def __len__(self) -> int:
        return self.indptr.size - 1

    def member(self, alpha: int) -> frozenset:
        if not 0 <= alpha < len(self):
            raise IndexError(f"member index {alpha} out of range [0, {len(self)})")
        return frozenset(int(i) for i in self.indices[self.indptr[alpha]:self.indptr[alpha + 1]])

    @cached_property
    def members(self) -> tuple:
        return tuple(self.member(a) for a in range(len(self)))

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def incidence(self) -> sparse.csr_matrix:
        """Members x elements 0/1 matrix."""
        data = np.ones(self.indices.size, dtype=np.float64)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(len(self), self.ground.size))

    @cached_property
    def masks(self) -> list[int]:
        return [sum(1 << i for i in q) for q in self.members]

    @cached_property
    def count_table(self) -> np.ndarray | None:
        """``X(S)`` for all outcomes when ``2**N`` times the member count is small, else None."""
        n = self.ground.size
        if n > _LOW_BITS or (1 << n) * max(len(set(self.masks)), 1) > _TABLE_BUDGET:
            return None
        return _count_table(self.masks, n)

    @cached_property
    def log_expectations(self) -> np.ndarray:
        """``log E I_alpha`` per member (``-inf`` when some ``p_i = 0``)."""
        with np.errstate(divide="ignore"):
            logp = np.log(self.ground.array)
        out = np.zeros(len(self))
        np.add.at(out, np.repeat(np.arange(len(self)), self.sizes), logp[self.indices])
        return out

    def exact_mean(self) -> Fraction | None:
        """``E X`` as a Fraction when every probability is exact, else None."""
        if not self.ground.is_exact:
            return None
        probs = self.ground.probs
        total = Fraction(0)
        for q in self.members:
            term = Fraction(1)
            for i in q:
                term *= probs[i]
            total += term
        return total


def family_mean(family: IndicatorFamily) -> float:
    """``E X`` as a float."""
    return math.fsum(np.exp(family.log_expectations))


def expect_indicator(family: IndicatorFamily, alpha: int) -> float:
    """``E I_alpha``: the product of ``p_i`` over ``Q(alpha)`` (1 for the empty set)."""
    q = family.member(alpha)
    return math.prod(float(family.ground.probs[i]) for i in q)


@dataclass(frozen=True)
class FamilyStats:
    mu: float
    pi: float
    lam: float
    delta: float | None
    n_members: int
    ordered_overlap_pairs: int

    @property
    def delta_defined(self) -> bool:
        return self.delta is not None

    @property
    def delta_or_zero(self) -> float:
        return 0.0 if self.delta is None else self.delta

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "pi": self.pi,
            "lambda": self.lam,
            "delta": self.delta,
            "delta_defined": self.delta_defined,
            "n_members": self.n_members,
            "ordered_overlap_pairs": self.ordered_overlap_pairs,
        }


def compute_stats(family: IndicatorFamily) -> FamilyStats:
    """Dependency statistics ``mu``, ``Pi``, ``Lambda``, ``delta``.

    ``Lambda`` sums ``E I_alpha I_beta`` over ORDERED pairs ``alpha != beta``
    with overlapping sets, so each unordered overlapping pair counts twice.
    """
    m = len(family)
    if m == 0:
        return FamilyStats(0.0, 0.0, 0.0, None, 0, 0)
    loge = family.log_expectations
    e = np.exp(loge)
    mu = math.fsum(e)
    pi = float(e.max())

    active = np.flatnonzero(e > 0)
    pair_sum = 0.0
    n_pairs = 0
    # ordered pairs are counted over all members, zero-expectation ones included
    inc = family.incidence
    counts = (inc @ inc.T).tocsr()
    counts.setdiag(0)
    counts.eliminate_zeros()
    n_pairs = int(counts.nnz)
    if active.size > 1 and n_pairs:
        sub = inc[active]
        with np.errstate(divide="ignore"):
            logp = np.log(family.ground.array)
        # shifted weights are never zero, so the sparsity pattern is exactly "sets intersect"
        shifted = (sub @ sparse.diags(logp - 1.0) @ sub.T).tocsr()
        overlap = (sub @ sub.T).tocsr()
        shifted.sort_indices()
        overlap.sort_indices()
        coo_s = shifted.tocoo()
        coo_o = overlap.tocoo()
        if not (np.array_equal(coo_s.row, coo_o.row) and np.array_equal(coo_s.col, coo_o.col)):
            raise AssertionError("overlap structure mismatch")
        off = coo_s.row != coo_s.col
        rows, cols = coo_s.row[off], coo_s.col[off]
        log_int = coo_s.data[off] + coo_o.data[off]
        la = loge[active]
        terms = np.exp(la[rows] + la[cols] - log_int)
        pair_sum = math.fsum(terms)
    lam = mu + pair_sum
    delta = lam / mu - 1.0 if mu > 0 else None
    return FamilyStats(mu, pi, lam, delta, m, n_pairs)


@dataclass(frozen=True)
class ExactDistribution:
    support: np.ndarray
    pmf: np.ndarray
    source_size: int
    mean_exact: Fraction | None = field(default=None, compare=False)

    @property
    def mean(self) -> float:
        return math.fsum(self.support * self.pmf)

    @property
    def variance(self) -> float:
        m = self.mean
        return math.fsum((self.support - m) ** 2 * self.pmf)

    def as_dict(self) -> dict:
        return {int(v): float(w) for v, w in zip(self.support, self.pmf)}

    def tail(self, threshold, strict: bool = False) -> float:
        """``Pr(X <= threshold)`` (or ``<`` when strict)."""
        mask = _below(self.support, threshold, strict)
        return math.fsum(self.pmf[mask])

    def log_laplace(self, s: float) -> float:
        if s < 0:
            raise ValueError("Laplace transform argument must be >= 0")
        keep = self.pmf > 0
        return float(logsumexp(np.log(self.pmf[keep]) - s * self.support[keep]))

    def log_restricted_laplace(self, s: float, threshold, strict: bool = True) -> float:
        """``log E(e^{-sX} 1{X < threshold})``."""
        keep = (self.pmf > 0) & _below(self.support, threshold, strict)
        if not keep.any():
            return -math.inf
        return float(logsumexp(np.log(self.pmf[keep]) - s * self.support[keep]))


def _below(values: np.ndarray, threshold, strict: bool) -> np.ndarray:
    if isinstance(threshold, Fraction):
        if strict:
            return np.array([Fraction(int(v)) < threshold for v in values], dtype=bool)
        return np.array([Fraction(int(v)) <= threshold for v in values], dtype=bool)
    t = float(threshold)
    if strict:
        return values < t - REL_SLACK * abs(t)
    return values <= t + REL_SLACK * abs(t)


def tail_threshold(family: IndicatorFamily, eps, mu: float | None = None):
    """``(1 - eps) * E X``, exact when probabilities and ``eps`` allow it."""
    exact_mu = family.exact_mean()
    if exact_mu is not None:
        # floats are read as the decimal literal they print as (0.2 -> 1/5)
        e = eps if isinstance(eps, (Fraction, int)) else Fraction(repr(float(eps)))
        return (1 - e) * exact_mu
    if mu is None:
        mu = family_mean(family)
    return (1.0 - float(eps)) * mu


def _low_weight_table(probs: np.ndarray) -> np.ndarray:
    w = np.ones(1)
    for p in probs:
        w = np.concatenate((w * (1.0 - p), w * p))
    return w


def count_members(masks: Sequence[int], outcomes: np.ndarray) -> np.ndarray:
    """``X(S)`` for each integer-encoded outcome ``S`` (ground sets of at most 62 elements)."""
    x = np.zeros(outcomes.shape, dtype=np.int64)
    uniq: dict[int, int] = {}
    for m in masks:
        uniq[m] = uniq.get(m, 0) + 1
    for m, mult in uniq.items():
        if m == 0:
            x += mult
        else:
            mk = np.int64(m)
            x += mult * ((outcomes & mk) == mk)
    return x


def outcome_chunks(n: int, cap: int = DEFAULT_ENUMERATION_CAP, chunk_bits: int = _LOW_BITS):
    """Yield all ``2**n`` outcomes as int64 bit sets, in blocks."""
    if n > cap:
        raise EnumerationCapError(n, cap)
    total = 1 << n
    step = 1 << min(n, chunk_bits)
    for start in range(0, total, step):
        yield np.arange(start, start + step, dtype=np.int64)


def _count_table(masks: Sequence[int], bits: int) -> np.ndarray:
    return count_members(masks, np.arange(1 << bits, dtype=np.int64))


def outcome_counts(family: IndicatorFamily, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """``X(S)`` for every outcome ``S`` encoded as an integer bit set."""
    n = family.ground.size
    if n > cap or n > _LOW_BITS:
        raise EnumerationCapError(n, min(cap, _LOW_BITS))
    return _count_table(family.masks, n)


def exact_distribution(family: IndicatorFamily, cap: int = DEFAULT_ENUMERATION_CAP) -> ExactDistribution:
    """Full pmf of ``X`` by summing over all ``2**N`` subsets of the ground set."""
    n = family.ground.size
    if n > cap:
        raise EnumerationCapError(n, cap)
    probs = family.ground.array
    low_bits = min(n, _LOW_BITS)
    high_bits = n - low_bits
    low_mask = (1 << low_bits) - 1
    w_low = _low_weight_table(probs[:low_bits])
    high_probs = probs[low_bits:]

    split = [(m & low_mask, m >> low_bits) for m in family.masks]
    partial: dict[int, list[float]] = {}
    for h in range(1 << high_bits):
        w_high = 1.0
        for i, p in enumerate(high_probs):
            w_high *= p if (h >> i) & 1 else 1.0 - p
        if w_high == 0.0:
            continue
        x = _count_table([lo for lo, hi in split if (h & hi) == hi], low_bits)
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ws = w_low[order]
        bounds = np.flatnonzero(np.diff(xs)) + 1
        starts = np.concatenate(([0], bounds))
        ends = np.concatenate((bounds, [xs.size]))
        for a, b in zip(starts, ends):
            # np.sum is pairwise on contiguous slices
            partial.setdefault(int(xs[a]), []).append(float(ws[a:b].sum()) * w_high)
    support = np.array(sorted(partial), dtype=np.int64)
    pmf = np.array([math.fsum(partial[v]) for v in support])
    keep = pmf > 0
    if not keep.any():
        keep[:] = True
    return ExactDistribution(support[keep], pmf[keep], n, family.exact_mean())


def exact_lower_tail(family: IndicatorFamily, eps, strict: bool = False,
                     cap: int = DEFAULT_ENUMERATION_CAP, dist: ExactDistribution | None = None,
                     mu: float | None = None) -> float:
    """Exact ``Pr(X <= (1 - eps) E X)``; ``strict`` gives ``Pr(X < ...)``."""
    if not 0 <= float(eps) <= 1:
        raise ValueError(f"eps={eps} outside [0, 1]")
    if dist is None:
        dist = exact_distribution(family, cap)
    return dist.tail(tail_threshold(family, eps, mu), strict)


def exact_laplace(family: IndicatorFamily, s: float, cap: int = DEFAULT_ENUMERATION_CAP,
                  dist: ExactDistribution | None = None) -> float:
    """``E exp(-s X)``."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if dist is None:
        dist = exact_distribution(family, cap)
    return math.fsum(dist.pmf * np.exp(-s * dist.support))


def exact_variance(family: IndicatorFamily, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    return exact_distribution(family, cap).variance


LOG_TINY = -700.0   # below this the direct CDF is subnormal or zero


def binomial_log_cdf(n: int, p: float, m) -> float:
    """``log Pr(Bin(n, p) <= m)``.

    The regularised incomplete beta is accurate while the CDF is a normal
    double; deeper tails are summed from log point masses.
    """
    if isinstance(m, Fraction):
        k_max = math.floor(m)
    else:
        m = float(m)
        k_max = math.floor(m + REL_SLACK * abs(m))
    if k_max < 0:
        return -math.inf
    if k_max >= n:
        return 0.0
    p = float(p)
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return -math.inf
    direct = float(binom.logcdf(k_max, n, p))
    if direct > LOG_TINY:
        return min(0.0, direct)
    ks = np.arange(k_max + 1)
    return min(0.0, float(logsumexp(binom.logpmf(ks, n, p))))


@dataclass(frozen=True)
class MCEstimate:
    point: float
    ci_low: float
    ci_high: float
    samples: int
    seed: int
    hits: int = 0
    workers: int = 1

    @property
    def sigma(self) -> float:
        """Wilson half-width expressed in standard deviations of one."""
        return (self.ci_high - self.ci_low) / (2.0 * WILSON_Z)

    def to_dict(self) -> dict:
        return {"point": self.point, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "samples": self.samples, "seed": self.seed, "hits": self.hits, "workers": self.workers}


def wilson_interval(hits: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one sample")
    ph = hits / n
    denom = 1.0 + z * z / n
    center = (ph + z * z / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    return max(0.0, min(ph, center - half)), min(1.0, max(ph, center + half))


def _thread_cap() -> int:
    """Parallelism cap from ``TAILKIT_THREADS`` (defaults to 1)."""
    try:
        return max(1, int(os.environ.get("TAILKIT_THREADS", "1")))
    except ValueError:
        return 1


def _default_workers() -> int:
    return _thread_cap()


def sample_counts(family: IndicatorFamily, samples: int, rng: np.random.Generator,
                  chunk: int | None = None) -> np.ndarray:
    """Draw ``samples`` realisations of ``Gamma_p`` and return ``X`` for each."""
    n = family.ground.size
    probs = family.ground.array
    m = len(family)
    if chunk is None:
        chunk = int(max(256, min(1 << 14, 10_000_000 // max(m, 1))))
    out = np.empty(samples, dtype=np.int64)
    table = family.count_table
    small = table is None and n <= 62
    if small:
        weights = (np.int64(1) << np.arange(n, dtype=np.int64))
        uniq: dict[int, int] = {}
        for mk in family.masks:
            uniq[mk] = uniq.get(mk, 0) + 1
        mask_items = [(np.int64(k), v) for k, v in uniq.items()]
    elif table is None:
        inc = family.incidence
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        bits = rng.random((b, n)) < probs
        if table is not None:
            packed = np.packbits(bits, axis=1, bitorder="little")
            s = np.zeros(b, dtype=np.int64)
            for byte in range(packed.shape[1]):
                s |= packed[:, byte].astype(np.int64) << (8 * byte)
            x = table[s]
        elif small:
            s = bits.astype(np.int64) @ weights
            x = np.zeros(b, dtype=np.int64)
            for mk, mult in mask_items:
                x += mult * ((s & mk) == mk)
        else:
            missing = inc @ (~bits).T.astype(np.float64)
            x = (np.asarray(missing) == 0).sum(axis=0).astype(np.int64)
        out[done:done + b] = x
        done += b
    return out


def mc_counts(family: IndicatorFamily, samples: int, seed: int, workers: int | None = None) -> np.ndarray:
    """Seeded samples of ``X``; deterministic for fixed ``(seed, samples, workers)``.

    ``workers`` fixes the number of RNG substreams; how many run at once is
    capped separately by ``TAILKIT_THREADS`` and never changes the result.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    workers = _default_workers() if workers is None else max(1, int(workers))
    streams = np.random.SeedSequence(int(seed) & ((1 << 64) - 1)).spawn(workers)
    base, extra = divmod(samples, workers)
    sizes = [base + (w < extra) for w in range(workers)]

    def run(w):
        return sample_counts(family, sizes[w], np.random.Generator(np.random.PCG64(streams[w])))

    threads = min(workers, _thread_cap())
    if threads == 1:
        parts = [run(w) for w in range(workers)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(workers)))
    return np.concatenate(parts)


def mc_lower_tail(family: IndicatorFamily, eps, samples: int, seed: int,
                  workers: int | None = None, strict: bool = False) -> MCEstimate:
    """Plain Monte Carlo estimate of ``Pr(X <= (1 - eps) E X)`` with a Wilson 95% interval."""
    if not 0 <= float(eps) <= 1:
        raise ValueError(f"eps={eps} outside [0, 1]")
    workers = _default_workers() if workers is None else max(1, int(workers))
    x = mc_counts(family, samples, seed, workers)
    return tail_estimate(family, x, eps, seed, workers, strict)


def tail_estimate(family: IndicatorFamily, x: np.ndarray, eps, seed: int, workers: int = 1,
                  strict: bool = False, mu: float | None = None) -> MCEstimate:
    """Wilson estimate of the lower tail from precomputed samples ``x``."""
    threshold = tail_threshold(family, eps, mu)
    values, counts = np.unique(x, return_counts=True)
    hits = int(counts[_below(values, threshold, strict)].sum())
    lo, hi = wilson_interval(hits, x.size)
    return MCEstimate(hits / x.size, lo, hi, int(x.size), int(seed), hits, workers)


def read_family(path) -> IndicatorFamily:
    """Parse the text family format.

    Line 1 holds ``N``, line 2 the ``N`` probabilities (``a/b`` tokens are read
    as exact fractions), then one member per line as element indices. ``-``
    denotes an empty member; ``#`` starts a comment.
    """
    with open(path) as fh:
        return parse_family(fh.read())


def parse_family(text: str) -> IndicatorFamily:
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise ValueError("empty family file")
    n = int(lines[0])
    pos = 1
    if n > 0:
        if len(lines) < 2:
            raise ValueError("missing probability line")
        probs = lines[1].split()
        if len(probs) == 1 and n > 1:
            probs = probs * n
        if len(probs) != n:
            raise ValueError(f"expected {n} probabilities, found {len(probs)}")
        pos = 2
    else:
        probs = []
    members = []
    for line in lines[pos:]:
        members.append([] if line == "-" else [int(t) for t in line.split()])
    return IndicatorFamily.from_members(GroundSet(tuple(probs)), members)


def format_family(family: IndicatorFamily, comment: str | None = None) -> str:
    out = []
    if comment:
        out.extend(f"# {c}" for c in comment.splitlines())
    out.append(str(family.ground.size))
    if family.ground.size:
        out.append(" ".join(str(p) if isinstance(p, Fraction) else repr(p) for p in family.ground.probs))
    for q in family.members:
        out.append(" ".join(str(i) for i in sorted(q)) if q else "-")
    return "\n".join(out) + "\n"


def write_family(family: IndicatorFamily, path, comment: str | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(format_family(family, comment))
