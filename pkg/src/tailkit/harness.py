"""Batch experiments: bounds against ground truth, and rate-function trends.

A config is a JSON object::

    {
      "instance": {"kind": "subgraph", "H": "K3", "n": 6, "p": [0.1, 0.5]},
      "eps": [0.1, 0.5, 1.0],
      "bounds": ["janson", "harris", "lt_main", "lt2", "lt3", "lt4"],
      "truth": {"mode": "exact"} | {"mode": "mc", "samples": 100000, "seed": 1, "workers": 1},
      "output": "out/k3",
      "figures": true
    }

``n`` and ``p`` may be scalars or lists; every combination is one instance.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bounds as B
from .bootstrap import rsize_transfer
from .core import (
    DEFAULT_ENUMERATION_CAP,
    ExactDistribution,
    IndicatorFamily,
    compute_stats,
    exact_distribution,
    mc_counts,
    read_family,
    tail_estimate,
    tail_threshold,
)
from .instances import (
    KGraph,
    ap_family,
    complete,
    parse_kgraph,
    path,
    psi_k,
    schur_family,
    single_edge,
    subgraph_family,
    turan_lower_bound,
)
from .phi import phi_neg

CSV_VERSION = 1
LOG_SLACK = 1e-10
MC_FLOOR = 1e-4
MC_SIGMAS = 3.0
TREND_BAND = 10.0

BOUND_NAMES = ("janson", "harris", "lt_main", "lt2", "lt3", "lt4", "rsize", "turan")
DEFAULT_BOUNDS = ("janson", "harris", "lt_main", "lt2", "lt3", "lt4")
TRUTH_COLUMNS = ("tail_le", "tail_lt", "pr_zero")
CSV_COLUMNS = (
    ["schema_version", "instance", "kind", "n", "p", "eps", "truth_mode",
     "mu", "Pi", "Lambda", "delta"]
    + [f"{c}{s}" for c in TRUTH_COLUMNS for s in ("", "_ci_low", "_ci_high")]
    + ["mc_resolved", "ratio_phiH", "ratio_janson", "ratio_psi"]
    + [f"{b}_{s}" for b in BOUND_NAMES for s in ("log", "applicable")]
)


class SandwichViolation(RuntimeError):
    """An applicable bound disagrees with the ground truth."""


class MCOutOfReach(RuntimeError):
    """A tail is below the Monte Carlo floor."""


# ------------------------------------------------------------ config


@dataclass
class ExperimentConfig:
    instance: dict
    eps: list = field(default_factory=list)
    bounds: list = field(default_factory=lambda: list(DEFAULT_BOUNDS))
    truth: dict = field(default_factory=lambda: {"mode": "exact"})
    output: str | None = None
    figures: bool = True
    cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self):
        for e in self.eps:
            if not 0.0 <= float(e) <= 1.0:
                raise ValueError(f"eps value {e} outside [0, 1]")
        unknown = set(self.bounds) - set(BOUND_NAMES)
        if unknown:
            raise ValueError(f"unknown bounds: {sorted(unknown)}")
        mode = self.truth.get("mode", "exact")
        if mode not in ("exact", "mc"):
            raise ValueError(f"truth mode must be exact or mc, got {mode!r}")
        if mode == "mc" and int(self.truth.get("samples", 0)) < 1:
            raise ValueError("mc truth needs samples >= 1")
        if "kind" not in self.instance:
            raise ValueError("instance needs a kind")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"instance", "eps", "bounds", "truth", "output", "figures", "cap"}
        extra = set(data) - known - {"trend"}
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def load(cls, path_) -> "ExperimentConfig":
        with open(path_) as fh:
            return cls.from_dict(json.load(fh))


def _as_list(x) -> list:
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _prob(x):
    if isinstance(x, str):
        return Fraction(x) if "/" in x else float(x)
    return x


def parse_graph(spec) -> KGraph:
    """``K<m>``, ``P<m>`` (path on m vertices), ``C<m>``, ``edge``, a dict, or a file path."""
    if isinstance(spec, dict):
        return KGraph(int(spec["k"]), int(spec["v"]), tuple(tuple(e) for e in spec["edges"]))
    s = str(spec)
    if s == "edge":
        return single_edge(2)
    if s[:1] in "KPC" and s[1:].isdigit():
        m = int(s[1:])
        if s[0] == "K":
            return complete(2, m)
        if s[0] == "P":
            return path(m - 1)
        return KGraph(2, m, tuple((i, (i + 1) % m) for i in range(m)))
    with open(s) as fh:
        return parse_kgraph(fh.read())


@dataclass
class Instance:
    ident: str
    kind: str
    n: int | None
    p: object
    family: IndicatorFamily
    phi_H: float | None = None
    psi: float | None = None
    H: KGraph | None = None


def build_instances(spec: dict) -> list[Instance]:
    kind = spec["kind"]
    if kind == "family":
        fam = read_family(spec["path"])
        return [Instance(Path(spec["path"]).stem, "family", None, None, fam)]
    out = []
    for n in _as_list(spec["n"]):
        ps = _as_list(spec["p"]) if "p" in spec else [float(n) ** float(spec["p_power"])]
        for p in ps:
            p = _prob(p)
            out.append(build_instance(spec, int(n), p))
    return out


def build_instance(spec: dict, n: int, p) -> Instance:
    kind = spec["kind"]
    ident = f"{kind}-n{n}-p{p}"
    if kind == "subgraph":
        h = parse_graph(spec["H"])
        inst = subgraph_family(h, n, p)
        return Instance(f"{spec['H'] if isinstance(spec['H'], str) else 'H'}-n{n}-p{p}", kind, n, p,
                        inst.family, phi_H=inst.phi_H, H=h)
    if kind == "ap":
        k = int(spec.get("k", 3))
        fam, _ = ap_family(k, n, p)
        return Instance(f"ap{k}-n{n}-p{p}", kind, n, p, fam, psi=psi_k(k, n, float(p)))
    if kind == "schur":
        fam, _ = schur_family(n, p)
        return Instance(ident, kind, n, p, fam)
    raise ValueError(f"unknown instance kind {kind!r}")


# ------------------------------------------------------------ truth


@dataclass
class Truth:
    mode: str
    tail_le: float
    tail_lt: float
    pr_zero: float
    ci: dict = field(default_factory=dict)   # column -> (low, high, sigma) for MC
    resolved: bool = True


def exact_truth(family: IndicatorFamily, eps, dist: ExactDistribution, mu: float) -> Truth:
    thr = tail_threshold(family, eps, mu)
    zero = float(dist.pmf[0]) if dist.support.size and dist.support[0] == 0 else 0.0
    return Truth("exact", dist.tail(thr), dist.tail(thr, strict=True), zero)


def mc_truth(family: IndicatorFamily, eps, x: np.ndarray, seed: int, workers: int, mu: float) -> Truth:
    le = tail_estimate(family, x, eps, seed, workers, mu=mu)
    lt = tail_estimate(family, x, eps, seed, workers, strict=True, mu=mu)
    z = tail_estimate(family, x, 1, seed, workers, mu=mu)
    ci = {"tail_le": le, "tail_lt": lt, "pr_zero": z}
    resolved = le.point >= MC_FLOOR
    return Truth("mc", le.point, lt.point, z.point,
                 {k: (v.ci_low, v.ci_high, v.sigma) for k, v in ci.items()}, resolved)


# ------------------------------------------------------------ rows


@dataclass
class ExperimentRow:
    instance: str
    kind: str
    n: int | None
    p: object
    eps: float
    truth: Truth
    stats: dict
    bounds: dict                     # name -> BoundResult
    ratios: dict

    def csv_record(self) -> dict:
        rec = {c: "" for c in CSV_COLUMNS}
        rec.update({
            "schema_version": CSV_VERSION, "instance": self.instance, "kind": self.kind,
            "n": "" if self.n is None else self.n, "p": "" if self.p is None else str(self.p),
            "eps": _fmt(self.eps), "truth_mode": self.truth.mode,
            "mu": _fmt(self.stats["mu"]), "Pi": _fmt(self.stats["pi"]),
            "Lambda": _fmt(self.stats["lambda"]), "delta": _fmt(self.stats["delta"]),
            "mc_resolved": int(self.truth.resolved),
        })
        for c in TRUTH_COLUMNS:
            rec[c] = _fmt(getattr(self.truth, c))
            if c in self.truth.ci:
                rec[c + "_ci_low"] = _fmt(self.truth.ci[c][0])
                rec[c + "_ci_high"] = _fmt(self.truth.ci[c][1])
        for k, v in self.ratios.items():
            rec[k] = _fmt(v)
        for name, br in self.bounds.items():
            rec[f"{name}_log"] = _fmt(br.log_value)
            rec[f"{name}_applicable"] = int(br.applicable)
        return rec

    def to_dict(self) -> dict:
        return _jsonable({
            "instance": self.instance, "kind": self.kind, "n": self.n,
            "p": None if self.p is None else str(self.p), "eps": self.eps,
            "truth": {"mode": self.truth.mode, "tail_le": self.truth.tail_le,
                      "tail_lt": self.truth.tail_lt, "pr_zero": self.truth.pr_zero,
                      "ci": {k: list(v) for k, v in self.truth.ci.items()},
                      "resolved": self.truth.resolved},
            "stats": self.stats,
            "bounds": {k: v.to_dict() for k, v in self.bounds.items()},
            "ratios": self.ratios,
        })


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _truth_for(br: B.BoundResult) -> str:
    return {"le": "tail_le", "lt": "tail_lt", "eq0": "pr_zero"}[br.tail]


def sandwich_problems(row: ExperimentRow) -> list[str]:
    """Bounds contradicting the truth in ``row`` (empty when consistent)."""
    problems = []
    t = row.truth
    if t.mode == "mc" and not t.resolved:
        return problems
    for name, br in row.bounds.items():
        if br.direction == B.LOWER and not br.applicable:
            continue
        col = _truth_for(br)
        if t.mode == "exact":
            lt = _log(getattr(t, col))
            if br.direction == B.LOWER and br.log_value > lt + LOG_SLACK:
                problems.append(f"{name}: log bound {br.log_value!r} > log truth {lt!r} ({col})")
            if br.direction == B.UPPER and lt > br.log_value + LOG_SLACK:
                problems.append(f"{name}: log truth {lt!r} > log upper bound {br.log_value!r} ({col})")
        else:
            point = getattr(t, col)
            sig = t.ci[col][2]
            if br.direction == B.LOWER and br.value > point + MC_SIGMAS * sig + 1e-15:
                problems.append(f"{name}: bound {br.value!r} exceeds MC {point!r} by > {MC_SIGMAS} sigma")
            if br.direction == B.UPPER and point - MC_SIGMAS * sig > br.value + 1e-15:
                problems.append(f"{name}: MC {point!r} exceeds upper bound {br.value!r} by > {MC_SIGMAS} sigma")
    return problems


def evaluate_bounds(inst: Instance, eps: float, stats, names) -> dict:
    out = {}
    for name in names:
        if name == "janson":
            out[name] = B.janson_upper(stats, eps)
        elif name == "harris":
            out[name] = B.harris_lower(inst.family, stats)
        elif name == "lt_main":
            out[name] = B.lt_main(stats, eps)
        elif name == "lt2":
            out[name] = B.lt2(stats, eps)
        elif name == "lt3":
            out[name] = B.lt3(stats, eps)
        elif name == "lt4":
            out[name] = B.lt4(stats, eps)
        elif name == "rsize":
            if eps > 0:
                out[name] = rsize_transfer(inst.family, eps, stats, check_evar=False)
        elif name == "turan":
            if inst.H is not None:
                out[name] = turan_lower_bound(inst.H, inst.n, inst.p)
    return out


def ratios_for(inst: Instance, eps: float, stats, tail: float) -> dict:
    """``log tail / (phi(-eps) * scale)`` for the scales that apply to the instance."""
    ph = phi_neg(eps)
    lt = _log(tail)
    out = {}

    def ratio(scale):
        if scale is None or ph == 0 or scale == 0 or not math.isfinite(lt):
            return None
        return lt / (ph * scale)

    out["ratio_phiH"] = ratio(inst.phi_H)
    out["ratio_janson"] = ratio(stats.mu ** 2 / stats.lam if stats.lam > 0 else None)
    out["ratio_psi"] = ratio(inst.psi)
    return out


def _rows_for_instance(inst: Instance, cfg: ExperimentConfig) -> list[ExperimentRow]:
    stats = compute_stats(inst.family)
    sd = stats.to_dict()
    mode = cfg.truth.get("mode", "exact")
    rows = []
    if not cfg.eps:
        return rows
    if mode == "exact":
        dist = exact_distribution(inst.family, cfg.cap)
    else:
        seed = int(cfg.truth.get("seed", 0))
        workers = int(cfg.truth.get("workers", 1))
        x = mc_counts(inst.family, int(cfg.truth["samples"]), seed, workers)
    for eps in cfg.eps:
        eps = float(eps)
        truth = (exact_truth(inst.family, eps, dist, stats.mu) if mode == "exact"
                 else mc_truth(inst.family, eps, x, seed, workers, stats.mu))
        bnds = evaluate_bounds(inst, eps, stats, cfg.bounds)
        row = ExperimentRow(inst.ident, inst.kind, inst.n, inst.p, eps, truth, sd, bnds,
                            ratios_for(inst, eps, stats, truth.tail_le))
        problems = sandwich_problems(row)
        if problems:
            raise SandwichViolation(f"{inst.ident} eps={eps}: " + "; ".join(problems))
        rows.append(row)
    return rows


@dataclass
class ExperimentResult:
    rows: list
    files: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        return rows_to_csv(self.rows)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.csv_record())
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, output: str | None = None, figures: bool | None = None) -> ExperimentResult:
    """Evaluate every configured bound against the truth on every instance and ``eps``.

    Rows come out in config order. With an output prefix, ``<prefix>.csv``
    and ``<prefix>.json`` are written (plus a PNG when figures are on).
    """
    rows = []
    for inst in build_instances(cfg.instance):
        rows.extend(_rows_for_instance(inst, cfg))
    result = ExperimentResult(rows)
    output = output if output is not None else cfg.output
    figures = cfg.figures if figures is None else figures
    if output:
        prefix = Path(output)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        csv_path = prefix.with_name(prefix.name + ".csv")
        json_path = prefix.with_name(prefix.name + ".json")
        csv_path.write_text(result.csv_text())
        json_path.write_text(json.dumps({"schema_version": CSV_VERSION,
                                         "rows": [r.to_dict() for r in rows]}, indent=1) + "\n")
        result.files = {"csv": str(csv_path), "json": str(json_path)}
        if figures and rows:
            from .plots import plot_experiment
            result.files["figure"] = plot_experiment(rows, prefix.with_name(prefix.name + ".png"))
    return result


# ------------------------------------------------------------ trends


@dataclass
class TrendRow:
    n: int
    p: float
    eps: float
    tail: float
    source: str
    ci: tuple | None
    scales: dict
    normalized: dict


@dataclass
class TrendReport:
    rows: list
    bands: dict
    within: dict

    def to_dict(self) -> dict:
        return _jsonable({
            "rows": [r.__dict__ for r in self.rows],
            "bands": self.bands,
            "band_limit": TREND_BAND,
            "within_band": self.within,
        })


def rate_function_trend(spec: dict, eps: float, truth: dict | None = None,
                        cap: int = DEFAULT_ENUMERATION_CAP) -> TrendReport:
    """``-log Pr(X <= (1-eps) mu) / (phi(-eps) * scale)`` across the instance's n grid.

    Scales: ``Phi_H`` (subgraph counts), ``mu^2 / Lambda`` (all) and ``Psi_k``
    (progressions). The band is the max/min ratio of each normalised column.
    """
    truth = truth or {"mode": "auto"}
    mode = truth.get("mode", "auto")
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError("trend needs eps in (0, 1]")
    ph = phi_neg(eps)
    rows = []
    for inst in build_instances(spec):
        stats = compute_stats(inst.family)
        use_exact = mode == "exact" or (mode == "auto" and inst.family.ground.size <= cap)
        if use_exact:
            tail = exact_distribution(inst.family, cap).tail(tail_threshold(inst.family, eps, stats.mu))
            source, ci = "exact", None
        else:
            samples = int(truth.get("samples", 1_000_000))
            seed = int(truth.get("seed", 0))
            workers = int(truth.get("workers", 1))
            x = mc_counts(inst.family, samples, seed, workers)
            est = tail_estimate(inst.family, x, eps, seed, workers, mu=stats.mu)
            if est.point < MC_FLOOR:
                raise MCOutOfReach(
                    f"{inst.ident}: MC tail {est.point:.3g} below the {MC_FLOOR:g} floor; refusing to extrapolate")
            tail, source, ci = est.point, "mc", (est.ci_low, est.ci_high)
        scales = {"janson": stats.mu ** 2 / stats.lam if stats.lam > 0 else None}
        if inst.phi_H is not None:
            scales["phiH"] = inst.phi_H
        if inst.psi is not None:
            scales["psi"] = inst.psi
        norm = {}
        for k, sc in scales.items():
            if sc and tail > 0:
                norm[k] = -math.log(tail) / (ph * sc)
            else:
                norm[k] = None
        rows.append(TrendRow(inst.n, float(inst.p), eps, tail, source, ci, scales, norm))
    bands, within = {}, {}
    keys = sorted({k for r in rows for k in r.normalized})
    for k in keys:
        vals = [r.normalized.get(k) for r in rows]
        vals = [v for v in vals if v is not None and v > 0]
        if len(vals) == len(rows) and vals:
            bands[k] = max(vals) / min(vals)
            within[k] = bands[k] < TREND_BAND
        else:
            bands[k] = None
            within[k] = None
    return TrendReport(rows, bands, within)


def run_trend(cfg_dict: dict, output: str | None = None, figures: bool = True) -> TrendReport:
    """Trend experiment from a config dict with a ``trend`` block (``eps`` and optional ``truth``)."""
    t = cfg_dict.get("trend", {})
    eps = t.get("eps", (cfg_dict.get("eps") or [None])[0])
    if eps is None:
        raise ValueError("trend config needs an eps")
    rep = rate_function_trend(cfg_dict["instance"], eps, t.get("truth", cfg_dict.get("truth")),
                              int(cfg_dict.get("cap", DEFAULT_ENUMERATION_CAP)))
    output = output if output is not None else cfg_dict.get("output")
    if output:
        prefix = Path(output)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        prefix.with_name(prefix.name + "_trend.json").write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
        if figures and cfg_dict.get("figures", True) and rep.rows:
            from .plots import plot_trend
            plot_trend(rep, prefix.with_name(prefix.name + "_trend.png"))
    return rep

