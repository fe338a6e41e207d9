"""PNG figures for experiment reports (Agg backend, written next to the CSV)."""

from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bounds import LOWER  # noqa: E402

_STYLE = {"figure.dpi": 110, "axes.grid": True, "grid.alpha": 0.3, "font.size": 9, "legend.fontsize": 7}


def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else float("nan")


def plot_experiment(rows, path) -> str:
    """One panel per instance: log10 of the truth and of each bound against eps.

    Applicable bounds are drawn as filled markers, inapplicable ones hollow.
    """
    by_inst = defaultdict(list)
    for r in rows:
        by_inst[r.instance].append(r)
    k = len(by_inst)
    cols = min(3, k)
    nrows = math.ceil(k / cols)
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(nrows, cols, figsize=(4.2 * cols, 3.2 * nrows), squeeze=False)
        for ax, (name, rs) in zip(axes.flat, by_inst.items()):
            eps = [r.eps for r in rs]
            ax.plot(eps, [_log10(r.truth.tail_le) for r in rs], "k-", lw=2, label=f"truth ({rs[0].truth.mode})")
            names = list(rs[0].bounds)
            for j, b in enumerate(names):
                color = f"C{j}"
                ys = [r.bounds[b].log_value / math.log(10) if b in r.bounds else float("nan") for r in rs]
                ls = "--" if rs[0].bounds[b].direction == LOWER else ":"
                ax.plot(eps, ys, ls, color=color, lw=1, label=b)
                for x, y, r in zip(eps, ys, rs):
                    if b in r.bounds and math.isfinite(y):
                        face = color if r.bounds[b].applicable else "none"
                        ax.plot([x], [y], "o", ms=4, mfc=face, mec=color)
            ax.set_title(name)
            ax.set_xlabel("eps")
            ax.set_ylabel("log10 probability")
            lo = [_log10(r.truth.tail_le) for r in rs if r.truth.tail_le > 0]
            if lo:
                ax.set_ylim(min(lo) - 3, 0.3)
        for ax in list(axes.flat)[k:]:
            ax.set_visible(False)
        axes.flat[0].legend(loc="lower left")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return str(path)


def plot_trend(report, path) -> str:
    """Normalised rate ratios against n, one line per scale."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ns = [r.n for r in report.rows]
        for key in sorted(report.bands):
            ys = [r.normalized.get(key) for r in report.rows]
            ys = [float("nan") if y is None else y for y in ys]
            band = report.bands[key]
            label = key if band is None else f"{key} (band {band:.2f})"
            ax.plot(ns, ys, "o-", label=label)
        ax.set_xlabel("n")
        ax.set_ylabel("-log tail / (phi(-eps) scale)")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return str(path)
