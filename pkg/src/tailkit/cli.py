"""Command line entry point; every subcommand prints JSON on stdout."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import bounds as B
from .bootstrap import rcor_transfer, rsize2_transfer, rsize_transfer, vxsym_transfer
from .core import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapError,
    compute_stats,
    exact_distribution,
    exact_lower_tail,
    format_family,
    mc_lower_tail,
    read_family,
    write_family,
)
from .decomposition import load_decomposition
from .harness import ExperimentConfig, _jsonable, parse_graph, run_experiment, run_trend
from .instances import ap_family, format_kgraph, schur_family, subgraph_family
from .phi import phi_neg, varphi2_check, varphi3_factor, varphi_bounds_check, ONE_MINUS_INV_E


def _prob(s: str):
    return Fraction(s) if "/" in s else float(s)


def _emit(obj) -> None:
    json.dump(_jsonable(obj), sys.stdout, indent=1)
    sys.stdout.write("\n")


def cmd_stats(a):
    _emit(compute_stats(read_family(a.family)).to_dict())


def cmd_exact(a):
    fam = read_family(a.family)
    stats = compute_stats(fam)
    dist = exact_distribution(fam, a.cap)
    _emit({"eps": a.eps, "tail": exact_lower_tail(fam, a.eps, dist=dist, mu=stats.mu),
           "strict_tail": exact_lower_tail(fam, a.eps, strict=True, dist=dist, mu=stats.mu),
           "pmf": dist.as_dict(), "mean": dist.mean, "variance": dist.variance,
           "source_size": dist.source_size, "stats": stats.to_dict()})


def cmd_mc(a):
    fam = read_family(a.family)
    est = mc_lower_tail(fam, a.eps, a.samples, a.seed, a.workers)
    _emit(dict(est.to_dict(), eps=a.eps))


def cmd_phi(a):
    out = {"eps": a.eps, "phi": phi_neg(a.eps), "varphi": varphi_bounds_check(a.eps).__dict__}
    if a.eps >= ONE_MINUS_INV_E:
        out["varphi2"] = varphi2_check(a.eps).__dict__
    if a.A is not None:
        out["varphi3"] = varphi3_factor(a.eps, a.A).__dict__
    _emit(out)


def cmd_bounds(a):
    fam = read_family(a.family)
    stats = compute_stats(fam)
    _emit({"stats": stats.to_dict(), "bounds": [b.to_dict() for b in B.all_bounds(fam, a.eps, stats)]})


def cmd_holder(a):
    _emit(B.holder_report(read_family(a.family), a.eps, a.sigma, a.tau).to_dict())


def cmd_transfer(a):
    if a.which == "rsize":
        res = rsize_transfer(read_family(a.family), a.eps)
    elif a.which == "rsize2":
        res = rsize2_transfer(read_family(a.family), a.eps, a.tau, a.k)
    elif a.which == "rcor":
        truth = {"truth": a.truth, "samples": a.samples, "seed": a.seed}
        y = read_family(a.family)
        res = rcor_transfer(load_decomposition(y, a.decomp), a.eps, a.gamma, **truth)
    else:
        truth = {"truth": a.truth, "samples": a.samples, "seed": a.seed}
        u = [int(x) for x in a.U.split(",")] if a.U else list(range(a.n // 2))
        res = vxsym_transfer(parse_graph(a.H), parse_graph(a.G), a.n, _prob(a.p), a.eps, u,
                             ell=a.ell, **truth)
    _emit(res.to_dict())


def cmd_instance(a):
    p = _prob(a.p)
    prefix = Path(a.out) if a.out else None
    files = {}
    if a.kind == "subgraph":
        inst = subgraph_family(parse_graph(a.H), a.n, p)
        fam, side, decomp = inst.family, inst.sidecar(), None
    elif a.kind == "ap":
        fam, decomp = ap_family(a.k, a.n, p)
        side = {"kind": "ap", "k": a.k, "n": a.n, "p": str(p), "members": len(fam),
                "kappa": str(decomp.kappa)}
    else:
        fam, decomp = schur_family(a.n, p)
        side = {"kind": "schur", "n": a.n, "p": str(p), "members": len(fam), "kappa": str(decomp.kappa)}
    side["stats"] = compute_stats(fam).to_dict()
    if prefix:
        prefix.parent.mkdir(parents=True, exist_ok=True)
        files["family"] = str(prefix.with_suffix(".family"))
        write_family(fam, files["family"])
        files["sidecar"] = str(prefix.with_suffix(".json"))
        if decomp is not None:
            files["y_family"] = str(prefix.with_name(prefix.name + "_y.family"))
            write_family(decomp.y_family, files["y_family"])
            files["decomposition"] = str(prefix.with_name(prefix.name + "_decomp.json"))
            Path(files["decomposition"]).write_text(json.dumps(decomp.to_json()) + "\n")
        if a.kind == "subgraph":
            files["H"] = str(prefix.with_suffix(".kgraph"))
            Path(files["H"]).write_text(format_kgraph(inst.H))
        side["files"] = files
        Path(files["sidecar"]).write_text(json.dumps(_jsonable(side), indent=1) + "\n")
    else:
        side["family_text"] = format_family(fam)
    _emit(side)


def cmd_experiment(a):
    with open(a.config) as fh:
        data = json.load(fh)
    figures = not a.no_figures
    if a.action == "run":
        res = run_experiment(ExperimentConfig.from_dict(data), output=a.out, figures=figures)
        _emit({"rows": len(res.rows), "files": res.files, "results": [r.to_dict() for r in res.rows]})
    else:
        _emit(run_trend(data, output=a.out, figures=figures).to_dict())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tailkit", description="Lower-tail bounds for sums of dependent indicators.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("stats", help="mu, Pi, Lambda, delta of a family file")
    s.add_argument("family")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("exact", help="exact lower tail by enumeration")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
    s.add_argument("family")
    s.set_defaults(func=cmd_exact)

    s = sub.add_parser("mc", help="Monte Carlo lower tail")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--samples", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("family")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("phi", help="rate function and its elementary inequalities")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--A", type=float, default=None)
    s.set_defaults(func=cmd_phi)

    s = sub.add_parser("bounds", help="all closed-form bounds for a family")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("family")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("holder", help="Hoelder decomposition report")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--sigma", type=float, required=True)
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("family")
    s.set_defaults(func=cmd_holder)

    t = sub.add_parser("transfer", help="transfer bounds").add_subparsers(dest="which", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=float, required=True)
    truth = argparse.ArgumentParser(add_help=False)
    truth.add_argument("--truth", choices=["exact", "mc"], default="exact")
    truth.add_argument("--samples", type=int, default=100_000)
    truth.add_argument("--seed", type=int, default=0)

    s = t.add_parser("rsize", parents=[common], help="condition on the size of the random subset")
    s.add_argument("family")
    s = t.add_parser("rsize2", parents=[common], help="size conditioning with a shrink parameter")
    s.add_argument("family")
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--k", type=int, default=None)
    s = t.add_parser("rcor", parents=[common, truth], help="symmetric decomposition X = sum I_beta X_beta")
    s.add_argument("family", help="the Y family")
    s.add_argument("--decomp", required=True, help="decomposition JSON")
    s.add_argument("--gamma", type=float, required=True)
    s = t.add_parser("vxsym", parents=[common, truth], help="vertex symmetry for subgraph counts")
    s.add_argument("--H", required=True)
    s.add_argument("--G", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", default="0.5")
    s.add_argument("--U", help="comma separated vertex list; default first n/2 vertices")
    s.add_argument("--ell", type=int, default=1)
    sub.choices["transfer"].set_defaults(func=cmd_transfer)

    s = sub.add_parser("instance", help="generate a family file and sidecar")
    s.add_argument("kind", choices=["subgraph", "ap", "schur"])
    s.add_argument("--H", default="K3")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", required=True)
    s.add_argument("--out", help="output prefix")
    s.set_defaults(func=cmd_instance)

    s = sub.add_parser("experiment", help="batch experiments")
    s.add_argument("action", choices=["run", "trend"])
    s.add_argument("config")
    s.add_argument("--out", help="output prefix (overrides the config)")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (EnumerationCapError, ValueError, RuntimeError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
