"""Command-line front end.

Every command prints one artifact (JSON, or CSV with ``#`` comment lines)
that starts with a provenance record: tool version, command, the full
parameter echo and the seed.  Errors exit nonzero with a JSON record on
stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__, analytic, forts, montecarlo, treecalc
from .dynamics import SiteConfig, run
from .errors import BootpercError, PreconditionError
from .graph_core import OffspringDistribution, RootedTree, check_seed, make_rng, read_parent_list


class CliError(Exception):
    """Bad command-line input; reported as a schema violation."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _sig(x: Any) -> Any:
    """Round floats to 12 significant digits, recursively."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
        return float(f"{x:.12g}")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {k: _sig(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sig(v) for v in x]
    return x


def _provenance(args: argparse.Namespace) -> dict:
    params = {k: v for k, v in vars(args).items()
              if k not in ("command", "func", "output", "format")}
    return {"tool": "bootperc", "version": __version__, "command": args.command,
            "params": params, "seed": getattr(args, "seed", None)}


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise CliError(f"not a comma-separated list of numbers: {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise CliError(f"not a comma-separated list of integers: {text!r}") from exc


def _load_tree(args) -> RootedTree:
    if args.tree:
        return read_parent_list(args.tree)
    if not args.gen:
        raise CliError("give --tree FILE or --gen SPEC")
    spec = montecarlo.GeneratorSpec.parse(args.gen)
    if spec.kind == "grid":
        raise CliError("this command needs a tree")
    rng = None
    if spec.kind == "gw":
        if args.seed is None:
            raise CliError("random trees need --seed")
        rng = make_rng(check_seed(args.seed))
    return spec.build(args.depth, rng)


# ---------------------------------------------------------------- commands


def cmd_critical(args) -> dict:
    if args.method == "closed-form":
        if args.k == args.d:
            p = analytic.closed_form_kd(args.d)
        elif args.k == 2:
            p = analytic.closed_form_k2(args.d)
        else:
            raise CliError("closed forms exist only for k = d and k = 2")
        return {"d": args.d, "k": args.k, "p_crit": p, "bracket_width": 0.0,
                "method": "closed_form"}
    res = analytic.critical_p_regular(args.d, args.k, args.tol)
    return {"d": args.d, "k": args.k, **res.to_record()}


def cmd_gw_critical(args) -> dict:
    dist = OffspringDistribution.parse(args.dist)
    res = analytic.gw_critical(dist, args.k, args.tol)
    return {"dist": dist.format(), "k": args.k, **res.to_record()}


def cmd_simulate(args) -> dict:
    check_seed(args.seed)
    spec = montecarlo.GeneratorSpec.parse(args.gen) if args.gen else None
    rng = make_rng(args.seed)
    if args.tree:
        host = read_parent_list(args.tree)
    elif spec is not None:
        host = spec.build(args.depth, rng)
    else:
        raise CliError("give --tree FILE or --gen SPEC")
    g = host.graph if isinstance(host, RootedTree) else host
    occ = set(np.flatnonzero(rng.random(g.n) < args.p).tolist())
    if args.boundary == "occupied":
        occ |= set(np.flatnonzero(host.boundary).tolist()) if isinstance(host, RootedTree) \
            else set(host.boundary)
    report = run(g, SiteConfig.from_iter(g.n, occ), args.k)
    out = {"n": g.n, "initial_occupied": len(occ), **report.to_record(),
           "complete": report.final.is_full}
    if isinstance(host, RootedTree):
        out["root_occupied"] = 0 in report.final
    if args.emit_config:
        out["final"] = report.final.to_hex()
    return out


def cmd_sweep(args) -> str:
    spec = montecarlo.GeneratorSpec.parse(args.gen)
    check_seed(args.seed)
    if args.p_grid:
        grid = _float_list(args.p_grid)
    else:
        grid = list(np.linspace(args.p_start, args.p_stop, args.p_num))
    rows = montecarlo.mc_occupation_sweep(spec, args.k, grid, args.trials, args.depth,
                                          args.boundary, args.seed, args.event)
    prov = _provenance(args)
    return montecarlo.rows_to_csv(rows, [json.dumps(_sig(prov))])


def cmd_prune(args) -> dict:
    tree = _load_tree(args)
    betas = _float_list(args.beta)
    if len(betas) == 1:
        betas = betas * args.k
    reports = treecalc.prune_k(tree, args.k, betas)
    recs = [r.to_record() for r in reports]
    return {"k": args.k, "rounds": recs,
            "all_hold": all(r.holds for r in reports),
            "final_is_fort": reports[-1].fort.verify()}


def cmd_forts(args) -> dict:
    tree = _load_tree(args)
    interior = [v for v in range(tree.n) if not tree.boundary[v]]
    if args.mode == "min":
        cert = forts.find_min_fort(tree.graph, args.k, args.N,
                                   interior if args.interior else None, args.budget)
        return {"mode": "min", "found": cert is not None,
                "certificate": cert.to_record() if cert else None}
    if args.mode == "red":
        res = forts.red_coloring(tree, args.k, closed_boundary=args.closed_boundary)
        out = {"mode": "red", "root_red": res.root_red,
               "red_count": sum(res.coloring.red)}
        if res.root_red:
            out["certificate"] = res.fort.to_record()
        else:
            out["subtree"] = sorted(res.subtree)
        return out
    cert = forts.blue_fort(tree, args.x, args.R, args.k)
    return {"mode": "blue", "certificate": cert.to_record(), "verified": cert.verify()}


def cmd_bound(args) -> dict:
    if args.kind == "anchored":
        if args.h is None:
            raise CliError("--h is required for the anchored bound")
        return analytic.anchored_bound(args.d, args.k, args.h).to_record()
    return {"d": args.d, "k": args.k, "q_lower_bound": analytic.q_lower_bound(args.d, args.k)}


def cmd_branching(args) -> dict:
    spec = montecarlo.GeneratorSpec.parse(args.gen)
    if spec.kind in ("grid", "gw"):
        raise CliError("branching needs a deterministic tree family")
    if spec.kind == "subdivided":
        family = lambda D: spec.build(max(D // 2, 1))
    else:
        family = spec.build
    est = treecalc.estimate_branching(family, args.lambda_lo, args.lambda_hi,
                                      _int_list(args.depths))
    return {"lower": est.lower, "upper": est.upper, "depth_used": est.depth_used}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bootperc", description="Bootstrap percolation on trees.")
    ap.add_argument("--version", action="version", version=f"bootperc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--output", "-o", help="write the artifact here instead of stdout")
        return p

    def tree_source(p, seed=False):
        p.add_argument("--tree", help="parent-list file")
        p.add_argument("--gen", help="generator spec, e.g. regular:3 or subdivided:3")
        p.add_argument("--depth", type=int, default=6)
        if seed:
            p.add_argument("--seed", type=int, help="needed for random trees")

    p = add("critical", cmd_critical, "critical probability of the d-ary tree")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--tol", type=float, default=analytic.P_TOL)
    p.add_argument("--method", choices=["bisection", "closed-form"], default="bisection")

    p = add("gw-critical", cmd_gw_critical, "critical probability of a Galton-Watson tree")
    p.add_argument("--dist", required=True, help='offspring law as "j:prob,..."')
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--tol", type=float, default=analytic.P_TOL)

    p = add("simulate", cmd_simulate, "one run of the dynamics")
    tree_source(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--boundary", choices=["vacant", "occupied"], default="vacant")
    p.add_argument("--emit-config", action="store_true", help="include the final bit-set")

    p = add("sweep", cmd_sweep, "Monte Carlo occupation sweep (CSV)")
    p.add_argument("--gen", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--p-grid", help="comma-separated densities")
    p.add_argument("--p-start", type=float, default=0.0)
    p.add_argument("--p-stop", type=float, default=1.0)
    p.add_argument("--p-num", type=int, default=11)
    p.add_argument("--boundary", choices=["vacant", "occupied"], default="vacant")
    p.add_argument("--event", choices=["root", "complete"], default=None)

    p = add("prune", cmd_prune, "beta-pruning into an iterated fort")
    tree_source(p, seed=True)
    p.add_argument("--beta", required=True, help="one value, or one per round")
    p.add_argument("--k", type=int, default=1)

    p = add("forts", cmd_forts, "fort search and colourings")
    tree_source(p, seed=True)
    p.add_argument("--mode", choices=["min", "red", "blue"], default="min")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--interior", action="store_true", help="exclude horizon vertices")
    p.add_argument("--budget", type=int, default=20_000_000)
    p.add_argument("--closed-boundary", action="store_true")
    p.add_argument("--x", type=int, default=0)
    p.add_argument("--R", type=int, default=1)

    p = add("bound", cmd_bound, "anchored-expansion or path lower bounds")
    p.add_argument("--kind", choices=["anchored", "q-lower"], default="anchored")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--h", type=float)

    p = add("branching", cmd_branching, "branching-number bracket")
    p.add_argument("--gen", required=True)
    p.add_argument("--lambda-lo", type=float, default=1.01)
    p.add_argument("--lambda-hi", type=float, default=8.0)
    p.add_argument("--depths", default="4,8")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        result = args.func(args)
        if isinstance(result, str):
            text = result
        else:
            text = json.dumps(_sig({"provenance": _provenance(args), "result": result}),
                              indent=2) + "\n"
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except CliError as exc:
        return _fail("schema", str(exc), 2)
    except (BootpercError, ValueError, OSError) as exc:
        kind = "precondition" if isinstance(exc, PreconditionError) else type(exc).__name__
        return _fail(kind, str(exc), 1)


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
