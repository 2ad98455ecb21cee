"""Command-line entry point ``advbound``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings

from .alpha_calculus import LossSpec, is_ce
from .classifier import PotentialSet, UnreachableQueryError, classify_transforms
from .dataset_io import (
    DatasetError,
    RunConfig,
    SolverTolerances,
    load_dataset,
    load_queries,
    parse_alpha,
    parse_grid,
    read_solution,
    write_curve,
    write_solution,
)
from .geometry import ResourceLimitError, build_hypergraph
from .packing_solver import PackingProblem, SolverError, solve
from .risk_harness import attach_metadata, sweep

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_RESOURCE = 0, 2, 3, 4

log = logging.getLogger("advbound")


def _add_data_args(p, metric=True):
    p.add_argument("--data", required=True, help="CSV with rows label,x1,...,xd[,weight]")
    p.add_argument("--weighted", action="store_true",
                   help="last column of a header-less CSV is the atom weight")
    if metric:
        p.add_argument("--metric", choices=("euclidean", "chebyshev"), default="euclidean")
        p.add_argument("--cap", type=int, default=None, help="interaction cap (default: K)")


def _add_tol_args(p):
    p.add_argument("--kkt-tol", type=float, default=1e-6)
    p.add_argument("--gap-tol", type=float, default=1e-8)
    p.add_argument("--max-newton", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advbound", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hypergraph", help="enumerate the conflict hypergraph")
    _add_data_args(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--dump", help="write edges as CSV")

    p = sub.add_parser("solve", help="solve the dual for one (epsilon, alpha)")
    _add_data_args(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--alpha", default="1", help="number, CE or ZERO_ONE")
    p.add_argument("--out", required=True)
    _add_tol_args(p)

    p = sub.add_parser("curve", help="sweep an (epsilon, alpha) grid")
    _add_data_args(p)
    p.add_argument("--epsilons", required=True, help="start:stop:step or comma list")
    p.add_argument("--alphas", default="0,0.5,0.75,1")
    p.add_argument("--theta", type=float, default=0.01, help="warm-start blend")
    p.add_argument("--parallel", action="store_true", help="run alpha slices concurrently")
    p.add_argument("--out", required=True)
    _add_tol_args(p)

    p = sub.add_parser("classify", help="evaluate the optimal robust classifier")
    _add_data_args(p, metric=False)
    p.add_argument("--solution", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--loss", default=None, help="ce | zero_one | quadratic | alpha:<value>")
    p.add_argument("--out", required=True)
    return parser


def _cap(args, data) -> int:
    return args.cap if args.cap is not None else max(data.class_count, 2)


def _tolerances(args) -> SolverTolerances:
    return SolverTolerances(kkt_tol=args.kkt_tol, gap_tol=args.gap_tol,
                            max_newton_iters=args.max_newton)


def cmd_hypergraph(args) -> int:
    data = load_dataset(args.data, weighted=args.weighted or None)
    hg = build_hypergraph(data, args.metric, args.epsilon, _cap(args, data))
    if args.dump:
        hg.dump_csv(args.dump)
    sizes = {str(k): v for k, v in sorted(hg.size_counts().items())}
    print(json.dumps({"edges": hg.n_edges, "variables": hg.n_vars, "by_size": sizes}))
    return EXIT_OK


def cmd_solve(args) -> int:
    data = load_dataset(args.data, weighted=args.weighted or None)
    alpha = parse_alpha(args.alpha)
    hg = build_hypergraph(data, args.metric, args.epsilon, _cap(args, data))
    sol = attach_metadata(solve(PackingProblem.from_hypergraph(data, hg, alpha), _tolerances(args)), hg)
    write_solution(sol, args.out)
    print(json.dumps({"risk_lower_bound": sol.risk_lower_bound, "kkt_residual": sol.kkt_residual,
                      "newton_iters": sol.newton_iters, "edges": hg.n_edges}))
    return EXIT_OK


def cmd_curve(args) -> int:
    data = load_dataset(args.data, weighted=args.weighted or None)
    config = RunConfig(metric=args.metric, epsilon_grid=parse_grid(args.epsilons),
                       alpha_list=[a for a in args.alphas.split(",") if a.strip()],
                       interaction_cap=args.cap, solver_tolerances=_tolerances(args),
                       warm_start_theta=args.theta)
    curve = sweep(data, config, parallel=args.parallel)
    write_curve(curve, args.out)
    print(json.dumps({"rows": len(curve.rows), "out": args.out}))
    return EXIT_OK


def cmd_classify(args) -> int:
    data = load_dataset(args.data, weighted=args.weighted or None)
    sol = read_solution(args.solution)
    potentials = PotentialSet.from_solution(data, sol)
    loss = LossSpec.parse(args.loss) if args.loss else LossSpec.alpha_log(sol.alpha)
    if loss.kind != "quadratic" and not (loss.alpha == sol.alpha or (is_ce(loss.alpha) and is_ce(sol.alpha))):
        warnings.warn(f"solution was computed for alpha={sol.alpha}; classifier for {loss} "
                      "uses potentials that are not dual-optimal for it")
    queries = load_queries(args.queries)
    transforms = potentials.transforms(queries)
    k = data.class_count
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id"] + [f"f_{i}" for i in range(k)] + ["Z"])
        for q, a in enumerate(transforms):
            try:
                out = classify_transforms(loss, a)
            except UnreachableQueryError as exc:
                raise UnreachableQueryError(f"query {q}: {exc}") from None
            z = "" if out.Z is None else repr(out.Z)
            writer.writerow([q] + [repr(float(v)) for v in out.f] + [z])
    return EXIT_OK


COMMANDS = {"hypergraph": cmd_hypergraph, "solve": cmd_solve, "curve": cmd_curve,
            "classify": cmd_classify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ResourceLimitError as exc:
        log.error("%s", exc)
        return EXIT_RESOURCE
    except SolverError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    except (DatasetError, ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
