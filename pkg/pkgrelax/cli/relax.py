import argparse

import numpy as np

from pkgrelax.cli.common import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    add_input_arguments,
    add_json_flag,
    format_package,
    level_type,
    load_inputs,
    positive_int,
    print_json,
    result_document,
    seed_type,
    weights_type,
)
from pkgrelax.services.relax_search import (
    METHODS,
    PriorityWeights,
    RelaxationLevel,
    find_optimal_relaxation,
    run_method,
)


def register(subparsers) -> None:
    parser = subparsers.add_parser("relax", help="Relax a query by removing constraints.")
    add_input_arguments(parser)
    parser.add_argument("--method", choices=METHODS, help="Search method (required with --level).")
    target = parser.add_mutually_exclusive_group(required=True)
    target.add_argument("--level", type=level_type, help="Percentage of constraints to remove, 0..100.")
    target.add_argument("--optimal", action="store_true", help="Best score over every removal subset.")
    parser.add_argument(
        "--weights",
        type=weights_type,
        default=PriorityWeights(),
        help="Greedy bias per constraint kind, e.g. base=1,global=1,card=0.5.",
    )
    parser.add_argument("--trials", type=positive_int, default=20, help="Trials for the random method.")
    parser.add_argument("--seed", type=seed_type, default=0, help="Seed for the random method.")
    parser.add_argument("--threads", type=positive_int, default=None, help="Parallel candidate solves.")
    add_json_flag(parser)
    parser.set_defaults(handler=cmd_relax, parser=parser)


def cmd_relax(args: argparse.Namespace) -> int:
    if not args.optimal and args.method is None:
        args.parser.error("--method is required with --level")

    table, query = load_inputs(args.data, args.query)
    if args.optimal:
        results = [find_optimal_relaxation(query, table, threads=args.threads)]
    else:
        results = run_method(
            args.method, query, table, RelaxationLevel(k=args.level),
            weights=args.weights, trials=args.trials, seed=args.seed, threads=args.threads,
        )

    documents = [result_document(query, r) for r in results]
    if args.json:
        if len(documents) == 1:
            print_json(documents[0])
        else:
            print_json(
                {
                    "method": results[0].method,
                    "level": results[0].level,
                    "trials": documents,
                    "mean_improvement": float(np.mean([r.metrics.improvement for r in results])),
                    "mean_error": float(np.mean([r.metrics.error for r in results])),
                    "mean_score": float(np.mean([r.metrics.score for r in results])),
                }
            )
    else:
        for n, result in enumerate(results):
            if len(results) > 1:
                print(f"Trial {n + 1}/{len(results)}")
            level = "optimal" if result.level is None else f"k={result.level}"
            print(f"Method:  {result.method} ({level})")
            if result.removed:
                print("Removed:")
                for i in result.removed:
                    print(f"  [{i}] {query.constraints[i].describe()}")
            else:
                print("Removed: (nothing)")
            print(f"Package: {format_package(result.outcome)}")
            print(
                f"I={result.metrics.improvement:.6g}  E={result.metrics.error:.6g}  "
                f"score={result.metrics.score:.6g}  solver calls={result.solver_calls}"
            )

    return EXIT_OK if all(r.outcome.is_feasible for r in results) else EXIT_INFEASIBLE
