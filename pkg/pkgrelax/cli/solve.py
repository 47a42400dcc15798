import argparse

from pkgrelax.cli.common import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    add_input_arguments,
    add_json_flag,
    format_package,
    load_inputs,
    outcome_document,
    print_json,
)
from pkgrelax.core.evaluation import constraint_report
from pkgrelax.services.solver import solve


def register(subparsers) -> None:
    parser = subparsers.add_parser("solve", help="Top-1 package of a query.")
    add_input_arguments(parser)
    add_json_flag(parser)
    parser.set_defaults(handler=cmd_solve)


def cmd_solve(args: argparse.Namespace) -> int:
    """Exit 0 when a package exists, 3 when the query is infeasible"""
    table, query = load_inputs(args.data, args.query)
    outcome, stats = solve(query, table)
    report = constraint_report(query, outcome.package, table) if outcome.is_feasible else []

    if args.json:
        print_json(
            {
                **outcome_document(outcome),
                "objective": query.objective.describe(),
                "constraints": [check.model_dump() for check in report],
                "solver": stats.model_dump(),
            }
        )
    else:
        print(f"Status:    {outcome.status.value}")
        print(f"Objective: {query.objective.describe()}")
        print(f"Package:   {format_package(outcome)}")
        for check in report:
            mark = "✅" if check.satisfied else "❌"
            print(f"  {mark} [{check.index}] {check.description}: value {check.value:g}")

    return EXIT_OK if outcome.is_feasible else EXIT_INFEASIBLE
