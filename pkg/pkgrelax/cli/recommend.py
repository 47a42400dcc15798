import argparse

from pkgrelax.cli.common import (
    EXIT_OK,
    add_input_arguments,
    add_json_flag,
    format_package,
    load_inputs,
    metrics_document,
    outcome_document,
    print_json,
    seed_type,
)
from pkgrelax.services.relax_search import recommend_packages


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "recommend", help="Original plan plus the best single relaxation per constraint kind."
    )
    add_input_arguments(parser)
    parser.add_argument("--random-plan", action="store_true", help="Add a random control plan.")
    parser.add_argument("--seed", type=seed_type, default=0, help="Seed for the random plan.")
    add_json_flag(parser)
    parser.set_defaults(handler=cmd_recommend)


def cmd_recommend(args: argparse.Namespace) -> int:
    table, query = load_inputs(args.data, args.query)
    plans = recommend_packages(query, table, include_random=args.random_plan, seed=args.seed)

    if args.json:
        print_json(
            [
                {
                    "label": plan.label,
                    "removed": [{"index": i, "constraint": query.constraints[i].describe()} for i in plan.removed],
                    **outcome_document(plan.outcome),
                    **metrics_document(plan.metrics),
                    "violated": list(plan.violated),
                }
                for plan in plans
            ]
        )
        return EXIT_OK

    for plan in plans:
        removed = ", ".join(query.constraints[i].describe() for i in plan.removed) or "nothing removed"
        print(f"{plan.label}: {format_package(plan.outcome)}")
        print(f"  {removed}")
        if plan.violated:
            print(f"  violates: {', '.join(query.constraints[i].describe() for i in plan.violated)}")
    return EXIT_OK
