"""Argument types, input loading and result documents shared by the subcommands"""

import argparse
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pkgrelax.core.models import ItemTable, PackageQuery, SolveOutcome
from pkgrelax.services.ingest import load_items, load_query
from pkgrelax.services.metrics import RelaxationScore
from pkgrelax.services.relax_search import PriorityWeights, RelaxationResult

EXIT_OK = 0
EXIT_INFEASIBLE = 3


def level_type(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"level must be an integer, got '{text}'")
    if not 0 <= k <= 100:
        raise argparse.ArgumentTypeError(f"level must lie in [0, 100], got {k}")
    return k


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def seed_type(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {value}")
    return value


def weights_type(text: str) -> PriorityWeights:
    try:
        return PriorityWeights.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid weights '{text}': {e}")


def add_input_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=Path, required=True, help="Item table CSV (first column 'id').")
    parser.add_argument("--query", type=Path, required=True, help="Package query JSON document.")


def add_json_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", action="store_true", help="Print the result document as JSON.")


def load_inputs(data: Path, query: Path) -> Tuple[ItemTable, PackageQuery]:
    table = load_items(data)
    return table, load_query(query, schema=table.attributes)


def print_json(document: Any) -> None:
    print(json.dumps(document, ensure_ascii=False, indent=2))


def outcome_document(outcome: SolveOutcome) -> Dict[str, Any]:
    return {
        "status": outcome.status.value,
        "package": list(outcome.package.item_ids) if outcome.is_feasible else [],
        "objective_value": outcome.objective_value,
    }


def metrics_document(metrics: Optional[RelaxationScore]) -> Dict[str, Any]:
    if metrics is None:
        return {}
    return {
        "improvement": metrics.improvement,
        "error": metrics.error,
        "score": metrics.score,
        "violated": list(metrics.violated),
        "flags": list(metrics.flags),
    }


def result_document(query: PackageQuery, result: RelaxationResult) -> Dict[str, Any]:
    return {
        "method": result.method,
        "level": result.level,
        "removed": [{"index": i, "constraint": query.constraints[i].describe()} for i in result.removed],
        "steps": list(result.steps),
        **outcome_document(result.outcome),
        **metrics_document(result.metrics),
        "solver_calls": result.solver_calls,
        "wall_time": result.wall_time,
    }


def format_package(outcome: SolveOutcome) -> str:
    if not outcome.is_feasible:
        return "(none)"
    ids = ", ".join(str(i) for i in outcome.package.item_ids)
    return f"[{ids}] ({len(outcome.package)} items), objective {outcome.objective_value:g}"
