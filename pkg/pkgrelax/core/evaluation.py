"""
Constraint and objective evaluation over packages.

Base constraints are lifted to package level through the worst item: the maximum
attribute value for `<=`, the minimum for `>=`. The package satisfies the lifted
predicate exactly when every item satisfies the per-item predicate.
"""

import math
from typing import List, Optional

from pydantic import BaseModel

from pkgrelax.config import settings
from pkgrelax.core.models import (
    Comparison,
    Constraint,
    ConstraintKind,
    ItemTable,
    Objective,
    Package,
    PackageQuery,
)


class ConstraintCheck(BaseModel):
    """One row of a per-constraint report"""

    index: int
    description: str
    value: float
    beta: float
    satisfied: bool


def evaluate_constraint_function(c: Constraint, pkg: Package, table: ItemTable) -> float:
    """f_c(pkg)"""
    if c.kind is ConstraintKind.CARDINALITY:
        return float(len(pkg))

    values = table.values_for(c.attr, pkg.item_ids)
    if c.kind is ConstraintKind.GLOBAL:
        return math.fsum(values)

    # Base: worst item, or beta itself on the empty package
    if not values:
        return c.beta
    return max(values) if c.op is Comparison.LE else min(values)


def compare(value: float, op: Comparison, beta: float, tolerance: Optional[float] = None) -> bool:
    tol = settings.tolerance if tolerance is None else tolerance
    if op is Comparison.LE:
        return value <= beta + tol
    return value >= beta - tol


def satisfies(c: Constraint, pkg: Package, table: ItemTable) -> bool:
    return compare(evaluate_constraint_function(c, pkg, table), c.op, c.beta)


def objective_value(objective: Objective, pkg: Package, table: ItemTable) -> float:
    return math.fsum(table.values_for(objective.attr, pkg.item_ids))


def constraint_report(query: PackageQuery, pkg: Package, table: ItemTable) -> List[ConstraintCheck]:
    report = []
    for i, c in enumerate(query.constraints):
        value = evaluate_constraint_function(c, pkg, table)
        report.append(
            ConstraintCheck(
                index=i,
                description=c.describe(),
                value=value,
                beta=c.beta,
                satisfied=compare(value, c.op, c.beta),
            )
        )
    return report
