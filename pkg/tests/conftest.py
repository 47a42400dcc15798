import json
from typing import Callable, List

import numpy as np
import pytest

from pkgrelax.core.models import (
    Comparison,
    Constraint,
    ConstraintKind,
    Direction,
    ItemTable,
    Objective,
    PackageQuery,
)
from pkgrelax.services.ingest import parse_query

MEALS_CSV = """id,calories,cholesterol,prep_time
0,400,40,10
1,500,65,25
2,100,20,5
3,650,55,40
4,550,30,30
5,300,10,15
"""

MEAL_QUERY = {
    "objective": {"direction": "minimize", "agg": "sum", "attr": "prep_time"},
    "constraints": [
        {"kind": "base", "attr": "cholesterol", "op": "<=", "value": 60},
        {"kind": "cardinality", "between": [3, 4]},
        {"kind": "global", "agg": "sum", "attr": "calories", "op": ">=", "value": 1500},
    ],
}


@pytest.fixture
def meals() -> ItemTable:
    rows = [
        (0, [400, 40, 10]),
        (1, [500, 65, 25]),
        (2, [100, 20, 5]),
        (3, [650, 55, 40]),
        (4, [550, 30, 30]),
        (5, [300, 10, 15]),
    ]
    return ItemTable.from_rows(["calories", "cholesterol", "prep_time"], rows)


@pytest.fixture
def meal_query() -> PackageQuery:
    return parse_query(MEAL_QUERY)


@pytest.fixture
def meal_files(tmp_path):
    data = tmp_path / "meals.csv"
    data.write_text(MEALS_CSV, encoding="utf-8")
    query = tmp_path / "query.json"
    query.write_text(json.dumps(MEAL_QUERY), encoding="utf-8")
    return data, query


def random_table(rng: np.random.Generator, n_items: int, n_attrs: int = 3, integer: bool = False) -> ItemTable:
    if integer:
        values = rng.integers(0, 12, size=(n_items, n_attrs)).astype(float)
    else:
        values = np.round(rng.uniform(0, 50, size=(n_items, n_attrs)), 3)
    ids = rng.permutation(3 * n_items + 1)[:n_items]
    return ItemTable(
        attributes=tuple(f"a{j}" for j in range(n_attrs)),
        item_ids=tuple(int(i) for i in ids),
        values=values,
    )


def random_query(rng: np.random.Generator, table: ItemTable, n_constraints: int) -> PackageQuery:
    attrs = table.attributes
    constraints: List[Constraint] = []
    for _ in range(n_constraints):
        kind = [ConstraintKind.BASE, ConstraintKind.GLOBAL, ConstraintKind.CARDINALITY][int(rng.integers(3))]
        op = Comparison.LE if rng.random() < 0.5 else Comparison.GE
        if kind is ConstraintKind.CARDINALITY:
            beta = float(rng.integers(0, 5))
            constraints.append(Constraint(kind=kind, op=op, beta=beta))
            continue
        attr = attrs[int(rng.integers(len(attrs)))]
        column = table.column(attr)
        if kind is ConstraintKind.BASE:
            beta = float(np.quantile(column, 0.8 if op is Comparison.LE else 0.2)) if len(column) else 0.0
        else:
            beta = float(np.round(rng.uniform(0.5, 3.0) * (column.mean() if len(column) else 1.0), 2))
        constraints.append(Constraint(kind=kind, attr=attr, op=op, beta=beta))
    direction = Direction.MAXIMIZE if rng.random() < 0.5 else Direction.MINIMIZE
    objective = Objective(direction=direction, attr=attrs[int(rng.integers(len(attrs)))])
    return PackageQuery(constraints=tuple(constraints), objective=objective)


@pytest.fixture
def instance_factory() -> Callable:
    """Seeded (table, query) pairs: at most 12 items, 1-6 mixed constraints"""

    def make(seed: int):
        rng = np.random.default_rng(seed)
        n_items = int(rng.integers(0, 13))
        table = random_table(rng, n_items, integer=bool(seed % 2))
        query = random_query(rng, table, int(rng.integers(1, 7)))
        return table, query

    return make
