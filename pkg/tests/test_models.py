import numpy as np
import pytest
from pydantic import ValidationError

from pkgrelax.core.errors import DataValidationError, SchemaError
from pkgrelax.core.evaluation import (
    compare,
    constraint_report,
    evaluate_constraint_function,
    objective_value,
    satisfies,
)
from pkgrelax.core.models import (
    Aggregate,
    Comparison,
    Constraint,
    ConstraintKind,
    Direction,
    ItemTable,
    Objective,
    Package,
    PackageQuery,
)


@pytest.fixture
def table() -> ItemTable:
    return ItemTable.from_rows(
        ["calories", "cholesterol"],
        [(1, [400, 40]), (2, [500, 65]), (3, [100, 20]), (4, [250, 10])],
    )


def test_item_table_rejects_duplicate_ids() -> None:
    with pytest.raises(DataValidationError, match="duplicate item id 7"):
        ItemTable.from_rows(["x"], [(7, [1.0]), (7, [2.0])])


def test_item_table_rejects_non_finite_values() -> None:
    with pytest.raises(DataValidationError):
        ItemTable.from_rows(["x"], [(0, [float("nan")])])


def test_item_table_reserves_id_attribute() -> None:
    with pytest.raises(DataValidationError):
        ItemTable.from_rows(["id", "x"], [(0, [1.0, 2.0])])


def test_item_table_values_are_read_only(table: ItemTable) -> None:
    with pytest.raises(ValueError):
        table.values[0, 0] = 1.0


def test_unknown_column_is_a_schema_error(table: ItemTable) -> None:
    with pytest.raises(SchemaError):
        table.column("sodium")


def test_take_keeps_ids_and_digest_tracks_content(table: ItemTable) -> None:
    sub = table.take([2, 0])
    assert sub.item_ids == (3, 1)
    assert sub.values_for("calories", [3, 1]) == [100.0, 400.0]
    assert sub.digest != table.digest
    assert table.take([0, 1, 2, 3]) == table


def test_empty_table_has_attribute_shape() -> None:
    empty = ItemTable.from_rows(["x", "y"], [])
    assert len(empty) == 0
    assert empty.values.shape == (0, 2)


def test_constraint_default_aggregates() -> None:
    assert Constraint(kind="global", attr="calories", op=">=", beta=1500).agg is Aggregate.SUM
    assert Constraint(kind="cardinality", op=">=", beta=3).agg is Aggregate.COUNT
    assert Constraint(kind="base", attr="cholesterol", op="<=", beta=60).agg is None


def test_constraint_shape_is_checked() -> None:
    with pytest.raises(ValidationError):
        Constraint(kind="cardinality", attr="calories", op=">=", beta=3)
    with pytest.raises(ValidationError):
        Constraint(kind="global", op=">=", beta=3)
    with pytest.raises(ValidationError):
        Constraint(kind="base", attr="x", op="<=", beta=float("inf"))


def test_describe() -> None:
    assert Constraint(kind="cardinality", op=">=", beta=3).describe() == "count(*) >= 3"
    assert Constraint(kind="global", attr="calories", op=">=", beta=1500).describe() == "sum(calories) >= 1500"
    assert (
        Constraint(kind="base", attr="cholesterol", op="<=", beta=60).describe()
        == "cholesterol <= 60 (each item)"
    )


def test_objective_sign() -> None:
    assert Objective(direction=Direction.MAXIMIZE, attr="x").sign == 1.0
    assert Objective(direction=Direction.MINIMIZE, attr="x").sign == -1.0
    with pytest.raises(ValidationError):
        Objective(direction=Direction.MAXIMIZE, agg=Aggregate.COUNT, attr="x")


def test_package_is_sorted_and_distinct() -> None:
    assert Package(item_ids=[4, 1, 3]).item_ids == (1, 3, 4)
    with pytest.raises(DataValidationError):
        Package.of([1, 1])


def test_restricted_keeps_original_order() -> None:
    c = [Constraint(kind="cardinality", op=">=", beta=b) for b in (1, 2, 3)]
    q = PackageQuery(constraints=tuple(c), objective=Objective(direction="maximize", attr="x"))
    assert q.restricted([2, 0]).constraints == (c[0], c[2])
    assert len(q.restricted([])) == 0


def test_validate_against_reports_unknown_attribute(table: ItemTable) -> None:
    q = PackageQuery(objective=Objective(direction="minimize", attr="prep_time"))
    with pytest.raises(SchemaError, match="prep_time"):
        q.validate_against(table)


def test_global_sum(table: ItemTable) -> None:
    c = Constraint(kind=ConstraintKind.GLOBAL, attr="calories", op=Comparison.GE, beta=1500)
    pkg = Package(item_ids=[1, 2, 3])
    assert evaluate_constraint_function(c, pkg, table) == 1000.0
    assert not satisfies(c, pkg, table)


def test_cardinality(table: ItemTable) -> None:
    c = Constraint(kind=ConstraintKind.CARDINALITY, op=Comparison.GE, beta=3)
    assert evaluate_constraint_function(c, Package(item_ids=[1, 2, 3, 4]), table) == 4.0
    assert satisfies(c, Package(item_ids=[1, 2, 3]), table)


def test_base_uses_worst_item(table: ItemTable) -> None:
    le = Constraint(kind=ConstraintKind.BASE, attr="cholesterol", op=Comparison.LE, beta=60)
    ge = Constraint(kind=ConstraintKind.BASE, attr="cholesterol", op=Comparison.GE, beta=15)
    pkg = Package(item_ids=[1, 2, 3])
    assert evaluate_constraint_function(le, pkg, table) == 65.0
    assert evaluate_constraint_function(ge, pkg, table) == 20.0
    # the worst-item rule agrees with checking every item
    for c in (le, ge):
        per_item = all(compare(v, c.op, c.beta) for v in table.values_for(c.attr, pkg.item_ids))
        assert satisfies(c, pkg, table) == per_item


def test_empty_package_is_vacuous_for_base_and_zero_for_sums(table: ItemTable) -> None:
    empty = Package()
    base = Constraint(kind=ConstraintKind.BASE, attr="cholesterol", op=Comparison.LE, beta=60)
    total = Constraint(kind=ConstraintKind.GLOBAL, attr="calories", op=Comparison.LE, beta=10)
    assert evaluate_constraint_function(base, empty, table) == 60.0
    assert evaluate_constraint_function(total, empty, table) == 0.0
    assert satisfies(base, empty, table) and satisfies(total, empty, table)


def test_compare_tolerance() -> None:
    assert compare(60.0 + 1e-10, Comparison.LE, 60.0)
    assert not compare(60.0 + 1e-6, Comparison.LE, 60.0)
    assert compare(3.0, Comparison.GE, 3.0)


def test_objective_value_is_exact_sum(table: ItemTable) -> None:
    objective = Objective(direction="maximize", attr="calories")
    assert objective_value(objective, Package(item_ids=[1, 3, 4]), table) == 750.0


def test_constraint_report(table: ItemTable) -> None:
    q = PackageQuery(
        constraints=(
            Constraint(kind="base", attr="cholesterol", op="<=", beta=60),
            Constraint(kind="cardinality", op=">=", beta=2),
        ),
        objective=Objective(direction="maximize", attr="calories"),
    )
    report = constraint_report(q, Package(item_ids=[1, 2]), table)
    assert [r.satisfied for r in report] == [False, True]
    assert report[0].value == 65.0
    assert report[1].description == "count(*) >= 2"
    assert np.isclose(report[0].beta, 60.0)
