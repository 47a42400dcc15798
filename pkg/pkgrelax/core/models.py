import hashlib
import math
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from pydantic_core import core_schema

from pkgrelax.core.errors import DataValidationError, SchemaError

# ids are hashed and sorted as int64
_MAX_ITEM_ID = int(np.iinfo(np.int64).max)


class NumpyMatrix(np.ndarray):
    """Pydantic field type for the float64 item value matrix (serialized as nested lists)"""

    @classmethod
    def __get_pydantic_core_schema__(cls, source_type: Any, handler):
        return core_schema.no_info_plain_validator_function(
            cls.validate,
            serialization=core_schema.plain_serializer_function_ser_schema(lambda x: x.tolist()),
        )

    @classmethod
    def validate(cls, v):
        arr = np.array(v, dtype=np.float64)
        arr.setflags(write=False)
        return arr


# Enumerations
class ConstraintKind(str, Enum):
    BASE = "base"
    GLOBAL = "global"
    CARDINALITY = "cardinality"


class Aggregate(str, Enum):
    SUM = "sum"
    COUNT = "count"


class Comparison(str, Enum):
    LE = "<="
    GE = ">="


class Direction(str, Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class SolveStatus(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"


# Item Models
class ItemTable(BaseModel):
    """Candidate items: one row per item_id, one float64 column per attribute"""

    attributes: Tuple[str, ...]
    item_ids: Tuple[int, ...]
    values: NumpyMatrix

    _positions: Dict[int, int] = PrivateAttr(default_factory=dict)
    _columns: Dict[str, int] = PrivateAttr(default_factory=dict)
    _digest: str = PrivateAttr(default="")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="before")
    @classmethod
    def _shape_values(cls, data: Any):
        if isinstance(data, dict) and "values" in data:
            data = dict(data)
            n_rows = len(data.get("item_ids", ()))
            n_cols = len(data.get("attributes", ()))
            arr = np.array(data["values"], dtype=np.float64)
            if arr.size == 0:
                arr = np.zeros((n_rows, n_cols), dtype=np.float64)
            data["values"] = arr
        return data

    @model_validator(mode="after")
    def _check_invariants(self):
        if len(set(self.attributes)) != len(self.attributes):
            raise ValueError("attribute names must be unique")
        if "id" in self.attributes:
            raise ValueError("'id' is reserved for the item identifier column")
        if self.values.shape != (len(self.item_ids), len(self.attributes)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.item_ids)} items x {len(self.attributes)} attributes"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("all item values must be finite")
        seen = set()
        for item_id in self.item_ids:
            if item_id < 0:
                raise ValueError(f"item id {item_id} is negative")
            if item_id > _MAX_ITEM_ID:
                raise ValueError(f"item id {item_id} does not fit in 64 bits")
            if item_id in seen:
                raise ValueError(f"duplicate item id {item_id}")
            seen.add(item_id)
        return self

    def model_post_init(self, __context: Any) -> None:
        self._positions = {item_id: pos for pos, item_id in enumerate(self.item_ids)}
        self._columns = {attr: col for col, attr in enumerate(self.attributes)}
        h = hashlib.md5()
        h.update(repr(self.attributes).encode())
        h.update(np.asarray(self.item_ids, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.values).tobytes())
        self._digest = h.hexdigest()

    @classmethod
    def from_rows(cls, attributes: Sequence[str], rows: Iterable[Tuple[int, Sequence[float]]]) -> "ItemTable":
        """Build a table from (item_id, values) rows. Invariant violations raise DataValidationError."""
        rows = list(rows)
        try:
            return cls(
                attributes=tuple(attributes),
                item_ids=tuple(int(r[0]) for r in rows),
                values=[list(r[1]) for r in rows],
            )
        except ValueError as e:
            raise DataValidationError(_first_error(e)) from e

    def __len__(self) -> int:
        return len(self.item_ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ItemTable):
            return NotImplemented
        return (
            self.attributes == other.attributes
            and self.item_ids == other.item_ids
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash(self._digest)

    @property
    def digest(self) -> str:
        return self._digest

    def has_attribute(self, attr: str) -> bool:
        return attr in self._columns

    def column(self, attr: str) -> np.ndarray:
        try:
            return self.values[:, self._columns[attr]]
        except KeyError:
            raise SchemaError(f"unknown attribute '{attr}'; table has {list(self.attributes)}")

    def position(self, item_id: int) -> int:
        try:
            return self._positions[item_id]
        except KeyError:
            raise DataValidationError(f"item id {item_id} is not in the table")

    def values_for(self, attr: str, item_ids: Iterable[int]) -> List[float]:
        col = self.column(attr)
        return [float(col[self.position(i)]) for i in item_ids]

    def take(self, positions: Sequence[int]) -> "ItemTable":
        """Sub-table of the rows at `positions`, in the given order"""
        positions = np.asarray(positions, dtype=np.intp)
        return ItemTable(
            attributes=self.attributes,
            item_ids=tuple(self.item_ids[p] for p in positions),
            values=self.values[positions, :] if len(positions) else np.zeros((0, len(self.attributes))),
        )


# Query Models
class Constraint(BaseModel):
    """f_c(package) op beta, with f determined by kind/agg/attr"""

    kind: ConstraintKind
    attr: Optional[str] = None
    agg: Optional[Aggregate] = None
    op: Comparison
    beta: float

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="before")
    @classmethod
    def _default_aggregate(cls, data: Any):
        if isinstance(data, dict) and data.get("agg") is None:
            kind = data.get("kind")
            kind = kind.value if isinstance(kind, ConstraintKind) else str(kind).lower()
            if kind == ConstraintKind.GLOBAL.value:
                data = {**data, "agg": Aggregate.SUM}
            elif kind == ConstraintKind.CARDINALITY.value:
                data = {**data, "agg": Aggregate.COUNT}
        return data

    @model_validator(mode="after")
    def _check_shape(self):
        if not math.isfinite(self.beta):
            raise ValueError("constraint bound must be finite")
        if self.kind is ConstraintKind.CARDINALITY:
            if self.attr is not None or self.agg is not Aggregate.COUNT:
                raise ValueError("cardinality constraints take agg=count and no attribute")
        elif self.kind is ConstraintKind.GLOBAL:
            if self.attr is None or self.agg is not Aggregate.SUM:
                raise ValueError("global constraints take agg=sum over an attribute")
        else:
            if self.attr is None or self.agg is not None:
                raise ValueError("base constraints take an attribute and no aggregate")
        return self

    def describe(self) -> str:
        bound = f"{self.beta:g}"
        if self.kind is ConstraintKind.CARDINALITY:
            return f"count(*) {self.op.value} {bound}"
        if self.kind is ConstraintKind.GLOBAL:
            return f"sum({self.attr}) {self.op.value} {bound}"
        return f"{self.attr} {self.op.value} {bound} (each item)"


class Objective(BaseModel):
    direction: Direction
    agg: Aggregate = Aggregate.SUM
    attr: str

    model_config = ConfigDict(frozen=True)

    @field_validator("agg")
    @classmethod
    def _sum_only(cls, v: Aggregate) -> Aggregate:
        if v is not Aggregate.SUM:
            raise ValueError("objectives aggregate with sum")
        return v

    @property
    def sign(self) -> float:
        """+1 when larger is better, -1 when smaller is better"""
        return 1.0 if self.direction is Direction.MAXIMIZE else -1.0

    def describe(self) -> str:
        return f"{self.direction.value} sum({self.attr})"


class PackageQuery(BaseModel):
    """Q_{C,F}: an ordered constraint list plus the (never relaxable) objective"""

    constraints: Tuple[Constraint, ...] = ()
    objective: Objective

    model_config = ConfigDict(frozen=True)

    def __len__(self) -> int:
        return len(self.constraints)

    def restricted(self, retained: Iterable[int]) -> "PackageQuery":
        """The query keeping only the constraints at `retained` (original order)"""
        keep = sorted(set(retained))
        return PackageQuery(constraints=tuple(self.constraints[i] for i in keep), objective=self.objective)

    def validate_against(self, table: ItemTable) -> None:
        """Solve-time schema binding"""
        attrs = [self.objective.attr] + [c.attr for c in self.constraints if c.attr is not None]
        for attr in attrs:
            if not table.has_attribute(attr):
                raise SchemaError(f"unknown attribute '{attr}'; table has {list(table.attributes)}")

    def indices_of(self, kind: ConstraintKind) -> List[int]:
        return [i for i, c in enumerate(self.constraints) if c.kind is kind]


# Package / Outcome Models
class Package(BaseModel):
    """A set of item ids, stored ascending"""

    item_ids: Tuple[int, ...] = ()

    model_config = ConfigDict(frozen=True)

    @field_validator("item_ids", mode="before")
    @classmethod
    def _as_sorted_set(cls, v):
        ids = [int(i) for i in v]
        if len(set(ids)) != len(ids):
            raise ValueError("package items must be distinct")
        return tuple(sorted(ids))

    @classmethod
    def of(cls, item_ids: Iterable[int]) -> "Package":
        try:
            return cls(item_ids=list(item_ids))
        except ValueError as e:
            raise DataValidationError(_first_error(e)) from e

    def __len__(self) -> int:
        return len(self.item_ids)


class SolveOutcome(BaseModel):
    status: SolveStatus
    package: Optional[Package] = None
    objective_value: Optional[float] = None

    model_config = ConfigDict(frozen=True)

    @classmethod
    def feasible(cls, package: Package, objective_value: float) -> "SolveOutcome":
        return cls(status=SolveStatus.FEASIBLE, package=package, objective_value=objective_value)

    @classmethod
    def infeasible(cls) -> "SolveOutcome":
        return cls(status=SolveStatus.INFEASIBLE)

    @property
    def is_feasible(self) -> bool:
        return self.status is SolveStatus.FEASIBLE


def _first_error(e: ValueError) -> str:
    errors = getattr(e, "errors", None)
    if callable(errors):
        try:
            return str(errors()[0].get("msg", e)).removeprefix("Value error, ")
        except (IndexError, TypeError):
            pass
    return str(e)
