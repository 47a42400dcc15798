"""
Item tables from CSV, package queries from JSON, synthetic datasets.

Query document:
    {
      "objective": {"direction": "minimize", "agg": "sum", "attr": "prep_time"},
      "constraints": [
        {"kind": "base", "attr": "cholesterol", "op": "<=", "value": 60},
        {"kind": "cardinality", "between": [3, 4]},
        {"kind": "global", "agg": "sum", "attr": "calories", "op": ">=", "value": 1500}
      ]
    }
`between` and `=` expand to a `>=` constraint followed by a `<=` constraint.
"""

import json
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, FiniteFloat, ValidationError, model_validator

from pkgrelax.core.errors import DataValidationError, ParseError, QueryError, SchemaError
from pkgrelax.core.models import (
    Comparison,
    Constraint,
    ConstraintKind,
    ItemTable,
    Objective,
    PackageQuery,
)

logger = logging.getLogger(__name__)


# ==========================================
# Item tables
# ==========================================

def load_items(path: Union[str, Path]) -> ItemTable:
    """Read a UTF-8 CSV whose first column is `id` and whose other columns are numeric"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path} is empty; expected a header row starting with 'id'")
    except pd.errors.ParserError as e:
        raise ParseError(f"{path} is not valid CSV: {e}")
    except UnicodeDecodeError as e:
        raise ParseError(f"{path} is not UTF-8 text: {e.reason} at byte {e.start}")

    columns = [str(c).strip() for c in frame.columns]
    if not columns or columns[0] != "id":
        raise ParseError(f"{path}: first column must be 'id'", row=1, column=columns[0] if columns else None)
    frame.columns = columns

    # header is line 1, so data row r is line r + 2
    raw_ids = frame["id"].str.strip()
    bad = ~raw_ids.str.fullmatch(r"\d+")
    if bad.any():
        r = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError("item id must be a non-negative integer", row=r + 2, column="id")
    id_list = [int(s) for s in raw_ids]

    numeric = {}
    for column in columns[1:]:
        raw = frame[column].str.strip()
        parsed = pd.to_numeric(raw, errors="coerce")
        bad = parsed.isna() | ~np.isfinite(parsed.astype(float))
        if bad.any():
            r = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"non-numeric value '{frame[column].iloc[r]}'", row=r + 2, column=column)
        numeric[column] = parsed.astype(float).to_numpy()

    duplicated = pd.Series(id_list).duplicated()
    if duplicated.any():
        dup = id_list[int(np.flatnonzero(duplicated.to_numpy())[0])]
        raise DataValidationError(f"duplicate item id {dup} in {path}")

    attributes = columns[1:]
    values = np.column_stack([numeric[a] for a in attributes]) if attributes else np.zeros((len(id_list), 0))
    table = ItemTable.from_rows(attributes, zip(id_list, values.tolist()))
    logger.info("✅ Loaded %d items x %d attributes from %s", len(table), len(attributes), path)
    return table


def write_items(table: ItemTable, path: Union[str, Path]) -> Path:
    """Canonical CSV: `id` first, values with 17 significant digits"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(table.values, columns=list(table.attributes))
    frame.insert(0, "id", list(table.item_ids))
    frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8")
    return path


# ==========================================
# Queries
# ==========================================

class _ObjectiveDoc(BaseModel):
    direction: str
    agg: str = "sum"
    attr: str


class _ConstraintDoc(BaseModel):
    kind: str
    attr: Optional[str] = None
    agg: Optional[str] = None
    op: Optional[str] = None
    value: Optional[float] = None
    between: Optional[List[float]] = None

    @model_validator(mode="after")
    def _one_comparison(self):
        if self.between is not None:
            if self.op is not None or self.value is not None:
                raise ValueError("use either 'between' or 'op'/'value', not both")
            if len(self.between) != 2:
                raise ValueError("'between' takes exactly two bounds [lo, hi]")
        elif self.op is None or self.value is None:
            raise ValueError("constraint needs 'op' and 'value' (or 'between')")
        return self


class _QueryDoc(BaseModel):
    objective: _ObjectiveDoc
    constraints: List[_ConstraintDoc] = []


_EQUALITY_OPS = {"=", "=="}


def _expand(doc: _ConstraintDoc, position: int) -> List[Constraint]:
    kind = doc.kind.strip().lower()
    if kind not in {k.value for k in ConstraintKind}:
        raise QueryError(f"constraint {position}: unknown kind '{doc.kind}'")
    agg = doc.agg.strip().lower() if doc.agg else None
    if agg is not None and agg not in {"sum", "count"}:
        raise QueryError(f"constraint {position}: unknown aggregate '{doc.agg}'")

    if doc.between is not None:
        bounds = [(Comparison.GE, doc.between[0]), (Comparison.LE, doc.between[1])]
    elif doc.op.strip() in _EQUALITY_OPS:
        bounds = [(Comparison.GE, doc.value), (Comparison.LE, doc.value)]
    else:
        try:
            bounds = [(Comparison(doc.op.strip()), doc.value)]
        except ValueError:
            raise QueryError(f"constraint {position}: unsupported operator '{doc.op}'")

    out = []
    for op, beta in bounds:
        try:
            out.append(Constraint(kind=kind, attr=doc.attr, agg=agg, op=op, beta=beta))
        except ValidationError as e:
            raise QueryError(f"constraint {position}: {_message(e)}") from e
    return out


def parse_query(document: Dict[str, Any], schema: Optional[Sequence[str]] = None) -> PackageQuery:
    """Build a PackageQuery from a decoded query document"""
    if not isinstance(document, dict):
        raise QueryError("query document must be a JSON object")
    if "objective" not in document:
        raise QueryError("query has no objective")
    try:
        doc = _QueryDoc.model_validate(document)
    except ValidationError as e:
        raise QueryError(f"malformed query: {_message(e)}") from e

    agg = doc.objective.agg.strip().lower()
    if agg != "sum":
        raise QueryError(f"unknown objective aggregate '{doc.objective.agg}'")
    try:
        objective = Objective(direction=doc.objective.direction.strip().lower(), attr=doc.objective.attr)
    except ValidationError as e:
        raise QueryError(f"objective: {_message(e)}") from e

    constraints = []
    for position, c in enumerate(doc.constraints):
        constraints.extend(_expand(c, position))
    query = PackageQuery(constraints=tuple(constraints), objective=objective)

    if schema is not None:
        known = set(schema)
        for attr in [objective.attr] + [c.attr for c in constraints if c.attr]:
            if attr not in known:
                raise SchemaError(f"unknown attribute '{attr}'")
    return query


def load_query(path: Union[str, Path], schema: Optional[Sequence[str]] = None) -> PackageQuery:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise QueryError(f"{path} is not valid JSON: {e}")
    except UnicodeDecodeError as e:
        raise QueryError(f"{path} is not UTF-8 text: {e.reason} at byte {e.start}")
    query = parse_query(document, schema)
    logger.info("✅ Loaded query with %d constraints from %s", len(query), path)
    return query


def query_to_document(query: PackageQuery) -> Dict[str, Any]:
    """Inverse of parse_query (without re-folding `between` pairs)"""
    constraints = []
    for c in query.constraints:
        entry: Dict[str, Any] = {"kind": c.kind.value}
        if c.attr is not None:
            entry["attr"] = c.attr
        if c.agg is not None:
            entry["agg"] = c.agg.value
        entry["op"] = c.op.value
        entry["value"] = c.beta
        constraints.append(entry)
    return {
        "objective": {
            "direction": query.objective.direction.value,
            "agg": query.objective.agg.value,
            "attr": query.objective.attr,
        },
        "constraints": constraints,
    }


# ==========================================
# Synthetic datasets
# ==========================================

class UniformDistribution(BaseModel):
    kind: Literal["uniform"] = "uniform"
    lo: FiniteFloat
    hi: FiniteFloat

    @model_validator(mode="after")
    def _ordered(self):
        if not self.hi >= self.lo:
            raise ValueError("uniform needs hi >= lo")
        return self

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, n)


class NormalDistribution(BaseModel):
    kind: Literal["normal"] = "normal"
    mean: FiniteFloat
    sd: FiniteFloat = Field(ge=0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        draws = rng.normal(self.mean, self.sd, n)
        return np.clip(draws, self.mean - 6 * self.sd, self.mean + 6 * self.sd)


Distribution = Annotated[Union[UniformDistribution, NormalDistribution], Field(discriminator="kind")]


class AttributeSpec(BaseModel):
    name: str
    distribution: Distribution


class DatasetSpec(BaseModel):
    n_items: int = Field(ge=0)
    attributes: List[AttributeSpec]
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _unique_names(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names) or "id" in names:
            raise ValueError("attribute names must be unique and not 'id'")
        return self


def recipe_like_spec(n_items: int = 40, seed: int = 0) -> DatasetSpec:
    """Meal-style attributes with nutritional ranges"""
    return DatasetSpec(
        n_items=n_items,
        seed=seed,
        attributes=[
            AttributeSpec(name="calories", distribution=NormalDistribution(mean=450, sd=70)),
            AttributeSpec(name="protein", distribution=UniformDistribution(lo=2, hi=45)),
            AttributeSpec(name="fat", distribution=UniformDistribution(lo=1, hi=40)),
            AttributeSpec(name="cholesterol", distribution=NormalDistribution(mean=60, sd=9)),
            AttributeSpec(name="sodium", distribution=UniformDistribution(lo=50, hi=1400)),
            AttributeSpec(name="prep_time", distribution=UniformDistribution(lo=5, hi=120)),
        ],
    )


def generate_dataset(spec: DatasetSpec) -> ItemTable:
    """Columns are drawn in attribute order from one generator seeded with spec.seed"""
    rng = np.random.default_rng(spec.seed)
    try:
        columns = [a.distribution.sample(rng, spec.n_items) for a in spec.attributes]
        values = np.column_stack(columns) if columns else np.zeros((spec.n_items, 0))
        return ItemTable(
            attributes=tuple(a.name for a in spec.attributes),
            item_ids=tuple(range(spec.n_items)),
            values=values,
        )
    except ValidationError as e:
        raise DataValidationError(f"dataset spec produced an invalid table: {_message(e)}") from e
    except (OverflowError, ValueError) as e:
        raise DataValidationError(f"dataset spec cannot be sampled: {e}") from e


def parse_dataset_spec(document: Dict[str, Any]) -> DatasetSpec:
    try:
        return DatasetSpec.model_validate(document)
    except ValidationError as e:
        raise DataValidationError(f"invalid dataset spec: {_message(e)}") from e


def load_dataset_spec(path: Union[str, Path]) -> DatasetSpec:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataValidationError(f"{path} is not valid JSON: {e}")
    except UnicodeDecodeError as e:
        raise DataValidationError(f"{path} is not UTF-8 text: {e.reason} at byte {e.start}")
    return parse_dataset_spec(document)


def _message(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err.get("loc", ()))
        msg = str(err.get("msg", "")).removeprefix("Value error, ")
        parts.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(parts)
