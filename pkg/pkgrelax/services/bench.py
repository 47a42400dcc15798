"""
Benchmark workloads: seeded random package queries over a dataset, every relaxation
method run at every level, improvement/error/score/solver-call curves as CSV.

Output directory layout
    curves.csv     one row per (method, level), means over the queries that succeeded
    cells.csv      one row per (query, method, level)
    queries.json   the generated queries in the query document format
    dataset.csv    the synthetic item table (omitted when the workload reads a CSV)
    manifest.json  the full WorkloadSpec, seed and output paths
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from pkgrelax import __version__
from pkgrelax.cache import SolveCache
from pkgrelax.core.errors import CapacityError, DataValidationError, GenerationError, ResourceError
from pkgrelax.core.models import (
    Comparison,
    Constraint,
    ConstraintKind,
    Direction,
    ItemTable,
    Objective,
    PackageQuery,
)
from pkgrelax.config import settings
from pkgrelax.services.ingest import (
    DatasetSpec,
    generate_dataset,
    load_items,
    query_to_document,
    recipe_like_spec,
    write_items,
)
from pkgrelax.services.metrics import BASELINE_INFEASIBLE
from pkgrelax.services.relax_search import METHODS, PriorityWeights, RelaxationLevel, run_method
from pkgrelax.services.solver import SolverConfig, solve
from pkgrelax.utils import stopwatch

logger = logging.getLogger(__name__)

CURVE_COLUMNS = [
    "method",
    "level",
    "queries_ok",
    "mean_improvement",
    "mean_error",
    "mean_score",
    "mean_solver_calls",
    "mean_wall_time_ms",
]
CELL_COLUMNS = [
    "query",
    "method",
    "level",
    "constraints",
    "removed",
    "status",
    "improvement",
    "error",
    "score",
    "solver_calls",
    "wall_time_ms",
    "message",
]
WALL_TIME_COLUMNS = ("mean_wall_time_ms", "wall_time_ms")


class WorkloadSpec(BaseModel):
    n_queries: int = Field(default=10, ge=1)
    constraints_min: int = Field(default=3, ge=1)
    constraints_max: int = Field(default=10, ge=1)
    objective_split: float = Field(default=0.5, ge=0, le=1)  # fraction of minimize queries
    dataset: Union[DatasetSpec, str] = Field(default_factory=recipe_like_spec)
    levels: List[int] = Field(default_factory=lambda: list(range(0, 101, 10)))
    random_trials: int = Field(default=20, ge=1)
    seed: int = Field(default=0, ge=0)
    methods: List[str] = Field(default_factory=lambda: list(METHODS))
    weights: PriorityWeights = Field(default_factory=PriorityWeights)

    @field_validator("levels")
    @classmethod
    def _levels_in_range(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one level is required")
        if any(k < 0 or k > 100 for k in v):
            raise ValueError("levels must lie in [0, 100]")
        return sorted(set(v))

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, v: List[str]) -> List[str]:
        v = [m.lower() for m in v]
        unknown = [m for m in v if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        return list(dict.fromkeys(v))

    @model_validator(mode="after")
    def _constraint_range(self):
        if self.constraints_max < self.constraints_min:
            raise ValueError("constraints_max must be >= constraints_min")
        return self


class BenchCell(BaseModel):
    query: int
    method: str
    level: int
    constraints: int
    removed: int
    status: str  # ok, failed, infeasible
    improvement: float = math.nan
    error: float = math.nan
    score: float = math.nan
    solver_calls: float = math.nan
    wall_time_ms: float = math.nan
    message: str = ""


class CurvePoint(BaseModel):
    method: str
    level: int
    queries_ok: int
    mean_improvement: float
    mean_error: float
    mean_score: float
    mean_solver_calls: float
    mean_wall_time_ms: float


def load_workload_spec(path: Union[str, Path]) -> WorkloadSpec:
    path = Path(path)
    try:
        return WorkloadSpec.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataValidationError(f"invalid workload spec {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DataValidationError(f"{path} is not UTF-8 text: {e.reason} at byte {e.start}")


def load_workload_table(spec: WorkloadSpec) -> ItemTable:
    if isinstance(spec.dataset, str):
        return load_items(spec.dataset)
    return generate_dataset(spec.dataset)


# ==========================================
# Query generation
# ==========================================

def _draw_query(rng: np.random.Generator, table: ItemTable, n_constraints: int, direction: Direction) -> PackageQuery:
    attrs = table.attributes
    n_items = len(table)
    objective = Objective(direction=direction, attr=attrs[int(rng.integers(len(attrs)))])

    # cardinality bounds keep minimize objectives away from the empty package
    lower = int(rng.integers(1, min(3, n_items) + 1))
    upper = min(n_items, lower + int(rng.integers(0, 3)))
    constraints = [Constraint(kind=ConstraintKind.CARDINALITY, op=Comparison.GE, beta=lower)]
    if n_constraints >= 2:
        constraints.append(Constraint(kind=ConstraintKind.CARDINALITY, op=Comparison.LE, beta=upper))

    typical_size = (lower + upper) / 2
    while len(constraints) < n_constraints:
        attr = attrs[int(rng.integers(len(attrs)))]
        column = table.column(attr)
        op = Comparison.LE if rng.random() < 0.5 else Comparison.GE
        if rng.random() < 0.5:
            quantile = rng.uniform(0.6, 0.95) if op is Comparison.LE else rng.uniform(0.05, 0.4)
            kind, beta = ConstraintKind.BASE, float(np.quantile(column, quantile))
        else:
            quantile = rng.uniform(0.45, 0.85) if op is Comparison.LE else rng.uniform(0.15, 0.55)
            kind, beta = ConstraintKind.GLOBAL, typical_size * float(np.quantile(column, quantile))
        constraints.append(Constraint(kind=kind, attr=attr, op=op, beta=round(beta, 2)))

    order = rng.permutation(len(constraints))
    return PackageQuery(constraints=tuple(constraints[i] for i in order), objective=objective)


def _widen(q: PackageQuery, factor: float) -> PackageQuery:
    """Loosen every non-cardinality bound by factor * (|beta| + 1)"""
    widened = []
    for c in q.constraints:
        if c.kind is not ConstraintKind.CARDINALITY:
            spread = factor * (abs(c.beta) + 1.0)
            beta = c.beta + spread if c.op is Comparison.LE else c.beta - spread
            c = c.model_copy(update={"beta": round(beta, 2)})
        widened.append(c)
    return PackageQuery(constraints=tuple(widened), objective=q.objective)


def _feasible(q: PackageQuery, table: ItemTable, cfg: SolverConfig) -> bool:
    return solve(q, table, cfg)[0].is_feasible


def generate_queries(spec: WorkloadSpec, table: ItemTable, solver_config: Optional[SolverConfig] = None) -> List[PackageQuery]:
    """Seeded queries in the spirit of the meal-plan example, each feasible on `table`"""
    if len(table) == 0 or not table.attributes:
        raise GenerationError("cannot generate queries over an empty table")
    cfg = solver_config or SolverConfig()
    rng = np.random.default_rng(spec.seed)

    n_minimize = int(math.floor(spec.n_queries * spec.objective_split + 0.5))
    directions = [Direction.MINIMIZE] * n_minimize + [Direction.MAXIMIZE] * (spec.n_queries - n_minimize)
    directions = [directions[i] for i in rng.permutation(spec.n_queries)]

    queries = []
    for index, direction in enumerate(directions):
        n_constraints = int(rng.integers(spec.constraints_min, spec.constraints_max + 1))
        query = None
        for _ in range(settings.generation_attempts):
            query = _draw_query(rng, table, n_constraints, direction)
            if _feasible(query, table, cfg):
                break
        else:
            logger.warning("⚠️ Query %d infeasible after %d attempts, widening bounds", index, settings.generation_attempts)
            for round_ in range(settings.widening_rounds):
                query = _widen(query, 0.25 * 2**round_)
                if _feasible(query, table, cfg):
                    break
            else:
                raise GenerationError(f"query {index} stayed infeasible after widening its bounds")
        logger.info("Query %d: %d constraints, %s", index, len(query), query.objective.describe())
        queries.append(query)
    return queries


# ==========================================
# Experiment runner
# ==========================================

def _cell_seed(seed: int, query: int, level: int) -> int:
    return int(np.random.SeedSequence([seed, query, level]).generate_state(1)[0])


def _run_cell(spec: WorkloadSpec, table: ItemTable, q: PackageQuery, query_index: int, method: str, k: int,
              cache: SolveCache, solver_config: SolverConfig) -> BenchCell:
    level = RelaxationLevel(k=k)
    cell = dict(query=query_index, method=method, level=k, constraints=len(q), removed=level.removals(len(q)))
    try:
        with stopwatch() as watch:
            results = run_method(
                method, q, table, level,
                weights=spec.weights,
                trials=spec.random_trials,
                seed=_cell_seed(spec.seed, query_index, k),
                solver_config=solver_config,
                threads=1,
                cache=cache,
            )
    except (ResourceError, CapacityError) as e:
        logger.warning("⚠️ Query %d %s k=%d failed: %s", query_index, method, k, e)
        return BenchCell(status="failed", message=str(e), **cell)

    if any(BASELINE_INFEASIBLE in r.metrics.flags for r in results):
        return BenchCell(status="infeasible", message="original query is infeasible", **cell)
    return BenchCell(
        status="ok",
        improvement=float(np.mean([r.metrics.improvement for r in results])),
        error=float(np.mean([r.metrics.error for r in results])),
        score=float(np.mean([r.metrics.score for r in results])),
        solver_calls=float(np.mean([r.solver_calls for r in results])),
        wall_time_ms=watch.seconds * 1000.0 / len(results),
        **cell,
    )


def run_cells(spec: WorkloadSpec, table: ItemTable, queries: Sequence[PackageQuery],
              methods: Optional[Sequence[str]] = None, threads: int = 1,
              solver_config: Optional[SolverConfig] = None) -> List[BenchCell]:
    """Every (query, method, level) cell, returned in that sorted order"""
    methods = list(methods or spec.methods)
    cfg = solver_config or SolverConfig()
    # one memo per (query, method): greedy paths repeat across levels
    caches: Dict[Tuple[int, str], SolveCache] = {
        (qi, m): SolveCache(name=f"query{qi}:{m}") for qi in range(len(queries)) for m in methods
    }
    tasks = [(qi, m, k) for qi in range(len(queries)) for m in methods for k in spec.levels]

    def run(task):
        qi, m, k = task
        return _run_cell(spec, table, queries[qi], qi, m, k, caches[(qi, m)], cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(run, tasks))
    else:
        cells = [run(t) for t in tasks]

    for (qi, m), cache in sorted(caches.items()):
        logger.debug("Cache %s", cache.stats())
    return cells


def aggregate_curves(cells: Sequence[BenchCell], methods: Sequence[str], levels: Sequence[int]) -> List[CurvePoint]:
    points = []
    for method in methods:
        for k in levels:
            ok = sorted(
                (c for c in cells if c.method == method and c.level == k and c.status == "ok"),
                key=lambda c: c.query,
            )

            def mean(field: str) -> float:
                return float(np.mean([getattr(c, field) for c in ok])) if ok else math.nan

            points.append(
                CurvePoint(
                    method=method,
                    level=k,
                    queries_ok=len(ok),
                    mean_improvement=mean("improvement"),
                    mean_error=mean("error"),
                    mean_score=mean("score"),
                    mean_solver_calls=mean("solver_calls"),
                    mean_wall_time_ms=mean("wall_time_ms"),
                )
            )
    return points


def run_curves(spec: WorkloadSpec, methods: Optional[Sequence[str]] = None, threads: int = 1) -> List[CurvePoint]:
    methods = list(methods or spec.methods)
    table = load_workload_table(spec)
    queries = generate_queries(spec, table)
    cells = run_cells(spec, table, queries, methods, threads)
    return aggregate_curves(cells, methods, spec.levels)


class BenchArtifacts(BaseModel):
    curves: Path
    cells: Path
    queries: Path
    manifest: Path
    dataset: Optional[Path] = None


def run_benchmark(spec: WorkloadSpec, out_dir: Union[str, Path], threads: int = 1) -> BenchArtifacts:
    """Run the whole workload and write its CSVs, queries and manifest to `out_dir`"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    table = load_workload_table(spec)
    queries = generate_queries(spec, table)
    logger.info("🚀 Running %d queries x %d methods x %d levels", len(queries), len(spec.methods), len(spec.levels))
    cells = run_cells(spec, table, queries, spec.methods, threads)
    points = aggregate_curves(cells, spec.methods, spec.levels)

    artifacts = BenchArtifacts(
        curves=out / "curves.csv",
        cells=out / "cells.csv",
        queries=out / "queries.json",
        manifest=out / "manifest.json",
        dataset=None if isinstance(spec.dataset, str) else out / "dataset.csv",
    )
    pd.DataFrame([p.model_dump() for p in points], columns=CURVE_COLUMNS).to_csv(artifacts.curves, index=False)
    pd.DataFrame([c.model_dump() for c in cells], columns=CELL_COLUMNS).to_csv(artifacts.cells, index=False)
    artifacts.queries.write_text(json.dumps([query_to_document(q) for q in queries], indent=2), encoding="utf-8")
    if artifacts.dataset is not None:
        write_items(table, artifacts.dataset)

    manifest = {
        "pkgrelax_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "seed": spec.seed,
        "threads": threads,
        "workload": spec.model_dump(mode="json"),
        "outputs": {k: str(v) for k, v in artifacts.model_dump().items() if v is not None},
    }
    artifacts.manifest.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    logger.info("✅ Benchmark written to %s", out)
    return artifacts
