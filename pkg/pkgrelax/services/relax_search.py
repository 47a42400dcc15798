"""
Search over query relaxations (constraint removals).

Methods
    exhaustive_i / exhaustive_ie   every removal of the level's size, best I / best score
    random_relax                   uniformly random removals of the level's size
    greedy                         remove one constraint per iteration
    bidirectional_greedy           greedy removal up to 50%, greedy addition from the
                                   empty constraint set above it
    find_optimal_relaxation        best score over every proper subset
    recommend_packages             original plan plus the best single relaxation per
                                   constraint kind

Reported metrics are always measured against the original query, whatever the method
optimized while searching. `solver_calls` counts candidate evaluations; the solve of the
original query (and of the empty query where addition starts) is not a candidate.
"""

import itertools
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pkgrelax.cache import SolveCache, generate_cache_key
from pkgrelax.config import settings
from pkgrelax.core.errors import CapacityError, ContractError
from pkgrelax.core.evaluation import objective_value
from pkgrelax.core.models import (
    Comparison,
    ConstraintKind,
    ItemTable,
    Package,
    PackageQuery,
    SolveOutcome,
)
from pkgrelax.services.metrics import (
    RelaxationScore,
    improvement,
    mape_error,
    package_violations,
    score_relaxation,
)
from pkgrelax.services.solver import SolverConfig, solve
from pkgrelax.utils import parse_key_values, round_half_up, stopwatch

logger = logging.getLogger(__name__)

METHODS = (
    "exhaustive-i",
    "exhaustive-ie",
    "greedy-i",
    "greedy-ie",
    "bidirectional-i",
    "bidirectional-ie",
    "random",
)


class Criterion(str, Enum):
    I = "I"
    IE = "IE"


class RelaxationLevel(BaseModel):
    """Percentage k of constraints to remove"""

    k: int = Field(ge=0, le=100)

    model_config = ConfigDict(frozen=True)

    def retained(self, n_constraints: int) -> int:
        r = round_half_up(n_constraints * (100 - self.k), 100)
        if self.k > 0 and n_constraints > 0 and r == n_constraints:
            r = n_constraints - 1
        return r

    def removals(self, n_constraints: int) -> int:
        return n_constraints - self.retained(n_constraints)


_WEIGHT_FIELDS = {
    "base": "base_w",
    "global": "global_w",
    "card": "cardinality_w",
    "cardinality": "cardinality_w",
}


class PriorityWeights(BaseModel):
    """Multiplicative bias per constraint kind; larger means relaxed more willingly"""

    base_w: float = Field(default=1.0, gt=0)
    global_w: float = Field(default=1.0, gt=0)
    cardinality_w: float = Field(default=1.0, gt=0)

    model_config = ConfigDict(frozen=True)

    def for_kind(self, kind: ConstraintKind) -> float:
        if kind is ConstraintKind.BASE:
            return self.base_w
        if kind is ConstraintKind.GLOBAL:
            return self.global_w
        return self.cardinality_w

    @classmethod
    def parse(cls, text: str) -> "PriorityWeights":
        """'base=1,global=1,card=0.5'"""
        values = {}
        for key, value in parse_key_values(text):
            field = _WEIGHT_FIELDS.get(key.lower())
            if field is None:
                raise ValueError(f"unknown constraint kind '{key}' in weights")
            values[field] = float(value)
        return cls(**values)


class RelaxationResult(BaseModel):
    method: str
    level: Optional[int] = None
    removed: Tuple[int, ...]
    outcome: SolveOutcome
    metrics: RelaxationScore
    solver_calls: int = Field(ge=0)
    wall_time: float = 0.0  # seconds
    steps: Tuple[int, ...] = ()  # greedy order of removals (or additions)

    def retained(self, n_constraints: int) -> Tuple[int, ...]:
        removed = set(self.removed)
        return tuple(i for i in range(n_constraints) if i not in removed)


class Recommendation(BaseModel):
    label: str
    removed: Tuple[int, ...] = ()
    outcome: SolveOutcome
    metrics: Optional[RelaxationScore] = None
    violated: Tuple[int, ...] = ()


class _Search:
    """Shared state of one search: the query, its baseline, the solve memo and counters"""

    def __init__(self, q: PackageQuery, table: ItemTable, solver_config: Optional[SolverConfig] = None,
                 threads: Optional[int] = None, cache: Optional[SolveCache] = None):
        self.q = q
        self.table = table
        self.n = len(q.constraints)
        self.cfg = solver_config or SolverConfig()
        self.threads = threads or settings.search_threads
        self.cache = cache if cache is not None else SolveCache(name="relaxation")
        self.solver_calls = 0
        self._lock = threading.Lock()
        self._query_key = generate_cache_key(table.digest, q.model_dump(mode="json"))
        self.baseline = self.solve_retained(range(self.n))

    def solve_retained(self, retained: Iterable[int]) -> SolveOutcome:
        retained = tuple(sorted(set(retained)))
        key = generate_cache_key(self._query_key, retained)
        return self.cache.get_or_compute(key, lambda: solve(self.q.restricted(retained), self.table, self.cfg)[0])

    def evaluate(self, retained_sets: Sequence[Tuple[int, ...]]) -> List[SolveOutcome]:
        """Solve candidates; results come back in candidate order"""
        with self._lock:
            self.solver_calls += len(retained_sets)
        if self.threads > 1 and len(retained_sets) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                return list(pool.map(self.solve_retained, retained_sets))
        return [self.solve_retained(r) for r in retained_sets]

    def retained_of(self, removed: Iterable[int]) -> Tuple[int, ...]:
        removed = set(removed)
        return tuple(i for i in range(self.n) if i not in removed)

    def removed_of(self, retained: Iterable[int]) -> Tuple[int, ...]:
        return self.retained_of(retained)

    def score(self, removed: Iterable[int], outcome: SolveOutcome) -> RelaxationScore:
        return score_relaxation(self.q, self.table, self.baseline, removed, outcome)

    def kind_of(self, index: int) -> ConstraintKind:
        return self.q.constraints[index].kind


def _finish(search: _Search, method: str, level: Optional[int], removed: Tuple[int, ...],
            outcome: SolveOutcome, seconds: float, steps: Tuple[int, ...] = ()) -> RelaxationResult:
    result = RelaxationResult(
        method=method,
        level=level,
        removed=tuple(sorted(removed)),
        outcome=outcome,
        metrics=search.score(removed, outcome),
        solver_calls=search.solver_calls,
        wall_time=seconds,
        steps=steps,
    )
    logger.info(
        "%s k=%s removed=%s I=%.4f E=%.4f score=%.4f calls=%d (%.3fs)",
        method, level, list(result.removed), result.metrics.improvement, result.metrics.error,
        result.metrics.score, result.solver_calls, seconds,
    )
    return result


# ==========================================
# Exhaustive search
# ==========================================

def _exhaustive(q: PackageQuery, table: ItemTable, level: RelaxationLevel, criterion: Criterion, method: str,
                solver_config: Optional[SolverConfig], threads: Optional[int],
                cache: Optional[SolveCache]) -> RelaxationResult:
    with stopwatch() as watch:
        search = _Search(q, table, solver_config, threads, cache)
        removed_sets = list(itertools.combinations(range(search.n), level.removals(search.n)))
        outcomes = search.evaluate([search.retained_of(r) for r in removed_sets])

        best = None
        for removed, outcome in zip(removed_sets, outcomes):
            metrics = search.score(removed, outcome)
            if criterion is Criterion.I:
                rank = (outcome.is_feasible, metrics.improvement, -metrics.error)
            else:
                rank = (outcome.is_feasible, metrics.score, metrics.improvement)
            # candidates arrive in lexicographic order; first one wins ties
            if best is None or rank > best[0]:
                best = (rank, removed, outcome)

    return _finish(search, method, level.k, best[1], best[2], watch.seconds)


def exhaustive_i(q: PackageQuery, table: ItemTable, level: RelaxationLevel, *,
                 solver_config: Optional[SolverConfig] = None, threads: Optional[int] = None,
                 cache: Optional[SolveCache] = None) -> RelaxationResult:
    """Removal of the level's size with the largest improvement"""
    return _exhaustive(q, table, level, Criterion.I, "exhaustive-i", solver_config, threads, cache)


def exhaustive_ie(q: PackageQuery, table: ItemTable, level: RelaxationLevel, *,
                  solver_config: Optional[SolverConfig] = None, threads: Optional[int] = None,
                  cache: Optional[SolveCache] = None) -> RelaxationResult:
    """Removal of the level's size with the largest (1+I)/(1+E)"""
    return _exhaustive(q, table, level, Criterion.IE, "exhaustive-ie", solver_config, threads, cache)


def random_relax(q: PackageQuery, table: ItemTable, level: RelaxationLevel, trials: int, seed: int, *,
                 solver_config: Optional[SolverConfig] = None, cache: Optional[SolveCache] = None
                 ) -> List[RelaxationResult]:
    if trials < 1:
        raise ContractError("random relaxation needs at least one trial")

    rng = np.random.default_rng(seed)
    search = _Search(q, table, solver_config, 1, cache)
    m = level.removals(search.n)
    results = []
    for _ in range(trials):
        with stopwatch() as watch:
            removed = tuple(sorted(int(i) for i in rng.choice(search.n, size=m, replace=False))) if m else ()
            search.solver_calls = 0
            outcome = search.evaluate([search.retained_of(removed)])[0]
        results.append(_finish(search, "random", level.k, removed, outcome, watch.seconds))
    return results


# ==========================================
# Greedy search
# ==========================================

def _removal_value(search: _Search, criterion: Criterion, current: SolveOutcome,
                   retained: Tuple[int, ...], outcome: SolveOutcome) -> float:
    """I against the previous iterate; for IE the error is against the original constraints"""
    gain = improvement(current, outcome).value
    if criterion is Criterion.I:
        return gain
    error = mape_error(search.q, search.removed_of(retained), outcome.package, search.table) if outcome.is_feasible else 0.0
    return (1.0 + gain) / (1.0 + error)


def _greedy_removal(search: _Search, target: int, criterion: Criterion, weights: PriorityWeights):
    retained = tuple(range(search.n))
    current = search.baseline
    steps = []
    while len(retained) > target:
        candidates = [tuple(r for r in retained if r != j) for j in retained]
        outcomes = search.evaluate(candidates)

        best = None
        for j, cand, outcome in zip(retained, candidates, outcomes):
            value = _removal_value(search, criterion, current, cand, outcome) * weights.for_kind(search.kind_of(j))
            rank = (outcome.is_feasible, value)
            if best is None or rank > best[0]:
                best = (rank, j, cand, outcome)

        _, j, retained, current = best
        steps.append(j)
    return retained, current, tuple(steps)


def greedy(q: PackageQuery, table: ItemTable, level: RelaxationLevel, criterion: Criterion = Criterion.I,
           weights: Optional[PriorityWeights] = None, *, solver_config: Optional[SolverConfig] = None,
           threads: Optional[int] = None, cache: Optional[SolveCache] = None) -> RelaxationResult:
    weights = weights or PriorityWeights()
    with stopwatch() as watch:
        search = _Search(q, table, solver_config, threads, cache)
        retained, outcome, steps = _greedy_removal(search, level.retained(search.n), criterion, weights)
    method = f"greedy-{criterion.value.lower()}"
    return _finish(search, method, level.k, search.removed_of(retained), outcome, watch.seconds, steps)


def bidirectional_greedy(q: PackageQuery, table: ItemTable, level: RelaxationLevel,
                         criterion: Criterion = Criterion.I, weights: Optional[PriorityWeights] = None, *,
                         solver_config: Optional[SolverConfig] = None, threads: Optional[int] = None,
                         cache: Optional[SolveCache] = None) -> RelaxationResult:
    """Greedy removal for k <= 50, greedy addition from the empty constraint set for k > 50"""
    weights = weights or PriorityWeights()
    method = f"bidirectional-{criterion.value.lower()}"
    with stopwatch() as watch:
        search = _Search(q, table, solver_config, threads, cache)
        target = level.retained(search.n)
        if level.k <= 50:
            retained, current, steps = _greedy_removal(search, target, criterion, weights)
        else:
            retained, current, steps = (), search.solve_retained(()), []
            while len(retained) < target:
                candidates = [tuple(sorted(retained + (j,))) for j in range(search.n) if j not in retained]
                added = [j for j in range(search.n) if j not in retained]
                outcomes = search.evaluate(candidates)

                best = None
                for j, cand, outcome in zip(added, candidates, outcomes):
                    metrics = search.score(search.removed_of(cand), outcome)
                    value = metrics.improvement if criterion is Criterion.I else metrics.score
                    value /= weights.for_kind(search.kind_of(j))
                    rank = (outcome.is_feasible, value)
                    if best is None or rank > best[0]:
                        best = (rank, j, cand, outcome)

                _, j, retained, current = best
                steps.append(j)
            steps = tuple(steps)
    return _finish(search, method, level.k, search.removed_of(retained), current, watch.seconds, steps)


# ==========================================
# Reference and recommendations
# ==========================================

def find_optimal_relaxation(q: PackageQuery, table: ItemTable, *, max_constraints: Optional[int] = None,
                            solver_config: Optional[SolverConfig] = None, threads: Optional[int] = None,
                            cache: Optional[SolveCache] = None) -> RelaxationResult:
    """Best-scoring removal over every non-empty subset of the constraints"""
    cap = settings.optimal_enumeration_cap if max_constraints is None else max_constraints
    n = len(q.constraints)
    if n > cap:
        raise CapacityError(f"optimal relaxation enumerates 2^n subsets; {n} constraints exceeds the cap of {cap}")
    if n == 0:
        raise ContractError("a query without constraints has no relaxation")

    with stopwatch() as watch:
        search = _Search(q, table, solver_config, threads, cache)
        removed_sets = [r for m in range(1, n + 1) for r in itertools.combinations(range(n), m)]
        outcomes = search.evaluate([search.retained_of(r) for r in removed_sets])

        best = None
        for removed, outcome in zip(removed_sets, outcomes):
            metrics = search.score(removed, outcome)
            rank = (outcome.is_feasible, metrics.score, metrics.improvement)
            if best is None or rank > best[0]:
                best = (rank, removed, outcome)

    return _finish(search, "optimal", None, best[1], best[2], watch.seconds)


def _cardinality_range(q: PackageQuery, n_items: int) -> Tuple[int, int]:
    lower, upper = 0, n_items
    for c in q.constraints:
        if c.kind is not ConstraintKind.CARDINALITY:
            continue
        if c.op is Comparison.GE:
            lower = max(lower, math.ceil(c.beta - settings.tolerance))
        else:
            upper = min(upper, math.floor(c.beta + settings.tolerance))
    return lower, upper


def recommend_packages(q: PackageQuery, table: ItemTable, *, include_random: bool = False, seed: int = 0,
                       solver_config: Optional[SolverConfig] = None,
                       cache: Optional[SolveCache] = None) -> List[Recommendation]:
    """Diversified plans: the original top-1 and one single-constraint relaxation per kind"""
    search = _Search(q, table, solver_config, 1, cache)
    plans = [
        Recommendation(
            label="original",
            outcome=search.baseline,
            metrics=search.score((), search.baseline),
        )
    ]

    for kind in (ConstraintKind.BASE, ConstraintKind.GLOBAL, ConstraintKind.CARDINALITY):
        indices = q.indices_of(kind)
        if not indices:
            continue
        outcomes = search.evaluate([search.retained_of((i,)) for i in indices])
        best = None
        for i, outcome in zip(indices, outcomes):
            metrics = search.score((i,), outcome)
            rank = (outcome.is_feasible, metrics.score, metrics.improvement)
            if best is None or rank > best[0]:
                best = (rank, i, outcome, metrics)
        _, i, outcome, metrics = best
        plans.append(
            Recommendation(
                label=f"{kind.value}-relax",
                removed=(i,),
                outcome=outcome,
                metrics=metrics,
                violated=metrics.violated,
            )
        )

    if include_random:
        plan = _random_plan(q, table, seed)
        if plan is not None:
            plans.append(plan)

    sign = q.objective.sign

    def order(plan: Recommendation):
        if not plan.outcome.is_feasible:
            return (1, 0.0)
        return (0, -sign * plan.outcome.objective_value)

    return sorted(plans, key=order)


def _random_plan(q: PackageQuery, table: ItemTable, seed: int) -> Optional[Recommendation]:
    """Random items honouring only the cardinality constraints (a control plan)"""
    lower, upper = _cardinality_range(q, len(table))
    if lower > upper or len(table) == 0:
        logger.warning("⚠️ No random plan: cardinality range [%d, %d] over %d items", lower, upper, len(table))
        return None
    rng = np.random.default_rng(seed)
    size = int(rng.integers(lower, upper + 1))
    ids = rng.choice(np.asarray(table.item_ids, dtype=np.int64), size=size, replace=False)
    pkg = Package(item_ids=[int(i) for i in ids])
    return Recommendation(
        label="random",
        outcome=SolveOutcome.feasible(pkg, objective_value(q.objective, pkg, table)),
        violated=package_violations(q, pkg, table),
    )


# ==========================================
# Dispatch
# ==========================================

def run_method(name: str, q: PackageQuery, table: ItemTable, level: RelaxationLevel, *,
               weights: Optional[PriorityWeights] = None, trials: int = 20, seed: int = 0,
               solver_config: Optional[SolverConfig] = None, threads: Optional[int] = None,
               cache: Optional[SolveCache] = None) -> List[RelaxationResult]:
    """Run a method by its CLI/bench name; `random` yields one result per trial"""
    name = name.lower()
    shared = dict(solver_config=solver_config, cache=cache)
    if name == "random":
        return random_relax(q, table, level, trials, seed, **shared)
    if name == "exhaustive-i":
        return [exhaustive_i(q, table, level, threads=threads, **shared)]
    if name == "exhaustive-ie":
        return [exhaustive_ie(q, table, level, threads=threads, **shared)]

    runners: dict = {"greedy": greedy, "bidirectional": bidirectional_greedy}
    family, _, suffix = name.rpartition("-")
    if family in runners and suffix in ("i", "ie"):
        criterion = Criterion(suffix.upper())
        return [runners[family](q, table, level, criterion, weights, threads=threads, **shared)]
    raise ContractError(f"unknown method '{name}'; choose from {', '.join(METHODS)}")
