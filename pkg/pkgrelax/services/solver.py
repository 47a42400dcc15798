"""
Exact top-1 package solver.

`solve_bruteforce` enumerates every subset and is the reference oracle for small
tables. `solve` prefilters items by the base constraints and runs a depth-first
include/exclude branch-and-bound over the remaining items ordered by objective value.

Both rank feasible packages by the same key: better objective value, then fewer
items, then the lexicographically smallest ascending id sequence. Objective values
are `math.fsum` totals, so the two agree exactly, not just within tolerance.
"""

import itertools
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from pkgrelax.config import settings
from pkgrelax.core.errors import CapacityError, ContractError, ResourceError
from pkgrelax.core.evaluation import compare
from pkgrelax.core.models import (
    Comparison,
    Constraint,
    ConstraintKind,
    ItemTable,
    Package,
    PackageQuery,
    SolveOutcome,
)
from pkgrelax.utils import stopwatch

logger = logging.getLogger(__name__)

SortKey = Tuple[float, int, Tuple[int, ...]]


class SolverConfig(BaseModel):
    max_items_bruteforce: int = Field(default_factory=lambda: settings.max_items_bruteforce, gt=0)
    node_limit: int = Field(default_factory=lambda: settings.node_limit, gt=0)
    max_package_size_unbounded: Optional[int] = Field(
        default_factory=lambda: settings.max_package_size_unbounded, gt=0
    )

    @classmethod
    def from_settings(cls, **overrides) -> "SolverConfig":
        return cls(**overrides)


class SolveStats(BaseModel):
    method: str
    nodes_explored: int = Field(ge=0)
    wall_time: float = 0.0  # seconds
    candidates: int = 0  # items left after the base-constraint prefilter


SolveHook = Callable[[SolveStats], None]


def _rank(sign: float, value: float, ids: Tuple[int, ...]) -> SortKey:
    return (-sign * value, len(ids), ids)


def split_constraints(constraints: Sequence[Constraint]):
    base, cardinality, global_sums = [], [], []
    for c in constraints:
        if c.kind is ConstraintKind.BASE:
            base.append(c)
        elif c.kind is ConstraintKind.CARDINALITY:
            cardinality.append(c)
        else:
            global_sums.append(c)
    return base, cardinality, global_sums


# ==========================================
# Reference oracle
# ==========================================

def solve_bruteforce(q: PackageQuery, table: ItemTable, cfg: Optional[SolverConfig] = None) -> SolveOutcome:
    cfg = cfg or SolverConfig()
    if len(table) > cfg.max_items_bruteforce:
        raise CapacityError(
            f"brute force handles at most {cfg.max_items_bruteforce} items, table has {len(table)}"
        )
    q.validate_against(table)

    order = sorted(range(len(table)), key=lambda p: table.item_ids[p])
    ids = [table.item_ids[p] for p in order]
    obj = [float(v) for v in table.column(q.objective.attr)[order]]
    columns = {
        c.attr: [float(v) for v in table.column(c.attr)[order]]
        for c in q.constraints if c.attr is not None
    }
    sign = q.objective.sign

    def feasible(combo: Tuple[int, ...]) -> bool:
        for c in q.constraints:
            if c.kind is ConstraintKind.CARDINALITY:
                value = float(len(combo))
            elif c.kind is ConstraintKind.GLOBAL:
                value = math.fsum(columns[c.attr][p] for p in combo)
            elif not combo:
                value = c.beta
            elif c.op is Comparison.LE:
                value = max(columns[c.attr][p] for p in combo)
            else:
                value = min(columns[c.attr][p] for p in combo)
            if not compare(value, c.op, c.beta):
                return False
        return True

    best: Optional[SortKey] = None
    best_value = 0.0
    for size in range(len(ids) + 1):
        # positions are id-ordered, so combinations come out lexicographically
        for combo in itertools.combinations(range(len(ids)), size):
            if not feasible(combo):
                continue
            value = math.fsum(obj[p] for p in combo)
            key = _rank(sign, value, tuple(ids[p] for p in combo))
            if best is None or key < best:
                best, best_value = key, value

    if best is None:
        return SolveOutcome.infeasible()
    return SolveOutcome.feasible(Package(item_ids=best[2]), best_value)


# ==========================================
# Prefilter
# ==========================================

def prefilter_items(base_constraints: Sequence[Constraint], table: ItemTable) -> ItemTable:
    """Rows that individually satisfy every base predicate"""
    mask = np.ones(len(table), dtype=bool)
    for c in base_constraints:
        if c.kind is not ConstraintKind.BASE:
            raise ContractError(f"prefilter_items takes base constraints only, got {c.describe()}")
        col = table.column(c.attr)
        if c.op is Comparison.LE:
            mask &= col <= c.beta + settings.tolerance
        else:
            mask &= col >= c.beta - settings.tolerance
    if mask.all():
        return table
    return table.take(np.flatnonzero(mask))


# ==========================================
# Branch and bound
# ==========================================

class _BranchAndBound:
    """Include/exclude DFS over items sorted best-objective-first"""

    def __init__(self, q: PackageQuery, cardinality: List[Constraint], global_sums: List[Constraint],
                 table: ItemTable, cfg: SolverConfig):
        self.sign = q.objective.sign
        self.node_limit = cfg.node_limit
        self.nodes = 0
        tol = settings.tolerance

        obj = table.column(q.objective.attr)
        ids = np.asarray(table.item_ids, dtype=np.int64)
        # primary: sign*obj descending; secondary: id ascending
        order = np.lexsort((ids, -self.sign * obj)) if len(table) else np.zeros(0, dtype=np.intp)
        self.n = len(order)
        self.ids = [int(i) for i in ids[order]]
        self.obj = [float(v) for v in obj[order]]
        self.gain = [self.sign * v for v in self.obj]
        self.prefix = [0.0] + list(itertools.accumulate(self.gain))
        self.n_positive = sum(1 for g in self.gain if g > 0)

        self.lower = 0
        self.upper = self.n if cfg.max_package_size_unbounded is None else min(self.n, cfg.max_package_size_unbounded)
        has_upper = False
        for c in cardinality:
            if c.op is Comparison.GE:
                self.lower = max(self.lower, math.ceil(c.beta - tol))
            else:
                bound = math.floor(c.beta + tol)
                self.upper = bound if not has_upper else min(self.upper, bound)
                has_upper = True
        if has_upper:
            self.upper = min(self.upper, self.n)

        self.cardinality = cardinality
        self.global_sums = global_sums
        self.columns = [[float(v) for v in table.column(c.attr)[order]] for c in global_sums]
        # mass the remaining items can still add in the constraint's repair direction
        self.reach = []
        for c, col in zip(global_sums, self.columns):
            if c.op is Comparison.GE:
                steps = [max(v, 0.0) for v in col]
            else:
                steps = [min(v, 0.0) for v in col]
            suffix = list(itertools.accumulate(reversed(steps)))[::-1] + [0.0]
            self.reach.append(suffix)

        # <= sums over non-negative weights bound the gain like a fractional knapsack
        self.knapsacks = []
        for j, (c, col) in enumerate(zip(global_sums, self.columns)):
            if c.op is Comparison.LE and all(v >= 0 for v in col):
                ratio_order = sorted(
                    (p for p in range(self.n) if self.gain[p] > 0),
                    key=lambda p: (-(self.gain[p] / col[p]) if col[p] > 0 else -math.inf, p),
                )
                self.knapsacks.append((j, ratio_order))

        self.best: Optional[SortKey] = None
        self.best_gain = -math.inf
        self.best_value = 0.0

    @staticmethod
    def _slack(*magnitudes: float) -> float:
        return settings.tolerance + 1e-9 * (1.0 + sum(abs(m) for m in magnitudes))

    def _repairable(self, i: int, sums: Tuple[float, ...]) -> bool:
        for j, c in enumerate(self.global_sums):
            reach = self.reach[j][i]
            if c.op is Comparison.GE:
                if sums[j] + reach < c.beta - self._slack(sums[j], reach, c.beta):
                    return False
            elif sums[j] + reach > c.beta + self._slack(sums[j], reach, c.beta):
                return False
        return True

    def _bound(self, i: int, count: int, gain: float, sums: Tuple[float, ...]) -> float:
        """Objective (in gain units) of the best completion honouring only cardinality"""
        remaining = self.n - i
        need = max(0, self.lower - count)
        useful = max(0, self.n_positive - i)
        take = min(remaining, self.upper - count, max(need, useful))
        bound = gain + self.prefix[i + take] - self.prefix[i]
        if self.knapsacks:
            bound = min(bound, self._knapsack_bound(i, gain, sums))
        return bound

    def _knapsack_bound(self, i: int, gain: float, sums: Tuple[float, ...]) -> float:
        bound = math.inf
        for j, ratio_order in self.knapsacks:
            col = self.columns[j]
            # nodes kept by the repair slack may already sit just past the bound
            capacity = max(self.global_sums[j].beta + settings.tolerance - sums[j], 0.0)
            total = gain
            for p in ratio_order:
                if p < i:
                    continue
                # zero-weight items always fit, so the fractional step divides by a positive weight
                if col[p] <= capacity:
                    total += self.gain[p]
                    capacity -= col[p]
                else:
                    total += self.gain[p] * capacity / col[p]
                    break
            bound = min(bound, total)
        return bound

    def _leaf(self, chosen: Tuple[int, ...]) -> None:
        count = float(len(chosen))
        for c in self.cardinality:
            if not compare(count, c.op, c.beta):
                return
        for c, col in zip(self.global_sums, self.columns):
            if not compare(math.fsum(col[p] for p in chosen), c.op, c.beta):
                return
        value = math.fsum(self.obj[p] for p in chosen)
        key = _rank(self.sign, value, tuple(sorted(self.ids[p] for p in chosen)))
        if self.best is None or key < self.best:
            self.best, self.best_value = key, value
            self.best_gain = self.sign * value

    def run(self) -> SolveOutcome:
        if self.lower > self.upper or self.upper < 0:
            return SolveOutcome.infeasible()

        zero = tuple(0.0 for _ in self.global_sums)
        stack = [(0, (), 0.0, zero)]
        while stack:
            i, chosen, gain, sums = stack.pop()
            self.nodes += 1
            if self.nodes > self.node_limit:
                raise ResourceError(f"branch and bound exceeded node limit {self.node_limit}")

            count = len(chosen)
            if count + (self.n - i) < self.lower:
                continue
            if not self._repairable(i, sums):
                continue
            bound = self._bound(i, count, gain, sums)
            if self.best is not None and bound < self.best_gain - self._slack(bound, self.best_gain):
                continue
            if count == self.upper or i == self.n:
                self._leaf(chosen)
                continue

            stack.append((i + 1, chosen, gain, sums))
            if count < self.upper:
                taken = tuple(s + col[i] for s, col in zip(sums, self.columns))
                stack.append((i + 1, chosen + (i,), gain + self.gain[i], taken))

        if self.best is None:
            return SolveOutcome.infeasible()
        return SolveOutcome.feasible(Package(item_ids=self.best[2]), self.best_value)


def solve(q: PackageQuery, table: ItemTable, cfg: Optional[SolverConfig] = None,
          on_solve: Optional[SolveHook] = None) -> Tuple[SolveOutcome, SolveStats]:
    """Exact top-1 package; same outcome as solve_bruteforce under the shared tie rule"""
    cfg = cfg or SolverConfig()
    with stopwatch() as watch:
        q.validate_against(table)
        base, cardinality, global_sums = split_constraints(q.constraints)
        candidates = prefilter_items(base, table)
        search = _BranchAndBound(q, cardinality, global_sums, candidates, cfg)
        outcome = search.run()

    stats = SolveStats(
        method="branch_and_bound",
        nodes_explored=search.nodes,
        wall_time=watch.seconds,
        candidates=len(candidates),
    )
    logger.debug(
        "Solved %d constraints over %d/%d items: %s, %d nodes, %.4fs",
        len(q), len(candidates), len(table), outcome.status.value, stats.nodes_explored, stats.wall_time,
    )
    if on_solve is not None:
        on_solve(stats)
    return outcome, stats
