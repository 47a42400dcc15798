"""
Relaxation quality metrics.

    improvement  I(Q';Q) = |F(Q) - F(Q')| / |F(Q)|
    mape_error   E = (1/|C|) * sum over removed constraints the relaxed package
                     violates of |beta_i - f_i(Q')| / |beta_i|
    score        (1 + I) / (1 + E)

Zero denominators fall back to an epsilon and are flagged rather than raised.
"""

from typing import Iterable, List, NamedTuple, Optional, Tuple

from pydantic import BaseModel, Field

from pkgrelax.config import settings
from pkgrelax.core.errors import ContractError
from pkgrelax.core.evaluation import compare, evaluate_constraint_function
from pkgrelax.core.models import ItemTable, Package, PackageQuery, SolveOutcome

BASELINE_INFEASIBLE = "baseline_infeasible"
DEGENERATE_BASELINE = "degenerate_baseline"
DEGENERATE_BOUND = "degenerate_bound"
RELAXED_INFEASIBLE = "relaxed_infeasible"


class Measured(NamedTuple):
    value: float
    flags: Tuple[str, ...] = ()


class MapeTerm(BaseModel):
    index: int
    value: float  # f_c over the relaxed package
    beta: float
    term: float
    degenerate: bool = False


class MapeBreakdown(BaseModel):
    value: float
    terms: List[MapeTerm] = []
    flags: Tuple[str, ...] = ()

    @property
    def violated(self) -> Tuple[int, ...]:
        return tuple(t.index for t in self.terms)


class RelaxationScore(BaseModel):
    improvement: float = Field(ge=0)
    error: float = Field(ge=0)
    score: float = Field(gt=0)
    violated: Tuple[int, ...] = ()
    flags: Tuple[str, ...] = ()


def improvement(original: SolveOutcome, relaxed: SolveOutcome) -> Measured:
    if not original.is_feasible:
        return Measured(0.0, (BASELINE_INFEASIBLE,))
    if not relaxed.is_feasible:
        raise ContractError("a relaxation of a feasible query cannot be infeasible")

    base = original.objective_value
    flags = ()
    denominator = abs(base)
    if denominator < settings.epsilon:
        denominator = settings.epsilon
        flags = (DEGENERATE_BASELINE,)
    return Measured(abs(base - relaxed.objective_value) / denominator, flags)


def mape_breakdown(q_original: PackageQuery, removed: Iterable[int], relaxed_pkg: Package,
                   table: ItemTable) -> MapeBreakdown:
    n = len(q_original.constraints)
    terms = []
    for i in sorted(set(removed)):
        c = q_original.constraints[i]
        value = evaluate_constraint_function(c, relaxed_pkg, table)
        if compare(value, c.op, c.beta):
            continue
        denominator = abs(c.beta)
        degenerate = denominator < settings.epsilon
        if degenerate:
            denominator = settings.epsilon
        terms.append(
            MapeTerm(index=i, value=value, beta=c.beta, term=abs(c.beta - value) / denominator, degenerate=degenerate)
        )

    total = sum(t.term for t in terms) / n if n else 0.0
    flags = (DEGENERATE_BOUND,) if any(t.degenerate for t in terms) else ()
    return MapeBreakdown(value=total, terms=terms, flags=flags)


def mape_error(q_original: PackageQuery, removed: Iterable[int], relaxed_pkg: Package, table: ItemTable) -> float:
    return mape_breakdown(q_original, removed, relaxed_pkg, table).value


def relaxation_score(improvement_value: float, error_value: float) -> float:
    if improvement_value < 0 or error_value < 0:
        raise ContractError(f"score needs I >= 0 and E >= 0, got I={improvement_value}, E={error_value}")
    return (1.0 + improvement_value) / (1.0 + error_value)


def score_relaxation(q_original: PackageQuery, table: ItemTable, baseline: SolveOutcome,
                     removed: Iterable[int], relaxed: SolveOutcome) -> RelaxationScore:
    """Full metrics of one relaxation against the original query's outcome"""
    if not relaxed.is_feasible:
        if baseline.is_feasible:
            raise ContractError("a relaxation of a feasible query cannot be infeasible")
        return RelaxationScore(
            improvement=0.0, error=0.0, score=1.0, flags=(BASELINE_INFEASIBLE, RELAXED_INFEASIBLE)
        )

    gain = improvement(baseline, relaxed)
    mape = mape_breakdown(q_original, removed, relaxed.package, table)
    return RelaxationScore(
        improvement=gain.value,
        error=mape.value,
        score=relaxation_score(gain.value, mape.value),
        violated=mape.violated,
        flags=tuple(dict.fromkeys(gain.flags + mape.flags)),
    )


def package_violations(q: PackageQuery, pkg: Package, table: ItemTable,
                       indices: Optional[Iterable[int]] = None) -> Tuple[int, ...]:
    """Indices (of `indices`, default all) whose constraint `pkg` violates"""
    indices = range(len(q.constraints)) if indices is None else sorted(set(indices))
    return tuple(
        i for i in indices
        if not compare(evaluate_constraint_function(q.constraints[i], pkg, table), q.constraints[i].op,
                       q.constraints[i].beta)
    )
