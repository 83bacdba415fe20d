"""Cross-adapter result equivalence: the same plan is executed against each
adapter and normalized results are compared instance by instance."""

from __future__ import annotations

from dataclasses import dataclass

from ..core import GeoBenchError, ResultSet, normalize_result, render_row, results_equal
from .adapters import Adapter
from .plan import WorkloadPlan


class PlanMismatchError(GeoBenchError):
    """The adapters did not run the same plan; comparison refused."""


@dataclass(frozen=True)
class Mismatch:
    query: str
    param_set: int
    adapter_a: str
    adapter_b: str
    payload_a: tuple
    payload_b: tuple

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "param_set": self.param_set,
            "adapter_a": self.adapter_a,
            "adapter_b": self.adapter_b,
            "payload_a": [list(r) for r in self.payload_a],
            "payload_b": [list(r) for r in self.payload_b],
        }


def collect_results(plan: WorkloadPlan, adapter: Adapter) -> dict[tuple, ResultSet]:
    """One unmeasured execution of every plan instance, keyed by
    (query name, parameter set id)."""
    if not adapter.captures_results:
        raise PlanMismatchError("adapter declares opaque results; cannot verify")
    out = {}
    for qi in plan.instances:
        outcome = adapter.execute(qi)
        out[(qi.name, qi.param_set_id)] = outcome.result
    return out


def _rendered(r: ResultSet) -> tuple:
    return tuple(render_row(row) for row in normalize_result(r).rows)


def verify_equivalence(results_by_adapter: dict[str, dict[tuple, ResultSet]],
                       float_rtol: float = 1e-6) -> list[Mismatch]:
    """Pairwise comparison of every adapter against the first one given.
    Returns one Mismatch per differing instance; empty list means equal."""
    if len(results_by_adapter) < 2:
        raise PlanMismatchError("need results from at least two adapters")
    names = list(results_by_adapter)
    base_name = names[0]
    base = results_by_adapter[base_name]
    mismatches = []
    for other_name in names[1:]:
        other = results_by_adapter[other_name]
        if set(base) != set(other):
            raise PlanMismatchError(
                f"adapters {base_name!r} and {other_name!r} ran different plans "
                f"({len(base)} vs {len(other)} instances)")
        for key in sorted(base):
            a, b = base[key], other[key]
            if not results_equal(a, b, float_rtol):
                mismatches.append(Mismatch(
                    query=key[0], param_set=key[1],
                    adapter_a=base_name, adapter_b=other_name,
                    payload_a=_rendered(a), payload_b=_rendered(b)))
    return mismatches
