"""Workload planning: the deterministic shuffled sequence of query instances
executed identically against every SUT."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import GeoBenchError
from ..queryspec import ParamSet, QueryInstance, TemplateRegistry


class HarnessError(GeoBenchError):
    pass


@dataclass(frozen=True)
class WorkloadPlan:
    """A permutation of all (enabled template x parameter set) pairs plus the
    round-robin client assignment over it."""

    instances: tuple[QueryInstance, ...]
    seed: int
    clients: int

    def assignment(self, client_id: int) -> tuple[QueryInstance, ...]:
        return self.instances[client_id::self.clients]

    def assignments(self) -> dict[int, tuple[QueryInstance, ...]]:
        return {c: self.assignment(c) for c in range(self.clients)}

    def order_key(self) -> tuple[tuple[str, int], ...]:
        """Order-sensitive identity of the plan, for determinism checks."""
        return tuple((qi.name, qi.param_set_id) for qi in self.instances)

    def __len__(self) -> int:
        return len(self.instances)


def build_plan(registry: TemplateRegistry, param_sets: dict[str, list[ParamSet]],
               clients: int, seed: int) -> WorkloadPlan:
    """Fisher-Yates shuffle (seeded) over the full instance list, then
    round-robin assignment so each client sees a representative mix."""
    if clients < 1:
        raise HarnessError("clients must be >= 1")
    enabled = registry.enabled()
    if not enabled:
        raise HarnessError("no enabled templates")
    instances = []
    for template in enabled:
        sets = param_sets.get(template.name)
        if not sets:
            raise HarnessError(f"no parameter sets for template {template.name!r}")
        instances.extend(QueryInstance(template, ps) for ps in sets)
    rng = np.random.default_rng([seed, 2])
    order = rng.permutation(len(instances))
    shuffled = tuple(instances[int(i)] for i in order)
    return WorkloadPlan(instances=shuffled, seed=seed, clients=clients)
