from .adapters import (
    Adapter,
    AdapterConnectionError,
    AdapterError,
    MockAdapter,
    RefStoreAdapter,
    SqlWireAdapter,
    create_adapter,
)
from .plan import HarnessError, WorkloadPlan, build_plan
from .runner import (
    Measurement,
    ResourceSample,
    RunConfig,
    RunResult,
    read_measurements,
    run_experiment,
    write_measurements,
    write_resources,
)
from .verify import Mismatch, PlanMismatchError, collect_results, verify_equivalence

__all__ = [
    "Adapter",
    "AdapterConnectionError",
    "AdapterError",
    "HarnessError",
    "Measurement",
    "Mismatch",
    "MockAdapter",
    "PlanMismatchError",
    "RefStoreAdapter",
    "ResourceSample",
    "RunConfig",
    "RunResult",
    "SqlWireAdapter",
    "WorkloadPlan",
    "build_plan",
    "collect_results",
    "create_adapter",
    "read_measurements",
    "run_experiment",
    "verify_equivalence",
    "write_measurements",
    "write_resources",
]
