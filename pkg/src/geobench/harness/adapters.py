"""SUT adapters: the client-side contract is load(dataset, profile),
execute(instance) -> (result, latency, rows), close().

Built-ins: "refstore" (the in-process reference store, dialect "canonical"),
"sqlwire" (renders the template's dialect text and sends it over a
user-supplied connection string), and "mock" (fixed service time, for
harness calibration)."""

from __future__ import annotations

import time
from typing import NamedTuple, Optional, Union

from ..core import GeoBenchError, ResultSet
from ..datagen import Dataset, read_dataset
from ..queryspec import QueryInstance, TemplateRegistry
from ..refstore import Catalog, ConfigProfile, load_store


class AdapterError(GeoBenchError):
    pass


class AdapterConnectionError(AdapterError):
    """Connection to the SUT lost; the running repetition is aborted."""


class ExecOutcome(NamedTuple):
    result: Optional[ResultSet]  # None when the adapter is result-opaque
    latency_us: int
    row_count: int


class Adapter:
    """Base adapter; subclasses set `dialect` and `captures_results`."""

    dialect = "canonical"
    captures_results = True

    def load(self, dataset: Union[Dataset, str, None], profile: ConfigProfile) -> None:
        raise NotImplementedError

    def execute(self, instance: QueryInstance) -> ExecOutcome:
        raise NotImplementedError

    def for_client(self, client_id: int) -> "Adapter":
        """Per-worker session for parallel mode; default shares this adapter."""
        return self

    def close(self) -> None:
        pass


class RefStoreAdapter(Adapter):
    dialect = "canonical"

    def __init__(self, catalog: Optional[Catalog] = None):
        self.catalog = catalog or Catalog.load()
        self.handle = None

    def load(self, dataset, profile):
        if isinstance(dataset, str):
            dataset = read_dataset(dataset)
        if dataset is None:
            raise AdapterError("refstore adapter needs a dataset")
        self.handle = load_store(dataset, profile)

    def execute(self, instance):
        if self.handle is None:
            raise AdapterError("adapter not loaded")
        t0 = time.perf_counter_ns()
        result = self.catalog.execute(self.handle, instance)
        latency_us = (time.perf_counter_ns() - t0) // 1000
        return ExecOutcome(result, int(latency_us), len(result))

    def close(self):
        self.handle = None


class SqlWireAdapter(Adapter):
    """Generic text-dialect adapter over a SQLAlchemy connection string.

    The target database is expected to be preloaded; load() only opens the
    connection. Result capture can be disabled for SUTs whose wire results
    are not comparable."""

    def __init__(self, connection: str, dialect: str,
                 registry: TemplateRegistry, capture_results: bool = True):
        if not connection:
            raise AdapterError("sqlwire adapter needs a connection string")
        self.connection_string = connection
        self.dialect = dialect
        self.registry = registry
        self.captures_results = capture_results
        self._engine = None
        self._conn = None
        self._owns_engine = True

    def load(self, dataset, profile):
        import sqlalchemy

        try:
            self._engine = sqlalchemy.create_engine(self.connection_string)
            self._conn = self._engine.connect()
        except Exception as exc:
            raise AdapterConnectionError(f"cannot connect: {exc}") from exc

    def for_client(self, client_id):
        clone = SqlWireAdapter.__new__(SqlWireAdapter)
        clone.__dict__.update(self.__dict__)
        clone._owns_engine = False
        clone._conn = self._engine.connect()
        return clone

    def execute(self, instance):
        import sqlalchemy
        from sqlalchemy import exc as sa_exc

        if self._conn is None:
            raise AdapterError("adapter not loaded")
        text = self.registry.render(instance.template, self.dialect, instance.param_set)
        t0 = time.perf_counter_ns()
        try:
            cursor = self._conn.execute(sqlalchemy.text(text))
            columns = tuple(cursor.keys())
            rows = cursor.fetchall()
        except (sa_exc.OperationalError, sa_exc.InterfaceError) as exc:
            raise AdapterConnectionError(str(exc)) from exc
        except sa_exc.DBAPIError as exc:
            raise AdapterError(str(exc)) from exc
        latency_us = (time.perf_counter_ns() - t0) // 1000
        result = ResultSet.make(columns, [tuple(r) for r in rows]) \
            if self.captures_results else None
        return ExecOutcome(result, int(latency_us), len(rows))

    def close(self):
        if self._conn is not None:
            self._conn.close()
            self._conn = None
        if self._engine is not None and self._owns_engine:
            self._engine.dispose()
            self._engine = None


class MockAdapter(Adapter):
    """Deterministic service time; the closed-loop calibration target."""

    dialect = "canonical"

    def __init__(self, service_time_s: float = 0.01, fail_on: Optional[set] = None,
                 lose_connection_on: Optional[set] = None):
        self.service_time_s = service_time_s
        self.fail_on = fail_on or set()
        self.lose_connection_on = lose_connection_on or set()
        self.calls = 0

    def load(self, dataset, profile):
        pass

    def execute(self, instance):
        self.calls += 1
        key = (instance.name, instance.param_set_id)
        time.sleep(self.service_time_s)
        if key in self.lose_connection_on:
            raise AdapterConnectionError(f"mock connection lost at {key}")
        if key in self.fail_on:
            raise AdapterError(f"mock failure at {key}")
        latency_us = int(self.service_time_s * 1e6)
        return ExecOutcome(ResultSet.make(["ok"], [(1,)]), latency_us, 1)


def create_adapter(adapter_id: str, *, connection: Optional[str] = None,
                   dialect: Optional[str] = None,
                   registry: Optional[TemplateRegistry] = None,
                   options: Optional[dict] = None) -> Adapter:
    options = options or {}
    if adapter_id == "refstore":
        return RefStoreAdapter()
    if adapter_id == "sqlwire":
        if registry is None:
            raise AdapterError("sqlwire adapter needs the template registry")
        return SqlWireAdapter(connection or "", dialect or "postgis", registry,
                              capture_results=bool(options.get("capture_results", True)))
    if adapter_id == "mock":
        return MockAdapter(service_time_s=float(options.get("service_time_ms", 10.0)) / 1e3)
    raise AdapterError(f"unknown adapter id: {adapter_id!r}")
