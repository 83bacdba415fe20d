"""Canonical-query catalog: data-driven mapping from template names onto
reference-store primitives, with per-query result shapes and default
constants. Dialect id "canonical" routes through this module."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import yaml

from ..core import GeoBenchError, ResultSet
from ..queryspec import ParamSet, QueryInstance, QueryTemplate
from .store import StoreHandle

_SHAPES = ("count", "trip_count", "trip_set", "hour_counts", "mean_seconds", "nearest")


class CatalogError(GeoBenchError):
    """Unknown canonical query or malformed catalog file."""


@dataclass(frozen=True)
class ArgSpec:
    param: Optional[str] = None
    element: Optional[int] = None
    const: object = None

    @staticmethod
    def parse(raw: dict) -> "ArgSpec":
        if "param" in raw:
            return ArgSpec(param=raw["param"], element=raw.get("element"))
        if "const" in raw:
            return ArgSpec(const=raw["const"])
        raise CatalogError(f"arg spec needs 'param' or 'const': {raw!r}")


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    primitive: str
    args: tuple[tuple[str, ArgSpec], ...]
    columns: tuple[str, ...]
    shape: str


def default_catalog_path() -> str:
    return os.path.join(os.path.dirname(__file__), "..", "data", "catalog.yaml")


class Catalog:
    """Validated catalog entries, executable against a StoreHandle."""

    def __init__(self, entries: list[CatalogEntry]):
        self.entries = {e.name: e for e in entries}
        if len(self.entries) != len(entries):
            raise CatalogError("duplicate catalog entry names")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    @staticmethod
    def load(path: Optional[str] = None) -> "Catalog":
        path = path or default_catalog_path()
        with open(path) as fh:
            doc = yaml.safe_load(fh)
        if not isinstance(doc, list):
            raise CatalogError(f"{path}: expected a list of entries")
        entries = []
        for raw in doc:
            shape = raw.get("shape")
            if shape not in _SHAPES:
                raise CatalogError(f"{path}: entry {raw.get('name')!r} has bad shape {shape!r}")
            primitive = raw.get("primitive", "")
            if not callable(getattr(StoreHandle, primitive, None)):
                raise CatalogError(
                    f"{path}: entry {raw.get('name')!r} names unknown primitive {primitive!r}")
            args = tuple((k, ArgSpec.parse(v)) for k, v in (raw.get("args") or {}).items())
            entries.append(CatalogEntry(
                name=raw["name"], primitive=primitive, args=args,
                columns=tuple(raw.get("columns") or ()), shape=shape,
            ))
        return Catalog(entries)

    def entry(self, name: str) -> CatalogEntry:
        try:
            return self.entries[name]
        except KeyError:
            raise CatalogError(f"unknown canonical query: {name!r}")

    def _arg_value(self, spec: ArgSpec, template: QueryTemplate, ps: ParamSet):
        if spec.param is None:
            return spec.const
        if spec.param not in ps.values:
            raise CatalogError(f"parameter {spec.param!r} missing from parameter set")
        value = ps.values[spec.param]
        decl = template.param(spec.param)
        if decl.kind.base == "region_name":
            return (decl.kind.region_kind, value)
        if decl.kind.base == "harbor_pair":
            if spec.element is None:
                raise CatalogError("harbor_pair argument needs an element selector")
            return ("harbor", value[spec.element])
        if spec.element is not None:
            return value[spec.element]
        return value

    def execute(self, handle: StoreHandle, instance: QueryInstance) -> ResultSet:
        """Run one canonical query instance; deterministic result shaping."""
        entry = self.entry(instance.canonical_id)
        template = instance.template
        overrides = template.constants
        kwargs = {}
        for arg_name, spec in entry.args:
            if spec.param is None and arg_name in overrides:
                kwargs[arg_name] = overrides[arg_name]
            else:
                kwargs[arg_name] = self._arg_value(spec, template, instance.param_set)
        result = getattr(handle, entry.primitive)(**kwargs)
        return _shape_result(entry, result)


def _shape_result(entry: CatalogEntry, result) -> ResultSet:
    cols = entry.columns
    if entry.shape == "count":
        return ResultSet.make(cols, [(int(result),)])
    if entry.shape == "trip_count":
        return ResultSet.make(cols, [(len(result),)])
    if entry.shape == "trip_set":
        return ResultSet.make(cols, [(tid,) for tid in sorted(result)])
    if entry.shape == "hour_counts":
        return ResultSet.make(cols, [(h, int(c)) for h, c in result])
    if entry.shape == "mean_seconds":
        return ResultSet.make(cols, [] if result is None else [(float(result),)])
    if entry.shape == "nearest":
        return ResultSet.make(cols, [] if result is None else [(result[0], float(result[1]))])
    raise CatalogError(f"unhandled shape {entry.shape!r}")
