"""Experiment configuration: every knob of a benchmark run (dataset, scale,
SUT, configuration profile, workload parameters) is settable from one YAML
file. The same pydantic models are the service's request schema."""

from __future__ import annotations

from typing import Literal, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from .core import GeoBenchError, Period, parse_iso
from .datagen import DatasetSpec, default_spec
from .refstore import ConfigProfile


class ConfigError(GeoBenchError):
    pass


class ProfileSection(BaseModel):
    index: Literal["none", "grid", "rtree"] = "none"
    partitioning: Literal["none", "time", "space"] = "none"
    k: int = Field(4, ge=1)

    def to_profile(self) -> ConfigProfile:
        return ConfigProfile(index=self.index, partitioning=self.partitioning, k=self.k)


class DatasetSection(BaseModel):
    scenario: Optional[Literal["cycling", "aviation", "ais"]] = None
    scale_factor: Optional[int] = Field(None, ge=2)
    seed: int = 42
    path: Optional[str] = None
    bbox: Optional[tuple[float, float, float, float]] = None
    time_extent: Optional[tuple[str, str]] = None
    trip_points_mean: Optional[float] = Field(None, gt=0)
    trip_points_dispersion: Optional[float] = Field(None, gt=0)
    sampling_interval_mean: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _path_or_spec(self):
        if self.path is None and (self.scenario is None or self.scale_factor is None):
            raise ValueError("dataset needs either a path or scenario + scale_factor")
        return self

    def to_spec(self) -> DatasetSpec:
        if self.scenario is None or self.scale_factor is None:
            raise ConfigError("dataset section is path-based; no spec to build")
        overrides = {}
        if self.bbox is not None:
            overrides["bbox"] = tuple(self.bbox)
        if self.time_extent is not None:
            overrides["time_extent"] = Period(parse_iso(self.time_extent[0]),
                                              parse_iso(self.time_extent[1]))
        for name in ("trip_points_mean", "trip_points_dispersion", "sampling_interval_mean"):
            v = getattr(self, name)
            if v is not None:
                overrides[name] = v
        return default_spec(self.scenario, self.scale_factor, self.seed, **overrides)


class SutSection(BaseModel):
    adapter: str = "refstore"
    connection: Optional[str] = None
    dialect: str = "canonical"
    profile: ProfileSection = ProfileSection()
    options: dict = Field(default_factory=dict)


class WorkloadSection(BaseModel):
    mode: Literal["sequential", "parallel"] = "sequential"
    clients: int = Field(1, ge=1, le=1024)
    param_sets_per_query: Optional[int] = Field(50, ge=1)
    run_repetitions: int = Field(3, ge=1)
    warmup: bool = True
    seed: int = 7


class ExperimentConfig(BaseModel):
    dataset: DatasetSection
    features: Optional[str] = None
    templates: Optional[str] = None
    sut: SutSection = SutSection()
    verify_sut: Optional[SutSection] = None
    workload: WorkloadSection = WorkloadSection()
    output_dir: str = "out"
    run_id: Optional[str] = None


def load_config(path: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse a YAML config file; CLI-level overrides are applied on top."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if overrides:
        doc = apply_overrides(doc, overrides)
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def apply_overrides(doc: dict, overrides: dict) -> dict:
    """Apply --out / --seed style overrides to a raw config mapping.

    The seed override is the whole-run override: it sets both the dataset
    seed and the workload seed."""
    doc = dict(doc)
    if overrides.get("output_dir"):
        doc["output_dir"] = overrides["output_dir"]
    if overrides.get("seed") is not None:
        dataset = dict(doc.get("dataset") or {})
        dataset["seed"] = overrides["seed"]
        doc["dataset"] = dataset
        workload = dict(doc.get("workload") or {})
        workload["seed"] = overrides["seed"]
        doc["workload"] = workload
    return doc
