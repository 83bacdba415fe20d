"""HTTP service wrapping the benchmark pipeline.

Each endpoint takes an experiment configuration (the same schema as the YAML
config file) and executes one pipeline stage on the service host; file paths
in the config are interpreted on the service's filesystem. The CLI is a thin
client of this API."""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import ExperimentConfig
from .core import GeoBenchError
from .pipeline import run_bench, run_generate, run_pipeline, run_report, run_verify


class ConfigRequest(BaseModel):
    config: ExperimentConfig


class ReportRequest(BaseModel):
    results: list[str] = Field(min_length=1)
    output_dir: str = "out"


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateResponse(BaseModel):
    output_dir: str
    files: list[str]
    stats: dict


class RunResponse(BaseModel):
    run_id: str
    plan_size: int
    measurements: int
    failures: int
    aborted_repetitions: list[int]
    results_path: str
    resources_path: str
    summary_path: str
    summary: dict


class VerifyResponse(BaseModel):
    adapters: list[str]
    checked: int
    mismatch_count: int
    mismatches: list[dict]
    mismatches_path: str


class ReportResponse(BaseModel):
    summaries: list[str]
    comparison: Optional[str]
    comparisons: list[dict]
    bars: str
    ecdf: str


class BenchResponse(BaseModel):
    generate: Optional[GenerateResponse]
    run: RunResponse
    report: ReportResponse


def create_app() -> FastAPI:
    app = FastAPI(title="geobench", version=__version__)

    def guarded(fn, *args):
        try:
            return fn(*args)
        except GeoBenchError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: ConfigRequest):
        return guarded(run_generate, req.config)

    @app.post("/run", response_model=RunResponse)
    def run(req: ConfigRequest):
        return guarded(run_pipeline, req.config)

    @app.post("/verify", response_model=VerifyResponse)
    def verify(req: ConfigRequest):
        return guarded(run_verify, req.config)

    @app.post("/report", response_model=ReportResponse)
    def report(req: ReportRequest):
        return guarded(run_report, req.results, req.output_dir)

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: ConfigRequest):
        return guarded(run_bench, req.config)

    return app
