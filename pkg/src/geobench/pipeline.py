"""End-to-end pipeline stages behind the service endpoints: generate/load
data, build plans, run experiments, verify equivalence, emit reports."""

from __future__ import annotations

import json
import os
from typing import Optional

from .config import ConfigError, ExperimentConfig, SutSection
from .datagen import (
    Dataset,
    generate_dataset,
    load_features,
    read_dataset,
    stats_to_dict,
    write_dataset,
    compute_stats,
)
from .harness import (
    RunConfig,
    build_plan,
    collect_results,
    create_adapter,
    read_measurements,
    run_experiment,
    verify_equivalence,
    write_measurements,
    write_resources,
)
from .queryspec import TemplateRegistry, default_templates_path, generate_param_sets, load_templates
from .report import (
    compare_runs,
    comparison_to_dict,
    export_bars_csv,
    export_ecdf_csv,
    summarize,
    summary_to_dict,
)

RESULTS_FILE = "results.csv"
RESOURCES_FILE = "resources.csv"
SUMMARY_FILE = "summary.json"
MISMATCHES_FILE = "mismatches.json"
COMPARISON_FILE = "comparison.json"
BARS_FILE = "bars.csv"
ECDF_FILE = "ecdf.csv"


def resolve_dataset(cfg: ExperimentConfig) -> Dataset:
    """Read the dataset from disk when a path is configured, else generate it
    in memory from the spec; an explicit features file replaces the generated
    supporting features."""
    if cfg.dataset.path:
        ds = read_dataset(cfg.dataset.path)
    else:
        ds = generate_dataset(cfg.dataset.to_spec())
    if cfg.features:
        feats = load_features(cfg.features)
        ds = Dataset(ds.scenario, ds.instants, ds.trips, feats,
                     compute_stats(ds.scenario, ds.instants, ds.trips, feats))
    return ds


def resolve_templates(cfg: ExperimentConfig, scenario: str) -> TemplateRegistry:
    path = cfg.templates or default_templates_path(scenario)
    return load_templates(path)


def make_run_id(cfg: ExperimentConfig, scenario: str, sut: SutSection) -> str:
    if cfg.run_id:
        return cfg.run_id
    profile = sut.profile.to_profile()
    return (f"{scenario}-{sut.adapter}-{profile.index}-{profile.partitioning}"
            f"-{cfg.workload.mode}{cfg.workload.clients}-s{cfg.workload.seed}")


def _build_plan_for(cfg: ExperimentConfig, ds: Dataset, registry: TemplateRegistry):
    n_default = cfg.workload.param_sets_per_query
    sets = {}
    for template in registry.enabled():
        n = n_default if n_default is not None else template.repetition
        sets[template.name] = generate_param_sets(template, ds.stats, n, cfg.workload.seed)
    clients = cfg.workload.clients if cfg.workload.mode == "parallel" else 1
    return build_plan(registry, sets, clients=clients, seed=cfg.workload.seed)


def _make_loaded_adapter(sut: SutSection, registry: TemplateRegistry, ds: Dataset):
    adapter = create_adapter(sut.adapter, connection=sut.connection,
                             dialect=sut.dialect, registry=registry,
                             options=sut.options)
    adapter.load(ds, sut.profile.to_profile())
    return adapter


def run_generate(cfg: ExperimentConfig) -> dict:
    """cmd_generate: write instants.csv / trips.csv / features.geojson /
    stats.json into the output directory."""
    if cfg.dataset.path:
        raise ConfigError("generate needs a dataset spec, not a pre-generated path")
    ds = generate_dataset(cfg.dataset.to_spec())
    out = cfg.output_dir
    write_dataset(ds, out)
    return {
        "output_dir": out,
        "files": ["instants.csv", "trips.csv", "features.geojson", "stats.json"],
        "stats": stats_to_dict(ds.stats),
    }


def run_pipeline(cfg: ExperimentConfig) -> dict:
    """cmd_run: load adapter, generate parameters, plan, warm up, run all
    repetitions, write results.csv / resources.csv / summary.json."""
    ds = resolve_dataset(cfg)
    registry = resolve_templates(cfg, ds.scenario)
    plan = _build_plan_for(cfg, ds, registry)
    run_id = make_run_id(cfg, ds.scenario, cfg.sut)
    adapter = _make_loaded_adapter(cfg.sut, registry, ds)
    run_cfg = RunConfig(
        run_id=run_id, mode=cfg.workload.mode, clients=plan.clients,
        warmup=cfg.workload.warmup, run_repetitions=cfg.workload.run_repetitions)
    try:
        result = run_experiment(run_cfg, plan, adapter)
    finally:
        adapter.close()

    os.makedirs(cfg.output_dir, exist_ok=True)
    results_path = os.path.join(cfg.output_dir, RESULTS_FILE)
    resources_path = os.path.join(cfg.output_dir, RESOURCES_FILE)
    summary_path = os.path.join(cfg.output_dir, SUMMARY_FILE)
    write_measurements(results_path, result.measurements)
    write_resources(resources_path, result.resources)
    summary = summarize(result.measurements, result.resources)
    with open(summary_path, "w") as fh:
        json.dump(summary_to_dict(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    failures = sum(1 for m in result.measurements if not m.success)
    return {
        "run_id": run_id,
        "plan_size": len(plan),
        "measurements": len(result.measurements),
        "failures": failures,
        "aborted_repetitions": result.aborted_repetitions,
        "results_path": results_path,
        "resources_path": resources_path,
        "summary_path": summary_path,
        "summary": summary_to_dict(summary),
    }


def run_verify(cfg: ExperimentConfig) -> dict:
    """cmd_verify: run the identical plan on both SUT sections, compare
    normalized results, write mismatches.json."""
    if cfg.verify_sut is None:
        raise ConfigError("verify needs a verify_sut section in the config")
    ds = resolve_dataset(cfg)
    registry = resolve_templates(cfg, ds.scenario)
    plan = _build_plan_for(cfg, ds, registry)
    name_a = f"{cfg.sut.adapter}[{cfg.sut.profile.to_profile().label}]"
    name_b = f"{cfg.verify_sut.adapter}[{cfg.verify_sut.profile.to_profile().label}]"
    if name_a == name_b:
        name_b += "#2"
    adapter_a = _make_loaded_adapter(cfg.sut, registry, ds)
    try:
        results_a = collect_results(plan, adapter_a)
    finally:
        adapter_a.close()
    adapter_b = _make_loaded_adapter(cfg.verify_sut, registry, ds)
    try:
        results_b = collect_results(plan, adapter_b)
    finally:
        adapter_b.close()
    mismatches = verify_equivalence({name_a: results_a, name_b: results_b})
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, MISMATCHES_FILE)
    with open(path, "w") as fh:
        json.dump([m.to_dict() for m in mismatches], fh, indent=2)
        fh.write("\n")
    return {
        "adapters": [name_a, name_b],
        "checked": len(plan),
        "mismatch_count": len(mismatches),
        "mismatches": [m.to_dict() for m in mismatches],
        "mismatches_path": path,
    }


def run_report(results_paths: list[str], output_dir: str) -> dict:
    """cmd_report: summary.json per input; comparison.json, bars.csv, and
    ecdf.csv when there are at least two inputs (first input is baseline)."""
    if not results_paths:
        raise ConfigError("report needs at least one results.csv path")
    os.makedirs(output_dir, exist_ok=True)
    summaries = []
    by_run = {}
    for path in results_paths:
        try:
            measurements = read_measurements(path)
        except OSError as exc:
            raise ConfigError(f"cannot read results file {path}: {exc}") from exc
        summary = summarize(measurements)
        summaries.append(summary)
        by_run[summary.run_id] = measurements
    summary_paths = []
    for i, summary in enumerate(summaries):
        p = os.path.join(output_dir, f"summary-{i}-{summary.run_id}.json")
        with open(p, "w") as fh:
            json.dump(summary_to_dict(summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
        summary_paths.append(p)
    bars_path = os.path.join(output_dir, BARS_FILE)
    export_bars_csv(summaries, bars_path)
    ecdf_path = os.path.join(output_dir, ECDF_FILE)
    export_ecdf_csv(by_run, ecdf_path)
    comparison_path = None
    comparisons = []
    if len(summaries) >= 2:
        comparisons = [comparison_to_dict(compare_runs(summaries[0], other))
                       for other in summaries[1:]]
        comparison_path = os.path.join(output_dir, COMPARISON_FILE)
        with open(comparison_path, "w") as fh:
            json.dump(comparisons, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return {
        "summaries": summary_paths,
        "comparison": comparison_path,
        "comparisons": comparisons,
        "bars": bars_path,
        "ecdf": ecdf_path,
    }


def run_bench(cfg: ExperimentConfig) -> dict:
    """All-in-one: generate (when spec-based) into the output dir, run, report."""
    generated: Optional[dict] = None
    if not cfg.dataset.path:
        data_dir = os.path.join(cfg.output_dir, "dataset")
        gen_cfg = cfg.model_copy(update={"output_dir": data_dir})
        generated = run_generate(gen_cfg)
        cfg = cfg.model_copy(update={
            "dataset": cfg.dataset.model_copy(update={"path": data_dir})})
    run_out = run_pipeline(cfg)
    report_out = run_report([run_out["results_path"]], cfg.output_dir)
    return {"generate": generated, "run": run_out, "report": report_out}
