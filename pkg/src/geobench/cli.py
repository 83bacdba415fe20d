"""Thin-client CLI: parses config files, posts them to the service, and maps
responses to exit codes (0 success, 1 verification mismatch, 2 usage error).

Without --server the service app is mounted in-process, so every subcommand
works standalone; with --server the same requests go to a remote service and
config paths are interpreted on that host.
"""

from __future__ import annotations

import os
import sys

import click
import httpx
import yaml

from .config import apply_overrides

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2


def _make_client(server):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # some starlette/httpx version pairings warn on this import
        warnings.filterwarnings("ignore", message="Using `httpx` with `starlette.testclient`")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _fail(message: str, code: int = EXIT_USAGE):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _post(ctx, path: str, payload: dict) -> dict:
    client = _make_client(ctx.obj["server"])
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        _fail(f"cannot reach service: {exc}")
    if resp.status_code in (400, 422):
        detail = resp.json().get("detail", resp.text)
        _fail(f"{detail}")
    if resp.status_code >= 500:
        _fail(f"service error {resp.status_code}: {resp.text[:400]}")
    return resp.json()


def _load_config_doc(config_path: str, out, seed) -> dict:
    try:
        with open(config_path) as fh:
            doc = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        _fail(f"config file not found: {config_path}")
    except yaml.YAMLError as exc:
        _fail(f"{config_path}: invalid YAML: {exc}")
    env_out = os.environ.get("GEOBENCH_OUT")
    output_dir = out or env_out
    return apply_overrides(doc, {"output_dir": output_dir, "seed": seed})


def _say(ctx, message: str):
    if not ctx.obj["quiet"]:
        click.echo(message)


_config_opt = click.option("--config", "-c", "config_path", required=True,
                           type=click.Path(), help="Experiment config file (YAML).")
_out_opt = click.option("--out", default=None,
                        help="Output directory (overrides config and GEOBENCH_OUT).")
_seed_opt = click.option("--seed", default=None, type=int,
                         help="Override both dataset and workload seeds.")


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL; default runs the service in-process.")
@click.option("--quiet", is_flag=True, help="Suppress non-error output.")
@click.pass_context
def main(ctx, server, quiet):
    """Benchmark suite for spatiotemporal data stores."""
    ctx.obj = {"server": server, "quiet": quiet}


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@click.pass_context
def generate(ctx, config_path, out, seed):
    """Generate the dataset files for an experiment."""
    doc = _load_config_doc(config_path, out, seed)
    body = _post(ctx, "/generate", {"config": doc})
    stats = body["stats"]
    _say(ctx, f"wrote {', '.join(body['files'])} to {body['output_dir']}")
    _say(ctx, f"{stats['total_points']} points in {stats['total_trips']} trips "
              f"(avg {stats['avg_points_per_trip']:.1f} points/trip)")


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@click.pass_context
def run(ctx, config_path, out, seed):
    """Run the configured benchmark experiment."""
    doc = _load_config_doc(config_path, out, seed)
    body = _post(ctx, "/run", {"config": doc})
    _say(ctx, f"run {body['run_id']}: {body['measurements']} measurements, "
              f"{body['failures']} failures")
    _say(ctx, f"results: {body['results_path']}")
    if body["aborted_repetitions"]:
        click.echo(f"warning: repetitions aborted mid-run: "
                   f"{body['aborted_repetitions']}", err=True)


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@click.pass_context
def verify(ctx, config_path, out, seed):
    """Run the identical plan on sut and verify_sut and compare results."""
    doc = _load_config_doc(config_path, out, seed)
    body = _post(ctx, "/verify", {"config": doc})
    n = body["mismatch_count"]
    _say(ctx, f"checked {body['checked']} instances across "
              f"{' vs '.join(body['adapters'])}: {n} mismatches")
    _say(ctx, f"mismatches: {body['mismatches_path']}")
    if n > 0:
        sys.exit(EXIT_MISMATCH)


@main.command()
@click.argument("results", nargs=-1, required=True, type=click.Path())
@_out_opt
@click.pass_context
def report(ctx, results, out):
    """Summarize one or more results.csv files; first input is the baseline."""
    output_dir = out or os.environ.get("GEOBENCH_OUT") or "out"
    body = _post(ctx, "/report", {"results": list(results), "output_dir": output_dir})
    _say(ctx, f"summaries: {', '.join(body['summaries'])}")
    if body["comparison"]:
        _say(ctx, f"comparison: {body['comparison']}")
        for cmp in body["comparisons"]:
            _say(ctx, f"  {cmp['candidate_run']} vs {cmp['baseline_run']}: "
                      f"median {cmp['aggregate_pct']:+.2f}% across queries")


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@click.pass_context
def bench(ctx, config_path, out, seed):
    """All-in-one: generate (if needed), run, and report."""
    doc = _load_config_doc(config_path, out, seed)
    body = _post(ctx, "/bench", {"config": doc})
    run_body = body["run"]
    _say(ctx, f"run {run_body['run_id']}: {run_body['measurements']} measurements, "
              f"{run_body['failures']} failures")
    _say(ctx, f"report: {', '.join(body['report']['summaries'])}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Launch the benchmark service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
