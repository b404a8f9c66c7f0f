"""Command-line client for the simulation service.

By default commands talk to an in-process instance of the HTTP app, so
no server needs to be running; pass --server to target a live one. Exit
codes: 0 ok, 2 scenario validation failure, 3 runtime failure.
"""

import os
import sys
from typing import Optional

import click
import httpx

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=300.0)
    # in-process: drive the ASGI app directly, no server required
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient
    from .service import create_app
    return TestClient(create_app())


def _read_scenario(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)


def _post(client: httpx.Client, url: str, payload: dict) -> dict:
    try:
        resp = client.post(url, json=payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: request failed: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    if resp.status_code == 400:
        for problem in resp.json().get("detail", []):
            click.echo(f"invalid scenario: {problem}", err=True)
        sys.exit(EXIT_VALIDATION)
    if resp.status_code != 200:
        click.echo(f"error: server returned {resp.status_code}: {resp.text}",
                   err=True)
        sys.exit(EXIT_RUNTIME)
    return resp.json()


def _write(out_dir: str, filename: str, content: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    with open(path, "w") as fh:
        fh.write(content)
    return path


@click.group()
def main():
    """Dual-channel trust-aware SDN network simulator."""


@main.command()
@click.argument("scenario_file", type=click.Path())
@click.option("--server", default=None, help="Base URL of a running service.")
def validate(scenario_file, server):
    """Check a scenario file; exit 0 if valid, 2 otherwise."""
    text = _read_scenario(scenario_file)
    with _client(server) as client:
        result = _post(client, "/scenario/validate", {"text": text})
    if result["valid"]:
        click.echo(f"ok: {result['name']} ({result['n_hosts']} hosts)")
        sys.exit(EXIT_OK)
    for problem in result["problems"]:
        click.echo(f"invalid scenario: {problem}", err=True)
    sys.exit(EXIT_VALIDATION)


@main.command()
@click.argument("scenario_file", type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--out", "out_dir", default="out", show_default=True,
              help="Directory for kpis.csv / decisions.csv / trace.txt.")
@click.option("--trace", "with_trace", is_flag=True, help="Also dump the full event trace.")
@click.option("--server", default=None, help="Base URL of a running service.")
def run(scenario_file, seed, out_dir, with_trace, server):
    """Run one scenario and write its KPI and decision-log files."""
    text = _read_scenario(scenario_file)
    payload = {"text": text, "include_trace": with_trace}
    if seed is not None:
        payload["seed"] = seed
    with _client(server) as client:
        result = _post(client, "/scenario/run", payload)
    kpi_path = _write(out_dir, "kpis.csv", result["kpi_csv"])
    _write(out_dir, "decisions.csv", result["decision_log_csv"])
    if with_trace and result.get("trace") is not None:
        _write(out_dir, "trace.txt", "\n".join(result["trace"]) + "\n")
    click.echo(f"{result['name']} seed={result['seed']} "
               f"trace_sha256={result['trace_sha256']}")
    click.echo(result["kpi_csv"], nl=False)
    click.echo(f"wrote {kpi_path}")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("scenario_file", type=click.Path())
@click.option("--sizes", required=True, help="Comma-separated host counts, e.g. 15,30,50.")
@click.option("--out", "out_dir", default="out", show_default=True,
              help="Directory for kpis.csv.")
@click.option("--server", default=None, help="Base URL of a running service.")
def sweep(scenario_file, sizes, out_dir, server):
    """Run the scenario once per network size and emit a combined CSV."""
    try:
        size_list = [int(s) for s in sizes.split(",") if s.strip()]
    except ValueError:
        click.echo(f"invalid --sizes value: {sizes}", err=True)
        sys.exit(EXIT_VALIDATION)
    if not size_list:
        click.echo("--sizes must name at least one size", err=True)
        sys.exit(EXIT_VALIDATION)
    text = _read_scenario(scenario_file)
    with _client(server) as client:
        result = _post(client, "/scenario/sweep",
                       {"text": text, "sizes": size_list})
    kpi_path = _write(out_dir, "kpis.csv", result["kpi_csv"])
    click.echo(result["kpi_csv"], nl=False)
    click.echo(f"wrote {kpi_path}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn
    uvicorn.run("trustsdn.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
