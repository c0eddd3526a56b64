"""Operator CLI: serve the API, run headless simulations, poke a live service."""

from __future__ import annotations

import json
import logging
import os
import sys

import click
import httpx

from .config import load_scenario_file, parse_duration, run_scenario
from .errors import PlaneError
from .events import read_log
from .metrics import export_samples, format_summary
from .plane import ControlPlane

DEFAULT_API = "http://127.0.0.1:8077"

logging.basicConfig(level=os.environ.get("WSPLANE_LOG_LEVEL", "WARNING"))


def _client(api: str | None) -> httpx.Client:
    base = api or os.environ.get("WSPLANE_API", DEFAULT_API)
    headers = {}
    token = os.environ.get("WSPLANE_TOKEN")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return httpx.Client(base_url=base, headers=headers, timeout=30.0)


def _call(client: httpx.Client, method: str, path: str, **kwargs) -> dict:
    response = client.request(method, path, **kwargs)
    if response.status_code >= 400:
        try:
            detail = response.json()
        except ValueError:
            detail = {"message": response.text}
        click.echo(f"error: {detail.get('code', response.status_code)}: {detail.get('message')}", err=True)
        sys.exit(1)
    return response.json()


@click.group()
def main():
    """Control plane for self-service GPU research workspaces."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--listen", default=None, help="host:port (env WSPLANE_LISTEN, default 127.0.0.1:8077)")
@click.option("--log", "log_path", default=None, type=click.Path(), help="event log file (env WSPLANE_LOG)")
@click.option("--token", default=None, help="require this bearer token (env WSPLANE_TOKEN)")
@click.option("--dashboard", default=None, type=click.Path(exists=True), help="serve this built dashboard dir at /ui")
def serve(config_path, listen, log_path, token, dashboard):
    """Start the HTTP API, replaying any existing event log first."""
    import uvicorn

    from .config import build_plane
    from .service import create_app

    listen = listen or os.environ.get("WSPLANE_LISTEN", "127.0.0.1:8077")
    log_path = log_path or os.environ.get("WSPLANE_LOG")
    host, _, port = listen.rpartition(":")

    try:
        if log_path and os.path.exists(log_path) and os.path.getsize(log_path) > 0:
            click.echo(f"replaying event log {log_path}")
            plane = ControlPlane.replay(read_log(log_path))
            plane.log.attach_sink(log_path)
            click.echo(f"restored {plane.sequence} events, digest {plane.state_digest()[:16]}")
        else:
            scenario = load_scenario_file(config_path)
            plane = build_plane(scenario, log_path=log_path)
            click.echo(f"loaded scenario {scenario.name!r}")
    except PlaneError as exc:
        click.echo(f"error: {exc.code}: {exc.message}", err=True)
        sys.exit(1)

    app = create_app(plane, token=token)
    if dashboard:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=dashboard, html=True), name="dashboard")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--until", default=None, help="simulated duration, e.g. 7d, 12h, 900s")
@click.option("--mode", default=None, type=click.Choice(["Shared", "DedicatedVM"]), help="override allocation mode")
@click.option("--log", "log_path", default=None, type=click.Path(), help="write the event log here")
@click.option("--export-trace", default=None, type=click.Path(), help="write utilisation samples as CSV")
def simulate(scenario_path, until, mode, log_path, export_trace):
    """Run a scenario headless against the virtual clock and print the summary."""
    try:
        scenario = load_scenario_file(scenario_path)
        if mode:
            from .scheduler import AllocationMode

            scenario.mode = AllocationMode(mode)
        horizon = parse_duration(until) if until else None
        plane = run_scenario(scenario, until=horizon, log_path=log_path)
    except PlaneError as exc:
        click.echo(f"error: {exc.code}: {exc.message}", err=True)
        sys.exit(1)
    click.echo(format_summary(plane.summary()))
    click.echo(f"events: {plane.sequence}")
    click.echo(f"digest: {plane.state_digest()}")
    if export_trace:
        count = export_samples(plane.store, export_trace, epoch=plane.config.epoch)
        click.echo(f"wrote {count} samples to {export_trace}")


@main.command()
@click.argument("log_path", type=click.Path(exists=True))
def replay(log_path):
    """Rebuild state from an event log and print its digest."""
    try:
        plane = ControlPlane.replay(read_log(log_path))
        plane.check_invariants()
    except (PlaneError, AssertionError) as exc:
        click.echo(f"error: replay failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"events: {plane.sequence}")
    click.echo(f"workspaces: {len(plane.workspaces)}, nodes: {len(plane.nodes)}")
    click.echo(f"digest: {plane.state_digest()}")


@main.group()
def workspace():
    """Workspace lifecycle against a running service."""


@workspace.command("create")
@click.option("--owner", required=True)
@click.option("--template", "template_name", required=True)
@click.option("--api", default=None)
def workspace_create(owner, template_name, api):
    with _client(api) as client:
        data = _call(client, "POST", "/workspaces", json={"owner": owner, "template_name": template_name})
    ws = data["workspace"]
    click.echo(f"{ws['workspace_id']} {ws['state']}")


@workspace.command("list")
@click.option("--api", default=None)
def workspace_list(api):
    with _client(api) as client:
        data = _call(client, "GET", "/workspaces")
    for ws in data["items"]:
        condition = ws["start_condition"] or "-"
        node = ws["node_id"] or "-"
        click.echo(f"{ws['workspace_id']}  {ws['owner']:<10} {ws['state']:<12} {node:<8} {condition}")


def _lifecycle_command(name: str, method: str, path_suffix: str):
    @workspace.command(name)
    @click.argument("workspace_id")
    @click.option("--as", "actor", default=None, help="acting researcher (authorization)")
    @click.option("--api", default=None)
    def command(workspace_id, actor, api):
        headers = {"X-Actor": actor} if actor else {}
        with _client(api) as client:
            data = _call(client, method, f"/workspaces/{workspace_id}{path_suffix}", headers=headers)
        ws = data["workspace"]
        click.echo(f"{ws['workspace_id']} {ws['state']}")

    return command


_lifecycle_command("start", "POST", "/start")
_lifecycle_command("stop", "POST", "/stop")
_lifecycle_command("rebuild", "POST", "/rebuild")
_lifecycle_command("delete", "DELETE", "")


@main.group()
def metrics():
    """Metric queries against a running service."""


@metrics.command("summary")
@click.option("--api", default=None)
def metrics_summary(api):
    with _client(api) as client:
        data = _call(client, "GET", "/metrics/summary")
    click.echo(data["text"])


@metrics.command("utilisation")
@click.option("--api", default=None)
def metrics_utilisation(api):
    with _client(api) as client:
        data = _call(client, "GET", "/metrics/utilisation")
    click.echo(f"{data['utilisation'] * 100.0:.2f}%")


@metrics.command("latency")
@click.option("--api", default=None)
def metrics_latency(api):
    with _client(api) as client:
        data = _call(client, "GET", "/metrics/latency")
    for record in data["items"]:
        click.echo(f"{record['workspace_id']}  {record['condition']:<9} {record['duration']:.1f}s")


@main.group()
def pipeline():
    """CI/CD pipeline runs against a running service."""


@pipeline.command("run")
@click.argument("project")
@click.option("--seed", default=None, type=int)
@click.option("--fail-at", default=None)
@click.option("--api", default=None)
def pipeline_run(project, seed, fail_at, api):
    with _client(api) as client:
        data = _call(
            client, "POST", "/pipeline/run", json={"project": project, "seed": seed, "fail_at": fail_at}
        )
    run = data["run"]
    for stage, duration in run["stage_durations"]:
        click.echo(f"{stage:<12} {duration:6.1f}s")
    minutes, seconds = divmod(run["total"], 60)
    click.echo(f"total        {run['total']:6.1f}s ({int(minutes)}m {seconds:04.1f}s)  {run['status']}")


if __name__ == "__main__":
    main()
