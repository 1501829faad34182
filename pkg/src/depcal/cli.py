"""Command line front door.

Every command can talk to a running gateway (--url or DEPCAL_URL) or fall
back to a local engine persisted under DEPCAL_DATA. Remote mode is a thin
HTTP client; local mode loads the data directory, applies the command, and
saves it back.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

from .engine import Engine
from .events import IngestError
from .scenarios import (
    FixtureAssertionFailed,
    MalformedFixture,
    builtin_fixture_names,
    run_scenario,
)
from .service.app import load_or_create_engine

URL_ENV = "DEPCAL_URL"


class Client:
    """Dispatches to HTTP when a URL is configured, else to a local engine."""

    def __init__(self, url: Optional[str], data_dir: Optional[str] = None):
        self.url = url or os.environ.get(URL_ENV) or None
        self.data_dir = data_dir
        self._engine: Optional[Engine] = None

    @property
    def remote(self) -> bool:
        return self.url is not None

    @property
    def engine(self) -> Engine:
        if self._engine is None:
            self._engine = load_or_create_engine(self.data_dir)
        return self._engine

    def save(self) -> None:
        if self._engine is not None:
            self._engine.save(self.data_dir)

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        with httpx.Client(base_url=self.url, timeout=30.0) as http:
            return http.request(method, path, **kwargs)

    def submit_event(self, record: dict) -> dict:
        if self.remote:
            resp = self._request("POST", "/events", json=record)
            if resp.status_code >= 400:
                raise click.ClickException(f"{resp.status_code}: {resp.text}")
            return resp.json()
        result = self.engine.submit_event(record, observed_at=record.get("observed_at"))
        if result["archived_advisory"]:
            raise click.ClickException(
                f"event {result['event_id']} has no root in the graph; archived as advisory"
            )
        return result

    def get(self, path: str) -> dict:
        if self.remote:
            resp = self._request("GET", path)
            if resp.status_code >= 400:
                raise click.ClickException(f"{resp.status_code}: {resp.text}")
            return resp.json()
        if path.startswith("/reports/"):
            event_id = path.split("/reports/", 1)[1]
            report = self.engine.reports.get(event_id)
            if report is None:
                raise click.ClickException(f"no report for event {event_id!r}")
            return report.to_dict()
        if path == "/metrics":
            return self.engine.metrics()
        if path == "/policy":
            return {
                "policy": self.engine.policy.to_dict(),
                "versions": self.engine.policy_versions,
            }
        raise click.ClickException(f"unsupported local path {path!r}")


pass_client = click.make_pass_decorator(Client)


@click.group()
@click.option("--url", default=None, help="Gateway base URL; omit to run against local data.")
@click.option("--data-dir", default=None, help="Local state directory (default $DEPCAL_DATA or .depcal).")
@click.pass_context
def main(ctx: click.Context, url: Optional[str], data_dir: Optional[str]) -> None:
    """Dependency maintenance engine."""
    ctx.obj = Client(url, data_dir)


@main.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@pass_client
def ingest(client: Client, source: Path) -> None:
    """Submit newline-delimited JSON records from SOURCE."""
    ok = advisories = bad = 0
    for line_no, line in enumerate(source.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            click.echo(f"line {line_no}: not JSON ({exc})", err=True)
            bad += 1
            continue
        try:
            result = client.submit_event(record)
        except click.ClickException as exc:
            click.echo(f"line {line_no}: {exc.message}", err=True)
            if "advisory" in exc.message:
                advisories += 1
            else:
                bad += 1
            continue
        except IngestError as exc:
            click.echo(f"line {line_no}: {exc}", err=True)
            bad += 1
            continue
        status = "new" if result["created"] else "duplicate"
        click.echo(f"line {line_no}: {result['event_id']} ({status})")
        ok += 1
    if not client.remote:
        client.save()
    click.echo(f"ingested {ok}, advisories {advisories}, rejected {bad}")
    if bad:
        sys.exit(1)


@main.command()
@click.argument("event_id")
@pass_client
def impact(client: Client, event_id: str) -> None:
    """Show the ranked impact report for EVENT_ID."""
    report = client.get(f"/reports/{event_id}")
    click.echo(f"event {report['event_id']}  roots {', '.join(report['root_nodes'])}")
    if report.get("truncated"):
        click.echo("(path enumeration truncated)")
    header = f"{'project':<28} {'score':>8} {'depth':>5} {'tau':>6} {'priority':>9}"
    click.echo(header)
    for item in report["items"]:
        click.echo(
            f"{item['project']:<28} {item['impact_score']:>8.4f} {item['depth']:>5} "
            f"{item['test_adequacy']:>6.3f} {item['priority']:>9.4f}"
        )


@main.command()
@click.argument("fixture")
@click.option("--golden", type=click.Path(path_type=Path), default=None,
              help="Compare the canonical report against this file.")
@click.option("--write-golden", is_flag=True, help="Write the canonical report to --golden.")
def simulate(fixture: str, golden: Optional[Path], write_golden: bool) -> None:
    """Replay FIXTURE (path or builtin name) and print its report."""
    try:
        engine, report = run_scenario(fixture)
    except MalformedFixture as exc:
        known = ", ".join(builtin_fixture_names())
        raise click.ClickException(f"{exc}\nbuiltin fixtures: {known}")
    except FixtureAssertionFailed as exc:
        raise click.ClickException(f"fixture assertion failed: {exc}")
    click.echo(report.to_table())
    if golden is not None:
        payload = report.to_canonical_bytes()
        if write_golden:
            golden.write_bytes(payload)
            click.echo(f"wrote golden report to {golden}")
        elif not golden.exists():
            raise click.ClickException(f"golden file {golden} missing (use --write-golden)")
        elif golden.read_bytes() != payload:
            raise click.ClickException("report diverges from golden file")
        else:
            click.echo("golden report matches")


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@pass_client
def serve(client: Client, port: int, host: str) -> None:
    """Run the HTTP gateway over the local data directory."""
    import uvicorn

    from .service.app import create_app

    app = create_app(data_dir=client.data_dir)
    uvicorn.run(app, host=host, port=port)


@main.command()
@pass_client
def metrics(client: Client) -> None:
    """Aggregate pipeline metrics."""
    click.echo(json.dumps(client.get("/metrics"), indent=2, sort_keys=True))


@main.group()
def policy() -> None:
    """Policy configuration commands."""


@policy.command("show")
@pass_client
def policy_show(client: Client) -> None:
    """Current thresholds, weights, and version history."""
    click.echo(json.dumps(client.get("/policy"), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
