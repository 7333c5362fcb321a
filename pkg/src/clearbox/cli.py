"""Operator command line: run the service, mint keys and tokens, seed data,
run analyses, and audit the log.

Exit codes: 0 success, 1 domain error, 2 usage error. Every subcommand takes
``--json`` for machine-readable output (one JSON document, nothing else).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

from . import authkit
from .analyses import ANALYSES, load_corpus, run_instrumented, save_corpus, seed_corpus
from .config import load_serve_config
from .model import rfc3339_to_ms, verify_chain
from .monitor import FailMode, MonitorConfig, MonitorError
from .storage import JsonlBackend, MemoryBackend, StorageCorruption

_CONTEXT = {"auto_envvar_prefix": "CLEARBOX", "help_option_names": ["-h", "--help"]}


def _emit(as_json: bool, document: dict, human: str) -> None:
    click.echo(json.dumps(document, indent=2) if as_json else human)


def _fail(as_json: bool, document: dict, human: str) -> None:
    # Domain failures keep --json output parseable on stdout.
    if as_json:
        click.echo(json.dumps(document, indent=2))
    else:
        click.echo(human, err=True)
    sys.exit(1)


def _api_get(url: str, path: str, token: str, params: Optional[dict] = None) -> dict:
    response = httpx.get(
        url.rstrip("/") + path,
        params=params or {},
        headers={"Authorization": f"Bearer {token}"},
        timeout=10,
    )
    if response.status_code != 200:
        raise click.ClickException(f"safekeeper returned {response.status_code}: {response.text}")
    return response.json()


@click.group(context_settings=_CONTEXT)
def main() -> None:
    """Transparency toolchain operations."""


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--issuer", default="clearbox-dev-authority", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def keygen(out: Path, issuer: str, as_json: bool) -> None:
    """Generate an authority keypair into a directory."""
    keypair = authkit.keygen(issuer)
    private_path, public_path = authkit.save_keypair(out, keypair)
    _emit(
        as_json,
        {"private_key": str(private_path), "public_key": str(public_path), "issuer": issuer},
        f"wrote {private_path} and {public_path} (issuer {issuer})",
    )


@main.group()
def token() -> None:
    """Token operations."""


@token.command("issue")
@click.option("--subject", required=True)
@click.option("--role", required=True, type=click.Choice([r.value for r in authkit.Role]))
@click.option("--ttl", required=True, type=click.IntRange(min=1), help="lifetime in seconds")
@click.option(
    "--key", "key_path", required=True, type=click.Path(exists=True, dir_okay=False),
    help="authority signing key file",
)
@click.option("--json", "as_json", is_flag=True)
def token_issue(subject: str, role: str, ttl: int, key_path: str, as_json: bool) -> None:
    """Issue a signed identity token."""
    keypair = authkit.load_keypair(key_path)
    issued = authkit.issue_token(keypair, subject, authkit.Role(role), ttl)
    _emit(as_json, {"token": issued, "subject": subject, "role": role}, issued)


@main.command()
@click.option("--seed", required=True, type=int)
@click.option("--issues", "n_issues", required=True, type=click.IntRange(min=0))
@click.option("--persons", "n_persons", required=True, type=click.IntRange(min=1))
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--json", "as_json", is_flag=True)
def seed(seed: int, n_issues: int, n_persons: int, out: Path, as_json: bool) -> None:
    """Write a deterministic synthetic issue corpus."""
    corpus = seed_corpus(seed, n_issues, n_persons)
    save_corpus(corpus, out)
    _emit(
        as_json,
        {"path": str(out), "issues": n_issues, "persons": len(corpus.persons)},
        f"wrote {n_issues} issues ({len(corpus.persons)} persons) to {out}",
    )


@main.command("run-analysis")
@click.option("--analysis", required=True, type=click.Choice(sorted(ANALYSES)))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--token", "token_value", required=True)
@click.option("--url", required=True)
@click.option("--technologies", default=None, help="comma-separated list for expert-search")
@click.option(
    "--fail-mode", type=click.Choice([m.value for m in FailMode]),
    default=FailMode.CLOSED.value, show_default=True,
)
@click.option("--json", "as_json", is_flag=True)
def run_analysis(
    analysis: str,
    corpus_path: str,
    token_value: str,
    url: str,
    technologies: Optional[str],
    fail_mode: str,
    as_json: bool,
) -> None:
    """Run one analysis with its usage reported to the safekeeper."""
    if analysis == "expert-search" and not technologies:
        raise click.UsageError("expert-search requires --technologies")
    corpus = load_corpus(corpus_path)
    config = MonitorConfig(
        safekeeper_url=url,
        token_supplier=lambda: token_value,
        tool_id="clearbox-cli",
        fail_mode=FailMode(fail_mode),
    )
    query = [t.strip() for t in technologies.split(",")] if technologies else None
    try:
        result, emitted = run_instrumented(analysis, corpus, config, query_technologies=query)
    except MonitorError as exc:
        _fail(as_json, {"error": str(exc)}, f"analysis aborted: {exc}")
        return
    document = {
        "analysis": analysis,
        "entries": [[person, score] for person, score in result.entries],
        "emitted_events": emitted,
    }
    lines = [f"{person}\t{score:g}" for person, score in result.entries]
    _emit(as_json, document, "\n".join(lines) if lines else "(no results)")


@main.command("verify-log")
@click.option("--url", required=True)
@click.option("--token", "token_value", required=True)
@click.option("--json", "as_json", is_flag=True)
def verify_log(url: str, token_value: str, as_json: bool) -> None:
    """Ask the safekeeper to re-verify its full chain."""
    report = _api_get(url, "/v1/integrity", token_value)
    if report.get("valid"):
        _emit(as_json, report, f"valid, {report.get('checked_count', 0)} entries")
    else:
        _fail(
            as_json,
            report,
            f"INVALID at sequence {report.get('first_bad_sequence')} "
            f"({report.get('reason')}); {report.get('checked_count', 0)} entries verified",
        )


@main.command()
@click.option("--url", required=True)
@click.option("--token", "token_value", required=True)
@click.option("--from", "from_ts", default=None, help="RFC 3339 window start")
@click.option("--to", "to_ts", default=None, help="RFC 3339 window end (exclusive)")
@click.option("--json", "as_json", is_flag=True)
def summary(url: str, token_value: str, from_ts: Optional[str], to_ts: Optional[str], as_json: bool) -> None:
    """Fetch the owner-facing usage summary."""
    params = {}
    if from_ts:
        params["from"] = from_ts
    if to_ts:
        params["to"] = to_ts
    document = _api_get(url, "/v1/summary", token_value, params)
    lines = [
        f"owner {document['owner_id']}: {document['total_count']} usages",
        "per consumer: "
        + (
            ", ".join(f"{c}={n}" for c, n in document["per_consumer_counts"].items())
            or "(none)"
        ),
        "per source: "
        + (
            ", ".join(f"{s}={n}" for s, n in document["per_source_counts"].items())
            or "(none)"
        ),
        "weekly: "
        + (", ".join(f"{week}={n}" for week, n in document["weekly_buckets"]) or "(none)"),
    ]
    _emit(as_json, document, "\n".join(lines))


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--listen", default=None, help="host:port")
@click.option("--storage-backend", default=None, type=click.Choice(["memory", "jsonl"]))
@click.option("--storage-path", default=None)
@click.option("--authority-key", "authority_key_path", default=None, help="public key file")
@click.option("--clock-skew-seconds", default=None, type=int)
@click.option("--force", is_flag=True, help="start even if the stored log fails verification")
def serve(
    config_path: Optional[str],
    listen: Optional[str],
    storage_backend: Optional[str],
    storage_path: Optional[str],
    authority_key_path: Optional[str],
    clock_skew_seconds: Optional[int],
    force: bool,
) -> None:
    """Run the safekeeper HTTP service."""
    import uvicorn

    from .service import Safekeeper
    from .webapi import create_app

    try:
        config = load_serve_config(
            config_path,
            overrides={
                "listen": listen,
                "storage_backend": storage_backend,
                "storage_path": storage_path,
                "authority_key_path": authority_key_path,
                "clock_skew_seconds": clock_skew_seconds,
            },
        )
    except (ValueError, OSError) as exc:
        raise click.UsageError(str(exc)) from exc

    verifying_key = authkit.load_verifying_key(config.authority_key_path)
    try:
        storage = (
            JsonlBackend(config.storage_path)
            if config.storage_backend == "jsonl"
            else MemoryBackend()
        )
    except StorageCorruption as exc:
        click.echo(f"stored log is unreadable: {exc}", err=True)
        sys.exit(1)

    # A safekeeper that silently serves a tampered log is worse than none.
    report = verify_chain(storage.scan())
    if not report.valid:
        message = (
            f"stored log fails verification at sequence {report.first_bad_sequence} "
            f"({report.reason.value if report.reason else 'unknown'})"
        )
        if not force:
            click.echo(f"refusing to start: {message}; pass --force to serve anyway", err=True)
            sys.exit(1)
        click.echo(f"WARNING: {message}; serving due to --force", err=True)

    safekeeper = Safekeeper(storage, verifying_key, clock_skew_seconds=config.clock_skew_seconds)
    app = create_app(safekeeper)
    click.echo(f"safekeeper listening on {config.listen} ({report.checked_count} entries verified)")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


if __name__ == "__main__":
    main()
