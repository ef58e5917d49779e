"""Command-line entry points: service host and batch operations."""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import click

from .grammar import default_grammar, grammar_to_dict, load_grammar, save_grammar
from .llm import provider_from_config
from .pipeline import AutoAnnotateJob, Session, analyze_store, auto_annotate
from .population import PopulationConfig, populate, save_records, load_records
from .sampler import SamplerConfig, learn_probabilities, sample_query
from .schema import load_schema
from .service import ServiceState, create_app
from .store import Store


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(_read(path))


def _provider(config: dict):
    script = None
    script_path = config.get("provider", {}).get("script")
    if script_path:
        script = _read(script_path)
    return provider_from_config(config.get("provider", {}), script)


@click.group()
def main():
    """Text-to-SQL annotation workbench."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(config_path, host, port):
    """Host the HTTP API."""
    import uvicorn

    config = _load_config(config_path)
    schema = None
    if config.get("schema_path"):
        schema = load_schema(_read(config["schema_path"]))
    store = Store(journal_path=config.get("journal_path"))
    state = ServiceState(store=store, provider=_provider(config), schema=schema)
    if schema is not None and config.get("populate_on_start", True):
        state.db = populate(schema, PopulationConfig(rng_seed=int(config.get("seed", 0))))
    uvicorn.run(
        create_app(state),
        host=config.get("host", host),
        port=int(config.get("port", port)),
        log_level="warning",
    )


@main.command("populate")
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--count", default=100, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", default="-")
def populate_cmd(schema_path, count, seed, out_path):
    """Generate synthetic records for a schema."""
    schema = load_schema(_read(schema_path))
    db = populate(schema, PopulationConfig(record_counts={"*": count}, rng_seed=seed))
    _write(out_path, save_records(db))


@main.command("sample")
@click.option("--grammar", "grammar_path", type=click.Path(exists=True), default=None)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--records", "records_path", type=click.Path(exists=True), default=None)
@click.option("--n", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", default="-")
def sample_cmd(grammar_path, schema_path, records_path, n, seed, out_path):
    """Sample executable SQL queries."""
    schema = load_schema(_read(schema_path))
    grammar = load_grammar(_read(grammar_path)) if grammar_path else default_grammar()
    if records_path:
        db = load_records(schema, _read(records_path))
    else:
        db = populate(schema, PopulationConfig(rng_seed=seed))
    rng = random.Random(seed)
    config = SamplerConfig(rng_seed=seed)
    lines = [sample_query(grammar, schema, db, config, rng).text for _ in range(n)]
    _write(out_path, "\n".join(lines) + "\n")


@main.command("learn-grammar")
@click.option("--grammar", "grammar_path", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", default="-")
def learn_grammar_cmd(grammar_path, corpus_path, out_path):
    """Re-estimate grammar probabilities from a corpus of queries (one per line)."""
    grammar = load_grammar(_read(grammar_path)) if grammar_path else default_grammar()
    corpus = [line for line in _read(corpus_path).splitlines() if line.strip()]
    report = learn_probabilities(grammar, corpus)
    for index, reason in report.skipped:
        click.echo(f"skipped line {index}: {reason}", err=True)
    _write(out_path, save_grammar(report.grammar))


@main.command("annotate")
@click.option("--auto", is_flag=True, required=True)
@click.option("--n", default=10, show_default=True, type=int)
@click.option("--threshold", default=80, show_default=True, type=int)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--seed", default=0, show_default=True, type=int)
def annotate_cmd(auto, n, threshold, config_path, schema_path, seed):
    """Run the unattended annotation loop."""
    config = _load_config(config_path)
    path = schema_path or config.get("schema_path")
    if not path:
        raise click.UsageError("a schema is required (--schema or config schema_path)")
    schema = load_schema(_read(path))
    store = Store(journal_path=config.get("journal_path"))
    session = Session.create(schema, store, _provider(config))
    job = AutoAnnotateJob(requested=n, accept_threshold=threshold)
    auto_annotate(job, session, random.Random(seed))
    result = job.snapshot()
    click.echo(json.dumps(result, indent=2))
    if result["state"] != "done":
        sys.exit(1)


@main.command("analyze")
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", default="-")
def analyze_cmd(dataset_path, out_path):
    """Composition and readability report over a dataset document."""
    store = Store(bundled=[])
    loaded, errors = store.import_dataset(_read(dataset_path))
    for err in errors:
        click.echo(f"row {err['row']}: {err['error']}", err=True)
    report = analyze_store(store)
    _write(out_path, json.dumps(report, indent=2) + "\n")


@main.command("export")
@click.option("--status", default="accepted", show_default=True)
@click.option("--journal", "journal_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", default="-")
def export_cmd(status, journal_path, out_path):
    """Export stored pairs filtered by status."""
    store = Store(journal_path=journal_path)
    _write(out_path, store.export_dataset(set(status.split(","))))


if __name__ == "__main__":
    main()
