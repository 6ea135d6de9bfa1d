"""Operator surface: episodes, batches, data-pipeline stages, reports, and
the offline mock server.

Exit codes: 0 success, 2 configuration error, 3 partial batch failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import datapipe, fixtures
from .analytics import behavior_distribution, emit_report
from .config import RunConfig
from .datapipe import read_manifest, write_manifest
from .mock.corpus import MockCorpus
from .mock.tools import MockToolSuite, semantic_match
from .runner import EpisodeRunner, episode_seed, run_batch
from .session import ConfigError
from .trajectory import read_jsonl, write_jsonl

EXIT_CONFIG_ERROR = 2
EXIT_PARTIAL_FAILURE = 3


def _load_config(path, seed, mock) -> RunConfig:
    try:
        config = RunConfig.load(path)
        if seed is not None:
            config.seed = seed
        if mock is not None:
            config.mock = mock
        config.validate()
        return config
    except (ConfigError, OSError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)


def _load_corpus(config: RunConfig) -> MockCorpus:
    if config.corpus_path:
        return MockCorpus.load(config.corpus_path)
    return fixtures.default_corpus()


@click.group()
def main():
    """Budgeted glance/gaze visual-QA agent loop."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--question", required=True)
@click.option("--image", "image_ref", required=True)
@click.option("--seed", type=int, default=None)
@click.option("--mock/--live", default=None)
@click.option("--out", type=click.Path(), default=None, help="trajectory JSONL path")
def run(config_path, question, image_ref, seed, mock, out):
    """Run a single episode and print its trajectory."""
    config = _load_config(config_path, seed, mock)
    corpus = _load_corpus(config)
    suite_factory, model, _ = _runtime(config, corpus)
    runner = EpisodeRunner(suite_factory(episode_seed(config.seed, question)), model, config)
    trajectory = runner.run_episode(question, image_ref)
    if out:
        write_jsonl(out, [trajectory])
    click.echo(trajectory.to_json())


def _runtime(config: RunConfig, corpus: MockCorpus):
    from .runner import _mock_factories

    if config.mock:
        return _mock_factories(config, corpus)
    import httpx

    from .remote import RemoteChatClient, RemoteToolSuite
    from .toolkit import RetryPolicy

    client = httpx.Client(base_url=config.endpoints.tools, timeout=30.0)
    retry = RetryPolicy(attempts=config.retry_attempts, backoff=config.retry_backoff)
    summarizer = (
        RemoteChatClient(httpx.Client(base_url=config.endpoints.summarizer, timeout=60.0))
        if config.endpoints.summarizer
        else None
    )

    def make_suite(_seed: int) -> RemoteToolSuite:
        return RemoteToolSuite(
            client, summarizer=summarizer, parallelism=config.tool_parallelism, retry_policy=retry
        )

    model = RemoteChatClient(httpx.Client(base_url=config.endpoints.model or config.endpoints.tools, timeout=120.0))
    judge = RemoteChatClient(httpx.Client(base_url=config.endpoints.judge or config.endpoints.tools, timeout=60.0))
    return make_suite, model, judge


def _batch(config, manifest, rollout_group, out):
    try:
        records, bad = datapipe_read_lenient(manifest)
    except OSError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    corpus = _load_corpus(config)
    suite_factory, model, judge = _runtime(config, corpus)
    result = run_batch(
        config,
        records,
        corpus=corpus,
        rollout_group=rollout_group,
        suite_factory=suite_factory,
        model=model,
        judge=judge,
    )
    out_dir = Path(out or config.output_dir)
    write_jsonl(out_dir / "trajectories.jsonl", result.trajectories, append=False)
    if result.behavior:
        emit_report(result.behavior, out_dir / "behavior")
    summary = {
        "episodes": len(result.trajectories),
        "accuracy": result.accuracy,
        "failures": len(result.failures) + len(bad),
        "groups": {rid: list(g.advantages) for rid, g in result.groups.items()},
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    click.echo(json.dumps(summary, sort_keys=True))
    if result.failures or bad:
        sys.exit(EXIT_PARTIAL_FAILURE)


def datapipe_read_lenient(path):
    """Manifest reader that isolates malformed lines instead of aborting."""
    records, bad = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(datapipe.DatasetRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, datapipe.ManifestError) as exc:
                bad.append((lineno, str(exc)))
    return records, bad


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--mock/--live", default=None)
@click.option("--out", type=click.Path(), default=None)
def batch(config_path, manifest, seed, mock, out):
    """Evaluate every manifest record once."""
    config = _load_config(config_path, seed, mock)
    _batch(config, manifest, None, out)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--group-size", "-g", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--mock/--live", default=None)
@click.option("--out", type=click.Path(), default=None)
def rollout(config_path, manifest, group_size, seed, mock, out):
    """Sample a rollout group per record and export normalized advantages."""
    config = _load_config(config_path, seed, mock)
    _batch(config, manifest, group_size or config.group_size, out)


@main.command("filter")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out-dir", type=click.Path(), default="filtered")
def filter_cmd(config_path, manifest, out_dir):
    """Uncertainty-aware filtering with the corpus-scripted sampler."""
    config = _load_config(config_path, None, None)
    corpus = _load_corpus(config)
    records = read_manifest(manifest)

    def sampler(record, attempt):
        return corpus.sampler_scripts[record.id][attempt]

    def judge(record, answer):
        return semantic_match(answer, record.ground_truth)

    result = datapipe.uncertainty_filter(records, sampler, judge, config.filter_attempts)
    out = Path(out_dir)
    write_manifest(out / "kept.jsonl", result.kept)
    write_manifest(out / "discarded.jsonl", result.discarded)
    write_manifest(out / "unresolved.jsonl", result.unresolved)
    click.echo(
        json.dumps(
            {"kept": len(result.kept), "discarded": len(result.discarded), "unresolved": len(result.unresolved)}
        )
    )


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="skeletons.jsonl")
def skeleton(manifest, out):
    """Emit fixed-order trajectory templates for teacher completion."""
    records = read_manifest(manifest)
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(datapipe.synthesize_skeleton(record).to_json() + "\n")
    click.echo(f"wrote {len(records)} skeletons to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out-dir", type=click.Path(), default="stratified")
def stratify(config_path, manifest, out_dir):
    """Split records into difficulty levels (level 1 is a subset of level 2)."""
    config = _load_config(config_path, None, None)
    records = read_manifest(manifest)
    try:
        datapipe.stratify(records, band=tuple(config.level_band))
    except datapipe.MissingPassRate as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    l1, l2 = datapipe.level_manifests(records)
    out = Path(out_dir)
    write_manifest(out / "level1.jsonl", l1)
    write_manifest(out / "level2.jsonl", l2)
    click.echo(json.dumps({"level1": len(l1), "level2": len(l2)}))


@main.command()
@click.option("--manifest", type=click.Path(exists=True), default=None)
@click.option("--trajectories", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default="report")
def report(manifest, trajectories, out):
    """Composition report for a manifest or behavior report for trajectories."""
    if manifest is None and trajectories is None:
        click.echo("config error: provide --manifest or --trajectories", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    if manifest:
        records = read_manifest(manifest)
        doc = emit_report(datapipe.composition_report(records), Path(out) / "composition")
        click.echo(doc, nl=False)
    if trajectories:
        trajs = read_jsonl(trajectories)
        doc = emit_report(behavior_distribution(trajs), Path(out) / "behavior")
        click.echo(doc, nl=False)


@main.command("mock-serve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8763)
@click.option("--seed", type=int, default=None)
@click.option("--fault-rate", type=float, default=None)
def mock_serve(config_path, host, port, seed, fault_rate):
    """Serve deterministic tool and chat endpoints for offline runs."""
    from .mock.server import serve

    config = _load_config(config_path, seed, True)
    if fault_rate is not None:
        config.fault_rate = fault_rate
    corpus = _load_corpus(config)
    suite = MockToolSuite(
        corpus, seed=config.seed, fault_rate=config.fault_rate, parallelism=config.tool_parallelism
    )
    try:
        serve(suite, host=host, port=port)
    except OSError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)


@main.command("make-fixtures")
@click.option("--out-dir", type=click.Path(), default="fixtures-out")
def make_fixtures(out_dir):
    """Write the bundled corpus, demo manifest, and synthetic composition manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fixtures.default_corpus().save(out / "corpus.json")
    write_manifest(out / "demo_manifest.jsonl", fixtures.demo_records())
    write_manifest(out / "synthetic_sft_manifest.jsonl", fixtures.synthetic_composition_records())
    click.echo(f"fixtures written to {out}")


if __name__ == "__main__":
    main()
