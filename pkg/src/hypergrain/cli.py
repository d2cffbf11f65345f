"""Command-line interface: build, query, eval, inspect.

Exit codes: 0 success, 1 usage or configuration error, 2 provider failure,
3 knowledge-base integrity failure.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import load_config, make_provider
from .corpus import load_corpus_manifest
from .errors import (
    ConfigError,
    DatasetError,
    DimensionMismatch,
    HypergrainError,
    ProviderUnavailable,
    ResponseTooLong,
    StoreError,
)
from .evaluation import load_qa_dataset, run_eval, sensitivity_sweep
from .pipeline import build_corpus
from .retrieval import RetrievalConfig, answer_query
from .store import load_kb, save_kb

log = logging.getLogger(__name__)

_FLAG_TO_COMPONENT = {
    "no_enr": "entities",
    "no_er": "edges",
    "no_hr": "hyperedges",
    "no_ssc": "clusters",
}


@click.group()
@click.option("--log-level", default="WARNING", show_default=True)
def cli(log_level: str):
    logging.basicConfig(level=getattr(logging, log_level.upper(), logging.WARNING))


def _load(config_path: str | None, overrides: dict | None = None):
    return load_config(config_path, overrides)


def _retrieval_config(config, mode: str | None) -> RetrievalConfig:
    base = config.retrieval
    if mode is None or mode == base.mode:
        return base
    return RetrievalConfig(
        n_hyperedges=base.n_hyperedges,
        n_edges=base.n_edges,
        tau_hyperedges=base.tau_hyperedges,
        tau_edges=base.tau_edges,
        mode=mode,
        evidence_token_budget=base.evidence_token_budget,
    )


def _disabled(no_enr: bool, no_er: bool, no_hr: bool, no_ssc: bool) -> frozenset[str]:
    flags = {"no_enr": no_enr, "no_er": no_er, "no_hr": no_hr, "no_ssc": no_ssc}
    return frozenset(_FLAG_TO_COMPONENT[name] for name, on in flags.items() if on)


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--force", is_flag=True, help="Overwrite a store with a different format version.")
@click.option("--no-ssc", is_flag=True, help="Skip semantic clustering at build time.")
@click.option("--no-sw", is_flag=True, help="Extract without the sliding-window prefix.")
@click.option("--workers", type=int, default=None, help="Parallel document builds.")
def build(manifest_path, out_path, config_path, force, no_ssc, no_sw, workers):
    """Build a knowledge base from a corpus manifest."""
    overrides: dict = {}
    if no_ssc:
        overrides["enable_ssc"] = False
    if no_sw:
        overrides["sliding_window"] = False
    if workers is not None:
        overrides["workers"] = workers
    config = _load(config_path, overrides)
    provider = make_provider(config.provider)
    documents = load_corpus_manifest(manifest_path)
    cache_dir = Path(out_path).with_name(Path(out_path).name + ".doccache")
    kb, failures = build_corpus(documents, config, provider, cache_dir=cache_dir)
    save_kb(kb, out_path, force=force)
    for doc_id, error in failures.items():
        click.echo(f"FAILED {doc_id}: {error}", err=True)
    counts = kb.manifest["documents"]
    click.echo(
        f"built {len(counts)} documents -> {out_path} "
        f"({len(kb.entities)} entities, {len(kb.hyperedges)} hyperedges, "
        f"{len(kb.edges)} edges, {len(kb.clusters)} clusters)"
    )
    usage = provider.usage.report()["construction"]
    click.echo(
        f"construction usage: {usage['calls']} calls, "
        f"{usage['prompt_tokens']} prompt tokens, {usage['response_tokens']} response tokens"
    )


@cli.command()
@click.argument("query")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["hypergraph", "graph", "hybrid"]), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--verbose", is_flag=True, help="Print the evidence bundle with provenance.")
@click.option("--no-enr", is_flag=True, help="Disable entity retrieval.")
@click.option("--no-er", is_flag=True, help="Disable edge retrieval.")
@click.option("--no-hr", is_flag=True, help="Disable hyperedge retrieval.")
@click.option("--no-ssc", is_flag=True, help="Disable cluster retrieval.")
def query(query, kb_path, mode, config_path, verbose, no_enr, no_er, no_hr, no_ssc):
    """Answer one query against a knowledge base."""
    config = _load(config_path)
    provider = make_provider(config.provider)
    kb = load_kb(kb_path)
    result = answer_query(
        kb,
        query,
        provider,
        _retrieval_config(config, mode),
        disabled=_disabled(no_enr, no_er, no_hr, no_ssc),
        prompt_dir=config.prompt_dir,
        temperature=config.provider.generation_temperature,
    )
    click.echo(result.answer)
    if verbose:
        click.echo(json.dumps(result.bundle.to_record(), indent=2, sort_keys=True))


@cli.command("eval")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["hypergraph", "graph", "hybrid"]), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", "report_path", type=click.Path(), help="Write the JSON report here.")
@click.option("--sweep", type=str, default=None, help="Comma-separated hyperedge caps to sweep.")
@click.option("--no-enr", is_flag=True)
@click.option("--no-er", is_flag=True)
@click.option("--no-hr", is_flag=True)
@click.option("--no-ssc", is_flag=True)
@click.option("--no-sw", is_flag=True, help="Assert the KB was built without the sliding window.")
def eval_command(
    kb_path, dataset_path, mode, config_path, report_path, sweep,
    no_enr, no_er, no_hr, no_ssc, no_sw,
):
    """Score a QA dataset against a knowledge base."""
    config = _load(config_path)
    provider = make_provider(config.provider)
    kb = load_kb(kb_path)
    kb_config = kb.manifest.get("config", {})
    if no_sw and kb_config.get("sliding_window", True):
        raise ConfigError(
            "--no-sw is a build-time setting; this knowledge base was built "
            "with the sliding window enabled. Rebuild with `build --no-sw`."
        )
    dataset, parse_errors = load_qa_dataset(dataset_path)
    for line_error in parse_errors:
        click.echo(f"dataset: {line_error}", err=True)

    if sweep:
        values = [int(v) for v in sweep.split(",") if v.strip()]
        report = sensitivity_sweep(
            kb, provider, dataset, values,
            base_config=_retrieval_config(config, mode),
            prompt_dir=config.prompt_dir,
        )
        payload = json.dumps(report, indent=2, sort_keys=True)
        if report_path:
            Path(report_path).write_text(payload + "\n", encoding="utf-8")
        click.echo(payload)
        return

    report = run_eval(
        dataset,
        kb,
        provider,
        _retrieval_config(config, mode),
        disabled=_disabled(no_enr, no_er, no_hr, no_ssc),
        prompt_dir=config.prompt_dir,
        parse_errors=parse_errors,
    )
    flags = [
        name.replace("_", "-")
        for name, on in [
            ("no_enr", no_enr), ("no_er", no_er), ("no_hr", no_hr),
            ("no_ssc", no_ssc), ("no_sw", no_sw),
        ]
        if on
    ]
    report.flags = flags
    click.echo(report.table())
    usage = report.usage
    for phase in ("construction", "generation"):
        totals = usage.get(phase, {})
        click.echo(
            f"{phase} usage: {totals.get('calls', 0)} calls, "
            f"{totals.get('prompt_tokens', 0)} prompt tokens, "
            f"{totals.get('response_tokens', 0)} response tokens"
        )
    if report_path:
        Path(report_path).write_text(
            json.dumps(report.to_record(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        click.echo(f"report written to {report_path}")


@cli.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--clusters", "show_clusters", is_flag=True, help="Dump clusters with member indices.")
def inspect(kb_path, show_clusters):
    """Print manifest and record counts for a knowledge base."""
    kb = load_kb(kb_path)
    manifest = kb.manifest
    click.echo(f"format_version: {manifest['format_version']}")
    click.echo(f"embedding_dimension: {manifest['embedding_dimension']}")
    click.echo(f"config_hash: {manifest['config_hash']}")
    click.echo(
        f"totals: {len(kb.chunks)} chunks, {len(kb.entities)} entities, "
        f"{len(kb.hyperedges)} hyperedges, {len(kb.edges)} edges, {len(kb.clusters)} clusters"
    )
    for doc_id, counts in sorted(manifest["documents"].items()):
        click.echo(f"  {doc_id}: {counts}")
    if show_clusters:
        for cid in sorted(kb.clusters):
            cluster = kb.clusters[cid]
            indices = [kb.hyperedges[hid].k_index for hid in cluster.member_hyperedges]
            click.echo(f"cluster {cid}: members(k_index)={indices}")
            click.echo(f"  text: {cluster.ch_text[:200]}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except (ConfigError, DatasetError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (ProviderUnavailable, ResponseTooLong) as exc:
        click.echo(f"provider failure: {exc}", err=True)
        return 2
    except (StoreError, DimensionMismatch) as exc:
        click.echo(f"integrity failure: {exc}", err=True)
        return 3
    except HypergrainError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
