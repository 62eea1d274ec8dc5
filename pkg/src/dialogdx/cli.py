"""Command-line interface.

Subcommands mirror the pipeline: corpus management, index build/search,
an interactive chat, batch simulation, the evaluation harness, and the
HTTP service.  The CLI and the service share one engine code path.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import evaluation
from .config import ConfigError, load_config, load_runtime, make_engine
from .corpus import CorpusError, corpus_stats, load_corpus, write_corpus
from .embedding import EmbedderBackend, EmbedderSpec, make_embedder
from .engine import SessionConcluded
from .fixtures import generate_fixture
from .index import (
    IndexMode,
    IndexingError,
    build_index,
    load_index,
    save_index,
    search,
)
from .patient import cases_from_corpus, load_cases, make_patient, write_cases
from .session import read_transcript, write_transcript


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


@click.group()
def main() -> None:
    """Multi-round diagnostic dialogue engine."""


# ---------------------------------------------------------------------------
# corpus


@main.group()
def corpus() -> None:
    """Load, validate, and generate disease corpora."""


@corpus.command("validate")
@click.argument("path", type=click.Path(exists=True, file_okay=False))
def corpus_validate(path: str) -> None:
    """Validate a corpus directory; exits nonzero on the first violation."""
    try:
        loaded = load_corpus(path)
    except CorpusError as exc:
        raise _fail(f"{type(exc).__name__}: {exc}")
    click.echo(f"ok: {len(loaded)} diseases, {sum(1 for _ in loaded.records())} records")


@corpus.command("stats")
@click.argument("path", type=click.Path(exists=True, file_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def corpus_stats_cmd(path: str, as_json: bool) -> None:
    """Print corpus statistics."""
    try:
        stats = corpus_stats(load_corpus(path))
    except CorpusError as exc:
        raise _fail(f"{type(exc).__name__}: {exc}")
    if as_json:
        click.echo(
            json.dumps(
                {
                    "disease_count": stats.disease_count,
                    "node_count": stats.node_count,
                    "triple_count": stats.triple_count,
                    "record_count": stats.record_count,
                }
            )
        )
        return
    rows = [
        ("diseases", stats.disease_count),
        ("nodes", stats.node_count),
        ("triples", stats.triple_count),
        ("records", stats.record_count),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        click.echo(f"{name:<{width}}  {value}")


@corpus.command("fixture")
@click.argument("out", type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--diseases", "n_diseases", type=int, default=10, show_default=True)
@click.option("--records-per-disease", type=int, default=2, show_default=True)
@click.option(
    "--cases-out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Also write a scripted patient-case file usable with `simulate`.",
)
@click.option("--scripted-rounds", type=int, default=5, show_default=True)
def corpus_fixture(
    out: str,
    seed: int,
    n_diseases: int,
    records_per_disease: int,
    cases_out: str | None,
    scripted_rounds: int,
) -> None:
    """Generate a deterministic synthetic corpus."""
    generated = generate_fixture(seed, n_diseases, records_per_disease)
    write_corpus(generated, out)
    click.echo(f"wrote {len(generated)} diseases to {out}")
    if cases_out:
        cases = cases_from_corpus(generated, scripted_rounds=scripted_rounds)
        write_cases(cases, cases_out)
        click.echo(f"wrote {len(cases)} cases to {cases_out}")


# ---------------------------------------------------------------------------
# index


@main.group()
def index() -> None:
    """Build and query the dual disease index."""


@index.command("build")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option(
    "--embedder-backend",
    type=click.Choice([b.value for b in EmbedderBackend]),
    default="deterministic",
    show_default=True,
)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--model", default="text-embedding-3-small", show_default=True)
def index_build(corpus_path: str, out: str, embedder_backend: str, dim: int, model: str) -> None:
    """Embed every diagnosis text and record narrative into an index file."""
    try:
        loaded = load_corpus(corpus_path)
        embedder = make_embedder(
            EmbedderSpec(backend=EmbedderBackend(embedder_backend), dim=dim, model_name=model)
        )
        built = build_index(loaded, embedder)
        save_index(built, out)
    except (CorpusError, IndexingError) as exc:
        raise _fail(f"{type(exc).__name__}: {exc}")
    click.echo(
        f"indexed {len(built.di_entries)} diagnosis texts and "
        f"{len(built.mr_entries)} record narratives -> {out}"
    )


@index.command("search")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, file_okay=False))
@click.option("--query", required=True)
@click.option("--k", type=int, default=5, show_default=True)
@click.option(
    "--mode",
    type=click.Choice([m.value for m in IndexMode]),
    default="mr",
    show_default=True,
)
@click.option("--embedder-backend", type=click.Choice([b.value for b in EmbedderBackend]), default="deterministic")
@click.option("--model", default="text-embedding-3-small")
@click.option("--json", "as_json", is_flag=True)
def index_search(
    index_path: str,
    corpus_path: str | None,
    query: str,
    k: int,
    mode: str,
    embedder_backend: str,
    model: str,
    as_json: bool,
) -> None:
    """Search the index with a free-text query."""
    try:
        loaded_corpus = load_corpus(corpus_path) if corpus_path else None
        idx = load_index(index_path, corpus=loaded_corpus)
        embedder = make_embedder(
            EmbedderSpec(backend=EmbedderBackend(embedder_backend), dim=idx.dim, model_name=model)
        )
        hits = search(idx, embedder.embed(query), k, IndexMode(mode))
    except (CorpusError, IndexingError) as exc:
        raise _fail(f"{type(exc).__name__}: {exc}")
    if as_json:
        click.echo(
            json.dumps(
                [
                    {
                        "rank": h.rank,
                        "disease_id": h.disease_id,
                        "score": h.score,
                        "source": h.source.value,
                    }
                    for h in hits
                ]
            )
        )
        return
    for h in hits:
        name = loaded_corpus.get(h.disease_id).name if loaded_corpus else h.disease_id
        click.echo(f"{h.rank:>2}. {name:<40} {h.score:.4f}  [{h.source.value}]")


# ---------------------------------------------------------------------------
# chat / simulate


@main.command("chat")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--show-hits", is_flag=True, help="Print retrieval hits each round.")
@click.option("--show-thinking", is_flag=True, help="Print analyzer reasoning each round.")
@click.option("--no-analyzer", is_flag=True, help="Feed raw candidates straight to the doctor.")
def chat(config_path: str, show_hits: bool, show_thinking: bool, no_analyzer: bool) -> None:
    """Interactive consultation in the terminal (you are the patient)."""
    runtime = _runtime(config_path)
    engine = make_engine(
        runtime, overrides={"analyzer_enabled": False} if no_analyzer else None
    )
    session = engine.new_session()
    click.echo("Describe your complaint (empty line or Ctrl-D to stop).")
    while True:
        try:
            text = click.prompt("You", prompt_suffix="> ")
        except (click.Abort, EOFError):
            click.echo("bye")
            return
        if not text.strip():
            click.echo("bye")
            return
        try:
            action = engine.run_round(session, text)
        except SessionConcluded:
            click.echo("The consultation already concluded.")
            return
        artifacts = session.round_artifacts[-1]
        if show_hits:
            for h in artifacts.hits:
                name = runtime.corpus.get(h.disease_id).name
                click.echo(f"   [{h.source.value}] {h.score:.3f}  {name}")
        if show_thinking and artifacts.analysis is not None:
            click.echo(f"   (thinking) {artifacts.analysis.thinking_text}")
        click.echo(f"Doctor> {action.text}")
        if session.status.value == "concluded":
            click.echo("Consultation concluded with a diagnosis.")
            return


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cases", "cases_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--case-id", "only_case", default=None, help="Run a single case.")
@click.option("--no-analyzer", is_flag=True, help="Feed raw candidates straight to the doctor.")
def simulate(
    config_path: str,
    cases_path: str,
    out_dir: str,
    only_case: str | None,
    no_analyzer: bool,
) -> None:
    """Run patient cases through the engine and write transcript files."""
    runtime = _runtime(config_path)
    cases = load_cases(cases_path)
    if only_case is not None:
        cases = [c for c in cases if c.case_id == only_case]
        if not cases:
            raise _fail(f"case {only_case!r} not found in {cases_path}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    overrides = {"analyzer_enabled": False} if no_analyzer else None
    failures = 0
    for case in cases:
        engine = make_engine(runtime, overrides=overrides)
        patient = make_patient(case, runtime.backend, runtime.config.engine.models)
        transcript = engine.run_dialogue(case, patient, session_id=f"sim-{case.case_id}")
        write_transcript(transcript, out / f"{case.case_id}.json")
        if not transcript.complete:
            failures += 1
            click.echo(f"{case.case_id}: INCOMPLETE ({transcript.error})", err=True)
        else:
            click.echo(f"{case.case_id}: {len(transcript.rounds)} rounds")
    if failures:
        raise _fail(f"{failures} of {len(cases)} dialogues incomplete")


# ---------------------------------------------------------------------------
# evaluate


@main.group()
def evaluate() -> None:
    """Retrieval metrics, LLM judging, and ablations."""


@evaluate.command("retrieval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice([m.value for m in IndexMode]), default="mr", show_default=True)
@click.option("--max-rank", type=int, default=10, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def evaluate_retrieval(
    config_path: str, queries_path: str, mode: str, max_rank: int, as_json: bool
) -> None:
    """MRR and Hits@n for (query, gold disease) pairs in a JSONL file."""
    runtime = _runtime(config_path)
    queries = []
    with open(queries_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                queries.append((obj["query"], obj["gold_disease_id"]))
    metrics = evaluation.retrieval_metrics(
        queries, runtime.index, IndexMode(mode), runtime.embedder, max_rank=max_rank
    )
    payload = {
        "mode": mode,
        "mrr": metrics.mrr,
        "hits_at": {str(n): v for n, v in metrics.hits_at.items()},
        "query_count": metrics.query_count,
    }
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(f"queries: {metrics.query_count}  mode: {mode}")
        click.echo(f"MRR     : {metrics.mrr:.4f}")
        for n, v in sorted(metrics.hits_at.items()):
            click.echo(f"Hits@{n:<2} : {v:.4f}")


@evaluate.command("judge")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cases", "cases_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--transcript-dir",
    required=True,
    type=click.Path(exists=True, file_okay=False),
    help="Directory with one subdirectory of transcripts per method label.",
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def evaluate_judge(
    config_path: str,
    cases_path: str,
    transcript_dir: str,
    seed: int,
    out_path: str | None,
    as_json: bool,
) -> None:
    """Blind LLM judging of per-method transcripts for the same cases."""
    runtime = _runtime(config_path)
    cases = load_cases(cases_path)
    labels = sorted(p.name for p in Path(transcript_dir).iterdir() if p.is_dir())
    if not labels:
        raise _fail("transcript-dir has no method subdirectories")
    all_scores = []
    unscored = 0
    for case_idx, case in enumerate(cases):
        labeled = []
        for label in labels:
            path = Path(transcript_dir) / label / f"{case.case_id}.json"
            if not path.is_file():
                raise _fail(f"missing transcript {path}")
            labeled.append((label, read_transcript(path)))
        try:
            scores = evaluation.judge_transcripts(
                case,
                labeled,
                runtime.backend,
                runtime.config.engine.models,
                rng_seed=seed * 100003 + case_idx,
            )
        except evaluation.UnparseableJudgeOutput as exc:
            unscored += 1
            click.echo(f"{case.case_id}: unscored ({exc})", err=True)
            continue
        all_scores.extend(scores)
    summary: dict[str, list[int]] = {label: [] for label in labels}
    for s in all_scores:
        summary[s.method_label].append(s.score)
    payload = {
        "labels": {
            label: {
                "mean_score": (sum(v) / len(v)) if v else None,
                "case_count": len(v),
            }
            for label, v in summary.items()
        },
        "unscored_cases": unscored,
        "seed": seed,
    }
    if out_path:
        Path(out_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    if as_json:
        click.echo(json.dumps(payload))
    else:
        width = max(len(label) for label in labels)
        for label in labels:
            row = payload["labels"][label]
            mean = "-" if row["mean_score"] is None else f"{row['mean_score']:.2f}"
            click.echo(f"{label:<{width}}  mean {mean}  cases {row['case_count']}")
        if unscored:
            click.echo(f"unscored cases: {unscored}")


@evaluate.command("ablate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cases", "cases_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--axis",
    type=click.Choice([a.value for a in evaluation.AblationAxis]),
    required=True,
)
@click.option("--settings", default=None, help="Comma-separated settings override.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def evaluate_ablate(
    config_path: str,
    cases_path: str,
    axis: str,
    settings: str | None,
    seed: int,
    out_path: str | None,
    as_json: bool,
) -> None:
    """Re-run the full pipeline per setting and report mean judge scores."""
    runtime = _runtime(config_path)
    cases = load_cases(cases_path)
    axis_value = evaluation.AblationAxis(axis)
    parsed_settings = None
    if settings:
        parts = [s.strip() for s in settings.split(",") if s.strip()]
        parsed_settings = [int(p) for p in parts] if axis_value is evaluation.AblationAxis.TOP_K else parts
    deps = evaluation.PipelineDeps(
        corpus=runtime.corpus,
        index=runtime.index,
        embedder=runtime.embedder,
        backend=runtime.backend,
        clock=runtime.clock,
    )
    report = evaluation.run_ablation(
        axis_value,
        cases,
        deps,
        runtime.config.engine,
        settings=parsed_settings,
        rng_seed=seed,
    )
    payload = evaluation.ablation_report_to_dict(report)
    if out_path:
        Path(out_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(f"axis: {payload['axis']}  complete: {payload['complete']}")
        for row in payload["rows"]:
            mean = "-" if row["mean_score"] is None else f"{row['mean_score']:.2f}"
            click.echo(f"  setting {row['setting']:>4}  mean {mean}  cases {row['case_count']}")


@evaluate.command("pairwise")
@click.option("--cases", "cases_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--transcript-dir",
    required=True,
    type=click.Path(exists=True, file_okay=False),
    help="Directory with one subdirectory of transcripts per method label.",
)
@click.option("--label-a", required=True)
@click.option("--label-b", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def evaluate_pairwise(
    cases_path: str,
    transcript_dir: str,
    label_a: str,
    label_b: str,
    seed: int,
    out_dir: str,
) -> None:
    """Export blind two-response bundles (plus sealed keys) for human review."""
    cases = load_cases(cases_path)
    written = 0
    for case_idx, case in enumerate(cases):
        pair = []
        for label in (label_a, label_b):
            path = Path(transcript_dir) / label / f"{case.case_id}.json"
            if not path.is_file():
                raise _fail(f"missing transcript {path}")
            pair.append((label, read_transcript(path)))
        evaluation.export_pairwise(
            case, pair[0], pair[1], rng_seed=seed * 100003 + case_idx, out_dir=out_dir
        )
        written += 1
    click.echo(f"wrote {written} bundle/key pairs to {out_dir}")


# ---------------------------------------------------------------------------
# serve


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def serve_cmd(config_path: str) -> None:
    """Start the HTTP session service."""
    from .service import serve

    runtime = _runtime(config_path)
    serve(runtime)


def _runtime(config_path: str):
    try:
        return load_runtime(load_config(config_path))
    except (ConfigError, CorpusError, IndexingError) as exc:
        raise _fail(f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
