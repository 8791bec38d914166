"""Command-line interface.

All stages are driven by one flat YAML config file; every flag is an
override recorded in the run manifest. Exit code 0 means every requested
stage completed; usage and config errors exit 2, runtime failures exit 1.
"""

from __future__ import annotations

import functools
import hashlib
import json
import logging
import os
import shutil
import sys
import time
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .analytics import (
    WindowDigest,
    category_preservation,
    concept_fraction,
    enrichment_table,
    keyword_timeline,
    load_categories,
    topics_digest,
    write_categories_csv,
    write_enrichment_csv,
    write_timeline_csv,
)
from .authors import audit_credentials, default_patterns, filter_hcp, load_patterns
from .concepts import annotate_corpus, build_matcher, default_lexicon, read_lexicon
from .config import ConfigError, RunSettings, load_settings
from .corpus import (
    ingest,
    parse_timestamp,
    preprocess_corpus,
    read_documents_jsonl,
    write_documents_jsonl,
)
from .lda import umass_coherence
from .pipeline import (
    PipelineError,
    WindowSpec,
    read_run_dir,
    run,
    run_windows,
    write_run_dir,
)

logger = logging.getLogger(__name__)


def _friendly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            raise click.UsageError(str(exc)) from exc
        except BrokenPipeError:
            # downstream reader (head, less) closed the pipe; die quietly
            devnull = os.open(os.devnull, os.O_WRONLY)
            os.dup2(devnull, sys.stdout.fileno())
            raise SystemExit(141)
        except (PipelineError, ValueError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="clinsift")
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug output.")
def main(verbose: int) -> None:
    """Mine clinically relevant documents out of a noisy social-media feed."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _input_entry(custom_path: Optional[str], default_name: Optional[str]) -> Optional[dict]:
    if custom_path:
        return {"path": str(custom_path), "sha256": _sha256_file(custom_path)}
    if default_name is None:
        return None
    data = resources.files("clinsift").joinpath(f"data/{default_name}").read_bytes()
    return {"path": f"builtin:{default_name}", "sha256": hashlib.sha256(data).hexdigest()}


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def _prepare_outdir(outdir, force: bool) -> Path:
    path = Path(outdir)
    if path.exists() and any(path.iterdir()):
        if not force:
            raise click.ClickException(
                f"output directory {path} already exists; pass --force to replace it"
            )
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


@dataclass
class RunManifest:
    """Everything needed to replay a run bit-for-bit: effective config,
    input digests, seed, tool version, and the observed corpus sizes."""

    mode: str
    settings: dict
    pipeline: dict
    inputs: dict
    seed: int
    stages: dict
    window_spec: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {
            "tool": "clinsift",
            "version": __version__,
            "mode": self.mode,
            "seed": self.seed,
            "settings": self.settings,
            "pipeline": self.pipeline,
            "inputs": self.inputs,
            "stages": self.stages,
        }
        if self.window_spec is not None:
            out["window_spec"] = self.window_spec
        return out


_SETTING_OVERRIDE_KEYS = (
    "input",
    "stopwords",
    "lemma_table",
    "patterns",
    "lexicon",
    "categories",
    "group_threads",
    "k",
    "tau",
    "max_iterations",
    "epsilon",
    "use_concepts",
    "stop_growth_factor",
    "count_mode",
    "min_concept_tokens",
    "lda_iterations",
    "lda_alpha",
    "lda_beta",
    "seed",
    "top_words",
    "windows",
    "window_start",
    "global_baseline",
    "jobs",
    "query_terms",
)


def _settings_from(config_path, **overrides) -> RunSettings:
    clean = {}
    for key in _SETTING_OVERRIDE_KEYS:
        if key in overrides and overrides[key] is not None:
            value = overrides[key]
            if key == "query_terms":
                value = list(value)
                if not value:
                    continue
            clean[key] = value
    return load_settings(config_path, clean)


def _common_io_options(fn):
    fn = click.option("--stopwords", type=click.Path(exists=True, dir_okay=False), default=None)(fn)
    fn = click.option(
        "--lemmas", "lemma_table", type=click.Path(exists=True, dir_okay=False), default=None
    )(fn)
    fn = click.option("--query-term", "query_terms", multiple=True)(fn)
    fn = click.option("-c", "--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)(fn)
    return fn


@main.command("ingest")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False))
@_common_io_options
@click.option("--group-threads", is_flag=True, flag_value=True, default=None)
@click.option("--jobs", type=int, default=None)
@_friendly
def ingest_cmd(input_path, out, config_path, stopwords, lemma_table, query_terms, group_threads, jobs):
    """Parse a raw JSONL feed and write a normalized document corpus."""
    settings = _settings_from(
        config_path,
        stopwords=stopwords,
        lemma_table=lemma_table,
        query_terms=query_terms,
        group_threads=group_threads,
        jobs=jobs,
    )
    result = ingest(input_path, group_threads=settings.group_threads)
    corpus = preprocess_corpus(
        result.corpus, settings.build_normalizer(), jobs=settings.resolved_jobs()
    )
    write_documents_jsonl(corpus, out)
    click.echo(
        f"ingest: {len(result.corpus)} records read, {result.skipped} skipped, "
        f"{len(corpus)} documents -> {out}"
    )


@main.command("filter-authors")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False))
@click.option("--patterns", "patterns_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--stats", "stats_path", type=click.Path(dir_okay=False), default=None)
@_friendly
def filter_authors_cmd(input_path, out, patterns_path, stats_path):
    """Keep only documents written by credentialed authors."""
    corpus = read_documents_jsonl(input_path)
    patterns = load_patterns(patterns_path) if patterns_path else default_patterns()
    filtered = filter_hcp(corpus, patterns, label="D1")
    audit = audit_credentials(corpus, patterns)
    write_documents_jsonl(filtered, out)
    by_pattern = Counter(pat for hits in audit.values() for pat, _field in hits)
    by_field = Counter(field for hits in audit.values() for _pat, field in hits)
    stats = {
        "input": len(corpus),
        "retained": len(filtered),
        "by_pattern": dict(sorted(by_pattern.items())),
        "by_field": dict(sorted(by_field.items())),
    }
    stats_file = Path(stats_path) if stats_path else Path(str(out) + ".stats.json")
    _write_json(stats_file, stats)
    click.echo(f"filter-authors: {len(filtered)} of {len(corpus)} retained -> {out}")
    click.echo(f"filter-authors: stats -> {stats_file}")


@main.command("annotate")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--min-tokens", type=int, default=4, show_default=True)
@_friendly
def annotate_cmd(input_path, out, lexicon_path, min_tokens):
    """Attach lexicon concept mentions to every document."""
    corpus = read_documents_jsonl(input_path)
    lexicon = read_lexicon(lexicon_path) if lexicon_path else default_lexicon()
    matcher = build_matcher(lexicon)
    annotated = annotate_corpus(corpus, matcher, min_tokens=min_tokens)
    write_documents_jsonl(annotated, out)
    mentions = sum(len(doc.concepts) for doc in annotated.documents)
    click.echo(
        f"annotate: {mentions} mentions across {len(annotated)} documents "
        f"({len(lexicon)} lexicon entries) -> {out}"
    )


def _run_options(fn):
    fn = click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None)(fn)
    fn = click.option("-o", "--out", "outdir", required=True, type=click.Path(file_okay=False))(fn)
    fn = click.option("--force", is_flag=True, help="Replace an existing output directory.")(fn)
    fn = click.option("--patterns", type=click.Path(exists=True, dir_okay=False), default=None)(fn)
    fn = click.option("--lexicon", type=click.Path(exists=True, dir_okay=False), default=None)(fn)
    fn = click.option("--categories", type=click.Path(exists=True, dir_okay=False), default=None)(fn)
    fn = click.option("--k", type=int, default=None)(fn)
    fn = click.option("--tau", type=float, default=None)(fn)
    fn = click.option("--iterations", "max_iterations", type=int, default=None)(fn)
    fn = click.option("--epsilon", type=float, default=None)(fn)
    fn = click.option("--no-concepts", "use_concepts", is_flag=True, flag_value=False, default=None)(fn)
    fn = click.option("--count-mode", type=click.Choice(["occurrences", "documents"]), default=None)(fn)
    fn = click.option("--stop-growth-factor", type=float, default=None)(fn)
    fn = click.option("--min-concept-tokens", type=int, default=None)(fn)
    fn = click.option("--lda-iterations", type=int, default=None)(fn)
    fn = click.option("--lda-alpha", type=float, default=None)(fn)
    fn = click.option("--lda-beta", type=float, default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--top-words", type=int, default=None)(fn)
    fn = click.option("--group-threads", is_flag=True, flag_value=True, default=None)(fn)
    fn = click.option("--window-start", default=None)(fn)
    fn = click.option("--global-baseline", is_flag=True, flag_value=True, default=None)(fn)
    fn = click.option("--jobs", type=int, default=None)(fn)
    return fn


@main.command("run")
@_common_io_options
@_run_options
@click.option("--windows", default=None, help="length:stride:rounds in days; enables window mode.")
@_friendly
def run_cmd(config_path, stopwords, lemma_table, query_terms, windows, **kw):
    """Execute the full pipeline (single run, or windowed when configured)."""
    settings = _settings_from(
        config_path,
        stopwords=stopwords,
        lemma_table=lemma_table,
        query_terms=query_terms,
        windows=windows,
        input=kw.pop("input_path"),
        **{k: v for k, v in kw.items() if k not in ("outdir", "force")},
    )
    _execute_run(settings, kw["outdir"], kw["force"], require_windows=False)


@main.command("windows")
@_common_io_options
@_run_options
@click.option("--windows", default="14:7:2", show_default=True, help="length:stride:rounds in days.")
@_friendly
def windows_cmd(config_path, stopwords, lemma_table, query_terms, windows, **kw):
    """Execute the pipeline independently over sliding time windows."""
    settings = _settings_from(
        config_path,
        stopwords=stopwords,
        lemma_table=lemma_table,
        query_terms=query_terms,
        windows=windows,
        input=kw.pop("input_path"),
        **{k: v for k, v in kw.items() if k not in ("outdir", "force")},
    )
    _execute_run(settings, kw["outdir"], kw["force"], require_windows=True)


def _execute_run(settings: RunSettings, outdir, force: bool, require_windows: bool) -> None:
    if not settings.input:
        raise ConfigError("no input feed: set 'input' in the config or pass --input")
    out = _prepare_outdir(outdir, force)
    seconds: dict[str, float] = {}
    jobs = settings.resolved_jobs()
    normalizer = settings.build_normalizer()
    pcfg = settings.pipeline_config()
    lexicon = settings.load_lexicon() if settings.use_concepts else None
    wspec = settings.window_spec()
    if require_windows and wspec is None:
        wspec = WindowSpec()

    t0 = time.perf_counter()
    ing = ingest(settings.input, group_threads=settings.group_threads)
    seconds["ingest"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    d0 = preprocess_corpus(ing.corpus, normalizer, jobs=jobs, label="D0")
    seconds["preprocess"] = time.perf_counter() - t0
    if len(d0) == 0:
        raise PipelineError("no usable documents after preprocessing")
    click.echo(
        f"corpus: {len(ing.corpus)} records ({ing.skipped} skipped), {len(d0)} documents"
    )

    eff = settings.to_dict()
    eff.pop("jobs", None)  # execution parameter, not part of the result identity
    inputs = {
        "records": _input_entry(settings.input, None),
        "stopwords": _input_entry(settings.stopwords, "stopwords_en.txt"),
        "lemma_table": _input_entry(settings.lemma_table, "lemmas_en.txt"),
        "patterns": _input_entry(settings.patterns, "hcp_patterns.txt"),
    }
    if settings.use_concepts:
        inputs["lexicon"] = _input_entry(settings.lexicon, "demo_lexicon.tsv")
    if settings.categories:
        inputs["categories"] = _input_entry(settings.categories, None)

    if wspec is None:
        t0 = time.perf_counter()
        result = run(d0, pcfg, lexicon)
        seconds["pipeline"] = time.perf_counter() - t0
        seconds.update({f"pipeline.{k}": v for k, v in result.timings.items()})
        stages = {
            "ingested": len(ing.corpus),
            "skipped": ing.skipped,
            "preprocessed": len(d0),
            "d1": len(result.d1),
            "iterations": [
                {
                    "iteration": rec.iteration,
                    "size": rec.size,
                    "relevant_topics": rec.score_set.size,
                    "retained": None if rec.retained_ids is None else len(rec.retained_ids),
                }
                for rec in result.records
            ],
            "final": len(result.final),
            "halt_reason": result.halt_reason,
        }
        manifest = RunManifest(
            mode="run",
            settings=eff,
            pipeline=pcfg.to_dict(),
            inputs=inputs,
            seed=settings.seed,
            stages=stages,
        )
        write_run_dir(result, out, manifest.to_dict(), _timings_payload(seconds, jobs))
        _write_run_analytics(out, result, settings)
        for rec in result.records:
            kept = "stopped" if rec.retained_ids is None else str(len(rec.retained_ids))
            click.echo(
                f"iteration {rec.iteration}: {rec.size} docs, "
                f"{rec.score_set.size} relevant topics, retained {kept}"
            )
        if result.halt_reason:
            click.echo(f"halt: {result.halt_reason}")
        click.echo(f"final corpus: {len(result.final)} documents -> {out}")
    else:
        t0 = time.perf_counter()
        wruns = run_windows(
            d0,
            wspec,
            pcfg,
            lexicon,
            global_baseline=settings.global_baseline,
            jobs=jobs,
        )
        seconds["windows"] = time.perf_counter() - t0
        summary = []
        for wr in wruns:
            entry = {
                "index": wr.index,
                "start": wr.start.isoformat(),
                "end": wr.end.isoformat(),
                "size": wr.size,
                "status": "ok" if wr.result is not None else "skipped",
                "skipped_reason": wr.skipped_reason,
            }
            if wr.result is not None:
                wdir = out / f"window{wr.index:02d}"
                write_run_dir(wr.result, wdir)
                if wr.result.records:
                    final_rec = wr.result.records[-1]
                    _write_json(
                        wdir / "topics.json",
                        topics_digest(final_rec.model, final_rec.score_set),
                    )
                entry.update(
                    {
                        "halt_reason": wr.result.halt_reason,
                        "d1": len(wr.result.d1),
                        "final": len(wr.result.final),
                        "relevant_topics": wr.result.relevant_counts,
                        "seed": wr.result.config.lda.seed,
                    }
                )
            summary.append(entry)
        _write_json(out / "windows.json", summary)
        stages = {
            "ingested": len(ing.corpus),
            "skipped": ing.skipped,
            "preprocessed": len(d0),
            "windows_total": len(wruns),
            "windows_run": sum(1 for wr in wruns if wr.result is not None),
        }
        manifest = RunManifest(
            mode="windows",
            settings=eff,
            pipeline=pcfg.to_dict(),
            inputs=inputs,
            seed=settings.seed,
            stages=stages,
            window_spec={
                "length_days": wspec.length_days,
                "stride_days": wspec.stride_days,
                "rounds": wspec.rounds,
                "start": wspec.start.isoformat() if wspec.start else None,
            },
        )
        _write_json(out / "manifest.json", manifest.to_dict())
        _write_json(out / "timings.json", _timings_payload(seconds, jobs))
        ran = stages["windows_run"]
        click.echo(f"windows: {ran} of {len(wruns)} windows ran -> {out}")


def _timings_payload(seconds: dict[str, float], jobs: int) -> dict:
    return {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "jobs": jobs,
        "seconds": {k: round(v, 6) for k, v in sorted(seconds.items())},
    }


def _write_run_analytics(outdir: Path, result, settings: RunSettings) -> None:
    if not result.records:
        return
    adir = outdir / "analytics"
    final_rec = result.records[-1]
    _write_json(adir / "topics.json", topics_digest(final_rec.model, final_rec.score_set))
    summary: dict = {
        "halt_reason": result.halt_reason,
        "relevant_topics": result.relevant_counts,
        "umass_coherence": [float(x) for x in umass_coherence(final_rec.model, result.d1)],
    }
    if result.kept_lexicon:
        matcher = build_matcher(result.kept_lexicon)
        summary["concept_fraction"] = concept_fraction(final_rec.model, matcher)
        summary["lexicon_kept"] = len(result.kept_lexicon)
    _write_json(adir / "summary.json", summary)
    if len(result.final) > 0:
        enr = enrichment_table(result.final, result.d1, epsilon=settings.epsilon)
        write_enrichment_csv(enr, adir / "enrichment.csv")
    if settings.categories:
        cats = load_categories(settings.categories)
        retained = [rec.retained_ids for rec in result.records]
        fractions = category_preservation(result.d1, retained, cats)
        write_categories_csv(fractions, cats, adir / "categories.csv")


def _report_data(rundir, top: int) -> dict:
    art = read_run_dir(rundir)
    manifest = art.manifest
    data = {
        "path": str(rundir),
        "mode": manifest.get("mode", "run"),
        "version": manifest.get("version"),
        "seed": manifest.get("seed"),
        "stages": manifest.get("stages", {}),
    }
    if data["mode"] == "windows":
        windows_path = Path(rundir) / "windows.json"
        if not windows_path.exists():
            raise click.ClickException(f"{rundir}: windows.json missing (run incomplete)")
        with open(windows_path, encoding="utf-8") as fh:
            data["windows"] = json.load(fh)
        return data
    topics_path = Path(rundir) / "analytics" / "topics.json"
    if topics_path.exists():
        with open(topics_path, encoding="utf-8") as fh:
            topics = json.load(fh)
        data["topics"] = topics[:top]
    else:
        iters = art.iteration_dirs()
        if not iters:
            raise click.ClickException(
                f"{rundir}: no iteration artifacts found (pipeline halted before iteration 1)"
            )
        last_i = iters[-1][0]
        rows = art.topic_scores(last_i)
        rows.sort(key=lambda r: (-r[1], r[0]))
        data["topics"] = [
            {"topic": t, "rank": rank, "score": s, "relevant": rel, "top_words": []}
            for rank, (t, s, rel) in enumerate(rows[:top], start=1)
        ]
    return data


def _render_report(data: dict) -> str:
    lines = [f"run: {data['path']} (mode={data['mode']}, seed={data['seed']})"]
    stages = data.get("stages", {})
    if data["mode"] == "windows":
        lines.append(
            f"corpus: {stages.get('preprocessed', '?')} documents, "
            f"{stages.get('windows_run', '?')}/{stages.get('windows_total', '?')} windows ran"
        )
        for w in data.get("windows", []):
            status = w.get("status")
            extra = ""
            if status == "ok":
                extra = (
                    f" d1={w.get('d1')} final={w.get('final')}"
                    f" relevant_topics={w.get('relevant_topics')}"
                )
                if w.get("halt_reason"):
                    extra += f" halt={w['halt_reason']}"
            else:
                extra = f" ({w.get('skipped_reason')})"
            lines.append(
                f"  window {w['index']:>2}: [{w['start'][:10]} .. {w['end'][:10]}) "
                f"size={w['size']} {status}{extra}"
            )
        return "\n".join(lines)
    lines.append(
        f"corpus: {stages.get('preprocessed', '?')} documents, d1={stages.get('d1', '?')}, "
        f"final={stages.get('final', '?')}"
    )
    for it in stages.get("iterations", []):
        retained = it.get("retained")
        lines.append(
            f"  iteration {it['iteration']}: size={it['size']} "
            f"relevant_topics={it['relevant_topics']} "
            f"retained={'stopped' if retained is None else retained}"
        )
    if stages.get("halt_reason"):
        lines.append(f"halt: {stages['halt_reason']}")
    topics = data.get("topics", [])
    if topics:
        lines.append("top topics (final iteration):")
        for t in topics:
            words = " ".join(w for w, _p in t.get("top_words", [])[:10])
            mark = "*" if t.get("relevant") else " "
            lines.append(f"  {mark} rank {t['rank']:>2} topic {t['topic']:>3} score={t['score']:.4f} {words}")
    return "\n".join(lines)


@main.command("report")
@click.argument("rundir", type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.option("--top", type=int, default=10, show_default=True)
@_friendly
def report_cmd(rundir, fmt, top):
    """Summarize a run directory: sizes, topic scores, top words."""
    data = _report_data(rundir, top)
    if fmt == "json":
        click.echo(json.dumps(data, sort_keys=True, indent=2))
    else:
        click.echo(_render_report(data))


@main.command("enrich")
@click.argument("filtered_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("reference_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None)
@click.option("--max-n", type=int, default=3, show_default=True)
@click.option("--min-count", type=int, default=5, show_default=True)
@click.option("--epsilon", type=float, default=1e-4, show_default=True)
@click.option("--count-mode", type=click.Choice(["occurrences", "documents"]), default="occurrences")
@click.option("--top", type=int, default=10, show_default=True)
@_friendly
def enrich_cmd(filtered_path, reference_path, out, max_n, min_count, epsilon, count_mode, top):
    """Rank n-grams by how enriched they are in a filtered corpus."""
    filtered = read_documents_jsonl(filtered_path, label="filtered")
    reference = read_documents_jsonl(reference_path, label="reference")
    result = enrichment_table(
        filtered,
        reference,
        max_n=max_n,
        min_count=min_count,
        epsilon=epsilon,
        count_mode=count_mode,
    )
    if out:
        write_enrichment_csv(result, out)
        click.echo(f"enrich: {len(result.ranked)} n-grams -> {out}")
    click.echo("most enriched:")
    for phrase, score in result.top(top):
        click.echo(f"  {score:12.3f}  {phrase}")
    click.echo("least enriched:")
    for phrase, score in result.bottom(top):
        click.echo(f"  {score:12.3f}  {phrase}")


@main.command("categories")
@click.argument("rundir", type=click.Path(exists=True, file_okay=False))
@click.option("--categories", "categories_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None)
@_friendly
def categories_cmd(rundir, categories_path, out):
    """Track how much of each seeded category survives each iteration."""
    art = read_run_dir(rundir)
    d1_path = Path(rundir) / "d1_corpus.jsonl"
    if not d1_path.exists():
        raise click.ClickException(f"{rundir}: d1_corpus.jsonl missing (run incomplete)")
    d1 = read_documents_jsonl(d1_path, label="D1")
    if categories_path:
        cats = load_categories(categories_path)
    else:
        cats = load_categories(resources.files("clinsift").joinpath("data/demo_categories.yaml"))
    retained = [art.retained_ids(i) for i, _dir in art.iteration_dirs()]
    if not retained:
        raise click.ClickException(f"{rundir}: no iteration artifacts found")
    fractions = category_preservation(d1, retained, cats)
    out_path = Path(out) if out else Path(rundir) / "analytics" / "categories.csv"
    write_categories_csv(fractions, cats, out_path)
    click.echo(f"categories: {len(cats)} categories over {len(retained)} iteration(s) -> {out_path}")
    for name in sorted(fractions):
        series = ", ".join("n/a" if f is None else f"{f:.3f}" for f in fractions[name])
        click.echo(f"  {name}: {series}")


@main.command("timeline")
@click.argument("rundir", type=click.Path(exists=True, file_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--keyword", required=True)
@click.option("--pattern", "patterns", multiple=True, help="Token regex; default '<keyword>.*'.")
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None)
@_friendly
def timeline_cmd(rundir, corpus_path, keyword, patterns, out):
    """Daily keyword counts plus whether window topic models surfaced it."""
    art = read_run_dir(rundir)
    if art.manifest.get("mode") != "windows":
        raise click.ClickException("timeline requires a windowed run directory")
    windows_path = Path(rundir) / "windows.json"
    with open(windows_path, encoding="utf-8") as fh:
        windows_summary = json.load(fh)
    digests = []
    for w in windows_summary:
        top_words: list[list[str]] = []
        topics_path = Path(rundir) / f"window{w['index']:02d}" / "topics.json"
        if w.get("status") == "ok" and topics_path.exists():
            with open(topics_path, encoding="utf-8") as fh:
                topics = json.load(fh)
            top_words = [
                [word for word, _p in t["top_words"]] for t in topics if t.get("relevant")
            ]
        digests.append(
            WindowDigest(
                start=parse_timestamp(w["start"]),
                end=parse_timestamp(w["end"]),
                relevant_top_words=top_words,
            )
        )
    corpus = read_documents_jsonl(corpus_path)
    pattern_list = list(patterns) if patterns else [rf"{keyword}.*"]
    points, first_mention = keyword_timeline(corpus, digests, pattern_list)
    safe = "".join(ch if ch.isalnum() else "_" for ch in keyword)
    out_path = Path(out) if out else Path(rundir) / "analytics" / f"timeline_{safe}.csv"
    write_timeline_csv(points, out_path)
    if first_mention is None:
        click.echo(f"timeline: no documents match {pattern_list}; empty timeline -> {out_path}")
    else:
        flagged = sum(1 for p in points if p.in_topic_model)
        click.echo(
            f"timeline: first mention {first_mention.isoformat()}, "
            f"{sum(p.count for p in points)} matching documents, "
            f"{flagged} day(s) inside flagged windows -> {out_path}"
        )


if __name__ == "__main__":
    main()
