"""End-to-end iterative filtering pipeline and time-window driver.

One run: credential-filter the corpus, score the lexicon against the full
stream, prune it, annotate once, then repeat {fit LDA, score topics, select
relevant topics, keep high-mass documents} until the iteration budget, a
too-small corpus, or a relevant-topic explosion stops it.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .authors import CredentialPattern, default_patterns, filter_hcp
from .concepts import (
    DEFAULT_MIN_TOKENS,
    LexiconEntry,
    annotate_corpus,
    build_matcher,
    count_triggers,
)
from .corpus import Corpus, subset, token_counts, write_documents_jsonl
from .lda import LdaConfig, TopicModel, fit, save_model
from .relevance import (
    DEFAULT_EPSILON,
    RelevanceTable,
    TopicScoreSet,
    filter_documents,
    iterative_relevance,
    prefilter_concepts,
    relevance,
    score_topics,
    threshold_topics,
    write_relevance_csv,
    write_topic_scores_csv,
)

logger = logging.getLogger(__name__)

COUNT_MODES = ("occurrences", "documents")

HALT_SMALL_CORPUS = "corpus-smaller-than-k"
HALT_TOPIC_GROWTH = "relevant-topic-growth"
HALT_EMPTY_FILTER = "author-filter-empty"


class PipelineError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    k: int = 100
    tau: float = 0.25
    max_iterations: int = 3
    epsilon: float = DEFAULT_EPSILON
    lda: Optional[LdaConfig] = None
    use_concepts: bool = True
    stop_growth_factor: float = 2.0
    count_mode: str = "occurrences"
    min_concept_tokens: int = DEFAULT_MIN_TOKENS
    patterns: Optional[list[CredentialPattern]] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.stop_growth_factor <= 0:
            raise ValueError("stop_growth_factor must be positive")
        if self.count_mode not in COUNT_MODES:
            raise ValueError(f"count_mode must be one of {COUNT_MODES}")
        if self.lda is None:
            self.lda = LdaConfig(k=self.k)
        elif self.lda.k != self.k:
            raise ValueError(f"lda.k={self.lda.k} disagrees with pipeline k={self.k}")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "tau": self.tau,
            "max_iterations": self.max_iterations,
            "epsilon": self.epsilon,
            "lda": self.lda.to_dict(),
            "use_concepts": self.use_concepts,
            "stop_growth_factor": self.stop_growth_factor,
            "count_mode": self.count_mode,
            "min_concept_tokens": self.min_concept_tokens,
            "patterns": None
            if self.patterns is None
            else [
                {
                    "pattern": p.pattern,
                    "case_sensitive": p.case_sensitive,
                    "prefix": p.prefix,
                    "fields": sorted(p.fields),
                }
                for p in self.patterns
            ],
        }


@dataclass
class IterationRecord:
    iteration: int
    size: int
    model: TopicModel
    score_set: TopicScoreSet
    table: RelevanceTable
    retained_ids: Optional[list[str]]  # None when the growth stop fired first


@dataclass
class PipelineResult:
    config: PipelineConfig
    d0_size: int
    d1: Corpus
    records: list[IterationRecord]
    final: Corpus
    baseline: RelevanceTable
    kept_lexicon: Optional[list[LexiconEntry]] = None
    halt_reason: Optional[str] = None
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def relevant_counts(self) -> list[int]:
        return [rec.score_set.size for rec in self.records]


def _pick(counts: dict[str, tuple[int, int]], mode: str) -> dict[str, int]:
    idx = 0 if mode == "occurrences" else 1
    return {phrase: pair[idx] for phrase, pair in counts.items()}


def _iteration_seed(base: int, iteration: int) -> int:
    return base + (iteration - 1)


def run(
    d0: Corpus,
    config: PipelineConfig,
    lexicon: Optional[Sequence[LexiconEntry]] = None,
    baseline_table: Optional[RelevanceTable] = None,
) -> PipelineResult:
    """Execute the full filtering loop on a preprocessed corpus.

    `d0` must carry author records (the first stage is the credential
    filter). With `baseline_table` the first-iteration relevance table is
    taken as given instead of being computed from this corpus.
    """
    if len(d0) == 0:
        raise ValueError("input corpus is empty")
    if config.use_concepts and lexicon is None:
        raise ValueError("use_concepts=True requires a lexicon")
    patterns = config.patterns if config.patterns is not None else default_patterns()
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    d1 = filter_hcp(d0, patterns, label="D1")
    timings["author_filter"] = time.perf_counter() - t0
    logger.info("author filter: %d of %d documents retained", len(d1), len(d0))
    if len(d1) == 0:
        raise PipelineError(HALT_EMPTY_FILTER)

    t0 = time.perf_counter()
    kept_lexicon: Optional[list[LexiconEntry]] = None
    if config.use_concepts:
        all_phrases = sorted({entry.phrase for entry in lexicon})
        counts_d1_full = count_triggers(d1, all_phrases)
        if baseline_table is None:
            counts_d0_full = count_triggers(d0, all_phrases)
            baseline = iterative_relevance(
                1,
                _pick(counts_d1_full, config.count_mode),
                _pick(counts_d0_full, config.count_mode),
                None,
                len(d1),
                len(d0),
                0,
                epsilon=config.epsilon,
            )
        else:
            baseline = baseline_table
        kept_lexicon = prefilter_concepts(list(lexicon), baseline)
        if not kept_lexicon:
            raise PipelineError("prefilter removed every lexicon entry")
        matcher = build_matcher(kept_lexicon)
        kept_phrases = sorted(matcher.phrases)
        d1 = annotate_corpus(d1, matcher, min_tokens=config.min_concept_tokens)
        counts_d1 = count_triggers(d1, kept_phrases)
    else:
        if baseline_table is None:
            counts_d1_tok = token_counts(d1)
            counts_d0_tok = token_counts(d0)
            baseline = iterative_relevance(
                1,
                _pick(counts_d1_tok, config.count_mode),
                _pick(counts_d0_tok, config.count_mode),
                None,
                len(d1),
                len(d0),
                0,
                epsilon=config.epsilon,
            )
        else:
            baseline = baseline_table
        counts_d1 = token_counts(d1)
        kept_phrases = None
    timings["baseline"] = time.perf_counter() - t0

    records: list[IterationRecord] = []
    current = d1
    halt_reason: Optional[str] = None
    prev_relevant: Optional[int] = None
    base_seed = config.lda.seed

    for i in range(1, config.max_iterations + 1):
        if len(current) < config.k:
            halt_reason = HALT_SMALL_CORPUS
            logger.warning(
                "iteration %d: corpus size %d below k=%d; stopping with partial results",
                i,
                len(current),
                config.k,
            )
            break

        t0 = time.perf_counter()
        lda_cfg = LdaConfig(
            k=config.lda.k,
            alpha=config.lda.alpha,
            beta=config.lda.beta,
            iterations=config.lda.iterations,
            seed=_iteration_seed(base_seed, i),
            top_words=config.lda.top_words,
        )
        model = fit(current, lda_cfg)
        timings[f"iter{i}.lda"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        if i == 1:
            table = baseline
        else:
            if config.use_concepts:
                counts_cur = count_triggers(current, kept_phrases)
            else:
                counts_cur = token_counts(current)
            table = iterative_relevance(
                i,
                _pick(counts_d1, config.count_mode),
                None,
                _pick(counts_cur, config.count_mode),
                len(d1),
                0,
                len(current),
                epsilon=config.epsilon,
            )
        if config.use_concepts:
            doc_phrases = [[m.phrase for m in doc.concepts] for doc in current.documents]
        else:
            doc_phrases = [doc.tokens for doc in current.documents]
        scores = score_topics(model.doc_topic, doc_phrases, table)
        score_set = threshold_topics(scores, config.tau)
        timings[f"iter{i}.score"] = time.perf_counter() - t0

        if (
            prev_relevant is not None
            and score_set.size > config.stop_growth_factor * prev_relevant
        ):
            halt_reason = HALT_TOPIC_GROWTH
            records.append(
                IterationRecord(
                    iteration=i,
                    size=len(current),
                    model=model,
                    score_set=score_set,
                    table=table,
                    retained_ids=None,
                )
            )
            logger.warning(
                "iteration %d: relevant topics grew %d -> %d (> %.3g x); stopping before filtering",
                i,
                prev_relevant,
                score_set.size,
                config.stop_growth_factor,
            )
            break

        t0 = time.perf_counter()
        retained_idx = filter_documents(model.doc_topic, score_set)
        retained_ids = [current.documents[m].id for m in sorted(retained_idx)]
        timings[f"iter{i}.filter"] = time.perf_counter() - t0
        records.append(
            IterationRecord(
                iteration=i,
                size=len(current),
                model=model,
                score_set=score_set,
                table=table,
                retained_ids=retained_ids,
            )
        )
        logger.info(
            "iteration %d: %d topics relevant, %d of %d documents retained",
            i,
            score_set.size,
            len(retained_ids),
            len(current),
        )
        current = subset(current, retained_ids, label=f"D{i + 1}")
        prev_relevant = score_set.size

    return PipelineResult(
        config=config,
        d0_size=len(d0),
        d1=d1,
        records=records,
        final=current,
        baseline=baseline,
        kept_lexicon=kept_lexicon,
        halt_reason=halt_reason,
        timings=timings,
    )


@dataclass
class WindowSpec:
    """Sliding calendar windows: UTC-midnight aligned, half-open intervals."""

    length_days: int = 14
    stride_days: int = 7
    rounds: int = 2
    start: Optional[datetime] = None

    def __post_init__(self):
        if self.length_days < 1 or self.stride_days < 1:
            raise ValueError("window length and stride must be at least 1 day")
        if self.stride_days > self.length_days:
            raise ValueError("stride larger than window length leaves gaps")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")


def _floor_utc_day(ts: datetime) -> datetime:
    ts = ts.astimezone(timezone.utc)
    return ts.replace(hour=0, minute=0, second=0, microsecond=0)


def compute_windows(spec: WindowSpec, corpus: Corpus) -> list[tuple[datetime, datetime]]:
    """All full-length windows covering the corpus span; at least one window.

    The span runs from the (given or earliest-document) start day to the
    midnight after the latest document. Documents on a boundary belong to
    the later window.
    """
    if len(corpus) == 0:
        return []
    stamps = [doc.created_at.astimezone(timezone.utc) for doc in corpus.documents]
    start0 = _floor_utc_day(spec.start) if spec.start is not None else _floor_utc_day(min(stamps))
    end_boundary = _floor_utc_day(max(stamps)) + timedelta(days=1)
    span_days = (end_boundary - start0).days
    n = max(1, (span_days - spec.length_days) // spec.stride_days + 1)
    out = []
    for j in range(n):
        w_start = start0 + timedelta(days=j * spec.stride_days)
        out.append((w_start, w_start + timedelta(days=spec.length_days)))
    return out


def slice_window(corpus: Corpus, start: datetime, end: datetime, label: str = "") -> Corpus:
    ids = [
        doc.id
        for doc in corpus.documents
        if start <= doc.created_at.astimezone(timezone.utc) < end
    ]
    return subset(corpus, ids, label=label)


@dataclass
class WindowRun:
    index: int
    start: datetime
    end: datetime
    size: int
    result: Optional[PipelineResult]
    skipped_reason: Optional[str] = None


def _window_seed(base: int, index: int) -> int:
    return base + (index + 1) * 1_000_003


def _window_config(config: PipelineConfig, spec: WindowSpec, index: int) -> PipelineConfig:
    lda_cfg = LdaConfig(
        k=config.lda.k,
        alpha=config.lda.alpha,
        beta=config.lda.beta,
        iterations=config.lda.iterations,
        seed=_window_seed(config.lda.seed, index),
        top_words=config.lda.top_words,
    )
    return replace(config, max_iterations=spec.rounds, lda=lda_cfg)


def _run_window_task(args) -> tuple[int, PipelineResult]:
    index, corpus, config, lexicon, baseline = args
    return index, run(corpus, config, lexicon, baseline_table=baseline)


def run_windows(
    d0: Corpus,
    spec: WindowSpec,
    config: PipelineConfig,
    lexicon: Optional[Sequence[LexiconEntry]] = None,
    global_baseline: bool = False,
    jobs: int = 1,
) -> list[WindowRun]:
    """Run the pipeline independently inside each sliding window.

    Each window is self-contained: its own author filter, relevance
    baseline, and topic models (seeded per window index). With
    `global_baseline` the whole-corpus first-iteration relevance table is
    shared by every window instead.
    """
    windows = compute_windows(spec, d0)
    baseline = None
    if global_baseline and windows:
        patterns = config.patterns if config.patterns is not None else default_patterns()
        d1_full = filter_hcp(d0, patterns, label="D1")
        if len(d1_full) == 0:
            raise PipelineError(HALT_EMPTY_FILTER)
        if config.use_concepts:
            phrases = sorted({entry.phrase for entry in lexicon})
            c1 = count_triggers(d1_full, phrases)
            c0 = count_triggers(d0, phrases)
        else:
            c1 = token_counts(d1_full)
            c0 = token_counts(d0)
        baseline = iterative_relevance(
            1,
            _pick(c1, config.count_mode),
            _pick(c0, config.count_mode),
            None,
            len(d1_full),
            len(d0),
            0,
            epsilon=config.epsilon,
        )

    runs: list[WindowRun] = []
    tasks = []
    for j, (w_start, w_end) in enumerate(windows):
        sliced = slice_window(d0, w_start, w_end, label=f"W{j}")
        if len(sliced) == 0:
            logger.warning("window %d [%s, %s): empty; skipped", j, w_start.date(), w_end.date())
            runs.append(WindowRun(j, w_start, w_end, 0, None, skipped_reason="empty window"))
            continue
        runs.append(WindowRun(j, w_start, w_end, len(sliced), None))
        tasks.append((j, sliced, _window_config(config, spec, j), lexicon, baseline))

    by_index = {}
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for index, result in pool.map(_run_window_task, tasks):
                by_index[index] = result
    else:
        for task in tasks:
            index, result = _run_window_task(task)
            by_index[index] = result
    for wr in runs:
        if wr.index in by_index:
            wr.result = by_index[wr.index]
    return runs


def write_run_dir(
    result: PipelineResult,
    outdir,
    manifest: Optional[dict] = None,
    timings: Optional[dict] = None,
) -> None:
    """Materialize one run: manifest, per-iteration artifacts, corpora.

    Everything except timings.json is a pure function of (inputs, config,
    seed); re-running the same configuration reproduces identical bytes.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if manifest is not None:
        _write_json(outdir / "manifest.json", manifest)
    if timings is not None:
        _write_json(outdir / "timings.json", timings)
    for rec in result.records:
        it_dir = outdir / f"iter{rec.iteration}"
        it_dir.mkdir(parents=True, exist_ok=True)
        save_model(rec.model, it_dir / "model.bin")
        write_topic_scores_csv(rec.score_set, it_dir / "topic_scores.csv")
        write_relevance_csv(rec.table, it_dir / "relevance.csv")
        if rec.retained_ids is not None:
            with open(it_dir / "retained_ids.txt", "w", encoding="utf-8") as fh:
                for doc_id in rec.retained_ids:
                    fh.write(doc_id + "\n")
    write_documents_jsonl(result.d1, outdir / "d1_corpus.jsonl")
    write_documents_jsonl(result.final, outdir / "final_corpus.jsonl")


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


@dataclass
class RunArtifacts:
    """Lazy view of an on-disk run directory."""

    path: Path
    manifest: dict

    def iteration_dirs(self) -> list[tuple[int, Path]]:
        out = []
        for child in sorted(self.path.iterdir()):
            if child.is_dir() and child.name.startswith("iter"):
                try:
                    out.append((int(child.name[4:]), child))
                except ValueError:
                    continue
        out.sort()
        return out

    def retained_ids(self, iteration: int) -> Optional[list[str]]:
        path = self.path / f"iter{iteration}" / "retained_ids.txt"
        if not path.exists():
            return None
        return [line.rstrip("\n") for line in path.read_text(encoding="utf-8").splitlines()]

    def topic_scores(self, iteration: int) -> list[tuple[int, float, bool]]:
        path = self.path / f"iter{iteration}" / "topic_scores.csv"
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                rows.append((int(row[0]), float(row[1]), row[2] == "True"))
        return rows


def read_run_dir(path) -> RunArtifacts:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{path} is not a run directory (no manifest.json)")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    return RunArtifacts(path=path, manifest=manifest)
