"""Run evaluation analytics: concept coverage, n-gram enrichment, category
preservation, and keyword timelines."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml

from .concepts import TriggerMatcher
from .corpus import Corpus
from .lda import TopicModel
from .relevance import DEFAULT_EPSILON, RelevanceTable, relevance

logger = logging.getLogger(__name__)


def concept_fraction(model: TopicModel, matcher: TriggerMatcher, top_n: int = 10) -> float:
    """Fraction of the model's top-word slots that are single-token triggers."""
    single = matcher.single_tokens
    slots = 0
    hits = 0
    for words in model.top_words:
        for token, _weight in words[:top_n]:
            slots += 1
            if token in single:
                hits += 1
    if slots == 0:
        raise ValueError("model has no top words")
    return hits / slots


def _ngram_counts(corpus: Corpus, max_n: int) -> dict[str, tuple[int, int]]:
    occ: dict[str, int] = {}
    docs: dict[str, int] = {}
    for doc in corpus.documents:
        toks = doc.tokens
        seen: set[str] = set()
        for n in range(1, max_n + 1):
            for i in range(len(toks) - n + 1):
                gram = " ".join(toks[i : i + n])
                occ[gram] = occ.get(gram, 0) + 1
                seen.add(gram)
        for gram in seen:
            docs[gram] = docs.get(gram, 0) + 1
    return {g: (occ[g], docs[g]) for g in occ}


@dataclass
class EnrichmentResult:
    """All qualifying n-grams ranked by relevance, most enriched first."""

    ranked: list[tuple[str, float]]
    counts_filtered: dict[str, int]
    counts_reference: dict[str, int]

    def top(self, n: int) -> list[tuple[str, float]]:
        return self.ranked[:n]

    def bottom(self, n: int) -> list[tuple[str, float]]:
        return self.ranked[-n:][::-1] if self.ranked else []


def enrichment_table(
    filtered: Corpus,
    reference: Corpus,
    max_n: int = 3,
    min_count: int = 5,
    epsilon: float = DEFAULT_EPSILON,
    count_mode: str = "occurrences",
) -> EnrichmentResult:
    """Relevance of every 1..max_n-gram in the filtered corpus against its
    reference superset; n-grams below min_count reference occurrences drop."""
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    filtered_set = filtered.id_set()
    if not filtered_set <= reference.id_set():
        raise ValueError("filtered corpus is not a subset of the reference corpus")
    idx = 0 if count_mode == "occurrences" else 1
    counts_f = _ngram_counts(filtered, max_n)
    counts_r = _ngram_counts(reference, max_n)
    keep = {g for g, pair in counts_r.items() if pair[0] >= min_count}
    table = relevance(
        {g: pair[idx] for g, pair in counts_f.items() if g in keep},
        {g: pair[idx] for g, pair in counts_r.items() if g in keep},
        len(filtered),
        len(reference),
        epsilon=epsilon,
        focus_label=filtered.label or "filtered",
        background_label=reference.label or "reference",
    )
    ranked = sorted(table.scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return EnrichmentResult(
        ranked=ranked,
        counts_filtered={g: counts_f.get(g, (0, 0))[idx] for g in keep},
        counts_reference={g: counts_r[g][idx] for g in keep},
    )


@dataclass(frozen=True)
class CategorySpec:
    name: str
    keywords: tuple[str, ...]
    expected: str  # "relevant" or "irrelevant"

    def __post_init__(self):
        if len(self.keywords) < 2:
            raise ValueError(f"category {self.name!r} needs at least 2 keywords")
        if self.expected not in ("relevant", "irrelevant"):
            raise ValueError(f"category {self.name!r}: expected must be relevant|irrelevant")


def load_categories(path) -> list[CategorySpec]:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, list) or not raw:
        raise ValueError(f"{path}: expected a non-empty list of categories")
    out = []
    for item in raw:
        out.append(
            CategorySpec(
                name=str(item["name"]),
                keywords=tuple(str(k) for k in item["keywords"]),
                expected=str(item["expected"]),
            )
        )
    return out


def _phrase_in_tokens(tokens: Sequence[str], phrase: tuple[str, ...]) -> bool:
    span = len(phrase)
    if span == 0 or span > len(tokens):
        return False
    for i in range(len(tokens) - span + 1):
        if tuple(tokens[i : i + span]) == phrase:
            return True
    return False


def in_category(tokens: Sequence[str], category: CategorySpec) -> bool:
    """Membership needs at least two distinct keywords present."""
    found = 0
    for kw in category.keywords:
        if _phrase_in_tokens(tokens, tuple(kw.split())):
            found += 1
            if found >= 2:
                return True
    return False


def category_preservation(
    d1: Corpus,
    retained_per_iteration: Sequence[Optional[Sequence[str]]],
    categories: Sequence[CategorySpec],
) -> dict[str, list[Optional[float]]]:
    """Per category, the fraction of its first-stage members surviving each
    iteration. Categories empty in the first stage yield None throughout."""
    members: dict[str, set[str]] = {}
    for cat in categories:
        members[cat.name] = {doc.id for doc in d1.documents if in_category(doc.tokens, cat)}
    out: dict[str, list[Optional[float]]] = {cat.name: [] for cat in categories}
    for retained in retained_per_iteration:
        retained_set = set(retained) if retained is not None else None
        for cat in categories:
            base = members[cat.name]
            if not base or retained_set is None:
                out[cat.name].append(None)
            else:
                out[cat.name].append(len(base & retained_set) / len(base))
    return out


@dataclass
class TimelinePoint:
    day: date
    count: int
    moving_avg: float
    in_topic_model: bool


@dataclass
class WindowDigest:
    """What the timeline needs from one window's final model."""

    start: datetime
    end: datetime
    relevant_top_words: list[list[str]] = field(default_factory=list)


def keyword_timeline(
    corpus: Corpus,
    windows: Sequence[WindowDigest],
    patterns: Sequence[str],
    moving_avg_days: int = 7,
) -> tuple[list[TimelinePoint], Optional[date]]:
    """Daily counts of documents with a token matching any pattern, plus a
    trailing moving average (always divided by the window length) and a flag
    for days inside windows whose relevant topics surfaced the keyword.

    Returns ([], None) when nothing matches.
    """
    compiled = [re.compile(p) for p in patterns]
    if not compiled:
        raise ValueError("at least one token pattern is required")

    def _matches(token: str) -> bool:
        return any(rx.fullmatch(token) for rx in compiled)

    daily: dict[date, int] = {}
    for doc in corpus.documents:
        if any(_matches(tok) for tok in doc.tokens):
            day = doc.created_at.astimezone(timezone.utc).date()
            daily[day] = daily.get(day, 0) + 1
    if not daily:
        return [], None

    flagged_windows = []
    for win in windows:
        words = [w for topic in win.relevant_top_words for w in topic]
        if any(_matches(w) for w in words):
            flagged_windows.append((win.start.date(), win.end.date()))

    all_days = sorted(
        doc.created_at.astimezone(timezone.utc).date() for doc in corpus.documents
    )
    first, last = all_days[0], all_days[-1]
    points = []
    day = first
    while day <= last:
        window_sum = 0
        for back in range(moving_avg_days):
            window_sum += daily.get(day - timedelta(days=back), 0)
        flagged = any(w_start <= day < w_end for w_start, w_end in flagged_windows)
        points.append(
            TimelinePoint(
                day=day,
                count=daily.get(day, 0),
                moving_avg=window_sum / moving_avg_days,
                in_topic_model=flagged,
            )
        )
        day += timedelta(days=1)
    first_mention = min(daily)
    return points, first_mention


def topics_digest(model: TopicModel, score_set) -> list[dict]:
    """Rank-ordered topic summary for external plotting."""
    order = sorted(
        range(score_set.scores.size), key=lambda t: (-float(score_set.scores[t]), t)
    )
    out = []
    for rank, t in enumerate(order, start=1):
        out.append(
            {
                "topic": t,
                "rank": rank,
                "score": float(score_set.scores[t]),
                "relevant": t in score_set.relevant,
                "top_words": [[w, p] for w, p in model.top_words[t]],
            }
        )
    return out


def write_enrichment_csv(result: EnrichmentResult, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "phrase", "n", "count_filtered", "count_reference", "rel"])
        for rank, (phrase, score) in enumerate(result.ranked, start=1):
            writer.writerow(
                [
                    rank,
                    phrase,
                    phrase.count(" ") + 1,
                    result.counts_filtered.get(phrase, 0),
                    result.counts_reference.get(phrase, 0),
                    repr(score),
                ]
            )


def write_categories_csv(
    fractions: dict[str, list[Optional[float]]],
    categories: Sequence[CategorySpec],
    path,
) -> None:
    expected = {cat.name: cat.expected for cat in categories}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "expected", "iteration", "retained_fraction"])
        for name in sorted(fractions):
            for i, frac in enumerate(fractions[name], start=1):
                writer.writerow(
                    [name, expected.get(name, ""), i, "" if frac is None else repr(frac)]
                )


def write_timeline_csv(points: Sequence[TimelinePoint], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "count", "moving_avg", "in_topic_model"])
        for pt in points:
            writer.writerow([pt.day.isoformat(), pt.count, repr(pt.moving_avg), pt.in_topic_model])
