"""Relevance scoring: phrase frequency ratios, topic scores, thresholds.

A phrase's relevance compares its rate in a focus corpus A against its rate
in the complement B \\ A of a background corpus B that contains A. Topic
scores average phrase relevance under the topic's document weights; a
relative threshold between the lowest and highest topic score selects the
relevant topic set, and documents are kept when they allocate at least r/k
of their mass to it.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .concepts import LexiconEntry

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-4

# slack for comparing a float sum of topic masses against the exact ratio r/k
MASS_TOLERANCE = 1e-12


@dataclass
class RelevanceTable:
    """phrase -> relevance ratio, with the corpus pair it was computed from.

    Phrases absent from the table score 1.0 (the indifference value: equal
    rates in focus and complement).
    """

    scores: dict[str, float]
    focus_label: str = "A"
    background_label: str = "B"
    epsilon: float = DEFAULT_EPSILON

    def score(self, phrase: str) -> float:
        return self.scores.get(phrase, 1.0)

    def __len__(self) -> int:
        return len(self.scores)


def relevance(
    counts_focus: Mapping[str, int],
    counts_background: Mapping[str, int],
    size_focus: int,
    size_background: int,
    epsilon: float = DEFAULT_EPSILON,
    focus_label: str = "A",
    background_label: str = "B",
) -> RelevanceTable:
    """Smoothed rate ratio for every phrase in either count table.

    counts_background must count the whole background corpus (which contains
    the focus corpus); the complement rate is derived by subtraction. When
    the two corpora coincide the complement is empty and contributes rate 0,
    so every observed phrase scores above 1.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if size_focus < 1:
        raise ValueError("focus corpus must be non-empty")
    if size_background < size_focus:
        raise ValueError("background corpus smaller than focus corpus")
    rest = size_background - size_focus
    scores: dict[str, float] = {}
    for phrase in set(counts_focus) | set(counts_background):
        f_a = counts_focus.get(phrase, 0)
        f_b = counts_background.get(phrase, 0)
        if f_a < 0 or f_b < 0:
            raise ValueError(f"negative count for {phrase!r}")
        if f_a > f_b:
            raise ValueError(
                f"count containment violated for {phrase!r}: focus {f_a} > background {f_b}"
            )
        rate_rest = (f_b - f_a) / rest if rest > 0 else 0.0
        scores[phrase] = (f_a / size_focus + epsilon) / (rate_rest + epsilon)
    return RelevanceTable(
        scores=scores,
        focus_label=focus_label,
        background_label=background_label,
        epsilon=epsilon,
    )


def iterative_relevance(
    iteration: int,
    counts_first: Optional[Mapping[str, int]],
    counts_full: Optional[Mapping[str, int]],
    counts_current: Optional[Mapping[str, int]],
    size_first: int,
    size_full: int,
    size_current: int,
    epsilon: float = DEFAULT_EPSILON,
) -> RelevanceTable:
    """Relevance for iteration i: the first filtered corpus scored against the
    full corpus when i == 1, later corpora scored against the first filtered
    corpus (held fixed as the baseline) when i > 1."""
    if iteration < 1:
        raise ValueError("iteration must be >= 1")
    if iteration == 1:
        if counts_first is None or counts_full is None:
            raise ValueError("iteration 1 needs counts for the first and full corpora")
        return relevance(
            counts_first, counts_full, size_first, size_full, epsilon, "D1", "D0"
        )
    if counts_current is None or counts_first is None:
        raise ValueError("iterations beyond 1 need counts for the current and first corpora")
    return relevance(
        counts_current, counts_first, size_current, size_first, epsilon, f"D{iteration}", "D1"
    )


def prefilter_concepts(lexicon: Sequence[LexiconEntry], table: RelevanceTable) -> list[LexiconEntry]:
    """Drop lexicon entries whose baseline relevance falls below 1 (strict)."""
    kept = [entry for entry in lexicon if table.score(entry.phrase) >= 1.0]
    logger.info("prefilter: kept %d of %d lexicon entries", len(kept), len(lexicon))
    return kept


def score_topics(
    doc_topic: np.ndarray,
    doc_phrases: Sequence[Sequence[str]],
    table: RelevanceTable,
) -> np.ndarray:
    """Weighted mean phrase relevance per topic.

    doc_phrases[m] lists the scored phrases of document m with multiplicity:
    repeated mentions count repeatedly. Documents without phrases contribute
    their topic weight to the denominator only.
    """
    k, m = doc_topic.shape
    if len(doc_phrases) != m:
        raise ValueError(f"doc_phrases length {len(doc_phrases)} != {m} documents")
    rel_sums = np.zeros(m, dtype=np.float64)
    for idx, phrases in enumerate(doc_phrases):
        total = 0.0
        for phrase in phrases:
            total += table.score(phrase)
        rel_sums[idx] = total
    numer = doc_topic @ rel_sums
    denom = doc_topic.sum(axis=1)
    zero = denom <= 0.0
    if zero.any():
        logger.warning("score_topics: %d topic(s) carry zero document mass", int(zero.sum()))
    out = np.zeros(k, dtype=np.float64)
    np.divide(numer, denom, out=out, where=~zero)
    return out


@dataclass
class TopicScoreSet:
    """Topic scores plus the relative-threshold selection made from them."""

    scores: np.ndarray
    tau: float
    cutoff: float
    relevant: frozenset[int]

    @property
    def score_min(self) -> float:
        return float(self.scores.min())

    @property
    def score_max(self) -> float:
        return float(self.scores.max())

    @property
    def size(self) -> int:
        return len(self.relevant)


def threshold_topics(scores: np.ndarray, tau: float) -> TopicScoreSet:
    """Select topics scoring at least min + (max - min) * tau.

    tau=0 keeps every topic, tau=1 keeps exactly the argmax set; the top
    topic always survives. All-equal scores keep everything (flagged).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a non-empty vector")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    s_min = float(scores.min())
    s_max = float(scores.max())
    # clamp: the exact cutoff never exceeds the max, but float rounding might
    cutoff = min(s_min + (s_max - s_min) * tau, s_max)
    relevant = frozenset(int(t) for t in np.flatnonzero(scores >= cutoff))
    if s_min == s_max:
        logger.warning("threshold_topics: all %d topic scores equal; keeping all", scores.size)
    return TopicScoreSet(scores=scores, tau=tau, cutoff=cutoff, relevant=relevant)


def filter_documents(doc_topic: np.ndarray, topic_set: TopicScoreSet) -> set[int]:
    """Indices of documents whose mass on the relevant topics reaches r/k."""
    k = doc_topic.shape[0]
    if not topic_set.relevant:
        raise ValueError("relevant topic set is empty")
    idx = sorted(topic_set.relevant)
    if idx[-1] >= k or idx[0] < 0:
        raise ValueError("relevant topic index out of range for doc_topic")
    mass = doc_topic[idx, :].sum(axis=0)
    threshold = len(idx) / k
    return {int(m) for m in np.flatnonzero(mass >= threshold - MASS_TOLERANCE)}


def write_relevance_csv(table: RelevanceTable, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phrase", "rel"])
        for phrase in sorted(table.scores):
            writer.writerow([phrase, repr(table.scores[phrase])])


def read_relevance_csv(path) -> RelevanceTable:
    scores = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["phrase", "rel"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            scores[row[0]] = float(row[1])
    return RelevanceTable(scores=scores)


def write_topic_scores_csv(score_set: TopicScoreSet, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["topic_id", "score", "relevant"])
        for t in range(score_set.scores.size):
            writer.writerow([t, repr(float(score_set.scores[t])), t in score_set.relevant])
