"""Lexicon-driven concept annotation.

Triggers are token sequences (already normalized, the same way document
tokens are). Matching is greedy: scan left to right, prefer the longest
trigger starting at each position, never overlap spans.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Iterator, Optional, Sequence

from .corpus import Corpus, Document

logger = logging.getLogger(__name__)

DEFAULT_MIN_TOKENS = 4  # shorter documents carry too little context to annotate


@dataclass(frozen=True)
class LexiconEntry:
    trigger: tuple[str, ...]
    cui: str
    preferred_name: str
    semantic_types: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.trigger or any(not t for t in self.trigger):
            raise ValueError(f"lexicon entry {self.cui!r} has an empty trigger token")

    @property
    def phrase(self) -> str:
        return " ".join(self.trigger)


@dataclass(frozen=True)
class ConceptMention:
    """One non-overlapping trigger hit inside a document, span [start, end)."""

    entry: LexiconEntry
    start: int
    end: int

    @property
    def phrase(self) -> str:
        return self.entry.phrase


class _Node:
    __slots__ = ("children", "entry")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.entry: Optional[LexiconEntry] = None


class TriggerMatcher:
    """Token trie over all trigger phrases; one shared pass matches everything.

    When several entries share a trigger phrase the lowest CUI wins mention
    emission, so annotation spans never overlap and stay deterministic.
    """

    def __init__(self, lexicon: Iterable[LexiconEntry]):
        self._root = _Node()
        self.max_len = 0
        self.entries: list[LexiconEntry] = []
        seen: set[tuple[tuple[str, ...], str]] = set()
        for entry in lexicon:
            key = (entry.trigger, entry.cui)
            if key in seen:
                raise ValueError(f"duplicate lexicon entry: {entry.phrase!r} / {entry.cui}")
            seen.add(key)
            self.entries.append(entry)
            node = self._root
            for tok in entry.trigger:
                node = node.children.setdefault(tok, _Node())
            if node.entry is None or entry.cui < node.entry.cui:
                node.entry = entry
            self.max_len = max(self.max_len, len(entry.trigger))
        self.phrases: frozenset[str] = frozenset(e.phrase for e in self.entries)
        self.single_tokens: frozenset[str] = frozenset(
            e.trigger[0] for e in self.entries if len(e.trigger) == 1
        )

    @classmethod
    def from_phrases(cls, phrases: Iterable[str]) -> "TriggerMatcher":
        entries = []
        for ph in sorted(set(phrases)):
            toks = tuple(ph.split())
            if toks:
                entries.append(LexiconEntry(trigger=toks, cui="", preferred_name=ph))
        return cls(entries)

    def find(self, tokens: Sequence[str]) -> list[ConceptMention]:
        """All mentions in one left-to-right greedy longest-match pass."""
        out = []
        i = 0
        n = len(tokens)
        while i < n:
            node = self._root
            best_end = -1
            best_entry = None
            j = i
            limit = min(n, i + self.max_len)
            while j < limit:
                node = node.children.get(tokens[j])
                if node is None:
                    break
                j += 1
                if node.entry is not None:
                    best_end = j
                    best_entry = node.entry
            if best_entry is not None:
                out.append(ConceptMention(entry=best_entry, start=i, end=best_end))
                i = best_end
            else:
                i += 1
        return out


def build_matcher(lexicon: Iterable[LexiconEntry]) -> TriggerMatcher:
    return TriggerMatcher(lexicon)


def annotate(doc: Document, matcher: TriggerMatcher, min_tokens: int = DEFAULT_MIN_TOKENS) -> Document:
    """Copy of `doc` with concept mentions filled; short docs get none."""
    if len(doc.tokens) < min_tokens:
        return replace(doc, concepts=[])
    return replace(doc, concepts=matcher.find(doc.tokens))


def annotate_corpus(
    corpus: Corpus, matcher: TriggerMatcher, min_tokens: int = DEFAULT_MIN_TOKENS
) -> Corpus:
    docs = [annotate(doc, matcher, min_tokens=min_tokens) for doc in corpus.documents]
    return Corpus(docs, label=corpus.label)


def count_triggers(corpus: Corpus, phrases: Iterable[str]) -> dict[str, tuple[int, int]]:
    """phrase -> (occurrences, containing documents) under non-overlapping matching.

    Every requested phrase is present in the result, absent ones as (0, 0).
    The short-document rule does not apply here: counts feed corpus-level
    frequency ratios, not per-document annotations.
    """
    phrases = sorted(set(phrases))
    matcher = TriggerMatcher.from_phrases(phrases)
    occ = {ph: 0 for ph in phrases}
    docs = {ph: 0 for ph in phrases}
    for doc in corpus.documents:
        seen: set[str] = set()
        for mention in matcher.find(doc.tokens):
            occ[mention.phrase] += 1
            seen.add(mention.phrase)
        for ph in seen:
            docs[ph] += 1
    return {ph: (occ[ph], docs[ph]) for ph in phrases}


def read_lexicon(path) -> list[LexiconEntry]:
    """TSV: trigger_phrase <TAB> cui <TAB> preferred_name <TAB> semtype;semtype."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            phrase, cui, name, semtypes = parts
            toks = tuple(phrase.split())
            if not toks:
                raise ValueError(f"{path}:{lineno}: empty trigger phrase")
            out.append(
                LexiconEntry(
                    trigger=toks,
                    cui=cui.strip(),
                    preferred_name=name.strip(),
                    semantic_types=frozenset(s for s in semtypes.strip().split(";") if s),
                )
            )
    if not out:
        raise ValueError(f"no lexicon entries in {path}")
    return out


def default_lexicon() -> list[LexiconEntry]:
    return read_lexicon(resources.files("clinsift").joinpath("data/demo_lexicon.tsv"))
