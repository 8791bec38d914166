"""Corpus containers, JSONL ingestion, and text normalization.

A corpus moves through three shapes: raw records straight off disk, the
same records wrapped in un-tokenized Documents after ingest, and fully
normalized Documents after preprocessing. Downstream stages only ever see
the last shape.
"""

from __future__ import annotations

import html
import json
import logging
import re
import unicodedata
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Iterator, Optional, Sequence

if TYPE_CHECKING:
    from .concepts import ConceptMention

logger = logging.getLogger(__name__)

DEFAULT_QUERY_TERMS = frozenset({"coronavirus", "covid", "covid19", "2019ncov"})

# BMP codepoint blocks stripped as emoji/pictographs; anything above the BMP
# is always stripped regardless of this list.
DEFAULT_EMOJI_BLOCKS: tuple[tuple[int, int], ...] = (
    (0x200D, 0x200D),  # zero-width joiner
    (0x20E3, 0x20E3),  # combining enclosing keycap
    (0x2600, 0x26FF),  # miscellaneous symbols
    (0x2700, 0x27BF),  # dingbats
    (0x2B00, 0x2BFF),  # misc symbols and arrows
    (0xFE00, 0xFE0F),  # variation selectors
)

_TAG_RE = re.compile(r"<[^<>]{0,200}>")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
# word characters minus underscore; '#tag' and '@user' lose the marker, keep the word
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# specific forms first, then generic clitic suffixes
_CONTRACTIONS: tuple[tuple[re.Pattern, str], ...] = (
    (re.compile(r"\bcan't\b"), "can not"),
    (re.compile(r"\bwon't\b"), "will not"),
    (re.compile(r"\bshan't\b"), "shall not"),
    (re.compile(r"\bain't\b"), "is not"),
    (re.compile(r"\blet's\b"), "let us"),
    (re.compile(r"n't\b"), " not"),
    (re.compile(r"'re\b"), " are"),
    (re.compile(r"'ve\b"), " have"),
    (re.compile(r"'ll\b"), " will"),
    (re.compile(r"'m\b"), " am"),
    (re.compile(r"'d\b"), " would"),
    (re.compile(r"'s\b"), ""),
)


def _data_path(name: str):
    return resources.files("clinsift").joinpath("data").joinpath(name)


class Lemmatizer:
    """Lookup-table lemmatizer with a conservative suffix-stripping fallback.

    Idempotent by construction: table values are resolved to fixed points at
    load time (chains followed, identity entries added) and every fallback
    rule emits a token no rule can rewrite again.
    """

    def __init__(self, table: Optional[dict[str, str]] = None):
        self.table: dict[str, str] = dict(table) if table else {}
        self._resolve_table()

    def _resolve_table(self) -> None:
        for key in list(self.table):
            seen = {key}
            value = self.table[key]
            while value in self.table and self.table[value] != value:
                if value in seen:
                    raise ValueError(f"lemma table contains a cycle through {value!r}")
                seen.add(value)
                value = self.table[value]
            self.table[key] = value
            # pin the value so suffix rules never touch it on a second pass
            self.table.setdefault(value, value)

    def __call__(self, token: str) -> str:
        hit = self.table.get(token)
        if hit is not None:
            return hit
        return _strip_suffix(token)

    @classmethod
    def from_file(cls, path) -> "Lemmatizer":
        table = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise ValueError(f"bad lemma line (want 'form lemma'): {line!r}")
                table[parts[0]] = parts[1]
        return cls(table)

    @classmethod
    def default(cls) -> "Lemmatizer":
        return cls.from_file(_data_path("lemmas_en.txt"))


def _strip_suffix(token: str) -> str:
    # single application; every output is a fixed point of these rules
    if len(token) > 4 and token.endswith("ies"):
        return token[:-3] + "y"
    if len(token) > 4 and token.endswith("sses"):
        return token[:-2]
    if len(token) > 3 and token.endswith(("xes", "zes", "ches", "shes")):
        return token[:-2]
    if len(token) > 3 and token.endswith("s") and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    return token


def load_stopwords(path=None) -> frozenset[str]:
    src = path if path is not None else _data_path("stopwords_en.txt")
    words = set()
    with open(src, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)


class TextNormalizer:
    """Bundles the full normalization chain applied to every raw text."""

    def __init__(
        self,
        stopwords: Optional[Iterable[str]] = None,
        query_terms: Optional[Iterable[str]] = None,
        lemmatizer: Optional[Lemmatizer] = None,
        emoji_blocks: Sequence[tuple[int, int]] = DEFAULT_EMOJI_BLOCKS,
    ):
        self.stopwords = frozenset(stopwords) if stopwords is not None else load_stopwords()
        self.query_terms = frozenset(query_terms) if query_terms is not None else DEFAULT_QUERY_TERMS
        self.lemmatizer = lemmatizer if lemmatizer is not None else Lemmatizer.default()
        self.emoji_blocks = tuple(emoji_blocks)

    def _keep_char(self, ch: str) -> bool:
        cp = ord(ch)
        if cp > 0xFFFF:
            return False
        for lo, hi in self.emoji_blocks:
            if lo <= cp <= hi:
                return False
        return True

    def tokenize(self, text: str) -> list[str]:
        text = unicodedata.normalize("NFC", text)
        text = html.unescape(text)
        text = _TAG_RE.sub(" ", text)
        text = _URL_RE.sub(" ", text)
        text = text.lower().replace("’", "'")
        for pattern, repl in _CONTRACTIONS:
            text = pattern.sub(repl, text)
        text = "".join(ch for ch in text if self._keep_char(ch))
        out = []
        for raw in _TOKEN_RE.findall(text):
            lemma = self.lemmatizer(raw)
            if lemma and lemma not in self.stopwords and lemma not in self.query_terms:
                out.append(lemma)
        return out


@dataclass
class RawRecord:
    """One line of the external feed: text plus author metadata."""

    id: str
    text: str
    author_name: str = ""
    author_handle: str = ""
    author_bio: str = ""
    created_at: datetime = datetime(1970, 1, 1, tzinfo=timezone.utc)
    thread_id: Optional[str] = None


@dataclass
class Document:
    """A normalized document; `concepts` stays empty until annotation."""

    id: str
    tokens: list[str]
    raw_text: str = ""
    author_ref: str = ""
    created_at: datetime = datetime(1970, 1, 1, tzinfo=timezone.utc)
    concepts: list["ConceptMention"] = field(default_factory=list)
    record: Optional[RawRecord] = None


class Corpus:
    """Ordered, id-unique collection of Documents with a derived vocabulary.

    The vocabulary maps token -> integer id in first-appearance order, so a
    corpus with identical documents in identical order always produces the
    same ids.
    """

    def __init__(self, documents: Iterable[Document], label: str = ""):
        self.documents: list[Document] = list(documents)
        self.label = label
        seen: set[str] = set()
        for doc in self.documents:
            if not doc.id:
                raise ValueError("document with empty id")
            if doc.id in seen:
                raise ValueError(f"duplicate document id: {doc.id!r}")
            seen.add(doc.id)
        self._id_index = {doc.id: idx for idx, doc in enumerate(self.documents)}
        vocab: dict[str, int] = {}
        for doc in self.documents:
            for tok in doc.tokens:
                if tok not in vocab:
                    vocab[tok] = len(vocab)
        self.vocab = vocab

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __getitem__(self, idx: int) -> Document:
        return self.documents[idx]

    def ids(self) -> list[str]:
        return [doc.id for doc in self.documents]

    def id_set(self) -> frozenset[str]:
        return frozenset(self._id_index)

    def index_of(self, doc_id: str) -> int:
        return self._id_index[doc_id]

    def subset(self, ids: Iterable[str], label: Optional[str] = None) -> "Corpus":
        return subset(self, ids, label=label)


def subset(corpus: Corpus, ids: Iterable[str], label: Optional[str] = None) -> Corpus:
    """Order-preserving restriction of `corpus` to `ids`; unknown ids are fatal."""
    wanted = set(ids)
    unknown = wanted - corpus.id_set()
    if unknown:
        raise ValueError(f"subset ids not in corpus: {sorted(unknown)[:5]}")
    docs = [doc for doc in corpus.documents if doc.id in wanted]
    return Corpus(docs, label=label if label is not None else corpus.label)


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 parse; bare 'Z' normalized, naive stamps assumed UTC."""
    text = value.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


@dataclass
class IngestResult:
    corpus: Corpus
    skipped: int
    errors: list[str] = field(default_factory=list)


_REQUIRED_FIELDS = ("id", "text", "user_name", "user_handle", "user_bio", "created_at")


def _record_from_json(obj: dict) -> RawRecord:
    for key in _REQUIRED_FIELDS:
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise ValueError("id must be a non-empty string")
    return RawRecord(
        id=obj["id"],
        text=str(obj["text"]),
        author_name=str(obj["user_name"]),
        author_handle=str(obj["user_handle"]),
        author_bio=str(obj["user_bio"]),
        created_at=parse_timestamp(str(obj["created_at"])),
        thread_id=str(obj["thread_id"]) if obj.get("thread_id") else None,
    )


def ingest(path, group_threads: bool = False, label: str = "D0") -> IngestResult:
    """Read a JSONL feed into a corpus of raw (un-tokenized) Documents.

    Malformed lines are skipped and counted, never fatal. With
    `group_threads`, records sharing a thread_id merge into one document:
    texts joined in timestamp order, placed at the first member's feed
    position, keyed and authored by the earliest record (the thread root).
    """
    records: list[RawRecord] = []
    skipped = 0
    errors: list[str] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                rec = _record_from_json(obj)
                if rec.id in seen_ids:
                    raise ValueError(f"duplicate id {rec.id!r}")
            except (ValueError, KeyError) as exc:
                skipped += 1
                if len(errors) < 20:
                    errors.append(f"line {lineno}: {exc}")
                continue
            seen_ids.add(rec.id)
            records.append(rec)
    if skipped:
        logger.warning("ingest: skipped %d malformed line(s) in %s", skipped, path)
    if group_threads:
        records = _group_threads(records)
    docs = [
        Document(
            id=rec.id,
            tokens=[],
            raw_text=rec.text,
            author_ref=rec.author_handle,
            created_at=rec.created_at,
            record=rec,
        )
        for rec in records
    ]
    return IngestResult(Corpus(docs, label=label), skipped, errors)


def _group_threads(records: list[RawRecord]) -> list[RawRecord]:
    groups: dict[str, list[RawRecord]] = {}
    order: list[tuple[str, RawRecord]] = []  # (key, first record) in input order
    for rec in records:
        if rec.thread_id is None:
            order.append(("", rec))
            continue
        if rec.thread_id not in groups:
            groups[rec.thread_id] = []
            order.append((rec.thread_id, rec))
        groups[rec.thread_id].append(rec)
    merged: list[RawRecord] = []
    for key, first in order:
        if not key:
            merged.append(first)
            continue
        members = sorted(groups[key], key=lambda r: (r.created_at, r.id))
        head = members[0]
        merged.append(
            RawRecord(
                id=head.id,
                text=" ".join(m.text for m in members),
                author_name=head.author_name,
                author_handle=head.author_handle,
                author_bio=head.author_bio,
                created_at=head.created_at,
                thread_id=key,
            )
        )
    return merged


def preprocess(record: RawRecord, normalizer: TextNormalizer) -> Document:
    """Normalize one record into a Document; empty token lists are valid."""
    return Document(
        id=record.id,
        tokens=normalizer.tokenize(record.text),
        raw_text=record.text,
        author_ref=record.author_handle,
        created_at=record.created_at,
        record=record,
    )


_WORKER_NORMALIZER: Optional[TextNormalizer] = None


def _init_worker(normalizer: TextNormalizer) -> None:
    global _WORKER_NORMALIZER
    _WORKER_NORMALIZER = normalizer


def _preprocess_in_worker(record: RawRecord) -> Document:
    assert _WORKER_NORMALIZER is not None
    return preprocess(record, _WORKER_NORMALIZER)


def preprocess_corpus(
    corpus: Corpus,
    normalizer: TextNormalizer,
    jobs: int = 1,
    label: Optional[str] = None,
) -> Corpus:
    """Normalize every record-backed document; records with empty text are dropped.

    Output order follows input order regardless of `jobs`, so results are
    identical for any parallelism degree.
    """
    records = []
    dropped = 0
    for doc in corpus.documents:
        rec = doc.record
        if rec is None:
            rec = RawRecord(
                id=doc.id,
                text=doc.raw_text,
                author_handle=doc.author_ref,
                created_at=doc.created_at,
            )
        if not rec.text.strip():
            dropped += 1
            continue
        records.append(rec)
    if dropped:
        logger.info("preprocess: dropped %d empty-text record(s)", dropped)
    if jobs > 1 and len(records) > 1:
        chunk = max(1, len(records) // (jobs * 4))
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(normalizer,)
        ) as pool:
            docs = list(pool.map(_preprocess_in_worker, records, chunksize=chunk))
    else:
        docs = [preprocess(rec, normalizer) for rec in records]
    return Corpus(docs, label=label if label is not None else corpus.label)


def token_counts(corpus: Corpus) -> dict[str, tuple[int, int]]:
    """Per-token (occurrence count, containing-document count) over a corpus."""
    occ: dict[str, int] = {}
    docs: dict[str, int] = {}
    for doc in corpus.documents:
        for tok in doc.tokens:
            occ[tok] = occ.get(tok, 0) + 1
        for tok in set(doc.tokens):
            docs[tok] = docs.get(tok, 0) + 1
    return {tok: (occ[tok], docs[tok]) for tok in occ}


def _doc_to_json(doc: Document) -> dict:
    obj: dict = {
        "id": doc.id,
        "tokens": doc.tokens,
        "raw_text": doc.raw_text,
        "author_ref": doc.author_ref,
        "created_at": doc.created_at.isoformat(),
    }
    if doc.record is not None:
        obj["record"] = {
            "user_name": doc.record.author_name,
            "user_handle": doc.record.author_handle,
            "user_bio": doc.record.author_bio,
            "thread_id": doc.record.thread_id,
        }
    if doc.concepts:
        obj["concepts"] = [
            {
                "cui": m.entry.cui,
                "name": m.entry.preferred_name,
                "semtypes": sorted(m.entry.semantic_types),
                "start": m.start,
                "end": m.end,
            }
            for m in doc.concepts
        ]
    return obj


def _doc_from_json(obj: dict) -> Document:
    from .concepts import ConceptMention, LexiconEntry

    record = None
    if "record" in obj:
        rec = obj["record"]
        record = RawRecord(
            id=obj["id"],
            text=obj.get("raw_text", ""),
            author_name=rec.get("user_name", ""),
            author_handle=rec.get("user_handle", ""),
            author_bio=rec.get("user_bio", ""),
            created_at=parse_timestamp(obj["created_at"]),
            thread_id=rec.get("thread_id"),
        )
    doc = Document(
        id=obj["id"],
        tokens=list(obj["tokens"]),
        raw_text=obj.get("raw_text", ""),
        author_ref=obj.get("author_ref", ""),
        created_at=parse_timestamp(obj["created_at"]),
        record=record,
    )
    for m in obj.get("concepts", ()):
        entry = LexiconEntry(
            trigger=tuple(doc.tokens[m["start"] : m["end"]]),
            cui=m["cui"],
            preferred_name=m.get("name", ""),
            semantic_types=frozenset(m.get("semtypes", ())),
        )
        doc.concepts.append(ConceptMention(entry=entry, start=m["start"], end=m["end"]))
    return doc


def write_documents_jsonl(corpus: Corpus, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            fh.write(json.dumps(_doc_to_json(doc), sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def read_documents_jsonl(path, label: str = "") -> Corpus:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                docs.append(_doc_from_json(json.loads(line)))
    return Corpus(docs, label=label)
