"""Credential-based author filtering.

Retains documents whose author profile (name, handle, bio) matches at least
one credential pattern. Patterns match whole profile tokens, optionally as
prefixes, so "MD" matches "Jane Doe, MD" but never "mad" or "md5".
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

from .corpus import Corpus, RawRecord

logger = logging.getLogger(__name__)

FIELD_NAMES = ("name", "handle", "bio")
_ALL_FIELDS = frozenset(FIELD_NAMES)
# same word definition as text normalization: alphanumerics, underscore splits
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class CredentialPattern:
    """One credential matcher: a token sequence, optionally prefix-wild at the end.

    `pattern` is stored without markers; multi-word patterns match consecutive
    profile tokens. Case-insensitive unless `case_sensitive`.
    """

    pattern: str
    case_sensitive: bool = False
    prefix: bool = False
    fields: frozenset[str] = _ALL_FIELDS

    def __post_init__(self):
        if not self.pattern.strip():
            raise ValueError("empty credential pattern")
        bad = set(self.fields) - _ALL_FIELDS
        if bad:
            raise ValueError(f"unknown pattern fields: {sorted(bad)}")
        if not self.fields:
            raise ValueError(f"pattern {self.pattern!r} has empty field scope")

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(_WORD_RE.findall(self.pattern))

    def matches_text(self, text: str) -> bool:
        want = self.tokens
        if not want:
            return False
        have = _WORD_RE.findall(text)
        if not self.case_sensitive:
            want = tuple(w.lower() for w in want)
            have = [h.lower() for h in have]
        span = len(want)
        for i in range(len(have) - span + 1):
            ok = all(have[i + j] == want[j] for j in range(span - 1))
            if ok:
                last_have, last_want = have[i + span - 1], want[span - 1]
                if self.prefix:
                    ok = last_have.startswith(last_want)
                else:
                    ok = last_have == last_want
            if ok:
                return True
        return False


def _field_value(record: RawRecord, field_name: str) -> str:
    if field_name == "name":
        return record.author_name
    if field_name == "handle":
        return record.author_handle
    return record.author_bio


def credential_matches(
    record: RawRecord, patterns: Iterable[CredentialPattern]
) -> list[tuple[CredentialPattern, str]]:
    """All (pattern, field) pairs that fire on a record, in pattern order."""
    hits = []
    for pat in patterns:
        for field_name in FIELD_NAMES:
            if field_name in pat.fields and pat.matches_text(_field_value(record, field_name)):
                hits.append((pat, field_name))
    return hits


def is_hcp(record: RawRecord, patterns: Iterable[CredentialPattern]) -> bool:
    for pat in patterns:
        for field_name in FIELD_NAMES:
            if field_name in pat.fields and pat.matches_text(_field_value(record, field_name)):
                return True
    return False


def filter_hcp(
    corpus: Corpus, patterns: Iterable[CredentialPattern], label: Optional[str] = None
) -> Corpus:
    """Subset of `corpus` whose authors carry a credential; order preserved."""
    patterns = list(patterns)
    kept = []
    missing = 0
    for doc in corpus.documents:
        if doc.record is None:
            missing += 1
            continue
        if is_hcp(doc.record, patterns):
            kept.append(doc)
    if missing:
        logger.warning("filter_hcp: %d document(s) lack author metadata; excluded", missing)
    return Corpus(kept, label=label if label is not None else corpus.label)


def audit_credentials(
    corpus: Corpus, patterns: Iterable[CredentialPattern]
) -> dict[str, list[tuple[str, str]]]:
    """doc id -> [(pattern string, field)] for every retained document."""
    patterns = list(patterns)
    audit: dict[str, list[tuple[str, str]]] = {}
    for doc in corpus.documents:
        if doc.record is None:
            continue
        hits = credential_matches(doc.record, patterns)
        if hits:
            audit[doc.id] = [(pat.pattern, field_name) for pat, field_name in hits]
    return audit


def parse_pattern_line(line: str) -> Optional[CredentialPattern]:
    """One pattern per line: `!` prefix = case-sensitive, `*` suffix = prefix
    match, trailing `@name`/`@handle`/`@bio` words restrict the field scope."""
    line = line.strip()
    if not line or line.startswith("#"):
        return None
    parts = line.split()
    fields = set()
    while parts and parts[-1].startswith("@"):
        fields.add(parts.pop()[1:])
    if not parts:
        raise ValueError(f"pattern line has only field tags: {line!r}")
    text = " ".join(parts)
    case_sensitive = text.startswith("!")
    if case_sensitive:
        text = text[1:]
    prefix = text.endswith("*")
    if prefix:
        text = text[:-1]
    return CredentialPattern(
        pattern=text,
        case_sensitive=case_sensitive,
        prefix=prefix,
        fields=frozenset(fields) if fields else _ALL_FIELDS,
    )


def load_patterns(path) -> list[CredentialPattern]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            pat = parse_pattern_line(line)
            if pat is not None:
                out.append(pat)
    if not out:
        raise ValueError(f"no credential patterns in {path}")
    return out


def default_patterns() -> list[CredentialPattern]:
    return load_patterns(resources.files("clinsift").joinpath("data/hcp_patterns.txt"))
