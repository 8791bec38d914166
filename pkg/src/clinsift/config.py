"""Flat YAML run configuration: one file of key-value pairs drives a run.

Command-line flags override file values; the effective configuration is
what lands in the run manifest. Unknown keys abort before any compute.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import yaml

from .authors import CredentialPattern, default_patterns, load_patterns
from .concepts import DEFAULT_MIN_TOKENS, LexiconEntry, default_lexicon, read_lexicon
from .corpus import (
    DEFAULT_QUERY_TERMS,
    Lemmatizer,
    TextNormalizer,
    load_stopwords,
)
from .lda import LdaConfig
from .pipeline import COUNT_MODES, PipelineConfig, WindowSpec
from .relevance import DEFAULT_EPSILON

ENV_CONFIG = "CLINSIFT_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class RunSettings:
    input: Optional[str] = None
    stopwords: Optional[str] = None
    query_terms: Optional[list[str]] = None
    lemma_table: Optional[str] = None
    patterns: Optional[str] = None
    lexicon: Optional[str] = None
    categories: Optional[str] = None
    group_threads: bool = False
    k: int = 100
    tau: float = 0.25
    max_iterations: int = 3
    epsilon: float = DEFAULT_EPSILON
    use_concepts: bool = True
    stop_growth_factor: float = 2.0
    count_mode: str = "occurrences"
    min_concept_tokens: int = DEFAULT_MIN_TOKENS
    lda_iterations: int = 1000
    lda_alpha: Optional[float] = None
    lda_beta: float = 0.01
    seed: int = 1
    top_words: int = 10
    windows: Optional[str] = None  # "length:stride:rounds" in days
    window_start: Optional[str] = None  # ISO date
    global_baseline: bool = False
    jobs: Optional[int] = None

    def resolved_jobs(self) -> int:
        if self.jobs is not None:
            if self.jobs < 1:
                raise ConfigError("jobs must be at least 1")
            return self.jobs
        return os.cpu_count() or 1

    def build_normalizer(self) -> TextNormalizer:
        stop = load_stopwords(self.stopwords) if self.stopwords else None
        lemm = Lemmatizer.from_file(self.lemma_table) if self.lemma_table else None
        query = self.query_terms if self.query_terms is not None else None
        return TextNormalizer(stopwords=stop, query_terms=query, lemmatizer=lemm)

    def load_lexicon(self) -> list[LexiconEntry]:
        return read_lexicon(self.lexicon) if self.lexicon else default_lexicon()

    def load_patterns(self) -> list[CredentialPattern]:
        return load_patterns(self.patterns) if self.patterns else default_patterns()

    def pipeline_config(self) -> PipelineConfig:
        lda = LdaConfig(
            k=self.k,
            alpha=self.lda_alpha,
            beta=self.lda_beta,
            iterations=self.lda_iterations,
            seed=self.seed,
            top_words=self.top_words,
        )
        return PipelineConfig(
            k=self.k,
            tau=self.tau,
            max_iterations=self.max_iterations,
            epsilon=self.epsilon,
            lda=lda,
            use_concepts=self.use_concepts,
            stop_growth_factor=self.stop_growth_factor,
            count_mode=self.count_mode,
            min_concept_tokens=self.min_concept_tokens,
            patterns=self.load_patterns(),
        )

    def window_spec(self) -> Optional[WindowSpec]:
        if not self.windows:
            return None
        parts = str(self.windows).split(":")
        if len(parts) != 3:
            raise ConfigError("windows must look like 'length:stride:rounds' (days)")
        try:
            length, stride, rounds = (int(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"bad windows value {self.windows!r}: {exc}") from exc
        start = None
        if self.window_start:
            from .corpus import parse_timestamp

            start = parse_timestamp(self.window_start)
        try:
            return WindowSpec(length_days=length, stride_days=stride, rounds=rounds, start=start)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value
        return out


_BOOL_KEYS = {"group_threads", "use_concepts", "global_baseline"}
_INT_KEYS = {"k", "max_iterations", "min_concept_tokens", "lda_iterations", "seed", "top_words", "jobs"}
_FLOAT_KEYS = {"tau", "epsilon", "stop_growth_factor", "lda_alpha", "lda_beta"}
_STR_KEYS = {
    "input",
    "stopwords",
    "lemma_table",
    "patterns",
    "lexicon",
    "categories",
    "count_mode",
    "windows",
    "window_start",
}
_LIST_KEYS = {"query_terms"}
KNOWN_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _LIST_KEYS


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if key in _LIST_KEYS:
        if isinstance(value, str):
            return [value]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{key}: expected a list of strings, got {value!r}")
        return list(value)
    if key == "windows" and not isinstance(value, str):
        raise ConfigError("windows: expected 'length:stride:rounds' as a string")
    return str(value)


def load_settings(path=None, overrides: Optional[dict[str, Any]] = None) -> RunSettings:
    """Load settings from `path` (or $CLINSIFT_CONFIG), then apply overrides.

    Raises ConfigError for unknown keys, bad types, or invalid values, all
    before any corpus is touched.
    """
    data: dict[str, Any] = {}
    if path is None:
        path = os.environ.get(ENV_CONFIG) or None
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a mapping of keys to values")
        data.update(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    settings = RunSettings()
    for key, value in data.items():
        setattr(settings, key, _coerce(key, value))
    _validate(settings)
    return settings


def _validate(s: RunSettings) -> None:
    if s.k < 2:
        raise ConfigError("k must be at least 2")
    if not 0.0 <= s.tau <= 1.0:
        raise ConfigError("tau must lie in [0, 1]")
    if s.max_iterations < 1:
        raise ConfigError("max_iterations must be at least 1")
    if s.epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    if s.stop_growth_factor <= 0:
        raise ConfigError("stop_growth_factor must be positive")
    if s.count_mode not in COUNT_MODES:
        raise ConfigError(f"count_mode must be one of {COUNT_MODES}")
    if s.lda_iterations < 1:
        raise ConfigError("lda_iterations must be at least 1")
    if s.lda_alpha is not None and s.lda_alpha <= 0:
        raise ConfigError("lda_alpha must be positive")
    if s.lda_beta <= 0:
        raise ConfigError("lda_beta must be positive")
    if s.top_words < 1:
        raise ConfigError("top_words must be at least 1")
    if s.min_concept_tokens < 0:
        raise ConfigError("min_concept_tokens must be non-negative")
    if s.jobs is not None and s.jobs < 1:
        raise ConfigError("jobs must be at least 1")
    for path_key in ("input", "stopwords", "lemma_table", "patterns", "lexicon", "categories"):
        value = getattr(s, path_key)
        if value is not None and not Path(value).exists():
            raise ConfigError(f"{path_key}: file not found: {value}")
    s.window_spec()  # validates the windows string eagerly
