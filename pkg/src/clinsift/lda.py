"""Latent Dirichlet Allocation via collapsed Gibbs sampling.

The sampler is a numba kernel driven by an internal splitmix64 generator,
so a given (corpus, config) pair reproduces bit-identical assignments on
every run, independent of numpy's global RNG state. Estimates are smoothed
relative frequencies of the final sample's counts, not averages over sweeps.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from numba import njit

from .corpus import Corpus

logger = logging.getLogger(__name__)

DEFAULT_TOTAL_ALPHA = 5.0  # split evenly across topics unless alpha given

_MAGIC = b"CLSF-TM1"

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_MUL2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _next_unit(state):
    # splitmix64 step -> uniform double in [0, 1)
    state = state + _SM_GAMMA
    z = state
    z = (z ^ (z >> np.uint64(30))) * _SM_MUL1
    z = (z ^ (z >> np.uint64(27))) * _SM_MUL2
    z = z ^ (z >> np.uint64(31))
    return state, np.float64(z >> np.uint64(11)) * _TWO_NEG53


@njit(cache=True)
def _gibbs_fit(token_doc, token_word, n_docs, k, v, alpha, beta, sweeps, seed):
    n = token_doc.shape[0]
    z = np.empty(n, np.int32)
    n_dt = np.zeros((n_docs, k), np.int32)
    n_tw = np.zeros((k, v), np.int32)
    n_t = np.zeros(k, np.int64)
    state = np.uint64(seed)
    kf = np.float64(k)
    for i in range(n):
        state, u = _next_unit(state)
        t = np.int32(u * kf)
        if t >= k:
            t = k - 1
        z[i] = t
        n_dt[token_doc[i], t] += 1
        n_tw[t, token_word[i]] += 1
        n_t[t] += 1
    vbeta = v * beta
    probs = np.empty(k, np.float64)
    for _s in range(sweeps):
        for i in range(n):
            d = token_doc[i]
            w = token_word[i]
            told = z[i]
            n_dt[d, told] -= 1
            n_tw[told, w] -= 1
            n_t[told] -= 1
            total = 0.0
            for t in range(k):
                p = (n_dt[d, t] + alpha) * (n_tw[t, w] + beta) / (n_t[t] + vbeta)
                probs[t] = p
                total += p
            state, u = _next_unit(state)
            target = u * total
            acc = 0.0
            tnew = k - 1
            for t in range(k):
                acc += probs[t]
                if target < acc:
                    tnew = t
                    break
            z[i] = tnew
            n_dt[d, tnew] += 1
            n_tw[tnew, w] += 1
            n_t[tnew] += 1
    return z, n_dt, n_tw


@dataclass
class LdaConfig:
    k: int
    alpha: Optional[float] = None
    beta: float = 0.01
    iterations: int = 1000
    seed: int = 1
    top_words: int = 10

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.alpha is None:
            self.alpha = DEFAULT_TOTAL_ALPHA / self.k
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.top_words < 1:
            raise ValueError("top_words must be at least 1")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
            "iterations": self.iterations,
            "seed": self.seed,
            "top_words": self.top_words,
        }


@dataclass
class TopicModel:
    """Fitted model: doc_topic is (k, docs) column-stochastic, topic_word is
    (k, vocab) row-stochastic, assignments hold the final sweep's topic of
    every token position."""

    doc_topic: np.ndarray
    topic_word: np.ndarray
    assignments: list[np.ndarray]
    top_words: list[list[tuple[str, float]]]
    config: LdaConfig
    vocab: dict[str, int]

    @property
    def k(self) -> int:
        return self.doc_topic.shape[0]

    @property
    def n_docs(self) -> int:
        return self.doc_topic.shape[1]

    def save(self, path) -> None:
        save_model(self, path)

    @classmethod
    def load(cls, path) -> "TopicModel":
        return load_model(path)


def fit(corpus: Corpus, config: LdaConfig) -> TopicModel:
    """Run the collapsed Gibbs sampler and freeze estimates from the last sweep."""
    if len(corpus) == 0:
        raise ValueError("cannot fit a topic model on an empty corpus")
    vocab = corpus.vocab
    v = len(vocab)
    if v == 0:
        raise ValueError("corpus has an empty vocabulary (all documents empty)")
    if config.k > v:
        logger.warning("k=%d exceeds vocabulary size %d; proceeding", config.k, v)
    doc_lens = np.array([len(doc.tokens) for doc in corpus.documents], dtype=np.int64)
    n_tokens = int(doc_lens.sum())
    token_doc = np.empty(n_tokens, dtype=np.int32)
    token_word = np.empty(n_tokens, dtype=np.int32)
    pos = 0
    for m, doc in enumerate(corpus.documents):
        for tok in doc.tokens:
            token_doc[pos] = m
            token_word[pos] = vocab[tok]
            pos += 1
    z, n_dt, n_tw = _gibbs_fit(
        token_doc,
        token_word,
        len(corpus),
        config.k,
        v,
        float(config.alpha),
        float(config.beta),
        int(config.iterations),
        np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF),
    )
    alpha = float(config.alpha)
    beta = float(config.beta)
    # theta column m: (n_mt + alpha) / (N_m + k*alpha)
    doc_topic = ((n_dt + alpha) / (doc_lens[:, None] + config.k * alpha)).T
    n_t = n_tw.sum(axis=1)
    topic_word = (n_tw + beta) / (n_t[:, None] + v * beta)
    id_to_token = [None] * v
    for tok, idx in vocab.items():
        id_to_token[idx] = tok
    n_top = min(config.top_words, v)
    word_ids = np.arange(v)
    top_words = []
    for t in range(config.k):
        row = topic_word[t]
        order = np.lexsort((word_ids, -row))[:n_top]
        top_words.append([(id_to_token[int(w)], float(row[int(w)])) for w in order])
    offsets = np.concatenate(([0], np.cumsum(doc_lens)))
    assignments = [z[offsets[m] : offsets[m + 1]].copy() for m in range(len(corpus))]
    return TopicModel(
        doc_topic=doc_topic,
        topic_word=topic_word,
        assignments=assignments,
        top_words=top_words,
        config=config,
        vocab=dict(vocab),
    )


def doc_topic_mass(model: TopicModel, doc_index: int, topics: Iterable[int]) -> float:
    """Total doc_topic probability document `doc_index` places on `topics`."""
    if not 0 <= doc_index < model.n_docs:
        raise IndexError(f"document index {doc_index} out of range")
    total = 0.0
    for t in topics:
        if not 0 <= t < model.k:
            raise IndexError(f"topic index {t} out of range")
        total += float(model.doc_topic[t, doc_index])
    return total


def umass_coherence(model: TopicModel, corpus: Corpus, top_n: int = 10) -> np.ndarray:
    """Per-topic UMass coherence from document co-occurrence in `corpus`.

    A top word absent from every document would zero the denominator; that
    denominator is replaced by 1 and the event logged.
    """
    per_topic = [[w for w, _ in model.top_words[t][:top_n]] for t in range(model.k)]
    needed = {w for words in per_topic for w in words}
    doc_sets: dict[str, set[int]] = {w: set() for w in needed}
    for idx, doc in enumerate(corpus.documents):
        for tok in needed.intersection(doc.tokens):
            doc_sets[tok].add(idx)
    flagged = False
    scores = np.zeros(model.k, dtype=np.float64)
    for t, words in enumerate(per_topic):
        total = 0.0
        for m in range(1, len(words)):
            set_m = doc_sets[words[m]]
            for l in range(m):
                set_l = doc_sets[words[l]]
                d_l = len(set_l)
                if d_l == 0:
                    d_l = 1
                    flagged = True
                d_ml = len(set_m & set_l)
                total += math.log((d_ml + 1) / d_l)
        scores[t] = total
    if flagged:
        logger.warning("umass_coherence: top word with zero document frequency; used 1")
    return scores


def save_model(model: TopicModel, path) -> None:
    """Deterministic binary container: fixed magic, JSON header, raw arrays.

    Identical models serialize to identical bytes; nothing volatile (no
    timestamps, no platform fields) is written.
    """
    k = model.k
    m = model.n_docs
    v = model.topic_word.shape[1]
    id_to_token = [None] * v
    for tok, idx in model.vocab.items():
        id_to_token[idx] = tok
    header = {
        "config": model.config.to_dict(),
        "k": k,
        "m": m,
        "v": v,
        "doc_lens": [int(a.shape[0]) for a in model.assignments],
        "vocab": id_to_token,
        "top_words": [[[w, float(p)] for w, p in words] for words in model.top_words],
    }
    header_bytes = json.dumps(header, sort_keys=True, ensure_ascii=True).encode("ascii")
    flat_z = (
        np.concatenate(model.assignments)
        if model.assignments and m > 0
        else np.empty(0, np.int32)
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(np.ascontiguousarray(model.doc_topic, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.topic_word, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(flat_z, dtype="<i4").tobytes())


def load_model(path) -> TopicModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path}: not a topic model file")
    (header_len,) = struct.unpack_from("<I", blob, len(_MAGIC))
    off = len(_MAGIC) + 4
    header = json.loads(blob[off : off + header_len].decode("ascii"))
    off += header_len
    k, m, v = header["k"], header["m"], header["v"]
    doc_topic = np.frombuffer(blob, dtype="<f8", count=k * m, offset=off).reshape(k, m).copy()
    off += k * m * 8
    topic_word = np.frombuffer(blob, dtype="<f8", count=k * v, offset=off).reshape(k, v).copy()
    off += k * v * 8
    doc_lens = header["doc_lens"]
    total = sum(doc_lens)
    flat_z = np.frombuffer(blob, dtype="<i4", count=total, offset=off).copy()
    assignments = []
    pos = 0
    for length in doc_lens:
        assignments.append(flat_z[pos : pos + length].copy())
        pos += length
    config = LdaConfig(**header["config"])
    vocab = {tok: idx for idx, tok in enumerate(header["vocab"])}
    top_words = [[(w, float(p)) for w, p in words] for words in header["top_words"]]
    return TopicModel(
        doc_topic=doc_topic,
        topic_word=topic_word,
        assignments=assignments,
        top_words=top_words,
        config=config,
        vocab=vocab,
    )
