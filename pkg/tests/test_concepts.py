"""Trigger matching, annotation, and lexicon loading."""

import random

import pytest

from clinsift.concepts import (
    ConceptMention,
    LexiconEntry,
    TriggerMatcher,
    annotate,
    annotate_corpus,
    count_triggers,
    default_lexicon,
    read_lexicon,
)
from clinsift.corpus import Corpus, Document, TextNormalizer


def entry(phrase, cui="C1"):
    return LexiconEntry(trigger=tuple(phrase.split()), cui=cui, preferred_name=phrase)


def naive_find(tokens, entries):
    """Reference matcher: at each position take the longest trigger, skip its
    span, lowest cui breaking trigger ties. Quadratic and obviously correct."""
    best_for = {}
    for e in entries:
        cur = best_for.get(e.trigger)
        if cur is None or e.cui < cur.cui:
            best_for[e.trigger] = e
    out = []
    i = 0
    while i < len(tokens):
        best = None
        for trig, e in best_for.items():
            if tuple(tokens[i : i + len(trig)]) == trig:
                if best is None or len(trig) > len(best.trigger):
                    best = e
        if best is None:
            i += 1
        else:
            out.append((i, i + len(best.trigger), best.cui))
            i += len(best.trigger)
    return out


def test_longest_match_wins_and_spans_never_overlap():
    matcher = TriggerMatcher([entry("a", "C1"), entry("a b", "C2"), entry("b c", "C3")])
    hits = matcher.find(["a", "b", "c"])
    # 'a b' beats 'a' at position 0 and consumes 'b', so 'b c' cannot fire
    assert [(m.start, m.end, m.entry.cui) for m in hits] == [(0, 2, "C2")]


def test_greedy_restarts_after_span():
    matcher = TriggerMatcher([entry("x y"), entry("y z", "C9")])
    hits = matcher.find(["w", "x", "y", "z", "x", "y"])
    assert [(m.start, m.end) for m in hits] == [(1, 3), (4, 6)]


def test_lowest_cui_wins_duplicate_triggers():
    matcher = TriggerMatcher([entry("fever", "C7"), entry("fever", "C2")])
    hits = matcher.find(["fever"])
    assert hits[0].entry.cui == "C2"


def test_duplicate_trigger_cui_pairs_rejected():
    with pytest.raises(ValueError):
        TriggerMatcher([entry("fever", "C1"), entry("fever", "C1")])


def test_empty_trigger_token_rejected():
    with pytest.raises(ValueError):
        LexiconEntry(trigger=("a", ""), cui="C1", preferred_name="x")
    with pytest.raises(ValueError):
        LexiconEntry(trigger=(), cui="C1", preferred_name="x")


def test_matcher_agrees_with_naive_reference():
    rng = random.Random(404)
    vocab = ["a", "b", "c", "d", "e", "f", "g", "h"]
    entries = []
    for i in range(25):
        length = rng.randint(1, 3)
        trig = tuple(rng.choice(vocab) for _ in range(length))
        entries.append(LexiconEntry(trigger=trig, cui=f"C{rng.randint(1, 9)}", preferred_name=" ".join(trig)))
    # drop exact duplicates the constructor would reject
    entries = list({(e.trigger, e.cui): e for e in entries}.values())
    matcher = TriggerMatcher(entries)
    for _ in range(60):
        tokens = [rng.choice(vocab) for _ in range(rng.randint(0, 30))]
        got = [(m.start, m.end, m.entry.cui) for m in matcher.find(tokens)]
        assert got == naive_find(tokens, entries)


def test_annotate_min_tokens_rule():
    matcher = TriggerMatcher([entry("fever")])
    short = Document(id="a", tokens=["fever", "x", "y"])
    long_enough = Document(id="b", tokens=["fever", "x", "y", "z"])
    assert annotate(short, matcher).concepts == []
    hits = annotate(long_enough, matcher).concepts
    assert [(m.start, m.end) for m in hits] == [(0, 1)]
    # original documents stay untouched
    assert short.concepts == [] and long_enough.concepts == []


def test_annotate_corpus_threshold_override():
    matcher = TriggerMatcher([entry("fever")])
    corpus = Corpus([Document(id="a", tokens=["fever", "x"])])
    assert annotate_corpus(corpus, matcher)[0].concepts == []
    assert len(annotate_corpus(corpus, matcher, min_tokens=2)[0].concepts) == 1


def test_count_triggers():
    docs = [
        Document(id="a", tokens=["fever", "and", "fever"]),
        Document(id="b", tokens=["dry", "cough", "fever"]),
        Document(id="c", tokens=["nothing", "here"]),
    ]
    corpus = Corpus(docs)
    counts = count_triggers(corpus, ["fever", "dry cough", "absent phrase"])
    assert counts["fever"] == (3, 2)
    assert counts["dry cough"] == (1, 1)
    assert counts["absent phrase"] == (0, 0)


def test_count_triggers_nonoverlapping():
    # 'a a a' under trigger 'a a' counts once, the tail 'a' is consumed-free
    corpus = Corpus([Document(id="d", tokens=["a", "a", "a"])])
    counts = count_triggers(corpus, ["a a"])
    assert counts["a a"] == (1, 1)


def test_read_lexicon_validates(tmp_path):
    good = tmp_path / "lex.tsv"
    good.write_text("# comment\nfever\tC1\tFever\tsosy\n", encoding="utf-8")
    entries = read_lexicon(good)
    assert entries[0].trigger == ("fever",)
    assert entries[0].semantic_types == frozenset({"sosy"})

    bad = tmp_path / "bad.tsv"
    bad.write_text("fever\tC1\tFever\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_lexicon(bad)

    empty = tmp_path / "empty.tsv"
    empty.write_text("# nothing\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_lexicon(empty)


def test_default_lexicon_triggers_are_normalization_fixed_points(normalizer):
    # triggers are stored post-normalization; re-normalizing must be a no-op,
    # otherwise document tokens could never line up with them
    lex = default_lexicon()
    assert len(lex) > 400
    for e in lex:
        assert normalizer.tokenize(" ".join(e.trigger)) == list(e.trigger)


def test_default_lexicon_unique_pairs():
    lex = default_lexicon()
    assert len({(e.trigger, e.cui) for e in lex}) == len(lex)
