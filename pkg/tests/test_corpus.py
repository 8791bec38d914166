"""Normalization, ingestion, and corpus container behavior."""

import json
from datetime import datetime, timezone

import pytest

from clinsift.corpus import (
    Corpus,
    Document,
    Lemmatizer,
    TextNormalizer,
    ingest,
    parse_timestamp,
    preprocess_corpus,
    read_documents_jsonl,
    subset,
    token_counts,
    write_documents_jsonl,
)

from conftest import make_record, write_jsonl


# ---------------------------------------------------------------- normalizer

def test_tokenize_hand_trace(normalizer):
    # tags and urls removed, contraction split, emoji dropped, query term
    # filtered, plural folded
    text = "Doctors can't treat COVID19 <b>yet</b> \U0001F637 http://x.co"
    assert normalizer.tokenize(text) == ["doctor", "treat", "yet"]


def test_tokenize_entities_hashtags_mentions(normalizer):
    text = "RT @nurse_jane: Fevers &amp; chills… #covid19 www.cdc.gov/x"
    assert normalizer.tokenize(text) == ["rt", "nurse", "jane", "fever", "chill"]


def test_tokenize_contractions(normalizer):
    text = "Patient's O2 won't stabilize, I'm worried... let's monitor SpO2 closely"
    assert normalizer.tokenize(text) == [
        "patient", "o2", "stabilize", "worried", "let", "monitor", "spo2", "closely",
    ]


def test_tokenize_idempotent(normalizer):
    texts = [
        "Doctors can't treat COVID19 <b>yet</b> \U0001F637 http://x.co",
        "ICUs are full. viruses mutate; studies classes boxes batches wishes",
        "Patient's O2 won't stabilize, I'm worried... let's monitor SpO2 closely",
        "fevers, chills &amp; body aches — day 3 #covid19",
    ]
    for text in texts:
        once = normalizer.tokenize(text)
        again = normalizer.tokenize(" ".join(once))
        assert again == once


def test_tokenize_strips_bmp_emoji_blocks(normalizer):
    # U+2615 sits in a configured block; accented letters must survive
    assert normalizer.tokenize("café ☕ time") == ["café", "time"]


def test_query_terms_removed(normalizer):
    assert normalizer.tokenize("coronavirus covid covid19 2019ncov update") == ["update"]


def test_custom_stopwords_and_query_terms():
    norm = TextNormalizer(stopwords={"alpha"}, query_terms={"beta"}, lemmatizer=Lemmatizer({}))
    assert norm.tokenize("alpha beta gamma") == ["gamma"]


def test_lemmatizer_chain_resolution():
    lem = Lemmatizer({"a": "b", "b": "c"})
    assert lem("a") == "c"
    assert lem("b") == "c"
    assert lem("c") == "c"


def test_lemmatizer_cycle_rejected():
    with pytest.raises(ValueError):
        Lemmatizer({"a": "b", "b": "a"})


def test_lemmatizer_suffix_fallback():
    lem = Lemmatizer({})
    assert lem("studies") == "study"
    assert lem("boxes") == "box"
    assert lem("batches") == "batch"
    assert lem("wishes") == "wish"
    assert lem("chills") == "chill"
    # protected endings stay put
    assert lem("icus") == "icus"
    assert lem("virus") == "virus"
    assert lem("diagnosis") == "diagnosis"
    assert lem("class") == "class"


def test_lemmatizer_table_beats_fallback():
    # the fallback would emit 'viruse'; the bundled table knows better
    lem = Lemmatizer.default()
    assert lem("viruses") == "virus"


def test_lemmatizer_idempotent_over_default_table():
    lem = Lemmatizer.default()
    for form, target in lem.table.items():
        assert lem(target) == target


# ------------------------------------------------------------------- corpus

def _doc(i, tokens):
    return Document(id=f"d{i}", tokens=list(tokens))


def test_vocab_first_appearance_order():
    corpus = Corpus([_doc(0, ["b", "a", "b"]), _doc(1, ["c", "a"])])
    assert corpus.vocab == {"b": 0, "a": 1, "c": 2}


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        Corpus([_doc(0, ["x"]), _doc(0, ["y"])])
    with pytest.raises(ValueError):
        Corpus([Document(id="", tokens=["x"])])


def test_subset_preserves_order():
    corpus = Corpus([_doc(i, ["w"]) for i in range(5)])
    sub = subset(corpus, {"d3", "d1"})
    assert sub.ids() == ["d1", "d3"]
    with pytest.raises(ValueError):
        subset(corpus, {"d1", "nope"})


def test_token_counts():
    corpus = Corpus([_doc(0, ["a", "a", "b"]), _doc(1, ["b", "c"])])
    assert token_counts(corpus) == {"a": (2, 1), "b": (2, 2), "c": (1, 1)}


# ---------------------------------------------------------------- timestamps

def test_parse_timestamp_variants():
    utc = timezone.utc
    assert parse_timestamp("2020-03-01T12:00:00Z") == datetime(2020, 3, 1, 12, tzinfo=utc)
    assert parse_timestamp("2020-03-01T12:00:00") == datetime(2020, 3, 1, 12, tzinfo=utc)
    offset = parse_timestamp("2020-03-01T12:00:00+02:00")
    assert offset.utcoffset().total_seconds() == 7200


# ------------------------------------------------------------------- ingest

def test_ingest_counts_malformed_lines(tmp_path):
    rows = [
        make_record(0, "first"),
        make_record(1, "second"),
    ]
    path = tmp_path / "feed.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(rows[0]) + "\n")
        fh.write("this is not json\n")
        fh.write("\n")  # blank lines are fine, not an error
        fh.write(json.dumps({"id": "x", "text": "missing fields"}) + "\n")
        fh.write(json.dumps(rows[1]) + "\n")
        fh.write(json.dumps(rows[0]) + "\n")  # duplicate id
        fh.write(json.dumps(["not", "an", "object"]) + "\n")
    res = ingest(path)
    assert res.skipped == 4
    assert len(res.errors) == 4
    assert res.corpus.ids() == ["t0000", "t0001"]
    assert res.corpus[0].raw_text == "first"


def test_ingest_keeps_author_fields(tmp_path):
    path = write_jsonl(
        tmp_path / "feed.jsonl",
        [make_record(0, "hello", name="Ann MD", handle="ann", bio="ICU nurse")],
    )
    doc = ingest(path).corpus[0]
    assert doc.record.author_name == "Ann MD"
    assert doc.record.author_handle == "ann"
    assert doc.record.author_bio == "ICU nurse"
    assert doc.author_ref == "ann"


def test_ingest_thread_grouping(tmp_path):
    rows = [
        make_record(0, "solo post"),
        make_record(1, "part two", created_at="2020-03-01T02:00:00Z", thread_id="th1", handle="late"),
        make_record(2, "another solo"),
        make_record(3, "part one", created_at="2020-03-01T01:00:00Z", thread_id="th1", handle="early"),
    ]
    path = write_jsonl(tmp_path / "feed.jsonl", rows)
    corpus = ingest(path, group_threads=True).corpus
    # merged doc sits at the first member's feed position, keyed by the
    # earliest member (the thread root)
    assert corpus.ids() == ["t0000", "t0003", "t0002"]
    merged = corpus[1]
    assert merged.raw_text == "part one part two"  # timestamp order
    assert merged.record.author_handle == "early"  # earliest member authors
    assert merged.created_at == parse_timestamp("2020-03-01T01:00:00Z")


# --------------------------------------------------------------- preprocess

def test_preprocess_corpus_drops_empty_text(tmp_path, normalizer):
    rows = [
        make_record(0, "fever and cough in clinic"),
        make_record(1, "   "),
        make_record(2, "\U0001F637"),  # normalizes to zero tokens, but text is non-empty
        make_record(3, "second real post about fever"),
    ]
    path = write_jsonl(tmp_path / "feed.jsonl", rows)
    corpus = preprocess_corpus(ingest(path).corpus, normalizer)
    assert corpus.ids() == ["t0000", "t0002", "t0003"]
    assert corpus[1].tokens == []  # empty after normalization is still a document


def test_preprocess_corpus_parallel_matches_serial(tmp_path, normalizer):
    rows = [make_record(i, f"fever case number {i} in the clinic today") for i in range(40)]
    path = write_jsonl(tmp_path / "feed.jsonl", rows)
    raw = ingest(path).corpus
    serial = preprocess_corpus(raw, normalizer, jobs=1)
    parallel = preprocess_corpus(raw, normalizer, jobs=2)
    assert serial.ids() == parallel.ids()
    assert [d.tokens for d in serial] == [d.tokens for d in parallel]
    assert serial.vocab == parallel.vocab


# ------------------------------------------------------------- round-tripping

def test_documents_jsonl_round_trip(tmp_path, normalizer):
    rows = [
        make_record(0, "fever and chills on day three", name="Ann MD", bio="ICU"),
        make_record(1, "icu beds are full again"),
    ]
    path = write_jsonl(tmp_path / "feed.jsonl", rows)
    corpus = preprocess_corpus(ingest(path).corpus, normalizer)
    out = tmp_path / "docs.jsonl"
    write_documents_jsonl(corpus, out)
    back = read_documents_jsonl(out)
    assert back.ids() == corpus.ids()
    assert [d.tokens for d in back] == [d.tokens for d in corpus]
    assert [d.created_at for d in back] == [d.created_at for d in corpus]
    assert back[0].record.author_name == "Ann MD"
