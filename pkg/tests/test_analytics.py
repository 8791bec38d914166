"""Enrichment tables, categories, keyword timelines, concept coverage."""

from datetime import date, datetime, timedelta, timezone

import pytest

from clinsift.analytics import (
    CategorySpec,
    WindowDigest,
    category_preservation,
    concept_fraction,
    enrichment_table,
    in_category,
    keyword_timeline,
    load_categories,
    topics_digest,
    write_categories_csv,
    write_enrichment_csv,
    write_timeline_csv,
)
from clinsift.concepts import LexiconEntry, TriggerMatcher
from clinsift.corpus import Corpus, Document
from clinsift.lda import LdaConfig, fit
from clinsift.relevance import threshold_topics

UTC = timezone.utc


def doc(i, tokens, day_offset=0):
    return Document(
        id=f"d{i}",
        tokens=list(tokens),
        created_at=datetime(2020, 3, 1, 10, tzinfo=UTC) + timedelta(days=day_offset),
    )


# --------------------------------------------------------------- enrichment

def test_enrichment_min_count_and_ranking():
    reference = Corpus(
        [
            doc(0, ["fever", "ward", "fever"]),
            doc(1, ["fever", "ward"]),
            doc(2, ["fever", "game"]),
            doc(3, ["game", "score", "game"]),
            doc(4, ["game", "score", "fever"]),
        ]
    )
    filtered = reference.subset(["d0", "d1", "d2"])
    result = enrichment_table(filtered, reference, max_n=1, min_count=3)
    # reference occurrences: fever 5, game 4, ward 2, score 2
    assert set(dict(result.ranked)) == {"fever", "game"}
    assert result.counts_reference == {"fever": 5, "game": 4}
    assert result.counts_filtered == {"fever": 4, "game": 1}
    # fever concentrates in the filtered half, game in the complement
    scores = dict(result.ranked)
    assert scores["fever"] > 1.0 > scores["game"]
    assert result.ranked[0][0] == "fever"
    assert result.top(1) == [result.ranked[0]]
    assert result.bottom(1) == [result.ranked[-1]]


def test_enrichment_multiword_grams():
    reference = Corpus(
        [
            doc(0, ["dry", "cough", "fever"]),
            doc(1, ["dry", "cough"]),
            doc(2, ["dry", "heat"]),
        ]
    )
    filtered = reference.subset(["d0", "d1"])
    result = enrichment_table(filtered, reference, max_n=2, min_count=2)
    grams = set(dict(result.ranked))
    assert "dry cough" in grams
    assert "dry" in grams
    assert "dry heat" not in grams  # one reference occurrence, below min_count


def test_enrichment_requires_subset():
    reference = Corpus([doc(0, ["a"]), doc(1, ["b"])])
    stranger = Corpus([doc(9, ["a"])])
    with pytest.raises(ValueError):
        enrichment_table(stranger, reference)


def test_enrichment_document_count_mode():
    reference = Corpus(
        [
            doc(0, ["fever", "fever", "fever", "fever", "fever"]),
            doc(1, ["fever"]),
            doc(2, ["calm"]),
        ]
    )
    filtered = reference.subset(["d0", "d1"])
    occurrences = enrichment_table(filtered, reference, max_n=1, min_count=1)
    by_docs = enrichment_table(filtered, reference, max_n=1, min_count=1, count_mode="documents")
    # six occurrences but only two containing documents
    assert occurrences.counts_filtered["fever"] == 6
    assert by_docs.counts_filtered["fever"] == 2


# --------------------------------------------------------------- categories

def test_category_needs_two_distinct_keywords():
    cat = CategorySpec(name="resp", keywords=("fever", "dry cough", "hypoxia"), expected="relevant")
    assert in_category(["fever", "x", "dry", "cough"], cat)
    assert not in_category(["fever", "fever", "fever"], cat)  # one keyword repeated
    assert not in_category(["dry", "x", "cough"], cat)  # phrase must be consecutive
    assert not in_category([], cat)


def test_category_spec_validation():
    with pytest.raises(ValueError):
        CategorySpec(name="x", keywords=("only",), expected="relevant")
    with pytest.raises(ValueError):
        CategorySpec(name="x", keywords=("a", "b"), expected="maybe")


def test_load_categories(tmp_path):
    path = tmp_path / "cats.yaml"
    path.write_text(
        "- name: resp\n"
        "  keywords: [fever, cough]\n"
        "  expected: relevant\n"
        "- name: sports\n"
        "  keywords: [game, team]\n"
        "  expected: irrelevant\n",
        encoding="utf-8",
    )
    cats = load_categories(path)
    assert [c.name for c in cats] == ["resp", "sports"]
    assert cats[0].keywords == ("fever", "cough")
    bad = tmp_path / "bad.yaml"
    bad.write_text("{}", encoding="utf-8")
    with pytest.raises(ValueError):
        load_categories(bad)


def test_category_preservation_fractions():
    d1 = Corpus(
        [
            doc(0, ["fever", "cough"]),
            doc(1, ["fever", "cough"]),
            doc(2, ["fever", "cough"]),
            doc(3, ["fever", "cough"]),
            doc(4, ["game", "team"]),
            doc(5, ["game", "team"]),
            doc(6, ["quiet"]),
        ]
    )
    cats = [
        CategorySpec(name="resp", keywords=("fever", "cough"), expected="relevant"),
        CategorySpec(name="sports", keywords=("game", "team"), expected="irrelevant"),
        CategorySpec(name="ghost", keywords=("unicorn", "dragon"), expected="irrelevant"),
    ]
    retained = [
        ["d0", "d1", "d2", "d3", "d4"],  # iteration 1
        ["d0", "d1"],                    # iteration 2
        None,                            # growth stop: no filtering happened
    ]
    fractions = category_preservation(d1, retained, cats)
    assert fractions["resp"] == [1.0, 0.5, None]
    assert fractions["sports"] == [0.5, 0.0, None]
    assert fractions["ghost"] == [None, None, None]


# ----------------------------------------------------------------- timeline

def test_keyword_timeline_counts_and_average():
    docs = [
        doc(0, ["fever"], day_offset=0),
        doc(1, ["fever"], day_offset=0),
        doc(2, ["calm"], day_offset=1),
        doc(3, ["fevers"], day_offset=2),  # no fullmatch for the pattern below
        doc(4, ["fever"], day_offset=3),
    ]
    corpus = Corpus(docs)
    points, first = keyword_timeline(corpus, [], ["fever"], moving_avg_days=2)
    assert first == date(2020, 3, 1)
    assert [p.count for p in points] == [2, 0, 0, 1]
    # trailing 2-day average always divides by 2
    assert [p.moving_avg for p in points] == [1.0, 1.0, 0.0, 0.5]
    assert all(not p.in_topic_model for p in points)


def test_keyword_timeline_regex_and_window_flags():
    docs = [doc(i, ["remdesivir"], day_offset=i) for i in range(4)]
    corpus = Corpus(docs)
    windows = [
        WindowDigest(
            start=datetime(2020, 3, 2, tzinfo=UTC),
            end=datetime(2020, 3, 4, tzinfo=UTC),
            relevant_top_words=[["remdesivir", "trial"]],
        ),
        WindowDigest(
            start=datetime(2020, 3, 4, tzinfo=UTC),
            end=datetime(2020, 3, 6, tzinfo=UTC),
            relevant_top_words=[["unrelated"]],
        ),
    ]
    points, first = keyword_timeline(corpus, windows, [r"remdes.*"])
    assert first == date(2020, 3, 1)
    flags = {p.day: p.in_topic_model for p in points}
    assert flags[date(2020, 3, 1)] is False
    assert flags[date(2020, 3, 2)] is True
    assert flags[date(2020, 3, 3)] is True
    assert flags[date(2020, 3, 4)] is False  # second window never surfaced it


def test_keyword_timeline_no_hits():
    corpus = Corpus([doc(0, ["calm"])])
    points, first = keyword_timeline(corpus, [], ["fever"])
    assert points == [] and first is None
    with pytest.raises(ValueError):
        keyword_timeline(corpus, [], [])


# ------------------------------------------------------- model-facing views

def test_concept_fraction_counts_single_token_triggers():
    docs = [doc(i, ["fever", "ward", "cough", "games"]) for i in range(6)]
    corpus = Corpus(docs)
    model = fit(corpus, LdaConfig(k=2, iterations=30, seed=2, top_words=4))
    matcher = TriggerMatcher(
        [
            LexiconEntry(trigger=("fever",), cui="C1", preferred_name="f"),
            LexiconEntry(trigger=("cough",), cui="C2", preferred_name="c"),
            LexiconEntry(trigger=("dry", "cough"), cui="C3", preferred_name="dc"),
        ]
    )
    frac = concept_fraction(model, matcher, top_n=4)
    # each topic's top-4 covers the whole 4-word vocabulary: 2 triggers of 4
    assert frac == pytest.approx(0.5)


def test_topics_digest_ranks_by_score():
    docs = [doc(i, ["a", "b"]) for i in range(4)]
    corpus = Corpus(docs)
    model = fit(corpus, LdaConfig(k=2, iterations=10, seed=1))
    score_set = threshold_topics([3.0, 7.0], 0.5)
    digest = topics_digest(model, score_set)
    assert [d["topic"] for d in digest] == [1, 0]
    assert digest[0]["rank"] == 1 and digest[0]["relevant"] is True
    assert digest[1]["score"] == 3.0


# -------------------------------------------------------------- csv writers

def test_csv_writers_smoke(tmp_path):
    reference = Corpus([doc(0, ["a", "a", "a", "a", "a"]), doc(1, ["a", "b"])])
    filtered = reference.subset(["d0"])
    enr = enrichment_table(filtered, reference, max_n=1, min_count=1)
    write_enrichment_csv(enr, tmp_path / "enr.csv")
    header = (tmp_path / "enr.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "rank,phrase,n,count_filtered,count_reference,rel"

    cats = [CategorySpec(name="c", keywords=("a", "b"), expected="relevant")]
    write_categories_csv({"c": [1.0, None]}, cats, tmp_path / "cats.csv")
    lines = (tmp_path / "cats.csv").read_text(encoding="utf-8").splitlines()
    assert lines[1] == "c,relevant,1,1.0"
    assert lines[2] == "c,relevant,2,"

    points, _ = keyword_timeline(Corpus([doc(0, ["a"])]), [], ["a"])
    write_timeline_csv(points, tmp_path / "tl.csv")
    lines = (tmp_path / "tl.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "date,count,moving_avg,in_topic_model"
    assert lines[1].startswith("2020-03-01,1,")
