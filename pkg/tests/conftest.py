import json

import pytest

from clinsift.corpus import TextNormalizer


@pytest.fixture(scope="session")
def normalizer():
    # session-scoped: loading the stopword and lemma tables is not free
    return TextNormalizer()


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


def make_record(i, text, name="", handle="", bio="", created_at="2020-03-01T00:00:00+00:00", **extra):
    row = {
        "id": f"t{i:04d}",
        "text": text,
        "user_name": name,
        "user_handle": handle or f"user{i}",
        "user_bio": bio,
        "created_at": created_at,
    }
    row.update(extra)
    return row
