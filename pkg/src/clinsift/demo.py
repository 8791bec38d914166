"""Synthetic demo feed generator.

Builds a labeled corpus with the structure the pipeline targets: a clinical
minority written by credentialed authors, a credentialed majority posting
about everything else, and a general-public remainder. Each record carries
a `_kind` key (ignored by ingest) so evaluations can check retention.

Usage: python -m clinsift.demo OUTDIR [--seed N] [--docs N]
"""

from __future__ import annotations

import argparse
import json
import random
from collections import Counter
from datetime import datetime, timedelta, timezone
from pathlib import Path

# Clinical content is organized into themes; each planted document draws
# all its phrases from one theme, so topics track themes. Per-theme phrase
# counts differ on purpose: document mention totals drive topic scores, and
# the counts form a score ladder whose two thin bottom rungs (imaging, then
# inflammation) anchor the relative threshold in rounds two and three. Each
# round trims the current bottom rung instead of cutting into the pack of
# high-count themes. Theme sizes are exact quotas, not sampling weights:
# random assignment lets realized sizes drift enough to reorder the ladder.
# Entries are (name, phrases per doc, doc quota weight, pool); all phrases
# are triggers in the bundled demo lexicon.
CLINICAL_THEMES = [
    ("symptoms", 8, 36, ["fever", "dry cough", "fatigue", "myalgia", "headache"]),
    ("ent", 8, 36, ["anosmia", "loss of smell", "loss of taste", "sore throat", "conjunctivitis"]),
    ("respiratory", 8, 36, ["pneumonia", "ards", "hypoxia", "shortness of breath", "oxygen saturation"]),
    ("critical-care", 8, 36, ["intubation", "mechanical ventilation", "ventilator", "icu admission", "pulse oximetry"]),
    ("thrombosis", 8, 36, ["blood clot", "pulmonary embolism", "deep vein thrombosis", "stroke", "d dimer"]),
    ("treatments", 8, 36, ["hydroxychloroquine", "remdesivir", "dexamethasone", "azithromycin", "convalescent plasma"]),
    ("testing", 8, 36, ["pcr test", "antibody test", "nasal swab", "viral load", "ferritin"]),
    ("inflammation", 6, 30, ["kawasaki disease", "chilblains", "cytokine storm", "myocarditis", "lymphopenia"]),
    ("imaging", 4, 17, ["chest ct", "ct scan", "mri", "ultrasound", "ground glass opacity"]),
]

CLINICAL_PHRASES = [p for _, _, _, pool in CLINICAL_THEMES for p in pool]


def _theme_quotas(total: int) -> list[int]:
    """Largest-remainder split of `total` documents across the themes."""
    weights = [w for _, _, w, _ in CLINICAL_THEMES]
    scale = total / sum(weights)
    shares = [w * scale for w in weights]
    quotas = [int(s) for s in shares]
    leftover = total - sum(quotas)
    order = sorted(range(len(shares)), key=lambda i: shares[i] - quotas[i], reverse=True)
    for i in order[:leftover]:
        quotas[i] += 1
    return quotas

# terse scaffolding on purpose: non-trigger tokens smear topic mass across
# themes and blur the score ladder, so each template adds at most two
CLINICAL_TEMPLATES = [
    "{lst} in admitted patients",
    "today on rounds: {lst}",
    "case with {lst}",
    "we keep seeing {lst}",
    "registry update: {lst}",
    "new admission with {lst}",
    "worth a look: {lst}",
    "noting {lst} again",
    "colleagues report {lst}",
    "watch for {lst}",
]


def _phrase_list(phrases: list[str]) -> str:
    if len(phrases) == 1:
        return phrases[0]
    return ", ".join(phrases[:-1]) + " and " + phrases[-1]

# Mundane text is sampled from flavor pools rather than fixed sentences:
# fixed sentences repeat verbatim across documents and claim LDA topics
# that the clinical themes need. Diffuse pools keep the noise diffuse.
MUNDANE_FLAVORS = {
    "politics": [
        "president", "congress", "senate", "senator", "election", "campaign",
        "ballot", "vote", "voter", "poll", "debate", "policy", "governor",
        "mayor", "council", "law", "bill", "reform", "speech", "rally",
        "party", "candidate",
    ],
    "economy": [
        "stock", "market", "economy", "unemployment", "stimulus", "inflation",
        "investor", "trading", "price", "bank", "loan", "mortgage", "budget",
        "tax", "wage", "hiring", "layoff", "retail", "revenue", "profit",
        "quarter", "forecast",
    ],
    "entertainment": [
        "movie", "music", "album", "concert", "festival", "stream", "series",
        "episode", "trailer", "soundtrack", "playlist", "artist", "band",
        "tour", "ticket", "premiere", "sequel", "actor", "director", "studio",
        "singer", "drama",
    ],
    "sports": [
        "game", "team", "season", "league", "coach", "playoff", "stadium",
        "fans", "trade", "roster", "draft", "defense", "offense",
        "tournament", "championship", "practice", "training", "referee",
        "goal", "halftime", "standings", "rivalry",
    ],
    "school": [
        "school", "homework", "teacher", "classroom", "student", "lesson",
        "exam", "grade", "semester", "campus", "lecture", "assignment",
        "textbook", "recess", "tutoring", "principal", "classmate",
        "notebook", "quiz", "essay", "detention", "hallway",
    ],
}

MUNDANE_TEMPLATES = [
    "today: {lst}",
    "still thinking about {lst}",
    "cannot stop reading about {lst}",
    "all anyone talks about is {lst}",
    "this week was all {lst}",
]

HCP_AUTHORS = [
    ("Alice Reed", "areed_md", "Internal medicine MD, tweets are my own"),
    ("Sam Ortiz", "samortiz", "ICU nurse, night shift survivor"),
    ("Priya Nair", "pnair_epi", "Epidemiologist working in public health"),
    ("Dan Wu", "danwu", "Pulmonologist and critical care physician"),
    ("Mia Cole", "miacole_rn", "RN in a county emergency department"),
    ("Omar Haddad", "ohaddad", "Infectious disease fellow, attending next year"),
    ("Eve Larsen", "evelarsen", "Pediatric cardiologist, mom of two"),
    ("Raj Patel", "rpatel_do", "Family medicine DO, rural clinic"),
    ("Joan Fisher", "jfisher", "Hospital pharmacist, vaccine nerd"),
    ("Leo Brandt", "lbrandt", "Paramedic and part time EMT instructor"),
    ("Nina Sousa", "nsousa", "Virologist, PhD, lab rat by choice"),
    ("Tom Avery", "tavery", "Dr Avery, surgeon, occasional runner"),
]

PUBLIC_AUTHORS = [
    ("Jay P", "jayp", "Crypto, coffee, and hot takes"),
    ("Casey Lang", "claang", "Sports fan and amateur chef"),
    ("Robin Diaz", "rdiaz", "Movie buff, playlist curator"),
    ("Pat Moore", "pmoore", "Dad jokes and garden photos"),
    ("Alex Kim", "akim", "Startup person, perpetually caffeinated"),
    ("Dana Ley", "dleyy", "Student, dog person, chronic napper"),
    ("Sasha Brook", "sbrook", "Local news junkie"),
    ("Morgan Ash", "mash", "Running on playlists and snacks"),
]


def generate_records(
    n_relevant: int = 300,
    n_noise_hcp: int = 1200,
    n_public: int = 1500,
    start: str = "2020-03-01",
    days: int = 70,
    seed: int = 7,
    burst_phrase: str | None = None,
    burst_day_range: tuple[int, int] = (28, 42),
    n_burst: int = 0,
    public_clinical_rate: float = 0.06,
    noise_trigger_rate: float = 0.0,
) -> list[dict]:
    """Deterministic labeled record list ready to dump as JSONL.

    `public_clinical_rate` scales how often each trigger phrase shows up in
    public-author chatter, as a fraction of its planted occurrence count.
    Proportional injection keeps the focus/background rate ratio roughly
    equal across phrases; without it, phrases that happen to miss the
    background entirely score an order of magnitude above their peers and
    the topic threshold turns into a lottery.
    """
    rng = random.Random(seed)
    start_dt = datetime.fromisoformat(start).replace(tzinfo=timezone.utc)

    def stamp(day_lo: int = 0, day_hi: int | None = None) -> str:
        hi = day_hi if day_hi is not None else days
        seconds = rng.randrange(day_lo * 86400, hi * 86400)
        return (start_dt + timedelta(seconds=seconds)).isoformat()

    theme_weights = [w for _, _, w, _ in CLINICAL_THEMES]
    theme_seq = []
    for theme, quota in zip(CLINICAL_THEMES, _theme_quotas(n_relevant)):
        theme_seq.extend([theme] * quota)
    rng.shuffle(theme_seq)
    phrase_usage: Counter[str] = Counter()

    # two short sentences per record so a single stray topic assignment
    # cannot dominate the document's topic mass
    def clinical_text(theme: tuple) -> str:
        _, n_phrases, _, pool = theme
        chosen = rng.sample(pool, min(n_phrases, len(pool)))
        while len(chosen) < n_phrases:
            chosen.append(rng.choice(pool))
        phrase_usage.update(chosen)
        split = (len(chosen) + 1) // 2
        first, second = rng.sample(CLINICAL_TEMPLATES, 2)
        return (
            first.format(lst=_phrase_list(chosen[:split]))
            + ". "
            + second.format(lst=_phrase_list(chosen[split:]))
        )

    flavors = sorted(MUNDANE_FLAVORS)

    def mundane_text(with_trigger: bool) -> str:
        pool = MUNDANE_FLAVORS[rng.choice(flavors)]
        words = rng.sample(pool, rng.randint(10, 16))
        text = rng.choice(MUNDANE_TEMPLATES).format(lst=_phrase_list(words))
        if with_trigger:
            text += f", also everyone around me has a {rng.choice(CLINICAL_PHRASES)}"
        return text

    records = []
    for theme in theme_seq:
        name, handle, bio = rng.choice(HCP_AUTHORS)
        records.append(
            {
                "kind": "relevant",
                "text": clinical_text(theme),
                "name": name,
                "handle": handle,
                "bio": bio,
                "created_at": stamp(),
            }
        )
    if n_burst > 0 and burst_phrase is None:
        raise ValueError("n_burst > 0 requires a burst_phrase")
    for _ in range(n_burst):
        name, handle, bio = rng.choice(HCP_AUTHORS)
        base = rng.choices(CLINICAL_THEMES, weights=theme_weights)[0]
        # a micro-trend doc hammers the new phrase alongside familiar theme
        # language; one stray mention per doc would drown in the theme words
        mixed = (f"{base[0]}+burst", base[1], 0, [burst_phrase] * 3 + list(base[3]))
        records.append(
            {
                "kind": "relevant",
                "text": clinical_text(mixed),
                "name": name,
                "handle": handle,
                "bio": bio,
                "created_at": stamp(*burst_day_range),
            }
        )
    for _ in range(n_noise_hcp):
        name, handle, bio = rng.choice(HCP_AUTHORS)
        records.append(
            {
                "kind": "noise_hcp",
                "text": mundane_text(rng.random() < noise_trigger_rate),
                "name": name,
                "handle": handle,
                "bio": bio,
                "created_at": stamp(),
            }
        )
    public = []
    for _ in range(n_public):
        name, handle, bio = rng.choice(PUBLIC_AUTHORS)
        public.append(
            {
                "kind": "public",
                "text": mundane_text(False),
                "name": name,
                "handle": handle,
                "bio": bio,
                "created_at": stamp(),
            }
        )
    if public and public_clinical_rate > 0:
        injections = []
        for phrase, used in sorted(phrase_usage.items()):
            injections.extend([phrase] * max(1, round(used * public_clinical_rate)))
        rng.shuffle(injections)
        targets = rng.sample(range(len(public)), min(len(injections), len(public)))
        for slot, phrase in zip(targets, injections):
            public[slot]["text"] += f", also everyone around me has a {phrase}"
    records.extend(public)
    rng.shuffle(records)
    out = []
    for idx, rec in enumerate(records):
        out.append(
            {
                "id": f"t{idx:06d}",
                "text": rec["text"],
                "user_name": rec["name"],
                "user_handle": rec["handle"],
                "user_bio": rec["bio"],
                "created_at": rec["created_at"],
                "_kind": rec["kind"],
            }
        )
    return out


def write_demo(outdir, seed: int = 7, n_docs: int = 3000) -> Path:
    """Write records.jsonl plus a ready-to-run config.yaml; returns the dir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    n_relevant = max(1, n_docs // 10)
    n_noise = max(1, (n_docs - n_relevant) * 2 // 5)
    n_public = max(1, n_docs - n_relevant - n_noise)
    records = generate_records(
        n_relevant=n_relevant, n_noise_hcp=n_noise, n_public=n_public, seed=seed
    )
    records_path = outdir / "records.jsonl"
    with open(records_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    config_path = outdir / "config.yaml"
    config_path.write_text(
        "\n".join(
            [
                f"input: {records_path}",
                "k: 20",
                "tau: 0.25",
                "max_iterations: 3",
                "lda_iterations: 300",
                "seed: 11",
                "stop_growth_factor: 10.0",
                "",
            ]
        ),
        encoding="utf-8",
    )
    return outdir


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description="generate a synthetic demo feed")
    parser.add_argument("outdir")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--docs", type=int, default=3000)
    args = parser.parse_args(argv)
    path = write_demo(args.outdir, seed=args.seed, n_docs=args.docs)
    print(f"wrote {path / 'records.jsonl'} and {path / 'config.yaml'}")


if __name__ == "__main__":
    main()
