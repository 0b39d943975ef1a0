from __future__ import annotations

import random
from pathlib import Path

import pytest

from dualquality.corpus import Dataset, ProvenanceEvent, Review, from_reviews
from dualquality.labels import LABEL_ORDER, Label, ProblemSubtype, SubtypeKind

FIXTURE_PATH = Path(__file__).resolve().parents[1] / "src" / "dualquality" / "data" / "synthetic_reviews.jsonl"


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return FIXTURE_PATH


def make_review(i: int, label: Label | None = None, text: str | None = None, **kwargs) -> Review:
    return Review(id=f"r{i:04d}", text=text or f"przykładowa opinia numer {i}",
                  label=label, **kwargs)


def random_review(rng: random.Random, i: int) -> Review:
    """Arbitrary-but-valid review for round-trip fuzzing."""
    label = rng.choice([None, *LABEL_ORDER])
    subtype = None
    if label is Label.OTHER_PROBLEMS and rng.random() < 0.5:
        kind = rng.choice(list(SubtypeKind))
        subtype = ProblemSubtype(kind=kind,
                                 detail="wolny tekst ó" if kind is SubtypeKind.OTHER else None)
    words = [rng.choice(["dobry", "zły", "żółć", "produkt", "ok", "¿?", "ąęćłńóżź", "x"])
             for _ in range(rng.randint(1, 6))]
    provenance = tuple(
        ProvenanceEvent(actor=f"a{j}", at="2023-01-01T00:00:00+00:00",
                        action=rng.choice(["created", "labeled", "relabeled"]),
                        label=rng.choice([None, "standard", "dual quality"]),
                        detail=rng.choice([None, "uwaga"]))
        for j in range(rng.randint(0, 2)))
    return Review(
        id=f"rr{i}",
        text=" ".join(words),
        lang=rng.choice(["pl", "en", "de"]),
        source=rng.choice(["internet", "ceneo_wizaz", "demo_system", "amazon", "synthetic"]),
        category=rng.choice([None, "beauty", "health"]),
        label=label,
        subtype=subtype,
        split=rng.choice([None, "train", "test", "valid"]) if label else None,
        provenance=provenance,
        iteration=rng.choice([None, 0, 3]),
    )


def random_dataset(rng: random.Random, size: int) -> Dataset:
    return from_reviews(random_review(rng, i) for i in range(size))
