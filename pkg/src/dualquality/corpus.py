"""Review dataset model: records, JSONL persistence, splitting, statistics.

Datasets are immutable values; every operation that "changes" one returns a
new Dataset. The on-disk format is JSON Lines, UTF-8, one review per line,
with exactly these fields per record:

    id, text, lang, source, category, label, subtype, split, provenance, iteration

Optional fields are serialized as null, never omitted, so files are stable
and diffable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ArgumentError, IntegrityError, ParseError, StateError
from .labels import LABEL_ORDER, Label, ProblemSubtype, parse_label_name

SCHEMA_VERSION = 1

SOURCES = ("internet", "ceneo_wizaz", "demo_system", "amazon", "synthetic")
SPLITS = ("train", "test", "valid")


@dataclass(frozen=True)
class ProvenanceEvent:
    """One audit entry: who did what to a review's label, and when."""

    actor: str
    at: str
    action: str
    label: str | None = None
    detail: str | None = None

    def to_json(self) -> dict:
        return {"actor": self.actor, "at": self.at, "action": self.action,
                "label": self.label, "detail": self.detail}

    @classmethod
    def from_json(cls, data: dict) -> "ProvenanceEvent":
        return cls(actor=str(data["actor"]), at=str(data["at"]), action=str(data["action"]),
                   label=data.get("label"), detail=data.get("detail"))


@dataclass(frozen=True)
class Review:
    id: str
    text: str
    lang: str = "pl"
    source: str = "internet"
    category: str | None = None
    label: Label | None = None
    subtype: ProblemSubtype | None = None
    split: str | None = None
    provenance: tuple[ProvenanceEvent, ...] = ()
    iteration: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ArgumentError("review id must be non-empty")
        if not self.text.strip():
            raise ArgumentError(f"review {self.id!r}: text empty after trimming")
        if self.source not in SOURCES:
            raise ArgumentError(f"review {self.id!r}: unknown source {self.source!r}")
        if self.split is not None and self.split not in SPLITS:
            raise ArgumentError(f"review {self.id!r}: unknown split {self.split!r}")
        if self.subtype is not None and self.label is not Label.OTHER_PROBLEMS:
            raise ArgumentError(f"review {self.id!r}: subtype requires label 'other problems'")
        if self.iteration is not None and self.iteration < 0:
            raise ArgumentError(f"review {self.id!r}: iteration must be >= 0")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "lang": self.lang,
            "source": self.source,
            "category": self.category,
            "label": self.label.value if self.label else None,
            "subtype": self.subtype.to_json() if self.subtype else None,
            "split": self.split,
            "provenance": [event.to_json() for event in self.provenance],
            "iteration": self.iteration,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Review":
        missing = [key for key in ("id", "text") if key not in data]
        if missing:
            raise ParseError(f"record missing required field(s): {', '.join(missing)}")
        label = data.get("label")
        subtype = data.get("subtype")
        return cls(
            id=str(data["id"]),
            text=str(data["text"]),
            lang=str(data.get("lang") or "pl"),
            source=str(data.get("source") or "internet"),
            category=data.get("category"),
            label=parse_label_name(label) if label is not None else None,
            subtype=ProblemSubtype.from_json(subtype) if subtype is not None else None,
            split=data.get("split"),
            provenance=tuple(ProvenanceEvent.from_json(e) for e in data.get("provenance") or ()),
            iteration=data.get("iteration"),
        )


@dataclass(frozen=True)
class DatasetMeta:
    name: str = "dataset"
    created_at: str = "1970-01-01T00:00:00+00:00"
    schema_version: int = SCHEMA_VERSION


@dataclass(frozen=True)
class Dataset:
    reviews: tuple[Review, ...]
    meta: DatasetMeta = field(default_factory=DatasetMeta)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for review in self.reviews:
            if review.id in seen:
                raise IntegrityError(f"duplicate review id: {review.id!r}")
            seen.add(review.id)

    def __len__(self) -> int:
        return len(self.reviews)

    def __iter__(self):
        return iter(self.reviews)

    def by_id(self, review_id: str) -> Review:
        for review in self.reviews:
            if review.id == review_id:
                return review
        raise KeyError(review_id)

    def labeled(self) -> tuple[Review, ...]:
        return tuple(r for r in self.reviews if r.label is not None)

    def subset(self, split: str) -> tuple[Review, ...]:
        return tuple(r for r in self.reviews if r.split == split)

    def with_reviews(self, reviews: Iterable[Review]) -> "Dataset":
        return Dataset(reviews=tuple(reviews), meta=self.meta)


def from_reviews(reviews: Iterable[Review], name: str = "dataset",
                 created_at: str = "1970-01-01T00:00:00+00:00") -> Dataset:
    return Dataset(reviews=tuple(reviews), meta=DatasetMeta(name=name, created_at=created_at))


def load_dataset(path: str | Path, format: str = "jsonl") -> Dataset:
    """Load a dataset from a JSONL file.

    Raises ParseError (with the 1-based line number) on malformed lines and
    IntegrityError on duplicate ids. An empty file is a valid empty dataset.
    """
    if format != "jsonl":
        raise ArgumentError(f"unsupported format: {format!r}")
    p = Path(path)
    reviews: list[Review] = []
    seen: set[str] = set()
    with p.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{p}:{lineno}: invalid JSON: {exc.msg}") from exc
            try:
                review = Review.from_json(raw)
            except (ParseError, ArgumentError) as exc:
                raise ParseError(f"{p}:{lineno}: {exc}") from exc
            if review.id in seen:
                raise IntegrityError(f"{p}:{lineno}: duplicate review id: {review.id!r}")
            seen.add(review.id)
            reviews.append(review)
    return Dataset(reviews=tuple(reviews), meta=DatasetMeta(name=p.stem))


def save_dataset(dataset: Dataset, path: str | Path) -> Path:
    """Write one JSON object per review, UTF-8, stable field order."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as handle:
        for review in dataset.reviews:
            handle.write(json.dumps(review.to_json(), ensure_ascii=False) + "\n")
    return p


@dataclass(frozen=True)
class SplitSizes:
    train: int
    test: int
    valid: int

    def total(self) -> int:
        return self.train + self.test + self.valid

    def as_dict(self) -> dict[str, int]:
        return {"train": self.train, "test": self.test, "valid": self.valid}


def stratified_split(dataset: Dataset, sizes: SplitSizes, seed: int) -> Dataset:
    """Assign train/test/valid splits, stratified by label.

    Per-class counts in each split land within 1 of the proportional ideal
    n_class * size_split / n_total: each (class, split) cell receives either
    floor(ideal) or floor(ideal)+1, allocated by largest fractional remainder
    subject to exact split totals. Deterministic for a fixed seed.
    """
    if sizes.train < 0 or sizes.test < 0 or sizes.valid < 0:
        raise ArgumentError("split sizes must be non-negative")
    total = len(dataset)
    if sizes.total() != total:
        raise ArgumentError(f"split sizes sum to {sizes.total()}, dataset has {total} reviews")
    unlabeled = [r.id for r in dataset.reviews if r.label is None]
    if unlabeled:
        raise StateError(f"cannot split: {len(unlabeled)} unlabeled review(s), first: {unlabeled[0]!r}")
    if total == 0:
        return dataset

    rng = np.random.default_rng(seed)
    split_names = list(SPLITS)
    split_sizes = [sizes.train, sizes.test, sizes.valid]

    by_label: dict[Label, list[int]] = {}
    for idx, review in enumerate(dataset.reviews):
        by_label.setdefault(review.label, []).append(idx)
    labels = [label for label in LABEL_ORDER if label in by_label]

    # Quota matrix: floors first, then distribute the remainder by descending
    # fractional part while respecting both row (class) and column (split) sums.
    quotas = {label: [0, 0, 0] for label in labels}
    fractional: list[tuple[float, Label, int]] = []
    col_deficit = list(split_sizes)
    for label in labels:
        n_class = len(by_label[label])
        row_assigned = 0
        for s, size in enumerate(split_sizes):
            ideal = n_class * size / total
            base = math.floor(ideal)
            quotas[label][s] = base
            row_assigned += base
            col_deficit[s] -= base
            fractional.append((ideal - base, label, s))
    row_deficit = {label: len(by_label[label]) - sum(quotas[label]) for label in labels}

    fractional.sort(key=lambda item: (-item[0], item[1].value, item[2]))
    for _, label, s in fractional:
        if row_deficit[label] > 0 and col_deficit[s] > 0:
            quotas[label][s] += 1
            row_deficit[label] -= 1
            col_deficit[s] -= 1
    # The single greedy pass always clears both deficits: a cell is skipped only
    # when its row or column is already satisfied, and deficits never increase.
    if any(row_deficit.values()) or any(col_deficit):
        raise RuntimeError("internal error: split quota allocation left a deficit")

    assignment: dict[int, str] = {}
    for label in labels:
        members = list(by_label[label])
        rng.shuffle(members)
        cursor = 0
        for s, name in enumerate(split_names):
            take = quotas[label][s]
            for idx in members[cursor:cursor + take]:
                assignment[idx] = name
            cursor += take

    new_reviews = tuple(replace(review, split=assignment[idx])
                        for idx, review in enumerate(dataset.reviews))
    return dataset.with_reviews(new_reviews)


@dataclass(frozen=True)
class DatasetStats:
    total: int
    label_counts: dict[Label, int]
    split_label_counts: dict[str, dict[Label, int]]
    split_totals: dict[str, int]
    mean_chars: float
    mean_words: float
    category_counts: dict[Label, dict[str, int]]

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "label_counts": {k.value: v for k, v in self.label_counts.items()},
            "split_label_counts": {
                split: {k.value: v for k, v in counts.items()}
                for split, counts in self.split_label_counts.items()
            },
            "split_totals": dict(self.split_totals),
            "mean_chars": self.mean_chars,
            "mean_words": self.mean_words,
            "category_counts": {
                k.value: dict(v) for k, v in self.category_counts.items()
            },
        }


def compute_stats(dataset: Dataset) -> DatasetStats:
    """Exact counts plus mean text length in characters and words.

    Word count is defined as splitting on Unicode whitespace; this is the
    artifact's definition, stated here because length statistics depend on it.
    """
    label_counts: dict[Label, int] = {label: 0 for label in LABEL_ORDER}
    split_label_counts: dict[str, dict[Label, int]] = {}
    split_totals: dict[str, int] = {}
    category_counts: dict[Label, dict[str, int]] = {label: {} for label in LABEL_ORDER}
    chars = 0
    words = 0
    for review in dataset.reviews:
        chars += len(review.text)
        words += len(review.text.split())
        if review.label is not None:
            label_counts[review.label] += 1
            if review.category:
                cat = category_counts[review.label]
                cat[review.category] = cat.get(review.category, 0) + 1
        split = review.split or "unassigned"
        split_totals[split] = split_totals.get(split, 0) + 1
        counts = split_label_counts.setdefault(split, {label: 0 for label in LABEL_ORDER})
        if review.label is not None:
            counts[review.label] += 1
    n = len(dataset)
    return DatasetStats(
        total=n,
        label_counts=label_counts,
        split_label_counts=split_label_counts,
        split_totals=split_totals,
        mean_chars=(chars / n) if n else 0.0,
        mean_words=(words / n) if n else 0.0,
        category_counts=category_counts,
    )
