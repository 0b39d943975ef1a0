"""Iterative dataset construction: train on what is labeled, score the
unlabeled pool, route the top-K candidates to human verification, ingest the
verdicts, repeat. Also the cross-validation label audit used to mine likely
annotation errors before freezing a corpus.

A run is a single logical writer. Iteration records and batches persist as
JSONL under a run directory; annotation ingestion is asynchronous (the loop
never labels anything itself).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .classify import binary_collapse
from .corpus import Dataset, ProvenanceEvent, Review, from_reviews
from .errors import ArgumentError, IntegrityError, StateError
from .labels import LABEL_ORDER, Label, ProblemSubtype

EPOCH = "1970-01-01T00:00:00+00:00"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class FittedModel(Protocol):
    classes: tuple[Label, ...]
    model_id: str

    def predict_proba(self, texts: Sequence[str]) -> "np.ndarray": ...


class Trainer(Protocol):
    def fit(self, reviews: Sequence[Review]) -> FittedModel: ...


@dataclass(frozen=True)
class BatchItem:
    review_id: str
    dq_probability: float
    text: str

    def to_json(self) -> dict:
        return {"review_id": self.review_id, "dq_probability": self.dq_probability, "text": self.text}


@dataclass(frozen=True)
class AnnotationBatch:
    iteration: int
    items: tuple[BatchItem, ...]
    created_at: str = EPOCH

    def ids(self) -> set[str]:
        return {item.review_id for item in self.items}

    def to_json(self) -> dict:
        return {"iteration": self.iteration, "created_at": self.created_at,
                "items": [item.to_json() for item in self.items]}


@dataclass(frozen=True)
class AnnotationDecision:
    review_id: str
    label: Label
    annotator: str
    subtype: ProblemSubtype | None = None
    at: str = EPOCH

    def __post_init__(self) -> None:
        if self.subtype is not None and self.label is not Label.OTHER_PROBLEMS:
            raise ArgumentError("subtype is only valid with label 'other problems'")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    model_id: str
    pool_scored: int
    batch_size: int
    decisions_ingested: int
    labeled_size: int
    label_counts: dict[Label, int]

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "model_id": self.model_id,
            "pool_scored": self.pool_scored,
            "batch_size": self.batch_size,
            "decisions_ingested": self.decisions_ingested,
            "labeled_size": self.labeled_size,
            "label_counts": {label.value: count for label, count in self.label_counts.items()},
        }


@dataclass(frozen=True)
class RunConfig:
    k: int = 200
    mode: str = "binary"
    max_iterations: int = 7
    min_new_positives: int = 5
    seed: int = 0
    backend: dict = field(default_factory=lambda: {"kind": "hashing", "dim": 256, "seed": 0})

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ArgumentError("k must be >= 1")
        if self.mode not in ("binary", "ternary"):
            raise ArgumentError(f"mode must be 'binary' or 'ternary', got {self.mode!r}")

    def to_text(self) -> str:
        lines = [f"k = {self.k}", f"mode = {self.mode}",
                 f"max_iterations = {self.max_iterations}",
                 f"min_new_positives = {self.min_new_positives}",
                 f"seed = {self.seed}", f"backend = {json.dumps(self.backend)}"]
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict:
    """Flat `key = value` lines; values are parsed as JSON when possible."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ArgumentError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        value = value.strip()
        try:
            values[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            values[key.strip()] = value
    return values


def load_run_config(path: str | Path) -> RunConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(values) - known
    if unknown:
        raise ArgumentError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return RunConfig(**values)


def seed_base_dataset(positives: Sequence[Review], negatives: Sequence[Review],
                      at: str = EPOCH) -> Dataset:
    """Merge verified positives and verified standard reviews into the base set."""
    if not positives:
        raise ArgumentError("cannot seed a run without positive examples")
    for review in positives:
        if review.label is not Label.DUAL_QUALITY:
            raise ArgumentError(f"positive seed {review.id!r} is labeled {review.label}")
    for review in negatives:
        if review.label is not Label.STANDARD:
            raise ArgumentError(f"negative seed {review.id!r} is labeled {review.label}")
    ids = [r.id for r in positives] + [r.id for r in negatives]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise IntegrityError(f"duplicate review id across seed inputs: {dup!r}")
    tagged = [replace(r, provenance=r.provenance + (
        ProvenanceEvent(actor="seed", at=at, action="seeded", label=r.label.value),))
        for r in list(positives) + list(negatives)]
    return from_reviews(tagged, name="base", created_at=at)


def select_candidates(scored_pool: Sequence[tuple[str, float]], labeled_ids: set[str],
                      k: int, texts: Mapping[str, str] | None = None,
                      iteration: int = 0, created_at: str = EPOCH) -> AnnotationBatch:
    """Top-k unlabeled candidates by probability; ties broken by ascending id.

    Returns fewer than k when the pool runs out ("up to k" semantics).
    """
    if k < 1:
        raise ArgumentError("k must be >= 1")
    for review_id, prob in scored_pool:
        if not (0.0 <= prob <= 1.0):
            raise ArgumentError(f"probability out of [0,1] for {review_id!r}: {prob!r}")
    candidates = [(review_id, prob) for review_id, prob in scored_pool
                  if review_id not in labeled_ids]
    candidates.sort(key=lambda item: (-item[1], item[0]))
    texts = texts or {}
    items = tuple(BatchItem(review_id=review_id, dq_probability=float(prob),
                            text=texts.get(review_id, ""))
                  for review_id, prob in candidates[:k])
    return AnnotationBatch(iteration=iteration, items=items, created_at=created_at)


class BootstrapRun:
    """Mutable state of one dataset-construction run.

    Holds the labeled set, the currently known pool, the open annotation
    batch and the per-iteration records. If `run_dir` is given, records,
    batches and the labeled set persist there as JSONL after every change.
    """

    def __init__(self, base: Dataset, config: RunConfig | None = None,
                 run_dir: str | Path | None = None):
        self.config = config or RunConfig()
        self.labeled: dict[str, Review] = {}
        for review in base.reviews:
            if review.label is None:
                raise ArgumentError(f"base dataset review {review.id!r} is unlabeled")
            self.labeled[review.id] = review
        self.pool: dict[str, Review] = {}
        self.records: list[IterationRecord] = []
        self.open_batch: AnnotationBatch | None = None
        self.last_fitted: FittedModel | None = None
        self.run_dir = Path(run_dir) if run_dir else None
        if self.run_dir:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            (self.run_dir / "run.cfg").write_text(self.config.to_text(), encoding="utf-8")
            self._persist()

    # -- queries ---------------------------------------------------------

    def label_counts(self) -> dict[Label, int]:
        counts = {label: 0 for label in LABEL_ORDER}
        for review in self.labeled.values():
            counts[review.label] += 1
        return counts

    def labeled_dataset(self) -> Dataset:
        return from_reviews(self.labeled.values(), name="labeled")

    # -- the loop --------------------------------------------------------

    def run_iteration(self, pool: Sequence[Review], trainer: Trainer,
                      k: int | None = None, mode: str | None = None,
                      at: str | None = None) -> IterationRecord:
        """One train -> score -> select cycle. Does not ingest any decisions."""
        k = k if k is not None else self.config.k
        mode = mode if mode is not None else self.config.mode
        at = at if at is not None else _now()
        iteration = len(self.records) + 1

        for review in pool:
            if review.id not in self.labeled:
                self.pool[review.id] = review
        scorable = [review for review in pool if review.id not in self.labeled]

        train_set = self.labeled_dataset()
        if mode == "binary":
            train_set = binary_collapse(train_set, actor="bootstrap", at=at)
        present = {review.label for review in train_set.reviews}
        if len(present) < 2:
            raise StateError(f"iteration {iteration}: need >= 2 classes to train, have {len(present)}")

        try:
            fitted = trainer.fit(train_set.reviews)
        except Exception as exc:
            raise StateError(f"iteration {iteration}: trainer failed: {exc}") from exc
        self.last_fitted = fitted

        if Label.DUAL_QUALITY not in fitted.classes:
            raise StateError(f"iteration {iteration}: model has no dual-quality class")
        dq_index = fitted.classes.index(Label.DUAL_QUALITY)
        if scorable:
            probs = fitted.predict_proba([review.text for review in scorable])[:, dq_index]
        else:
            probs = np.zeros(0)
        scored = [(review.id, float(p)) for review, p in zip(scorable, probs)]

        batch = select_candidates(scored, set(self.labeled), k,
                                  texts={r.id: r.text for r in scorable},
                                  iteration=iteration, created_at=at)
        self.open_batch = batch
        record = IterationRecord(
            iteration=iteration,
            model_id=fitted.model_id,
            pool_scored=len(scored),
            batch_size=len(batch.items),
            decisions_ingested=0,
            labeled_size=len(self.labeled),
            label_counts=self.label_counts(),
        )
        self.records.append(record)
        self._persist(batch=batch)
        return record

    def ingest_annotations(self, decisions: Sequence[AnnotationDecision]) -> "BootstrapRun":
        """Apply human verdicts: new labels grow the set, relabels append provenance."""
        batch_ids = self.open_batch.ids() if self.open_batch else set()
        for decision in decisions:
            known = decision.review_id in self.pool or decision.review_id in self.labeled \
                or decision.review_id in batch_ids
            if not known:
                raise ArgumentError(f"unknown review id in decision: {decision.review_id!r}")
        new_count = 0
        for decision in decisions:
            event = ProvenanceEvent(actor=decision.annotator, at=decision.at,
                                    action="labeled", label=decision.label.value)
            if decision.review_id in self.labeled:
                review = self.labeled[decision.review_id]
                event = replace(event, action="relabeled")
            else:
                review = self.pool.pop(decision.review_id)
                new_count += 1
            self.labeled[decision.review_id] = replace(
                review, label=decision.label, subtype=decision.subtype,
                provenance=review.provenance + (event,))
        if self.records:
            last = self.records[-1]
            self.records[-1] = replace(
                last,
                decisions_ingested=last.decisions_ingested + len(decisions),
                labeled_size=len(self.labeled),
                label_counts=self.label_counts(),
            )
        if decisions:
            self._persist()
        return self

    # -- persistence ------------------------------------------------------

    def _persist(self, batch: AnnotationBatch | None = None) -> None:
        if not self.run_dir:
            return
        with (self.run_dir / "records.jsonl").open("w", encoding="utf-8") as handle:
            for record in self.records:
                handle.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
        if batch is not None:
            with (self.run_dir / "batches.jsonl").open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(batch.to_json(), ensure_ascii=False) + "\n")
            # Full review records behind the open batch, so a resumed run can
            # ingest decisions without the original pool file.
            with (self.run_dir / "batch_reviews.jsonl").open("w", encoding="utf-8") as handle:
                for item in batch.items:
                    review = self.pool.get(item.review_id)
                    if review is not None:
                        handle.write(json.dumps(review.to_json(), ensure_ascii=False) + "\n")
        with (self.run_dir / "labeled.jsonl").open("w", encoding="utf-8") as handle:
            for review in self.labeled.values():
                handle.write(json.dumps(review.to_json(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class AuditRow:
    review_id: str
    gold: Label
    predicted: Label
    disagreement: float  # 1 - p(gold); higher = model more confidently disagrees

    def to_json(self) -> dict:
        return {"review_id": self.review_id, "gold": self.gold.value,
                "predicted": self.predicted.value, "disagreement": self.disagreement}


def audit_labels(dataset: Dataset, trainer: Trainer, folds: int, seed: int) -> list[AuditRow]:
    """Cross-validated label audit: each review is predicted exactly once by a
    model that never saw it, and the output is sorted misclassified-first by
    how confidently the model disagrees. Nothing is relabeled automatically;
    this is a human review queue.
    """
    if folds < 2:
        raise ArgumentError("folds must be >= 2")
    reviews = [r for r in dataset.reviews]
    by_label: dict[Label, list[int]] = {}
    for idx, review in enumerate(reviews):
        if review.label is None:
            raise ArgumentError(f"unlabeled review {review.id!r}")
        by_label.setdefault(review.label, []).append(idx)
    for label, members in by_label.items():
        if len(members) < folds:
            raise ArgumentError(
                f"class {label.value!r} has {len(members)} example(s), fewer than {folds} folds")

    rng = np.random.default_rng(seed)
    fold_of = [0] * len(reviews)
    for members in by_label.values():
        members = list(members)
        rng.shuffle(members)
        for position, idx in enumerate(members):
            fold_of[idx] = position % folds

    rows: list[AuditRow] = []
    for fold in range(folds):
        held_out = [idx for idx in range(len(reviews)) if fold_of[idx] == fold]
        train = [reviews[idx] for idx in range(len(reviews)) if fold_of[idx] != fold]
        if not held_out:
            continue
        fitted = trainer.fit(train)
        probs = fitted.predict_proba([reviews[idx].text for idx in held_out])
        for row, idx in enumerate(held_out):
            review = reviews[idx]
            predicted = fitted.classes[int(np.argmax(probs[row]))]
            if review.label in fitted.classes:
                p_gold = float(probs[row][fitted.classes.index(review.label)])
            else:
                p_gold = 0.0
            rows.append(AuditRow(review_id=review.id, gold=review.label,
                                 predicted=predicted, disagreement=1.0 - p_gold))

    rows.sort(key=lambda r: (r.gold == r.predicted, -r.disagreement, r.review_id))
    return rows
