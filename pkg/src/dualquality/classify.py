"""Trainable classifiers: contrastive pair sampling, a from-scratch
multinomial logistic head over embeddings, and the fit/predict orchestration
that ties them to a pluggable embedding backend.

The head is plain mini-batch gradient descent on L2-regularized multinomial
cross-entropy. Loss is recorded per epoch on the full training set; training
is deterministic for a fixed seed (zero init, seeded shuffles).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .corpus import Dataset, ProvenanceEvent, Review
from .embeddings import EmbeddingBackend, backend_from_descriptor
from .errors import ArgumentError, NumericalError, StateError
from .labels import LABEL_ORDER, Label, Prediction, parse_label_name


@dataclass(frozen=True)
class ContrastivePair:
    """Two reviews with a same-class (1.0) or different-class (0.0) target."""

    id_a: str
    id_b: str
    text_a: str
    text_b: str
    similarity_target: float

    def __post_init__(self) -> None:
        if self.similarity_target not in (0.0, 1.0):
            raise ArgumentError("similarity_target must be 0.0 or 1.0")
        if self.id_a == self.id_b:
            raise ArgumentError(f"pair members must differ by id: {self.id_a!r}")


def generate_contrastive_pairs(train: Sequence[Review], iterations: int, seed: int) -> list[ContrastivePair]:
    """One positive and one negative pair per anchor per iteration.

    Positive partners are sampled uniformly from the anchor's class (anchor
    excluded); negative partners uniformly from all other-class reviews.
    Total pairs = 2 * len(train) * iterations, deterministic per seed.
    """
    if iterations < 1:
        raise ArgumentError("iterations must be >= 1")
    by_label: dict[Label, list[int]] = {}
    for idx, review in enumerate(train):
        if review.label is None:
            raise ArgumentError(f"unlabeled review in training set: {review.id!r}")
        by_label.setdefault(review.label, []).append(idx)
    if len(by_label) < 2:
        raise ArgumentError("need at least 2 classes to build contrastive pairs")
    for label, members in by_label.items():
        if len(members) < 2:
            raise ArgumentError(f"class {label.value!r} has {len(members)} example(s), need >= 2")

    rng = np.random.default_rng(seed)
    pairs: list[ContrastivePair] = []
    for _ in range(iterations):
        for anchor_idx, anchor in enumerate(train):
            same = by_label[anchor.label]
            pos_idx = anchor_idx
            while pos_idx == anchor_idx:
                pos_idx = same[rng.integers(0, len(same))]
            other = [idx for label, members in by_label.items() if label is not anchor.label
                     for idx in members]
            neg_idx = other[rng.integers(0, len(other))]
            positive = train[pos_idx]
            negative = train[neg_idx]
            pairs.append(ContrastivePair(anchor.id, positive.id, anchor.text, positive.text, 1.0))
            pairs.append(ContrastivePair(anchor.id, negative.id, anchor.text, negative.text, 0.0))
    return pairs


@dataclass(frozen=True)
class HeadConfig:
    learning_rate: float = 2e-5
    batch_size: int = 8
    epochs: int = 1
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")
        if self.l2 < 0:
            raise ArgumentError("l2 must be >= 0")

    def to_json(self) -> dict:
        return {"learning_rate": self.learning_rate, "batch_size": self.batch_size,
                "epochs": self.epochs, "l2": self.l2, "seed": self.seed}


@dataclass(frozen=True)
class LogisticHead:
    classes: tuple[Label, ...]
    W: np.ndarray  # (classes, dim)
    b: np.ndarray  # (classes,)
    config: HeadConfig
    epoch_losses: tuple[float, ...] = ()
    model_id: str = ""

    @property
    def dim(self) -> int:
        return self.W.shape[1]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def head_loss_and_gradient(W: np.ndarray, b: np.ndarray, X: np.ndarray,
                           Y: np.ndarray, l2: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + (l2/2)*||W||^2 and its analytic gradient.

    Y is one-hot (rows, classes). Exposed separately so the gradient can be
    checked against finite differences.
    """
    m = X.shape[0]
    probs = softmax(X @ W.T + b)
    eps = 1e-15
    loss = -float(np.sum(Y * np.log(probs + eps))) / m + 0.5 * l2 * float(np.sum(W * W))
    delta = (probs - Y) / m
    grad_W = delta.T @ X + l2 * W
    grad_b = delta.sum(axis=0)
    return loss, grad_W, grad_b


def one_hot(labels: Sequence[Label], classes: tuple[Label, ...]) -> np.ndarray:
    index = {label: i for i, label in enumerate(classes)}
    Y = np.zeros((len(labels), len(classes)), dtype=np.float64)
    for row, label in enumerate(labels):
        Y[row, index[label]] = 1.0
    return Y


def train_head(embeddings: np.ndarray, labels: Sequence[Label], config: HeadConfig) -> LogisticHead:
    """Fit the multinomial logistic head by mini-batch gradient descent."""
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2:
        raise ArgumentError("embeddings must be a 2-D matrix")
    if X.shape[0] != len(labels):
        raise ArgumentError(f"{X.shape[0]} embedding rows vs {len(labels)} labels")
    present = set(labels)
    if len(present) < 2:
        raise ArgumentError("need at least 2 distinct labels to train")
    classes = tuple(label for label in LABEL_ORDER if label in present)

    n, dim = X.shape
    Y = one_hot(labels, classes)
    W = np.zeros((len(classes), dim), dtype=np.float64)
    b = np.zeros(len(classes), dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    losses: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            _, grad_W, grad_b = head_loss_and_gradient(W, b, X[batch], Y[batch], config.l2)
            W -= config.learning_rate * grad_W
            b -= config.learning_rate * grad_b
        loss, _, _ = head_loss_and_gradient(W, b, X, Y, config.l2)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss at epoch {epoch}")
        losses.append(loss)
    # Content-derived id keeps seeded runs byte-reproducible end to end.
    digest = hashlib.blake2b(W.tobytes() + b.tobytes() + json.dumps(config.to_json()).encode(),
                             digest_size=6).hexdigest()
    return LogisticHead(classes=classes, W=W, b=b, config=config,
                        epoch_losses=tuple(losses), model_id=f"head-{digest}")


def predict_proba(texts: Sequence[str], backend: EmbeddingBackend, head: LogisticHead) -> np.ndarray:
    if len(texts) == 0:
        return np.zeros((0, len(head.classes)))
    if backend.dim != head.dim:
        raise StateError(f"backend dim {backend.dim} != head dim {head.dim}")
    return softmax(backend.embed(texts) @ head.W.T + head.b)


def predict(texts: Sequence[str], backend: EmbeddingBackend, head: LogisticHead) -> list[Prediction]:
    """Softmax over W.embed(text)+b; argmax label, ties broken by class order."""
    probs = predict_proba(texts, backend, head)
    out = []
    for row in probs:
        label = head.classes[int(np.argmax(row))]
        out.append(Prediction(label=label,
                              probs={c: float(p) for c, p in zip(head.classes, row)},
                              model_id=head.model_id))
    return out


def binary_collapse(dataset: Dataset, actor: str = "system",
                    at: str = "1970-01-01T00:00:00+00:00") -> Dataset:
    """Merge other-problems and standard into one negative class.

    The merged class is represented as `standard` (the label space stays
    three-valued); the pre-collapse label and subtype are recorded in a
    provenance event, so the mapping is reversible. Subtype is dropped since
    it may only accompany `other problems`.
    """
    new_reviews = []
    for review in dataset.reviews:
        if review.label is None:
            raise StateError(f"cannot collapse unlabeled review {review.id!r}")
        if review.label is Label.OTHER_PROBLEMS:
            event = ProvenanceEvent(actor=actor, at=at, action="collapsed",
                                    label=review.label.value,
                                    detail=review.subtype.kind.value if review.subtype else None)
            review = replace(review, label=Label.STANDARD, subtype=None,
                             provenance=review.provenance + (event,))
        new_reviews.append(review)
    return dataset.with_reviews(new_reviews)


@dataclass(frozen=True)
class FewShotConfig:
    contrastive_iterations: int = 1
    seed: int = 0
    head: HeadConfig = field(default_factory=HeadConfig)

    def to_json(self) -> dict:
        return {"contrastive_iterations": self.contrastive_iterations, "seed": self.seed,
                "head": self.head.to_json()}


class FittedFewShot:
    """A trained embedding+head classifier; immutable, safe for concurrent predict."""

    def __init__(self, backend: EmbeddingBackend, head: LogisticHead, config: FewShotConfig):
        self.backend = backend
        self.head = head
        self.config = config

    @property
    def classes(self) -> tuple[Label, ...]:
        return self.head.classes

    @property
    def model_id(self) -> str:
        return self.head.model_id

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        return predict_proba(texts, self.backend, self.head)

    def predict(self, texts: Sequence[str]) -> list[Prediction]:
        return predict(texts, self.backend, self.head)

    def save(self, path: str | Path) -> Path:
        return save_snapshot(self, path)


class FewShotClassifier:
    """Fit pipeline: sample contrastive pairs, offer them to the backend's
    fine-tuning hook, embed the training texts, train the logistic head."""

    def __init__(self, backend: EmbeddingBackend, config: FewShotConfig | None = None):
        self.backend = backend
        self.config = config or FewShotConfig()

    def fit(self, reviews: Sequence[Review]) -> FittedFewShot:
        labels = []
        for review in reviews:
            if review.label is None:
                raise ArgumentError(f"unlabeled review in training set: {review.id!r}")
            labels.append(review.label)
        pairs = generate_contrastive_pairs(reviews, self.config.contrastive_iterations,
                                           self.config.seed)
        backend = self.backend
        finetune = getattr(backend, "finetune", None)
        if callable(finetune):
            backend = finetune(pairs, self.config)
        X = backend.embed([review.text for review in reviews])
        head = train_head(X, labels, self.config.head)
        return FittedFewShot(backend=backend, head=head, config=self.config)


@dataclass(frozen=True)
class EncoderConfig:
    """Training settings for full-encoder fine-tuning adapters."""

    learning_rate: float = 2e-6
    batch_size: int = 8
    epochs: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ArgumentError("batch_size and epochs must be >= 1")


@runtime_checkable
class EncoderModel(Protocol):
    """A trained encoder handle; interchangeable with FittedFewShot in the
    bootstrap loop and the audit."""

    classes: tuple[Label, ...]
    model_id: str

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray: ...


@runtime_checkable
class EncoderBackend(Protocol):
    """Adapter contract for transformer-encoder classifiers.

    Model runtimes live outside this package; an adapter only has to train
    on labeled reviews and return probability rows. `checked_probability_rows`
    enforces the row-normalization invariant adapters must honor.
    """

    def train(self, dataset: Sequence[Review], config: EncoderConfig) -> EncoderModel: ...


def checked_probability_rows(rows: np.ndarray, n_classes: int, tol: float = 1e-6) -> np.ndarray:
    """Validate an adapter's probability output: shape and row sums within tol."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != n_classes:
        raise StateError(f"expected (n, {n_classes}) probability rows, got {rows.shape}")
    if rows.size and (rows.min() < -tol or rows.max() > 1 + tol):
        raise StateError("probabilities outside [0, 1]")
    if rows.size:
        drift = np.abs(rows.sum(axis=1) - 1.0).max()
        if drift > tol:
            raise StateError(f"probability rows sum off by {drift:.2e} (> {tol})")
    return rows


class EncoderTrainer:
    """Wraps an EncoderBackend as a loop trainer, enforcing the row invariant."""

    def __init__(self, backend: EncoderBackend, config: EncoderConfig | None = None):
        self.backend = backend
        self.config = config or EncoderConfig()

    def fit(self, reviews: Sequence[Review]) -> EncoderModel:
        model = self.backend.train(reviews, self.config)
        return _CheckedEncoderModel(model)


class _CheckedEncoderModel:
    def __init__(self, inner: EncoderModel):
        self._inner = inner
        self.classes = inner.classes
        self.model_id = inner.model_id

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        return checked_probability_rows(self._inner.predict_proba(texts), len(self.classes))


def save_snapshot(fitted: FittedFewShot, path: str | Path) -> Path:
    """Model snapshot: JSON with id, class order, dim, W, b, config, backend descriptor."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "model_id": fitted.model_id,
        "classes": [label.value for label in fitted.classes],
        "dim": fitted.head.dim,
        "W": fitted.head.W.tolist(),
        "b": fitted.head.b.tolist(),
        "config": fitted.config.to_json(),
        "head_config": fitted.head.config.to_json(),
        "epoch_losses": list(fitted.head.epoch_losses),
        "backend": fitted.backend.descriptor(),
    }
    p.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
    return p


def load_snapshot(path: str | Path) -> FittedFewShot:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    head_config = HeadConfig(**data["head_config"])
    config = FewShotConfig(contrastive_iterations=data["config"]["contrastive_iterations"],
                           seed=data["config"]["seed"], head=head_config)
    head = LogisticHead(
        classes=tuple(parse_label_name(name) for name in data["classes"]),
        W=np.asarray(data["W"], dtype=np.float64),
        b=np.asarray(data["b"], dtype=np.float64),
        config=head_config,
        epoch_losses=tuple(data.get("epoch_losses", ())),
        model_id=data["model_id"],
    )
    backend = backend_from_descriptor(data["backend"])
    if backend.dim != head.dim:
        raise StateError(f"snapshot backend dim {backend.dim} != head dim {head.dim}")
    return FittedFewShot(backend=backend, head=head, config=config)
