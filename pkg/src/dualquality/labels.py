"""Label space shared by every classifier in the package.

The task is a three-class problem. Serialized class names are lowercase and
space-separated ("dual quality", "other problems", "standard") and double as
the strings a prompted model is asked to answer with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import ArgumentError


class Label(Enum):
    DUAL_QUALITY = "dual quality"
    OTHER_PROBLEMS = "other problems"
    STANDARD = "standard"

    def __str__(self) -> str:
        return self.value


# Fixed order used for class indexing and argmax tie-breaking.
LABEL_ORDER: tuple[Label, ...] = (Label.DUAL_QUALITY, Label.OTHER_PROBLEMS, Label.STANDARD)

_BY_NAME = {label.value: label for label in LABEL_ORDER}


def parse_label_name(name: str) -> Label:
    """Map a serialized class name to its Label; raises ArgumentError on anything else."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ArgumentError(f"unknown label name: {name!r}") from None


class SubtypeKind(Enum):
    COUNTERFEIT = "counterfeit"
    PLACE_OF_PURCHASE_SAME_MARKET = "place_of_purchase_same_market"
    DETERIORATION_OVER_TIME = "deterioration_over_time"
    MISMATCH_WITH_ORDER = "mismatch_with_order"
    MISLEADING_INFORMATION = "misleading_information"
    SUSPECTED_FRAUD = "suspected_fraud"
    PACKAGING_BATCH_SIZE = "packaging_batch_size"
    OTHER = "other"


@dataclass(frozen=True)
class ProblemSubtype:
    """Finer-grained issue type attached to other-problems reviews.

    `OTHER` is the open end of the taxonomy and carries free text in `detail`.
    """

    kind: SubtypeKind
    detail: str | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "detail": self.detail}

    @classmethod
    def from_json(cls, data: dict) -> "ProblemSubtype":
        try:
            kind = SubtypeKind(data["kind"])
        except (KeyError, ValueError, TypeError):
            raise ArgumentError(f"invalid subtype payload: {data!r}") from None
        detail = data.get("detail")
        return cls(kind=kind, detail=detail)


@dataclass(frozen=True)
class Prediction:
    """A classifier decision with its per-class probability mass.

    Invariants: probabilities lie in [0, 1] and sum to 1 (within 1e-9); the
    label is the argmax with ties broken by LABEL_ORDER.
    """

    label: Label
    probs: dict[Label, float] = field(compare=False)
    model_id: str = ""

    def __post_init__(self) -> None:
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-9:
            raise ArgumentError(f"probabilities sum to {total!r}, expected 1.0")
        for label, p in self.probs.items():
            if not (-1e-12 <= p <= 1.0 + 1e-12):
                raise ArgumentError(f"probability out of range for {label}: {p!r}")

    def to_json(self) -> dict:
        return {
            "label": self.label.value,
            "probs": {label.value: p for label, p in self.probs.items()},
            "model_id": self.model_id,
        }


def degenerate_prediction(label: Label, model_id: str, classes: tuple[Label, ...] = LABEL_ORDER) -> Prediction:
    """All probability mass on one label (rule-based and prompted classifiers)."""
    if label not in classes:
        raise ArgumentError(f"label {label} not among classes {classes}")
    return Prediction(label=label, probs={c: (1.0 if c is label else 0.0) for c in classes}, model_id=model_id)
