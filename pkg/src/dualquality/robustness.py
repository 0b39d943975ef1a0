"""Meaning-preserving text perturbations and the decision-disagreement metric.

Five perturbation kinds: toggle the trailing period, flip the first letter's
case, lowercase everything, strip Polish diacritics everywhere, and strip
each distinct diacritic character once. Disagreement is the percentage of
items whose predicted label changes between the original and perturbed text
under the same model state.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .corpus import Review
from .errors import ArgumentError, BackendError
from .labels import Label


class PerturbationKind(Enum):
    PERIOD = "period"
    FIRST_LETTER = "first_letter"
    LOWER = "lower"
    PL_CHARS = "pl_chars"
    PL_CHARS_ONCE = "pl_chars_once"


_DIACRITIC_MAP = {
    "ą": "a", "ę": "e", "ć": "c", "ł": "l", "ń": "n", "ó": "o", "ż": "z", "ź": "z",
    # Uppercase forms are mapped case-preservingly.
    "Ą": "A", "Ę": "E", "Ć": "C", "Ł": "L", "Ń": "N", "Ó": "O", "Ż": "Z", "Ź": "Z",
}
_TRANSLATE_TABLE = str.maketrans(_DIACRITIC_MAP)


def _toggle_period(text: str, strict: bool) -> str:
    """Toggle a '.' at the position right after the last non-whitespace char.

    Trailing whitespace is preserved, which keeps the toggle an involution on
    review-shaped text (at most one terminal mark, attached to the last
    word); endings like "word ." or "word.." cannot round-trip under any
    toggle. Without strict mode, text ending in other punctuation is left
    unchanged (no '.' is stacked after '!', '?', ...).
    """
    last = len(text) - 1
    while last >= 0 and text[last].isspace():
        last -= 1
    if last < 0:
        return "." + text
    ch = text[last]
    if ch == ".":
        return text[:last] + text[last + 1:]
    if not strict and unicodedata.category(ch).startswith("P"):
        return text
    return text[:last + 1] + "." + text[last + 1:]


def _flip_first_letter(text: str) -> str:
    for i, ch in enumerate(text):
        if not ch.isalpha():
            continue
        flipped = ch.lower() if ch.isupper() else ch.upper()
        # Skip characters whose case flip is not a clean 1:1 round trip
        # (e.g. ß -> SS); touching them would break the involution.
        back = flipped.lower() if flipped.isupper() else flipped.upper()
        if len(flipped) != 1 or back != ch:
            return text
        return text[:i] + flipped + text[i + 1:]
    return text


def _strip_diacritics_once(text: str) -> str:
    done: set[str] = set()
    out = []
    for ch in text:
        if ch in _DIACRITIC_MAP and ch not in done:
            out.append(_DIACRITIC_MAP[ch])
            done.add(ch)
        else:
            out.append(ch)
    return "".join(out)


def perturb(text: str, kind: PerturbationKind, strict_period: bool = False) -> str:
    if kind is PerturbationKind.PERIOD:
        return _toggle_period(text, strict_period)
    if kind is PerturbationKind.FIRST_LETTER:
        return _flip_first_letter(text)
    if kind is PerturbationKind.LOWER:
        return text.lower()
    if kind is PerturbationKind.PL_CHARS:
        return text.translate(_TRANSLATE_TABLE)
    if kind is PerturbationKind.PL_CHARS_ONCE:
        return _strip_diacritics_once(text)
    raise ArgumentError(f"unknown perturbation kind: {kind!r}")


PredictFn = Callable[[list[str], int], Sequence[Label]]


@dataclass(frozen=True)
class DisagreementReport:
    kind: PerturbationKind
    per_run: tuple[float, ...]  # percentages in [0, 100]
    mean: float
    std: float

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "per_run": list(self.per_run),
                "mean": self.mean, "std": self.std}


def _predict_checked(predict_fn: PredictFn, texts: list[str], seed: int) -> list[Label]:
    try:
        labels = list(predict_fn(texts, seed))
    except Exception:
        # Locate the failing item so the error carries its index.
        for i, text in enumerate(texts):
            try:
                predict_fn([text], seed)
            except Exception as exc:
                raise BackendError(f"prediction failed at item {i}: {exc}") from exc
        raise
    if len(labels) != len(texts):
        raise BackendError(f"predict_fn returned {len(labels)} labels for {len(texts)} texts")
    return labels


def disagreement(predict_fn: PredictFn, reviews: Sequence[Review | str], kind: PerturbationKind,
                 runs: int = 5, seeds: Sequence[int] | None = None,
                 strict_period: bool = False) -> DisagreementReport:
    """Percentage of decisions that change under the perturbation, per run.

    `predict_fn(texts, seed)` is called once on the originals and once on the
    perturbed texts for every run seed; the model state must be the same for
    both calls of a run. Reports mean and sample std over runs.
    """
    if runs < 1:
        raise ArgumentError("runs must be >= 1")
    if seeds is None:
        seeds = tuple(range(runs))
    if len(seeds) != runs:
        raise ArgumentError(f"{runs} runs but {len(seeds)} seeds")
    texts = [r.text if isinstance(r, Review) else r for r in reviews]
    if not texts:
        raise ArgumentError("need at least one review")
    perturbed = [perturb(t, kind, strict_period) for t in texts]

    per_run: list[float] = []
    for seed in seeds:
        original_labels = _predict_checked(predict_fn, texts, seed)
        perturbed_labels = _predict_checked(predict_fn, perturbed, seed)
        changed = sum(1 for a, b in zip(original_labels, perturbed_labels) if a != b)
        per_run.append(100.0 * changed / len(texts))

    mean = sum(per_run) / runs
    std = 0.0 if runs == 1 else math.sqrt(sum((v - mean) ** 2 for v in per_run) / (runs - 1))
    return DisagreementReport(kind=kind, per_run=tuple(per_run), mean=mean, std=std)
