"""Naive lexicon classifier: a review is flagged dual quality when it
mentions another country or nationality.

Texts are tokenized, optionally lemmatized by a pluggable normalizer, and
matched against a phrase lexicon on token boundaries (no substring hits:
"polskam" does not match "polska"). Multi-word phrases match consecutive
tokens. The default normalizer is the identity, so the shipped lexicon also
carries hand-added inflected variants.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from .corpus import Review
from .errors import ArgumentError, BackendError
from .labels import Label, Prediction, degenerate_prediction

Lemmatizer = Callable[[str], str]

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def null_lemmatizer(token: str) -> str:
    return token


@dataclass(frozen=True)
class Lexicon:
    """Ordered set of lowercase phrases; single- or multi-word."""

    phrases: tuple[str, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for phrase in self.phrases:
            if not phrase.strip():
                raise ArgumentError("empty lexicon phrase")
            if phrase != phrase.lower():
                raise ArgumentError(f"lexicon phrase must be lowercase: {phrase!r}")
            if phrase in seen:
                raise ArgumentError(f"duplicate lexicon phrase: {phrase!r}")
            seen.add(phrase)

    def __len__(self) -> int:
        return len(self.phrases)

    @classmethod
    def from_lines(cls, lines) -> "Lexicon":
        phrases = []
        for line in lines:
            line = line.split("#", 1)[0].strip()
            if line:
                phrases.append(line)
        return cls(phrases=tuple(phrases))

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicon":
        with Path(path).open("r", encoding="utf-8") as handle:
            return cls.from_lines(handle)


def default_lexicon() -> Lexicon:
    text = resources.files("dualquality").joinpath("data/country_lexicon.txt").read_text("utf-8")
    return Lexicon.from_lines(text.splitlines())


def normalize_text(text: str, lemmatizer: Lemmatizer | None = None) -> list[str]:
    """Lowercase token stream; each token is its lemma when a lemmatizer is plugged in.

    A lemmatizer failure is surfaced as BackendError naming the offending token.
    """
    tokens = _TOKEN_RE.findall(text)
    if lemmatizer is None or lemmatizer is null_lemmatizer:
        return [token.lower() for token in tokens]
    out = []
    for token in tokens:
        try:
            lemma = lemmatizer(token)
        except Exception as exc:
            raise BackendError(f"lemmatizer failed on token {token!r}: {exc}") from exc
        out.append(lemma.lower())
    return out


BASELINE_MODEL_ID = "baseline-lexicon"


def classify_baseline(review: Review | str, lexicon: Lexicon,
                      lemmatizer: Lemmatizer | None = None) -> Prediction:
    """dual quality iff any lexicon phrase occurs in the token sequence; else standard.

    Never emits "other problems"; probabilities are degenerate.
    """
    text = review.text if isinstance(review, Review) else review
    tokens = normalize_text(text, lemmatizer)
    label = Label.DUAL_QUALITY if _matches(tokens, lexicon) else Label.STANDARD
    return degenerate_prediction(label, BASELINE_MODEL_ID)


def _matches(tokens: list[str], lexicon: Lexicon) -> bool:
    singles = {p for p in lexicon.phrases if " " not in p}
    multis = [tuple(p.split()) for p in lexicon.phrases if " " in p]
    if any(token in singles for token in tokens):
        return True
    for phrase in multis:
        width = len(phrase)
        for start in range(len(tokens) - width + 1):
            if tuple(tokens[start:start + width]) == phrase:
                return True
    return False
