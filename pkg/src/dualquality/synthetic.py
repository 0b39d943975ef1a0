"""Deterministic synthetic review generators.

The real corpus behind this toolkit is not public, so tests and demos run on
generated stand-ins: `fixture_dataset` reproduces the reference corpus shape
(label counts 540/281/1136, splits 1200/500/257, mean length ~261 chars /
~41 words), and `planted_pool` produces unlabeled pools with a known fraction
of positives carrying a lexical signal, for exercising the bootstrap loop.

Everything here is a pure function of its seed.
"""

from __future__ import annotations

import numpy as np

from .corpus import Dataset, ProvenanceEvent, Review, SplitSizes, from_reviews, stratified_split
from .labels import Label, ProblemSubtype, SubtypeKind

FIXTURE_SEED = 20230
FIXTURE_COUNTS = {Label.DUAL_QUALITY: 540, Label.OTHER_PROBLEMS: 281, Label.STANDARD: 1136}
FIXTURE_SPLITS = SplitSizes(train=1200, test=500, valid=257)

# Vocabulary is Polish-flavored filler; word lengths are balanced so that the
# fixture's mean text length lands near the 261-char / 41-word targets.
_BACKGROUND = (
    "produkt", "zapach", "jakość", "cena", "opakowanie", "skład", "krem", "kawa",
    "proszek", "szampon", "smak", "kolor", "konsystencja", "działa", "polecam",
    "dobry", "świetny", "słaby", "trwały", "delikatny", "szybko", "bardzo",
    "mocno", "ładnie", "okazja", "zakup", "sklep", "dostawa", "butelka", "płyn",
    "tabletki", "kapsułki", "wydajny", "gładka", "skóra", "włosy", "efekt",
    "stosuję", "używam", "kupuję", "wraca", "miły", "super", "ok", "dla", "nie",
    "ale", "jest", "ten", "tej", "oraz", "mam", "po", "na", "w", "i", "z", "do",
    "to", "są", "też", "już", "od",
)
_DQ_SIGNAL = (
    "niemiec", "niemiecka", "zagranicy", "granicą", "austrii", "francji",
    "wersja", "polska", "polskiej", "rynek", "kraju", "składzie", "różnica",
    "lepsza", "gorsza", "porównałam", "importowana", "tamtejsza", "identyczne",
    "opakowania", "kupione", "przywiozłam",
)
_OP_SIGNAL = (
    "podróbka", "oryginał", "partia", "zamówienie", "niezgodny", "oszustwo",
    "przeterminowany", "pogorszyła", "dawniej", "reklamacja", "paragon",
    "etykieta", "fałszywy", "uszkodzone", "brakuje", "instrukcji",
)
_CATEGORIES = ("beauty", "delicacies", "health", "home_interior", "for_children", "electronics")

_SUBTYPE_CYCLE = (
    SubtypeKind.COUNTERFEIT,
    SubtypeKind.PLACE_OF_PURCHASE_SAME_MARKET,
    SubtypeKind.DETERIORATION_OVER_TIME,
    SubtypeKind.MISMATCH_WITH_ORDER,
    SubtypeKind.MISLEADING_INFORMATION,
    SubtypeKind.SUSPECTED_FRAUD,
    SubtypeKind.PACKAGING_BATCH_SIZE,
    SubtypeKind.OTHER,
)

_CREATED_AT = "2023-03-01T00:00:00+00:00"


def _compose_text(rng: np.random.Generator, label: Label, n_words: int,
                  signal_share: float | None = None, leak: float = 0.0) -> str:
    """Sample a review text of exactly n_words whitespace-delimited words.

    `leak` lets non-matching signal words bleed into a review (ambient country
    mentions in standard reviews), so ranking has to be learned, not keyed off
    a single token.
    """
    if label is Label.DUAL_QUALITY:
        signal, share = _DQ_SIGNAL, 0.35 if signal_share is None else signal_share
    elif label is Label.OTHER_PROBLEMS:
        signal, share = _OP_SIGNAL, 0.30 if signal_share is None else signal_share
    else:
        signal, share = _DQ_SIGNAL, 0.0
    words = []
    for _ in range(n_words):
        roll = rng.random()
        if signal and roll < share:
            words.append(signal[rng.integers(0, len(signal))])
        elif leak and roll < share + leak:
            pool = _DQ_SIGNAL + _OP_SIGNAL
            words.append(pool[rng.integers(0, len(pool))])
        else:
            words.append(_BACKGROUND[rng.integers(0, len(_BACKGROUND))])
    text = " ".join(words)
    return text[0].upper() + text[1:] + "."


def _word_budget(rng: np.random.Generator) -> int:
    return int(rng.integers(29, 54))


def fixture_dataset(seed: int = FIXTURE_SEED) -> Dataset:
    """The bundled stand-in corpus: exact label counts and split sizes."""
    rng = np.random.default_rng(seed)
    reviews: list[Review] = []
    counter = 0
    op_index = 0
    for label in (Label.DUAL_QUALITY, Label.OTHER_PROBLEMS, Label.STANDARD):
        for _ in range(FIXTURE_COUNTS[label]):
            counter += 1
            subtype = None
            if label is Label.OTHER_PROBLEMS:
                kind = _SUBTYPE_CYCLE[op_index % len(_SUBTYPE_CYCLE)]
                detail = "nietypowy problem" if kind is SubtypeKind.OTHER else None
                subtype = ProblemSubtype(kind=kind, detail=detail)
                op_index += 1
            reviews.append(Review(
                id=f"syn-{counter:05d}",
                text=_compose_text(rng, label, _word_budget(rng)),
                lang="pl",
                source="synthetic",
                category=_CATEGORIES[int(rng.integers(0, len(_CATEGORIES)))],
                label=label,
                subtype=subtype,
                provenance=(ProvenanceEvent(actor="generator", at=_CREATED_AT, action="created",
                                            label=label.value),),
            ))
    dataset = from_reviews(reviews, name="synthetic_reviews", created_at=_CREATED_AT)
    return stratified_split(dataset, FIXTURE_SPLITS, seed=seed)


def planted_pool(size: int, positive_rate: float, seed: int,
                 id_prefix: str = "pool", other_rate: float = 0.02,
                 signal_share: float = 0.18, leak: float = 0.03) -> tuple[list[Review], dict[str, Label]]:
    """An unlabeled pool with a known share of dual-quality positives.

    Returns the reviews (label=None) and the hidden gold labels used by a
    simulated annotator. Positives carry the lexical signal vocabulary (with
    some leakage into negatives), so a bag-of-words model can learn to rank
    them but does not get them for free.
    """
    rng = np.random.default_rng(seed)
    reviews: list[Review] = []
    gold: dict[str, Label] = {}
    n_positive = round(size * positive_rate)
    n_other = round(size * other_rate)
    labels = ([Label.DUAL_QUALITY] * n_positive + [Label.OTHER_PROBLEMS] * n_other
              + [Label.STANDARD] * (size - n_positive - n_other))
    order = rng.permutation(size)
    for position, label_idx in enumerate(order):
        label = labels[label_idx]
        review_id = f"{id_prefix}-{position:05d}"
        reviews.append(Review(
            id=review_id,
            text=_compose_text(rng, label, _word_budget(rng), signal_share=signal_share, leak=leak),
            lang="pl",
            source="synthetic",
        ))
        gold[review_id] = label
    return reviews, gold


def seed_examples(n_positive: int, n_negative: int, seed: int, id_prefix: str = "seed",
                  signal_share: float = 0.18, leak: float = 0.03) -> tuple[list[Review], list[Review]]:
    """Labeled seed reviews for starting a bootstrap run; same text
    distribution as `planted_pool` so train and pool match."""
    rng = np.random.default_rng(seed)
    positives = [Review(
        id=f"{id_prefix}-pos-{i:04d}",
        text=_compose_text(rng, Label.DUAL_QUALITY, _word_budget(rng),
                           signal_share=signal_share, leak=leak),
        lang="pl", source="internet", label=Label.DUAL_QUALITY,
    ) for i in range(n_positive)]
    negatives = [Review(
        id=f"{id_prefix}-neg-{i:04d}",
        text=_compose_text(rng, Label.STANDARD, _word_budget(rng),
                           signal_share=signal_share, leak=leak),
        lang="pl", source="ceneo_wizaz", label=Label.STANDARD,
    ) for i in range(n_negative)]
    return positives, negatives
