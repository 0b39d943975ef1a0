from __future__ import annotations

import random

import pytest

from dualquality.baseline import (Lexicon, classify_baseline, default_lexicon, normalize_text,
                                  null_lemmatizer)
from dualquality.errors import ArgumentError, BackendError
from dualquality.labels import Label

from .conftest import make_review

# Small lemma table standing in for a Polish lemmatizer backend; verifies the
# plug-in path on a 20-token checklist.
_LEMMA_TABLE = {
    "Niemcy": "niemcy", "Niemczech": "niemcy", "niemieckiego": "niemiecki",
    "niemiecka": "niemiecki", "Polsce": "polska", "polskiej": "polski",
    "Francji": "francja", "francuskie": "francuski", "Włoszech": "włochy",
    "włoskiej": "włoski", "Czechach": "czechy", "kupiłem": "kupić",
    "kupione": "kupić", "smakuje": "smakować", "lepszy": "dobry",
    "gorsza": "zły", "proszku": "proszek", "kawy": "kawa",
    "Anglii": "anglia", "Hiszpanii": "hiszpania",
}


def table_lemmatizer(token: str) -> str:
    return _LEMMA_TABLE.get(token, token)


class TestNormalizeText:
    def test_lowercase_split(self):
        assert normalize_text("Kupiłem w Niemczech.") == ["kupiłem", "w", "niemczech"]

    def test_empty(self):
        assert normalize_text("") == []

    def test_null_lemmatizer_is_identity_lowercase(self):
        assert normalize_text("ŻÓŁĆ Gęś", null_lemmatizer) == ["żółć", "gęś"]

    def test_plugged_lemmatizer_checklist(self):
        for token, lemma in _LEMMA_TABLE.items():
            assert normalize_text(token, table_lemmatizer) == [lemma]
        assert normalize_text("Niemcy", table_lemmatizer) == ["niemcy"]

    def test_lemmatizer_failure_names_token(self):
        def broken(token: str) -> str:
            if token == "błąd":
                raise RuntimeError("boom")
            return token

        with pytest.raises(BackendError, match="błąd"):
            normalize_text("to jest błąd", broken)


class TestLexicon:
    def test_default_lexicon_loads(self):
        lexicon = default_lexicon()
        assert len(lexicon) >= 100
        assert "niemiecki" in lexicon.phrases
        assert "nowa zelandia" in lexicon.phrases

    def test_entries_lowercase_no_duplicates(self):
        with pytest.raises(ArgumentError):
            Lexicon(phrases=("Polska",))
        with pytest.raises(ArgumentError):
            Lexicon(phrases=("polska", "polska"))

    def test_comments_and_blank_lines_ignored(self):
        lexicon = Lexicon.from_lines(["# comment", "", "anglia  ", "nowa zelandia # inline"])
        assert lexicon.phrases == ("anglia", "nowa zelandia")


class TestClassifyBaseline:
    def setup_method(self):
        self.lexicon = default_lexicon()

    def test_lexicon_hit_flags_dual_quality(self):
        review = make_review(1, text="Proszek niemiecki jest wydajniejszy")
        assert classify_baseline(review, self.lexicon).label is Label.DUAL_QUALITY

    def test_no_hit_is_standard(self):
        prediction = classify_baseline("Świetny produkt, polecam", self.lexicon)
        assert prediction.label is Label.STANDARD
        assert prediction.probs[Label.STANDARD] == 1.0

    def test_multiword_phrase_consecutive_tokens(self):
        assert classify_baseline("miód z nowa zelandia smakuje inaczej",
                                 self.lexicon).label is Label.DUAL_QUALITY
        # the two tokens must be consecutive
        assert classify_baseline("nowa bardzo zelandia", self.lexicon).label is Label.STANDARD

    def test_token_boundary_no_substring_hits(self):
        assert classify_baseline("polskam coś tam", self.lexicon).label is Label.STANDARD

    def test_degenerate_probabilities(self):
        prediction = classify_baseline("kawa z usa", self.lexicon)
        assert prediction.label is Label.DUAL_QUALITY
        assert prediction.probs[Label.DUAL_QUALITY] == 1.0
        assert sum(prediction.probs.values()) == 1.0


NON_LEXICON_WORDS = ["produkt", "szampon", "zapach", "dobry", "polecam", "krem",
                     "butelka", "smak", "cena", "sklep", "qqq", "xyzzy"]


class TestBaselineProperties:
    def setup_method(self):
        self.lexicon = default_lexicon()

    def test_monotonicity_appending_phrase_flips(self):
        rng = random.Random(5)
        phrases = self.lexicon.phrases
        for _ in range(300):
            base = " ".join(rng.choice(NON_LEXICON_WORDS) for _ in range(rng.randint(1, 8)))
            assert classify_baseline(base, self.lexicon).label is Label.STANDARD
            phrase = rng.choice(phrases)
            assert classify_baseline(base + " " + phrase,
                                     self.lexicon).label is Label.DUAL_QUALITY

    def test_appending_non_lexicon_words_never_changes_decision(self):
        rng = random.Random(6)
        for _ in range(300):
            words = [rng.choice(NON_LEXICON_WORDS) for _ in range(rng.randint(1, 6))]
            if rng.random() < 0.5:
                words.insert(rng.randrange(len(words) + 1), rng.choice(self.lexicon.phrases))
            base = " ".join(words)
            before = classify_baseline(base, self.lexicon).label
            after = classify_baseline(base + " " + rng.choice(NON_LEXICON_WORDS),
                                      self.lexicon).label
            assert before is after

    def test_case_invariance(self):
        rng = random.Random(7)
        vocab = NON_LEXICON_WORDS + list(self.lexicon.phrases[:30])
        for _ in range(500):
            text = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 8)))
            assert classify_baseline(text, self.lexicon).label is \
                classify_baseline(text.upper(), self.lexicon).label

    def test_never_other_problems_10k_random_texts(self):
        rng = random.Random(8)
        alphabet = "aąbcćdeęfghijklłmnńoóprsśtuwyzźż .,!?"
        vocab = NON_LEXICON_WORDS + list(self.lexicon.phrases)
        for _ in range(10_000):
            if rng.random() < 0.5:
                text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 40)))
                if not text.strip():
                    text = "x"
            else:
                text = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 10)))
            assert classify_baseline(text, self.lexicon).label is not Label.OTHER_PROBLEMS
