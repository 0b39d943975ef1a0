from __future__ import annotations

import json
import random

import pytest

from dualquality.corpus import (Dataset, Review, SplitSizes, compute_stats, from_reviews,
                                load_dataset, save_dataset, stratified_split)
from dualquality.errors import ArgumentError, IntegrityError, ParseError, StateError
from dualquality.labels import LABEL_ORDER, Label, ProblemSubtype, SubtypeKind
from dualquality.synthetic import fixture_dataset

from .conftest import make_review, random_dataset


class TestReviewModel:
    def test_empty_text_rejected(self):
        with pytest.raises(ArgumentError):
            Review(id="x", text="   \n ")

    def test_subtype_requires_other_problems(self):
        subtype = ProblemSubtype(kind=SubtypeKind.COUNTERFEIT)
        with pytest.raises(ArgumentError):
            Review(id="x", text="ok produkt", label=Label.STANDARD, subtype=subtype)
        review = Review(id="x", text="ok produkt", label=Label.OTHER_PROBLEMS, subtype=subtype)
        assert review.subtype.kind is SubtypeKind.COUNTERFEIT

    def test_duplicate_ids_rejected(self):
        with pytest.raises(IntegrityError):
            from_reviews([make_review(1), make_review(1)])

    def test_label_serialization_names(self):
        assert [label.value for label in LABEL_ORDER] == [
            "dual quality", "other problems", "standard"]


class TestLoadDataset:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        assert len(load_dataset(path)) == 0

    def test_fixture_counts(self, fixture_path):
        stats = compute_stats(load_dataset(fixture_path))
        assert stats.total == 1957
        assert stats.label_counts[Label.DUAL_QUALITY] == 540
        assert stats.label_counts[Label.OTHER_PROBLEMS] == 281
        assert stats.label_counts[Label.STANDARD] == 1136

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = json.dumps(make_review(1).to_json(), ensure_ascii=False)
        path.write_text(good + "\n{not json}\n", encoding="utf-8")
        with pytest.raises(ParseError, match=":2"):
            load_dataset(path)

    def test_missing_text_field_reports_line(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text('{"id": "a"}\n', encoding="utf-8")
        with pytest.raises(ParseError, match="text"):
            load_dataset(path)

    def test_duplicate_id_is_integrity_error(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        row = json.dumps(make_review(7).to_json(), ensure_ascii=False)
        path.write_text(row + "\n" + row + "\n", encoding="utf-8")
        with pytest.raises(IntegrityError, match="r0007"):
            load_dataset(path)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ArgumentError):
            load_dataset(tmp_path / "x.csv", format="csv")


class TestRoundTrip:
    def test_save_load_identity_500_random_datasets(self, tmp_path):
        rng = random.Random(1234)
        for case in range(500):
            dataset = random_dataset(rng, rng.randint(0, 6))
            path = tmp_path / f"case{case}.jsonl"
            save_dataset(dataset, path)
            loaded = load_dataset(path)
            assert loaded.reviews == dataset.reviews

    def test_unicode_preserved(self, tmp_path):
        review = make_review(1, text="Żółć i jaźń — „cytat” <review> \\n")
        path = save_dataset(from_reviews([review]), tmp_path / "u.jsonl")
        assert load_dataset(path).reviews[0].text == review.text


class TestStratifiedSplit:
    def test_fixture_split_sizes_exact(self, fixture_path):
        stats = compute_stats(load_dataset(fixture_path))
        assert stats.split_totals == {"train": 1200, "test": 500, "valid": 257}

    def test_fixture_split_cells(self, fixture_path):
        stats = compute_stats(load_dataset(fixture_path))
        by = stats.split_label_counts
        assert by["train"][Label.DUAL_QUALITY] == 331
        assert by["test"][Label.DUAL_QUALITY] == 138
        assert by["valid"][Label.DUAL_QUALITY] == 71
        assert by["train"][Label.OTHER_PROBLEMS] == 172
        assert by["test"][Label.OTHER_PROBLEMS] == 72
        assert by["valid"][Label.OTHER_PROBLEMS] == 37
        assert by["train"][Label.STANDARD] == 697
        assert by["test"][Label.STANDARD] == 290
        assert by["valid"][Label.STANDARD] == 149

    def test_degenerate_split_all_train(self):
        dataset = from_reviews([make_review(i, label=Label.STANDARD) for i in range(9)])
        result = stratified_split(dataset, SplitSizes(9, 0, 0), seed=5)
        assert all(review.split == "train" for review in result.reviews)

    def test_same_seed_same_assignment(self):
        dataset = from_reviews(
            [make_review(i, label=LABEL_ORDER[i % 3]) for i in range(30)])
        a = stratified_split(dataset, SplitSizes(18, 8, 4), seed=11)
        b = stratified_split(dataset, SplitSizes(18, 8, 4), seed=11)
        assert [r.split for r in a.reviews] == [r.split for r in b.reviews]

    def test_sizes_must_sum(self):
        dataset = from_reviews([make_review(i, label=Label.STANDARD) for i in range(5)])
        with pytest.raises(ArgumentError):
            stratified_split(dataset, SplitSizes(3, 1, 0), seed=0)

    def test_unlabeled_review_is_state_error(self):
        dataset = from_reviews([make_review(0, label=Label.STANDARD), make_review(1)])
        with pytest.raises(StateError):
            stratified_split(dataset, SplitSizes(2, 0, 0), seed=0)

    def test_partition_and_stratification_properties(self):
        rng = random.Random(77)
        for _ in range(40):
            n = rng.randint(3, 60)
            labels = [rng.choice(LABEL_ORDER) for _ in range(n)]
            dataset = from_reviews(
                [make_review(i, label=labels[i]) for i in range(n)])
            n_train = rng.randint(0, n)
            n_test = rng.randint(0, n - n_train)
            sizes = SplitSizes(n_train, n_test, n - n_train - n_test)
            result = stratified_split(dataset, sizes, seed=rng.randint(0, 10_000))

            by_split: dict[str, list[Review]] = {"train": [], "test": [], "valid": []}
            for review in result.reviews:
                by_split[review.split].append(review)
            # partition: disjoint by construction; exhaustive and exact sizes
            assert sum(len(v) for v in by_split.values()) == n
            assert len(by_split["train"]) == sizes.train
            assert len(by_split["test"]) == sizes.test
            assert len(by_split["valid"]) == sizes.valid
            # per-class count within 1 of the proportional ideal
            for label in LABEL_ORDER:
                n_class = sum(1 for l in labels if l is label)
                for split_name, size in sizes.as_dict().items():
                    got = sum(1 for r in by_split[split_name] if r.label is label)
                    ideal = n_class * size / n
                    assert abs(got - ideal) <= 1.0 + 1e-9, (label, split_name, got, ideal)


class TestComputeStats:
    def test_mean_chars_simple(self):
        reviews = [make_review(0, text="a" * 10), make_review(1, text="b" * 20)]
        stats = compute_stats(from_reviews(reviews))
        assert stats.mean_chars == 15.0

    def test_fixture_length_targets(self, fixture_path):
        stats = compute_stats(load_dataset(fixture_path))
        assert abs(stats.mean_chars - 261) <= 5
        assert abs(stats.mean_words - 41) <= 2

    def test_empty_dataset_zeros(self):
        stats = compute_stats(Dataset(reviews=()))
        assert stats.total == 0
        assert stats.mean_chars == 0.0
        assert stats.mean_words == 0.0

    def test_split_counts_sum_to_totals(self, fixture_path):
        stats = compute_stats(load_dataset(fixture_path))
        for split_name, counts in stats.split_label_counts.items():
            assert sum(counts.values()) == stats.split_totals[split_name]
        assert sum(stats.split_totals.values()) == stats.total

    def test_generator_matches_frozen_file(self, fixture_path):
        # The checked-in fixture must stay in sync with its generator.
        assert fixture_dataset().reviews == load_dataset(fixture_path).reviews


class TestCategoryHistogram:
    def test_fixture_category_counts_sum_to_label_counts(self, fixture_path):
        stats = compute_stats(load_dataset(fixture_path))
        for label, histogram in stats.category_counts.items():
            assert sum(histogram.values()) == stats.label_counts[label]
            assert all(count > 0 for count in histogram.values())

    def test_uncategorized_reviews_not_counted(self):
        reviews = [make_review(0, label=Label.STANDARD, category="beauty"),
                   make_review(1, label=Label.STANDARD)]
        stats = compute_stats(from_reviews(reviews))
        assert stats.category_counts[Label.STANDARD] == {"beauty": 1}
