from __future__ import annotations

import json
import random

import numpy as np
import pytest

from dualquality.bootstrap import (AnnotationDecision, BootstrapRun, RunConfig, audit_labels,
                                   load_run_config, parse_config_text, seed_base_dataset,
                                   select_candidates)
from dualquality.classify import FewShotClassifier, FewShotConfig, HeadConfig
from dualquality.corpus import from_reviews, load_dataset
from dualquality.embeddings import HashingEmbedding
from dualquality.errors import ArgumentError, IntegrityError, StateError
from dualquality.labels import LABEL_ORDER, Label
from dualquality.synthetic import planted_pool, seed_examples

from .conftest import make_review


def fast_trainer(seed: int = 0, dim: int = 128) -> FewShotClassifier:
    return FewShotClassifier(
        HashingEmbedding(dim=dim, seed=seed),
        FewShotConfig(seed=seed, head=HeadConfig(learning_rate=0.5, batch_size=32,
                                                 epochs=30, seed=seed)))


class StubFitted:
    """Scores by a fixed per-text probability table; class order is full."""

    classes = LABEL_ORDER
    model_id = "stub-model"

    def __init__(self, table):
        self.table = table

    def predict_proba(self, texts):
        rows = []
        for text in texts:
            p = self.table.get(text, 0.0)
            rows.append([p, 0.0, 1.0 - p])
        return np.asarray(rows)


class StubTrainer:
    def __init__(self, table=None):
        self.table = table or {}
        self.fit_calls = 0

    def fit(self, reviews):
        self.fit_calls += 1
        return StubFitted(self.table)


class TestSeedBaseDataset:
    def test_reference_scale_counts(self):
        positives = [make_review(i, label=Label.DUAL_QUALITY) for i in range(117)]
        negatives = [make_review(1000 + i, label=Label.STANDARD) for i in range(300)]
        base = seed_base_dataset(positives, negatives)
        assert len(base) == 417
        assert all(r.provenance[-1].action == "seeded" for r in base.reviews)

    def test_empty_positives_rejected(self):
        negatives = [make_review(i, label=Label.STANDARD) for i in range(3)]
        with pytest.raises(ArgumentError):
            seed_base_dataset([], negatives)

    def test_overlapping_id_is_integrity_error(self):
        positive = make_review(5, label=Label.DUAL_QUALITY)
        negative = make_review(5, label=Label.STANDARD)
        with pytest.raises(IntegrityError):
            seed_base_dataset([positive], [negative])

    def test_wrong_labels_rejected(self):
        with pytest.raises(ArgumentError):
            seed_base_dataset([make_review(0, label=Label.STANDARD)], [])


class TestSelectCandidates:
    def test_tie_break_by_id(self):
        pool = [("b", 0.7), ("a", 0.9), ("c", 0.9)]
        batch = select_candidates(pool, labeled_ids=set(), k=2)
        assert [item.review_id for item in batch.items] == ["a", "c"]

    def test_up_to_k_semantics(self):
        pool = [(f"r{i}", 0.5) for i in range(50)]
        batch = select_candidates(pool, labeled_ids=set(), k=200)
        assert len(batch.items) == 50

    def test_all_labeled_empty_batch(self):
        pool = [("a", 0.9), ("b", 0.8)]
        batch = select_candidates(pool, labeled_ids={"a", "b"}, k=10)
        assert batch.items == ()

    def test_probability_bounds_validated(self):
        with pytest.raises(ArgumentError):
            select_candidates([("a", 1.5)], set(), k=1)

    def test_k_must_be_positive(self):
        with pytest.raises(ArgumentError):
            select_candidates([("a", 0.5)], set(), k=0)

    def test_sorted_descending(self):
        rng = random.Random(3)
        pool = [(f"r{i}", rng.random()) for i in range(100)]
        batch = select_candidates(pool, set(), k=30)
        probs = [item.dq_probability for item in batch.items]
        assert probs == sorted(probs, reverse=True)


def new_run(n_pos: int = 6, n_neg: int = 12, **config_kwargs) -> BootstrapRun:
    positives, negatives = seed_examples(n_pos, n_neg, seed=1)
    base = seed_base_dataset(positives, negatives)
    return BootstrapRun(base, config=RunConfig(**config_kwargs))


class TestRunIteration:
    def test_k200_on_5000_pool_yields_batch_of_200(self):
        run = new_run(20, 60)
        pool, _ = planted_pool(5000, 0.03, seed=5)
        record = run.run_iteration(pool, fast_trainer(), k=200, mode="binary")
        assert record.batch_size == 200
        assert record.pool_scored == 5000
        assert len(run.open_batch.items) == 200

    def test_batch_enriched_over_random_sampling(self):
        run = new_run(20, 60)
        pool, gold = planted_pool(2000, 0.05, seed=6)
        run.run_iteration(pool, fast_trainer(), k=100, mode="binary")
        hits = sum(1 for item in run.open_batch.items
                   if gold[item.review_id] is Label.DUAL_QUALITY)
        # uniform random sampling would land ~5 positives in a batch of 100
        assert hits >= 5 * 5

    def test_empty_pool_empty_batch_record_persisted(self, tmp_path):
        positives, negatives = seed_examples(6, 12, seed=1)
        base = seed_base_dataset(positives, negatives)
        run = BootstrapRun(base, config=RunConfig(), run_dir=tmp_path / "run")
        record = run.run_iteration([], fast_trainer(), k=10, mode="binary")
        assert record.batch_size == 0
        lines = (tmp_path / "run" / "records.jsonl").read_text().strip().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])["iteration"] == 1

    def test_single_class_state_error(self):
        base = from_reviews([make_review(i, label=Label.DUAL_QUALITY) for i in range(4)])
        run = BootstrapRun(base)
        with pytest.raises(StateError):
            run.run_iteration([make_review(100)], fast_trainer(), k=5, mode="binary")

    def test_trainer_failure_carries_iteration_index(self):
        class ExplodingTrainer:
            def fit(self, reviews):
                raise RuntimeError("nan everywhere")

        run = new_run()
        with pytest.raises(StateError, match="iteration 1"):
            run.run_iteration([make_review(100)], ExplodingTrainer(), k=5, mode="binary")

    def test_batch_never_contains_labeled_ids(self):
        run = new_run(8, 16)
        pool, _ = planted_pool(300, 0.1, seed=7)
        run.run_iteration(pool, fast_trainer(), k=50, mode="binary")
        labeled_before = set(run.labeled)
        assert not run.open_batch.ids() & labeled_before

    def test_deterministic_across_reruns(self):
        batches = []
        for _ in range(2):
            run = new_run(8, 16)
            pool, _ = planted_pool(400, 0.05, seed=9)
            run.run_iteration(pool, fast_trainer(seed=3), k=40, mode="binary")
            batches.append([(i.review_id, i.dq_probability) for i in run.open_batch.items])
        assert batches[0] == batches[1]


class TestIngestAnnotations:
    def _run_with_batch(self, pool_size=600, k=120):
        run = new_run(8, 16)
        pool, gold = planted_pool(pool_size, 0.2, seed=11)
        run.run_iteration(pool, fast_trainer(), k=k, mode="binary")
        return run, gold

    def test_final_iteration_grows_by_103(self):
        run, gold = self._run_with_batch(pool_size=600, k=103)
        before = len(run.labeled)
        decisions = [AnnotationDecision(item.review_id, gold[item.review_id], "annotator-1")
                     for item in run.open_batch.items]
        assert len(decisions) == 103
        run.ingest_annotations(decisions)
        assert len(run.labeled) == before + 103
        assert run.records[-1].decisions_ingested == 103

    def test_relabel_appends_provenance(self):
        run, gold = self._run_with_batch()
        item = run.open_batch.items[0]
        run.ingest_annotations([AnnotationDecision(item.review_id, Label.DUAL_QUALITY, "a1")])
        review = run.labeled[item.review_id]
        events_before = len(review.provenance)
        run.ingest_annotations([AnnotationDecision(item.review_id, Label.STANDARD, "a2")])
        review = run.labeled[item.review_id]
        assert review.label is Label.STANDARD
        assert len(review.provenance) == events_before + 1
        assert review.provenance[-1].action == "relabeled"

    def test_empty_decisions_no_change(self):
        run, _ = self._run_with_batch()
        before_labeled = dict(run.labeled)
        run.ingest_annotations([])
        assert run.labeled == before_labeled

    def test_unknown_id_rejected(self):
        run, _ = self._run_with_batch()
        with pytest.raises(ArgumentError):
            run.ingest_annotations([AnnotationDecision("nope", Label.STANDARD, "a")])

    def test_monotone_growth(self):
        run, gold = self._run_with_batch()
        sizes = [len(run.labeled)]
        items = list(run.open_batch.items)
        for i in range(0, 30, 5):
            chunk = [AnnotationDecision(item.review_id, gold[item.review_id], "a")
                     for item in items[i:i + 5]]
            run.ingest_annotations(chunk)
            sizes.append(len(run.labeled))
        assert sizes == sorted(sizes)
        assert sizes[-1] == sizes[0] + 30


class TestNoReannotationLeakageFuzz:
    def test_1000_random_iteration_sequences(self):
        rng = random.Random(99)
        for _ in range(1000):
            n = rng.randint(5, 40)
            ids = [f"p{i}" for i in range(n)]
            labeled: set[str] = set(rng.sample(ids, rng.randint(0, n)))
            scored = [(review_id, rng.random()) for review_id in ids]
            k = rng.randint(1, 15)
            batch = select_candidates(scored, labeled, k)
            chosen = [item.review_id for item in batch.items]
            assert not set(chosen) & labeled
            assert len(chosen) == min(k, n - len(labeled))
            # simulate annotating the batch, then select again
            labeled |= set(chosen)
            again = select_candidates(scored, labeled, k)
            assert not again.ids() & labeled


LEARNABLE_POS = "wersja z niemiec zupełnie inna niż polska"
LEARNABLE_NEG = "dobry produkt polecam każdemu bardzo"


def learnable_reviews(n_per_class: int, flip_index: int | None = None):
    reviews = []
    for i in range(n_per_class):
        reviews.append(make_review(i, label=Label.DUAL_QUALITY, text=f"{LEARNABLE_POS} {i}"))
    for i in range(n_per_class):
        label = Label.STANDARD
        reviews.append(make_review(100 + i, label=label, text=f"{LEARNABLE_NEG} {i}"))
    if flip_index is not None:
        from dataclasses import replace
        reviews[flip_index] = replace(reviews[flip_index], label=Label.STANDARD)
    return reviews


class TestAuditLabels:
    def test_planted_error_ranks_first(self):
        # one positive-pattern review mislabeled as standard
        reviews = learnable_reviews(10, flip_index=3)
        rows = audit_labels(from_reviews(reviews), fast_trainer(), folds=5, seed=0)
        assert rows[0].review_id == reviews[3].id
        assert rows[0].gold is Label.STANDARD
        assert rows[0].predicted is Label.DUAL_QUALITY

    def test_leave_one_out_single_class_with_stub(self):
        reviews = [make_review(i, label=Label.STANDARD) for i in range(12)]
        rows = audit_labels(from_reviews(reviews), StubTrainer(), folds=12, seed=1)
        assert len(rows) == 12

    def test_perfectly_learnable_no_misclassifications(self):
        reviews = learnable_reviews(10)
        rows = audit_labels(from_reviews(reviews), fast_trainer(), folds=5, seed=0)
        assert [r for r in rows if r.gold is not r.predicted] == []

    def test_coverage_every_review_exactly_once(self):
        reviews = learnable_reviews(8)
        rows = audit_labels(from_reviews(reviews), fast_trainer(), folds=4, seed=2)
        assert sorted(r.review_id for r in rows) == sorted(r.id for r in reviews)

    def test_class_smaller_than_folds_rejected(self):
        reviews = learnable_reviews(3)
        with pytest.raises(ArgumentError, match="dual quality"):
            audit_labels(from_reviews(reviews), fast_trainer(), folds=4, seed=0)

    def test_folds_minimum(self):
        with pytest.raises(ArgumentError):
            audit_labels(from_reviews(learnable_reviews(5)), fast_trainer(), folds=1, seed=0)


class TestRunConfig:
    def test_text_round_trip(self, tmp_path):
        config = RunConfig(k=120, mode="ternary", max_iterations=4, min_new_positives=2,
                           seed=7, backend={"kind": "hashing", "dim": 64, "seed": 7})
        path = tmp_path / "run.cfg"
        path.write_text(config.to_text(), encoding="utf-8")
        assert load_run_config(path) == config

    def test_parse_config_text(self):
        values = parse_config_text("# comment\nk = 10\nmode = binary\n"
                                   'backend = {"kind": "hashing"}\n')
        assert values == {"k": 10, "mode": "binary", "backend": {"kind": "hashing"}}

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("k = 10\nbogus = 1\n", encoding="utf-8")
        with pytest.raises(ArgumentError, match="bogus"):
            load_run_config(path)

    def test_invalid_line_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("just words\n", encoding="utf-8")
        with pytest.raises(ArgumentError, match="line 1"):
            load_run_config(path)

    def test_validation(self):
        with pytest.raises(ArgumentError):
            RunConfig(k=0)
        with pytest.raises(ArgumentError):
            RunConfig(mode="both")


class TestRunDirPersistence:
    def test_labeled_and_records_persisted(self, tmp_path):
        run_dir = tmp_path / "run"
        positives, negatives = seed_examples(6, 12, seed=1)
        run = BootstrapRun(seed_base_dataset(positives, negatives),
                           config=RunConfig(k=10), run_dir=run_dir)
        pool, gold = planted_pool(200, 0.1, seed=3)
        run.run_iteration(pool, fast_trainer(), k=10, mode="binary")
        decisions = [AnnotationDecision(item.review_id, gold[item.review_id], "a")
                     for item in run.open_batch.items]
        run.ingest_annotations(decisions)

        labeled = load_dataset(run_dir / "labeled.jsonl")
        assert len(labeled) == 18 + 10
        batches = [json.loads(line) for line in
                   (run_dir / "batches.jsonl").read_text().splitlines()]
        assert len(batches) == 1 and len(batches[0]["items"]) == 10
        records = [json.loads(line) for line in
                   (run_dir / "records.jsonl").read_text().splitlines()]
        assert records[-1]["decisions_ingested"] == 10
        assert (run_dir / "run.cfg").exists()
