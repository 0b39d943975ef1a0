"""End-to-end simulation of the bootstrap loop on synthetic pools.

A pool with a known planted-positive rate is scored by the few-shot model; a
simulated annotator answers every batch with the hidden gold labels. The
yield of the loop is compared against the expected yield of annotating the
same number of uniformly random reviews, which is the enrichment factor the
loop exists to deliver.

Pool modes: "stream" draws a fresh pool slice per iteration (a live review
feed; positives keep arriving), "fixed" scores one finite pool repeatedly
(positives can be exhausted).
"""

from __future__ import annotations

from dataclasses import dataclass

from .bootstrap import AnnotationDecision, BootstrapRun, IterationRecord, RunConfig, seed_base_dataset
from .classify import FewShotClassifier, FewShotConfig, HeadConfig
from .embeddings import HashingEmbedding
from .errors import ArgumentError
from .labels import Label
from .synthetic import planted_pool, seed_examples

SIM_HEAD = HeadConfig(learning_rate=0.5, batch_size=32, epochs=40, l2=1e-4, seed=0)


@dataclass(frozen=True)
class SimulationResult:
    seed: int
    pool_mode: str
    pool_size: int
    positive_rate: float
    records: tuple[IterationRecord, ...]
    positives_per_iteration: tuple[int, ...]
    annotations: int
    cumulative_positives: int

    @property
    def random_expected_yield(self) -> float:
        """Expected positives from annotating the same budget uniformly at random."""
        return self.annotations * self.positive_rate

    @property
    def enrichment(self) -> float:
        expected = self.random_expected_yield
        return self.cumulative_positives / expected if expected > 0 else 0.0

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "pool_mode": self.pool_mode,
            "pool_size": self.pool_size,
            "positive_rate": self.positive_rate,
            "records": [record.to_json() for record in self.records],
            "positives_per_iteration": list(self.positives_per_iteration),
            "annotations": self.annotations,
            "cumulative_positives": self.cumulative_positives,
            "random_expected_yield": self.random_expected_yield,
            "enrichment": self.enrichment,
        }


def simulate_bootstrap(pool_size: int = 5000, positive_rate: float = 0.03,
                       k: int = 200, iterations: int = 7, seed: int = 0,
                       pool_mode: str = "stream", min_new_positives: int = 0,
                       seed_positive_count: int = 40, seed_negative_count: int = 120,
                       backend_dim: int = 256, head: HeadConfig = SIM_HEAD) -> SimulationResult:
    """Run the loop against synthetic pools with a perfect annotator."""
    if pool_mode not in ("stream", "fixed"):
        raise ArgumentError(f"pool_mode must be 'stream' or 'fixed', got {pool_mode!r}")
    if iterations < 1:
        raise ArgumentError("iterations must be >= 1")
    if not (0.0 < positive_rate < 1.0):
        raise ArgumentError("positive_rate must be in (0, 1)")

    positives, negatives = seed_examples(seed_positive_count, seed_negative_count, seed=seed)
    base = seed_base_dataset(positives, negatives)
    config = RunConfig(k=k, mode="binary", max_iterations=iterations,
                       min_new_positives=min_new_positives, seed=seed,
                       backend={"kind": "hashing", "dim": backend_dim, "seed": seed})
    run = BootstrapRun(base, config=config)
    backend = HashingEmbedding(dim=backend_dim, seed=seed)
    trainer = FewShotClassifier(backend, FewShotConfig(
        contrastive_iterations=1, seed=seed,
        head=HeadConfig(learning_rate=head.learning_rate, batch_size=head.batch_size,
                        epochs=head.epochs, l2=head.l2, seed=seed)))

    gold: dict[str, Label] = {}
    fixed_pool = None
    if pool_mode == "fixed":
        fixed_pool, fixed_gold = planted_pool(pool_size, positive_rate, seed=seed + 17,
                                              id_prefix="pool")
        gold.update(fixed_gold)

    positives_per_iteration: list[int] = []
    annotations = 0
    for iteration in range(1, iterations + 1):
        if pool_mode == "stream":
            pool, pool_gold = planted_pool(pool_size, positive_rate,
                                           seed=seed + 1000 * iteration,
                                           id_prefix=f"pool{iteration}")
            gold.update(pool_gold)
        else:
            pool = fixed_pool
        run.run_iteration(pool, trainer, k=k, mode="binary", at="1970-01-01T00:00:00+00:00")
        batch = run.open_batch
        decisions = [AnnotationDecision(review_id=item.review_id, label=gold[item.review_id],
                                        annotator="oracle") for item in batch.items]
        run.ingest_annotations(decisions)
        annotations += len(decisions)
        found = sum(1 for d in decisions if d.label is Label.DUAL_QUALITY)
        positives_per_iteration.append(found)
        if min_new_positives and found < min_new_positives:
            break

    return SimulationResult(
        seed=seed,
        pool_mode=pool_mode,
        pool_size=pool_size,
        positive_rate=positive_rate,
        records=tuple(run.records),
        positives_per_iteration=tuple(positives_per_iteration),
        annotations=annotations,
        cumulative_positives=sum(positives_per_iteration),
    )
