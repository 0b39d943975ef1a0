"""
Evaluation protocol: five seeded runs, mean ± std
=================================================

Experiments repeat five times with different seeds; reports carry per-class
precision/recall/F1 (the dual-quality column is the headline), accuracy and
macro averages, aggregated as mean with sample standard deviation.
Confusion matrices sum across runs and export to CSV for heat-map plotting.
"""

from dualquality import (FewShotClassifier, FewShotConfig, HashingEmbedding, HeadConfig, Label,
                         aggregate_runs, evaluate, from_reviews, seed_examples, sum_confusions)
from dualquality.corpus import SplitSizes, stratified_split

positives, negatives = seed_examples(60, 140, seed=9, signal_share=0.3, leak=0.02)
dataset = stratified_split(from_reviews(positives + negatives),
                           SplitSizes(140, 60, 0), seed=9)
train = [r for r in dataset.reviews if r.split == "train"]
test = [r for r in dataset.reviews if r.split == "test"]
gold = [r.label for r in test]

reports = []
for seed in range(5):
    classifier = FewShotClassifier(
        HashingEmbedding(dim=256, seed=0),
        FewShotConfig(seed=seed, head=HeadConfig(learning_rate=0.5, batch_size=32,
                                                 epochs=60, seed=seed)))
    fitted = classifier.fit(train)
    pred = [p.label for p in fitted.predict([r.text for r in test])]
    reports.append(evaluate(gold, pred))

aggregate = aggregate_runs(reports)
for key in ("accuracy", "macro_f1", f"{Label.DUAL_QUALITY.value}/precision",
            f"{Label.DUAL_QUALITY.value}/recall"):
    summary = aggregate.metrics[key]
    print(f"{key:>25}: {summary.mean:.3f} ± {summary.std:.3f}")

combined = sum_confusions([r.cm for r in reports])
print("\nconfusion matrix aggregated over the five runs:")
print(combined.to_csv())
