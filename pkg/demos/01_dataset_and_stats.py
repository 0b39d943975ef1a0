"""
Datasets: load, inspect, split
==============================

The toolkit ships a synthetic stand-in corpus with the reference shape:
1,957 reviews (540 dual quality / 281 other problems / 1,136 standard),
split 1,200 / 500 / 257, ~261 characters and ~41 words per review.
"""

from importlib import resources

from dualquality import SplitSizes, compute_stats, load_dataset, stratified_split

path = resources.files("dualquality").joinpath("data/synthetic_reviews.jsonl")
dataset = load_dataset(path)
stats = compute_stats(dataset)

print(f"{stats.total} reviews, mean {stats.mean_chars:.1f} chars / {stats.mean_words:.1f} words")
for label, count in stats.label_counts.items():
    print(f"  {label.value:>15}: {count}")
print("splits:", stats.split_totals)

# a fresh stratified split keeps per-class proportions within one review
resplit = stratified_split(dataset, SplitSizes(train=1200, test=500, valid=257), seed=42)
resplit_stats = compute_stats(resplit)
print("re-split train cells:",
      {k.value: v for k, v in resplit_stats.split_label_counts["train"].items()})

print("\na sample review:")
review = dataset.reviews[0]
print(" ", review.id, review.label.value, "|", review.text[:70], "...")
