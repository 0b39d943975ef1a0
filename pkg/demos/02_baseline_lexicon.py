"""
The lexicon baseline
====================

A review mentioning another country or nationality is flagged as dual
quality. Matching runs on lowercase (optionally lemmatized) tokens against a
shipped phrase list; multi-word phrases must appear as consecutive tokens.
High recall, low precision: exactly what the trained models improve on.
"""

from importlib import resources

from dualquality import (classify_baseline, default_lexicon, evaluate, load_dataset,
                         normalize_text)

lexicon = default_lexicon()
print(f"lexicon: {len(lexicon)} phrases, e.g. {lexicon.phrases[28:32]}")

print(normalize_text("Kupiłem w Niemczech."))

for text in ["Proszek niemiecki jest o niebo lepszy",
             "Świetny produkt, polecam",
             "miód nowa zelandia pachnie inaczej"]:
    prediction = classify_baseline(text, lexicon)
    print(f"  {prediction.label.value:>12} <- {text}")

# score the baseline on the bundled corpus' test split
path = resources.files("dualquality").joinpath("data/synthetic_reviews.jsonl")
test = [r for r in load_dataset(path).reviews if r.split == "test"]
gold = [r.label for r in test]
pred = [classify_baseline(r, lexicon).label for r in test]
report = evaluate(gold, pred)
dq = report.per_class[list(report.per_class)[0]]
print(f"\ntest split: accuracy {report.accuracy:.3f}, "
      f"dual-quality precision {dq.precision:.3f} recall {dq.recall:.3f}")
