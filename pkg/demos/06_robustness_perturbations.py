"""
Robustness: five text perturbations, one disagreement number
============================================================

A slight, meaning-preserving edit should not flip the decision. Each
perturbation is applied to every test text; disagreement is the percentage
of items whose predicted label changes, reported as mean ± sample std over
seeded runs (0.0 std for deterministic models).
"""

from dualquality import PerturbationKind, classify_baseline, default_lexicon, disagreement, perturb
from dualquality.synthetic import seed_examples

for text, kind in [
    ("Polecam.", PerturbationKind.PERIOD),
    ("Polecam", PerturbationKind.PERIOD),
    ("dobry produkt", PerturbationKind.FIRST_LETTER),
    ("OK Produkt", PerturbationKind.LOWER),
    ("żółć i jaźń", PerturbationKind.PL_CHARS),
    ("łał, żółł", PerturbationKind.PL_CHARS_ONCE),
]:
    print(f"  {kind.value:>14}: {text!r} -> {perturb(text, kind)!r}")

lexicon = default_lexicon()


def baseline_predict(texts, seed):
    return [classify_baseline(text, lexicon).label for text in texts]


# mix in reviews whose only lexical evidence carries Polish diacritics: the
# baseline tokenizes case-insensitively (immune to lower/first_letter) but
# diacritic stripping erases its evidence
positives, negatives = seed_examples(30, 150, seed=5)
texts = [r.text for r in positives + negatives]
texts += [f"proszek ze słowacji pachnie inaczej {i}" for i in range(10)]
texts += [f"krem kupiony na węgrzech gęstszy {i}" for i in range(10)]

print("\nbaseline decision disagreement on 200 reviews:")
for kind in PerturbationKind:
    result = disagreement(baseline_predict, texts, kind, runs=5)
    print(f"  {kind.value:>14}: {result.mean:5.2f}% ± {result.std:.2f}")
print("(deterministic model, so every std is 0.0; diacritic stripping erases")
print(" the lexicon's evidence, the case perturbations cannot)")
