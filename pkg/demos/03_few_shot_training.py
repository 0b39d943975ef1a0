"""
Few-shot classifier: contrastive pairs + logistic head
======================================================

The trainable pipeline mirrors sentence-embedding fine-tuning frameworks:
sample same-class / different-class text pairs, hand them to the embedding
backend's fine-tuning hook, then train a multinomial logistic regression
head (from scratch, mini-batch gradient descent) on the embeddings.

The deterministic hashing backend below stands in for a real sentence
encoder; plug one in by implementing embed() / descriptor() / finetune().
"""

from collections import Counter

from dualquality import (FewShotClassifier, FewShotConfig, HashingEmbedding, HeadConfig,
                         binary_collapse, from_reviews, generate_contrastive_pairs,
                         load_snapshot, seed_examples)

positives, negatives = seed_examples(30, 90, seed=0)
train = from_reviews(positives + negatives)

pairs = generate_contrastive_pairs(train.reviews, iterations=1, seed=0)
targets = Counter(p.similarity_target for p in pairs)
print(f"{len(pairs)} contrastive pairs (positive {targets[1.0]}, negative {targets[0.0]})")

# binary mode: other problems and standard merged into one negative class
collapsed = binary_collapse(train)
classifier = FewShotClassifier(
    HashingEmbedding(dim=256, seed=0),
    FewShotConfig(contrastive_iterations=1, seed=0,
                  head=HeadConfig(learning_rate=0.5, batch_size=32, epochs=40, seed=0)))
fitted = classifier.fit(collapsed.reviews)
print("model:", fitted.model_id, "classes:", [c.value for c in fitted.classes])
print("final epoch loss:", round(fitted.head.epoch_losses[-1], 4))

for text in ["wersja z niemiec zupełnie inna niż polska",
             "dobry produkt polecam"]:
    [prediction] = fitted.predict([text])
    top = max(prediction.probs.values())
    print(f"  {prediction.label.value:>12} p={top:.2f} <- {text}")

path = fitted.save("/tmp/dualquality-demo-model.json")
restored = load_snapshot(path)
print("snapshot round trip ok:", restored.model_id == fitted.model_id)
