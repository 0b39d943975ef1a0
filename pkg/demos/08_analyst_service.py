"""
The analyst service end to end
==============================

A local HTTP service classifies incoming reviews, persists them, maintains
the annotation queue and exposes the bootstrap controls. Flagging is
precision-first: a configurable probability threshold, and products
accumulating several flagged reviews get an escalation marker for analyst
follow-up.

This demo drives the whole loop over HTTP: ingest -> iterate -> label the
queue head -> rollup -> metrics.
"""

import json
import urllib.request

from dualquality import ReviewService, ServiceConfig, ServiceServer
from dualquality.synthetic import planted_pool, seed_examples


def call(method, url, body=None):
    data = json.dumps(body).encode() if body is not None else None
    request = urllib.request.Request(url, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(request, timeout=10) as response:
        return json.loads(response.read().decode())


service = ReviewService(ServiceConfig(port=0, model="baseline", k=15,
                                      backend={"kind": "hashing", "dim": 128, "seed": 0}))

with ServiceServer(service) as server:
    base = server.address
    print("service at", base, "->", call("GET", base + "/healthz"))

    positives, negatives = seed_examples(10, 20, seed=2)
    print("seed ingest:", call("POST", base + "/reviews:batch",
                               [r.to_json() for r in positives + negatives]))

    pool, _ = planted_pool(300, 0.08, seed=3)
    payload = [r.to_json() | {"product": f"prod-{i % 12}"} for i, r in enumerate(pool)]
    print("pool ingest:", call("POST", base + "/reviews:batch", payload))

    record = call("POST", base + "/bootstrap/iterate", {})
    print(f"iteration {record['iteration']}: scored {record['pool_scored']}, "
          f"queued {record['batch_size']}")

    queue = call("GET", base + "/annotation/queue")
    head = queue["items"][0]
    print(f"queue head p={head['dq_probability']:.2f}: {head['text'][:60]}...")
    print("label it:", call("POST", f"{base}/annotation/{head['review_id']}/label",
                            {"label": "dual quality", "annotator": "demo-analyst"}))

    rollup = call("GET", base + "/products/rollup")
    print("rollup (first rows):", rollup[:3])

    metrics = call("GET", base + "/metrics")
    print(f"current-model metrics over labeled data: accuracy {metrics['accuracy']:.3f}")
