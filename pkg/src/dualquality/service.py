"""Standalone analyst service: classify reviews, persist them, expose the
annotation queue and bootstrap controls over HTTP/JSON.

Deployment model is a single local process: concurrent reads, writes
serialized through one lock, bootstrap iterations mutually exclusive.
Persistence is an append-only JSONL event log plus a periodic snapshot, so a
restart replays to the same state. Flagging is threshold-on-probability and
the threshold is raisable, because the analyst workflow is precision-first:
every flag costs human verification time.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence

from .baseline import classify_baseline, default_lexicon
from .bootstrap import AnnotationDecision, BootstrapRun, RunConfig, parse_config_text
from .classify import FewShotClassifier, FewShotConfig, load_snapshot
from .corpus import Review, from_reviews
from .embeddings import backend_from_descriptor
from .errors import ArgumentError, ParseError, StateError
from .evaluation import evaluate
from .labels import LABEL_ORDER, Label, Prediction, ProblemSubtype, SubtypeKind

SNAPSHOT_EVERY = 200


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    auth_token_env: str = "REVIEW_SERVICE_TOKEN"
    model: str = "baseline"  # "baseline", "none", or a few-shot snapshot path
    flag_threshold: float = 0.5
    escalation_threshold: int = 3
    k: int = 200
    data_dir: str | None = None
    backend: dict = field(default_factory=lambda: {"kind": "hashing", "dim": 256, "seed": 0})

    def __post_init__(self) -> None:
        if not (0.0 <= self.flag_threshold <= 1.0):
            raise ArgumentError("flag_threshold must be in [0, 1]")
        if self.escalation_threshold < 1:
            raise ArgumentError("escalation_threshold must be >= 1")
        if self.k < 1:
            raise ArgumentError("k must be >= 1")


def load_service_config(path: str | Path) -> ServiceConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    known = set(ServiceConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ArgumentError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return ServiceConfig(**values)


@dataclass
class StoredReview:
    review: Review
    product: str | None = None
    status: str = "unscored"  # unscored | scored | queued | labeled
    dq_probability: float | None = None
    flagged: bool = False

    def to_json(self) -> dict:
        return {"review": self.review.to_json(), "product": self.product,
                "status": self.status, "dq_probability": self.dq_probability,
                "flagged": self.flagged}


class _BaselineModel:
    """Adapter giving the lexicon classifier the active-model surface."""

    model_id = "baseline-lexicon"

    def __init__(self):
        self._lexicon = default_lexicon()

    def predict(self, texts: Sequence[str]) -> list[Prediction]:
        return [classify_baseline(text, self._lexicon) for text in texts]


class EventLog:
    """Append-only JSONL event log with a periodic full-state snapshot."""

    def __init__(self, data_dir: str | Path | None):
        self.dir = Path(data_dir) if data_dir else None
        self.count = 0
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    @property
    def events_path(self) -> Path:
        return self.dir / "events.jsonl"

    @property
    def snapshot_path(self) -> Path:
        return self.dir / "snapshot.json"

    def append(self, event: dict) -> None:
        self.count += 1
        if not self.dir:
            return
        with self.events_path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(event, ensure_ascii=False) + "\n")

    def write_snapshot(self, state: dict) -> None:
        if not self.dir:
            return
        payload = {"event_count": self.count, "state": state}
        tmp = self.snapshot_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
        tmp.replace(self.snapshot_path)

    def replay(self) -> tuple[dict | None, list[dict]]:
        """Latest snapshot (or None) plus the events appended after it."""
        if not self.dir or not self.events_path.exists():
            return None, []
        snapshot = None
        skip = 0
        if self.snapshot_path.exists():
            payload = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
            snapshot = payload["state"]
            skip = payload["event_count"]
        events = []
        with self.events_path.open("r", encoding="utf-8") as handle:
            for i, line in enumerate(handle):
                if i < skip:
                    continue
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        self.count = max(skip, 0) + len(events)
        return snapshot, events


class ReviewService:
    """Application core; the HTTP layer is a thin shell over these methods.

    All mutating methods hold the single state lock, which is the
    "single-writer commit path": interleaved labels never lose decisions,
    and a second concurrent iterate request is rejected.
    """

    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        self._lock = threading.RLock()
        self._iterate_lock = threading.Lock()
        self.store: dict[str, StoredReview] = {}
        self.decisions: list[AnnotationDecision] = []
        self.run = BootstrapRun(from_reviews([], name="service"),
                                config=RunConfig(k=self.config.k, backend=self.config.backend))
        self.log = EventLog(self.config.data_dir)
        self.trainer = FewShotClassifier(backend_from_descriptor(self.config.backend),
                                         FewShotConfig())
        self.active_model = self._initial_model()
        self._replay()

    def _initial_model(self):
        if self.config.model == "baseline":
            return _BaselineModel()
        if self.config.model in ("none", ""):
            return None
        return load_snapshot(self.config.model)

    # -- persistence -------------------------------------------------------

    def _record(self, event: dict) -> None:
        self.log.append(event)
        if self.log.count % SNAPSHOT_EVERY == 0:
            self.log.write_snapshot(self._state_json())

    def _state_json(self) -> dict:
        return {
            "store": {rid: stored.to_json() for rid, stored in self.store.items()},
            "decisions": [
                {"review_id": d.review_id, "label": d.label.value, "annotator": d.annotator,
                 "subtype": d.subtype.to_json() if d.subtype else None, "at": d.at}
                for d in self.decisions
            ],
            "records": [record.to_json() for record in self.run.records],
            "open_batch": self.run.open_batch.to_json() if self.run.open_batch else None,
            "model_path": getattr(self, "_model_path", None),
        }

    def _replay(self) -> None:
        snapshot, events = self.log.replay()
        if snapshot:
            self._load_state(snapshot)
        for event in events:
            self._apply_event(event)

    def _load_state(self, state: dict) -> None:
        from .bootstrap import AnnotationBatch, BatchItem, IterationRecord

        for rid, payload in state["store"].items():
            review = Review.from_json(payload["review"])
            self.store[rid] = StoredReview(review=review, product=payload.get("product"),
                                           status=payload["status"],
                                           dq_probability=payload.get("dq_probability"),
                                           flagged=payload.get("flagged", False))
            if review.label is not None:
                self.run.labeled[rid] = review
            else:
                self.run.pool[rid] = review
        for d in state.get("decisions", ()):
            subtype = ProblemSubtype.from_json(d["subtype"]) if d.get("subtype") else None
            self.decisions.append(AnnotationDecision(
                review_id=d["review_id"], label=Label(d["label"]), annotator=d["annotator"],
                subtype=subtype, at=d["at"]))
        for r in state.get("records", ()):
            self.run.records.append(IterationRecord(
                iteration=r["iteration"], model_id=r["model_id"], pool_scored=r["pool_scored"],
                batch_size=r["batch_size"], decisions_ingested=r["decisions_ingested"],
                labeled_size=r["labeled_size"],
                label_counts={Label(k): v for k, v in r["label_counts"].items()}))
        if state.get("open_batch"):
            b = state["open_batch"]
            self.run.open_batch = AnnotationBatch(
                iteration=b["iteration"], created_at=b["created_at"],
                items=tuple(BatchItem(i["review_id"], i["dq_probability"], i["text"])
                            for i in b["items"]))
        model_path = state.get("model_path")
        if model_path and Path(model_path).exists():
            self.active_model = load_snapshot(model_path)
            self._model_path = model_path

    def _apply_event(self, event: dict) -> None:
        kind = event["type"]
        if kind == "review_ingested":
            self._ingest_one(Review.from_json(event["review"]), event.get("product"),
                             persist=False)
        elif kind == "decision_recorded":
            d = event["decision"]
            subtype = ProblemSubtype.from_json(d["subtype"]) if d.get("subtype") else None
            self._apply_decision(AnnotationDecision(
                review_id=d["review_id"], label=Label(d["label"]), annotator=d["annotator"],
                subtype=subtype, at=d["at"]), persist=False)
        elif kind == "iteration_completed":
            # Recompute nothing: restore record, batch and model from the event.
            from .bootstrap import AnnotationBatch, BatchItem, IterationRecord

            r = event["record"]
            self.run.records.append(IterationRecord(
                iteration=r["iteration"], model_id=r["model_id"], pool_scored=r["pool_scored"],
                batch_size=r["batch_size"], decisions_ingested=r["decisions_ingested"],
                labeled_size=r["labeled_size"],
                label_counts={Label(k): v for k, v in r["label_counts"].items()}))
            b = event["batch"]
            self.run.open_batch = AnnotationBatch(
                iteration=b["iteration"], created_at=b["created_at"],
                items=tuple(BatchItem(i["review_id"], i["dq_probability"], i["text"])
                            for i in b["items"]))
            for item in self.run.open_batch.items:
                if item.review_id in self.store:
                    self.store[item.review_id].status = "queued"
            model_path = event.get("model_path")
            if model_path and Path(model_path).exists():
                self.active_model = load_snapshot(model_path)
                self._model_path = model_path

    # -- operations ---------------------------------------------------------

    def classify(self, texts: Sequence[str]) -> list[Prediction]:
        if not texts:
            raise ArgumentError("empty text list")
        if any(not isinstance(t, str) or not t.strip() for t in texts):
            raise ArgumentError("texts must be non-empty strings")
        model = self.active_model
        if model is None:
            raise StateError("no active model configured")
        return model.predict(list(texts))

    def _score(self, text: str) -> tuple[float | None, bool]:
        if self.active_model is None:
            return None, False
        prediction = self.active_model.predict([text])[0]
        p = float(prediction.probs.get(Label.DUAL_QUALITY, 0.0))
        return p, p >= self.config.flag_threshold

    def _ingest_one(self, review: Review, product: str | None, persist: bool = True) -> bool:
        if review.id in self.store:
            return False
        dq_probability, flagged = self._score(review.text) if persist else (None, False)
        status = "labeled" if review.label is not None else (
            "scored" if dq_probability is not None else "unscored")
        self.store[review.id] = StoredReview(review=review, product=product, status=status,
                                             dq_probability=dq_probability, flagged=flagged)
        if review.label is not None:
            self.run.labeled[review.id] = review
        else:
            self.run.pool[review.id] = review
        if persist:
            self._record({"type": "review_ingested", "review": review.to_json(),
                          "product": product})
        return True

    def ingest_batch(self, payload: Sequence[dict]) -> dict:
        """Idempotent by review id; re-posting a batch ingests nothing new."""
        if not isinstance(payload, (list, tuple)) or not payload:
            raise ArgumentError("body must be a non-empty list of review records")
        parsed = []
        for i, item in enumerate(payload):
            if not isinstance(item, dict):
                raise ArgumentError(f"record {i} is not an object")
            try:
                review = Review.from_json(item)
            except (ParseError, ArgumentError) as exc:
                raise ArgumentError(f"record {i}: {exc}") from exc
            parsed.append((review, item.get("product")))
        with self._lock:
            ingested = sum(1 for review, product in parsed if self._ingest_one(review, product))
        return {"ingested": ingested, "duplicates": len(parsed) - ingested}

    def queue(self) -> dict:
        with self._lock:
            batch = self.run.open_batch
            if batch is None:
                return {"iteration": None, "items": []}
            items = [item.to_json() | {"product": self.store[item.review_id].product
                                       if item.review_id in self.store else None}
                     for item in batch.items
                     if self.store.get(item.review_id) and self.store[item.review_id].status == "queued"]
            return {"iteration": batch.iteration, "created_at": batch.created_at, "items": items}

    def _apply_decision(self, decision: AnnotationDecision, persist: bool = True) -> None:
        self.run.ingest_annotations([decision])
        self.decisions.append(decision)
        stored = self.store.get(decision.review_id)
        if stored is not None:
            stored.status = "labeled"
            stored.review = self.run.labeled[decision.review_id]
        if persist:
            self._record({"type": "decision_recorded", "decision": {
                "review_id": decision.review_id, "label": decision.label.value,
                "annotator": decision.annotator,
                "subtype": decision.subtype.to_json() if decision.subtype else None,
                "at": decision.at}})

    def label(self, review_id: str, label_name: str, annotator: str,
              subtype: dict | None = None, at: str | None = None) -> dict:
        """Record one human decision; only queued reviews are labelable here."""
        try:
            label = Label(label_name)
        except ValueError:
            raise ArgumentError(f"unknown label: {label_name!r}") from None
        parsed_subtype = ProblemSubtype.from_json(subtype) if subtype else None
        with self._lock:
            stored = self.store.get(review_id)
            if stored is None:
                raise KeyError(review_id)
            if stored.status != "queued":
                raise StateError(f"review {review_id!r} is not queued (status: {stored.status})")
            decision = AnnotationDecision(review_id=review_id, label=label,
                                          annotator=annotator, subtype=parsed_subtype,
                                          at=at or "1970-01-01T00:00:00+00:00")
            self._apply_decision(decision)
            return {"review_id": review_id, "label": label.value,
                    "decisions_total": len(self.decisions)}

    def iterate(self) -> dict:
        """One bootstrap cycle; mutually exclusive with itself."""
        if not self._iterate_lock.acquire(blocking=False):
            raise StateError("an iteration is already running")
        try:
            with self._lock:
                pool = list(self.run.pool.values())
                record = self.run.run_iteration(pool, self.trainer, k=self.config.k)
                batch = self.run.open_batch
                for item in batch.items:
                    if item.review_id in self.store:
                        self.store[item.review_id].status = "queued"
                self.active_model = self.run.last_fitted
                model_path = None
                if self.log.dir:
                    model_path = str(self.log.dir / f"model-iter-{record.iteration}.json")
                    self.active_model.save(model_path)
                    self._model_path = model_path
                self._rescore_pool()
                self._record({"type": "iteration_completed", "record": record.to_json(),
                              "batch": batch.to_json(), "model_path": model_path})
                return record.to_json()
        finally:
            self._iterate_lock.release()

    def _rescore_pool(self) -> None:
        for stored in self.store.values():
            if stored.review.label is None and stored.status in ("unscored", "scored"):
                p, flagged = self._score(stored.review.text)
                stored.dq_probability = p
                stored.flagged = flagged
                if p is not None:
                    stored.status = "scored"

    def iterations(self) -> list[dict]:
        with self._lock:
            return [record.to_json() for record in self.run.records]

    def rollup(self) -> list[dict]:
        with self._lock:
            by_product: dict[str, int] = {}
            for stored in self.store.values():
                if stored.product and stored.flagged:
                    by_product[stored.product] = by_product.get(stored.product, 0) + 1
            threshold = self.config.escalation_threshold
            return [{"product": product, "flagged_count": count,
                     "escalation": count >= threshold}
                    for product, count in sorted(by_product.items())]

    def metrics(self) -> dict:
        with self._lock:
            labeled = [stored.review for stored in self.store.values()
                       if stored.review.label is not None]
            if not labeled:
                raise StateError("no labeled reviews to evaluate")
            if self.active_model is None:
                raise StateError("no active model configured")
            gold = [review.label for review in labeled]
            pred = [p.label for p in self.active_model.predict([r.text for r in labeled])]
            return evaluate(gold, pred).to_json()

    def ui_config(self) -> dict:
        return {
            "labels": [label.value for label in LABEL_ORDER],
            "subtypes": [kind.value for kind in SubtypeKind],
            "k": self.config.k,
            "flag_threshold": self.config.flag_threshold,
        }


# -- HTTP layer --------------------------------------------------------------


def _make_handler(service: ReviewService):
    token = os.environ.get(service.config.auth_token_env)

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):
            pass

        def _send(self, status: int, payload) -> None:
            data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)

        def _error(self, status: int, message: str) -> None:
            self._send(status, {"error": message})

        def _body(self):
            length = int(self.headers.get("Content-Length", "0"))
            if length == 0:
                return None
            return json.loads(self.rfile.read(length).decode("utf-8"))

        def _authorized(self, path: str) -> bool:
            if token is None or path in ("/healthz", "/ui-config"):
                return True
            header = self.headers.get("Authorization", "")
            return header == f"Bearer {token}"

        def do_OPTIONS(self):  # noqa: N802
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):  # noqa: N802
            path = self.path.split("?", 1)[0]
            if not self._authorized(path):
                return self._error(401, "missing or invalid bearer token")
            try:
                if path == "/healthz":
                    return self._send(200, {"status": "ok"})
                if path == "/ui-config":
                    return self._send(200, service.ui_config())
                if path == "/annotation/queue":
                    return self._send(200, service.queue())
                if path == "/iterations":
                    return self._send(200, service.iterations())
                if path == "/products/rollup":
                    return self._send(200, service.rollup())
                if path == "/metrics":
                    return self._send(200, service.metrics())
                return self._error(404, f"no such endpoint: {path}")
            except StateError as exc:
                return self._error(409, str(exc))

        def do_POST(self):  # noqa: N802
            path = self.path.split("?", 1)[0]
            if not self._authorized(path):
                return self._error(401, "missing or invalid bearer token")
            try:
                body = self._body()
            except json.JSONDecodeError as exc:
                return self._error(400, f"invalid JSON body: {exc.msg}")
            try:
                if path == "/classify":
                    if not isinstance(body, list):
                        return self._error(400, "body must be a JSON array of texts")
                    predictions = service.classify(body)
                    return self._send(200, [p.to_json() for p in predictions])
                if path == "/reviews:batch":
                    return self._send(200, service.ingest_batch(body or []))
                if path == "/bootstrap/iterate":
                    return self._send(200, service.iterate())
                if path.startswith("/annotation/") and path.endswith("/label"):
                    review_id = path[len("/annotation/"):-len("/label")]
                    if not isinstance(body, dict):
                        return self._error(400, "body must be a JSON object")
                    try:
                        result = service.label(
                            review_id, body.get("label", ""), body.get("annotator", "anonymous"),
                            subtype=body.get("subtype"), at=body.get("at"))
                    except KeyError:
                        return self._error(404, f"unknown review id: {review_id!r}")
                    return self._send(200, result)
                return self._error(404, f"no such endpoint: {path}")
            except ArgumentError as exc:
                return self._error(400, str(exc))
            except StateError as exc:
                return self._error(409, str(exc))

    return Handler


class ServiceServer:
    """Threaded HTTP server wrapper; usable as a context manager in tests."""

    def __init__(self, service: ReviewService):
        self.service = service
        self._server = ThreadingHTTPServer(
            (service.config.host, service.config.port), _make_handler(service))
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ServiceServer":
        self._thread.start()
        return self

    def __enter__(self) -> "ServiceServer":
        return self.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __exit__(self, *exc) -> None:
        self.stop()

    def serve_forever(self) -> None:
        self._thread.start()
        self._thread.join()
