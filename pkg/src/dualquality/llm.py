"""Prompted classification against a chat-completion endpoint.

Four prompt strategies (zero/few-shot, each with or without class
instructions) in Polish (normative) and English. Templates are shipped as
frozen fixture files with a single `<review>` placeholder; few-shot examples
are baked into the fixtures and never selected dynamically.

The whole prompt is sent as one user message. Responses are normalized
conservatively (trim, strip one layer of surrounding quotes, at most one
trailing period, lowercase) and must then match a class name exactly or
contain exactly one class name; anything else is a parse failure, not a
guess.
"""

from __future__ import annotations

import json
import os
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from typing import Callable, Protocol, Sequence

from .corpus import Review
from .errors import ArgumentError, ParseError, TransportError
from .labels import LABEL_ORDER, Label, Prediction, degenerate_prediction

PLACEHOLDER = "<review>"


class PromptVariant(Enum):
    ZERO_SHOT = "zero_shot"
    FEW_SHOT = "few_shot"
    ZERO_SHOT_INST = "zero_shot_inst"
    FEW_SHOT_INST = "few_shot_inst"


LANGUAGES = ("pl", "en")


@dataclass(frozen=True)
class PromptTemplate:
    variant: PromptVariant
    language: str
    body: str

    def __post_init__(self) -> None:
        if self.language not in LANGUAGES:
            raise ArgumentError(f"unsupported prompt language: {self.language!r}")
        if self.body.count(PLACEHOLDER) != 1:
            raise ArgumentError(
                f"template must contain exactly one {PLACEHOLDER!r} placeholder, "
                f"found {self.body.count(PLACEHOLDER)}")


def load_template(variant: PromptVariant, language: str = "pl") -> PromptTemplate:
    if language not in LANGUAGES:
        raise ArgumentError(f"unsupported prompt language: {language!r}")
    name = f"{language}_{variant.value}.txt"
    body = resources.files("dualquality").joinpath(f"data/prompts/{name}").read_text("utf-8")
    return PromptTemplate(variant=variant, language=language, body=body)


def all_templates() -> list[PromptTemplate]:
    return [load_template(variant, language)
            for language in LANGUAGES for variant in PromptVariant]


def build_prompt(template: PromptTemplate, review_text: str) -> str:
    """Substitute the review into the template's single placeholder, verbatim."""
    if not review_text.strip():
        raise ArgumentError("review text must be non-empty")
    return template.body.replace(PLACEHOLDER, review_text, 1)


_QUOTE_CHARS = "\"'“”„«»‚’`"


def parse_label(raw: str) -> Label:
    """Map a model response to a Label; ParseError carries the raw string."""
    s = raw.strip()
    if len(s) >= 2 and s[0] in _QUOTE_CHARS and s[-1] in _QUOTE_CHARS:
        s = s[1:-1].strip()
    if s.endswith("."):
        s = s[:-1].rstrip()
    s = s.lower()
    for label in LABEL_ORDER:
        if s == label.value:
            return label
    contained = [label for label in LABEL_ORDER if label.value in s]
    if len(contained) == 1:
        return contained[0]
    if len(contained) > 1:
        raise ParseError(f"ambiguous response, multiple class names: {raw!r}")
    raise ParseError(f"no class name in response: {raw!r}")


class ChatClient(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class LLMClientConfig:
    """Remote chat-model settings. Temperature defaults to 0.1; use 0.0 for
    robustness runs, where the model's decisions must be reproducible."""

    endpoint: str = "http://127.0.0.1:8081/v1/chat/completions"
    model: str = "local-model"
    temperature: float = 0.1
    max_retries: int = 3
    backoff: tuple[float, ...] = (0.5, 1.0, 2.0)
    timeout: float = 30.0
    max_concurrency: int = 4
    api_key_env: str = "LLM_API_KEY"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ArgumentError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ArgumentError("max_retries must be >= 0")
        if self.max_concurrency < 1:
            raise ArgumentError("max_concurrency must be >= 1")


class HttpChatClient:
    """Single-attempt chat-completions call; retry policy lives in classify_with_llm."""

    def __init__(self, config: LLMClientConfig):
        self.config = config

    @property
    def name(self) -> str:
        return self.config.model

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        request = urllib.request.Request(self.config.endpoint,
                                         data=json.dumps(payload).encode("utf-8"),
                                         headers=headers, method="POST")
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout) as response:
                body = json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            raise TransportError(f"HTTP {exc.code} from {self.config.endpoint}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise TransportError(f"request to {self.config.endpoint} failed: {exc}") from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {body!r}") from exc


@dataclass(frozen=True)
class ItemFailure:
    index: int
    stage: str  # "transport" | "parse"
    message: str
    raw: str | None = None

    def to_json(self) -> dict:
        return {"index": self.index, "stage": self.stage, "message": self.message, "raw": self.raw}


@dataclass(frozen=True)
class LLMRunResult:
    """One seeded run: index-aligned predictions (None where an item failed)."""

    predictions: tuple[Prediction | None, ...]
    failures: tuple[ItemFailure, ...]
    requests: int
    retries: int

    def to_json(self) -> dict:
        return {
            "predictions": [p.to_json() if p else None for p in self.predictions],
            "failures": [f.to_json() for f in self.failures],
            "requests": self.requests,
            "retries": self.retries,
        }


def _classify_one(client: ChatClient, prompt: str, max_retries: int,
                  backoff: Sequence[float]) -> tuple[str, int]:
    attempts = 0
    while True:
        try:
            return client.complete(prompt), attempts
        except TransportError:
            if attempts >= max_retries:
                raise
            delay = backoff[min(attempts, len(backoff) - 1)] if backoff else 0.0
            attempts += 1
            if delay > 0:
                time.sleep(delay)


def classify_with_llm(reviews: Sequence[Review | str], template: PromptTemplate,
                      client: ChatClient, runs: int = 1, *,
                      max_retries: int | None = None,
                      backoff: Sequence[float] | None = None,
                      max_concurrency: int | None = None) -> list[LLMRunResult]:
    """One request per review per run, with bounded concurrency.

    Transport errors are retried per the backoff schedule and surface as
    per-item failures once retries are exhausted; unparseable responses are
    recorded per item, never silently dropped. Output order always matches
    input order. Retry/concurrency settings default to the client's config
    when it has one.
    """
    if runs < 1:
        raise ArgumentError("runs must be >= 1")
    config = getattr(client, "config", None)
    if max_retries is None:
        max_retries = config.max_retries if config else 3
    if backoff is None:
        backoff = config.backoff if config else (0.5, 1.0, 2.0)
    if max_concurrency is None:
        max_concurrency = config.max_concurrency if config else 4

    texts = [r.text if isinstance(r, Review) else r for r in reviews]
    prompts = [build_prompt(template, text) for text in texts]
    model_id = f"llm:{getattr(client, 'name', 'client')}:{template.language}:{template.variant.value}"

    results: list[LLMRunResult] = []
    for _ in range(runs):
        predictions: list[Prediction | None] = [None] * len(prompts)
        failures: list[ItemFailure] = []
        retries_total = 0
        requests_total = 0

        def work(index: int) -> tuple[int, str | None, int, ItemFailure | None]:
            try:
                raw, retried = _classify_one(client, prompts[index], max_retries, backoff)
                return index, raw, retried, None
            except TransportError as exc:
                return index, None, max_retries, ItemFailure(index, "transport", str(exc))

        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            for index, raw, retried, failure in pool.map(work, range(len(prompts))):
                retries_total += retried
                requests_total += retried + 1
                if failure is not None:
                    failures.append(failure)
                    continue
                try:
                    label = parse_label(raw)
                except ParseError as exc:
                    failures.append(ItemFailure(index, "parse", str(exc), raw=raw))
                    continue
                predictions[index] = degenerate_prediction(label, model_id)
        failures.sort(key=lambda f: f.index)
        results.append(LLMRunResult(predictions=tuple(predictions), failures=tuple(failures),
                                    requests=requests_total, retries=retries_total))
    return results


class StubChatServer:
    """Local chat-completions stub for tests and offline demos.

    Answers every POST with the chat-completions JSON shape; the reply text
    comes from a configurable responder callable applied to the prompt.
    """

    def __init__(self, responder: Callable[[str], str] | None = None, port: int = 0):
        self.responder = responder or (lambda prompt: Label.STANDARD.value)
        self.request_count = 0
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 (http.server API)
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                prompt = payload["messages"][-1]["content"]
                outer.request_count += 1
                reply = outer.responder(prompt)
                body = json.dumps({"choices": [{"message": {"role": "assistant", "content": reply}}]})
                data = body.encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def __enter__(self) -> "StubChatServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
