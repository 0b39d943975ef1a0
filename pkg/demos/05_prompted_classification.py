"""
Prompted classification against a chat endpoint
===============================================

Four frozen prompt strategies (zero/few-shot, with or without class
instructions) in Polish and English; the review text fills the single
<review> placeholder. Responses must be (or uniquely contain) one of the
three class names after conservative normalization, otherwise they are
recorded as per-item parse failures.

A stub chat server stands in for the remote API here, so this demo runs
offline; point LLMClientConfig.endpoint at a real chat-completions URL (and
set LLM_API_KEY) for live runs.
"""

from dualquality import (HttpChatClient, LLMClientConfig, PromptVariant, StubChatServer,
                         build_prompt, classify_with_llm, load_template, parse_label)

template = load_template(PromptVariant.ZERO_SHOT_INST, "pl")
prompt = build_prompt(template, "Kapsułki z Niemiec są wydajniejsze niż polskie.")
print("prompt head:", prompt[:88].replace("\n", " | "))
print("prompt tail:", prompt[-90:].replace("\n", " | "))

for raw in ["dual quality", " Standard.\n", "„other problems”"]:
    print(f"  parse {raw!r:>22} -> {parse_label(raw).value}")


def canned_model(prompt_text: str) -> str:
    return "dual quality" if "Niemiec" in prompt_text else "standard"


reviews = ["Kapsułki z Niemiec są wydajniejsze niż polskie.",
           "Zwykła dobra kawa.",
           "Proszek pachnie jak zawsze."]

with StubChatServer(canned_model) as server:
    client = HttpChatClient(LLMClientConfig(endpoint=server.endpoint, model="stub",
                                            temperature=0.0))
    runs = classify_with_llm(reviews, template, client, runs=2)
    for run_index, run in enumerate(runs):
        labels = [p.label.value if p else "<failed>" for p in run.predictions]
        print(f"run {run_index}: {labels} ({run.requests} requests, {run.retries} retries)")
