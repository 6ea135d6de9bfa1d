"""Deterministic mock tool implementations over a fixture corpus.

Identical (seed, input) always yields identical output bytes; a configurable
fault injector simulates the timeout band seen against real providers.
"""

from __future__ import annotations

import hashlib
import random
import re
import threading
from typing import Optional, Sequence

from ..toolkit import (
    ChatClient,
    FailureCause,
    GroundingBox,
    ImageSearchResult,
    OutOfBounds,
    RetryPolicy,
    TextSearchPipeline,
    ToolFailure,
    ToolSuite,
    call_with_retries,
    rank_results,
    MAX_GROUNDING_BOXES,
)
from .corpus import MockCorpus


class FaultInjector:
    """Seeded coin-flip failures, logged for later assertions."""

    def __init__(self, rate: float = 0.0, seed: int = 0):
        self.rate = rate
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.log: list = []  # (tool, key) per injected fault

    def maybe_fail(self, tool: str, key: str = "") -> None:
        if self.rate <= 0:
            return
        with self._lock:
            hit = self._rng.random() < self.rate
        if hit:
            self.log.append((tool, key))
            raise ToolFailure(tool, FailureCause.TIMEOUT, detail=f"injected fault on {key!r}")


class MockSearchProvider:
    def __init__(self, corpus: MockCorpus, injector: Optional[FaultInjector] = None):
        self.corpus = corpus
        self.injector = injector or FaultInjector()

    def search_image(self, image_url: str) -> list[tuple[str, str]]:
        self.injector.maybe_fail("image_search", image_url)
        return list(self.corpus.image_search.get(image_url, []))

    def search_text(self, query: str) -> list[tuple[str, str]]:
        self.injector.maybe_fail("text_search", query)
        return list(self.corpus.text_search.get(query, []))


class MockPageReader:
    def __init__(self, corpus: MockCorpus, injector: Optional[FaultInjector] = None):
        self.corpus = corpus
        self.injector = injector or FaultInjector()

    def read(self, url: str) -> str:
        self.injector.maybe_fail("page_reader", url)
        if url not in self.corpus.pages:
            raise ToolFailure("page_reader", FailureCause.MALFORMED_CONTENT, detail=url)
        return self.corpus.pages[url]


_QUESTION_RE = re.compile(r"^Question: (.*)$", re.MULTILINE)
_GT_BRACKET_RE = re.compile(r"^Ground-Truth Answer\(s\): (.*)$", re.MULTILINE)
_PRED_BRACKET_RE = re.compile(r"^Predicted Answer: (.*)$", re.MULTILINE)
_GT_XML_RE = re.compile(r"\*\*Ground Truth Answer\(s\)\*\*: (.*?) \(A list")
_PRED_XML_RE = re.compile(r"\*\*Predicted Answer\*\*: (.*?) \(The model's")
_SOURCE_RE = re.compile(r"^\[(.*)\] \(", re.MULTILINE)

FALLBACK_TURN = "<think>No script available.</think><answer>Unable to answer due to lack of relevant information</answer>"


def _normalize(text: str) -> str:
    return re.sub(r"[^a-z0-9 ]+", "", text.lower()).strip()


def semantic_match(prediction: str, ground_truths: Sequence[str]) -> bool:
    """The mock judge's notion of semantic equivalence: normalized equality
    or containment of a ground truth in the prediction."""
    pred = _normalize(prediction)
    for gt in ground_truths:
        gt_norm = _normalize(gt)
        if gt_norm and (pred == gt_norm or gt_norm in pred):
            return True
    return False


class MockChatClient(ChatClient):
    """One chat endpoint playing three roles, routed on the prompt text:
    summarizer, judge (both verdict styles), and the scripted episode model."""

    def __init__(self, corpus: MockCorpus, injector: Optional[FaultInjector] = None):
        self.corpus = corpus
        self.injector = injector or FaultInjector()

    def complete(self, messages: Sequence[dict]) -> str:
        prompt = messages[-1]["content"]
        if "Synthesize the text extracted" in prompt:
            return self._summarize(prompt)
        if "Respond with ONLY one of these two options" in prompt:
            return self._judge_bracket(prompt)
        if "strictly in the following XML format" in prompt:
            return self._judge_xml(prompt)
        return self._scripted_turn(messages)

    def _summarize(self, prompt: str) -> str:
        titles = _SOURCE_RE.findall(prompt)
        if not titles:
            return "No relevant information found."
        return f"Summary of {len(titles)} sources: " + "; ".join(titles) + "."

    def _judge_bracket(self, prompt: str) -> str:
        gt = _GT_BRACKET_RE.search(prompt)
        pred = _PRED_BRACKET_RE.search(prompt)
        if not gt or not pred:
            return "[INCORRECT]"
        ok = semantic_match(pred.group(1), gt.group(1).split(" | "))
        return "[CORRECT]" if ok else "[INCORRECT]"

    def _judge_xml(self, prompt: str) -> str:
        gt = _GT_XML_RE.search(prompt)
        pred = _PRED_XML_RE.search(prompt)
        ok = bool(gt and pred and semantic_match(pred.group(1), gt.group(1).split(" | ")))
        verdict = "True" if ok else "False"
        return f"<reason>\nScripted comparison against ground truth.\n</reason>\n<judge>\n{verdict}\n</judge>"

    def _scripted_turn(self, messages: Sequence[dict]) -> str:
        first_user = next((m for m in messages if m["role"] == "user"), None)
        if first_user is None:
            return FALLBACK_TURN
        m = _QUESTION_RE.search(first_user["content"])
        if m is None:
            return FALLBACK_TURN
        question = m.group(1).strip()
        script = self.corpus.model_scripts.get(question)
        if not script:
            return FALLBACK_TURN
        turn_index = sum(1 for msg in messages if msg["role"] == "assistant")
        if turn_index >= len(script):
            return FALLBACK_TURN
        return script[turn_index]


class MockToolSuite(ToolSuite):
    """Full tool suite over the corpus, with retries and fault injection."""

    def __init__(
        self,
        corpus: MockCorpus,
        seed: int = 0,
        fault_rate: float = 0.0,
        parallelism: int = 4,
        retry_policy: Optional[RetryPolicy] = None,
    ):
        self.corpus = corpus
        self.injector = FaultInjector(rate=fault_rate, seed=seed)
        self.retry_policy = retry_policy or RetryPolicy(backoff=0.0, sleep=lambda _: None)
        self.provider = MockSearchProvider(corpus, self.injector)
        self.reader = MockPageReader(corpus, self.injector)
        self.chat = MockChatClient(corpus, self.injector)
        self.pipeline = TextSearchPipeline(
            self.provider,
            self.reader,
            self.chat,
            parallelism=parallelism,
            retry_policy=self.retry_policy,
        )
        # sizes of crops produced during this run, keyed by derived ref
        self._derived_sizes: dict = {}
        self._lock = threading.Lock()

    def _size_of(self, image_ref: str) -> tuple[float, float]:
        if image_ref in self.corpus.images:
            w, h = self.corpus.images[image_ref]
            return float(w), float(h)
        with self._lock:
            if image_ref in self._derived_sizes:
                return self._derived_sizes[image_ref]
        raise ToolFailure("crop", FailureCause.UPSTREAM, retryable=False, detail=f"unknown image {image_ref}")

    def image_search(self, image_ref: str) -> list[ImageSearchResult]:
        pairs = call_with_retries(lambda: self.provider.search_image(image_ref), self.retry_policy)
        return rank_results(pairs)

    def text_search(self, query: str) -> str:
        return self.pipeline.run(query)

    def ground(self, image_ref: str, description: str) -> list[GroundingBox]:
        def call():
            self.injector.maybe_fail("ground", f"{image_ref}|{description}")
            raw = self.corpus.grounding.get(image_ref, {}).get(description, [])
            boxes = [GroundingBox(bbox=tuple(b[:4]), score=b[4], query=description) for b in raw]
            boxes.sort(key=lambda b: -b.score)
            return boxes[:MAX_GROUNDING_BOXES]

        return call_with_retries(call, self.retry_policy)

    def crop(self, image_ref: str, bbox) -> str:
        x0, y0, x1, y1 = bbox
        w, h = self._size_of(image_ref)
        if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
            raise OutOfBounds(f"bbox {bbox} outside {w}x{h} image {image_ref}")
        derived = f"{image_ref}#crop({x0:g},{y0:g},{x1:g},{y1:g})"
        with self._lock:
            self._derived_sizes[derived] = (x1 - x0, y1 - y0)
        return derived

    def upload(self, image_ref: str) -> str:
        digest = hashlib.sha256(image_ref.encode("utf-8")).hexdigest()[:16]
        return f"https://img.mock/{digest}"
