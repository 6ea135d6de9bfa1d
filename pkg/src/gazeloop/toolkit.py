"""Clients for the external tools: image search, the text-search pipeline,
grounding, cropping, and image hosting.

Every tool sits behind an abstract suite so episodes run identically against
the deterministic mocks and against real HTTP providers.
"""

from __future__ import annotations

import abc
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Callable, Optional, Protocol, Sequence

MAX_SEARCH_RESULTS = 5
MAX_GROUNDING_BOXES = 5
NO_INFORMATION = "No relevant information found."


class FailureCause(Enum):
    TIMEOUT = "timeout"
    NETWORK = "network"
    MALFORMED_CONTENT = "malformed_content"
    UPSTREAM = "upstream"


class ToolFailure(Exception):
    """Typed tool-call failure. Malformed content is never retryable."""

    def __init__(
        self,
        tool: str,
        cause: FailureCause,
        retryable: Optional[bool] = None,
        code: Optional[int] = None,
        detail: str = "",
    ):
        super().__init__(f"{tool}: {cause.value}" + (f" ({detail})" if detail else ""))
        self.tool = tool
        self.cause = cause
        self.code = code
        self.detail = detail
        if cause is FailureCause.MALFORMED_CONTENT:
            self.retryable = False
        elif retryable is None:
            self.retryable = cause in (FailureCause.TIMEOUT, FailureCause.NETWORK)
        else:
            self.retryable = retryable


class OutOfBounds(ValueError):
    pass


@dataclass(frozen=True)
class ImageSearchResult:
    thumbnail_ref: str
    title: str
    rank: int  # 1-based, contiguous


@dataclass(frozen=True)
class GroundingBox:
    bbox: tuple[float, float, float, float]  # (x0, y0, x1, y1), pixel coords
    score: float
    query: str

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate box {self.bbox}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score out of range: {self.score}")


@dataclass
class RetryPolicy:
    attempts: int = 3  # first try plus two retries
    backoff: float = 0.05
    factor: float = 2.0
    sleep: Callable[[float], None] = time.sleep


def call_with_retries(fn: Callable, policy: RetryPolicy):
    """Run ``fn``, retrying retryable ToolFailures with exponential backoff."""
    delay = policy.backoff
    for attempt in range(policy.attempts):
        try:
            return fn()
        except ToolFailure as failure:
            if not failure.retryable or attempt == policy.attempts - 1:
                raise
            if delay > 0:
                policy.sleep(delay)
            delay *= policy.factor
    raise AssertionError("unreachable")  # pragma: no cover


class SearchProvider(Protocol):
    def search_image(self, image_url: str) -> list[tuple[str, str]]:
        """Visually similar pages for an image URL, as (thumbnail, title)."""

    def search_text(self, query: str) -> list[tuple[str, str]]:
        """Ranked web results for a query, as (url, title)."""


class PageReader(Protocol):
    def read(self, url: str) -> str:
        """Extract the page body as plain text."""


class ChatClient(Protocol):
    def complete(self, messages: Sequence[dict]) -> str:
        """One chat completion; messages are {'role', 'content'} dicts."""


def load_summarization_prompt(formatted_results: str) -> str:
    template = resources.files("gazeloop.prompts").joinpath("summarization.txt").read_text(
        encoding="utf-8"
    )
    return template.replace("{formatted_results}", formatted_results)


class TextSearchPipeline:
    """Search, read the result pages concurrently, then summarize.

    Individual page failures are dropped; the summary covers whatever pages
    survived. Only a dead search provider surfaces as a ToolFailure.
    """

    def __init__(
        self,
        provider: SearchProvider,
        reader: PageReader,
        summarizer: ChatClient,
        parallelism: int = 4,
        retry_policy: Optional[RetryPolicy] = None,
        failure_log: Optional[list] = None,
    ):
        self.provider = provider
        self.reader = reader
        self.summarizer = summarizer
        self.parallelism = max(1, parallelism)
        self.retry_policy = retry_policy or RetryPolicy()
        # (query, url or None) tuples for dropped pages; shared with callers
        self.failure_log = failure_log if failure_log is not None else []

    def run(self, query: str) -> str:
        if not query.strip():
            raise ValueError("empty text search query")
        results = call_with_retries(lambda: self.provider.search_text(query), self.retry_policy)
        results = list(results)[:MAX_SEARCH_RESULTS]
        if not results:
            return NO_INFORMATION

        def read_one(url: str) -> Optional[str]:
            try:
                return call_with_retries(lambda: self.reader.read(url), self.retry_policy)
            except ToolFailure:
                self.failure_log.append((query, url))
                return None

        with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
            bodies = list(pool.map(read_one, [url for url, _ in results]))
        pages = [
            (title, url, body) for (url, title), body in zip(results, bodies) if body is not None
        ]
        if not pages:
            return NO_INFORMATION
        formatted = "\n\n".join(f"[{title}] ({url})\n{body}" for title, url, body in pages)
        prompt = load_summarization_prompt(formatted)
        return self.summarizer.complete([{"role": "user", "content": prompt}])


class ToolSuite(abc.ABC):
    """The five tool operations an episode executor needs."""

    @abc.abstractmethod
    def image_search(self, image_ref: str) -> list[ImageSearchResult]:
        """Ranked similar-page results, at most MAX_SEARCH_RESULTS entries."""

    @abc.abstractmethod
    def text_search(self, query: str) -> str:
        """Run the full search/read/summarize pipeline and return the summary."""

    @abc.abstractmethod
    def ground(self, image_ref: str, description: str) -> list[GroundingBox]:
        """Top boxes for a description, descending score, at most n entries."""

    @abc.abstractmethod
    def crop(self, image_ref: str, bbox: tuple[float, float, float, float]) -> str:
        """Produce a new image reference for the region; raises OutOfBounds."""

    @abc.abstractmethod
    def upload(self, image_ref: str) -> str:
        """Host the image and return a stable URL."""


def rank_results(pairs: Sequence[tuple[str, str]]) -> list[ImageSearchResult]:
    """Preserve provider order, truncate, and assign contiguous ranks."""
    return [
        ImageSearchResult(thumbnail_ref=thumb, title=title, rank=i)
        for i, (thumb, title) in enumerate(list(pairs)[:MAX_SEARCH_RESULTS], start=1)
    ]
