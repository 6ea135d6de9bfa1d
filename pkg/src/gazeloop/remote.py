"""Provider-shaped HTTP clients. The mock server speaks the same wire shapes
over local transport, so these clients are exercised fully offline."""

from __future__ import annotations

from typing import Optional, Sequence

import httpx

from .toolkit import (
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
)


def _post(client: httpx.Client, tool: str, path: str, payload: dict) -> dict:
    try:
        response = client.post(path, json=payload)
    except httpx.TimeoutException as exc:
        raise ToolFailure(tool, FailureCause.TIMEOUT, detail=str(exc)) from exc
    except httpx.TransportError as exc:
        raise ToolFailure(tool, FailureCause.NETWORK, detail=str(exc)) from exc
    if response.status_code == 503:
        body = response.json()
        raise ToolFailure(
            tool,
            FailureCause(body.get("cause", "upstream")),
            retryable=body.get("retryable"),
            detail=body.get("detail", ""),
        )
    if response.status_code == 400:
        raise OutOfBounds(response.json().get("error", "bad request"))
    if response.status_code >= 500:
        raise ToolFailure(tool, FailureCause.UPSTREAM, code=response.status_code)
    if response.status_code != 200:
        raise ToolFailure(
            tool, FailureCause.UPSTREAM, retryable=False, code=response.status_code
        )
    return response.json()


class RemoteSearchProvider:
    def __init__(self, client: httpx.Client):
        self.client = client

    def search_image(self, image_url: str) -> list[tuple[str, str]]:
        body = _post(self.client, "image_search", "/search/image", {"image_url": image_url})
        return [(r["thumbnail"], r["title"]) for r in body["results"]]

    def search_text(self, query: str) -> list[tuple[str, str]]:
        body = _post(self.client, "text_search", "/search/text", {"query": query})
        return [(r["url"], r["title"]) for r in body["results"]]


class RemotePageReader:
    def __init__(self, client: httpx.Client):
        self.client = client

    def read(self, url: str) -> str:
        return _post(self.client, "page_reader", "/read", {"url": url})["text"]


class RemoteChatClient(ChatClient):
    def __init__(self, client: httpx.Client, path: str = "/chat"):
        self.client = client
        self.path = path

    def complete(self, messages: Sequence[dict]) -> str:
        body = _post(self.client, "chat", self.path, {"messages": list(messages)})
        return body["content"]


class RemoteToolSuite(ToolSuite):
    """Tool suite over one HTTP base URL (separate chat endpoints allowed)."""

    def __init__(
        self,
        client: httpx.Client,
        summarizer: Optional[ChatClient] = None,
        parallelism: int = 4,
        retry_policy: Optional[RetryPolicy] = None,
    ):
        self.client = client
        self.retry_policy = retry_policy or RetryPolicy()
        self.provider = RemoteSearchProvider(client)
        self.reader = RemotePageReader(client)
        self.pipeline = TextSearchPipeline(
            self.provider,
            self.reader,
            summarizer or RemoteChatClient(client),
            parallelism=parallelism,
            retry_policy=self.retry_policy,
        )

    def image_search(self, image_ref: str) -> list[ImageSearchResult]:
        pairs = call_with_retries(lambda: self.provider.search_image(image_ref), self.retry_policy)
        return rank_results(pairs)

    def text_search(self, query: str) -> str:
        return self.pipeline.run(query)

    def ground(self, image_ref: str, description: str) -> list[GroundingBox]:
        def call():
            body = _post(
                self.client, "ground", "/ground", {"image_ref": image_ref, "description": description}
            )
            return [
                GroundingBox(bbox=tuple(b["bbox"]), score=b["score"], query=b.get("query", description))
                for b in body["boxes"]
            ]

        return call_with_retries(call, self.retry_policy)

    def crop(self, image_ref: str, bbox) -> str:
        def call():
            body = _post(self.client, "crop", "/crop", {"image_ref": image_ref, "bbox": list(bbox)})
            return body["image_ref"]

        return call_with_retries(call, self.retry_policy)

    def upload(self, image_ref: str) -> str:
        def call():
            return _post(self.client, "upload", "/upload", {"image_ref": image_ref})["url"]

        return call_with_retries(call, self.retry_policy)
