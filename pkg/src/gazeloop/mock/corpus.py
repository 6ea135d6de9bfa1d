"""The mock corpus: a versioned manifest mapping image refs and query strings
to canned tool results, so every contract is testable offline."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class MockCorpus:
    # image ref -> (width, height)
    images: dict = field(default_factory=dict)
    # image ref -> list of (thumbnail, title)
    image_search: dict = field(default_factory=dict)
    # query -> list of (url, title)
    text_search: dict = field(default_factory=dict)
    # url -> page body text
    pages: dict = field(default_factory=dict)
    # image ref -> {description -> list of (x0, y0, x1, y1, score)}
    grounding: dict = field(default_factory=dict)
    # question -> ordered raw model turns
    model_scripts: dict = field(default_factory=dict)
    # record id -> list of scripted sampler answers (for the data pipeline)
    sampler_scripts: dict = field(default_factory=dict)
    version: str = "1"

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "images": {k: list(v) for k, v in self.images.items()},
            "image_search": {k: [list(p) for p in v] for k, v in self.image_search.items()},
            "text_search": {k: [list(p) for p in v] for k, v in self.text_search.items()},
            "pages": dict(self.pages),
            "grounding": {
                ref: {desc: [list(b) for b in boxes] for desc, boxes in per_ref.items()}
                for ref, per_ref in self.grounding.items()
            },
            "model_scripts": {k: list(v) for k, v in self.model_scripts.items()},
            "sampler_scripts": {k: list(v) for k, v in self.sampler_scripts.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MockCorpus":
        return cls(
            version=str(d.get("version", "1")),
            images={k: tuple(v) for k, v in d.get("images", {}).items()},
            image_search={
                k: [tuple(p) for p in v] for k, v in d.get("image_search", {}).items()
            },
            text_search={k: [tuple(p) for p in v] for k, v in d.get("text_search", {}).items()},
            pages=dict(d.get("pages", {})),
            grounding={
                ref: {desc: [tuple(b) for b in boxes] for desc, boxes in per_ref.items()}
                for ref, per_ref in d.get("grounding", {}).items()
            },
            model_scripts={k: list(v) for k, v in d.get("model_scripts", {}).items()},
            sampler_scripts={k: list(v) for k, v in d.get("sampler_scripts", {}).items()},
        )

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.as_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "MockCorpus":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
