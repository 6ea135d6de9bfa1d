"""Trajectory records: the persistent, replayable unit of an episode."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .protocol import (
    ActionVariant,
    Answer,
    CroppedSearch,
    SelectCrops,
    TextSearch,
    WholeImageSearch,
)


def action_to_dict(action: ActionVariant) -> dict:
    if isinstance(action, WholeImageSearch):
        return {"kind": "whole_image_search"}
    if isinstance(action, CroppedSearch):
        return {"kind": "cropped_search", "description": action.description}
    if isinstance(action, TextSearch):
        return {"kind": "text_search", "query": action.query}
    if isinstance(action, SelectCrops):
        return {"kind": "select_crops", "indices": list(action.indices)}
    if isinstance(action, Answer):
        return {"kind": "answer", "text": action.text}
    raise TypeError(f"unknown action {action!r}")


def action_from_dict(d: dict) -> ActionVariant:
    kind = d["kind"]
    if kind == "whole_image_search":
        return WholeImageSearch()
    if kind == "cropped_search":
        return CroppedSearch(d["description"])
    if kind == "text_search":
        return TextSearch(d["query"])
    if kind == "select_crops":
        return SelectCrops(tuple(d["indices"]))
    if kind == "answer":
        return Answer(d["text"])
    raise ValueError(f"unknown action kind {kind}")


@dataclass
class TurnRecord:
    phase: str  # phase the model was prompted in
    prompt: str
    raw_output: str
    action: Optional[dict] = None  # action_to_dict form; None on parse failure
    error: Optional[str] = None  # parse / transition error, if any
    observations: list = field(default_factory=list)  # rendered texts
    format_score: float = 0.0

    def as_dict(self) -> dict:
        return {
            "phase": self.phase,
            "prompt": self.prompt,
            "raw_output": self.raw_output,
            "action": self.action,
            "error": self.error,
            "observations": list(self.observations),
            "format_score": self.format_score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TurnRecord":
        return cls(
            phase=d["phase"],
            prompt=d["prompt"],
            raw_output=d["raw_output"],
            action=d.get("action"),
            error=d.get("error"),
            observations=list(d.get("observations", [])),
            format_score=d.get("format_score", 0.0),
        )


@dataclass
class Trajectory:
    episode_id: str
    question: str
    image_ref: str
    turns: list = field(default_factory=list)
    termination_reason: Optional[str] = None
    final_answer: Optional[str] = None
    budgets_remaining: dict = field(default_factory=dict)
    reward: Optional[dict] = None
    timings: dict = field(default_factory=dict)  # wall-clock; excluded from hashing

    def actions(self) -> list[ActionVariant]:
        return [action_from_dict(t.action) for t in self.turns if t.action is not None]

    def as_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "question": self.question,
            "image_ref": self.image_ref,
            "turns": [t.as_dict() for t in self.turns],
            "termination_reason": self.termination_reason,
            "final_answer": self.final_answer,
            "budgets_remaining": dict(self.budgets_remaining),
            "reward": self.reward,
            "timings": dict(self.timings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            episode_id=d["episode_id"],
            question=d["question"],
            image_ref=d["image_ref"],
            turns=[TurnRecord.from_dict(t) for t in d.get("turns", [])],
            termination_reason=d.get("termination_reason"),
            final_answer=d.get("final_answer"),
            budgets_remaining=dict(d.get("budgets_remaining", {})),
            reward=d.get("reward"),
            timings=dict(d.get("timings", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, ensure_ascii=False)

    def content_hash(self) -> str:
        """Stable digest of everything except wall-clock timings."""
        doc = self.as_dict()
        doc.pop("timings")
        blob = json.dumps(doc, sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def write_jsonl(path, trajectories: Iterable[Trajectory], append: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "a" if append else "w"
    with path.open(mode, encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(traj.to_json() + "\n")


def read_jsonl(path) -> list[Trajectory]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(Trajectory.from_dict(json.loads(line)))
    return out
