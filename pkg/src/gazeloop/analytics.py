"""Trajectory analytics: search-behavior distribution, gaze correctness and
reflection tallies, and machine-readable report emission."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .gaze import EmptyInput, GazeOutcome
from .protocol import ActionKind, ActionVariant
from .trajectory import Trajectory


class BehaviorClass(Enum):
    NO_SEARCH = "no_search"
    ONE_SEARCH = "one_search"
    MIX_SEARCH = "mix_search"


# Tool type per action kind. A cropped search plus its crop-selection dispatch
# is one "crop" tool type; whole-image search is a distinct "image" type.
_TOOL_TYPE = {
    ActionKind.TEXT_SEARCH: "text",
    ActionKind.WHOLE_IMAGE_SEARCH: "image",
    ActionKind.CROPPED_SEARCH: "crop",
    ActionKind.SELECT_CROPS: "crop",
}


def tool_type_counts(actions: Sequence[ActionVariant]) -> Counter:
    counts: Counter = Counter()
    for action in actions:
        tool = _TOOL_TYPE.get(action.kind)
        if tool is not None:
            counts[tool] += 1
    return counts


def classify_behavior(trajectory_or_actions) -> BehaviorClass:
    """Classify by how many distinct tool types the episode used."""
    if isinstance(trajectory_or_actions, Trajectory):
        actions = trajectory_or_actions.actions()
    else:
        actions = list(trajectory_or_actions)
    distinct = len(tool_type_counts(actions))
    if distinct == 0:
        return BehaviorClass.NO_SEARCH
    if distinct == 1:
        return BehaviorClass.ONE_SEARCH
    return BehaviorClass.MIX_SEARCH


@dataclass
class BehaviorReport:
    total: int
    counts: dict  # class value -> count
    ratios: dict  # class value -> fraction
    tool_counts: dict  # tool type -> total occurrences
    ids_per_class: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "kind": "behavior_distribution",
            "total": self.total,
            "counts": self.counts,
            "ratios": self.ratios,
            "tool_counts": self.tool_counts,
            "ids_per_class": self.ids_per_class,
        }

    def to_rows(self) -> list[list]:
        rows = [["class", "count", "ratio"]]
        for cls in BehaviorClass:
            rows.append([cls.value, self.counts[cls.value], self.ratios[cls.value]])
        return rows


def behavior_distribution(trajectories: Sequence[Trajectory]) -> BehaviorReport:
    if not trajectories:
        raise EmptyInput("no trajectories")
    counts = {cls.value: 0 for cls in BehaviorClass}
    ids: dict = {cls.value: [] for cls in BehaviorClass}
    tools: Counter = Counter()
    for traj in trajectories:
        actions = traj.actions()
        cls = classify_behavior(actions)
        counts[cls.value] += 1
        ids[cls.value].append(traj.episode_id)
        tools.update(tool_type_counts(actions))
    total = len(trajectories)
    ratios = {k: v / total for k, v in counts.items()}
    return BehaviorReport(
        total=total, counts=counts, ratios=ratios, tool_counts=dict(tools), ids_per_class=ids
    )


class NoErrors(ValueError):
    pass


@dataclass
class GazeReport:
    total: int
    correct: int
    errors: int
    reflected_on_error: int
    correctness: float
    # absent (None) when every gaze was correct; never reported over a
    # zero denominator
    reflection_on_error: Optional[float]

    def to_doc(self) -> dict:
        return {
            "kind": "gaze_metrics",
            "total": self.total,
            "correct": self.correct,
            "errors": self.errors,
            "reflected_on_error": self.reflected_on_error,
            "correctness": self.correctness,
            "reflection_on_error": self.reflection_on_error,
        }

    def to_rows(self) -> list[list]:
        reflection = "absent" if self.reflection_on_error is None else self.reflection_on_error
        return [
            ["metric", "value"],
            ["gaze_correctness", self.correctness],
            ["reflection_rate_on_errors", reflection],
        ]


def gaze_report(outcomes: Sequence[GazeOutcome]) -> GazeReport:
    """Correctness over all labeled gazes; reflection rate among the wrong ones."""
    if not outcomes:
        raise EmptyInput("no gaze outcomes")
    if any(o.relevant is None for o in outcomes):
        raise ValueError("all outcomes must carry relevance labels")
    correct = sum(1 for o in outcomes if o.relevant)
    errors = [o for o in outcomes if not o.relevant]
    reflected = sum(1 for o in errors if o.reflected)
    return GazeReport(
        total=len(outcomes),
        correct=correct,
        errors=len(errors),
        reflected_on_error=reflected,
        correctness=correct / len(outcomes),
        reflection_on_error=(reflected / len(errors)) if errors else None,
    )


def emit_report(report, stem) -> str:
    """Write ``<stem>.json`` and ``<stem>.csv`` with stable bytes; returns the
    serialized JSON document."""
    doc = json.dumps(report.to_doc(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(report.to_rows())
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".json").write_text(doc, encoding="utf-8")
    stem.with_suffix(".csv").write_text(buf.getvalue(), encoding="utf-8")
    return doc
