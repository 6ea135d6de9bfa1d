"""Selective gaze: overlap dedup of grounding boxes, crop dispatch, and
reflection detection over finished episodes."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

from .protocol import ActionKind, ActionVariant, SelectCrops
from .session import ToolRequest
from .toolkit import GroundingBox

DEFAULT_IOU_THRESHOLD = 0.7


class EmptyInput(ValueError):
    pass


class IllegalIndex(ValueError):
    pass


def iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    """Intersection over union of two (x0, y0, x1, y1) boxes."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


@dataclass(frozen=True)
class CropCandidate:
    index: int  # 1-based, contiguous after dedup
    box: GroundingBox
    image_ref: Optional[str] = None  # filled once the crop has been executed


@dataclass(frozen=True)
class CropCandidateSet:
    candidates: tuple[CropCandidate, ...]
    source_description: str

    def __len__(self) -> int:
        return len(self.candidates)

    def with_image_refs(self, refs: Sequence[str]) -> "CropCandidateSet":
        if len(refs) != len(self.candidates):
            raise ValueError(f"expected {len(self.candidates)} refs, got {len(refs)}")
        return CropCandidateSet(
            candidates=tuple(
                replace(c, image_ref=r) for c, r in zip(self.candidates, refs)
            ),
            source_description=self.source_description,
        )


def dedup_boxes(
    boxes: Sequence[GroundingBox],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    source_description: str = "",
) -> CropCandidateSet:
    """Greedy suppression of overlapping boxes.

    Keep the highest-score box, drop anything overlapping a kept box at or
    above the threshold, reindex survivors from 1. Equal scores tie-break on
    input order (earlier box kept first).
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    ordered = sorted(enumerate(boxes), key=lambda p: (-p[1].score, p[0]))
    kept: list[GroundingBox] = []
    for _, box in ordered:
        if all(iou(box.bbox, k.bbox) < iou_threshold for k in kept):
            kept.append(box)
    candidates = tuple(CropCandidate(index=i, box=b) for i, b in enumerate(kept, start=1))
    return CropCandidateSet(candidates=candidates, source_description=source_description)


def dispatch_selected(candidates: CropCandidateSet, indices: Sequence[int]) -> list[ToolRequest]:
    """One image-search request per selected crop, in index order."""
    valid = {c.index for c in candidates.candidates}
    bad = [i for i in indices if i not in valid]
    if bad:
        raise IllegalIndex(f"indices {bad} not among candidates {sorted(valid)}")
    by_index = {c.index: c for c in candidates.candidates}
    requests = []
    for i in sorted(set(indices)):
        cand = by_index[i]
        if cand.image_ref is None:
            raise ValueError(f"candidate {i} has no crop image yet")
        requests.append(ToolRequest("image_search", {"image_ref": cand.image_ref, "crop_index": i}))
    return requests


@dataclass
class GazeOutcome:
    turn_index: int
    selected_indices: tuple[int, ...]
    reflected: bool
    relevant: Optional[bool] = None  # supplied label for evaluation sets


_RETRY_KINDS = {ActionKind.CROPPED_SEARCH, ActionKind.WHOLE_IMAGE_SEARCH}


def detect_reflection(actions: Iterable[ActionVariant]) -> list[GazeOutcome]:
    """One outcome per crop-selection event; reflected means a later
    image-search-family action occurred before termination."""
    actions = list(actions)
    outcomes = []
    for i, action in enumerate(actions):
        if isinstance(action, SelectCrops):
            reflected = any(later.kind in _RETRY_KINDS for later in actions[i + 1 :])
            outcomes.append(
                GazeOutcome(turn_index=i, selected_indices=action.indices, reflected=reflected)
            )
    return outcomes


def crop_selection_accuracy(outcomes: Sequence[GazeOutcome]) -> float:
    """Fraction of labeled gaze events marked relevant."""
    if not outcomes:
        raise EmptyInput("no gaze outcomes")
    unlabeled = [o for o in outcomes if o.relevant is None]
    if unlabeled:
        raise ValueError(f"{len(unlabeled)} outcomes missing relevance labels")
    return sum(1 for o in outcomes if o.relevant) / len(outcomes)
