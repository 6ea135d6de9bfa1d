"""Data construction: uncertainty-aware filtering, trajectory skeleton
synthesis, difficulty stratification, and composition accounting.

Manifests are line-delimited JSON records with stable field names
(id, question, image, answers, pass_count, attempts, search_type, level), the
same format for input and output so stages compose.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

DEFAULT_FILTER_ATTEMPTS = 4
DEFAULT_LEVEL_BAND = (0.25, 0.75)


class SearchType(Enum):
    SEARCH_FREE = "search_free"
    TEXT_ONLY = "text_only"
    IMAGE_ONLY = "image_only"
    BOTH = "both"
    UNLABELED = "unlabeled"


class ManifestError(ValueError):
    pass


class MissingPassRate(ValueError):
    pass


class UnlabeledRecords(ValueError):
    pass


@dataclass
class DatasetRecord:
    id: str
    question: str
    image_ref: str
    ground_truth: list = field(default_factory=list)
    pass_count: Optional[int] = None
    attempts: Optional[int] = None
    search_type: SearchType = SearchType.UNLABELED
    level: Optional[str] = None  # "L1" | "L2" after stratification

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "image": self.image_ref,
            "answers": list(self.ground_truth),
            "pass_count": self.pass_count,
            "attempts": self.attempts,
            "search_type": self.search_type.value,
            "level": self.level,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetRecord":
        try:
            return cls(
                id=str(d["id"]),
                question=d["question"],
                image_ref=d["image"],
                ground_truth=list(d.get("answers", [])),
                pass_count=d.get("pass_count"),
                attempts=d.get("attempts"),
                search_type=SearchType(d.get("search_type", "unlabeled")),
                level=d.get("level"),
            )
        except (KeyError, ValueError) as exc:
            raise ManifestError(f"bad record: {exc}") from exc


def read_manifest(path) -> list[DatasetRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(DatasetRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, ManifestError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    return records


def write_manifest(path, records: Iterable[DatasetRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.as_dict(), sort_keys=True, ensure_ascii=False) + "\n")


# --- uncertainty-aware filtering -------------------------------------------

# sampler(record, attempt_index) -> answer text
Sampler = Callable[[DatasetRecord, int], str]
# judge(record, answer) -> correct?
JudgeFn = Callable[[DatasetRecord, str], bool]


@dataclass
class FilterResult:
    kept: list
    discarded: list
    unresolved: list  # sampler/judge failure; re-run candidates

    def partition_sizes(self) -> tuple[int, int, int]:
        return len(self.kept), len(self.discarded), len(self.unresolved)


def uncertainty_filter(
    records: Sequence[DatasetRecord],
    sampler: Sampler,
    judge: JudgeFn,
    n_attempts: int = DEFAULT_FILTER_ATTEMPTS,
) -> FilterResult:
    """Drop records the sampler already answers correctly on every attempt.

    A record is kept iff its judged-correct count is below ``n_attempts``.
    Sampler or judge failures leave the record unresolved rather than
    silently dropped.
    """
    if n_attempts < 1:
        raise ValueError("n_attempts must be >= 1")
    kept, discarded, unresolved = [], [], []
    for record in records:
        try:
            passes = 0
            for attempt in range(n_attempts):
                answer = sampler(record, attempt)
                if judge(record, answer):
                    passes += 1
        except Exception:
            unresolved.append(record)
            continue
        record.pass_count = passes
        record.attempts = n_attempts
        (discarded if passes >= n_attempts else kept).append(record)
    return FilterResult(kept=kept, discarded=discarded, unresolved=unresolved)


# --- trajectory skeleton synthesis ------------------------------------------

SKELETON_STAGES = ("glance", "decision", "gaze")
VERIFICATION_CRITERIA = ("answer_accuracy", "visual_rationality")


@dataclass
class TrajectorySkeleton:
    record_id: str
    question: str
    image_ref: str
    stages: tuple = SKELETON_STAGES
    answer_without_tools: bool = False  # search-free records skip tool slots
    verification_checklist: tuple = VERIFICATION_CRITERIA

    def to_json(self) -> str:
        doc = {
            "record_id": self.record_id,
            "question": self.question,
            "image": self.image_ref,
            "stages": list(self.stages),
            "answer_without_tools": self.answer_without_tools,
            "verification_checklist": list(self.verification_checklist),
        }
        return json.dumps(doc, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, blob: str) -> "TrajectorySkeleton":
        d = json.loads(blob)
        return cls(
            record_id=d["record_id"],
            question=d["question"],
            image_ref=d["image"],
            stages=tuple(d["stages"]),
            answer_without_tools=d["answer_without_tools"],
            verification_checklist=tuple(d["verification_checklist"]),
        )


def synthesize_skeleton(record: DatasetRecord) -> TrajectorySkeleton:
    """Fixed-order template a teacher model or annotator completes later."""
    return TrajectorySkeleton(
        record_id=record.id,
        question=record.question,
        image_ref=record.image_ref,
        answer_without_tools=record.search_type is SearchType.SEARCH_FREE,
    )


# --- difficulty stratification ----------------------------------------------

@dataclass
class StratifyResult:
    level1_ids: list
    level2_ids: list  # superset of level1_ids
    unassigned_ids: list


def stratify(
    records: Sequence[DatasetRecord],
    band: tuple[float, float] = DEFAULT_LEVEL_BAND,
    attempts: Optional[int] = None,
) -> StratifyResult:
    """Assign difficulty levels from measured pass rates.

    Level 1: pass rate inside the boundary band around one half.
    Level 2: Level 1 plus records that never pass. Everything else stays
    unassigned.
    """
    lo, hi = band
    if not (0.0 <= lo <= hi <= 1.0):
        raise ValueError(f"bad band {band}")
    l1, l2, other = [], [], []
    for record in records:
        total = attempts if attempts is not None else record.attempts
        if record.pass_count is None or not total:
            raise MissingPassRate(f"record {record.id} has no measured pass rate")
        rate = record.pass_count / total
        if lo <= rate <= hi:
            record.level = "L1"
            l1.append(record.id)
            l2.append(record.id)
        elif rate == 0.0:
            record.level = "L2"
            l2.append(record.id)
        else:
            record.level = None
            other.append(record.id)
    return StratifyResult(level1_ids=l1, level2_ids=l2, unassigned_ids=other)


def level_manifests(records: Sequence[DatasetRecord]) -> tuple[list, list]:
    """Split stratified records into (level1, level2) manifests, L1 first."""
    l1 = [r for r in records if r.level == "L1"]
    l2 = l1 + [r for r in records if r.level == "L2"]
    return l1, l2


# --- composition accounting ---------------------------------------------------

@dataclass
class CompositionReport:
    total: int
    counts: dict  # search_type value -> count
    ratios: dict  # search_type value -> percent, one-decimal rounding

    def to_doc(self) -> dict:
        return {
            "kind": "composition",
            "total": self.total,
            "counts": self.counts,
            "ratios_percent": self.ratios,
        }

    def to_rows(self) -> list[list]:
        rows = [["search_type", "count", "ratio_percent"]]
        for st, count in self.counts.items():
            rows.append([st, count, self.ratios[st]])
        return rows


def composition_report(records: Sequence[DatasetRecord]) -> CompositionReport:
    """Per-subtype counts and one-decimal percentage ratios."""
    if not records:
        return CompositionReport(total=0, counts={}, ratios={})
    unlabeled = [r for r in records if r.search_type is SearchType.UNLABELED]
    if unlabeled:
        raise UnlabeledRecords(f"{len(unlabeled)} records lack search_type labels")
    counts: dict = {}
    for record in records:
        counts[record.search_type.value] = counts.get(record.search_type.value, 0) + 1
    total = len(records)
    ratios = {st: round(100.0 * c / total, 1) for st, c in counts.items()}
    return CompositionReport(total=total, counts=counts, ratios=ratios)
