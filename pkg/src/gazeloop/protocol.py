"""Action grammar for the glance/gaze visual-QA loop.

A model turn carries an optional ``<think>...</think>`` block plus exactly one
action tag. This module parses raw turn text into structured actions, renders
actions and tool observations back to canonical text, and scores a turn's
structural compliance.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Optional, Sequence, Union


class Phase(Enum):
    """Where an episode currently sits in the tool-call loop."""

    INITIAL = "initial"
    AFTER_IMAGE_SEARCH = "after_image_search"
    AFTER_GAZE_CROPS = "after_gaze_crops"
    AFTER_TEXT_SEARCH = "after_text_search"
    TERMINATED = "terminated"


class ActionKind(Enum):
    WHOLE_IMAGE_SEARCH = "whole_image_search"
    CROPPED_SEARCH = "cropped_search"
    TEXT_SEARCH = "text_search"
    SELECT_CROPS = "select_crops"
    ANSWER = "answer"


@dataclass(frozen=True)
class WholeImageSearch:
    kind: ClassVar[ActionKind] = ActionKind.WHOLE_IMAGE_SEARCH


@dataclass(frozen=True)
class CroppedSearch:
    description: str
    kind: ClassVar[ActionKind] = ActionKind.CROPPED_SEARCH


@dataclass(frozen=True)
class TextSearch:
    query: str
    kind: ClassVar[ActionKind] = ActionKind.TEXT_SEARCH


@dataclass(frozen=True)
class SelectCrops:
    # 1-based, deduplicated, sorted ascending
    indices: tuple[int, ...]
    kind: ClassVar[ActionKind] = ActionKind.SELECT_CROPS


@dataclass(frozen=True)
class Answer:
    text: str
    kind: ClassVar[ActionKind] = ActionKind.ANSWER


ActionVariant = Union[WholeImageSearch, CroppedSearch, TextSearch, SelectCrops, Answer]


@dataclass(frozen=True)
class ModelAction:
    """One parsed model turn: optional think text plus exactly one action."""

    action: ActionVariant
    think: Optional[str] = None


# Action menus per phase. Budget availability narrows these further in the
# session module. Text search is never legal directly after a gaze.
PHASE_MENU: dict[Phase, frozenset[ActionKind]] = {
    Phase.INITIAL: frozenset(
        {
            ActionKind.WHOLE_IMAGE_SEARCH,
            ActionKind.CROPPED_SEARCH,
            ActionKind.TEXT_SEARCH,
            ActionKind.ANSWER,
        }
    ),
    Phase.AFTER_IMAGE_SEARCH: frozenset(
        {
            ActionKind.ANSWER,
            ActionKind.TEXT_SEARCH,
            ActionKind.CROPPED_SEARCH,
            ActionKind.WHOLE_IMAGE_SEARCH,
        }
    ),
    Phase.AFTER_GAZE_CROPS: frozenset(
        {
            ActionKind.SELECT_CROPS,
            ActionKind.ANSWER,
            ActionKind.CROPPED_SEARCH,
            ActionKind.WHOLE_IMAGE_SEARCH,
        }
    ),
    Phase.AFTER_TEXT_SEARCH: frozenset({ActionKind.ANSWER, ActionKind.TEXT_SEARCH}),
    Phase.TERMINATED: frozenset(),
}


class ParseErrorCode(Enum):
    NO_ACTION_TAG = "no_action_tag"
    MULTIPLE_ACTION_TAGS = "multiple_action_tags"
    MALFORMED_TAG = "malformed_tag"
    ILLEGAL_ACTION_FOR_PHASE = "illegal_action_for_phase"
    EMPTY_PAYLOAD = "empty_payload"


class ParseError(ValueError):
    """Raised when a raw turn cannot be mapped to exactly one legal action."""

    def __init__(
        self,
        code: ParseErrorCode,
        message: str,
        tag: Optional[str] = None,
        span: Optional[tuple[int, int]] = None,
    ):
        super().__init__(message)
        self.code = code
        self.tag = tag
        self.span = span

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"ParseError({self.code.value}, tag={self.tag!r}, span={self.span})"


_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_OPEN_RE = re.compile(r"<(img_search|text_search|search_crop|answer)>")


@dataclass
class _Scan:
    think: Optional[str]
    openings: list  # list of re.Match over the raw text, outside the think block


def _scan(raw: str) -> _Scan:
    m = _THINK_RE.search(raw)
    think = m.group(1) if m else None
    lo, hi = m.span() if m else (-1, -1)
    openings = [o for o in _OPEN_RE.finditer(raw) if not (lo <= o.start() < hi)]
    return _Scan(think=think, openings=openings)


def _build_action(tag: str, payload: str, span: tuple[int, int]) -> ActionVariant:
    stripped = payload.strip()
    if tag == "img_search":
        if stripped == "<img>":
            return WholeImageSearch()
        if "<img>" in payload:
            raise ParseError(
                ParseErrorCode.MALFORMED_TAG,
                "img_search payload mixes <img> with extra content",
                tag=tag,
                span=span,
            )
        if not stripped:
            raise ParseError(
                ParseErrorCode.EMPTY_PAYLOAD, "empty img_search description", tag=tag, span=span
            )
        return CroppedSearch(stripped)
    if tag == "text_search":
        if not stripped:
            raise ParseError(
                ParseErrorCode.EMPTY_PAYLOAD, "empty text_search query", tag=tag, span=span
            )
        return TextSearch(stripped)
    if tag == "search_crop":
        if not stripped:
            raise ParseError(
                ParseErrorCode.EMPTY_PAYLOAD, "empty search_crop index list", tag=tag, span=span
            )
        indices = []
        for token in stripped.split(","):
            token = token.strip()
            if not token.isdigit() or int(token) < 1:
                raise ParseError(
                    ParseErrorCode.MALFORMED_TAG,
                    f"bad crop index {token!r}",
                    tag=tag,
                    span=span,
                )
            indices.append(int(token))
        return SelectCrops(tuple(sorted(set(indices))))
    if tag == "answer":
        if not stripped:
            raise ParseError(ParseErrorCode.EMPTY_PAYLOAD, "empty answer", tag=tag, span=span)
        return Answer(stripped)
    raise AssertionError(f"unknown tag {tag}")  # pragma: no cover


def parse_action(raw: str, phase: Phase) -> ModelAction:
    """Parse a full model turn into its single structured action.

    Text outside the recognized tags is ignored here; it still counts against
    the turn in :func:`score_turn_format` via the trajectory record.
    """
    scan = _scan(raw)
    if not scan.openings:
        raise ParseError(ParseErrorCode.NO_ACTION_TAG, "no action tag found")
    if len(scan.openings) > 1:
        tags = ", ".join(o.group(1) for o in scan.openings[:3])
        raise ParseError(
            ParseErrorCode.MULTIPLE_ACTION_TAGS,
            f"multiple action tags: {tags}",
            tag=scan.openings[0].group(1),
            span=scan.openings[0].span(),
        )
    opening = scan.openings[0]
    tag = opening.group(1)
    close = raw.find(f"</{tag}>", opening.end())
    if close < 0:
        raise ParseError(
            ParseErrorCode.MALFORMED_TAG,
            f"unclosed <{tag}> tag",
            tag=tag,
            span=opening.span(),
        )
    span = (opening.start(), close + len(tag) + 3)
    action = _build_action(tag, raw[opening.end() : close], span)
    if action.kind not in PHASE_MENU[phase]:
        raise ParseError(
            ParseErrorCode.ILLEGAL_ACTION_FOR_PHASE,
            f"{action.kind.value} is not legal in phase {phase.value}",
            tag=tag,
            span=span,
        )
    return ModelAction(action=action, think=scan.think)


def render_action(model_action: ModelAction) -> str:
    """Canonical text serialization; ``parse_action`` inverts it byte-exactly."""
    parts = []
    if model_action.think is not None:
        parts.append(f"<think>{model_action.think}</think>")
    a = model_action.action
    if isinstance(a, WholeImageSearch):
        parts.append("<img_search><img></img_search>")
    elif isinstance(a, CroppedSearch):
        parts.append(f"<img_search>{a.description}</img_search>")
    elif isinstance(a, TextSearch):
        parts.append(f"<text_search>{a.query}</text_search>")
    elif isinstance(a, SelectCrops):
        parts.append(f"<search_crop>{','.join(str(i) for i in a.indices)}</search_crop>")
    elif isinstance(a, Answer):
        parts.append(f"<answer>{a.text}</answer>")
    else:  # pragma: no cover
        raise TypeError(f"unknown action {a!r}")
    return "".join(parts)


# --- observations -----------------------------------------------------------

MAX_IMAGE_RESULTS = 5


class ObservationKind(Enum):
    IMAGE_SEARCH_RESULTS = "image_search_results"
    TEXT_SEARCH_SUMMARY = "text_search_summary"
    CROP_CANDIDATES = "crop_candidates"


@dataclass(frozen=True)
class Observation:
    kind: ObservationKind
    payload: tuple
    rendered: str


def _information(body: str) -> str:
    return f"<information>\n{body}\n</information>"


def render_image_results(
    entries: Sequence[tuple[str, str]], sections: Optional[Sequence[tuple[str, Sequence[tuple[str, str]]]]] = None
) -> Observation:
    """Render ranked (thumbnail, title) pairs into an information block.

    ``sections`` overrides ``entries`` for fan-out searches (one labelled block
    per selected crop, each truncated to the per-query result cap).
    """
    if sections is None:
        sections = [("", entries)]
    lines: list[str] = []
    kept: list[tuple[str, str]] = []
    for label, sec_entries in sections:
        sec_entries = list(sec_entries)[:MAX_IMAGE_RESULTS]
        if label:
            lines.append(label)
        if not sec_entries:
            lines.append("No results found.")
        for rank, (thumb, title) in enumerate(sec_entries, start=1):
            lines.append(f"{rank}. Title: {title} | Thumbnail: {thumb}")
        kept.extend(sec_entries)
    rendered = _information("\n".join(lines))
    return Observation(
        kind=ObservationKind.IMAGE_SEARCH_RESULTS,
        payload=tuple(kept),
        rendered=rendered,
    )


def render_text_summary(summary: str) -> Observation:
    body = summary.strip() or "No results found."
    return Observation(
        kind=ObservationKind.TEXT_SEARCH_SUMMARY,
        payload=(body,),
        rendered=_information(body),
    )


def render_crop_candidates(crop_refs: Sequence[str]) -> Observation:
    if not crop_refs:
        rendered = (
            "No cropped regions could be produced for that description. "
            "You may refine the description, search the whole image, or answer."
        )
    else:
        lines = ["Cropped images based on your request:"]
        lines += [f"Crop {i}: {ref}" for i, ref in enumerate(crop_refs, start=1)]
        rendered = "\n".join(lines)
    return Observation(
        kind=ObservationKind.CROP_CANDIDATES,
        payload=tuple(crop_refs),
        rendered=rendered,
    )


def render_observation(payload, kind: ObservationKind) -> Observation:
    """Dispatch helper over the three observation kinds."""
    if kind is ObservationKind.IMAGE_SEARCH_RESULTS:
        return render_image_results(payload)
    if kind is ObservationKind.TEXT_SEARCH_SUMMARY:
        return render_text_summary(payload)
    if kind is ObservationKind.CROP_CANDIDATES:
        return render_crop_candidates(payload)
    raise ValueError(f"unknown observation kind {kind}")  # pragma: no cover


# --- format scoring ---------------------------------------------------------

FORMAT_CHECKS = (
    "think_present",
    "single_action_tag",
    "tag_well_formed",
    "action_legal_for_phase",
    "payload_valid",
)

# Which action kinds a tag can denote, for phase-legality when the payload
# itself is broken. Every menu treats the two img_search forms identically.
_TAG_KINDS = {
    "img_search": (ActionKind.WHOLE_IMAGE_SEARCH, ActionKind.CROPPED_SEARCH),
    "text_search": (ActionKind.TEXT_SEARCH,),
    "search_crop": (ActionKind.SELECT_CROPS,),
    "answer": (ActionKind.ANSWER,),
}


@dataclass(frozen=True)
class FormatReport:
    checks: tuple[tuple[str, bool], ...]

    @property
    def score(self) -> float:
        return sum(ok for _, ok in self.checks) / len(self.checks)


def score_turn_format(raw: str, phase: Phase) -> FormatReport:
    """Score structural compliance of one raw turn; never raises."""
    scan = _scan(raw)
    think_ok = scan.think is not None
    single = len(scan.openings) == 1
    well_formed = False
    legal = False
    payload_ok = False
    if single:
        opening = scan.openings[0]
        tag = opening.group(1)
        close = raw.find(f"</{tag}>", opening.end())
        if close >= 0:
            legal = any(k in PHASE_MENU[phase] for k in _TAG_KINDS[tag])
            try:
                _build_action(tag, raw[opening.end() : close], opening.span())
            except ParseError:
                pass
            else:
                well_formed = True
                payload_ok = True
            if not payload_ok:
                # An unclosed or index-garbled tag fails well-formedness too;
                # an empty payload is structurally closed but invalid content.
                try:
                    _build_action(tag, raw[opening.end() : close], opening.span())
                except ParseError as e:
                    well_formed = e.code is ParseErrorCode.EMPTY_PAYLOAD
    checks = (
        ("think_present", think_ok),
        ("single_action_tag", single),
        ("tag_well_formed", well_formed),
        ("action_legal_for_phase", legal),
        ("payload_valid", payload_ok),
    )
    return FormatReport(checks=checks)
