"""Episode state machine: phases, budgets, legal actions, prompts, termination.

Budget accounting, decided here once for the whole runtime:

* every model turn consumes one round, but an Answer is never blocked by
  round exhaustion;
* a whole-image search consumes one image-search unit;
* a crop-selection dispatch consumes one image-search unit plus one crop
  round, regardless of how many crops it fans out to (the fan-out count is
  recorded on the tool requests);
* a cropped-search (grounding) request opens the crop sequence whose
  image-search charge lands at dispatch time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Optional

from .protocol import (
    PHASE_MENU,
    ActionKind,
    Answer,
    CroppedSearch,
    ModelAction,
    Phase,
    SelectCrops,
    TextSearch,
    WholeImageSearch,
)

FALLBACK_ANSWER = "Unable to answer due to lack of relevant information"


class TerminationReason(Enum):
    ANSWERED = "answered"
    BUDGET_EXHAUSTED = "budget_exhausted"


class ConfigError(ValueError):
    pass


class TerminatedError(RuntimeError):
    pass


class IllegalTransition(RuntimeError):
    pass


class BudgetViolation(RuntimeError):
    def __init__(self, counter: str):
        super().__init__(f"budget exhausted: {counter}")
        self.counter = counter


@dataclass
class Budgets:
    image_searches_left: int = 3
    text_searches_left: int = 3
    rounds_left: int = 5
    crop_rounds_left: int = 5

    def as_dict(self) -> dict:
        return {
            "image_searches_left": self.image_searches_left,
            "text_searches_left": self.text_searches_left,
            "rounds_left": self.rounds_left,
            "crop_rounds_left": self.crop_rounds_left,
        }


@dataclass
class SessionConfig:
    image_search_limit: int = 3
    text_search_limit: int = 3
    max_rounds: int = 5
    max_crop_rounds: int = 5
    forced_answer: bool = False

    def validate(self) -> None:
        for name in ("image_search_limit", "text_search_limit", "max_rounds", "max_crop_rounds"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass
class HistoryEntry:
    prompt: str
    raw_output: str
    observations: list = field(default_factory=list)


@dataclass
class SessionState:
    question: str
    image_ref: str
    config: SessionConfig
    phase: Phase = Phase.INITIAL
    budgets: Budgets = field(default_factory=Budgets)
    history: list = field(default_factory=list)
    # None outside the after-gaze phase; may be empty there (failed gaze)
    pending_crops: Optional[list] = None
    termination_reason: Optional[TerminationReason] = None
    final_answer: Optional[str] = None


@dataclass
class ToolRequest:
    tool: str  # "image_search" | "text_search" | "ground"
    args: dict


@dataclass
class Transition:
    tool_requests: list
    next_phase: Phase
    state: SessionState


def new_session(question: str, image_ref: str, config: Optional[SessionConfig] = None) -> SessionState:
    config = config or SessionConfig()
    config.validate()
    if not question.strip():
        raise ConfigError("question must be non-empty")
    if not image_ref:
        raise ConfigError("image_ref must be non-empty")
    budgets = Budgets(
        image_searches_left=config.image_search_limit,
        text_searches_left=config.text_search_limit,
        rounds_left=config.max_rounds,
        crop_rounds_left=config.max_crop_rounds,
    )
    return SessionState(question=question, image_ref=image_ref, config=config, budgets=budgets)


def allowed_actions(state: SessionState) -> set[ActionKind]:
    """Phase menu intersected with what the remaining budgets still permit."""
    if state.phase is Phase.TERMINATED:
        raise TerminatedError("session already terminated")
    menu = PHASE_MENU[state.phase]
    b = state.budgets
    allowed = {ActionKind.ANSWER} if ActionKind.ANSWER in menu else set()
    if b.rounds_left <= 0:
        return allowed
    if ActionKind.WHOLE_IMAGE_SEARCH in menu and b.image_searches_left > 0:
        allowed.add(ActionKind.WHOLE_IMAGE_SEARCH)
    if ActionKind.CROPPED_SEARCH in menu and b.image_searches_left > 0 and b.crop_rounds_left > 0:
        allowed.add(ActionKind.CROPPED_SEARCH)
    if (
        ActionKind.SELECT_CROPS in menu
        and b.image_searches_left > 0
        and b.crop_rounds_left > 0
        and state.pending_crops
    ):
        allowed.add(ActionKind.SELECT_CROPS)
    if ActionKind.TEXT_SEARCH in menu and b.text_searches_left > 0:
        allowed.add(ActionKind.TEXT_SEARCH)
    return allowed


def apply_action(state: SessionState, model_action: ModelAction) -> Transition:
    """Apply one parsed turn: budget checks, decrements, tool requests, phase."""
    if state.phase is Phase.TERMINATED:
        raise TerminatedError("session already terminated")
    action = model_action.action
    kind = action.kind
    if kind not in PHASE_MENU[state.phase]:
        raise IllegalTransition(f"{kind.value} not in menu for phase {state.phase.value}")

    b = state.budgets
    if kind is not ActionKind.ANSWER and b.rounds_left <= 0:
        raise BudgetViolation("rounds")
    if kind is ActionKind.WHOLE_IMAGE_SEARCH and b.image_searches_left <= 0:
        raise BudgetViolation("image_searches")
    if kind is ActionKind.CROPPED_SEARCH:
        if b.image_searches_left <= 0:
            raise BudgetViolation("image_searches")
        if b.crop_rounds_left <= 0:
            raise BudgetViolation("crop_rounds")
    if kind is ActionKind.SELECT_CROPS:
        if b.image_searches_left <= 0:
            raise BudgetViolation("image_searches")
        if b.crop_rounds_left <= 0:
            raise BudgetViolation("crop_rounds")
        pending = state.pending_crops or []
        bad = [i for i in action.indices if i < 1 or i > len(pending)]
        if bad:
            raise IllegalTransition(f"crop indices out of range: {bad} (have {len(pending)})")
    if kind is ActionKind.TEXT_SEARCH and b.text_searches_left <= 0:
        raise BudgetViolation("text_searches")

    b.rounds_left = max(0, b.rounds_left - 1)
    requests: list[ToolRequest] = []
    if isinstance(action, WholeImageSearch):
        b.image_searches_left -= 1
        requests.append(ToolRequest("image_search", {"image_ref": state.image_ref}))
        next_phase = Phase.AFTER_IMAGE_SEARCH
        state.pending_crops = None
    elif isinstance(action, CroppedSearch):
        requests.append(
            ToolRequest("ground", {"image_ref": state.image_ref, "description": action.description})
        )
        next_phase = Phase.AFTER_GAZE_CROPS
        state.pending_crops = None  # filled by the executor after grounding
    elif isinstance(action, SelectCrops):
        b.image_searches_left -= 1
        b.crop_rounds_left -= 1
        pending = state.pending_crops or []
        for i in action.indices:
            requests.append(
                ToolRequest("image_search", {"image_ref": pending[i - 1], "crop_index": i})
            )
        next_phase = Phase.AFTER_IMAGE_SEARCH
        state.pending_crops = None
    elif isinstance(action, TextSearch):
        b.text_searches_left -= 1
        requests.append(ToolRequest("text_search", {"query": action.query}))
        next_phase = Phase.AFTER_TEXT_SEARCH
        state.pending_crops = None
    elif isinstance(action, Answer):
        next_phase = Phase.TERMINATED
        state.termination_reason = TerminationReason.ANSWERED
        state.final_answer = action.text
        state.pending_crops = None
    else:  # pragma: no cover
        raise IllegalTransition(f"unknown action {action!r}")

    state.phase = next_phase
    return Transition(tool_requests=requests, next_phase=next_phase, state=state)


def terminate_exhausted(state: SessionState) -> SessionState:
    """Close out an episode whose round budget ran dry. No-op once terminated."""
    if state.phase is Phase.TERMINATED:
        return state
    state.phase = Phase.TERMINATED
    state.termination_reason = TerminationReason.BUDGET_EXHAUSTED
    if state.final_answer is None:
        state.final_answer = FALLBACK_ANSWER
    state.pending_crops = None
    return state


_PHASE_TEMPLATES = {
    Phase.INITIAL: "round1.txt",
    Phase.AFTER_IMAGE_SEARCH: "after_image_search.txt",
    Phase.AFTER_GAZE_CROPS: "after_gaze.txt",
    Phase.AFTER_TEXT_SEARCH: "after_text_search.txt",
}


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("gazeloop.prompts").joinpath(name).read_text(encoding="utf-8")


def select_prompt(phase: Phase, state: SessionState) -> str:
    """Phase template with the question substituted; pure in (phase, question)."""
    if phase is Phase.TERMINATED:
        raise TerminatedError("no prompt for a terminated session")
    template = load_template(_PHASE_TEMPLATES[phase])
    return template.replace("{question}", state.question)


def forced_answer_prompt(state: SessionState) -> str:
    return load_template("forced_answer.txt").replace("{question}", state.question)
