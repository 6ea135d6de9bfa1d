"""gazeloop: a budgeted glance/gaze visual-QA agent loop with deterministic
mock tooling, rollout scoring, data construction, and trajectory analytics."""

__version__ = "0.1.0"

from .protocol import (  # noqa: F401
    ActionKind,
    Answer,
    CroppedSearch,
    ModelAction,
    ParseError,
    Phase,
    SelectCrops,
    TextSearch,
    WholeImageSearch,
    parse_action,
    render_action,
    score_turn_format,
)
from .session import Budgets, SessionConfig, SessionState, new_session  # noqa: F401
from .trajectory import Trajectory, TurnRecord  # noqa: F401
