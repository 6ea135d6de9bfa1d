"""Rollout scoring: judge-based accuracy, per-turn format aggregation, the
weighted reward combination, and group-normalized advantages."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional, Sequence

from .session import TerminationReason
from .toolkit import ChatClient

DEFAULT_LAMBDA = 0.1


class RangeError(ValueError):
    pass


class GroupTooSmall(ValueError):
    pass


class VerdictParseError(ValueError):
    pass


class Verdict(Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"


class JudgeStyle(Enum):
    BRACKET = "bracket"
    XML = "xml"


@dataclass(frozen=True)
class RewardBreakdown:
    r_acc: float  # 0 or 1
    r_fmt: float  # in [0, 1]
    lam: float
    total: float
    advantage: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "r_acc": self.r_acc,
            "r_fmt": self.r_fmt,
            "lambda": self.lam,
            "total": self.total,
            "advantage": self.advantage,
        }


@dataclass(frozen=True)
class RolloutGroup:
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]

    @property
    def group_size(self) -> int:
        return len(self.rewards)


def combine(r_acc: float, r_fmt: float, lam: float) -> float:
    """Weighted mix of accuracy and format scores."""
    if r_acc not in (0, 1):
        raise RangeError(f"r_acc must be 0 or 1, got {r_acc}")
    if not (0.0 <= r_fmt <= 1.0):
        raise RangeError(f"r_fmt must be in [0, 1], got {r_fmt}")
    if not (0.0 <= lam <= 1.0):
        raise RangeError(f"lambda must be in [0, 1], got {lam}")
    return (1.0 - lam) * r_acc + lam * r_fmt


def group_advantages(rewards: Sequence[float]) -> RolloutGroup:
    """Standardize rewards within one rollout group (population std).

    Zero-variance groups carry no policy signal and map to all-zero
    advantages.
    """
    rewards = tuple(float(r) for r in rewards)
    if len(rewards) < 2:
        raise GroupTooSmall(f"need at least 2 rewards, got {len(rewards)}")
    mu = sum(rewards) / len(rewards)
    var = sum((r - mu) ** 2 for r in rewards) / len(rewards)
    sigma = math.sqrt(var)
    # degenerate groups carry no signal; the tolerance absorbs float noise
    # from summing identical rewards
    if sigma <= 1e-9 * max(1.0, abs(mu)):
        return RolloutGroup(rewards=rewards, advantages=(0.0,) * len(rewards))
    return RolloutGroup(rewards=rewards, advantages=tuple((r - mu) / sigma for r in rewards))


_XML_JUDGE_RE = re.compile(r"<judge>\s*(True|False)\s*</judge>", re.DOTALL)


def parse_judge_verdict(text: str, style: JudgeStyle) -> Verdict:
    """Map judge output to a verdict; anything else is a typed parse error."""
    if style is JudgeStyle.BRACKET:
        stripped = text.strip()
        if stripped == "[CORRECT]":
            return Verdict.CORRECT
        if stripped == "[INCORRECT]":
            return Verdict.INCORRECT
        raise VerdictParseError(f"not a bracket verdict: {text!r:.120}")
    if style is JudgeStyle.XML:
        matches = _XML_JUDGE_RE.findall(text)
        if len(matches) != 1:
            raise VerdictParseError(f"expected exactly one judge block, found {len(matches)}")
        return Verdict.CORRECT if matches[0] == "True" else Verdict.INCORRECT
    raise VerdictParseError(f"unknown style {style}")  # pragma: no cover


def build_judge_prompt(
    question: str, ground_truths: Sequence[str], prediction: str, style: JudgeStyle
) -> str:
    name = "judge_bracket.txt" if style is JudgeStyle.BRACKET else "judge_xml.txt"
    template = resources.files("gazeloop.prompts").joinpath(name).read_text(encoding="utf-8")
    gt_str = " | ".join(ground_truths)
    return (
        template.replace("{question}", question)
        .replace("{gt_str}", gt_str)
        .replace("{ground_truth}", gt_str)
        .replace("{prediction}", prediction)
    )


def judge_answer(
    question: str,
    ground_truths: Sequence[str],
    prediction: str,
    judge_client: ChatClient,
    style: JudgeStyle = JudgeStyle.BRACKET,
) -> Verdict:
    """Ask the judge endpoint once, retrying a single time on unparseable output."""
    prompt = build_judge_prompt(question, ground_truths, prediction, style)
    messages = [{"role": "user", "content": prompt}]
    for attempt in range(2):
        reply = judge_client.complete(messages)
        try:
            return parse_judge_verdict(reply, style)
        except VerdictParseError:
            if attempt == 1:
                raise
    raise AssertionError("unreachable")  # pragma: no cover


def score_trajectory(
    trajectory,
    ground_truths: Sequence[str],
    judge_client: ChatClient,
    lam: float = DEFAULT_LAMBDA,
    style: JudgeStyle = JudgeStyle.BRACKET,
) -> RewardBreakdown:
    """Score one terminated trajectory.

    Unanswered episodes (budget exhaustion) get r_acc = 0 without a judge
    call. r_fmt is the mean of the per-turn format scores.
    """
    if trajectory.termination_reason is None:
        raise ValueError("trajectory not terminated")
    turns = trajectory.turns
    r_fmt = sum(t.format_score for t in turns) / len(turns) if turns else 0.0
    answered = (
        trajectory.termination_reason == TerminationReason.ANSWERED.value
        and trajectory.final_answer is not None
    )
    if answered:
        verdict = judge_answer(
            trajectory.question, ground_truths, trajectory.final_answer, judge_client, style
        )
        r_acc = 1.0 if verdict is Verdict.CORRECT else 0.0
    else:
        r_acc = 0.0
    total = combine(r_acc, r_fmt, lam)
    return RewardBreakdown(r_acc=r_acc, r_fmt=r_fmt, lam=lam, total=total)
