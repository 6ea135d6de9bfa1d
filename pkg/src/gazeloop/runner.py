"""Episode execution: drive the state machine against a tool suite and a
model endpoint, then batch/rollout orchestration over manifests."""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import protocol, session
from .analytics import BehaviorReport, behavior_distribution
from .config import RunConfig
from .gaze import CropCandidateSet, dedup_boxes
from .mock.corpus import MockCorpus
from .mock.tools import MockChatClient, MockToolSuite
from .protocol import ParseError, Phase
from .reward import JudgeStyle, score_trajectory
from .session import (
    BudgetViolation,
    IllegalTransition,
    SessionState,
    TerminationReason,
    ToolRequest,
)
from .toolkit import ChatClient, OutOfBounds, RetryPolicy, ToolFailure, ToolSuite
from .trajectory import Trajectory, TurnRecord, action_to_dict

INVALID_TURN_NOTICE = (
    "Your previous response could not be executed ({reason}). "
    "Choose exactly one valid action for this stage."
)


class EpisodeRunner:
    """Runs one episode at a time; owns no shared mutable state between runs."""

    def __init__(self, suite: ToolSuite, model: ChatClient, config: Optional[RunConfig] = None):
        self.suite = suite
        self.model = model
        self.config = config or RunConfig()

    # --- tool execution -----------------------------------------------------

    def _run_ground(self, state: SessionState, request: ToolRequest):
        try:
            boxes = self.suite.ground(request.args["image_ref"], request.args["description"])
        except ToolFailure:
            boxes = []
        candidates = dedup_boxes(
            boxes, self.config.iou_threshold, source_description=request.args["description"]
        )
        survivors, refs = [], []
        for cand in candidates.candidates:
            try:
                refs.append(self.suite.crop(request.args["image_ref"], cand.box.bbox))
                survivors.append(cand.box)
            except (ToolFailure, OutOfBounds):
                continue
        candidates = dedup_boxes(
            survivors, self.config.iou_threshold, source_description=candidates.source_description
        ).with_image_refs(refs)
        state.pending_crops = list(refs)
        return candidates, protocol.render_crop_candidates(refs)

    def _run_image_searches(self, requests: Sequence[ToolRequest]):
        def one(request: ToolRequest):
            try:
                return self.suite.image_search(request.args["image_ref"])
            except ToolFailure:
                return []

        with ThreadPoolExecutor(max_workers=max(1, self.config.tool_parallelism)) as pool:
            result_lists = list(pool.map(one, requests))
        if len(requests) == 1 and "crop_index" not in requests[0].args:
            entries = [(r.thumbnail_ref, r.title) for r in result_lists[0]]
            return protocol.render_image_results(entries)
        sections = []
        for request, results in zip(requests, result_lists):
            label = f"Results for crop {request.args.get('crop_index', '?')}:"
            sections.append((label, [(r.thumbnail_ref, r.title) for r in results]))
        return protocol.render_image_results([], sections=sections)

    def _run_text_search(self, request: ToolRequest):
        try:
            summary = self.suite.text_search(request.args["query"])
        except ToolFailure as failure:
            summary = f"Search tool failed ({failure.cause.value}); no information retrieved."
        return protocol.render_text_summary(summary)

    # --- episode loop --------------------------------------------------------

    def run_episode(self, question: str, image_ref: str, episode_id: Optional[str] = None) -> Trajectory:
        config = self.config
        state = session.new_session(question, image_ref, config.session_config())
        episode_id = episode_id or f"ep-{hashlib.sha256(question.encode()).hexdigest()[:12]}"
        started = time.perf_counter()
        messages: list[dict] = []
        turns: list[TurnRecord] = []
        pending_obs: Optional[str] = None

        while state.phase is not Phase.TERMINATED:
            if state.budgets.rounds_left <= 0:
                break
            prompt_core = session.select_prompt(state.phase, state)
            user_content = f"{pending_obs}\n\n{prompt_core}" if pending_obs else prompt_core
            messages.append({"role": "user", "content": user_content})
            raw = self.model.complete(messages)
            messages.append({"role": "assistant", "content": raw})
            phase_before = state.phase
            fmt = protocol.score_turn_format(raw, phase_before)
            turn = TurnRecord(
                phase=phase_before.value,
                prompt=user_content,
                raw_output=raw,
                format_score=fmt.score,
            )
            turns.append(turn)
            try:
                model_action = protocol.parse_action(raw, phase_before)
                transition = session.apply_action(state, model_action)
            except (ParseError, BudgetViolation, IllegalTransition) as exc:
                # invalid turns still consume a round; the episode goes on
                state.budgets.rounds_left = max(0, state.budgets.rounds_left - 1)
                turn.error = f"{type(exc).__name__}: {exc}"
                pending_obs = INVALID_TURN_NOTICE.format(reason=exc)
                continue
            turn.action = action_to_dict(model_action.action)
            observation = None
            image_requests = [r for r in transition.tool_requests if r.tool == "image_search"]
            for request in transition.tool_requests:
                if request.tool == "ground":
                    _, observation = self._run_ground(state, request)
                elif request.tool == "text_search":
                    observation = self._run_text_search(request)
            if image_requests:
                observation = self._run_image_searches(image_requests)
            if observation is not None:
                turn.observations.append(observation.rendered)
                pending_obs = observation.rendered
            else:
                pending_obs = None

        if state.phase is not Phase.TERMINATED:
            if config.forced_answer:
                self._force_answer(state, messages, turns, pending_obs)
            if state.phase is not Phase.TERMINATED:
                session.terminate_exhausted(state)

        return Trajectory(
            episode_id=episode_id,
            question=question,
            image_ref=image_ref,
            turns=turns,
            termination_reason=state.termination_reason.value if state.termination_reason else None,
            final_answer=state.final_answer,
            budgets_remaining=state.budgets.as_dict(),
            timings={"wall_ms": round((time.perf_counter() - started) * 1000.0, 3)},
        )

    def _force_answer(self, state, messages, turns, pending_obs) -> None:
        prompt_core = session.forced_answer_prompt(state)
        user_content = f"{pending_obs}\n\n{prompt_core}" if pending_obs else prompt_core
        messages.append({"role": "user", "content": user_content})
        raw = self.model.complete(messages)
        messages.append({"role": "assistant", "content": raw})
        fmt = protocol.score_turn_format(raw, state.phase)
        turn = TurnRecord(
            phase=state.phase.value, prompt=user_content, raw_output=raw, format_score=fmt.score
        )
        turns.append(turn)
        try:
            model_action = protocol.parse_action(raw, state.phase)
        except ParseError as exc:
            turn.error = f"{type(exc).__name__}: {exc}"
            return
        if model_action.action.kind is not protocol.ActionKind.ANSWER:
            turn.error = "forced-answer turn must answer"
            return
        turn.action = action_to_dict(model_action.action)
        session.apply_action(state, model_action)


# --- batch orchestration -----------------------------------------------------


def episode_seed(base_seed: int, episode_id: str) -> int:
    digest = hashlib.sha256(f"{base_seed}:{episode_id}".encode("utf-8")).hexdigest()
    return int(digest[:12], 16)


@dataclass
class BatchResult:
    trajectories: list
    behavior: Optional[BehaviorReport]
    accuracy: Optional[float]
    failures: list = field(default_factory=list)  # (episode_id, error string)
    groups: dict = field(default_factory=dict)  # record id -> RolloutGroup


def _mock_factories(config: RunConfig, corpus: MockCorpus):
    retry = RetryPolicy(
        attempts=config.retry_attempts, backoff=config.retry_backoff, sleep=lambda _: None
    )

    def make_suite(seed: int) -> MockToolSuite:
        return MockToolSuite(
            corpus,
            seed=seed,
            fault_rate=config.fault_rate,
            parallelism=config.tool_parallelism,
            retry_policy=retry,
        )

    chat = MockChatClient(corpus)
    return make_suite, chat, chat


def run_batch(
    config: RunConfig,
    records: Sequence,
    corpus: Optional[MockCorpus] = None,
    rollout_group: Optional[int] = None,
    suite_factory=None,
    model: Optional[ChatClient] = None,
    judge: Optional[ChatClient] = None,
    judge_style: JudgeStyle = JudgeStyle.BRACKET,
) -> BatchResult:
    """Run every record (optionally G rollouts each) with bounded concurrency.

    Per-episode failures are isolated into ``failures``; the batch completes.
    """
    from .reward import group_advantages

    if suite_factory is None or model is None or judge is None:
        if not config.mock:
            raise ValueError("live mode requires explicit suite_factory/model/judge wiring")
        mock_suite_factory, mock_model, mock_judge = _mock_factories(
            config, corpus if corpus is not None else MockCorpus()
        )
        suite_factory = suite_factory or mock_suite_factory
        model = model or mock_model
        judge = judge or mock_judge

    jobs = [
        (record, k, f"{record.id}#r{k}" if rollout_group else record.id)
        for record in records
        for k in range(rollout_group or 1)
    ]

    def run_one(job):
        record, _, eid = job
        suite = suite_factory(episode_seed(config.seed, eid))
        runner = EpisodeRunner(suite, model, config)
        trajectory = runner.run_episode(record.question, record.image_ref, episode_id=eid)
        breakdown = score_trajectory(
            trajectory, record.ground_truth, judge, lam=config.lambda_fmt, style=judge_style
        )
        trajectory.reward = breakdown.as_dict()
        return trajectory

    trajectories, failures = [], []
    with ThreadPoolExecutor(max_workers=max(1, config.batch_parallelism)) as pool:
        futures = [(job, pool.submit(run_one, job)) for job in jobs]
        for job, future in futures:
            try:
                trajectories.append(future.result())
            except Exception as exc:  # isolate per-episode failures
                failures.append((job[2], f"{type(exc).__name__}: {exc}"))

    groups = {}
    if rollout_group:
        by_record: dict = {}
        for trajectory in trajectories:
            rid = trajectory.episode_id.rsplit("#r", 1)[0]
            by_record.setdefault(rid, []).append(trajectory)
        for rid, group_trajs in by_record.items():
            if len(group_trajs) < 2:
                continue
            group = group_advantages([t.reward["total"] for t in group_trajs])
            groups[rid] = group
            for trajectory, advantage in zip(group_trajs, group.advantages):
                trajectory.reward["advantage"] = advantage

    behavior = behavior_distribution(trajectories) if trajectories else None
    scored = [t.reward["r_acc"] for t in trajectories if t.reward]
    accuracy = sum(scored) / len(scored) if scored else None
    return BatchResult(
        trajectories=trajectories,
        behavior=behavior,
        accuracy=accuracy,
        failures=failures,
        groups=groups,
    )
