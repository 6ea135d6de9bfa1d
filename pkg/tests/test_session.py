import pytest

from gazeloop.protocol import (
    ActionKind,
    Answer,
    CroppedSearch,
    ModelAction,
    Phase,
    SelectCrops,
    TextSearch,
    WholeImageSearch,
)
from gazeloop.session import (
    FALLBACK_ANSWER,
    BudgetViolation,
    Budgets,
    ConfigError,
    IllegalTransition,
    SessionConfig,
    TerminatedError,
    TerminationReason,
    allowed_actions,
    apply_action,
    forced_answer_prompt,
    new_session,
    select_prompt,
    terminate_exhausted,
)


def _session(**kwargs):
    return new_session("What is shown?", "img:x", SessionConfig(**kwargs))


def _act(action, think="t"):
    return ModelAction(action=action, think=think)


class TestNewSession:
    def test_default_budgets(self):
        state = _session()
        assert state.budgets == Budgets(3, 3, 5, 5)
        assert state.phase is Phase.INITIAL
        assert state.pending_crops is None

    def test_empty_question_rejected(self):
        with pytest.raises(ConfigError):
            new_session("   ", "img:x")

    def test_empty_image_rejected(self):
        with pytest.raises(ConfigError):
            new_session("q", "")

    def test_nonpositive_limit_rejected(self):
        with pytest.raises(ConfigError):
            _session(max_rounds=0)
        with pytest.raises(ConfigError):
            _session(image_search_limit=-1)

    def test_custom_limits(self):
        state = _session(image_search_limit=1, max_rounds=2)
        assert state.budgets.image_searches_left == 1
        assert state.budgets.rounds_left == 2


class TestAllowedActions:
    def test_initial_menu(self):
        assert allowed_actions(_session()) == {
            ActionKind.WHOLE_IMAGE_SEARCH,
            ActionKind.CROPPED_SEARCH,
            ActionKind.TEXT_SEARCH,
            ActionKind.ANSWER,
        }

    def test_rounds_exhausted_only_answer(self):
        state = _session()
        state.budgets.rounds_left = 0
        assert allowed_actions(state) == {ActionKind.ANSWER}

    def test_text_budget_gate(self):
        state = _session()
        state.phase = Phase.AFTER_TEXT_SEARCH
        state.budgets.text_searches_left = 0
        assert allowed_actions(state) == {ActionKind.ANSWER}

    def test_image_budget_gate(self):
        state = _session()
        state.budgets.image_searches_left = 0
        assert allowed_actions(state) == {ActionKind.TEXT_SEARCH, ActionKind.ANSWER}

    def test_select_crops_requires_pending(self):
        state = _session()
        state.phase = Phase.AFTER_GAZE_CROPS
        state.pending_crops = []
        assert ActionKind.SELECT_CROPS not in allowed_actions(state)
        state.pending_crops = ["crop:a"]
        assert ActionKind.SELECT_CROPS in allowed_actions(state)

    def test_terminated_raises(self):
        state = _session()
        terminate_exhausted(state)
        with pytest.raises(TerminatedError):
            allowed_actions(state)

    def test_no_text_search_after_gaze(self):
        state = _session()
        state.phase = Phase.AFTER_GAZE_CROPS
        state.pending_crops = ["crop:a"]
        assert ActionKind.TEXT_SEARCH not in allowed_actions(state)


class TestApplyAction:
    def test_whole_image_search(self):
        state = _session()
        transition = apply_action(state, _act(WholeImageSearch()))
        assert state.phase is Phase.AFTER_IMAGE_SEARCH
        assert state.budgets.image_searches_left == 2
        assert state.budgets.rounds_left == 4
        assert [r.tool for r in transition.tool_requests] == ["image_search"]

    def test_cropped_search_defers_image_charge(self):
        state = _session()
        transition = apply_action(state, _act(CroppedSearch("the emblem")))
        assert state.phase is Phase.AFTER_GAZE_CROPS
        assert state.budgets.image_searches_left == 3
        assert state.budgets.crop_rounds_left == 5
        assert transition.tool_requests[0].tool == "ground"

    def test_select_crops_charges_once(self):
        state = _session()
        apply_action(state, _act(CroppedSearch("the emblem")))
        state.pending_crops = ["crop:a", "crop:b", "crop:c"]
        transition = apply_action(state, _act(SelectCrops((1, 3))))
        assert state.budgets.image_searches_left == 2
        assert state.budgets.crop_rounds_left == 4
        assert state.phase is Phase.AFTER_IMAGE_SEARCH
        # one request per selected crop, but a single budget unit
        assert [r.args["crop_index"] for r in transition.tool_requests] == [1, 3]

    def test_select_crops_out_of_range(self):
        state = _session()
        apply_action(state, _act(CroppedSearch("the emblem")))
        state.pending_crops = ["crop:a"]
        with pytest.raises(IllegalTransition):
            apply_action(state, _act(SelectCrops((2,))))

    def test_text_search(self):
        state = _session()
        apply_action(state, _act(TextSearch("who makes it")))
        assert state.phase is Phase.AFTER_TEXT_SEARCH
        assert state.budgets.text_searches_left == 2

    def test_answer_terminates(self):
        state = _session()
        apply_action(state, _act(Answer("Paris")))
        assert state.phase is Phase.TERMINATED
        assert state.termination_reason is TerminationReason.ANSWERED
        assert state.final_answer == "Paris"

    def test_answer_allowed_at_zero_rounds(self):
        state = _session()
        state.budgets.rounds_left = 0
        apply_action(state, _act(Answer("Paris")))
        assert state.final_answer == "Paris"

    def test_non_answer_blocked_at_zero_rounds(self):
        state = _session()
        state.budgets.rounds_left = 0
        with pytest.raises(BudgetViolation) as err:
            apply_action(state, _act(TextSearch("q")))
        assert err.value.counter == "rounds"

    def test_budget_violation_image(self):
        state = _session()
        state.budgets.image_searches_left = 0
        with pytest.raises(BudgetViolation) as err:
            apply_action(state, _act(WholeImageSearch()))
        assert err.value.counter == "image_searches"

    def test_menu_violation(self):
        state = _session()
        with pytest.raises(IllegalTransition):
            apply_action(state, _act(SelectCrops((1,))))

    def test_terminated_raises(self):
        state = _session()
        apply_action(state, _act(Answer("x")))
        with pytest.raises(TerminatedError):
            apply_action(state, _act(Answer("y")))

    def test_reference_walkthrough_budgets(self):
        # glance, gaze, dispatch, text search, answer
        state = _session()
        apply_action(state, _act(CroppedSearch("the emblem")))
        state.pending_crops = ["crop:a", "crop:b"]
        apply_action(state, _act(SelectCrops((1,))))
        apply_action(state, _act(TextSearch("manufacturer")))
        apply_action(state, _act(Answer("Stellar Motors")))
        assert state.budgets.as_dict() == {
            "image_searches_left": 2,
            "text_searches_left": 2,
            "rounds_left": 1,
            "crop_rounds_left": 4,
        }


class TestTermination:
    def test_exhausted_sets_fallback(self):
        state = _session()
        terminate_exhausted(state)
        assert state.termination_reason is TerminationReason.BUDGET_EXHAUSTED
        assert state.final_answer == FALLBACK_ANSWER

    def test_exhausted_is_idempotent_and_keeps_answer(self):
        state = _session()
        apply_action(state, _act(Answer("Paris")))
        terminate_exhausted(state)
        assert state.termination_reason is TerminationReason.ANSWERED
        assert state.final_answer == "Paris"


class TestPrompts:
    def test_substitutes_question(self):
        state = _session()
        for phase in (
            Phase.INITIAL,
            Phase.AFTER_IMAGE_SEARCH,
            Phase.AFTER_GAZE_CROPS,
            Phase.AFTER_TEXT_SEARCH,
        ):
            prompt = select_prompt(phase, state)
            assert "What is shown?" in prompt
            assert "{question}" not in prompt

    def test_pure_in_phase_and_question(self):
        a, b = _session(), _session()
        assert select_prompt(Phase.INITIAL, a) == select_prompt(Phase.INITIAL, b)

    def test_distinct_per_phase(self):
        state = _session()
        prompts = {
            select_prompt(p, state)
            for p in (
                Phase.INITIAL,
                Phase.AFTER_IMAGE_SEARCH,
                Phase.AFTER_GAZE_CROPS,
                Phase.AFTER_TEXT_SEARCH,
            )
        }
        assert len(prompts) == 4

    def test_terminated_has_no_prompt(self):
        state = _session()
        with pytest.raises(TerminatedError):
            select_prompt(Phase.TERMINATED, state)

    def test_forced_answer_prompt(self):
        state = _session()
        prompt = forced_answer_prompt(state)
        assert "What is shown?" in prompt
        assert "<answer>" in prompt
