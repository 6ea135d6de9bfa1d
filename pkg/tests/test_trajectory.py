import pytest
from hypothesis import given
from hypothesis import strategies as st

from gazeloop.protocol import (
    Answer,
    CroppedSearch,
    SelectCrops,
    TextSearch,
    WholeImageSearch,
)
from gazeloop.trajectory import (
    Trajectory,
    TurnRecord,
    action_from_dict,
    action_to_dict,
    read_jsonl,
    write_jsonl,
)

_ALL_ACTIONS = [
    WholeImageSearch(),
    CroppedSearch("the emblem"),
    TextSearch("who makes it"),
    SelectCrops((1, 3)),
    Answer("Stellar Motors"),
]


class TestActionCodec:
    @pytest.mark.parametrize("action", _ALL_ACTIONS, ids=lambda a: type(a).__name__)
    def test_round_trip(self, action):
        assert action_from_dict(action_to_dict(action)) == action

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            action_from_dict({"kind": "teleport"})


def _trajectory(reward=None):
    return Trajectory(
        episode_id="ep-1",
        question="q",
        image_ref="img:x",
        turns=[
            TurnRecord(
                phase="initial",
                prompt="p1",
                raw_output="<think>t</think><text_search>q</text_search>",
                action=action_to_dict(TextSearch("q")),
                observations=["<information>\nsummary\n</information>"],
                format_score=1.0,
            ),
            TurnRecord(
                phase="after_text_search",
                prompt="p2",
                raw_output="<answer>done</answer>",
                action=action_to_dict(Answer("done")),
                format_score=0.8,
            ),
        ],
        termination_reason="answered",
        final_answer="done",
        budgets_remaining={"rounds_left": 3},
        reward=reward,
        timings={"wall_ms": 12.5},
    )


class TestTrajectory:
    def test_actions_skip_error_turns(self):
        traj = _trajectory()
        traj.turns.append(TurnRecord(phase="initial", prompt="p", raw_output="??", error="ParseError"))
        assert traj.actions() == [TextSearch("q"), Answer("done")]

    def test_dict_round_trip(self):
        traj = _trajectory(reward={"r_acc": 1.0})
        assert Trajectory.from_dict(traj.as_dict()).as_dict() == traj.as_dict()

    def test_hash_ignores_timings(self):
        a, b = _trajectory(), _trajectory()
        b.timings = {"wall_ms": 9999.0}
        assert a.content_hash() == b.content_hash()

    def test_hash_sees_content(self):
        a, b = _trajectory(), _trajectory()
        b.final_answer = "different"
        assert a.content_hash() != b.content_hash()

    @given(answer=st.text(max_size=50))
    def test_json_round_trip(self, answer):
        import json

        traj = _trajectory()
        traj.final_answer = answer
        assert Trajectory.from_dict(json.loads(traj.to_json())).to_json() == traj.to_json()


class TestJsonl:
    def test_write_read(self, tmp_path):
        path = tmp_path / "t.jsonl"
        write_jsonl(path, [_trajectory()], append=False)
        write_jsonl(path, [_trajectory()])  # append by default
        loaded = read_jsonl(path)
        assert len(loaded) == 2
        assert loaded[0].content_hash() == loaded[1].content_hash()

    def test_overwrite(self, tmp_path):
        path = tmp_path / "t.jsonl"
        write_jsonl(path, [_trajectory(), _trajectory()], append=False)
        write_jsonl(path, [_trajectory()], append=False)
        assert len(read_jsonl(path)) == 1
