import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gazeloop.analytics import (
    BehaviorClass,
    behavior_distribution,
    classify_behavior,
    emit_report,
    gaze_report,
    tool_type_counts,
)
from gazeloop.gaze import EmptyInput, GazeOutcome
from gazeloop.protocol import Answer, CroppedSearch, SelectCrops, TextSearch, WholeImageSearch
from gazeloop.trajectory import Trajectory, TurnRecord, action_to_dict


def _trajectory(eid, actions):
    turns = [
        TurnRecord(phase="initial", prompt="p", raw_output="r", action=action_to_dict(a))
        for a in actions
    ]
    return Trajectory(episode_id=eid, question="q", image_ref="img:x", turns=turns)


class TestClassification:
    def test_no_search(self):
        assert classify_behavior([Answer("x")]) is BehaviorClass.NO_SEARCH

    def test_one_search_text(self):
        assert classify_behavior([TextSearch("q"), Answer("x")]) is BehaviorClass.ONE_SEARCH

    def test_one_search_repeated_same_type(self):
        actions = [TextSearch("a"), TextSearch("b"), Answer("x")]
        assert classify_behavior(actions) is BehaviorClass.ONE_SEARCH

    def test_crop_family_is_one_type(self):
        actions = [CroppedSearch("d"), SelectCrops((1,)), Answer("x")]
        assert classify_behavior(actions) is BehaviorClass.ONE_SEARCH

    def test_mix_search(self):
        actions = [CroppedSearch("d"), SelectCrops((1,)), TextSearch("q"), Answer("x")]
        assert classify_behavior(actions) is BehaviorClass.MIX_SEARCH

    def test_whole_image_is_distinct_from_crop(self):
        actions = [WholeImageSearch(), CroppedSearch("d"), Answer("x")]
        assert classify_behavior(actions) is BehaviorClass.MIX_SEARCH

    def test_accepts_trajectory(self):
        traj = _trajectory("e", [WholeImageSearch(), Answer("x")])
        assert classify_behavior(traj) is BehaviorClass.ONE_SEARCH

    def test_tool_type_counts(self):
        counts = tool_type_counts(
            [WholeImageSearch(), CroppedSearch("d"), SelectCrops((1,)), TextSearch("q"), Answer("x")]
        )
        assert counts == {"image": 1, "crop": 2, "text": 1}


class TestBehaviorDistribution:
    def test_counts_and_ratios(self):
        trajs = [
            _trajectory("a", [Answer("x")]),
            _trajectory("b", [TextSearch("q"), Answer("x")]),
            _trajectory("c", [WholeImageSearch(), TextSearch("q"), Answer("x")]),
            _trajectory("d", [WholeImageSearch(), TextSearch("q"), Answer("x")]),
        ]
        report = behavior_distribution(trajs)
        assert report.counts == {"no_search": 1, "one_search": 1, "mix_search": 2}
        assert report.ratios["mix_search"] == 0.5
        assert report.ids_per_class["no_search"] == ["a"]
        assert report.tool_counts == {"text": 3, "image": 2}

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            behavior_distribution([])

    @given(split=st.lists(st.sampled_from(list(BehaviorClass)), min_size=1, max_size=30))
    def test_counts_sum_to_total(self, split):
        proto = {
            BehaviorClass.NO_SEARCH: [Answer("x")],
            BehaviorClass.ONE_SEARCH: [TextSearch("q"), Answer("x")],
            BehaviorClass.MIX_SEARCH: [WholeImageSearch(), TextSearch("q"), Answer("x")],
        }
        trajs = [_trajectory(f"e{i}", proto[cls]) for i, cls in enumerate(split)]
        report = behavior_distribution(trajs)
        assert sum(report.counts.values()) == report.total == len(split)
        assert sum(report.ratios.values()) == pytest.approx(1.0)


def _outcome(relevant, reflected=False):
    return GazeOutcome(turn_index=0, selected_indices=(1,), reflected=reflected, relevant=relevant)


class TestGazeReport:
    def test_mixed(self):
        outcomes = [_outcome(True)] * 3 + [_outcome(False, True), _outcome(False, False)]
        report = gaze_report(outcomes)
        assert report.correctness == 0.6
        assert report.errors == 2
        assert report.reflection_on_error == 0.5

    def test_all_correct_reflection_absent(self):
        report = gaze_report([_outcome(True), _outcome(True)])
        assert report.reflection_on_error is None
        assert ["reflection_rate_on_errors", "absent"] in report.to_rows()

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            gaze_report([])

    def test_unlabeled_rejected(self):
        with pytest.raises(ValueError):
            gaze_report([_outcome(None)])


class TestEmitReport:
    def test_writes_stable_bytes(self, tmp_path):
        trajs = [_trajectory("a", [Answer("x")]), _trajectory("b", [TextSearch("q"), Answer("y")])]
        report = behavior_distribution(trajs)
        doc1 = emit_report(report, tmp_path / "one" / "behavior")
        bytes1 = (tmp_path / "one" / "behavior.json").read_bytes()
        csv1 = (tmp_path / "one" / "behavior.csv").read_bytes()
        doc2 = emit_report(report, tmp_path / "two" / "behavior")
        assert doc1 == doc2
        assert (tmp_path / "two" / "behavior.json").read_bytes() == bytes1
        assert (tmp_path / "two" / "behavior.csv").read_bytes() == csv1
        assert json.loads(doc1)["kind"] == "behavior_distribution"

    def test_gaze_doc_shape(self, tmp_path):
        report = gaze_report([_outcome(True), _outcome(False, True)])
        doc = json.loads(emit_report(report, tmp_path / "gaze"))
        assert doc["kind"] == "gaze_metrics"
        assert doc["reflection_on_error"] == 1.0
