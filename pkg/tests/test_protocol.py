import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazeloop.protocol import (
    Answer,
    CroppedSearch,
    ModelAction,
    ObservationKind,
    ParseError,
    ParseErrorCode,
    Phase,
    SelectCrops,
    TextSearch,
    WholeImageSearch,
    parse_action,
    render_action,
    render_crop_candidates,
    render_image_results,
    render_observation,
    render_text_summary,
    score_turn_format,
)


class TestParseAction:
    def test_answer_with_think(self):
        action = parse_action("<think>need ID</think><answer>Paris</answer>", Phase.INITIAL)
        assert action.action == Answer("Paris")
        assert action.think == "need ID"

    def test_whole_image_search(self):
        action = parse_action("<img_search><img></img_search>", Phase.INITIAL)
        assert action.action == WholeImageSearch()

    def test_cropped_search(self):
        raw = "<img_search>the emblem on the front of the car</img_search>"
        action = parse_action(raw, Phase.INITIAL)
        assert action.action == CroppedSearch("the emblem on the front of the car")

    def test_select_crops(self):
        action = parse_action("<search_crop>1,3</search_crop>", Phase.AFTER_GAZE_CROPS)
        assert action.action == SelectCrops((1, 3))

    def test_select_crops_tolerates_spacing_and_dedups(self):
        action = parse_action("<search_crop> 3, 1 ,3 </search_crop>", Phase.AFTER_GAZE_CROPS)
        assert action.action == SelectCrops((1, 3))

    def test_multiple_action_tags(self):
        with pytest.raises(ParseError) as err:
            parse_action("<answer>A</answer><text_search>B</text_search>", Phase.INITIAL)
        assert err.value.code is ParseErrorCode.MULTIPLE_ACTION_TAGS

    def test_no_action_tag(self):
        with pytest.raises(ParseError) as err:
            parse_action("just prose, no tags", Phase.INITIAL)
        assert err.value.code is ParseErrorCode.NO_ACTION_TAG

    def test_unclosed_tag(self):
        with pytest.raises(ParseError) as err:
            parse_action("<answer>Paris", Phase.INITIAL)
        assert err.value.code is ParseErrorCode.MALFORMED_TAG
        assert err.value.tag == "answer"

    def test_empty_payload(self):
        with pytest.raises(ParseError) as err:
            parse_action("<text_search>   </text_search>", Phase.INITIAL)
        assert err.value.code is ParseErrorCode.EMPTY_PAYLOAD

    def test_bad_crop_index(self):
        with pytest.raises(ParseError) as err:
            parse_action("<search_crop>1,x</search_crop>", Phase.AFTER_GAZE_CROPS)
        assert err.value.code is ParseErrorCode.MALFORMED_TAG

    def test_zero_crop_index_rejected(self):
        with pytest.raises(ParseError):
            parse_action("<search_crop>0</search_crop>", Phase.AFTER_GAZE_CROPS)

    def test_text_search_illegal_after_gaze(self):
        with pytest.raises(ParseError) as err:
            parse_action("<text_search>q</text_search>", Phase.AFTER_GAZE_CROPS)
        assert err.value.code is ParseErrorCode.ILLEGAL_ACTION_FOR_PHASE

    def test_select_crops_illegal_initially(self):
        with pytest.raises(ParseError) as err:
            parse_action("<search_crop>1</search_crop>", Phase.INITIAL)
        assert err.value.code is ParseErrorCode.ILLEGAL_ACTION_FOR_PHASE

    def test_stray_prose_outside_tags_is_ignored(self):
        action = parse_action("Sure! <answer>Paris</answer> hope that helps", Phase.INITIAL)
        assert action.action == Answer("Paris")

    def test_action_tag_inside_think_not_counted(self):
        raw = "<think>maybe <answer>no</answer> later</think><text_search>q</text_search>"
        action = parse_action(raw, Phase.INITIAL)
        assert action.action == TextSearch("q")

    def test_error_reports_span(self):
        with pytest.raises(ParseError) as err:
            parse_action("xx<img_search>foo", Phase.INITIAL)
        assert err.value.span == (2, 14)


_PAYLOAD = st.text(
    alphabet=st.characters(blacklist_characters="<>", blacklist_categories=("Cs", "Cc")),
    min_size=1,
    max_size=40,
).map(str.strip).filter(bool)
_THINK = st.one_of(st.none(), _PAYLOAD)
_ACTIONS = st.one_of(
    st.just(WholeImageSearch()),
    _PAYLOAD.map(CroppedSearch),
    _PAYLOAD.map(TextSearch),
    st.lists(st.integers(1, 9), min_size=1, max_size=5, unique=True).map(
        lambda v: SelectCrops(tuple(sorted(v)))
    ),
    _PAYLOAD.map(Answer),
)

_PERMISSIVE_PHASE = {
    WholeImageSearch: Phase.INITIAL,
    CroppedSearch: Phase.INITIAL,
    TextSearch: Phase.INITIAL,
    SelectCrops: Phase.AFTER_GAZE_CROPS,
    Answer: Phase.INITIAL,
}


@given(action=_ACTIONS, think=_THINK)
def test_round_trip(action, think):
    model_action = ModelAction(action=action, think=think)
    rendered = render_action(model_action)
    parsed = parse_action(rendered, _PERMISSIVE_PHASE[type(action)])
    assert parsed == model_action
    assert render_action(parsed) == rendered


@settings(max_examples=300)
@given(raw=st.text(max_size=200), phase=st.sampled_from(list(Phase)))
def test_parse_never_crashes(raw, phase):
    try:
        parse_action(raw, phase)
    except ParseError:
        pass


class TestRenderObservation:
    def test_single_result(self):
        obs = render_image_results([("thumb1", "Eiffel Tower - wiki")])
        assert obs.rendered.count("<information>") == 1
        assert obs.rendered.count("</information>") == 1
        assert "1. Title: Eiffel Tower - wiki | Thumbnail: thumb1" in obs.rendered

    def test_empty_results(self):
        obs = render_image_results([])
        assert "No results found." in obs.rendered
        assert obs.rendered.count("<information>") == 1

    def test_truncates_to_five(self):
        entries = [(f"t{i}", f"title {i}") for i in range(7)]
        obs = render_image_results(entries)
        assert len(obs.payload) == 5
        assert "6." not in obs.rendered

    def test_deterministic(self):
        entries = [("a", "b"), ("c", "d")]
        assert render_image_results(entries).rendered == render_image_results(entries).rendered

    def test_dispatcher(self):
        obs = render_observation("some summary", ObservationKind.TEXT_SEARCH_SUMMARY)
        assert obs.rendered == "<information>\nsome summary\n</information>"

    def test_text_summary_empty(self):
        assert "No results found." in render_text_summary("  ").rendered

    def test_crop_candidates(self):
        obs = render_crop_candidates(["img:a#crop", "img:b#crop"])
        assert "Crop 1: img:a#crop" in obs.rendered
        assert "Crop 2: img:b#crop" in obs.rendered

    def test_crop_candidates_empty_is_failed_gaze(self):
        assert "No cropped regions" in render_crop_candidates([]).rendered


class TestScoreTurnFormat:
    def test_fully_well_formed(self):
        report = score_turn_format("<think>x</think><answer>Paris</answer>", Phase.INITIAL)
        assert report.score == 1.0

    def test_missing_think(self):
        report = score_turn_format("<answer>Paris</answer>", Phase.INITIAL)
        assert report.score == pytest.approx(0.8)
        assert dict(report.checks)["think_present"] is False

    def test_no_tags_fails_action_checks(self):
        report = score_turn_format("no tags at all", Phase.INITIAL)
        checks = dict(report.checks)
        assert not checks["single_action_tag"]
        assert not checks["tag_well_formed"]
        assert not checks["action_legal_for_phase"]
        assert not checks["payload_valid"]
        assert report.score == 0.0

    def test_illegal_phase_tag(self):
        report = score_turn_format(
            "<think>x</think><text_search>q</text_search>", Phase.AFTER_GAZE_CROPS
        )
        assert dict(report.checks)["action_legal_for_phase"] is False

    def test_empty_payload_well_formed_but_invalid(self):
        report = score_turn_format("<think>x</think><answer> </answer>", Phase.INITIAL)
        checks = dict(report.checks)
        assert checks["tag_well_formed"] is True
        assert checks["payload_valid"] is False

    @given(raw=st.text(max_size=120), phase=st.sampled_from(list(Phase)))
    def test_total_and_bounded(self, raw, phase):
        report = score_turn_format(raw, phase)
        assert 0.0 <= report.score <= 1.0
        assert len(report.checks) == 5
