"""Rule-based explanations: reference wording, span tiling, fallback and
paraphrase provider paths."""

import random
from importlib import resources

import pytest

from sqlannotate.explain import (
    ExplainError,
    explain,
    explanation_from_dict,
    fallback_explain,
    paraphrase_steps,
)
from sqlannotate.grammar import default_grammar
from sqlannotate.llm import MockRule, ScriptedMock
from sqlannotate.population import PopulationConfig, populate
from sqlannotate.sampler import SamplerConfig, sample_query
from sqlannotate.schema import load_schema
from sqlannotate.sqlast import clause, parse


def demo_schema():
    return load_schema(
        (resources.files("sqlannotate") / "data" / "demo_schema.json").read_text()
    )


REFERENCE_SQL = (
    "SELECT Employees.name FROM Employees "
    "WHERE Employees.department_id = 5 AND Employees.salary > 50000"
)


def test_reference_query_explanation_wording():
    expl = explain(parse(REFERENCE_SQL), demo_schema())
    assert [s.text for s in expl.steps] == [
        "In employees",
        "Filter employees from department 5",
        "Keep employees with salary exceeding $50,000",
        "Return the names of employees",
    ]
    assert [s.kind for s in expl.steps] == ["FROM", "WHERE_COND", "WHERE_COND", "SELECT"]
    assert expl.source == "rule_based"


def test_reference_query_sub_questions():
    expl = explain(parse(REFERENCE_SQL), demo_schema())
    assert [s.sub_question for s in expl.steps] == [
        "Which data source should we care about?",
        "Which department are employees from?",
        "What salary range do we care about?",
        "What information should be returned?",
    ]


def test_minimal_query_has_from_and_select():
    expl = explain(parse("SELECT Employees.name FROM Employees"), demo_schema())
    assert [s.kind for s in expl.steps] == ["FROM", "SELECT"]
    assert expl.steps[0].index == 1 and expl.steps[-1].index == 2


def test_spans_are_disjoint_and_cover_every_clause():
    q = parse(
        "SELECT DISTINCT Employees.name, COUNT(Employees.employee_id) FROM Employees "
        "INNER JOIN Departments ON Employees.department_id = Departments.department_id "
        "WHERE Employees.salary >= 100 OR Employees.name LIKE '%a%' "
        "GROUP BY Employees.name ORDER BY Employees.name DESC"
    )
    expl = explain(q, demo_schema())
    spans = sorted(s.sql_span for s in expl.steps)
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        assert e1 <= s2  # disjoint
    covered = set()
    for s, e in spans:
        covered.update(range(s, e))
    # every non-space character of the query is inside some step span
    missing = [i for i, ch in enumerate(q.text) if ch != " " and i not in covered]
    assert missing == []


def test_each_span_quotes_its_clause():
    q = parse(REFERENCE_SQL)
    expl = explain(q, demo_schema())
    texts = [q.text[s.sql_span[0] : s.sql_span[1]] for s in expl.steps]
    assert texts == [
        "FROM Employees",
        "WHERE Employees.department_id = 5",
        " AND Employees.salary > 50000",
        "SELECT Employees.name",
    ]


def test_step_count_formula_on_sampled_queries():
    schema = demo_schema()
    db = populate(schema, PopulationConfig(record_counts={"*": 15}, rng_seed=2))
    rng = random.Random(21)
    config = SamplerConfig(require_nonempty_result=False)
    for _ in range(100):
        q = sample_query(default_grammar(), schema, db, config, rng)
        expl = explain(q, schema)
        frm = clause(q, "From")
        joins = len(frm.children) - 1
        conds = q.text.count(" AND ") + q.text.count(" OR ") + (1 if " WHERE " in q.text else 0)
        # join ON conditions contribute their own ANDs; count WHERE atoms from steps
        where_steps = sum(1 for s in expl.steps if s.kind == "WHERE_COND")
        expected = (
            1
            + joins
            + where_steps
            + (1 if " GROUP BY " in q.text else 0)
            + (1 if " ORDER BY " in q.text else 0)
            + 1
        )
        assert len(expl.steps) == expected
        assert expl.steps[0].kind == "FROM"
        assert expl.steps[-1].kind == "SELECT"


def test_entities_reference_only_lexemes_from_the_query():
    q = parse(REFERENCE_SQL)
    expl = explain(q, demo_schema())
    lexemes = {"employees", "name", "department_id", "salary", "5", "50000", "$50,000"}
    for step in expl.steps:
        for token_class, start, end in step.entities:
            assert token_class in ("table", "column", "value")
            assert step.text[start:end].lower() in lexemes


def test_or_connected_condition_annotated():
    q = parse(
        "SELECT Employees.name FROM Employees "
        "WHERE Employees.salary > 10 OR Employees.salary < 5"
    )
    expl = explain(q, demo_schema())
    where_steps = [s for s in expl.steps if s.kind == "WHERE_COND"]
    assert not where_steps[0].text.startswith("Or alternatively")
    assert where_steps[1].text.startswith("Or alternatively, ")


def test_unresolvable_identifier_rejected():
    with pytest.raises(ExplainError):
        explain(parse("SELECT Ghost.name FROM Ghost"), demo_schema())
    with pytest.raises(ExplainError):
        explain(parse("SELECT Employees.ghost FROM Employees"), demo_schema())


def test_serialization_round_trip():
    expl = explain(parse(REFERENCE_SQL), demo_schema())
    doc = expl.to_dict()
    again = explanation_from_dict(doc)
    assert [s.text for s in again.steps] == [s.text for s in expl.steps]
    assert [s.sql_span for s in again.steps] == [s.sql_span for s in expl.steps]


# -- provider-backed paths ---------------------------------------------------

def _fallback_response(kinds):
    import json

    steps = [{"kind": k, "text": f"step {i}", "sub_question": "why?"} for i, k in enumerate(kinds)]
    return "```json\n" + json.dumps({"steps": steps}) + "\n```"


def test_fallback_uses_provider_wording_over_rule_skeleton():
    mock = ScriptedMock(
        [
            MockRule(
                "### Task: explanation_fallback",
                _fallback_response(["FROM", "WHERE_COND", "WHERE_COND", "SELECT"]),
            )
        ]
    )
    expl = fallback_explain(parse(REFERENCE_SQL), demo_schema(), mock)
    assert expl.source == "llm_fallback"
    assert len(expl.steps) == 4
    assert expl.steps[0].text == "step 0"
    # spans still come from the AST skeleton
    rule = explain(parse(REFERENCE_SQL), demo_schema())
    assert [s.sql_span for s in expl.steps] == [s.sql_span for s in rule.steps]


def test_fallback_out_of_order_response_retried_then_rejected():
    bad = _fallback_response(["SELECT", "FROM", "WHERE_COND", "WHERE_COND"])
    mock = ScriptedMock([MockRule("### Task: explanation_fallback", [bad, bad])])
    with pytest.raises(ExplainError, match="invalid explanation structure"):
        fallback_explain(parse(REFERENCE_SQL), demo_schema(), mock)
    assert len(mock.calls) == 2  # exactly one retry


def test_paraphrase_keeps_structure_and_changes_text():
    expl = explain(parse(REFERENCE_SQL), demo_schema())
    kinds = [s.kind for s in expl.steps]
    import json

    response = "```json\n" + json.dumps(
        {
            "steps": [
                {"kind": k, "text": f"reworded {i}", "sub_question": s.sub_question}
                for i, (k, s) in enumerate(zip(kinds, expl.steps))
            ]
        }
    ) + "\n```"
    mock = ScriptedMock([MockRule("### Task: explanation_fallback", response)])
    out = paraphrase_steps(expl, demo_schema(), mock)
    assert out.source == "llm_paraphrased"
    assert [s.text for s in out.steps] == [f"reworded {i}" for i in range(4)]
    assert [s.sql_span for s in out.steps] == [s.sql_span for s in expl.steps]
    assert [s.kind for s in out.steps] == kinds


def test_paraphrase_wrong_step_count_keeps_original_with_warning():
    expl = explain(parse(REFERENCE_SQL), demo_schema())
    mock = ScriptedMock(
        [MockRule("### Task: explanation_fallback", _fallback_response(["FROM", "SELECT"]))]
    )
    out = paraphrase_steps(expl, demo_schema(), mock)
    assert [s.text for s in out.steps] == [s.text for s in expl.steps]
    assert out.warnings and "paraphrase discarded" in out.warnings[0]
    assert out.source == expl.source
