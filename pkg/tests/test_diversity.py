"""Feature extraction, Simpson's index, and readability metrics."""

import math
import random
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlannotate.diversity import (
    AnalysisError,
    analyze_dataset,
    count_syllables,
    extract_features,
    flesch_reading_ease,
    simpson_index,
)
from sqlannotate.grammar import default_grammar
from sqlannotate.population import PopulationConfig, populate
from sqlannotate.sampler import SamplerConfig, sample_query
from sqlannotate.schema import load_schema
from sqlannotate.sqlast import parse


def test_reference_query_feature_counts():
    features = extract_features(
        parse(
            "SELECT Employees.name FROM Employees "
            "WHERE Employees.department_id = 5 AND Employees.salary > 50000"
        )
    )
    assert features.clause_count == 3
    assert features.table_count == 1
    assert features.column_count == 3
    assert features.value_count == 2


def test_minimal_query_features():
    features = extract_features(parse("SELECT T.a FROM T"))
    assert (features.clause_count, features.table_count) == (2, 1)
    assert (features.column_count, features.value_count) == (1, 0)


def test_join_and_order_by_each_add_a_clause():
    base = extract_features(parse("SELECT T.a FROM T"))
    joined = extract_features(
        parse("SELECT T.a FROM T INNER JOIN U ON T.i = U.i ORDER BY T.a")
    )
    assert joined.clause_count == base.clause_count + 2


def test_structure_signature_anonymizes_identifiers_and_literals():
    a = extract_features(parse("SELECT T.a FROM T WHERE T.b = 1"))
    b = extract_features(parse("SELECT Users.x FROM Users WHERE Users.y = 999"))
    c = extract_features(parse("SELECT T.a FROM T WHERE T.b > 1"))
    assert a.structure_signature == b.structure_signature
    assert a.structure_signature != c.structure_signature


def test_features_stable_under_reserialization():
    schema = load_schema(
        (resources.files("sqlannotate") / "data" / "demo_schema.json").read_text()
    )
    db = populate(schema, PopulationConfig(record_counts={"*": 10}, rng_seed=1))
    rng = random.Random(8)
    config = SamplerConfig(require_nonempty_result=False)
    for _ in range(50):
        q = sample_query(default_grammar(), schema, db, config, rng)
        assert extract_features(parse(q.text)) == extract_features(q)


# -- Simpson ------------------------------------------------------------------

def test_simpson_single_category_is_zero():
    assert simpson_index({"a": 5}) == 0.0


def test_simpson_uniform_categories():
    assert abs(simpson_index({"a": 1, "b": 1, "c": 1, "d": 1}) - 0.75) < 1e-12
    assert abs(simpson_index({"a": 2, "b": 2}) - 0.5) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=1, max_value=12))
def test_simpson_uniform_k_formula(k):
    counts = {i: 3 for i in range(k)}
    assert abs(simpson_index(counts) - (1 - 1 / k)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=50), min_size=1, max_size=10))
def test_simpson_invariant_under_relabeling_and_permutation(counts):
    a = simpson_index({f"x{i}": c for i, c in enumerate(counts)})
    shuffled = list(counts)
    random.Random(0).shuffle(shuffled)
    b = simpson_index({f"y{i}": c for i, c in enumerate(shuffled)})
    assert abs(a - b) < 1e-12
    assert 0.0 <= a < 1.0


def test_simpson_empty_counts_rejected():
    with pytest.raises(AnalysisError):
        simpson_index({})


# -- readability ----------------------------------------------------------------

def test_syllable_heuristic_golden_words():
    assert count_syllables("cat") == 1
    assert count_syllables("table") == 2  # -le ending keeps its syllable
    assert count_syllables("university") == 5
    assert count_syllables("like") == 1  # silent e
    assert count_syllables("the") == 1  # minimum one
    assert count_syllables("employee") == 2  # "oyee" is a single vowel group


def test_flesch_golden_sentences():
    # hand-computed under the documented syllable heuristic
    cases = [
        ("The cat sat.", 3, 1, 3),
        ("university.", 1, 1, 5),
        ("Who are the employees?", 4, 1, 5),
        ("Simple words read well.", 4, 1, 5),
        ("Which departments have a budget over one million dollars?", 9, 1, 15),
    ]
    for text, words, sentences, syllables in cases:
        expected = 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words)
        raw, clamped = flesch_reading_ease(text)
        assert abs(raw - expected) < 1e-9, text
        assert clamped == min(100.0, max(0.0, raw))


def test_flesch_clamps_but_keeps_raw():
    raw, clamped = flesch_reading_ease("The cat sat.")
    assert raw > 100 and clamped == 100.0


def test_flesch_requires_words():
    with pytest.raises(AnalysisError):
        flesch_reading_ease("?!")


def test_flesch_deterministic():
    assert flesch_reading_ease("Same text.") == flesch_reading_ease("Same text.")


# -- dataset analysis ------------------------------------------------------------

def _pair(sql, question="What?"):
    return {"sql": sql, "question": question}


def test_identical_queries_have_zero_diversity():
    report = analyze_dataset([_pair("SELECT T.a FROM T")] * 4)
    for dim in ("clause_count", "table_count", "column_count", "value_count"):
        assert report[dim]["simpson"] == 0.0


def test_clause_histogram_simpson_and_mean():
    rows = [
        _pair("SELECT T.a FROM T"),  # 2 clauses
        _pair("SELECT T.b FROM T"),  # 2 clauses
        _pair("SELECT T.a FROM T WHERE T.b = 1"),  # 3 clauses
        _pair("SELECT T.a FROM T ORDER BY T.a"),  # 3 clauses
    ]
    report = analyze_dataset(rows)
    assert report["clause_count"]["histogram"] == {"2": 2, "3": 2}
    assert abs(report["clause_count"]["simpson"] - 0.5) < 1e-12
    assert report["clause_count"]["mean"] == 2.5


def test_mean_equals_arithmetic_mean_exactly():
    rows = [
        _pair("SELECT T.a FROM T WHERE T.b = 1 AND T.c = 2"),
        _pair("SELECT T.a FROM T"),
    ]
    report = analyze_dataset(rows)
    assert report["value_count"]["mean"] == 1.0  # (2 + 0) / 2


def test_unparseable_rows_skipped_and_reported():
    rows = [_pair("SELECT T.a FROM T"), _pair("NOT SQL AT ALL")]
    report = analyze_dataset(rows)
    assert report["skipped"] == [{"row": 1, "error": report["skipped"][0]["error"]}]
    assert report["clause_count"]["histogram"] == {"2": 1}


def test_empty_dataset_is_an_error():
    with pytest.raises(AnalysisError, match="empty dataset"):
        analyze_dataset([])


def test_readability_block_present():
    report = analyze_dataset(
        [_pair("SELECT T.a FROM T", "Who are the employees?")]
    )
    assert len(report["readability"]["scores"]) == 1
    assert report["readability"]["mean"] == report["readability"]["scores"][0]
