"""Grammar model and query sampler: validity, determinism, counting,
probability learning."""

import random
from collections import Counter
from importlib import resources

import pytest

from sqlannotate.execution import execute_query
from sqlannotate.grammar import (
    Grammar,
    default_grammar,
    grammar_from_dict,
    grammar_to_dict,
    load_grammar,
    save_grammar,
    validate_grammar,
)
from sqlannotate.population import PopulationConfig, populate
from sqlannotate.sampler import (
    DepthLimitError,
    SamplerConfig,
    interpret,
    learn_probabilities,
    production_counts,
    sample_query,
    sample_structure,
)
from sqlannotate.schema import load_schema
from sqlannotate.sqlast import parse


def demo_schema():
    return load_schema(
        (resources.files("sqlannotate") / "data" / "demo_schema.json").read_text()
    )


def demo_db(count=20, seed=1):
    return populate(
        demo_schema(), PopulationConfig(record_counts={"*": count}, rng_seed=seed)
    )


def test_default_grammar_is_valid():
    assert validate_grammar(default_grammar()) == []


def test_grammar_round_trip():
    g = default_grammar()
    assert grammar_from_dict(grammar_to_dict(g)) == g
    assert load_grammar(save_grammar(g)) == g


def test_probabilities_must_sum_to_one():
    from sqlannotate.grammar import GrammarError

    doc = grammar_to_dict(default_grammar())
    doc["rules"]["SelectClause"][0]["prob"] = 0.5
    with pytest.raises(GrammarError, match="sum"):
        grammar_from_dict(doc)


def test_sampling_is_deterministic_under_a_seed():
    schema, db = demo_schema(), demo_db()
    config = SamplerConfig()
    a = [
        sample_query(default_grammar(), schema, db, config, random.Random(99)).text
        for _ in range(10)
    ]
    b = [
        sample_query(default_grammar(), schema, db, config, random.Random(99)).text
        for _ in range(10)
    ]
    assert a == b


def test_sampled_queries_parse_and_execute():
    schema, db = demo_schema(), demo_db()
    rng = random.Random(5)
    config = SamplerConfig()
    for _ in range(100):
        q = sample_query(default_grammar(), schema, db, config, rng)
        assert parse(q.text).text == q.text
        result = execute_query(db, q)
        assert len(result.rows) > 0  # require_nonempty_result defaults on


def test_structure_interpretation_matches_counts():
    g = default_grammar()
    rng = random.Random(3)
    drawn = 0
    while drawn < 200:
        # the critical-branching condition rule occasionally explodes;
        # sample_structure aborts those and callers retry, as we do here
        try:
            derivation = sample_structure(g, rng)
        except DepthLimitError:
            continue
        drawn += 1
        skeleton = interpret(derivation)
        prod_counts, opt_counts = production_counts(derivation)
        # every recorded production belongs to the grammar
        for (nt, idx), n in prod_counts.items():
            assert nt in g.rules and 0 <= idx < len(g.rules[nt])
            assert n >= 1
        # optional bookkeeping: included <= total
        for key, (included, total) in opt_counts.items():
            assert 0 <= included <= total
        assert len(skeleton.select) >= 1


def test_optional_overrides_respected():
    schema, db = demo_schema(), demo_db()
    config = SamplerConfig(
        require_nonempty_result=False,
        optional_overrides={"WHERE": 0.0, "GROUP_BY": 0.0, "ORDER_BY": 0.0},
    )
    rng = random.Random(11)
    for _ in range(30):
        q = sample_query(default_grammar(), schema, db, config, rng)
        assert "WHERE" not in q.text
        assert "GROUP BY" not in q.text
        assert "ORDER BY" not in q.text


def test_learning_recovers_skewed_probabilities():
    # a grammar heavily skewed toward DISTINCT must be learnable as such
    doc = grammar_to_dict(default_grammar())
    doc["rules"]["SelectClause"][0]["prob"] = 0.2
    doc["rules"]["SelectClause"][1]["prob"] = 0.8
    skewed = grammar_from_dict(doc)
    schema, db = demo_schema(), demo_db()
    rng = random.Random(17)
    config = SamplerConfig(require_nonempty_result=False)
    corpus = [sample_query(skewed, schema, db, config, rng) for _ in range(1500)]
    report = learn_probabilities(default_grammar(), corpus)
    assert report.learned_from == 1500
    probs = [p.prob for p in report.grammar.rules["SelectClause"]]
    assert abs(probs[0] - 0.2) < 0.04
    assert abs(probs[1] - 0.8) < 0.04


def test_learning_skips_unrepresentable_queries():
    report = learn_probabilities(
        default_grammar(),
        ["SELECT T.a FROM T WHERE T.flag = TRUE", "SELECT T.a FROM T"],
    )
    assert report.learned_from == 1
    assert len(report.skipped) == 1


def test_learned_probabilities_sum_to_one():
    report = learn_probabilities(default_grammar(), ["SELECT T.a FROM T"] * 5)
    assert validate_grammar(report.grammar) == []
