"""Dataset composition metrics: feature extraction, Simpson's Diversity
Index, and Flesch Reading Ease over annotated pairs.

Syllables are counted with a frozen heuristic: contiguous vowel groups
(a, e, i, o, u, y) count one each, a trailing silent 'e' is dropped unless
it is the only vowel group, and every word counts at least one syllable.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

from .sqlast import SqlQuery, parse


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class QueryFeatures:
    clause_count: int
    table_count: int
    column_count: int
    value_count: int
    keywords: tuple[str, ...]
    structure_signature: str


def extract_features(query: SqlQuery) -> QueryFeatures:
    """Composition features of one query, stable under reserialization."""
    ast = query.ast
    keywords: list[str] = []
    clause_count = 0
    for child in ast.children:
        kind = child.kind
        if kind == "Select":
            clause_count += 1
            keywords.append("SELECT")
            if child.children and child.children[0].kind == "Distinct":
                keywords.append("DISTINCT")
        elif kind == "From":
            clause_count += 1
            keywords.append("FROM")
            for join in child.children[1:]:
                clause_count += 1
                keywords.append(join.children[0].lexeme.split()[0] + " JOIN")
        elif kind == "Where":
            clause_count += 1
            keywords.append("WHERE")
        elif kind == "GroupBy":
            clause_count += 1
            keywords.append("GROUP BY")
        elif kind == "OrderBy":
            clause_count += 1
            keywords.append("ORDER BY")
    for agg in ast.find_all("Aggregate"):
        keywords.append(agg.lexeme)
    for cond in ast.find_all("Comparison"):
        keywords.append(cond.lexeme)

    tables = {t.lexeme for t in ast.find_all("TableRef")}
    columns = {c.lexeme for c in ast.find_all("ColumnRef")}
    values = len(ast.find_all("Literal"))

    return QueryFeatures(
        clause_count=clause_count,
        table_count=len(tables),
        column_count=len(columns),
        value_count=values,
        keywords=tuple(sorted(keywords)),
        structure_signature=_signature(query),
    )


def _signature(query: SqlQuery) -> str:
    """Query text with identifiers and literals anonymized."""
    text = query.text
    text = re.sub(r"'(?:[^']|'')*'", "?", text)
    text = re.sub(r"\b\d+(?:\.\d+)?\b", "?", text)
    text = re.sub(r"\b[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_]*\b", "c", text)
    keywords = {
        "SELECT", "DISTINCT", "FROM", "WHERE", "GROUP", "ORDER", "BY", "AND",
        "OR", "ON", "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "IN", "LIKE",
        "ASC", "DESC", "COUNT", "SUM", "AVG", "MIN", "MAX", "TRUE", "FALSE",
    }
    return re.sub(
        r"\b[A-Za-z_][A-Za-z0-9_]*\b",
        lambda m: m.group(0) if m.group(0).upper() in keywords or m.group(0) == "c" else "t",
        text,
    )


def simpson_index(counts: dict) -> float:
    """D = 1 - sum(p_i^2); 0 for one category, 1 - 1/k for k uniform ones."""
    total = sum(counts.values())
    if not counts or total <= 0:
        raise AnalysisError("empty counts")
    return 1.0 - sum((c / total) ** 2 for c in counts.values())


_WORD_RE = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)?")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")


def count_syllables(word: str) -> int:
    word = word.lower()
    groups = _VOWEL_GROUP_RE.findall(word)
    n = len(groups)
    if n > 1 and word.endswith("e") and not word.endswith(("le", "ee")):
        n -= 1
    return max(1, n)


def flesch_reading_ease(text: str) -> tuple[float, float]:
    """(raw, clamped-to-[0,100]) Flesch Reading Ease of a question."""
    words = _WORD_RE.findall(text)
    if not words:
        raise AnalysisError("text contains no words")
    sentences = max(1, len(re.findall(r"[.!?]+", text)))
    syllables = sum(count_syllables(w) for w in words)
    raw = 206.835 - 1.015 * (len(words) / sentences) - 84.6 * (syllables / len(words))
    return raw, min(100.0, max(0.0, raw))


_DIMENSIONS = ("clause_count", "table_count", "column_count", "value_count")


def analyze_dataset(pairs: list) -> dict:
    """Histograms, Simpson indices, and means per dimension, plus readability.

    `pairs` is any iterable of objects (or dicts) with `sql` and `question`
    fields. Rows whose SQL does not parse are skipped and reported.
    """
    rows = list(pairs)
    if not rows:
        raise AnalysisError("empty dataset")
    histograms: dict[str, Counter] = {d: Counter() for d in _DIMENSIONS}
    keyword_hist: Counter = Counter()
    signature_hist: Counter = Counter()
    totals: dict[str, int] = {d: 0 for d in _DIMENSIONS}
    scores: list[float] = []
    skipped: list[dict] = []
    used = 0
    for i, pair in enumerate(rows):
        sql = pair["sql"] if isinstance(pair, dict) else pair.sql
        question = pair["question"] if isinstance(pair, dict) else pair.question
        try:
            features = extract_features(parse(sql))
        except ValueError as exc:
            skipped.append({"row": i, "error": str(exc)})
            continue
        used += 1
        for dim in _DIMENSIONS:
            value = getattr(features, dim)
            histograms[dim][value] += 1
            totals[dim] += value
        keyword_hist.update(features.keywords)
        signature_hist[features.structure_signature] += 1
        try:
            scores.append(flesch_reading_ease(question)[1])
        except AnalysisError:
            pass
    if used == 0:
        raise AnalysisError("no analyzable rows in dataset")
    report: dict = {}
    for dim in _DIMENSIONS:
        hist = histograms[dim]
        report[dim] = {
            "histogram": {str(k): v for k, v in sorted(hist.items())},
            "simpson": simpson_index(hist),
            "mean": totals[dim] / used,
        }
    report["keywords"] = {
        "histogram": dict(sorted(keyword_hist.items())),
        "simpson": simpson_index(keyword_hist),
    }
    report["structures"] = {
        "histogram": dict(sorted(signature_hist.items())),
        "simpson": simpson_index(signature_hist),
    }
    report["readability"] = {
        "scores": scores,
        "mean": sum(scores) / len(scores) if scores else None,
    }
    if skipped:
        report["skipped"] = skipped
    return report
