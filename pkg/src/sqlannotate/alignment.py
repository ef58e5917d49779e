"""Question/step/SQL triple-linkage: alignment maps and repair operations.

Alignment between a question and an explanation is delegated to the
provider in two phases (free-form analysis, then structured mapping); the
engine trusts quoted substrings over reported offsets and computes the
unmapped sets itself, so offset drift in provider output cannot corrupt
the map.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .explain import Explanation, ExplanationStep, schema_digest
from .llm import TEMPLATES, Provider, ProviderError, extract_fenced_json, render_prompt
from .schema import Schema
from .sqlast import SqlQuery

Range = tuple[int, int]

STOPWORDS = frozenset(
    """a an the and or but of in on at to for from with by as is are was were be
    been being am do does did have has had will would shall should can could may
    might must that which who whom whose this these those it its their there
    then than not no nor so if into onto over under up down out about we us our
    you your they them he she his her him what when where how why all any each
    s t""".split()
)


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class AlignmentMap:
    step_spans: dict[int, list[Range]]
    unmapped_steps: list[int]
    unmapped_question_ranges: list[Range]

    def to_dict(self) -> dict:
        return {
            "steps": {
                str(idx): [list(r) for r in spans]
                for idx, spans in sorted(self.step_spans.items())
            },
            "missing": list(self.unmapped_steps),
            "redundant": [list(r) for r in self.unmapped_question_ranges],
        }


def alignment_from_dict(doc: dict) -> AlignmentMap:
    return AlignmentMap(
        step_spans={
            int(idx): [tuple(r) for r in spans]
            for idx, spans in doc.get("steps", {}).items()
        },
        unmapped_steps=list(doc.get("missing", [])),
        unmapped_question_ranges=[tuple(r) for r in doc.get("redundant", [])],
    )


@dataclass(frozen=True)
class MisalignmentReport:
    missing_steps: list[tuple[int, str]]
    redundant_spans: list[tuple[Range, str]]

    @property
    def clean(self) -> bool:
        return not self.missing_steps and not self.redundant_spans


# ---------------------------------------------------------------------------
# Tokenization of the question

_TOKEN_RE = re.compile(r"[A-Za-z0-9$']+")


def _content_tokens(question: str) -> list[Range]:
    """Spans of non-stopword word tokens in the question."""
    out = []
    for m in _TOKEN_RE.finditer(question):
        word = m.group(0).strip("'").lower()
        if word and word not in STOPWORDS:
            out.append((m.start(), m.end()))
    return out


def _snap_quote(question: str, quote: str, hint: int | None) -> Range | None:
    """Locate a quoted substring, preferring the occurrence nearest the hint."""
    quote = quote.strip()
    if not quote:
        return None
    positions = []
    lowered, needle = question.lower(), quote.lower()
    pos = lowered.find(needle)
    while pos >= 0:
        positions.append(pos)
        pos = lowered.find(needle, pos + 1)
    if not positions:
        return None
    if hint is None:
        best = positions[0]
    else:
        best = min(positions, key=lambda p: abs(p - hint))
    return (best, best + len(quote))


def _merge(ranges: list[Range]) -> list[Range]:
    out: list[Range] = []
    for start, end in sorted(ranges):
        if out and start <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], end))
        else:
            out.append((start, end))
    return out


def _build_map(
    question: str, steps: tuple[ExplanationStep, ...], mappings: list[dict]
) -> AlignmentMap:
    step_spans: dict[int, list[Range]] = {s.index: [] for s in steps}
    for entry in mappings:
        try:
            idx = int(entry["step"])
            quote = str(entry["quote"])
        except (KeyError, TypeError, ValueError):
            continue
        if idx not in step_spans:
            continue
        hint = entry.get("start")
        snapped = _snap_quote(question, quote, hint if isinstance(hint, int) else None)
        if snapped is not None:
            step_spans[idx].append(snapped)
    step_spans = {idx: _merge(spans) for idx, spans in step_spans.items()}

    unmapped_steps = [idx for idx, spans in sorted(step_spans.items()) if not spans]

    covered = _merge([r for spans in step_spans.values() for r in spans])
    uncovered_tokens = [
        tok
        for tok in _content_tokens(question)
        if not any(s <= tok[0] and tok[1] <= e for s, e in covered)
    ]
    # Adjacent uncovered content tokens form one maximal range even when the
    # gap between them is a stopword or punctuation.
    redundant: list[Range] = []
    for tok in uncovered_tokens:
        if redundant and _only_glue(question, redundant[-1][1], tok[0]):
            redundant[-1] = (redundant[-1][0], tok[1])
        else:
            redundant.append(tok)
    return AlignmentMap(
        step_spans=step_spans,
        unmapped_steps=unmapped_steps,
        unmapped_question_ranges=redundant,
    )


def _only_glue(question: str, start: int, end: int) -> bool:
    between = question[start:end]
    words = _TOKEN_RE.findall(between)
    return all(w.strip("'").lower() in STOPWORDS for w in words)


# ---------------------------------------------------------------------------
# Operations

def align(
    question: str,
    steps: Explanation,
    sql: SqlQuery,
    provider: Provider,
    schema: Schema | None = None,
) -> AlignmentMap:
    """Two-phase provider alignment, validated against the question text."""
    if not question.strip():
        raise AlignmentError("question is empty")
    if not steps.steps:
        raise AlignmentError("explanation has no steps")
    steps_text = "\n".join(f"{s.index}. {s.text}" for s in steps.steps)
    schema_text = schema_digest(schema) if schema is not None else ""
    analysis = provider.invoke(
        render_prompt(
            TEMPLATES["alignment_analysis"],
            {
                "schema": schema_text,
                "sql": sql.text,
                "steps": steps_text,
                "question": question,
            },
        ),
        temperature=0.0,
    )
    mapping_prompt = render_prompt(
        TEMPLATES["alignment_mapping"],
        {
            "sql": sql.text,
            "steps": steps_text,
            "question": question,
            "analysis": analysis,
        },
    )
    attempt_prompt = mapping_prompt
    for attempt in range(2):
        response = provider.invoke(attempt_prompt, temperature=0.0)
        try:
            mappings = extract_fenced_json(response)["mappings"]
            if not isinstance(mappings, list):
                raise ProviderError("mappings is not a list")
            return _build_map(question, steps.steps, mappings)
        except (ProviderError, KeyError, TypeError):
            if attempt == 0:
                attempt_prompt = (
                    mapping_prompt
                    + "\nThe previous response could not be parsed; emit only the "
                    "fenced json block.\n"
                )
            else:
                raise AlignmentError("unparseable alignment mapping") from None
    raise AssertionError("unreachable")


def detect_misalignments(
    amap: AlignmentMap, steps: Explanation, question: str
) -> MisalignmentReport:
    by_index = {s.index: s for s in steps.steps}
    missing = [(idx, by_index[idx].text) for idx in amap.unmapped_steps if idx in by_index]
    redundant = [
        ((s, e), question[s:e]) for s, e in amap.unmapped_question_ranges
    ]
    return MisalignmentReport(missing_steps=missing, redundant_spans=redundant)


def inject_step(
    question: str,
    step: ExplanationStep,
    sql: SqlQuery,
    schema: Schema,
    provider: Provider,
    steps: Explanation,
    amap: AlignmentMap,
) -> tuple[str, AlignmentMap]:
    """Ask the provider to fold a missing step into the question, then re-align."""
    if step.index not in amap.unmapped_steps:
        raise AlignmentError(f"step {step.index} is already mapped")
    revised = provider.invoke(
        render_prompt(
            TEMPLATES["inject"],
            {
                "schema": schema_digest(schema),
                "sql": sql.text,
                "question": question,
                "step": step.text,
            },
        ),
        temperature=0.0,
    ).strip()
    if not revised:
        raise AlignmentError("provider returned an empty revision")
    return revised, align(revised, steps, sql, provider, schema)


def remove_spans(question: str, ranges: list[Range]) -> str:
    """Excise ranges and tidy whitespace; refuses to empty the question."""
    if not ranges:
        return question
    ordered = sorted(ranges)
    for (s1, e1), (s2, _) in zip(ordered, ordered[1:]):
        if s2 < e1:
            raise AlignmentError(f"overlapping ranges {(s1, e1)} and {(s2, _)}")
    for s, e in ordered:
        if not (0 <= s <= e <= len(question)):
            raise AlignmentError(f"range {(s, e)} out of bounds")
    kept, cursor = [], 0
    for s, e in ordered:
        kept.append(question[cursor:s])
        cursor = e
    kept.append(question[cursor:])
    revised = re.sub(r"\s+", " ", "".join(kept)).strip()
    revised = re.sub(r"\s+([?.,!;:])", r"\1", revised)
    if not revised or not _TOKEN_RE.search(revised):
        raise AlignmentError("removal would empty the question")
    return revised


def auto_repair(
    question: str,
    steps: Explanation,
    sql: SqlQuery,
    schema: Schema,
    provider: Provider,
    max_iterations: int = 2,
) -> tuple[str, AlignmentMap]:
    """Unattended repair: inject each missing step once, then prune redundancy."""
    amap = align(question, steps, sql, provider, schema)
    by_index = {s.index: s for s in steps.steps}
    for _ in range(max_iterations):
        if not amap.unmapped_steps and not amap.unmapped_question_ranges:
            break
        for idx in list(amap.unmapped_steps):
            if idx not in amap.unmapped_steps:
                continue
            question, amap = inject_step(
                question, by_index[idx], sql, schema, provider, steps, amap
            )
        if amap.unmapped_question_ranges:
            question = remove_spans(question, amap.unmapped_question_ranges)
            amap = align(question, steps, sql, provider, schema)
    return question, amap
