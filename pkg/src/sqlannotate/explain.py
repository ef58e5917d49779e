"""Step-by-step natural-language explanations of queries in the subset.

Every query decomposes into ordered steps — FROM, each JOIN, each atomic
WHERE condition, GROUP BY, ORDER BY, SELECT — where each step owns a
contiguous span of the canonical SQL text and carries a sub-question.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .llm import TEMPLATES, Provider, ProviderError, extract_fenced_json, render_prompt
from .schema import Schema
from .sqlast import (
    AstNode,
    SqlQuery,
    atomic_conditions,
    clause,
    literal_value,
    serialize_with_spans,
)

STEP_KINDS = ("FROM", "JOIN", "WHERE_COND", "GROUP_BY", "ORDER_BY", "SELECT")

MONEY_WORDS = ("salary", "budget", "price", "cost", "amount", "revenue", "wage")


class ExplainError(ValueError):
    pass


@dataclass(frozen=True)
class ExplanationStep:
    index: int
    kind: str
    text: str
    sub_question: str
    sql_span: tuple[int, int]
    ast_path: tuple[int, ...]
    entities: tuple[tuple[str, int, int], ...] = ()


@dataclass(frozen=True)
class Explanation:
    steps: tuple[ExplanationStep, ...]
    source: str  # rule_based | llm_fallback | llm_paraphrased
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "steps": [
                {
                    "index": s.index,
                    "kind": s.kind,
                    "text": s.text,
                    "sub_question": s.sub_question,
                    "sql_span": list(s.sql_span),
                    "entities": [list(e) for e in s.entities],
                }
                for s in self.steps
            ],
        }


def explanation_from_dict(doc: dict) -> Explanation:
    steps = tuple(
        ExplanationStep(
            index=raw["index"],
            kind=raw["kind"],
            text=raw["text"],
            sub_question=raw["sub_question"],
            sql_span=tuple(raw["sql_span"]),
            ast_path=tuple(raw.get("ast_path", ())),
            entities=tuple(tuple(e) for e in raw.get("entities", ())),
        )
        for raw in doc["steps"]
    )
    return Explanation(steps=steps, source=doc.get("source", "rule_based"))


# ---------------------------------------------------------------------------
# Phrasing helpers

def _plural(word: str) -> str:
    if re.search(r"(s|x|z|ch|sh)$", word):
        return word + "es"
    if re.search(r"[^aeiou]y$", word):
        return word[:-1] + "ies"
    return word + "s"


def _split_ref(lexeme: str) -> tuple[str, str]:
    table, _, column = lexeme.partition(".")
    return table, column


def _is_money(column: str) -> bool:
    return any(w in column.lower() for w in MONEY_WORDS)


def _format_value(column: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)) and _is_money(column):
        if isinstance(value, float) and not value.is_integer():
            return f"${value:,.2f}"
        return f"${int(value):,}"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _operand_text(column: str, operand: AstNode) -> str:
    if operand.kind == "ColumnRef":
        return operand.lexeme
    return _format_value(column, literal_value(operand))


_REL_WORDS = {
    "=": "equals",
    "<>": "differs from",
    ">": "exceeds",
    "<": "is below",
    ">=": "is at least",
    "<=": "is at most",
    "LIKE": "matches",
}


def _condition_text(table_lc: str, cond: AstNode) -> str:
    lhs_table, column = _split_ref(cond.children[0].lexeme)
    op = cond.lexeme
    if op == "IN":
        values = ", ".join(_operand_text(column, v) for v in cond.children[1:])
        return f"Keep {table_lc} whose {column} is one of {values}"
    rhs = cond.children[1]
    if rhs.kind == "ColumnRef":
        return f"Keep {table_lc} whose {column} {_REL_WORDS[op]} {rhs.lexeme}"
    shown = _operand_text(column, rhs)
    if op == "=":
        if column.endswith("_id"):
            return f"Filter {table_lc} from {column[:-3]} {shown}"
        return f"Filter {table_lc} whose {column} is {shown}"
    if op == "<>":
        return f"Filter {table_lc} whose {column} is not {shown}"
    if op == ">":
        return f"Keep {table_lc} with {column} exceeding {shown}"
    if op == "<":
        return f"Keep {table_lc} with {column} below {shown}"
    if op == ">=":
        return f"Keep {table_lc} with {column} of at least {shown}"
    if op == "<=":
        return f"Keep {table_lc} with {column} of at most {shown}"
    if op == "LIKE":
        return f"Keep {table_lc} whose {column} matches '{literal_value(rhs)}'"
    raise ExplainError(f"no template for operator {op!r}")


def _condition_sub_question(table_lc: str, cond: AstNode) -> str:
    _, column = _split_ref(cond.children[0].lexeme)
    op = cond.lexeme
    if op == "=" and column.endswith("_id") and cond.children[1].kind == "Literal":
        return f"Which {column[:-3]} are {table_lc} from?"
    if op in ("<", ">", "<=", ">="):
        return f"What {column} range do we care about?"
    return f"Which {column} do we care about?"


def _select_item_phrase(item: AstNode) -> str:
    if item.kind == "Aggregate":
        _, column = _split_ref(item.children[0].lexeme)
        func = item.lexeme
        if func == "COUNT":
            return f"number of {_plural(column)}"
        if func == "SUM":
            return f"total {column}"
        if func == "AVG":
            return f"average {column}"
        if func == "MIN":
            return f"lowest {column}"
        return f"highest {column}"
    _, column = _split_ref(item.lexeme)
    return _plural(column)


def _join_phrases(items: list[str]) -> str:
    if len(items) <= 1:
        return items[0] if items else ""
    return ", ".join(items[:-1]) + " and " + items[-1]


def _select_text(select: AstNode) -> str:
    items = [c for c in select.children if c.kind != "Distinct"]
    distinct = any(c.kind == "Distinct" for c in select.children)
    phrases = _join_phrases([_select_item_phrase(i) for i in items])
    tables: list[str] = []
    for item in items:
        ref = item.children[0] if item.kind == "Aggregate" else item
        table = _split_ref(ref.lexeme)[0].lower()
        if table not in tables:
            tables.append(table)
    prefix = "Return the distinct" if distinct else "Return the"
    return f"{prefix} {phrases} of {_join_phrases(tables)}"


def _join_text(join: AstNode) -> str:
    _, table, on = join.children
    pairs = _join_phrases(
        [f"{c.children[0].lexeme} matches {c.children[1].lexeme}" for c in on.children]
    )
    return f"Combine with {table.lexeme.lower()} where {pairs}"


def _order_by_text(order_by: AstNode) -> str:
    items = list(order_by.children)
    direction = ""
    if items and items[-1].kind == "SortDir":
        sort_dir = items.pop()
        direction = (
            " in ascending order" if sort_dir.lexeme == "ASC" else " in descending order"
        )
    cols = _join_phrases([_split_ref(i.lexeme)[1] for i in items])
    return f"Sort results by {cols}{direction}"


SUB_QUESTIONS = {
    "FROM": "Which data source should we care about?",
    "JOIN": "Which tables should be combined?",
    "GROUP_BY": "How should the rows be grouped?",
    "ORDER_BY": "How should the results be sorted?",
    "SELECT": "What information should be returned?",
}


# ---------------------------------------------------------------------------
# Structural decomposition

def _path_to(root: AstNode, target: AstNode) -> tuple[int, ...]:
    if root is target:
        return ()
    for i, child in enumerate(root.children):
        try:
            return (i,) + _path_to(child, target)
        except ExplainError:
            continue
    raise ExplainError("node is not in this tree")


@dataclass(frozen=True)
class _Slot:
    kind: str
    node: AstNode
    sql_span: tuple[int, int]


def _decompose(query: SqlQuery) -> list[_Slot]:
    """Clause/condition slots in canonical step order with tiling spans."""
    text, spans = serialize_with_spans(query.ast)
    if text != query.text:
        raise ExplainError("query text is not canonical")
    slots: list[_Slot] = []

    frm = clause(query, "From")
    base = frm.children[0]
    slots.append(_Slot("FROM", frm, (spans[id(frm)][0], spans[id(base)][1])))
    prev_end = spans[id(base)][1]
    for join in frm.children[1:]:
        end = spans[id(join)][1]
        slots.append(_Slot("JOIN", join, (prev_end, end)))
        prev_end = end

    where = clause(query, "Where")
    if where is not None:
        atoms = atomic_conditions(where.children[0])
        prev_end = spans[id(where)][0]
        for atom in atoms:
            end = spans[id(atom)][1]
            slots.append(_Slot("WHERE_COND", atom, (prev_end, end)))
            prev_end = end

    for kind, name in (("GROUP_BY", "GroupBy"), ("ORDER_BY", "OrderBy")):
        node = clause(query, name)
        if node is not None:
            slots.append(_Slot(kind, node, spans[id(node)]))

    select = clause(query, "Select")
    slots.append(_Slot("SELECT", select, spans[id(select)]))
    return slots


def _resolve_identifiers(query: SqlQuery, schema: Schema) -> None:
    for ref in query.ast.find_all("TableRef"):
        if schema.table(ref.lexeme) is None:
            raise ExplainError(f"unresolvable table {ref.lexeme!r}")
    for ref in query.ast.find_all("ColumnRef"):
        table, column = _split_ref(ref.lexeme)
        tab = schema.table(table)
        if tab is None or tab.column(column) is None:
            raise ExplainError(f"unresolvable column {ref.lexeme!r}")


def _entities(step_text: str, node: AstNode) -> tuple[tuple[str, int, int], ...]:
    """Offsets of query lexemes (tables, columns, values) inside step text."""
    candidates: list[tuple[str, str]] = []
    for ref in node.find_all("TableRef"):
        candidates.append(("table", ref.lexeme))
    for ref in node.find_all("ColumnRef"):
        table, column = _split_ref(ref.lexeme)
        candidates.append(("column", ref.lexeme))
        candidates.append(("column", column))
        candidates.append(("table", table))
    for lit in node.find_all("Literal"):
        value = literal_value(lit)
        column = ""
        refs = node.find_all("ColumnRef")
        if refs:
            column = _split_ref(refs[0].lexeme)[1]
        candidates.append(("value", _format_value(column, value)))
        candidates.append(("value", str(value)))
    if node.kind == "From":
        candidates = [("table", node.children[0].lexeme)]

    lowered = step_text.lower()
    taken: list[tuple[int, int]] = []
    out: list[tuple[str, int, int]] = []
    candidates.sort(key=lambda c: -len(c[1]))
    for token_class, lexeme in candidates:
        if not lexeme:
            continue
        pos = lowered.find(lexeme.lower())
        while pos >= 0:
            span = (pos, pos + len(lexeme))
            if not any(s < span[1] and span[0] < e for s, e in taken):
                taken.append(span)
                out.append((token_class, span[0], span[1]))
                break
            pos = lowered.find(lexeme.lower(), pos + 1)
    out.sort(key=lambda e: e[1])
    return tuple(out)


def _rule_step(slot: _Slot, index: int, root: AstNode, or_joined: bool) -> ExplanationStep:
    node = slot.node
    if slot.kind == "FROM":
        table_lc = node.children[0].lexeme.lower()
        text = f"In {table_lc}"
        sub_q = SUB_QUESTIONS["FROM"]
    elif slot.kind == "JOIN":
        text = _join_text(node)
        sub_q = SUB_QUESTIONS["JOIN"]
    elif slot.kind == "WHERE_COND":
        table_lc = _split_ref(node.children[0].lexeme)[0].lower()
        text = _condition_text(table_lc, node)
        if or_joined:
            text = "Or alternatively, " + text[0].lower() + text[1:]
        sub_q = _condition_sub_question(table_lc, node)
    elif slot.kind == "GROUP_BY":
        cols = _join_phrases([_split_ref(c.lexeme)[1] for c in node.children])
        text = f"Group rows by {cols}"
        sub_q = SUB_QUESTIONS["GROUP_BY"]
    elif slot.kind == "ORDER_BY":
        text = _order_by_text(node)
        sub_q = SUB_QUESTIONS["ORDER_BY"]
    else:
        text = _select_text(node)
        sub_q = SUB_QUESTIONS["SELECT"]
    return ExplanationStep(
        index=index,
        kind=slot.kind,
        text=text,
        sub_question=sub_q,
        sql_span=slot.sql_span,
        ast_path=_path_to(root, node),
        entities=_entities(text, node),
    )


def explain(query: SqlQuery, schema: Schema) -> Explanation:
    """Rule-based explanation: one step per clause/atomic condition."""
    _resolve_identifiers(query, schema)
    slots = _decompose(query)
    steps = []
    for i, slot in enumerate(slots):
        or_joined = slot.kind == "WHERE_COND" and query.text[
            slot.sql_span[0] : slot.sql_span[1]
        ].lstrip().startswith("OR ")
        steps.append(_rule_step(slot, i + 1, query.ast, or_joined))
    return Explanation(steps=tuple(steps), source="rule_based")


# ---------------------------------------------------------------------------
# Provider-backed paths

_FALLBACK_EXAMPLE = (
    "SQL: SELECT Employees.name FROM Employees WHERE Employees.salary > 50000\n"
    'Steps: [{"kind": "FROM", "text": "In employees", '
    '"sub_question": "Which data source should we care about?"}, '
    '{"kind": "WHERE_COND", "text": "Keep employees with salary exceeding $50,000", '
    '"sub_question": "What salary range do we care about?"}, '
    '{"kind": "SELECT", "text": "Return the names of employees", '
    '"sub_question": "What information should be returned?"}]'
)


def _steps_digest(expl_steps) -> str:
    return "\n".join(
        f"{s.index}. [{s.kind}] {s.text} (sub-question: {s.sub_question})"
        for s in expl_steps
    )


def fallback_explain(query: SqlQuery, schema: Schema, provider: Provider) -> Explanation:
    """Provider-written step texts over the rule-derived structure.

    The clause skeleton (kinds, spans, paths) always comes from the AST; the
    provider supplies wording. A structurally invalid response gets one retry.
    """
    _resolve_identifiers(query, schema)
    slots = _decompose(query)
    prompt = render_prompt(
        TEMPLATES["explanation_fallback"],
        {
            "schema": schema_digest(schema),
            "sql": query.text,
            "examples": _FALLBACK_EXAMPLE,
        },
    )
    attempt_prompt = prompt
    for attempt in range(2):
        response = provider.invoke(attempt_prompt, temperature=0.0)
        try:
            raw_steps = extract_fenced_json(response)["steps"]
            if [s.get("kind") for s in raw_steps] != [s.kind for s in slots]:
                raise ExplainError("step kinds do not match the query structure")
            steps = tuple(
                ExplanationStep(
                    index=i + 1,
                    kind=slot.kind,
                    text=str(raw["text"]).strip(),
                    sub_question=str(raw.get("sub_question", "")).strip()
                    or SUB_QUESTIONS.get(slot.kind, ""),
                    sql_span=slot.sql_span,
                    ast_path=_path_to(query.ast, slot.node),
                )
                for i, (slot, raw) in enumerate(zip(slots, raw_steps))
            )
            return Explanation(steps=steps, source="llm_fallback")
        except (ProviderError, ExplainError, KeyError, TypeError):
            if attempt == 0:
                attempt_prompt = (
                    prompt
                    + "\nThe previous response was structurally invalid; steps must "
                    "appear in canonical order with the exact kinds required.\n"
                )
            else:
                raise ExplainError("invalid explanation structure") from None
    raise AssertionError("unreachable")


def paraphrase_steps(expl: Explanation, schema: Schema, provider: Provider) -> Explanation:
    """Reword steps for fluency; structure must survive or the original wins."""
    prompt = render_prompt(
        TEMPLATES["explanation_fallback"],
        {
            "schema": schema_digest(schema),
            "sql": "",
            "examples": "Paraphrase these steps for fluency, keeping count, order, "
            "and kinds unchanged:\n" + _steps_digest(expl.steps),
        },
    )
    try:
        raw_steps = extract_fenced_json(provider.invoke(prompt, temperature=0.0))["steps"]
        if [s.get("kind") for s in raw_steps] != [s.kind for s in expl.steps]:
            raise ExplainError("paraphrase changed the step structure")
    except (ProviderError, ExplainError, KeyError, TypeError) as exc:
        return replace(
            expl, warnings=expl.warnings + (f"paraphrase discarded: {exc}",)
        )
    steps = tuple(
        replace(
            step,
            text=str(raw["text"]).strip() or step.text,
            sub_question=str(raw.get("sub_question", step.sub_question)).strip()
            or step.sub_question,
        )
        for step, raw in zip(expl.steps, raw_steps)
    )
    return Explanation(steps=steps, source="llm_paraphrased", warnings=expl.warnings)


def schema_digest(schema: Schema) -> str:
    """Compact one-line-per-table schema rendering for prompts."""
    lines = []
    for table in schema.tables:
        cols = []
        for col in table.columns:
            marks = ""
            if col.is_primary_key:
                marks += " pk"
            if col.reference:
                marks += f" -> {col.reference[0]}.{col.reference[1]}"
            cols.append(f"{col.name}: {col.data_type}{marks}")
        lines.append(f"{table.name}({'; '.join(cols)})")
    return "\n".join(lines)
