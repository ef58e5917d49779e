"""Probabilistic context-free grammar for SQL sampling.

Rules map nonterminals to weighted productions. Right-hand-side symbols
are nonterminals (defined rule names), terminals (SQL keywords and
punctuation), placeholders (<TableName>, <ColumnName>, <Number>,
<String>), or optional segments written "[Name]" whose inclusion
probability lives in the grammar's optional map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

PLACEHOLDERS = ("<TableName>", "<ColumnName>", "<Number>", "<String>")

PROB_TOLERANCE = 1e-9


class GrammarError(ValueError):
    pass


@dataclass(frozen=True)
class Production:
    rhs: tuple[str, ...]
    prob: float

    def __post_init__(self):
        if not 0.0 < self.prob <= 1.0:
            raise GrammarError(f"production probability {self.prob} not in (0,1]")


@dataclass(frozen=True)
class Grammar:
    rules: dict[str, tuple[Production, ...]]
    start_symbol: str = "Query"
    optional_probs: dict[str, float] = field(default_factory=dict)

    def optional_prob(self, symbol: str) -> float:
        return self.optional_probs.get(optional_key(symbol), 0.5)


def optional_key(symbol: str) -> str:
    """Config key for an optional symbol: WhereClause -> WHERE, SortDir -> SORT_DIR."""
    name = symbol.removesuffix("Clause")
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.upper())
    return "".join(out)


def is_optional(symbol: str) -> bool:
    return symbol.startswith("[") and symbol.endswith("]")


def validate_grammar(grammar: Grammar) -> list[str]:
    problems: list[str] = []
    if grammar.start_symbol not in grammar.rules:
        problems.append(f"start symbol {grammar.start_symbol!r} has no rule")
    for nt, productions in grammar.rules.items():
        if not productions:
            problems.append(f"{nt}: no productions")
            continue
        total = sum(p.prob for p in productions)
        if abs(total - 1.0) > PROB_TOLERANCE:
            problems.append(f"{nt}: production probabilities sum to {total}, not 1")
        recursive = [p for p in productions if nt in _inner_symbols(p)]
        if recursive:
            terminating = sum(p.prob for p in productions if nt not in _inner_symbols(p))
            if terminating <= 0:
                problems.append(f"{nt}: recursive with no terminating production")
        for p in productions:
            for sym in p.rhs:
                inner = sym[1:-1] if is_optional(sym) else sym
                if inner in grammar.rules or inner in PLACEHOLDERS:
                    continue
                if is_optional(sym):
                    problems.append(f"{nt}: optional segment {sym} is not a nonterminal")
                elif not _is_terminal(inner):
                    problems.append(f"{nt}: unknown symbol {sym!r}")
    for key, prob in grammar.optional_probs.items():
        if not 0.0 <= prob <= 1.0:
            problems.append(f"optional {key}: probability {prob} not in [0,1]")
    return problems


def _inner_symbols(p: Production) -> set[str]:
    return {s[1:-1] if is_optional(s) else s for s in p.rhs}


def _is_terminal(symbol: str) -> bool:
    # keywords, operators, and punctuation; anything that is not a rule
    # name or placeholder and contains no lowercase letters
    return not any(c.islower() for c in symbol)


def grammar_from_dict(doc: dict) -> Grammar:
    if not isinstance(doc, dict) or "rules" not in doc:
        raise GrammarError("grammar document requires a 'rules' object")
    rules: dict[str, tuple[Production, ...]] = {}
    for nt, raw in doc["rules"].items():
        productions = []
        for rp in raw:
            if "rhs" not in rp or "prob" not in rp:
                raise GrammarError(f"{nt}: production requires 'rhs' and 'prob'")
            productions.append(Production(rhs=tuple(rp["rhs"]), prob=float(rp["prob"])))
        rules[nt] = tuple(productions)
    grammar = Grammar(
        rules=rules,
        start_symbol=doc.get("start", "Query"),
        optional_probs={k: float(v) for k, v in doc.get("optional", {}).items()},
    )
    problems = validate_grammar(grammar)
    if problems:
        raise GrammarError("; ".join(problems))
    return grammar


def load_grammar(document: str) -> Grammar:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise GrammarError(f"malformed grammar JSON: {exc}") from exc
    return grammar_from_dict(doc)


def grammar_to_dict(grammar: Grammar) -> dict:
    return {
        "start": grammar.start_symbol,
        "rules": {
            nt: [{"rhs": list(p.rhs), "prob": p.prob} for p in productions]
            for nt, productions in grammar.rules.items()
        },
        "optional": dict(grammar.optional_probs),
    }


def save_grammar(grammar: Grammar) -> str:
    return json.dumps(grammar_to_dict(grammar), indent=2) + "\n"


def default_grammar() -> Grammar:
    """The bundled grammar, with the standard SQL-subset rule shapes."""
    text = resources.files("sqlannotate.data").joinpath("grammar.json").read_text()
    return load_grammar(text)
