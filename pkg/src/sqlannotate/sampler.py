"""PCFG-driven SQL sampling: structure, grounding, and probability learning.

sample_structure expands any valid grammar top-down; grounding and
learning interpret the canonical rule shapes (the bundled grammar's
nonterminal names), so custom grammars may retune probabilities freely
but must keep those shapes.

Contexts where SQL admits only plain column references (GROUP BY lists,
join conditions, WHERE operands) do not draw from the Column
distribution; learning skips those contexts symmetrically, so a
generate-then-learn round trip is unbiased.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .execution import ExecutionError, execute_query
from .grammar import Grammar, is_optional, optional_key
from .population import SandboxDatabase
from .schema import NUMERIC_TYPES, Schema
from .sqlast import (
    AstNode,
    SqlQuery,
    SqlSyntaxError,
    atomic_conditions,
    clause,
    node,
    parse,
    query_from_ast,
)

MAX_EXPANSIONS = 10_000


class SamplerError(RuntimeError):
    pass


class GroundingError(SamplerError):
    """The skeleton cannot be grounded under this schema; caller retries."""


class DepthLimitError(SamplerError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    rng_seed: int = 0
    max_rejection_attempts: int = 20
    require_nonempty_result: bool = True
    optional_overrides: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.max_rejection_attempts < 1:
            raise ValueError("max_rejection_attempts must be positive")
        for key, p in self.optional_overrides.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"optional probability {key}={p} not in [0,1]")


# ---------------------------------------------------------------------------
# Structure sampling

@dataclass(frozen=True)
class Derivation:
    """Node of a derivation tree.

    Nonterminals carry prod_index; optional segments carry included;
    terminals and placeholders are leaves.
    """

    symbol: str
    prod_index: int | None = None
    children: tuple["Derivation", ...] = ()
    included: bool | None = None  # only for "[X]" wrappers


def sample_structure(
    grammar: Grammar,
    rng: random.Random,
    config: SamplerConfig = SamplerConfig(),
) -> Derivation:
    """Leftmost top-down expansion; each production chosen by its probability."""
    budget = [MAX_EXPANSIONS]

    def expand(symbol: str) -> Derivation:
        if is_optional(symbol):
            inner = symbol[1:-1]
            p = config.optional_overrides.get(optional_key(inner), grammar.optional_prob(inner))
            if rng.random() < p:
                return Derivation(symbol, included=True, children=(expand(inner),))
            return Derivation(symbol, included=False)
        if symbol not in grammar.rules:
            return Derivation(symbol)  # terminal or placeholder
        budget[0] -= 1
        if budget[0] < 0:
            raise DepthLimitError(f"exceeded {MAX_EXPANSIONS} expansions")
        productions = grammar.rules[symbol]
        r = rng.random()
        acc = 0.0
        idx = len(productions) - 1
        for i, prod in enumerate(productions):
            acc += prod.prob
            if r < acc:
                idx = i
                break
        children = tuple(expand(s) for s in productions[idx].rhs)
        return Derivation(symbol, prod_index=idx, children=children)

    return expand(grammar.start_symbol)


def production_counts(
    derivation: Derivation,
    prod_counts: dict[tuple[str, int], int] | None = None,
    opt_counts: dict[str, list[int]] | None = None,
) -> tuple[dict[tuple[str, int], int], dict[str, list[int]]]:
    """Counts of (nonterminal, production index) uses and optional [included, total]."""
    if prod_counts is None:
        prod_counts = {}
    if opt_counts is None:
        opt_counts = {}
    if derivation.included is not None:
        key = optional_key(derivation.symbol[1:-1])
        entry = opt_counts.setdefault(key, [0, 0])
        entry[1] += 1
        if derivation.included:
            entry[0] += 1
    elif derivation.prod_index is not None:
        key2 = (derivation.symbol, derivation.prod_index)
        prod_counts[key2] = prod_counts.get(key2, 0) + 1
    for child in derivation.children:
        production_counts(child, prod_counts, opt_counts)
    return prod_counts, opt_counts


# ---------------------------------------------------------------------------
# Skeleton interpretation (canonical rule shapes)

@dataclass(frozen=True)
class ColumnSlot:
    aggregate: str | None = None  # COUNT/SUM/AVG/MIN/MAX


@dataclass(frozen=True)
class CondSlot:
    kind: str  # "atom" | "and" | "or"
    op: str | None = None
    value_kind: str | None = None  # "num" | "str" | "col"
    children: tuple["CondSlot", ...] = ()


@dataclass(frozen=True)
class JoinSlot:
    join_type: str
    on_conditions: int


@dataclass(frozen=True)
class Skeleton:
    distinct: bool
    select: tuple[ColumnSlot, ...]
    joins: tuple[JoinSlot, ...]
    where: CondSlot | None
    group_by: int | None  # number of grouped columns
    order_by: tuple[ColumnSlot, ...] | None
    sort_dir: str | None


def interpret(derivation: Derivation) -> Skeleton:
    """Convert a derivation over the canonical rule shapes into a Skeleton."""
    parts = {c.symbol: c for c in derivation.children if c.prod_index is not None}
    for c in derivation.children:
        if c.included and c.children:
            parts[c.children[0].symbol] = c.children[0]

    select = parts.get("SelectClause")
    frm = parts.get("FromClause")
    if select is None or frm is None:
        raise SamplerError("derivation lacks SelectClause/FromClause")

    distinct = any(c.symbol == "DISTINCT" for c in select.children)
    select_items = _column_list(_find(select, "ColumnList"))

    joins: list[JoinSlot] = []
    jc = _find(frm, "JoinClause")
    while jc is not None:
        jtype = _find(jc, "JoinType")
        terminal = jtype.children[0].symbol if jtype else "INNER"
        cond = _find(jc, "JoinCondition")
        joins.append(JoinSlot(join_type=terminal, on_conditions=_join_cond_atoms(cond)))
        jc = _find_direct(jc, "JoinClause")

    where = parts.get("WhereClause")
    where_slot = _condition(_find(where, "Condition")) if where is not None else None

    group = parts.get("GroupByClause")
    group_n = len(_column_list(_find(group, "ColumnList"))) if group is not None else None

    order = parts.get("OrderByClause")
    order_items = None
    sort_dir = None
    if order is not None:
        order_items = tuple(_column_list(_find(order, "ColumnList")))
        for c in order.children:
            if c.included and c.children:
                sd = c.children[0]
                sort_dir = sd.children[0].symbol if sd.children else None

    return Skeleton(
        distinct=distinct,
        select=tuple(select_items),
        joins=tuple(joins),
        where=where_slot,
        group_by=group_n,
        order_by=order_items,
        sort_dir=sort_dir,
    )


def _find(deriv: Derivation | None, symbol: str) -> Derivation | None:
    """First descendant with the given nonterminal symbol (depth-first)."""
    if deriv is None:
        return None
    for child in deriv.children:
        if child.symbol == symbol and child.prod_index is not None:
            return child
        found = _find(child, symbol)
        if found is not None:
            return found
    return None


def _find_direct(deriv: Derivation, symbol: str) -> Derivation | None:
    for child in deriv.children:
        if child.symbol == symbol and child.prod_index is not None:
            return child
    return None


def _column_list(deriv: Derivation | None) -> list[ColumnSlot]:
    items: list[ColumnSlot] = []
    while deriv is not None:
        col = _find_direct(deriv, "Column")
        agg = _find(col, "AggregateFunction") if col else None
        items.append(ColumnSlot(aggregate=agg.children[0].symbol if agg else None))
        deriv = _find_direct(deriv, "ColumnList")
    return items


def _join_cond_atoms(deriv: Derivation | None) -> int:
    if deriv is None:
        return 1
    inner = [c for c in deriv.children if c.symbol == "JoinCondition" and c.prod_index is not None]
    if not inner:
        return 1
    return sum(_join_cond_atoms(c) for c in inner)


def _condition(deriv: Derivation | None) -> CondSlot:
    if deriv is None:
        return CondSlot(kind="atom", op="=", value_kind="num")
    inner = [c for c in deriv.children if c.symbol == "Condition" and c.prod_index is not None]
    if inner:
        connective = "and" if any(c.symbol == "AND" for c in deriv.children) else "or"
        return CondSlot(kind=connective, children=tuple(_condition(c) for c in inner))
    op_node = _find_direct(deriv, "Operator")
    op = op_node.children[0].symbol if op_node else "="
    value = _find_direct(deriv, "Value")
    value_kind = "num"
    if value is not None:
        sym = value.children[0].symbol
        value_kind = {"<Number>": "num", "<String>": "str"}.get(sym, "col")
    return CondSlot(kind="atom", op=op, value_kind=value_kind)


# ---------------------------------------------------------------------------
# Grounding

_TEXTY = ("text", "enum")
_STRINGY = ("text", "enum", "timestamp")


class _Grounder:
    def __init__(self, schema: Schema, db: SandboxDatabase, rng: random.Random):
        self.schema = schema
        self.db = db
        self.rng = rng
        self.tables: list[str] = []  # canonical names, FROM order

    # -- scope helpers --------------------------------------------------

    def _scope_columns(self, predicate=None) -> list[tuple[str, str]]:
        out = []
        for tname in self.tables:
            tab = self.schema.table(tname)
            for col in tab.columns:
                if predicate is None or predicate(col):
                    out.append((tab.name, col.name))
        return out

    def _pick_column(self, predicate=None) -> tuple[str, str]:
        candidates = self._scope_columns(predicate)
        if not candidates:
            raise GroundingError("no column in scope satisfies the constraint")
        return self.rng.choice(candidates)

    def _column_ref(self, table: str, column: str) -> AstNode:
        return node(f"ColumnRef:{table}.{column}")

    # -- tables and joins -------------------------------------------------

    def _fk_pairs(self, new_table: str) -> list[tuple[tuple[str, str], tuple[str, str]]]:
        pairs = []
        new = self.schema.table(new_table)
        for tname in self.tables:
            tab = self.schema.table(tname)
            for col in new.columns:
                if col.reference and col.reference[0].lower() == tname.lower():
                    pairs.append(((new.name, col.name), (tab.name, tab.column(col.reference[1]).name)))
            for col in tab.columns:
                if col.reference and col.reference[0].lower() == new_table.lower():
                    pairs.append(((tab.name, col.name), (new.name, new.column(col.reference[1]).name)))
        return pairs

    def _typed_pairs(self, new_table: str) -> list[tuple[tuple[str, str], tuple[str, str]]]:
        new = self.schema.table(new_table)
        pairs = []
        for tname in self.tables:
            tab = self.schema.table(tname)
            for ncol in new.columns:
                for ocol in tab.columns:
                    if _family(ncol.data_type) == _family(ocol.data_type):
                        pairs.append(((new.name, ncol.name), (tab.name, ocol.name)))
        return pairs

    def ground_joins(self, joins: tuple[JoinSlot, ...]) -> list[AstNode]:
        out = []
        for slot in joins:
            in_scope = {t.lower() for t in self.tables}
            fresh = [t.name for t in self.schema.tables if t.name.lower() not in in_scope]
            self.rng.shuffle(fresh)
            chosen = None
            for candidate in fresh:
                if self._fk_pairs(candidate):
                    chosen = (candidate, self._fk_pairs(candidate))
                    break
            if chosen is None:
                for candidate in fresh:
                    pairs = self._typed_pairs(candidate)
                    if pairs:
                        chosen = (candidate, pairs)
                        break
            if chosen is None:
                raise GroundingError("no joinable table available")
            table, pairs = chosen
            conds = [self.rng.choice(pairs)]
            self.tables.append(table)
            # extra ANDed conditions: any same-family pair over the scope
            for _ in range(slot.on_conditions - 1):
                extra = self._any_typed_pair()
                conds.append(extra)
            on_children = [
                node("Comparison:=", self._column_ref(*a), self._column_ref(*b))
                for a, b in conds
            ]
            out.append(
                node(
                    "Join",
                    node(f"JoinType:{slot.join_type}"),
                    node(f"TableRef:{table}"),
                    node("On", *on_children),
                )
            )
        return out

    def _any_typed_pair(self) -> tuple[tuple[str, str], tuple[str, str]]:
        cols = self._scope_columns()
        a = self.rng.choice(cols)
        fam = _family(self._col(a).data_type)
        same = [c for c in cols if _family(self._col(c).data_type) == fam]
        b = self.rng.choice(same)
        return a, b

    def _col(self, ref: tuple[str, str]):
        return self.schema.resolve(*ref)

    # -- select / group / order ------------------------------------------

    def ground_items(
        self, slots: tuple[ColumnSlot, ...], plain_pool: list[tuple[str, str]] | None
    ) -> list[AstNode]:
        items = []
        for slot in slots:
            if slot.aggregate in ("SUM", "AVG"):
                ref = self._pick_column(lambda c: c.data_type in NUMERIC_TYPES)
                items.append(node(f"Aggregate:{slot.aggregate}", self._column_ref(*ref)))
            elif slot.aggregate is not None:
                ref = self._pick_column()
                items.append(node(f"Aggregate:{slot.aggregate}", self._column_ref(*ref)))
            else:
                pool = plain_pool if plain_pool is not None else self._scope_columns()
                if not pool:
                    raise GroundingError("no plain column available for SELECT")
                items.append(self._column_ref(*self.rng.choice(pool)))
        return items

    def ground_group_by(self, n: int) -> list[tuple[str, str]]:
        cols = self._scope_columns()
        self.rng.shuffle(cols)
        chosen = cols[:n]
        while len(chosen) < n:  # more groups requested than columns in scope
            chosen.append(self.rng.choice(cols))
        return chosen

    # -- conditions -------------------------------------------------------

    def ground_condition(self, slot: CondSlot) -> AstNode:
        if slot.kind == "atom":
            return self._ground_atom(slot)
        label = "And" if slot.kind == "and" else "Or"
        return node(label, *(self.ground_condition(c) for c in slot.children))

    def _ground_atom(self, slot: CondSlot) -> AstNode:
        op, vkind = slot.op, slot.value_kind
        if op == "LIKE":
            lhs = self._pick_column(lambda c: c.data_type in _TEXTY)
        elif vkind == "num":
            lhs = self._pick_column(lambda c: c.data_type in NUMERIC_TYPES)
        elif vkind == "str":
            lhs = self._pick_column(lambda c: c.data_type in _STRINGY)
        else:
            lhs = self._pick_column()
        lhs_col = self._col(lhs)
        lhs_ref = self._column_ref(*lhs)

        if vkind == "col":
            fam = _family(lhs_col.data_type)
            same = self._scope_columns(lambda c: _family(c.data_type) == fam)
            rhs: AstNode = self._column_ref(*self.rng.choice(same))
        elif op == "LIKE" and vkind == "num":
            rhs = node(f"Literal:num:{self.rng.randint(0, 999)}")
        elif op == "LIKE":
            value = str(self.rng.choice(self.db.column_values(*lhs)))
            sub = self._substring(value)
            rhs = node(f"Literal:str:%{sub}%")
        else:
            value = self.rng.choice(self.db.column_values(*lhs))
            rhs = _literal_node(value)

        if op == "IN":
            return node("Comparison:IN", lhs_ref, rhs)
        return node(f"Comparison:{op}", lhs_ref, rhs)

    def _substring(self, value: str) -> str:
        if len(value) <= 2:
            return value
        length = self.rng.randint(1, min(6, len(value)))
        start = self.rng.randint(0, len(value) - length)
        return value[start : start + length]


def _family(data_type: str) -> str:
    if data_type in NUMERIC_TYPES:
        return "numeric"
    if data_type in _TEXTY:
        return "text"
    return data_type


def _literal_node(value: object) -> AstNode:
    if isinstance(value, bool):
        return node(f"Literal:bool:{'TRUE' if value else 'FALSE'}")
    if isinstance(value, int):
        return node(f"Literal:num:{value}")
    if isinstance(value, float):
        return node(f"Literal:num:{value!r}")
    return node(f"Literal:str:{value}")


def ground(
    skeleton: Skeleton,
    schema: Schema,
    db: SandboxDatabase,
    config: SamplerConfig,
    rng: random.Random,
) -> SqlQuery:
    """Bind a skeleton's placeholders to schema entities and stored values."""
    if not schema.tables:
        raise GroundingError("schema has no tables")
    g = _Grounder(schema, db, rng)
    g.tables.append(rng.choice(schema.tables).name)

    join_nodes = g.ground_joins(skeleton.joins)
    from_node = node("From", node(f"TableRef:{g.tables[0]}"), *join_nodes)

    group_cols = g.ground_group_by(skeleton.group_by) if skeleton.group_by else None

    select_children: list[AstNode] = []
    if skeleton.distinct:
        select_children.append(node("Distinct"))
    select_children.extend(g.ground_items(skeleton.select, group_cols))
    select_node = node("Select", *select_children)

    children = [select_node, from_node]
    if skeleton.where is not None:
        children.append(node("Where", g.ground_condition(skeleton.where)))
    if group_cols is not None:
        children.append(node("GroupBy", *(g._column_ref(*c) for c in group_cols)))
    if skeleton.order_by is not None:
        order_children = g.ground_items(skeleton.order_by, group_cols)
        if skeleton.sort_dir is not None:
            order_children.append(node(f"SortDir:{skeleton.sort_dir}"))
        children.append(node("OrderBy", *order_children))

    return query_from_ast(node("Query", *children))


def sample_query(
    grammar: Grammar,
    schema: Schema,
    db: SandboxDatabase,
    config: SamplerConfig,
    rng: random.Random,
) -> SqlQuery:
    """Structure + grounding with rejection on failure or empty results."""
    last_executable: SqlQuery | None = None
    last_error: Exception | None = None
    for _ in range(config.max_rejection_attempts):
        try:
            skeleton = interpret(sample_structure(grammar, rng, config))
            query = ground(skeleton, schema, db, config, rng)
            result = execute_query(db, query)
        except (GroundingError, ExecutionError, DepthLimitError) as exc:
            last_error = exc
            continue
        last_executable = query
        if not config.require_nonempty_result or len(result) > 0:
            return query
    if last_executable is not None:
        return last_executable
    raise SamplerError(f"no executable query after {config.max_rejection_attempts} attempts: {last_error}")


# ---------------------------------------------------------------------------
# Probability learning

@dataclass(frozen=True)
class LearnReport:
    grammar: Grammar
    total: int
    learned_from: int
    skipped: tuple[tuple[int, str], ...]
    warning: str | None = None


def learn_probabilities(grammar: Grammar, corpus: list[SqlQuery | str]) -> LearnReport:
    """Re-estimate production probabilities from derivation counts.

    Add-one smoothing per nonterminal; optional-clause inclusion
    fractions learned the same way. Queries that do not parse under the
    subset are skipped and reported.
    """
    if not corpus:
        return LearnReport(
            grammar=grammar, total=0, learned_from=0, skipped=(),
            warning="empty corpus; grammar unchanged",
        )
    counts: dict[tuple[str, int], int] = {}
    opt: dict[str, list[int]] = {k: [0, 0] for k in ("WHERE", "GROUP_BY", "ORDER_BY", "SORT_DIR")}
    skipped: list[tuple[int, str]] = []
    learned_from = 0
    for i, entry in enumerate(corpus):
        try:
            query = entry if isinstance(entry, SqlQuery) else parse(entry)
            _count_query(query, counts, opt)
        except (SqlSyntaxError, ValueError) as exc:
            skipped.append((i, str(exc)))
            continue
        learned_from += 1

    if learned_from == 0:
        return LearnReport(
            grammar=grammar, total=len(corpus), learned_from=0,
            skipped=tuple(skipped), warning="no parseable queries; grammar unchanged",
        )

    new_rules: dict[str, tuple] = {}
    for nt, productions in grammar.rules.items():
        k = len(productions)
        total = sum(counts.get((nt, i), 0) for i in range(k))
        probs = [(counts.get((nt, i), 0) + 1) / (total + k) for i in range(k)]
        new_rules[nt] = tuple(
            type(p)(rhs=p.rhs, prob=probs[i]) for i, p in enumerate(productions)
        )
    new_optional = dict(grammar.optional_probs)
    for key, (inc, tot) in opt.items():
        if key in new_optional:
            new_optional[key] = (inc + 1) / (tot + 2)
    learned = Grammar(
        rules=new_rules, start_symbol=grammar.start_symbol, optional_probs=new_optional
    )
    return LearnReport(
        grammar=learned, total=len(corpus), learned_from=learned_from,
        skipped=tuple(skipped),
    )


def _bump(counts: dict, nt: str, idx: int, n: int = 1) -> None:
    counts[(nt, idx)] = counts.get((nt, idx), 0) + n


def _count_query(query: SqlQuery, counts: dict, opt: dict) -> None:
    if query.ast.find_all("Literal") and any(
        lit.lexeme.startswith("bool:") for lit in query.ast.find_all("Literal")
    ):
        raise ValueError("boolean literal not representable in the grammar")

    _bump(counts, "Query", 0)

    select = clause(query, "Select")
    items = [c for c in select.children if c.kind != "Distinct"]
    distinct = any(c.kind == "Distinct" for c in select.children)
    _bump(counts, "SelectClause", 1 if distinct else 0)
    _count_column_list(counts, items, choice_context=True)

    frm = clause(query, "From")
    joins = [c for c in frm.children if c.kind == "Join"]
    _bump(counts, "FromClause", 1 if joins else 0)
    if joins:
        _bump(counts, "JoinClause", 0)  # chain terminator, once per chain
        if len(joins) > 1:
            _bump(counts, "JoinClause", 1, len(joins) - 1)
    jtype_index = {"INNER": 0, "LEFT": 1, "RIGHT": 2, "FULL": 3}
    for join in joins:
        jtype, _table, on = join.children
        _bump(counts, "JoinType", jtype_index[jtype.lexeme])
        m = len(on.children)
        _bump(counts, "JoinCondition", 0, m)
        if m > 1:
            _bump(counts, "JoinCondition", 1, m - 1)

    where = clause(query, "Where")
    opt["WHERE"][1] += 1
    if where is not None:
        opt["WHERE"][0] += 1
        _bump(counts, "WhereClause", 0)
        _count_condition(counts, where.children[0])

    group = clause(query, "GroupBy")
    opt["GROUP_BY"][1] += 1
    if group is not None:
        opt["GROUP_BY"][0] += 1
        _bump(counts, "GroupByClause", 0)
        _count_column_list(counts, list(group.children), choice_context=False)

    order = clause(query, "OrderBy")
    opt["ORDER_BY"][1] += 1
    if order is not None:
        opt["ORDER_BY"][0] += 1
        _bump(counts, "OrderByClause", 0)
        order_items = [c for c in order.children if c.kind != "SortDir"]
        dirs = [c for c in order.children if c.kind == "SortDir"]
        _count_column_list(counts, order_items, choice_context=True)
        opt["SORT_DIR"][1] += 1
        if dirs:
            opt["SORT_DIR"][0] += 1
            _bump(counts, "SortDir", 0 if dirs[0].lexeme == "ASC" else 1)


_AGG_INDEX = {"COUNT": 0, "SUM": 1, "AVG": 2, "MIN": 3, "MAX": 4}
_OP_INDEX = {"=": 0, "<": 1, ">": 2, "<=": 3, ">=": 4, "<>": 5, "LIKE": 6, "IN": 7}


def _count_column_list(counts: dict, items: list[AstNode], choice_context: bool) -> None:
    n = len(items)
    _bump(counts, "ColumnList", 0, 1)
    if n > 1:
        _bump(counts, "ColumnList", 1, n - 1)
    if not choice_context:
        return
    for item in items:
        if item.kind == "Aggregate":
            _bump(counts, "Column", 1)
            _bump(counts, "AggregateFunction", _AGG_INDEX[item.lexeme])
        else:
            _bump(counts, "Column", 0)


def _count_condition(counts: dict, cond: AstNode) -> None:
    if cond.kind in ("And", "Or"):
        _bump(counts, "Condition", 1 if cond.kind == "And" else 2)
        for c in cond.children:
            _count_condition(counts, c)
        return
    _bump(counts, "Condition", 0)
    _bump(counts, "Operator", _OP_INDEX[cond.lexeme])
    for operand in cond.children[1:]:
        if operand.kind == "ColumnRef":
            _bump(counts, "Value", 2)
        elif operand.lexeme.startswith("num:"):
            _bump(counts, "Value", 0)
        else:
            _bump(counts, "Value", 1)
