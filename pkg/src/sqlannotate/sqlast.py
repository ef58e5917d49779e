"""SQL subset parser, AST, and canonical serializer.

The supported subset: SELECT [DISTINCT] items FROM table joins*
[WHERE cond] [GROUP BY cols] [ORDER BY cols [ASC|DESC]], with aggregates
COUNT/SUM/AVG/MIN/MAX, join types INNER/LEFT/RIGHT/FULL, and operators
=, <, >, <=, >=, <>, LIKE, IN. Column references are always qualified
(Table.column).

parse() canonicalizes: AND binds tighter than OR, both left-associative,
keywords uppercased, identifier case preserved. serialize(parse(text))
reparses to a structurally equal tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

KEYWORDS = {
    "SELECT", "DISTINCT", "FROM", "INNER", "LEFT", "RIGHT", "FULL", "JOIN",
    "ON", "WHERE", "AND", "OR", "GROUP", "ORDER", "BY", "ASC", "DESC",
    "LIKE", "IN", "COUNT", "SUM", "AVG", "MIN", "MAX", "TRUE", "FALSE",
}
AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX")
JOIN_TYPES = ("INNER", "LEFT", "RIGHT", "FULL")
OPERATORS = ("=", "<", ">", "<=", ">=", "<>", "LIKE", "IN")


class SqlSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected one of {', '.join(expected)})"
        super().__init__(detail)
        self.offset = offset
        self.expected = expected


@dataclass(frozen=True)
class AstNode:
    """Ordered labeled tree node. Label is 'Kind' or 'Kind:lexeme'."""

    label: str
    children: tuple["AstNode", ...] = ()

    @property
    def kind(self) -> str:
        return self.label.split(":", 1)[0]

    @property
    def lexeme(self) -> str:
        parts = self.label.split(":", 1)
        return parts[1] if len(parts) > 1 else ""

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def find_all(self, kind: str) -> list["AstNode"]:
        out = []
        if self.kind == kind:
            out.append(self)
        for c in self.children:
            out.extend(c.find_all(kind))
        return out


def node(label: str, *children: AstNode) -> AstNode:
    return AstNode(label, tuple(children))


@dataclass(frozen=True)
class SqlQuery:
    text: str
    ast: AstNode

    def __str__(self) -> str:
        return self.text


# ---------------------------------------------------------------------------
# Tokenizer

@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD | IDENT | NUMBER | STRING | SYMBOL | EOF
    value: str
    offset: int


_TOKEN_RE = re.compile(
    r"\s+"
    r"|(?P<number>\d+(?:\.\d+)?)"
    r"|(?P<string>'(?:[^']|'')*')"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<symbol><=|>=|<>|[=<>(),.])"
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "number":
            tokens.append(Token("NUMBER", m.group(), pos))
        elif m.lastgroup == "string":
            tokens.append(Token("STRING", m.group(), pos))
        elif m.lastgroup == "ident":
            word = m.group()
            if word.upper() in KEYWORDS:
                tokens.append(Token("KEYWORD", word.upper(), pos))
            else:
                tokens.append(Token("IDENT", word, pos))
        elif m.lastgroup == "symbol":
            tokens.append(Token("SYMBOL", m.group(), pos))
        pos = m.end()
    tokens.append(Token("EOF", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.i]

    def error(self, *expected: str) -> SqlSyntaxError:
        tok = self.cur
        what = "end of input" if tok.kind == "EOF" else repr(tok.value)
        return SqlSyntaxError(f"unexpected {what}", tok.offset, expected)

    def accept_kw(self, word: str) -> bool:
        if self.cur.kind == "KEYWORD" and self.cur.value == word:
            self.i += 1
            return True
        return False

    def expect_kw(self, word: str) -> None:
        if not self.accept_kw(word):
            raise self.error(word)

    def accept_sym(self, sym: str) -> bool:
        if self.cur.kind == "SYMBOL" and self.cur.value == sym:
            self.i += 1
            return True
        return False

    def expect_sym(self, sym: str) -> None:
        if not self.accept_sym(sym):
            raise self.error(sym)

    def expect_ident(self) -> str:
        if self.cur.kind != "IDENT":
            raise self.error("identifier")
        value = self.cur.value
        self.i += 1
        return value

    def parse_query(self) -> AstNode:
        select = self.parse_select()
        frm = self.parse_from()
        children = [select, frm]
        if self.accept_kw("WHERE"):
            children.append(node("Where", self.parse_or_expr()))
        if self.accept_kw("GROUP"):
            self.expect_kw("BY")
            children.append(node("GroupBy", *self.parse_column_list(plain_only=True)))
        if self.accept_kw("ORDER"):
            self.expect_kw("BY")
            items = self.parse_column_list()
            if self.accept_kw("ASC"):
                items.append(node("SortDir:ASC"))
            elif self.accept_kw("DESC"):
                items.append(node("SortDir:DESC"))
            children.append(node("OrderBy", *items))
        if self.cur.kind != "EOF":
            raise self.error("end of input")
        return node("Query", *children)

    def parse_select(self) -> AstNode:
        self.expect_kw("SELECT")
        children: list[AstNode] = []
        if self.accept_kw("DISTINCT"):
            children.append(node("Distinct"))
        children.extend(self.parse_column_list())
        return node("Select", *children)

    def parse_column_list(self, plain_only: bool = False) -> list[AstNode]:
        items = [self.parse_column(plain_only)]
        while self.accept_sym(","):
            items.append(self.parse_column(plain_only))
        return items

    def parse_column(self, plain_only: bool = False) -> AstNode:
        if not plain_only and self.cur.kind == "KEYWORD" and self.cur.value in AGGREGATES:
            func = self.cur.value
            self.i += 1
            self.expect_sym("(")
            ref = self.parse_column_ref()
            self.expect_sym(")")
            return node(f"Aggregate:{func}", ref)
        return self.parse_column_ref()

    def parse_column_ref(self) -> AstNode:
        table = self.expect_ident()
        self.expect_sym(".")
        column = self.expect_ident()
        return node(f"ColumnRef:{table}.{column}")

    def parse_from(self) -> AstNode:
        self.expect_kw("FROM")
        children: list[AstNode] = [node(f"TableRef:{self.expect_ident()}")]
        while self.cur.kind == "KEYWORD" and self.cur.value in JOIN_TYPES:
            jtype = self.cur.value
            self.i += 1
            self.expect_kw("JOIN")
            table = node(f"TableRef:{self.expect_ident()}")
            self.expect_kw("ON")
            conds = [self.parse_comparison()]
            while self.accept_kw("AND"):
                conds.append(self.parse_comparison())
            children.append(node("Join", node(f"JoinType:{jtype}"), table, node("On", *conds)))
        return node("From", *children)

    def parse_or_expr(self) -> AstNode:
        left = self.parse_and_expr()
        while self.accept_kw("OR"):
            left = node("Or", left, self.parse_and_expr())
        return left

    def parse_and_expr(self) -> AstNode:
        left = self.parse_comparison()
        while self.accept_kw("AND"):
            left = node("And", left, self.parse_comparison())
        return left

    def parse_comparison(self) -> AstNode:
        lhs = self.parse_column_ref()
        if self.accept_kw("LIKE"):
            return node("Comparison:LIKE", lhs, self.parse_value())
        if self.accept_kw("IN"):
            self.expect_sym("(")
            values = [self.parse_value()]
            while self.accept_sym(","):
                values.append(self.parse_value())
            self.expect_sym(")")
            return node("Comparison:IN", lhs, *values)
        for op in ("<=", ">=", "<>", "=", "<", ">"):
            if self.accept_sym(op):
                return node(f"Comparison:{op}", lhs, self.parse_value())
        raise self.error(*OPERATORS)

    def parse_value(self) -> AstNode:
        tok = self.cur
        if tok.kind == "NUMBER":
            self.i += 1
            return node(f"Literal:num:{tok.value}")
        if tok.kind == "STRING":
            self.i += 1
            return node(f"Literal:str:{_unquote(tok.value)}")
        if tok.kind == "KEYWORD" and tok.value in ("TRUE", "FALSE"):
            self.i += 1
            return node(f"Literal:bool:{tok.value}")
        if tok.kind == "IDENT":
            return self.parse_column_ref()
        raise self.error("number", "string", "TRUE", "FALSE", "column")


def _unquote(lexeme: str) -> str:
    return lexeme[1:-1].replace("''", "'")


def _quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


# ---------------------------------------------------------------------------
# Serializer

class _Writer:
    def __init__(self):
        self.parts: list[str] = []
        self.length = 0
        self.spans: dict[int, tuple[int, int]] = {}

    def emit(self, text: str) -> None:
        self.parts.append(text)
        self.length += len(text)

    def mark(self, n: AstNode, start: int) -> None:
        self.spans[id(n)] = (start, self.length)


def serialize(ast: AstNode) -> str:
    return serialize_with_spans(ast)[0]


def serialize_with_spans(ast: AstNode) -> tuple[str, dict[int, tuple[int, int]]]:
    """Serialize to canonical text, recording each node's (start, end) span."""
    w = _Writer()
    _write_query(w, ast)
    return "".join(w.parts), w.spans


def _write_query(w: _Writer, q: AstNode) -> None:
    start = w.length
    for i, child in enumerate(q.children):
        if i:
            w.emit(" ")
        _write_clause(w, child)
    w.mark(q, start)


def _write_clause(w: _Writer, n: AstNode) -> None:
    start = w.length
    kind = n.kind
    if kind == "Select":
        w.emit("SELECT ")
        items = list(n.children)
        if items and items[0].kind == "Distinct":
            distinct = items.pop(0)
            w.emit("DISTINCT ")
            w.mark(distinct, start + len("SELECT "))
        _write_items(w, items)
    elif kind == "From":
        w.emit("FROM ")
        _write_leaf(w, n.children[0], n.children[0].lexeme)
        for join in n.children[1:]:
            w.emit(" ")
            _write_join(w, join)
    elif kind == "Where":
        w.emit("WHERE ")
        _write_cond(w, n.children[0])
    elif kind == "GroupBy":
        w.emit("GROUP BY ")
        _write_items(w, list(n.children))
    elif kind == "OrderBy":
        w.emit("ORDER BY ")
        items = list(n.children)
        sort_dir = None
        if items and items[-1].kind == "SortDir":
            sort_dir = items.pop()
        _write_items(w, items)
        if sort_dir is not None:
            s = w.length + 1
            w.emit(" " + sort_dir.lexeme)
            w.mark(sort_dir, s)
    else:
        raise ValueError(f"unexpected clause node {n.label!r}")
    w.mark(n, start)


def _write_join(w: _Writer, join: AstNode) -> None:
    start = w.length
    jtype, table, on = join.children
    s = w.length
    w.emit(jtype.lexeme)
    w.mark(jtype, s)
    w.emit(" JOIN ")
    _write_leaf(w, table, table.lexeme)
    on_start = w.length + 1
    w.emit(" ON ")
    for i, cond in enumerate(on.children):
        if i:
            w.emit(" AND ")
        _write_cond(w, cond)
    w.mark(on, on_start)
    w.mark(join, start)


def _write_items(w: _Writer, items: list[AstNode]) -> None:
    for i, item in enumerate(items):
        if i:
            w.emit(", ")
        _write_item(w, item)


def _write_item(w: _Writer, item: AstNode) -> None:
    start = w.length
    if item.kind == "Aggregate":
        w.emit(item.lexeme + "(")
        _write_leaf(w, item.children[0], item.children[0].lexeme)
        w.emit(")")
    else:
        w.emit(item.lexeme)
    w.mark(item, start)


def _write_leaf(w: _Writer, n: AstNode, text: str) -> None:
    start = w.length
    w.emit(text)
    w.mark(n, start)


def _write_cond(w: _Writer, n: AstNode) -> None:
    start = w.length
    if n.kind in ("And", "Or"):
        _write_cond(w, n.children[0])
        w.emit(f" {n.kind.upper()} ")
        _write_cond(w, n.children[1])
    elif n.kind == "Comparison":
        op = n.lexeme
        _write_leaf(w, n.children[0], n.children[0].lexeme)
        if op == "IN":
            w.emit(" IN (")
            for i, v in enumerate(n.children[1:]):
                if i:
                    w.emit(", ")
                _write_value(w, v)
            w.emit(")")
        else:
            w.emit(f" {op} ")
            _write_value(w, n.children[1])
    else:
        raise ValueError(f"unexpected condition node {n.label!r}")
    w.mark(n, start)


def _write_value(w: _Writer, n: AstNode) -> None:
    start = w.length
    if n.kind == "ColumnRef":
        w.emit(n.lexeme)
    elif n.kind == "Literal":
        tag, lex = n.lexeme.split(":", 1)
        if tag == "str":
            w.emit(_quote(lex))
        else:
            w.emit(lex)
    else:
        raise ValueError(f"unexpected value node {n.label!r}")
    w.mark(n, start)


# ---------------------------------------------------------------------------
# Public API

def parse(text: str) -> SqlQuery:
    """Parse a query; the result carries canonical text (serialize(ast))."""
    ast = _Parser(text).parse_query()
    return SqlQuery(text=serialize(ast), ast=ast)


def query_from_ast(ast: AstNode) -> SqlQuery:
    """Build a SqlQuery from an AST, canonicalizing via reparse."""
    return parse(serialize(ast))


# Convenience accessors used across modules.

def clause(q: SqlQuery, kind: str) -> AstNode | None:
    for child in q.ast.children:
        if child.kind == kind:
            return child
    return None


def query_tables(q: SqlQuery) -> list[str]:
    """Tables referenced in FROM/JOIN, in appearance order."""
    frm = clause(q, "From")
    out: list[str] = []
    if frm is None:
        return out
    for n in frm.find_all("TableRef"):
        if n.lexeme not in out:
            out.append(n.lexeme)
    return out


def atomic_conditions(cond: AstNode) -> list[AstNode]:
    """Comparison leaves of an And/Or tree, in left-to-right order."""
    if cond.kind == "Comparison":
        return [cond]
    out = []
    for c in cond.children:
        out.extend(atomic_conditions(c))
    return out


def literal_value(n: AstNode):
    """Python value of a Literal node."""
    tag, lex = n.lexeme.split(":", 1)
    if tag == "num":
        return float(lex) if "." in lex else int(lex)
    if tag == "bool":
        return lex == "TRUE"
    return lex
