"""In-memory execution of the supported SQL subset over a SandboxDatabase.

Deterministic, dependency-free semantics: nested-loop joins with
INNER/LEFT/RIGHT/FULL padding, WHERE trees with AND/OR, grouping,
aggregates, and ORDER BY. Unmatched outer-join cells are None; None never
satisfies a comparison and is skipped by aggregates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .population import SandboxDatabase
from .schema import NUMERIC_TYPES, Column
from .sqlast import AstNode, SqlQuery, clause, literal_value


class ExecutionError(ValueError):
    pass


@dataclass(frozen=True)
class ResultTable:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def __len__(self) -> int:
        return len(self.rows)


Row = dict[tuple[str, str], object]  # (table_lower, column_lower) -> value


def _family(data_type: str) -> str:
    if data_type in NUMERIC_TYPES:
        return "numeric"
    if data_type in ("text", "enum"):
        return "text"
    return data_type  # timestamp, boolean


class _Executor:
    def __init__(self, db: SandboxDatabase, sql: SqlQuery):
        self.db = db
        self.sql = sql
        self.tables: dict[str, str] = {}  # lower -> canonical name

    def run(self) -> ResultTable:
        frm = clause(self.sql, "From")
        if frm is None:
            raise ExecutionError("query has no FROM clause")
        rows = self._build_from(frm)

        where = clause(self.sql, "Where")
        for ref in (where.find_all("ColumnRef") if where else []):
            self._resolve(ref)
        if where is not None:
            self._typecheck_cond(where.children[0])
            rows = [r for r in rows if self._eval_cond(where.children[0], r)]

        select = clause(self.sql, "Select")
        items = [c for c in select.children if c.kind != "Distinct"]
        distinct = any(c.kind == "Distinct" for c in select.children)
        group_by = clause(self.sql, "GroupBy")
        order_by = clause(self.sql, "OrderBy")
        order_items = []
        direction = "ASC"
        if order_by is not None:
            for child in order_by.children:
                if child.kind == "SortDir":
                    direction = child.lexeme
                else:
                    order_items.append(child)

        for item in items + order_items + (list(group_by.children) if group_by else []):
            for ref in item.find_all("ColumnRef"):
                self._resolve(ref)
            if item.kind == "Aggregate" and item.lexeme in ("SUM", "AVG"):
                col = self._resolve(item.children[0])
                if col.data_type not in NUMERIC_TYPES:
                    raise ExecutionError(
                        f"{item.lexeme} requires a numeric column, got "
                        f"{item.children[0].lexeme} ({col.data_type})"
                    )

        has_agg = any(i.kind == "Aggregate" for i in items + order_items)

        if group_by is not None:
            groups = self._group(rows, list(group_by.children))
        elif has_agg:
            groups = [rows]
        else:
            groups = None

        if groups is None:
            out = [tuple(self._item_value(i, r) for i in items) for r in rows]
            keys = [tuple(self._item_value(i, r) for i in order_items) for r in rows]
        else:
            out, keys = [], []
            for grp in groups:
                out.append(tuple(self._agg_item(i, grp) for i in items))
                keys.append(tuple(self._agg_item(i, grp) for i in order_items))

        if order_items:
            indexed = sorted(
                range(len(out)),
                key=lambda k: tuple(_sort_key(v) for v in keys[k]),
                reverse=(direction == "DESC"),
            )
            out = [out[k] for k in indexed]
        if distinct:
            seen = set()
            deduped = []
            for row in out:
                if row not in seen:
                    seen.add(row)
                    deduped.append(row)
            out = deduped

        labels = tuple(_item_label(i) for i in items)
        return ResultTable(columns=labels, rows=tuple(out))

    # -- FROM / JOIN ---------------------------------------------------

    def _base_rows(self, table: str) -> list[Row]:
        tab = self.db.schema.table(table)
        if tab is None:
            raise ExecutionError(f"unknown table {table!r}")
        self.tables[table.lower()] = tab.name
        out = []
        for record in self.db.rows.get(tab.name, []):
            out.append({(tab.name.lower(), c.name.lower()): record[c.name] for c in tab.columns})
        return out

    def _table_keys(self, table: str) -> set[tuple[str, str]]:
        tab = self.db.schema.table(table)
        return {(tab.name.lower(), c.name.lower()) for c in tab.columns}

    def _build_from(self, frm: AstNode) -> list[Row]:
        rows = self._base_rows(frm.children[0].lexeme)
        left_keys = self._table_keys(frm.children[0].lexeme)
        for join in frm.children[1:]:
            jtype, table_ref, on = join.children
            right = self._base_rows(table_ref.lexeme)
            right_keys = self._table_keys(table_ref.lexeme)
            for cond in on.children:
                self._typecheck_cond(cond)
            rows = self._join(rows, right, jtype.lexeme, list(on.children), left_keys, right_keys)
            left_keys = left_keys | right_keys
        return rows

    def _join(
        self,
        left: list[Row],
        right: list[Row],
        jtype: str,
        conds: list[AstNode],
        left_keys: set[tuple[str, str]],
        right_keys: set[tuple[str, str]],
    ) -> list[Row]:
        out: list[Row] = []
        matched_right = [False] * len(right)
        for lrow in left:
            matched = False
            for j, rrow in enumerate(right):
                combined = {**lrow, **rrow}
                if all(self._eval_cond(c, combined) for c in conds):
                    out.append(combined)
                    matched = True
                    matched_right[j] = True
            if not matched and jtype in ("LEFT", "FULL"):
                out.append({**{k: None for k in right_keys}, **lrow})
        if jtype in ("RIGHT", "FULL"):
            for j, rrow in enumerate(right):
                if not matched_right[j]:
                    out.append({**{k: None for k in left_keys}, **rrow})
        return out

    # -- resolution & typechecking --------------------------------------

    def _resolve(self, ref: AstNode) -> Column:
        table, column = ref.lexeme.split(".", 1)
        tab = self.db.schema.table(table)
        if tab is None:
            raise ExecutionError(f"unknown table {table!r}")
        col = tab.column(column)
        if col is None:
            raise ExecutionError(f"unknown column {table}.{column}")
        return col

    def _typecheck_cond(self, cond: AstNode) -> None:
        if cond.kind in ("And", "Or"):
            for c in cond.children:
                self._typecheck_cond(c)
            return
        lhs = self._resolve(cond.children[0])
        op = cond.lexeme
        if op == "LIKE" and _family(lhs.data_type) != "text":
            raise ExecutionError(
                f"LIKE requires a text column, got {cond.children[0].lexeme} "
                f"({lhs.data_type})"
            )
        for operand in cond.children[1:]:
            if operand.kind == "ColumnRef":
                rhs = self._resolve(operand)
                if _family(lhs.data_type) != _family(rhs.data_type):
                    raise ExecutionError(
                        f"type-mismatched comparison: {cond.children[0].lexeme} "
                        f"({lhs.data_type}) vs {operand.lexeme} ({rhs.data_type})"
                    )
            else:
                tag = operand.lexeme.split(":", 1)[0]
                fam = _family(lhs.data_type)
                ok = (
                    (tag == "num" and fam == "numeric")
                    or (tag == "str" and fam in ("text", "timestamp"))
                    or (tag == "bool" and fam == "boolean")
                    # numeric LIKE patterns match the digits of text values
                    or (op == "LIKE" and tag == "num")
                )
                if not ok:
                    raise ExecutionError(
                        f"type-mismatched comparison: {cond.children[0].lexeme} "
                        f"({lhs.data_type}) vs {tag} literal"
                    )

    # -- evaluation ------------------------------------------------------

    def _value(self, operand: AstNode, row: Row):
        if operand.kind == "ColumnRef":
            table, column = operand.lexeme.split(".", 1)
            key = (table.lower(), column.lower())
            if key not in row:
                raise ExecutionError(
                    f"column {operand.lexeme} not available in this row context"
                )
            return row[key]
        return literal_value(operand)

    def _eval_cond(self, cond: AstNode, row: Row) -> bool:
        if cond.kind == "And":
            return self._eval_cond(cond.children[0], row) and self._eval_cond(cond.children[1], row)
        if cond.kind == "Or":
            return self._eval_cond(cond.children[0], row) or self._eval_cond(cond.children[1], row)
        op = cond.lexeme
        lhs = self._value(cond.children[0], row)
        if lhs is None:
            return False
        if op == "IN":
            return any(_compare("=", lhs, self._value(v, row)) for v in cond.children[1:])
        rhs = self._value(cond.children[1], row)
        if rhs is None:
            return False
        return _compare(op, lhs, rhs)

    def _item_value(self, item: AstNode, row: Row):
        if item.kind == "Aggregate":
            raise ExecutionError("aggregate outside a grouped context")
        return self._value(item, row)

    def _agg_item(self, item: AstNode, group: list[Row]):
        if item.kind != "Aggregate":
            # non-aggregated column in a grouped query: representative value
            return self._value(item, group[0]) if group else None
        values = [self._value(item.children[0], r) for r in group]
        values = [v for v in values if v is not None]
        func = item.lexeme
        if func == "COUNT":
            return len(values)
        if not values:
            return None
        if func == "SUM":
            return sum(values)
        if func == "AVG":
            return sum(values) / len(values)
        if func == "MIN":
            return min(values)
        return max(values)

    def _group(self, rows: list[Row], group_cols: list[AstNode]) -> list[list[Row]]:
        groups: dict[tuple, list[Row]] = {}
        for row in rows:
            key = tuple(_sort_key(self._value(c, row)) for c in group_cols)
            groups.setdefault(key, []).append(row)
        return list(groups.values())


def _compare(op: str, lhs, rhs) -> bool:
    if isinstance(lhs, bool) != isinstance(rhs, bool) and (
        isinstance(lhs, bool) or isinstance(rhs, bool)
    ):
        return False
    if op == "LIKE":
        return _like(str(lhs), str(rhs))
    if isinstance(lhs, str) != isinstance(rhs, str):
        return False
    if op == "=":
        return lhs == rhs
    if op == "<>":
        return lhs != rhs
    if op == "<":
        return lhs < rhs
    if op == ">":
        return lhs > rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">=":
        return lhs >= rhs
    raise ExecutionError(f"unsupported operator {op!r}")


def _like(value: str, pattern: str) -> bool:
    regex = re.escape(pattern).replace("%", ".*").replace("_", ".")
    return re.fullmatch(regex, value, flags=re.IGNORECASE) is not None


def _sort_key(value):
    # None sorts first; booleans before numbers; strings compared as-is
    if value is None:
        return (0, "")
    if isinstance(value, bool):
        return (1, str(value))
    if isinstance(value, (int, float)):
        return (2, value)
    return (3, str(value))


def _item_label(item: AstNode) -> str:
    if item.kind == "Aggregate":
        return f"{item.lexeme}({item.children[0].lexeme})"
    return item.lexeme


def execute_query(db: SandboxDatabase, sql: SqlQuery) -> ResultTable:
    """Execute a parsed query; raises ExecutionError on semantic problems."""
    return _Executor(db, sql).run()
