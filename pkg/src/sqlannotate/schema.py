"""Database schema model: tables, typed columns, keys, references.

The schema is the ground truth every other component (population, sampling,
explanation) is checked against. Values are immutable after construction;
edits produce a new Schema.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

DATA_TYPES = ("text", "boolean", "int", "timestamp", "float", "double", "decimal", "enum")
NUMERIC_TYPES = ("int", "float", "double", "decimal")

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class SchemaError(ValueError):
    """Raised when a schema document cannot be parsed or fails validation."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass(frozen=True)
class Column:
    name: str
    data_type: str
    is_primary_key: bool = False
    reference: tuple[str, str] | None = None  # (table, column)
    enum_values: tuple[str, ...] = ()
    description: str | None = None


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]
    description: str | None = None

    def column(self, name: str) -> Column | None:
        low = name.lower()
        for col in self.columns:
            if col.name.lower() == low:
                return col
        return None


@dataclass(frozen=True)
class Schema:
    tables: tuple[Table, ...]
    version: str = ""

    def table(self, name: str) -> Table | None:
        low = name.lower()
        for tab in self.tables:
            if tab.name.lower() == low:
                return tab
        return None

    def resolve(self, table: str, column: str) -> Column | None:
        tab = self.table(table)
        return tab.column(column) if tab else None


def validate_schema(schema: Schema) -> list[Violation]:
    """Return every invariant violation; an empty list means valid."""
    violations: list[Violation] = []
    if not schema.tables:
        violations.append(Violation("schema", "schema has no tables"))

    seen_tables: dict[str, str] = {}
    for tab in schema.tables:
        tpath = f"tables.{tab.name}"
        if not _IDENT_RE.match(tab.name):
            violations.append(Violation(tpath, f"invalid table identifier {tab.name!r}"))
        low = tab.name.lower()
        if low in seen_tables:
            violations.append(Violation(tpath, f"duplicate table name {tab.name!r}"))
        seen_tables[low] = tab.name

        if not tab.columns:
            violations.append(Violation(tpath, "table has no columns"))
        seen_cols: set[str] = set()
        for col in tab.columns:
            cpath = f"{tpath}.{col.name}"
            if not _IDENT_RE.match(col.name):
                violations.append(Violation(cpath, f"invalid column identifier {col.name!r}"))
            if col.name.lower() in seen_cols:
                violations.append(Violation(cpath, f"duplicate column name {col.name!r}"))
            seen_cols.add(col.name.lower())
            if col.data_type not in DATA_TYPES:
                violations.append(Violation(cpath, f"unsupported data type {col.data_type!r}"))
            if col.data_type == "enum" and not col.enum_values:
                violations.append(Violation(cpath, "enum column requires enum_values"))
            if col.data_type != "enum" and col.enum_values:
                violations.append(Violation(cpath, "enum_values only allowed on enum columns"))

    # Reference checks are a second pass so dangling targets are reported
    # even when the target table itself has violations.
    for tab in schema.tables:
        for col in tab.columns:
            if col.reference is None:
                continue
            cpath = f"tables.{tab.name}.{col.name}"
            ref_table, ref_column = col.reference
            target_tab = schema.table(ref_table)
            if target_tab is None:
                violations.append(
                    Violation(cpath, f"reference to nonexistent table {ref_table!r}")
                )
                continue
            target = target_tab.column(ref_column)
            if target is None:
                violations.append(
                    Violation(
                        cpath,
                        f"reference to nonexistent column {ref_table}.{ref_column}",
                    )
                )
                continue
            if not target.is_primary_key:
                violations.append(
                    Violation(
                        cpath,
                        f"referenced column {ref_table}.{ref_column} is not a primary key",
                    )
                )
            if target.data_type != col.data_type:
                violations.append(
                    Violation(
                        cpath,
                        f"type mismatch: {col.data_type} references {target.data_type} "
                        f"column {ref_table}.{ref_column}",
                    )
                )
    return violations


_COLUMN_KEYS = {"name", "type", "primary_key", "references", "enum_values", "description"}
_TABLE_KEYS = {"name", "description", "columns"}


def _parse_column(raw: dict, path: str) -> Column:
    if not isinstance(raw, dict):
        raise SchemaError("column must be an object", path)
    unknown = set(raw) - _COLUMN_KEYS
    if unknown:
        raise SchemaError(f"unknown column fields {sorted(unknown)}", path)
    if "name" not in raw or "type" not in raw:
        raise SchemaError("column requires 'name' and 'type'", path)
    ref = None
    if raw.get("references") is not None:
        r = raw["references"]
        if not isinstance(r, dict) or set(r) != {"table", "column"}:
            raise SchemaError("references must be {'table':..,'column':..}", path)
        ref = (str(r["table"]), str(r["column"]))
    return Column(
        name=str(raw["name"]),
        data_type=str(raw["type"]),
        is_primary_key=bool(raw.get("primary_key", False)),
        reference=ref,
        enum_values=tuple(str(v) for v in raw.get("enum_values") or ()),
        description=raw.get("description"),
    )


def schema_from_dict(doc: dict) -> Schema:
    """Build a Schema from the canonical document shape, then validate it."""
    if not isinstance(doc, dict):
        raise SchemaError("document must be an object")
    unknown = set(doc) - {"tables", "version"}
    if unknown:
        raise SchemaError(f"unknown top-level fields {sorted(unknown)}")
    raw_tables = doc.get("tables")
    if not isinstance(raw_tables, list):
        raise SchemaError("'tables' must be a list")
    tables = []
    for i, rt in enumerate(raw_tables):
        tpath = f"tables[{i}]"
        if not isinstance(rt, dict):
            raise SchemaError("table must be an object", tpath)
        unknown = set(rt) - _TABLE_KEYS
        if unknown:
            raise SchemaError(f"unknown table fields {sorted(unknown)}", tpath)
        if "name" not in rt or "columns" not in rt:
            raise SchemaError("table requires 'name' and 'columns'", tpath)
        columns = tuple(
            _parse_column(rc, f"{tpath}.columns[{j}]") for j, rc in enumerate(rt["columns"])
        )
        tables.append(Table(name=str(rt["name"]), columns=columns, description=rt.get("description")))
    schema = Schema(tables=tuple(tables), version=str(doc.get("version", "")))
    violations = validate_schema(schema)
    if violations:
        first = violations[0]
        raise SchemaError(first.message, first.path)
    return schema


def load_schema(document: str) -> Schema:
    """Parse a schema JSON document and validate it."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    return schema_from_dict(doc)


def schema_to_dict(schema: Schema) -> dict:
    tables = []
    for tab in schema.tables:
        cols = []
        for col in tab.columns:
            c: dict = {"name": col.name, "type": col.data_type}
            if col.is_primary_key:
                c["primary_key"] = True
            if col.reference is not None:
                c["references"] = {"table": col.reference[0], "column": col.reference[1]}
            if col.enum_values:
                c["enum_values"] = list(col.enum_values)
            if col.description is not None:
                c["description"] = col.description
            cols.append(c)
        t: dict = {"name": tab.name}
        if tab.description is not None:
            t["description"] = tab.description
        t["columns"] = cols
        tables.append(t)
    doc: dict = {"tables": tables}
    if schema.version:
        doc["version"] = schema.version
    return doc


def save_schema(schema: Schema) -> str:
    """Serialize to the canonical JSON document; deterministic byte-for-byte."""
    return json.dumps(schema_to_dict(schema), indent=2, sort_keys=False) + "\n"
