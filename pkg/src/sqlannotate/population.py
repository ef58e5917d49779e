"""Sandbox database population with type-aware random records.

Values are placeholders: readable, type-valid, deterministic per seed.
Foreign keys always reuse values from the referenced column; other columns
repeat an existing value with a configurable probability (default 0.3).
"""

from __future__ import annotations

import datetime
import json
import random
import uuid
from dataclasses import dataclass, field

from .schema import Column, Schema

# Fresh-value ranges; placeholders only, not realistic distributions.
INT_RANGE = (0, 10000)
FLOAT_RANGE = (0.0, 10000.0)
TIMESTAMP_RANGE = (datetime.datetime(2000, 1, 1), datetime.datetime(2030, 1, 1))

# Columns whose names match these keys get word-like values instead of
# prefixed UUIDs, so sample data reads naturally.
_TEXT_LEXICON = {
    "name": ["Alice", "Bob", "Carol", "David", "Emma", "Frank", "Grace",
             "Henry", "Ivy", "Jack", "Karen", "Leo", "Mia", "Noah", "Olivia",
             "Peter", "Quinn", "Rosa", "Sam", "Tina"],
    "city": ["Austin", "Boston", "Chicago", "Denver", "Seattle", "Portland",
             "Atlanta", "Phoenix", "Dallas", "Miami"],
    "email": None,  # built from a name + domain below
    "status": ["active", "inactive", "pending", "archived"],
}
_EMAIL_DOMAINS = ["example.com", "mail.test", "corp.local"]


class PopulationError(ValueError):
    pass


@dataclass(frozen=True)
class PopulationConfig:
    record_counts: dict[str, int] = field(default_factory=dict)
    reuse_probability: float = 0.3
    reuse_overrides: dict[str, float] = field(default_factory=dict)  # "Table.column" -> p
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.reuse_probability <= 1.0:
            raise ValueError("reuse_probability must be in [0,1]")
        for count in self.record_counts.values():
            if count < 1:
                raise ValueError("record_counts must be positive")


@dataclass(frozen=True)
class SandboxDatabase:
    schema: Schema
    rows: dict[str, list[dict[str, object]]]

    def table_rows(self, table: str) -> list[dict[str, object]]:
        for name, rows in self.rows.items():
            if name.lower() == table.lower():
                return rows
        raise KeyError(table)

    def column_values(self, table: str, column: str) -> list[object]:
        rows = self.table_rows(table)
        tab = self.schema.table(table)
        col = tab.column(column) if tab else None
        if col is None:
            raise KeyError(f"{table}.{column}")
        return [row[col.name] for row in rows]


def _fresh_value(column: Column, rng: random.Random) -> object:
    dt = column.data_type
    if dt == "boolean":
        return rng.choice([True, False])
    if dt == "int":
        return rng.randint(*INT_RANGE)
    if dt in ("float", "double"):
        return rng.uniform(*FLOAT_RANGE)
    if dt == "decimal":
        return round(rng.uniform(*FLOAT_RANGE), 2)
    if dt == "timestamp":
        lo, hi = TIMESTAMP_RANGE
        seconds = rng.randrange(int((hi - lo).total_seconds()))
        return (lo + datetime.timedelta(seconds=seconds)).strftime("%Y-%m-%dT%H:%M:%S")
    if dt == "enum":
        return rng.choice(list(column.enum_values))
    # text
    key = column.name.lower()
    for lexkey, words in _TEXT_LEXICON.items():
        if lexkey in key:
            if lexkey == "email":
                name = rng.choice(_TEXT_LEXICON["name"]).lower()
                return f"{name}{rng.randint(1, 99)}@{rng.choice(_EMAIL_DOMAINS)}"
            return rng.choice(words)
    return f"{column.name}_{uuid.UUID(int=rng.getrandbits(128), version=4)}"


def generate_value(
    column: Column,
    existing: list[object],
    rng: random.Random,
    reuse_probability: float = 0.3,
) -> object:
    """One type-valid value; repeats from `existing` with the given probability."""
    if column.reference is not None:
        if not existing:
            raise PopulationError(
                f"no values to reference for foreign key column {column.name!r}"
            )
        return rng.choice(existing)
    if existing and rng.random() < reuse_probability:
        return rng.choice(existing)
    return _fresh_value(column, rng)


def _dependency_order(schema: Schema) -> list[str]:
    """Topological order of the FK graph; raises on a multi-table cycle."""
    deps: dict[str, set[str]] = {}
    for tab in schema.tables:
        needed = set()
        for col in tab.columns:
            if col.reference and col.reference[0].lower() != tab.name.lower():
                needed.add(col.reference[0].lower())
        deps[tab.name.lower()] = needed
    order: list[str] = []
    done: set[str] = set()
    names = {t.name.lower(): t.name for t in schema.tables}
    pending = list(deps)
    while pending:
        progress = False
        for low in list(pending):
            if deps[low] <= done:
                order.append(names[low])
                done.add(low)
                pending.remove(low)
                progress = True
        if not progress:
            cycle = ", ".join(names[p] for p in pending)
            raise PopulationError(f"cyclic foreign-key dependency among tables: {cycle}")
    return order


def populate(schema: Schema, config: PopulationConfig) -> SandboxDatabase:
    """Fill every table with type-valid rows honoring PK uniqueness and FKs."""
    rng = random.Random(config.rng_seed)
    rows: dict[str, list[dict[str, object]]] = {}
    for table_name in _dependency_order(schema):
        tab = schema.table(table_name)
        count = config.record_counts.get(tab.name, config.record_counts.get("*", 10))
        if count < 1:
            raise PopulationError(f"record count for {tab.name!r} must be positive")
        for col in tab.columns:
            if col.reference and col.reference[0].lower() != tab.name.lower():
                ref_rows = rows.get(schema.table(col.reference[0]).name, [])
                if not ref_rows:
                    raise PopulationError(
                        f"foreign key {tab.name}.{col.name} references empty table "
                        f"{col.reference[0]}"
                    )
        table_rows: list[dict[str, object]] = []
        pools: dict[str, list[object]] = {c.name: [] for c in tab.columns}
        for _ in range(count):
            record: dict[str, object] = {}
            # non-reference columns first, so a self-referencing FK can
            # target this very row's key on the first row
            for col in tab.columns:
                if col.reference is not None:
                    continue
                reuse = config.reuse_overrides.get(
                    f"{tab.name}.{col.name}", config.reuse_probability
                )
                if col.is_primary_key:
                    value = _fresh_value(col, rng)
                    attempts = 0
                    taken = set(pools[col.name])
                    while value in taken:
                        value = _fresh_value(col, rng)
                        attempts += 1
                        if attempts > 10000:
                            raise PopulationError(
                                f"cannot generate {count} unique primary keys for "
                                f"{tab.name}.{col.name}"
                            )
                else:
                    value = generate_value(col, pools[col.name], rng, reuse)
                record[col.name] = value
            for col in tab.columns:
                if col.reference is None:
                    continue
                reuse = config.reuse_overrides.get(
                    f"{tab.name}.{col.name}", config.reuse_probability
                )
                ref_tab = schema.table(col.reference[0]).name
                ref_col = schema.table(ref_tab).column(col.reference[1]).name
                if ref_tab.lower() == tab.name.lower():
                    source = pools[ref_col] + [record[ref_col]]
                else:
                    source = [r[ref_col] for r in rows[ref_tab]]
                record[col.name] = generate_value(col, source, rng, reuse)
            for col in tab.columns:
                pools[col.name].append(record[col.name])
            table_rows.append(record)
        rows[tab.name] = table_rows
    # preserve schema table order in the output mapping
    ordered = {tab.name: rows[tab.name] for tab in schema.tables}
    return SandboxDatabase(schema=schema, rows=ordered)


def save_records(db: SandboxDatabase) -> str:
    """Records document: {"Table": [{col: value, ...}, ...]}."""
    return json.dumps(db.rows, indent=2) + "\n"


def load_records(schema: Schema, document: str) -> SandboxDatabase:
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise PopulationError(f"malformed records JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise PopulationError("records document must be an object")
    rows: dict[str, list[dict[str, object]]] = {}
    for table_name, table_rows in raw.items():
        tab = schema.table(table_name)
        if tab is None:
            raise PopulationError(f"records for unknown table {table_name!r}")
        if not isinstance(table_rows, list):
            raise PopulationError(f"rows for {table_name!r} must be a list")
        normalized = []
        for row in table_rows:
            record = {}
            for col in tab.columns:
                if col.name not in row:
                    raise PopulationError(f"row in {table_name!r} missing column {col.name!r}")
                record[col.name] = row[col.name]
            normalized.append(record)
        rows[tab.name] = normalized
    for tab in schema.tables:
        rows.setdefault(tab.name, [])
    return SandboxDatabase(schema=schema, rows=rows)


def check_integrity(db: SandboxDatabase) -> list[str]:
    """Exhaustive referential-integrity / type / PK-uniqueness scan."""
    problems: list[str] = []
    for tab in db.schema.tables:
        rows = db.rows.get(tab.name, [])
        for col in tab.columns:
            values = [r[col.name] for r in rows]
            for v in values:
                if not _type_valid(col, v):
                    problems.append(f"{tab.name}.{col.name}: bad value {v!r}")
            if col.is_primary_key and len(set(values)) != len(values):
                problems.append(f"{tab.name}.{col.name}: duplicate primary keys")
            if col.reference is not None:
                ref_values = set(db.column_values(*col.reference))
                for v in values:
                    if v not in ref_values:
                        problems.append(
                            f"{tab.name}.{col.name}: dangling reference {v!r}"
                        )
    return problems


def _type_valid(col: Column, value: object) -> bool:
    dt = col.data_type
    if dt == "boolean":
        return isinstance(value, bool)
    if dt == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if dt in ("float", "double", "decimal"):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if dt == "timestamp":
        if not isinstance(value, str):
            return False
        try:
            datetime.datetime.strptime(value, "%Y-%m-%dT%H:%M:%S")
            return True
        except ValueError:
            return False
    if dt == "enum":
        return value in col.enum_values
    return isinstance(value, str)
