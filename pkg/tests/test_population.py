"""Synthetic record generation: types, keys, references, determinism."""

from importlib import resources

import pytest

from sqlannotate.population import (
    PopulationConfig,
    PopulationError,
    check_integrity,
    load_records,
    populate,
    save_records,
)
from sqlannotate.schema import Column, Schema, Table, load_schema


def demo_schema():
    return load_schema(
        (resources.files("sqlannotate") / "data" / "demo_schema.json").read_text()
    )


def test_populated_database_passes_integrity_scan():
    db = populate(demo_schema(), PopulationConfig(record_counts={"*": 50}, rng_seed=3))
    assert check_integrity(db) == []
    for table in demo_schema().tables:
        assert len(db.table_rows(table.name)) == 50


def test_primary_keys_unique():
    db = populate(demo_schema(), PopulationConfig(record_counts={"*": 200}, rng_seed=1))
    ids = db.column_values("Employees", "employee_id")
    assert len(set(ids)) == len(ids)


def test_foreign_keys_resolve():
    db = populate(demo_schema(), PopulationConfig(record_counts={"*": 80}, rng_seed=2))
    departments = set(db.column_values("Departments", "department_id"))
    for value in db.column_values("Employees", "department_id"):
        assert value in departments


def test_seeded_population_is_deterministic():
    config = PopulationConfig(record_counts={"*": 30}, rng_seed=42)
    a = populate(demo_schema(), config)
    b = populate(demo_schema(), config)
    assert save_records(a) == save_records(b)


def test_per_table_counts_override_default():
    db = populate(
        demo_schema(),
        PopulationConfig(record_counts={"*": 10, "Employees": 25}, rng_seed=0),
    )
    assert len(db.table_rows("Employees")) == 25
    assert len(db.table_rows("Offices")) == 10


def test_records_round_trip():
    schema = demo_schema()
    db = populate(schema, PopulationConfig(record_counts={"*": 12}, rng_seed=5))
    doc = save_records(db)
    again = load_records(schema, doc)
    assert again.rows == db.rows
    assert check_integrity(again) == []


def test_reference_cycle_rejected():
    schema = Schema(
        tables=(
            Table(
                "A",
                (
                    Column("id", "int", is_primary_key=True),
                    Column("b_id", "int", reference=("B", "id")),
                ),
            ),
            Table(
                "B",
                (
                    Column("id", "int", is_primary_key=True),
                    Column("a_id", "int", reference=("A", "id")),
                ),
            ),
        )
    )
    with pytest.raises(PopulationError):
        populate(schema, PopulationConfig(record_counts={"*": 5}))


def test_self_referential_foreign_key_allowed():
    schema = Schema(
        tables=(
            Table(
                "Employees",
                (
                    Column("id", "int", is_primary_key=True),
                    Column("manager_id", "int", reference=("Employees", "id")),
                ),
            ),
        )
    )
    db = populate(schema, PopulationConfig(record_counts={"*": 20}, rng_seed=9))
    assert check_integrity(db) == []


def test_value_reuse_probability_zero_gives_unique_nonreference_values():
    schema = Schema(
        tables=(Table("T", (Column("id", "int", is_primary_key=True),)),)
    )
    db = populate(
        schema,
        PopulationConfig(record_counts={"*": 100}, reuse_probability=0.0, rng_seed=4),
    )
    ids = db.column_values("T", "id")
    assert len(set(ids)) == 100


def test_enum_values_come_from_declared_set():
    schema = demo_schema()
    level = schema.table("Employees").column("level")
    db = populate(schema, PopulationConfig(record_counts={"*": 40}, rng_seed=6))
    assert set(db.column_values("Employees", "level")) <= set(level.enum_values)
