"""Schema model: validation, serialization, lookup."""

import json

import pytest

from sqlannotate.schema import (
    Column,
    Schema,
    SchemaError,
    Table,
    load_schema,
    save_schema,
    schema_from_dict,
    schema_to_dict,
    validate_schema,
)


def make_schema():
    return Schema(
        tables=(
            Table(
                name="Departments",
                columns=(
                    Column("department_id", "int", is_primary_key=True),
                    Column("name", "text"),
                ),
            ),
            Table(
                name="Employees",
                columns=(
                    Column("employee_id", "int", is_primary_key=True),
                    Column(
                        "department_id",
                        "int",
                        reference=("Departments", "department_id"),
                    ),
                ),
            ),
        )
    )


def test_valid_schema_has_no_violations():
    assert validate_schema(make_schema()) == []


def test_case_insensitive_lookup():
    schema = make_schema()
    assert schema.table("employees") is schema.table("Employees")
    assert schema.table("Employees").column("DEPARTMENT_ID").name == "department_id"


def test_empty_schema_violation():
    violations = validate_schema(Schema(tables=()))
    assert any("no tables" in v.message for v in violations)


def test_dangling_reference_flagged():
    schema = Schema(
        tables=(
            Table(
                "T",
                (
                    Column("id", "int", is_primary_key=True),
                    Column("x", "int", reference=("Missing", "id")),
                ),
            ),
        )
    )
    violations = validate_schema(schema)
    assert violations and "T.x" in violations[0].path


def test_reference_type_mismatch_flagged():
    schema = Schema(
        tables=(
            Table("A", (Column("id", "int", is_primary_key=True),)),
            Table(
                "B",
                (
                    Column("id", "int", is_primary_key=True),
                    Column("a_id", "text", reference=("A", "id")),
                ),
            ),
        )
    )
    assert any("type" in v.message for v in validate_schema(schema))


def test_reference_must_target_primary_key():
    schema = Schema(
        tables=(
            Table("A", (Column("id", "int", is_primary_key=True), Column("x", "int"))),
            Table(
                "B",
                (
                    Column("id", "int", is_primary_key=True),
                    Column("a_x", "int", reference=("A", "x")),
                ),
            ),
        )
    )
    assert any("primary key" in v.message for v in validate_schema(schema))


def test_duplicate_names_flagged():
    schema = Schema(
        tables=(
            Table("T", (Column("id", "int", is_primary_key=True),)),
            Table("t", (Column("id", "int", is_primary_key=True),)),
        )
    )
    assert any("duplicate" in v.message.lower() for v in validate_schema(schema))


def test_round_trip_serialization():
    schema = make_schema()
    doc = save_schema(schema)
    again = load_schema(doc)
    assert again == schema
    assert save_schema(again) == doc


def test_unknown_field_rejected():
    doc = schema_to_dict(make_schema())
    doc["tables"][0]["bogus"] = 1
    with pytest.raises(SchemaError):
        schema_from_dict(doc)


def test_unknown_data_type_rejected():
    doc = schema_to_dict(make_schema())
    doc["tables"][0]["columns"][0]["type"] = "varchar"
    with pytest.raises(SchemaError):
        schema_from_dict(doc)


def test_malformed_json_rejected():
    with pytest.raises(SchemaError):
        load_schema("{not json")


def test_bundled_demo_schema_is_valid():
    from importlib import resources

    schema = load_schema(
        (resources.files("sqlannotate") / "data" / "demo_schema.json").read_text()
    )
    assert validate_schema(schema) == []
    assert len(schema.tables) == 5
    types = {c.data_type for t in schema.tables for c in t.columns}
    assert types == {
        "int", "float", "double", "decimal", "text", "boolean", "timestamp", "enum",
    }
