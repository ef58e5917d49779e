"""In-memory executor: oracle comparison for single-table queries plus
hand-checked joins, aggregates, NULL handling, and type errors."""

import random

import pytest

from sqlannotate.execution import ExecutionError, execute_query
from sqlannotate.population import SandboxDatabase
from sqlannotate.schema import Column, Schema, Table
from sqlannotate.sqlast import parse

SCHEMA = Schema(
    tables=(
        Table(
            "Departments",
            (
                Column("department_id", "int", is_primary_key=True),
                Column("name", "text"),
            ),
        ),
        Table(
            "Employees",
            (
                Column("employee_id", "int", is_primary_key=True),
                Column("name", "text"),
                Column(
                    "department_id", "int", reference=("Departments", "department_id")
                ),
                Column("salary", "int"),
                Column("is_active", "boolean"),
            ),
        ),
    )
)

DEPARTMENTS = [
    {"department_id": 1, "name": "eng"},
    {"department_id": 2, "name": "sales"},
    {"department_id": 3, "name": "hr"},
]

EMPLOYEES = [
    {"employee_id": 1, "name": "Ada", "department_id": 1, "salary": 90, "is_active": True},
    {"employee_id": 2, "name": "Bob", "department_id": 1, "salary": 60, "is_active": False},
    {"employee_id": 3, "name": "Cy", "department_id": 2, "salary": 60, "is_active": True},
    {"employee_id": 4, "name": "Dee", "department_id": 2, "salary": 30, "is_active": True},
    {"employee_id": 5, "name": "Eve", "department_id": 3, "salary": 75, "is_active": False},
]

DB = SandboxDatabase(SCHEMA, {"Departments": DEPARTMENTS, "Employees": EMPLOYEES})


def run(sql: str, db: SandboxDatabase = DB):
    result = execute_query(db, parse(sql))
    return [list(row) for row in result.rows]


# -- oracle for single-table SELECT ... WHERE ... -------------------------

@pytest.mark.parametrize(
    "condition,predicate",
    [
        ("Employees.salary > 60", lambda r: r["salary"] > 60),
        ("Employees.salary >= 60", lambda r: r["salary"] >= 60),
        ("Employees.salary < 60", lambda r: r["salary"] < 60),
        ("Employees.salary <> 60", lambda r: r["salary"] != 60),
        ("Employees.name = 'Ada'", lambda r: r["name"] == "Ada"),
        ("Employees.is_active = TRUE", lambda r: r["is_active"]),
        ("Employees.name LIKE '%e%'", lambda r: "e" in r["name"].lower()),
        (
            "Employees.salary > 50 AND Employees.is_active = TRUE",
            lambda r: r["salary"] > 50 and r["is_active"],
        ),
        (
            "Employees.salary < 40 OR Employees.salary > 80",
            lambda r: r["salary"] < 40 or r["salary"] > 80,
        ),
        (
            "Employees.department_id IN (1, 3)",
            lambda r: r["department_id"] in (1, 3),
        ),
    ],
)
def test_where_matches_python_oracle(condition, predicate):
    got = run(f"SELECT Employees.employee_id FROM Employees WHERE {condition}")
    assert got == [[r["employee_id"]] for r in EMPLOYEES if predicate(r)]


def test_random_single_table_queries_match_oracle():
    rng = random.Random(0)
    ops = {
        "=": lambda a, b: a == b,
        "<>": lambda a, b: a != b,
        "<": lambda a, b: a < b,
        ">": lambda a, b: a > b,
        "<=": lambda a, b: a <= b,
        ">=": lambda a, b: a >= b,
    }
    for _ in range(200):
        op = rng.choice(list(ops))
        value = rng.randrange(0, 100)
        got = run(
            f"SELECT Employees.employee_id FROM Employees "
            f"WHERE Employees.salary {op} {value}"
        )
        assert got == [
            [r["employee_id"]] for r in EMPLOYEES if ops[op](r["salary"], value)
        ]


# -- joins ------------------------------------------------------------------

def test_inner_join():
    got = run(
        "SELECT Employees.name, Departments.name FROM Employees "
        "INNER JOIN Departments ON Employees.department_id = Departments.department_id"
    )
    assert got == [
        ["Ada", "eng"],
        ["Bob", "eng"],
        ["Cy", "sales"],
        ["Dee", "sales"],
        ["Eve", "hr"],
    ]


def test_left_join_pads_unmatched_left_rows():
    db = SandboxDatabase(
        SCHEMA,
        {
            "Departments": DEPARTMENTS,
            "Employees": EMPLOYEES
            + [{"employee_id": 6, "name": "Zed", "department_id": 99, "salary": 10, "is_active": True}],
        },
    )
    got = run(
        "SELECT Employees.name, Departments.name FROM Employees "
        "LEFT JOIN Departments ON Employees.department_id = Departments.department_id",
        db,
    )
    assert ["Zed", None] in got


def test_full_join_pads_both_sides():
    got = run(
        "SELECT Employees.name, Departments.name FROM Employees "
        "FULL JOIN Departments ON Employees.salary = Departments.department_id"
    )
    # no salary equals a department id, so every row is padded on one side
    assert all(None in row for row in got)
    assert len(got) == len(EMPLOYEES) + len(DEPARTMENTS)


# -- aggregates / grouping ----------------------------------------------------

def test_aggregates_without_grouping():
    assert run("SELECT COUNT(Employees.employee_id) FROM Employees") == [[5]]
    assert run("SELECT SUM(Employees.salary) FROM Employees") == [[315]]
    assert run("SELECT AVG(Employees.salary) FROM Employees") == [[63.0]]
    assert run("SELECT MIN(Employees.salary) FROM Employees") == [[30]]
    assert run("SELECT MAX(Employees.salary) FROM Employees") == [[90]]


def test_group_by_with_count():
    got = run(
        "SELECT Employees.department_id, COUNT(Employees.employee_id) "
        "FROM Employees GROUP BY Employees.department_id"
    )
    assert sorted(got) == [[1, 2], [2, 2], [3, 1]]


def test_aggregate_skips_null_padding_from_outer_join():
    got = run(
        "SELECT COUNT(Departments.department_id) FROM Employees "
        "FULL JOIN Departments ON Employees.salary = Departments.department_id"
    )
    assert got == [[3]]


def test_null_never_satisfies_comparisons():
    got = run(
        "SELECT Employees.name FROM Employees "
        "LEFT JOIN Departments ON Employees.salary = Departments.department_id "
        "WHERE Departments.department_id > 0"
    )
    assert got == []


# -- ordering / distinct ------------------------------------------------------

def test_order_by_desc():
    got = run("SELECT Employees.salary FROM Employees ORDER BY Employees.salary DESC")
    assert [r[0] for r in got] == [90, 75, 60, 60, 30]


def test_distinct_preserves_first_occurrence_order():
    got = run("SELECT DISTINCT Employees.salary FROM Employees")
    assert [r[0] for r in got] == [90, 60, 30, 75]


def test_like_is_case_insensitive_with_wildcards():
    assert run(
        "SELECT Employees.name FROM Employees WHERE Employees.name LIKE 'a__'"
    ) == [["Ada"]]
    assert run(
        "SELECT Employees.name FROM Employees WHERE Employees.name LIKE '%E%'"
    ) == [["Dee"], ["Eve"]]


def test_like_accepts_numeric_pattern_on_text_column():
    db = SandboxDatabase(
        SCHEMA,
        {
            "Departments": DEPARTMENTS,
            "Employees": [dict(EMPLOYEES[0], name="agent 47")] + EMPLOYEES[1:],
        },
    )
    got = run(
        "SELECT Employees.name FROM Employees WHERE Employees.name LIKE '%47%'", db
    )
    assert got == [["agent 47"]]
    got = run("SELECT Employees.name FROM Employees WHERE Employees.name LIKE 47", db)
    assert got == []  # pattern '47' must match the whole value


def test_outer_join_after_empty_intermediate_pads_all_left_columns():
    # An INNER join that matches nothing empties the left side; a following
    # RIGHT/FULL join must still pad every accumulated left column with NULL.
    got = run(
        "SELECT Departments.name, Employees.name FROM Departments "
        "INNER JOIN Employees ON Employees.department_id = Departments.department_id "
        "AND Employees.salary > 999 "
        "RIGHT JOIN Employees ON Employees.employee_id = 1"
    )
    assert got  # unmatched right rows survive
    assert all(row[0] is None for row in got)


# -- semantic errors ----------------------------------------------------------

@pytest.mark.parametrize(
    "bad",
    [
        "SELECT Missing.a FROM Missing",
        "SELECT Employees.bogus FROM Employees",
        "SELECT Employees.name FROM Employees WHERE Employees.salary = 'x'",
        "SELECT Employees.name FROM Employees WHERE Employees.name > 5",
        "SELECT Employees.name FROM Employees WHERE Employees.salary LIKE '%1%'",
        "SELECT SUM(Employees.name) FROM Employees",
        "SELECT Departments.name FROM Employees",
    ],
)
def test_semantic_errors(bad):
    with pytest.raises(ExecutionError):
        run(bad)
