"""Persistent store for annotated pairs plus the retrieval pool.

Persistence is an append-only JSONL journal: one record per accept,
reject, or import row. Replaying the journal on startup reconstructs the
exact store state, which keeps restarts trivially durable without a
database server.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .sqlast import parse

STATUSES = ("accepted", "rejected", "pending")
PROVENANCES = ("interactive", "automated")


class StoreError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotatedPair:
    id: str
    sql: str
    question: str
    schema_version: str = ""
    steps: list = field(default_factory=list)
    alignment: dict = field(default_factory=dict)
    confidence: int | None = None
    status: str = "pending"
    created_at: str = ""
    provenance: str = "interactive"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "sql": self.sql,
            "question": self.question,
            "schema_version": self.schema_version,
            "steps": self.steps,
            "alignment": self.alignment,
            "confidence": self.confidence,
            "status": self.status,
            "created_at": self.created_at,
            "provenance": self.provenance,
        }


def pair_from_dict(doc: dict) -> AnnotatedPair:
    return AnnotatedPair(
        id=str(doc["id"]),
        sql=str(doc["sql"]),
        question=str(doc["question"]),
        schema_version=str(doc.get("schema_version", "")),
        steps=doc.get("steps") or [],
        alignment=doc.get("alignment") or {},
        confidence=doc.get("confidence"),
        status=doc.get("status", "pending"),
        provenance=doc.get("provenance", "interactive"),
        created_at=str(doc.get("created_at", "")),
    )


def bundled_pool() -> list[tuple[str, str]]:
    """The read-only seed examples shipped with the package."""
    doc = json.loads(
        (resources.files("sqlannotate") / "data" / "pool.json").read_text()
    )
    return [(row["sql"], row["question"]) for row in doc["pairs"]]


class Store:
    """Single-writer store of annotated pairs backed by a JSONL journal."""

    def __init__(self, journal_path: str | Path | None = None, bundled=None):
        self.journal_path = Path(journal_path) if journal_path else None
        self.bundled: tuple[tuple[str, str], ...] = tuple(
            bundled if bundled is not None else bundled_pool()
        )
        self.pairs: dict[str, AnnotatedPair] = {}
        if self.journal_path is not None and self.journal_path.exists():
            self._replay()

    # -- persistence -------------------------------------------------------

    def _replay(self) -> None:
        with open(self.journal_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                pair = pair_from_dict(record["pair"])
                self.pairs[pair.id] = pair

    def _journal(self, op: str, pair: AnnotatedPair) -> None:
        if self.journal_path is None:
            return
        self.journal_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"op": op, "pair": pair.to_dict()}, sort_keys=True))
            fh.write("\n")

    # -- mutations ---------------------------------------------------------

    def _validate(self, pair: AnnotatedPair, override: bool) -> None:
        if pair.id in self.pairs:
            raise StoreError(f"id conflict: {pair.id!r} already stored")
        try:
            parse(pair.sql)
        except ValueError as exc:
            raise StoreError(f"unparseable sql: {exc}") from exc
        missing = pair.alignment.get("missing") if pair.alignment else None
        if missing and not override:
            raise StoreError(
                f"alignment reports missing steps {missing}; pass override to accept"
            )

    def accept(self, pair: AnnotatedPair, override: bool = False) -> str:
        if pair.status != "pending":
            raise StoreError(f"only pending pairs can be accepted, got {pair.status!r}")
        self._validate(pair, override)
        stored = replace(pair, status="accepted")
        self.pairs[stored.id] = stored
        self._journal("accept", stored)
        return stored.id

    def reject(self, pair: AnnotatedPair) -> str:
        if pair.status != "pending":
            raise StoreError(f"only pending pairs can be rejected, got {pair.status!r}")
        if pair.id in self.pairs:
            raise StoreError(f"id conflict: {pair.id!r} already stored")
        stored = replace(pair, status="rejected")
        self.pairs[stored.id] = stored
        self._journal("reject", stored)
        return stored.id

    # -- dataset documents ---------------------------------------------------

    def export_dataset(self, statuses: set[str] | None = None) -> str:
        chosen = [
            p
            for p in self.pairs.values()
            if statuses is None or p.status in statuses
        ]
        chosen.sort(key=lambda p: (p.created_at, p.id))
        doc = {"pairs": [p.to_dict() for p in chosen]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def import_dataset(self, document: str) -> tuple[int, list[dict]]:
        try:
            doc = json.loads(document)
            rows = doc["pairs"]
            if not isinstance(rows, list):
                raise TypeError("pairs is not a list")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise StoreError(f"malformed dataset document: {exc}") from exc
        loaded, errors = 0, []
        for i, raw in enumerate(rows):
            try:
                pair = pair_from_dict(raw)
            except (KeyError, TypeError) as exc:
                errors.append({"row": i, "error": f"malformed row: {exc}"})
                continue
            if pair.id in self.pairs:
                errors.append({"row": i, "error": f"duplicate id {pair.id!r}"})
                continue
            try:
                parse(pair.sql)
            except ValueError as exc:
                errors.append({"row": i, "error": f"unparseable sql: {exc}"})
                continue
            if pair.status not in STATUSES:
                errors.append({"row": i, "error": f"unknown status {pair.status!r}"})
                continue
            self.pairs[pair.id] = pair
            self._journal("import", pair)
            loaded += 1
        return loaded, errors

    # -- retrieval pool ------------------------------------------------------

    def pool_snapshot(self) -> tuple[tuple[str, str], ...]:
        """Point-in-time (sql, question) pool: bundled plus accepted pairs."""
        accepted = sorted(
            (p for p in self.pairs.values() if p.status == "accepted"),
            key=lambda p: (p.created_at, p.id),
        )
        return self.bundled + tuple((p.sql, p.question) for p in accepted)

    def compact(self) -> None:
        """Rewrite the journal to one record per live pair."""
        if self.journal_path is None:
            return
        tmp = self.journal_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for pair in sorted(self.pairs.values(), key=lambda p: (p.created_at, p.id)):
                fh.write(json.dumps({"op": "import", "pair": pair.to_dict()}, sort_keys=True))
                fh.write("\n")
        tmp.replace(self.journal_path)
