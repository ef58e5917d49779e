"""End-to-end annotation pipeline and the unattended batch mode.

A Session binds together one schema, its sandbox database, a grammar, the
store, and a provider. run_pipeline_once drives a single candidate through
sample → explain → retrieve → translate → align/repair → score, and
auto_annotate loops it until the requested number of pairs is accepted or
a 3x attempt budget runs out.
"""

from __future__ import annotations

import random
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .alignment import auto_repair
from .diversity import analyze_dataset
from .execution import execute_query
from .explain import Explanation, explain, schema_digest
from .grammar import Grammar, default_grammar
from .llm import Provider, generate_question, score_equivalence
from .population import PopulationConfig, SandboxDatabase, populate
from .sampler import SamplerConfig, sample_query
from .schema import Schema
from .sqlast import SqlQuery, parse
from .store import AnnotatedPair, Store
from .ted import RetrievedExample, RetrieverConfig, retrieve_similar

DEFAULT_ACCEPT_THRESHOLD = 80
ATTEMPT_BUDGET_FACTOR = 3


class PipelineError(RuntimeError):
    def __init__(self, stage: str, reason: str):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason


@dataclass
class Candidate:
    sql: SqlQuery
    steps: Explanation
    question: str = ""
    alignment: dict | None = None
    score: int | None = None
    report: str = ""
    examples: list[RetrievedExample] = field(default_factory=list)


@dataclass
class Session:
    schema: Schema
    db: SandboxDatabase
    grammar: Grammar
    store: Store
    provider: Provider
    sampler_config: SamplerConfig = SamplerConfig()
    retriever_config: RetrieverConfig = RetrieverConfig()
    scoring_rounds: int = 3
    candidate: Candidate | None = None

    @classmethod
    def create(
        cls,
        schema: Schema,
        store: Store,
        provider: Provider,
        grammar: Grammar | None = None,
        population: PopulationConfig | None = None,
        sampler_config: SamplerConfig = SamplerConfig(),
    ) -> "Session":
        db = populate(schema, population or PopulationConfig())
        return cls(
            schema=schema,
            db=db,
            grammar=grammar or default_grammar(),
            store=store,
            provider=provider,
            sampler_config=sampler_config,
        )


def _pool_queries(store: Store) -> list[tuple[SqlQuery, str]]:
    pool = []
    for sql_text, question in store.pool_snapshot():
        try:
            pool.append((parse(sql_text), question))
        except ValueError:
            continue
    return pool


def run_pipeline_once(
    session: Session, rng: random.Random, provenance: str = "automated"
) -> AnnotatedPair:
    """One candidate through the whole pipeline; returns a pending pair."""

    def stage(name: str, fn):
        try:
            return fn()
        except Exception as exc:
            raise PipelineError(name, str(exc)) from exc

    sql = stage(
        "sample_query",
        lambda: sample_query(
            session.grammar, session.schema, session.db, session.sampler_config, rng
        ),
    )
    stage("execute", lambda: execute_query(session.db, sql))
    steps = stage("explain", lambda: explain(sql, session.schema))
    examples = stage(
        "retrieve_similar",
        lambda: retrieve_similar(sql, _pool_queries(session.store), session.retriever_config),
    )
    question = stage(
        "generate_question",
        lambda: generate_question(
            sql.text,
            schema_digest(session.schema),
            "\n".join(f"{s.index}. {s.text}" for s in steps.steps),
            [(e.sql.text, e.question) for e in examples],
            session.provider,
        ),
    )
    repaired, amap = stage(
        "align",
        lambda: auto_repair(question, steps, sql, session.schema, session.provider),
    )
    report, score = stage(
        "score_equivalence",
        lambda: score_equivalence(
            sql.text,
            repaired,
            schema_digest(session.schema),
            session.provider,
            rounds=session.scoring_rounds,
        ),
    )
    session.candidate = Candidate(
        sql=sql,
        steps=steps,
        question=repaired,
        alignment=amap.to_dict(),
        score=score,
        report=report,
        examples=examples,
    )
    return AnnotatedPair(
        id=str(uuid.UUID(int=rng.getrandbits(128), version=4)),
        sql=sql.text,
        question=repaired,
        schema_version=session.schema.version,
        steps=steps.to_dict()["steps"],
        alignment=amap.to_dict(),
        confidence=score,
        status="pending",
        created_at=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f"),
        provenance=provenance,
    )


@dataclass
class AutoAnnotateJob:
    requested: int
    accept_threshold: int = DEFAULT_ACCEPT_THRESHOLD
    produced: int = 0
    attempts: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)
    state: str = "running"  # running -> done | failed
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "requested": self.requested,
                "accept_threshold": self.accept_threshold,
                "produced": self.produced,
                "attempts": self.attempts,
                "failures": [list(f) for f in self.failures],
                "state": self.state,
            }


def auto_annotate(job: AutoAnnotateJob, session: Session, rng: random.Random) -> AutoAnnotateJob:
    """Unattended loop: keep annotating until quota or budget exhaustion."""
    if job.requested < 1:
        raise ValueError("requested must be >= 1")
    budget = job.requested * ATTEMPT_BUDGET_FACTOR
    while True:
        with job._lock:
            if job.produced >= job.requested:
                job.state = "done"
                return job
            if job.attempts >= budget:
                job.state = "failed"
                return job
            job.attempts += 1
        try:
            pair = run_pipeline_once(session, rng)
        except PipelineError as exc:
            with job._lock:
                job.failures.append((exc.stage, exc.reason))
            continue
        if pair.confidence is not None and pair.confidence >= job.accept_threshold:
            try:
                session.store.accept(pair, override=True)
            except Exception as exc:
                with job._lock:
                    job.failures.append(("store", str(exc)))
                continue
            with job._lock:
                job.produced += 1
        else:
            with job._lock:
                job.failures.append(
                    ("score_threshold", f"confidence {pair.confidence} below {job.accept_threshold}")
                )


def analyze_store(store: Store, statuses: set[str] | None = None) -> dict:
    pairs = [
        p.to_dict()
        for p in sorted(store.pairs.values(), key=lambda p: (p.created_at, p.id))
        if statuses is None or p.status in statuses
    ]
    return analyze_dataset(pairs)
