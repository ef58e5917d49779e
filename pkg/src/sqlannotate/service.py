"""HTTP API over the annotation pipeline for the browser workbench.

One service instance hosts one annotation session: a schema, its sandbox
database, the sampling grammar, the store, and a provider. Mutating the
schema or database is refused (409) while an unattended annotation job is
running.
"""

from __future__ import annotations

import random
import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import PlainTextResponse

from .alignment import (
    AlignmentError,
    align,
    alignment_from_dict,
    detect_misalignments,
    inject_step,
    remove_spans,
)
from .diversity import AnalysisError
from .execution import ExecutionError, execute_query
from .explain import ExplainError, explain, schema_digest
from .grammar import Grammar, default_grammar
from .llm import Provider, ProviderError, generate_question, score_equivalence
from .pipeline import (
    AutoAnnotateJob,
    Session,
    analyze_store,
    auto_annotate,
)
from .population import PopulationConfig, PopulationError, SandboxDatabase, populate
from .sampler import SamplerConfig, SamplerError, sample_query
from .schema import Schema, SchemaError, schema_from_dict, schema_to_dict, validate_schema
from .sqlast import SqlSyntaxError, parse
from .store import Store, StoreError, pair_from_dict
from .ted import RetrieverConfig, retrieve_similar


class ServiceState:
    def __init__(
        self,
        store: Store,
        provider: Provider,
        schema: Schema | None = None,
        grammar: Grammar | None = None,
    ):
        self.schema = schema
        self.db: SandboxDatabase | None = None
        self.grammar = grammar or default_grammar()
        self.store = store
        self.provider = provider
        self.rng = random.Random(0)
        self.job: AutoAnnotateJob | None = None
        self.job_thread: threading.Thread | None = None
        self.lock = threading.Lock()

    def job_running(self) -> bool:
        return self.job is not None and self.job.snapshot()["state"] == "running"

    def session(self, sampler_config: SamplerConfig = SamplerConfig()) -> Session:
        return Session(
            schema=self.require_schema(),
            db=self.require_db(),
            grammar=self.grammar,
            store=self.store,
            provider=self.provider,
            sampler_config=sampler_config,
        )

    def require_schema(self) -> Schema:
        if self.schema is None:
            raise HTTPException(404, "no schema loaded")
        return self.schema

    def require_db(self) -> SandboxDatabase:
        if self.db is None:
            raise HTTPException(409, "database not populated")
        return self.db


def _field(body: dict, name: str, kind=str):
    if name not in body:
        raise HTTPException(400, f"missing field {name!r}")
    value = body[name]
    if kind is not None and not isinstance(value, kind):
        raise HTTPException(400, f"field {name!r} has the wrong type")
    return value


def _parse_sql(text: str):
    try:
        return parse(text)
    except SqlSyntaxError as exc:
        raise HTTPException(400, f"sql does not parse: {exc}")


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="sqlannotate", docs_url=None, redoc_url=None)

    async def body_of(request: Request) -> dict:
        try:
            doc = await request.json()
        except Exception:
            raise HTTPException(400, "request body is not valid JSON")
        if not isinstance(doc, dict):
            raise HTTPException(400, "request body must be a JSON object")
        return doc

    def guard_mutation():
        if state.job_running():
            raise HTTPException(409, "an auto-annotate job is running")

    # -- schema ----------------------------------------------------------

    @app.post("/schema")
    async def post_schema(request: Request):
        guard_mutation()
        doc = await body_of(request)
        try:
            schema = schema_from_dict(doc)
        except SchemaError as exc:
            raise HTTPException(400, str(exc))
        violations = validate_schema(schema)
        if violations:
            raise HTTPException(
                400,
                detail={"violations": [{"path": v.path, "message": v.message} for v in violations]},
            )
        with state.lock:
            state.schema = schema
            state.db = None
        return {"ok": True}

    @app.get("/schema")
    async def get_schema():
        return schema_to_dict(state.require_schema())

    @app.post("/schema/validate")
    async def post_schema_validate(request: Request):
        doc = await body_of(request)
        try:
            schema = schema_from_dict(doc)
        except SchemaError as exc:
            return {"violations": [{"path": "", "message": str(exc)}]}
        violations = validate_schema(schema)
        return {"violations": [{"path": v.path, "message": v.message} for v in violations]}

    # -- records ----------------------------------------------------------

    @app.post("/populate")
    async def post_populate(request: Request):
        guard_mutation()
        body = await body_of(request)
        schema = state.require_schema()
        counts = body.get("counts", {})
        if not isinstance(counts, dict):
            raise HTTPException(400, "field 'counts' must be an object")
        config = PopulationConfig(
            record_counts=counts,
            rng_seed=int(body.get("seed", 0)),
            reuse_probability=float(body.get("reuse_probability", 0.3)),
        )
        try:
            db = populate(schema, config)
        except PopulationError as exc:
            raise HTTPException(400, str(exc))
        with state.lock:
            state.db = db
        return {"tables": {t: len(rows) for t, rows in db.rows.items()}}

    @app.get("/records")
    async def get_records(table: str):
        db = state.require_db()
        try:
            rows = db.table_rows(table)
        except KeyError:
            raise HTTPException(404, f"unknown table {table!r}")
        return {"table": table, "rows": rows}

    # -- sampling / execution ---------------------------------------------

    @app.post("/sample-sql")
    async def post_sample(request: Request):
        body = await body_of(request)
        schema, db = state.require_schema(), state.require_db()
        rng = random.Random(body["seed"]) if "seed" in body else state.rng
        try:
            sql = sample_query(state.grammar, schema, db, SamplerConfig(), rng)
        except SamplerError as exc:
            raise HTTPException(409, str(exc))
        return {"sql": sql.text}

    @app.post("/execute")
    async def post_execute(request: Request):
        body = await body_of(request)
        sql = _parse_sql(_field(body, "sql"))
        try:
            result = execute_query(state.require_db(), sql)
        except ExecutionError as exc:
            raise HTTPException(400, str(exc))
        return {"columns": result.columns, "rows": result.rows}

    # -- explanation / translation ------------------------------------------

    @app.post("/explain")
    async def post_explain(request: Request):
        body = await body_of(request)
        sql = _parse_sql(_field(body, "sql"))
        try:
            return explain(sql, state.require_schema()).to_dict()
        except ExplainError as exc:
            raise HTTPException(400, str(exc))

    @app.get("/similar")
    async def get_similar(sql: str):
        query = _parse_sql(sql)
        pool = []
        for sql_text, question in state.store.pool_snapshot():
            try:
                pool.append((parse(sql_text), question))
            except SqlSyntaxError:
                continue
        examples = retrieve_similar(query, pool, RetrieverConfig())
        return {
            "examples": [
                {"sql": e.sql.text, "question": e.question, "score": e.score}
                for e in examples
            ]
        }

    @app.post("/translate")
    async def post_translate(request: Request):
        body = await body_of(request)
        sql = _parse_sql(_field(body, "sql"))
        schema = state.require_schema()
        steps = explain(sql, schema)
        pool = []
        for sql_text, question in state.store.pool_snapshot():
            try:
                pool.append((parse(sql_text), question))
            except SqlSyntaxError:
                continue
        examples = retrieve_similar(sql, pool, RetrieverConfig())
        try:
            question = generate_question(
                sql.text,
                schema_digest(schema),
                "\n".join(f"{s.index}. {s.text}" for s in steps.steps),
                [(e.sql.text, e.question) for e in examples],
                state.provider,
            )
        except ProviderError as exc:
            raise HTTPException(502, str(exc))
        return {
            "question": question,
            "steps": steps.to_dict()["steps"],
            "examples": [
                {"sql": e.sql.text, "question": e.question, "score": e.score}
                for e in examples
            ],
        }

    # -- alignment ----------------------------------------------------------

    @app.post("/align")
    async def post_align(request: Request):
        body = await body_of(request)
        sql = _parse_sql(_field(body, "sql"))
        question = _field(body, "question")
        schema = state.require_schema()
        steps = explain(sql, schema)
        try:
            amap = align(question, steps, sql, state.provider, schema)
        except (AlignmentError, ProviderError) as exc:
            raise HTTPException(502, str(exc))
        report = detect_misalignments(amap, steps, question)
        return {
            "alignment": amap.to_dict(),
            "missing_steps": [{"index": i, "text": t} for i, t in report.missing_steps],
            "redundant_spans": [
                {"range": list(r), "text": t} for r, t in report.redundant_spans
            ],
        }

    @app.post("/inject")
    async def post_inject(request: Request):
        body = await body_of(request)
        sql = _parse_sql(_field(body, "sql"))
        question = _field(body, "question")
        step_index = _field(body, "step_index", int)
        schema = state.require_schema()
        steps = explain(sql, schema)
        by_index = {s.index: s for s in steps.steps}
        if step_index not in by_index:
            raise HTTPException(400, f"no step with index {step_index}")
        try:
            amap = align(question, steps, sql, state.provider, schema)
            revised, new_map = inject_step(
                question, by_index[step_index], sql, schema, state.provider, steps, amap
            )
        except (AlignmentError, ProviderError) as exc:
            raise HTTPException(409, str(exc))
        return {"question": revised, "alignment": new_map.to_dict()}

    @app.post("/remove-spans")
    async def post_remove_spans(request: Request):
        body = await body_of(request)
        question = _field(body, "question")
        ranges = _field(body, "ranges", list)
        try:
            spans = [(int(r[0]), int(r[1])) for r in ranges]
        except (TypeError, ValueError, IndexError):
            raise HTTPException(400, "field 'ranges' must be a list of [start, end]")
        try:
            return {"question": remove_spans(question, spans)}
        except AlignmentError as exc:
            raise HTTPException(400, str(exc))

    @app.post("/score")
    async def post_score(request: Request):
        body = await body_of(request)
        sql = _parse_sql(_field(body, "sql"))
        question = _field(body, "question")
        try:
            report, score = score_equivalence(
                sql.text,
                question,
                schema_digest(state.require_schema()),
                state.provider,
                rounds=int(body.get("rounds", 3)),
            )
        except ProviderError as exc:
            raise HTTPException(502, str(exc))
        return {"score": score, "report": report}

    # -- dataset ----------------------------------------------------------

    @app.post("/dataset/accept")
    async def post_accept(request: Request):
        guard_mutation()
        body = await body_of(request)
        try:
            pair = pair_from_dict(body)
            return {"id": state.store.accept(pair, override=bool(body.get("override")))}
        except (KeyError, StoreError) as exc:
            raise HTTPException(400, str(exc))

    @app.post("/dataset/reject")
    async def post_reject(request: Request):
        guard_mutation()
        body = await body_of(request)
        try:
            pair = pair_from_dict(body)
            return {"id": state.store.reject(pair)}
        except (KeyError, StoreError) as exc:
            raise HTTPException(400, str(exc))

    @app.get("/dataset/export")
    async def get_export(status: str | None = None):
        statuses = set(status.split(",")) if status else None
        return PlainTextResponse(
            state.store.export_dataset(statuses), media_type="application/json"
        )

    @app.post("/dataset/import")
    async def post_import(request: Request):
        guard_mutation()
        raw = (await request.body()).decode("utf-8")
        try:
            loaded, errors = state.store.import_dataset(raw)
        except StoreError as exc:
            raise HTTPException(400, str(exc))
        return {"loaded": loaded, "errors": errors}

    # -- analysis ----------------------------------------------------------

    @app.get("/analysis/distributions")
    async def get_distributions():
        try:
            return analyze_store(state.store, statuses={"accepted"})
        except AnalysisError as exc:
            raise HTTPException(409, str(exc))

    # -- automated annotation ------------------------------------------------

    @app.post("/auto-annotate")
    async def post_auto_annotate(request: Request):
        body = await body_of(request)
        if state.job_running():
            raise HTTPException(409, "an auto-annotate job is already running")
        count = _field(body, "count", int)
        if count < 1:
            raise HTTPException(400, "field 'count' must be >= 1")
        threshold = int(body.get("threshold", 80))
        session = state.session()
        job = AutoAnnotateJob(requested=count, accept_threshold=threshold)
        thread = threading.Thread(
            target=auto_annotate, args=(job, session, state.rng), daemon=True
        )
        with state.lock:
            state.job = job
            state.job_thread = thread
        thread.start()
        return job.snapshot()

    @app.get("/auto-annotate/status")
    async def get_auto_annotate_status():
        if state.job is None:
            return {"state": "idle"}
        return state.job.snapshot()

    return app
