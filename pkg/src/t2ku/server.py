"""HTTP layer over the yard state machine.

Thin by design: every handler authenticates, converts JSON, and calls one
YardStore method. Engine calls carry a bearer token; everything else is
open (deploy behind a proxy for anything stronger).
"""

from __future__ import annotations

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .bridge import PatternRule, validate_rule
from .errors import T2kuError, YardError
from .infer import Verdict
from .t2math import tokenize
from .tptp import MangleTable, to_fof
from .yard import YardStore

_STATUS = {
    "E_AUTH": 401,
    "E_NO_LEASE": 409,
    "E_WRONG_STATE": 409,
    "E_BAD_CHOICE": 400,
    "E_BAD_PROOF": 422,
    "E_PARSE": 400,
    "E_UNTRANSLATED": 422,
    "E_UNRESOLVED_AMBIGUITY": 409,
    "E_EXAMPLE_NO_MATCH": 422,
    "E_EDIT_TIME_AMBIGUITY": 422,
    "E_PATTERN_UNSUPPORTED": 422,
    "E_TEMPLATE_SYNTAX": 422,
}


class ProblemBody(BaseModel):
    source: str


class ChoicesBody(BaseModel):
    choices: dict[str, int]


class EngineBody(BaseModel):
    name: str
    capabilities: list[str] = ["native"]


class ResultBody(BaseModel):
    verdict: dict


class RuleBody(BaseModel):
    rule: dict


def create_app(yard: YardStore) -> FastAPI:
    app = FastAPI(title="t2ku engine yard")

    @app.exception_handler(T2kuError)
    async def on_error(request: Request, exc: T2kuError):
        status = _STATUS.get(exc.code, 400)
        if exc.code == "E_WRONG_STATE" and "no problem" in exc.message:
            status = 404
        return JSONResponse(status_code=status, content=exc.to_dict())

    @app.post("/problems", status_code=201)
    def create_problem(body: ProblemBody):
        problem = yard.create_problem(body.source)
        out = {"id": problem.id, "state": problem.state}
        if problem.ambiguities:
            out["ambiguities"] = yard.problem_view(problem.id)["ambiguities"]
        return out

    @app.get("/problems/{problem_id}")
    def get_problem(problem_id: str):
        return yard.problem_view(problem_id)

    @app.post("/problems/{problem_id}/disambiguate")
    def disambiguate(problem_id: str, body: ChoicesBody):
        choices = {int(k): v for k, v in body.choices.items()}
        problem = yard.disambiguate(problem_id, choices)
        return {"id": problem.id, "state": problem.state}

    @app.post("/engines", status_code=201)
    def register_engine(body: EngineBody):
        engine = yard.register_engine(body.name, set(body.capabilities))
        return {"id": engine.id, "token": engine.token,
                "capabilities": sorted(engine.capabilities)}

    @app.get("/engines/{engine_id}/tasks")
    def poll(engine_id: str, authorization: str = Header(default="")):
        token = authorization.removeprefix("Bearer ").strip()
        task = yard.poll_task(engine_id, token)
        if task is None:
            return Response(status_code=204)
        return {
            "task_id": task.id,
            "problem_id": task.problem_id,
            "payload_kind": task.payload_kind,
            "payload": task.payload,
        }

    @app.post("/tasks/{task_id}/result")
    def submit(task_id: str, body: ResultBody, authorization: str = Header(default="")):
        token = authorization.removeprefix("Bearer ").strip()
        engine = yard.engine_by_token(token)
        if engine is None:
            raise YardError("E_AUTH", "unknown engine token")
        verdict = Verdict.from_dict(body.verdict)
        status = yard.submit_result(engine.id, engine.token, task_id, verdict)
        return {"status": status}

    @app.get("/kb/export")
    def kb_export(format: str = Query(default="native")):
        if format == "tptp":
            table = MangleTable()
            lines = ["% t2ku knowledge base"]
            for seq, (cid, clause) in enumerate(yard.store.kb.clauses.items(), start=1):
                lines.append(to_fof(clause, table, role="axiom", seq=seq).render())
            return PlainTextResponse("\n".join(lines) + "\n")
        return PlainTextResponse(yard.store.export_clauses())

    @app.post("/rules", status_code=201)
    def add_rule(body: RuleBody):
        rule = PatternRule.from_dict(body.rule)
        report = validate_rule(list(yard.store.rules), rule)
        if not report.accepted:
            return JSONResponse(status_code=422, content=report.to_dict())
        yard.store.add_rule(rule, validate=False)  # just validated above
        return {"accepted": True, "rule_id": rule.id, "report": report.to_dict()}

    @app.get("/rules")
    def list_rules():
        return {"rules": [rule.to_dict() for rule in yard.store.rules]}

    @app.get("/symbols")
    def symbols(q: str = Query(default=""), limit: int = Query(default=20)):
        return {"symbols": yard.store.kb.registry.search(q, limit)}

    @app.post("/tokenize")
    def classify(body: ProblemBody):
        spans = tokenize(body.source)
        return {
            "spans": [
                {"start": s.byte_range[0], "end": s.byte_range[1], "kind": s.kind}
                for s in spans
            ]
        }

    @app.post("/maintenance/resolve-stalled")
    def run_resolve_stalled():
        return {"actions": yard.resolve_stalled()}

    return app
