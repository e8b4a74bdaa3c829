"""HTTP+JSON surface of the labeling service.

POST /procedures {patient_ref} -> {id}
POST /procedures/{id}/events {kind, station?, t?} -> {t_assigned}
POST /procedures/{id}/finalize -> ProcedureRecord
GET  /procedures/{id}/export?format=csv|json
GET  /procedures[?state=live|finalized] -> summaries

Errors are JSON {code, message}: validation 400/422, unknown id 404, state
conflicts 409. An optional shared token (env EUSML_TOKEN) is checked against
the X-EUSML-Token header.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .service import LabelingError, SessionStore, ValidationFailure

DATA_DIR_ENV = "EUSML_DATA_DIR"
TOKEN_ENV = "EUSML_TOKEN"
TOKEN_HEADER = "X-EUSML-Token"


class CreateProcedureBody(BaseModel):
    patient_ref: str


class EventBody(BaseModel):
    kind: str
    station: str | None = None
    t: float | None = None


def create_app(store: SessionStore | None = None, token: str | None = None) -> FastAPI:
    if store is None:
        root = os.environ.get(DATA_DIR_ENV)
        if not root:
            raise ValidationFailure(f"set {DATA_DIR_ENV} or pass a store explicitly")
        store = SessionStore(Path(root))
    if token is None:
        token = os.environ.get(TOKEN_ENV) or None

    app = FastAPI(title="eusml labeling service")
    app.state.store = store

    @app.exception_handler(LabelingError)
    async def labeling_error_handler(request: Request, exc: LabelingError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"code": exc.code, "message": str(exc)},
        )

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if token is not None and request.headers.get(TOKEN_HEADER) != token:
            return JSONResponse(
                status_code=401,
                content={"code": "unauthorized", "message": "missing or bad token"},
            )
        return await call_next(request)

    @app.post("/procedures", status_code=201)
    def create_procedure(body: CreateProcedureBody):
        return {"id": store.create_procedure(body.patient_ref)}

    @app.post("/procedures/{session_id}/events")
    def record_event(session_id: str, body: EventBody):
        t = store.record_event(session_id, kind=body.kind, station=body.station, t=body.t)
        return {"t_assigned": t}

    @app.post("/procedures/{session_id}/finalize")
    def finalize(session_id: str):
        return store.finalize(session_id).to_dict()

    @app.get("/procedures/{session_id}/export")
    def export(session_id: str, format: str = "csv"):
        if format == "csv":
            return Response(content=store.export_csv(session_id), media_type="text/csv")
        if format == "json":
            return Response(
                content=store.export_json(session_id), media_type="application/json"
            )
        raise ValidationFailure(f"unknown export format {format!r}")

    @app.get("/procedures/{session_id}")
    def get_record(session_id: str):
        return store.get_record(session_id).to_dict()

    @app.get("/procedures")
    def list_procedures(state: str | None = None):
        return store.list_procedures(state)

    return app
