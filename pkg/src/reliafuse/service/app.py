"""REST API over the adjudication queue store.

Endpoints: GET /queue, GET /items/{id}, POST /items/{id}/annotations,
GET /report. Errors return {code, message} with a matching status class.
When an expert roster is configured, submissions authenticate via the
X-Expert-Token header and the record's annotator identity comes from the
roster. A frontend build directory, when present, is served at /.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..annotation.records import AnnotationRecord, RecordError
from .store import QueueStore, StoreError

_ERROR_STATUS = {
    "unknown-item": 404,
    "already-final": 409,
    "not-in-queue": 409,
    "duplicate-item": 409,
    "item-mismatch": 422,
    "stage-error": 409,
    "bad-record": 422,
    "unauthorized": 401,
}


class SubmissionBody(BaseModel):
    annotator_id: str = ""
    emotions: list[str] = Field(default_factory=list)
    personality: str
    confidence: float
    rationale: str = ""
    consensus: bool = False


def create_app(
    store: QueueStore,
    roster_path: str | Path | None = None,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="adjudication-service")
    roster: dict[str, str] = {}
    if roster_path:
        roster = json.loads(Path(roster_path).read_text())

    @app.exception_handler(StoreError)
    async def store_error_handler(_request: Request, exc: StoreError):
        return JSONResponse(
            status_code=_ERROR_STATUS.get(exc.code, 400),
            content={"code": exc.code, "message": exc.message},
        )

    @app.get("/queue")
    def get_queue(page: int = 1, page_size: int = 20, label: str | None = None):
        return store.list_queue(page=page, page_size=page_size, label=label)

    @app.get("/items/{item_id}")
    def get_item(item_id: str):
        return store.get(item_id).to_dict()

    @app.post("/items/{item_id}/annotations")
    def post_annotation(
        item_id: str,
        body: SubmissionBody,
        x_expert_token: str | None = Header(default=None),
    ):
        annotator_id = body.annotator_id
        if roster:
            if not x_expert_token or x_expert_token not in roster:
                raise StoreError("unauthorized", "unknown or missing expert token")
            annotator_id = roster[x_expert_token]
        if not annotator_id:
            raise StoreError("bad-record", "annotator_id is required")
        try:
            record = AnnotationRecord(
                item_id=item_id,
                annotator_id=annotator_id,
                emotions=tuple(body.emotions),
                personality=body.personality,
                confidence=body.confidence,
                rationale=body.rationale,
                is_consensus=body.consensus,
            )
        except RecordError as exc:
            raise StoreError("bad-record", str(exc)) from exc
        return store.submit(item_id, record)

    @app.get("/report")
    def get_report():
        report = store.report()
        if report["total_items"] == 0:
            return JSONResponse(
                status_code=404,
                content={"code": "no-data", "message": "store holds no items"},
            )
        return report

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")
    return app
