"""HTTP gateway over a single engine instance.

Every route delegates to the engine under its own lock, so the service adds
no state of its own beyond the singleton. Ingest is synchronous: the
response tells the caller whether the record was new and where the impact
report lives. Records whose impact analysis finds no root are archived as
advisories and reported with 422.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..engine import DATA_DIR_ENV, Engine, ModifyFailsVerification
from ..events import IngestError
from ..cases import AlreadyDecided, UnknownCase


class DecisionIn(BaseModel):
    verdict: str
    reviewer: str = "api"
    modified_units: Optional[list] = None
    decided_at: Optional[float] = None


def load_or_create_engine(data_dir: Optional[str] = None) -> Engine:
    root = Path(data_dir or os.environ.get(DATA_DIR_ENV, ".depcal"))
    if (root / "state.json").exists():
        return Engine.load(str(root))
    return Engine()


def create_app(engine: Optional[Engine] = None, data_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="depcal", version="1.0.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.engine = engine if engine is not None else load_or_create_engine(data_dir)

    def _engine() -> Engine:
        return app.state.engine

    @app.post("/events", status_code=201)
    def post_event(record: dict = Body(...)):
        eng = _engine()
        observed_at = record.get("observed_at")
        try:
            result = eng.submit_event(record, observed_at=observed_at)
        except IngestError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if result["archived_advisory"]:
            raise HTTPException(
                status_code=422,
                detail={
                    "reason": "no root node for event; archived as advisory",
                    "event_id": result["event_id"],
                    "advisory": eng.advisories.get(result["event_id"]),
                },
            )
        if not result["created"]:
            # replayed record: same canonical content, nothing re-processed
            return JSONResponse(status_code=200, content=result)
        return result

    @app.get("/reports/{event_id}")
    def get_report(event_id: str):
        eng = _engine()
        report = eng.reports.get(event_id)
        if report is None:
            raise HTTPException(status_code=404, detail=f"no report for event {event_id!r}")
        return report.to_dict()

    @app.get("/cases/{case_id}")
    def get_case(case_id: str):
        eng = _engine()
        if not eng.cases.has(case_id):
            raise HTTPException(status_code=404, detail=f"no case {case_id!r}")
        return eng.cases.get(case_id).to_dict()

    @app.get("/cases")
    def list_cases(event_id: Optional[str] = None, status: Optional[str] = None):
        eng = _engine()
        cases = eng.cases.for_event(event_id) if event_id else eng.cases.all()
        if status:
            cases = [c for c in cases if c.status.value == status]
        return [c.to_dict() for c in cases]

    @app.get("/review-queue")
    def review_queue(
        project: Optional[str] = None,
        event_id: Optional[str] = None,
        include_decided: bool = False,
    ):
        eng = _engine()
        tasks = eng.review_queue(
            include_decided=include_decided, project=project, event_id=event_id
        )
        return [t.to_dict() for t in tasks]

    @app.post("/review/{case_id}/decision")
    def post_decision(case_id: str, decision: DecisionIn):
        eng = _engine()
        try:
            task = eng.submit_review_decision(
                case_id,
                verdict=decision.verdict,
                reviewer=decision.reviewer,
                modified_units=decision.modified_units,
                decided_at=decision.decided_at,
            )
        except UnknownCase:
            raise HTTPException(status_code=404, detail=f"no pending review for {case_id!r}")
        except AlreadyDecided:
            raise HTTPException(status_code=409, detail=f"case {case_id!r} already decided")
        except ModifyFailsVerification as exc:
            raise HTTPException(
                status_code=422,
                detail={"reason": "modified patch fails verification", "findings": exc.findings},
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return task.to_dict()

    @app.get("/metrics")
    def metrics():
        return _engine().metrics()

    @app.get("/policy")
    def policy():
        eng = _engine()
        return {"policy": eng.policy.to_dict(), "versions": eng.policy_versions}

    @app.get("/advisories")
    def advisories():
        return dict(sorted(_engine().advisories.items()))

    return app
