"""HTTP API over the control plane.

Thin resource-oriented layer: endpoints validate request shapes, call
plane commands, and wrap results in sequence-stamped envelopes. All
errors share one schema: {code, message, field}.
"""

from __future__ import annotations

import logging
import os

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import (
    AuthorizationError,
    ConflictError,
    NotFoundError,
    PlaneError,
    TransitionError,
    ValidationError,
)
from .health import FaultKind, FaultSpec
from .metrics import format_summary
from .plane import ControlPlane

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR = {
    NotFoundError: 404,
    ConflictError: 409,
    TransitionError: 409,
    AuthorizationError: 403,
    ValidationError: 400,
}


class CreateWorkspaceBody(BaseModel):
    owner: str
    template_name: str


class JobBody(BaseModel):
    duration: float
    util_percent: float = Field(ge=0, le=100)
    exit_code: int = 0


class PipelineBody(BaseModel):
    project: str
    seed: int | None = None
    fail_at: str | None = None


class FaultBody(BaseModel):
    target: str
    kind: str
    probability: float
    seed: int


class AdvanceBody(BaseModel):
    seconds: float


class ModeBody(BaseModel):
    mode: str


class AssistedBody(BaseModel):
    assisted: bool = True


def create_app(plane: ControlPlane, token: str | None = None) -> FastAPI:
    app = FastAPI(title="wsplane", version="0.1.0")
    # the dashboard may be served from a different origin than the API
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    expected = token if token is not None else os.environ.get("WSPLANE_TOKEN")

    def require_token(authorization: str | None = Header(default=None)) -> None:
        if expected and authorization != f"Bearer {expected}":
            raise HTTPException(status_code=401, detail="missing or invalid token")

    guarded = [Depends(require_token)]

    @app.exception_handler(PlaneError)
    async def plane_error_handler(request: Request, exc: PlaneError):
        status = 400
        for cls, code in _STATUS_BY_ERROR.items():
            if isinstance(exc, cls):
                status = code
                break
        return JSONResponse(status_code=status, content=exc.to_dict())

    def envelope(**data) -> dict:
        return {"sequence": plane.sequence, **data}

    # ---- cluster resources

    @app.get("/nodes", dependencies=guarded)
    def list_nodes():
        return envelope(items=[n.to_dict() for n in plane.nodes.values()])

    @app.get("/images", dependencies=guarded)
    def list_images():
        return envelope(items=[i.to_dict() for i in plane.images.values()])

    @app.get("/templates", dependencies=guarded)
    def list_templates():
        return envelope(items=[t.to_dict() for t in plane.templates.values()])

    @app.get("/compat/{image_tag}/{node_id}", dependencies=guarded)
    def compatibility(image_tag: str, node_id: str):
        return envelope(report=plane.check_compatibility(image_tag, node_id).to_dict())

    # ---- workspaces

    def ws_view(workspace_id: str) -> dict:
        ws = plane.workspaces[workspace_id]
        view = ws.to_dict()
        view["decision"] = plane.last_decision.get(workspace_id)
        return view

    @app.get("/workspaces", dependencies=guarded)
    def list_workspaces():
        return envelope(items=[ws_view(w) for w in plane.workspaces])

    @app.post("/workspaces", status_code=201, dependencies=guarded)
    def create_workspace(body: CreateWorkspaceBody, x_actor: str | None = Header(default=None)):
        ws = plane.create_workspace(body.owner, body.template_name, actor=x_actor)
        return envelope(workspace=ws_view(ws.workspace_id))

    @app.get("/workspaces/{workspace_id}", dependencies=guarded)
    def get_workspace(workspace_id: str):
        if workspace_id not in plane.workspaces:
            raise NotFoundError("unknown_workspace", f"unknown workspace {workspace_id}", "workspace_id")
        return envelope(workspace=ws_view(workspace_id))

    @app.post("/workspaces/{workspace_id}/start", dependencies=guarded)
    def start_workspace(workspace_id: str, x_actor: str | None = Header(default=None)):
        plane.restart(workspace_id, actor=x_actor)
        return envelope(workspace=ws_view(workspace_id))

    @app.post("/workspaces/{workspace_id}/stop", dependencies=guarded)
    def stop_workspace(workspace_id: str, x_actor: str | None = Header(default=None)):
        plane.stop(workspace_id, actor=x_actor)
        return envelope(workspace=ws_view(workspace_id))

    @app.post("/workspaces/{workspace_id}/rebuild", dependencies=guarded)
    def rebuild_workspace(workspace_id: str, x_actor: str | None = Header(default=None)):
        plane.rebuild(workspace_id, actor=x_actor)
        return envelope(workspace=ws_view(workspace_id))

    @app.delete("/workspaces/{workspace_id}", dependencies=guarded)
    def delete_workspace(workspace_id: str, x_actor: str | None = Header(default=None)):
        plane.delete(workspace_id, actor=x_actor)
        return envelope(workspace=ws_view(workspace_id))

    @app.post("/workspaces/{workspace_id}/jobs", status_code=201, dependencies=guarded)
    def submit_job(workspace_id: str, body: JobBody):
        job_id = plane.run_job(workspace_id, body.duration, body.util_percent, body.exit_code)
        return envelope(job_id=job_id)

    @app.get("/workspaces/{workspace_id}/health", dependencies=guarded)
    def workspace_health(workspace_id: str):
        if workspace_id not in plane.workspaces:
            raise NotFoundError("unknown_workspace", f"unknown workspace {workspace_id}", "workspace_id")
        report = plane.latest_health.get(workspace_id)
        return envelope(report=report.to_dict() if report else None)

    @app.get("/workspaces/{workspace_id}/latency", dependencies=guarded)
    def workspace_latency(workspace_id: str):
        return envelope(record=plane.deployment_latency(workspace_id).to_dict())

    # ---- metrics

    @app.get("/metrics/summary", dependencies=guarded)
    def metrics_summary(start: float | None = None, end: float | None = None):
        summary = plane.summary(start, end)
        return envelope(summary=summary, text=format_summary(summary))

    @app.get("/metrics/utilisation", dependencies=guarded)
    def metrics_utilisation(start: float | None = None, end: float | None = None):
        return envelope(utilisation=plane.utilisation(start, end))

    @app.get("/metrics/reproducibility", dependencies=guarded)
    def metrics_reproducibility(start: float | None = None, end: float | None = None):
        return envelope(rate=plane.reproducibility_rate(start, end))

    @app.get("/metrics/latency", dependencies=guarded)
    def metrics_latency():
        return envelope(items=[r.to_dict() for r in plane.store.latencies])

    @app.get("/metrics/idle/{node_id}", dependencies=guarded)
    def metrics_idle(node_id: str, start: float | None = None, end: float | None = None):
        return envelope(items=[i.to_dict() for i in plane.idle_intervals(node_id, start, end)])

    @app.get("/metrics/samples/{node_id}", dependencies=guarded)
    def metrics_samples(node_id: str, last: int = 120):
        trace = plane.store.samples.get(node_id, [])
        return envelope(
            items=[
                {"timestamp": s.timestamp, "gpu_util_percent": s.gpu_util_percent}
                for s in trace[-last:]
            ]
        )

    @app.get("/metrics/onboarding/{researcher}", dependencies=guarded)
    def metrics_onboarding(researcher: str):
        return envelope(record=plane.onboarding_time(researcher).to_dict())

    @app.post("/researchers/{researcher}/assisted", dependencies=guarded)
    def set_assisted(researcher: str, body: AssistedBody):
        record = plane.set_assisted(researcher, body.assisted)
        return envelope(record=record.to_dict())

    # ---- pipelines, faults, clock, mode

    @app.post("/pipeline/run", status_code=201, dependencies=guarded)
    def run_pipeline(body: PipelineBody):
        run = plane.run_pipeline_to_completion(body.project, body.seed, body.fail_at)
        return envelope(run=run.to_dict())

    @app.get("/pipelines", dependencies=guarded)
    def list_pipelines():
        return envelope(items=[s.run.to_dict() for s in plane.pipelines.values()])

    @app.post("/faults", status_code=201, dependencies=guarded)
    def inject_fault(body: FaultBody):
        try:
            kind = FaultKind(body.kind)
        except ValueError:
            raise ValidationError("invalid_fault", f"unknown fault kind {body.kind!r}", "kind")
        fault_id = plane.inject_fault(FaultSpec(body.target, kind, body.probability, body.seed))
        return envelope(fault_id=fault_id)

    @app.get("/clock", dependencies=guarded)
    def get_clock():
        return envelope(now=plane.clock.now, mode=plane.clock.mode.value)

    @app.post("/clock/advance", dependencies=guarded)
    def advance_clock(body: AdvanceBody):
        now = plane.advance_clock(body.seconds)
        return envelope(now=now)

    @app.post("/allocation-mode", dependencies=guarded)
    def set_mode(body: ModeBody):
        mode = plane.set_allocation_mode(body.mode)
        return envelope(mode=mode.value)

    @app.get("/events", dependencies=guarded)
    def get_events(since: int = 0, limit: int = 1000):
        items = plane.log.since(since)[:limit]
        return envelope(
            items=[
                {"seq": e.sequence, "ts": e.timestamp, "kind": e.kind, "payload": e.payload}
                for e in items
            ]
        )

    @app.get("/state/digest", dependencies=guarded)
    def state_digest():
        return envelope(digest=plane.state_digest())

    return app
