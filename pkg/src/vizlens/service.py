"""HTTP service exposing the full design-lab workflow.

All routes live under ``/api`` and require a bearer token except
``/api/login``. Responses are JSON apart from the overlay endpoint, which
streams PNG. Analysis runs on a small worker pool: requests that finish
within the configured window answer synchronously with the report id,
slower ones answer 202 with a job id pollable at ``/api/jobs/{id}``.
Jobs are tracked in memory and do not survive a restart.
"""

from __future__ import annotations

import secrets
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from fastapi import Depends, FastAPI, File, HTTPException, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from . import config as config_mod
from .config import AppConfig
from .engine import Analyzer
from .errors import DecodeError, NotFound, UnknownSection, UnsupportedFormat, VizlensError
from .report import report_from_doc

TOKEN_TTL_S = 24 * 3600

JOB_QUEUED = "queued"
JOB_RUNNING = "running"
JOB_DONE = "done"
JOB_FAILED = "failed"


@dataclass
class Session:
    token: str
    user_id: str
    expires_at: float


@dataclass
class Job:
    job_id: str
    image_ref: str
    user_id: str
    state: str = JOB_QUEUED
    report_id: str | None = None
    error: str | None = None


class ServiceState:
    def __init__(self, config: AppConfig, analyzer: Analyzer):
        self.config = config
        self.analyzer = analyzer
        self.sessions: dict[str, Session] = {}
        self.jobs: dict[str, Job] = {}
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=max(1, config.analysis_workers))

    def issue_token(self, user_id: str) -> Session:
        session = Session(
            token=secrets.token_urlsafe(32),  # 256 bits
            user_id=user_id,
            expires_at=time.time() + TOKEN_TTL_S,
        )
        with self.lock:
            self.sessions[session.token] = session
        return session

    def session_for(self, token: str) -> Session | None:
        with self.lock:
            session = self.sessions.get(token)
            if session and session.expires_at < time.time():
                del self.sessions[token]
                return None
            return session

    def active_jobs(self) -> int:
        with self.lock:
            return sum(1 for j in self.jobs.values() if j.state in (JOB_QUEUED, JOB_RUNNING))


def create_app(config: AppConfig | None = None, analyzer: Analyzer | None = None) -> FastAPI:
    config = config or AppConfig()
    analyzer = analyzer or Analyzer(config)
    state = ServiceState(config, analyzer)

    app = FastAPI(title="vizlens", version="0.1.0")
    app.state.vizlens = state

    if config.cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config.cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def current_user(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            session = state.session_for(header[7:].strip())
            if session:
                return session.user_id
        raise HTTPException(status_code=401, detail="missing or invalid token")

    @app.post("/api/login")
    async def login(body: dict) -> dict:
        username = str(body.get("username", ""))
        password = str(body.get("password", ""))
        if not config_mod.verify_user(config.users_file, username, password):
            raise HTTPException(status_code=401, detail="invalid credentials")
        session = state.issue_token(username)
        return {
            "token": session.token,
            "user_id": session.user_id,
            "expires_at": session.expires_at,
        }

    @app.post("/api/charts")
    async def upload_chart(file: UploadFile = File(...), user: str = Depends(current_user)) -> dict:
        data = await file.read()
        try:
            image_ref, warnings = state.analyzer.ingest(data)
        except (UnsupportedFormat, DecodeError) as exc:
            raise HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}")
        return {"image_ref": image_ref, "warnings": warnings}

    def _run_job(job: Job) -> None:
        job.state = JOB_RUNNING
        try:
            report_id, _ = state.analyzer.analyze_stored(job.image_ref, job.user_id)
            job.report_id = report_id
            job.state = JOB_DONE
        except Exception as exc:  # isolated: a failed job must not leak
            job.error = f"{type(exc).__name__}: {exc}"
            job.state = JOB_FAILED

    @app.post("/api/charts/{image_ref}/analyze")
    async def analyze(image_ref: str, user: str = Depends(current_user)) -> Response:
        import asyncio

        if not state.analyzer.store.has_image(image_ref):
            raise HTTPException(status_code=404, detail="unknown image")
        if state.active_jobs() >= config.analysis_workers + config.analysis_queue_limit:
            raise HTTPException(status_code=503, detail="analysis pipeline saturated")
        job = Job(job_id=uuid.uuid4().hex, image_ref=image_ref, user_id=user)
        with state.lock:
            state.jobs[job.job_id] = job
        state.executor.submit(_run_job, job)
        deadline = time.monotonic() + config.sync_wait_s
        while job.state in (JOB_QUEUED, JOB_RUNNING):
            if time.monotonic() >= deadline:
                return JSONResponse(status_code=202, content={"job_id": job.job_id})
            await asyncio.sleep(0.02)
        if job.state == JOB_FAILED:
            raise HTTPException(status_code=500, detail=job.error or "analysis failed")
        return JSONResponse(content={"report_id": job.report_id})

    @app.get("/api/jobs/{job_id}")
    async def job_state(job_id: str, user: str = Depends(current_user)) -> dict:
        job = state.jobs.get(job_id)
        if job is None or job.user_id != user:
            raise HTTPException(status_code=404, detail="unknown job")
        return {
            "job_id": job.job_id,
            "state": job.state,
            "report_id": job.report_id,
            "error": job.error,
        }

    def _load_owned_report_bytes(report_id: str, user: str) -> bytes:
        try:
            raw = state.analyzer.store.load_report_bytes(report_id)
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown report")
        import json as _json

        doc = _json.loads(raw)
        if doc.get("user_id") != user:
            raise HTTPException(status_code=404, detail="unknown report")
        return raw

    @app.get("/api/reports")
    async def list_reports(user: str = Depends(current_user)) -> list[dict]:
        entries = state.analyzer.store.list_archive(user)
        return [
            {
                "report_id": e.report_id,
                "created_at": e.created_at,
                "thumbnail_ref": e.thumbnail_ref,
            }
            for e in entries
        ]

    @app.get("/api/reports/{report_id}")
    async def get_report(report_id: str, user: str = Depends(current_user)) -> Response:
        raw = _load_owned_report_bytes(report_id, user)
        return Response(content=raw, media_type="application/json")

    @app.get("/api/reports/{report_id}/overlays/{section}")
    async def get_overlay(
        report_id: str,
        section: str,
        opacity: float = 0.6,
        variant: str | None = None,
        user: str = Depends(current_user),
    ) -> Response:
        import json as _json

        raw = _load_owned_report_bytes(report_id, user)
        if not 0.0 <= opacity <= 1.0:
            raise HTTPException(status_code=400, detail="opacity must lie in [0, 1]")
        report = report_from_doc(_json.loads(raw))
        try:
            png = state.analyzer.render_overlay(report, section, opacity, variant)
        except NotFound as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return Response(content=png, media_type="image/png")

    @app.post("/api/reports/{report_id}/notes")
    async def add_note(report_id: str, body: dict, user: str = Depends(current_user)) -> Response:
        _load_owned_report_bytes(report_id, user)
        section = str(body.get("section", ""))
        text = str(body.get("text", ""))
        if not text:
            raise HTTPException(status_code=400, detail="note text must not be empty")
        try:
            state.analyzer.store.add_note(report_id, section, text)
        except UnknownSection:
            raise HTTPException(status_code=400, detail=f"unknown section {section!r}")
        raw = state.analyzer.store.load_report_bytes(report_id)
        return Response(content=raw, media_type="application/json")

    @app.get("/api/compare")
    async def compare(a: str, b: str, user: str = Depends(current_user)) -> dict:
        _load_owned_report_bytes(a, user)
        _load_owned_report_bytes(b, user)
        diff = state.analyzer.store.compare(a, b)
        return diff.to_doc()

    @app.get("/api/images/{image_ref}")
    async def get_image(image_ref: str, user: str = Depends(current_user)) -> Response:
        try:
            data = state.analyzer.store.get_image(image_ref)
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown image")
        return Response(content=data, media_type="image/png")

    @app.exception_handler(VizlensError)
    async def engine_error(request: Request, exc: VizlensError) -> JSONResponse:
        return JSONResponse(status_code=500, content={"detail": f"{type(exc).__name__}: {exc}"})

    if config.ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
