"""HTTP layer: JSON over REST, one status code per error family.

404 unknown scene/session, 409 closed session (including the loser of a
concurrent decide), 422 invalid payloads, 500 unwritable export path.
No authentication; the annotator identity travels in the decision body.
"""

from __future__ import annotations

from fastapi import Body, FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import (
    BloombenchError,
    ExportPathUnwritable,
    SessionClosed,
    UnknownScene,
    UnknownSession,
)
from .config import ServiceConfig
from .core import CurationService
from .render import preview_png, score_png

_STATUS = (
    (UnknownScene, 404),
    (UnknownSession, 404),
    (SessionClosed, 409),
    (ExportPathUnwritable, 500),
)


def _status_for(exc: BloombenchError) -> int:
    for cls, code in _STATUS:
        if isinstance(exc, cls):
            return code
    return 422


def create_app(config: ServiceConfig) -> FastAPI:
    service = CurationService(config)
    app = FastAPI(title="bloombench curation service")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(BloombenchError)
    async def bloom_error(_request: Request, exc: BloombenchError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/scenes")
    def scenes():
        return service.scene_summaries()

    @app.get("/scenes/{scene_id}/preview.png")
    def scene_preview(scene_id: str):
        scene = service.scene(scene_id)
        data = preview_png(scene, config.preview_bands)
        return Response(content=data, media_type="image/png")

    @app.get("/scenes/{scene_id}/score.png")
    def scene_score(scene_id: str):
        field = service.default_score_field(scene_id)
        return Response(content=score_png(field), media_type="image/png")

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        session = service.create_session(str(payload.get("scene_id", "")))
        return session.to_json()

    @app.post("/sessions/{session_id}/prompts")
    def submit_prompts(session_id: str, payload: dict = Body(...)):
        candidates = service.submit_prompts(
            session_id,
            payload.get("prompts", {}),
            k=payload.get("k"),
            post_obj=payload.get("post"),
        )
        return candidates.to_json()

    @app.post("/sessions/{session_id}/decision")
    def decide(session_id: str, payload: dict = Body(...)):
        session = service.decide(session_id, payload)
        return session.to_json()

    @app.get("/sessions")
    def list_sessions(state: str | None = None, annotator: str | None = None):
        return [s.to_json() for s in service.list_sessions(state, annotator)]

    @app.post("/export")
    def export(payload: dict | None = Body(None)):
        return service.export((payload or {}).get("filter"))

    return app
