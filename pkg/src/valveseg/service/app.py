"""HTTP/JSON session service: steer the two-stage segmentation interactively."""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .. import __version__
from ..annulus import AnnulusDefinition
from ..errors import (AnnulusFitError, EmptyProximalSurfaceError, GeometryError,
                      NrrdFormatError, StageError, ValveSegError)
from ..nrrd_io import load_nrrd_bytes
from ..phantom import PhantomSpec
from ..session import Session, SessionConfig, SessionStore
from ..slices import render_slice
from .schemas import (AcceptRequest, AnnulusRequest, AnnulusResponse, CreateSessionRequest,
                      StepRequest, StepResponse)

MEDIA_NRRD = "application/octet-stream"


def _error(status: int, code: str, message: str, detail: str | None = None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message, "detail": detail})


def create_app(store: SessionStore | None = None) -> FastAPI:
    app = FastAPI(title="valveseg session service", version=__version__)
    store = store if store is not None else SessionStore()

    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.exception_handler(ValveSegError)
    def handle_domain_error(request: Request, exc: ValveSegError):
        if isinstance(exc, NrrdFormatError):
            return _error(400, "BAD_VOLUME", str(exc), detail=exc.field)
        if isinstance(exc, StageError):
            return _error(409, "WRONG_STAGE", str(exc))
        if isinstance(exc, AnnulusFitError):
            return _error(422, "ANNULUS_FIT", str(exc))
        if isinstance(exc, EmptyProximalSurfaceError):
            return _error(422, "EMPTY_PROXIMAL", str(exc))
        if isinstance(exc, GeometryError):
            return _error(422, "GEOMETRY", str(exc))
        return _error(422, "DOMAIN", str(exc))

    @app.exception_handler(ValueError)
    def handle_value_error(request: Request, exc: ValueError):
        return _error(422, "INVALID", str(exc))

    @app.exception_handler(KeyError)
    def handle_missing(request: Request, exc: KeyError):
        return _error(404, "NOT_FOUND", f"unknown session {exc.args[0]!r}")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", status_code=200)
    async def create_session(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("application/json"):
            body = CreateSessionRequest.model_validate(await request.json())
            config = SessionConfig(**body.config.model_dump()) if body.config else None
            if body.phantom is None:
                return _error(422, "INVALID", "JSON body must carry a 'phantom' spec "
                                              "(or POST raw NRRD bytes)")
            spec = PhantomSpec(**body.phantom.model_dump())
            session = Session.from_phantom(spec, config=config)
        else:
            payload = await request.body()
            volume = load_nrrd_bytes(payload)
            session = Session(volume)
        store.add(session)
        return session.summary()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get(session_id).summary()

    @app.post("/sessions/{session_id}/annulus")
    def set_annulus(session_id: str, body: AnnulusRequest) -> AnnulusResponse:
        session = store.get(session_id)
        pts = np.asarray([[p.x, p.y, p.z] for p in body.points], dtype=np.float64)
        probe = np.asarray(body.probe_dir, float) if body.probe_dir else None
        model = session.set_annulus(AnnulusDefinition(points=pts, probe_dir=probe))
        return AnnulusResponse(
            centroid=tuple(model.centroid), plane_normal=tuple(model.plane_normal),
            plane_offset=model.plane_offset, probe_dir=tuple(model.probe_dir),
            max_radius=model.max_radius,
            samples=[tuple(s) for s in model.samples])

    @app.post("/sessions/{session_id}/steps")
    def step(session_id: str, body: StepRequest) -> StepResponse:
        session = store.get(session_id)
        params = None
        if body.params is not None:
            from ..levelset import ContourParams

            params = ContourParams(**body.params.model_dump())
        summary = session.step(body.stage, body.iterations, params=params)
        return StepResponse(**summary.to_dict(), checksum=session.state_checksum())

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str) -> StepResponse:
        session = store.get(session_id)
        summary = session.undo()
        return StepResponse(**summary.to_dict(), checksum=session.state_checksum())

    @app.post("/sessions/{session_id}/accept")
    def accept(session_id: str, body: AcceptRequest):
        session = store.get(session_id)
        stage = session.accept_stage(body.stage)
        return {"stage": stage}

    @app.get("/sessions/{session_id}/slices/{axis}/{index}")
    def get_slice(session_id: str, axis: str, index: int, overlay: str = ""):
        session = store.get(session_id)
        flags = {f for f in overlay.split(",") if f}
        try:
            png = render_slice(session, axis, index, flags)
        except IndexError as exc:
            return _error(404, "OUT_OF_RANGE", str(exc))
        return Response(content=png, media_type="image/png")

    @app.post("/sessions/{session_id}/surface")
    def extract_surface(session_id: str):
        session = store.get(session_id)
        return session.extract_surface()

    @app.get("/sessions/{session_id}/export/{spec}")
    def export(session_id: str, spec: str):
        session = store.get(session_id)
        if "." not in spec:
            return _error(422, "INVALID", "export path must be <WHAT>.<ext>")
        what, ext = spec.rsplit(".", 1)
        payload, media = session.export(what.upper(), ext)
        return Response(content=payload, media_type=media,
                        headers={"Content-Disposition": f'attachment; filename="{spec}"'})

    return app


app = create_app()
