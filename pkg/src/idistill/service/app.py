"""FastAPI wiring: routes delegate to the handlers one-to-one."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from . import handlers
from . import schemas as S


def create_app() -> FastAPI:
    app = FastAPI(
        title="idistill",
        description="Morphing attack detection: dataset synthesis, two-stage "
        "training, biometric evaluation and interpretable scoring.",
        version=__version__,
    )

    @app.exception_handler(FileNotFoundError)
    async def _not_found(request: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad_request(request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(OSError)
    async def _io_error(request: Request, exc: OSError) -> JSONResponse:
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/synth", response_model=S.SynthResponse)
    def synth(req: S.SynthRequest) -> S.SynthResponse:
        return handlers.synth(req)

    @app.post("/train/autoencoder", response_model=S.TrainAutoencoderResponse)
    def train_autoencoder(req: S.TrainAutoencoderRequest) -> S.TrainAutoencoderResponse:
        return handlers.train_ae(req)

    @app.post("/train/classifier", response_model=S.TrainClassifierResponse)
    def train_classifier(req: S.TrainClassifierRequest) -> S.TrainClassifierResponse:
        return handlers.train_clf(req)

    @app.post("/eval", response_model=S.EvalResponse)
    def run_eval(req: S.EvalRequest) -> S.EvalResponse:
        return handlers.run_eval(req)

    @app.post("/score", response_model=S.ScoreResponse)
    def score(req: S.ScoreRequest) -> S.ScoreResponse:
        return handlers.score(req)

    @app.post("/report", response_model=S.ReportResponse)
    def report(req: S.ReportRequest) -> S.ReportResponse:
        return handlers.report(req)

    return app
