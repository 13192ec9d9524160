"""HTTP service speaking the encode protocol.

POST /v1/handshake -> {"dim", "max_len", "grad_supported"}
POST /v1/encode {"tokens", "slot_index", "proxy_embedding"}
    -> {"embedding", "dim"}

Malformed requests get 400 with field diagnostics; encoder failures get
503. The service is stateless: any request order yields identical
responses.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .toy import EncodeError, ToyEncoder


class EncodeRequest(BaseModel):
    tokens: list[str]
    slot_index: int | None = None
    proxy_embedding: list[float] | None = None


def create_app(encoder: ToyEncoder) -> FastAPI:
    app = FastAPI(title="encoder-sidecar")

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        details = [
            {"field": ".".join(str(p) for p in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"errors": details})

    @app.exception_handler(EncodeError)
    async def encode_error(request: Request, exc: EncodeError):
        return JSONResponse(status_code=400, content={"errors": [{"message": str(exc)}]})

    @app.exception_handler(RuntimeError)
    async def model_error(request: Request, exc: RuntimeError):
        return JSONResponse(status_code=503, content={"errors": [{"message": str(exc)}]})

    @app.post("/v1/handshake")
    async def handshake():
        return {"dim": encoder.dim, "max_len": encoder.max_len, "grad_supported": False}

    @app.post("/v1/encode")
    async def encode(req: EncodeRequest):
        out = encoder.encode(req.tokens, req.slot_index, req.proxy_embedding)
        return {"embedding": [float(x) for x in out], "dim": encoder.dim}

    return app
