from .app import create_app
from .schemas import (
    HealthResponse,
    ImagePayload,
    OverlayPayload,
    PairInfo,
    RegisterRequest,
    RegisterResponse,
    SweepResponse,
    SweepRow,
    published_schemas,
)

__all__ = [
    "HealthResponse",
    "ImagePayload",
    "OverlayPayload",
    "PairInfo",
    "RegisterRequest",
    "RegisterResponse",
    "SweepResponse",
    "SweepRow",
    "create_app",
    "published_schemas",
]
