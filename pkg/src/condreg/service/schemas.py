"""Request/response models for the HTTP API.

Every payload is plain JSON. Image payloads are base64 PNG of a 2-D slice
after window normalization, with the window bounds included so a client can
map pixel values back to data units.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

OUTPUT_KINDS = ("warped", "field_preview", "jacobian", "metrics")
PLANES = ("axial", "coronal", "sagittal")


class HealthResponse(BaseModel):
    status: str
    model_id: str
    lambda_range: Tuple[float, float]


class PairInfo(BaseModel):
    id: str
    split: str
    shape: List[int]
    n_labels: int


class RegisterRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    pair_id: str
    lam: float = Field(alias="lambda", description="regularization weight, raw scale")
    outputs: List[str] = Field(default=list(OUTPUT_KINDS))
    plane: str = Field(default="axial", description="slice plane for 3-D volumes")


class ImagePayload(BaseModel):
    png_base64: str
    window: Tuple[float, float] = Field(
        description="data values mapped to pixel 0 and 255"
    )
    shape: List[int]


class OverlayPayload(BaseModel):
    polylines: List[List[Tuple[float, float]]] = Field(
        description="deformed grid lines; points are (x, y) = (column, row)"
    )
    stride: int


class RegisterResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    pair_id: str
    lam: float = Field(alias="lambda")
    plane: str
    std_jac: float
    dsc: Optional[float] = None
    inference_s: float
    warped: Optional[ImagePayload] = None
    grid_overlay: Optional[OverlayPayload] = None
    jacobian_slice: Optional[ImagePayload] = None


class SweepRow(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: float = Field(alias="lambda")
    dsc_mean: float
    std_jac: float
    inference_s: float


class SweepResponse(BaseModel):
    pair_id: str
    rows: List[SweepRow]


def published_schemas() -> Dict[str, dict]:
    """JSON schema for every public payload type, keyed by name."""
    models = (
        HealthResponse,
        PairInfo,
        RegisterRequest,
        RegisterResponse,
        ImagePayload,
        OverlayPayload,
        SweepRow,
        SweepResponse,
    )
    return {m.__name__: m.model_json_schema() for m in models}
