"""HTTP inference service.

One checkpoint, one dataset, read-only. The model is loaded at startup and
never mutated; request handlers run inference under a bounded semaphore so a
burst of clients cannot pile unbounded work onto the process. Endpoints are
exposed twice, at the root and under /v1/, so clients can pin the version.

Metrics returned here are computed by the same code path as the offline
sweep, so a value shown in a browser matches the benchmark CSV for the same
checkpoint, pair, and weight.
"""

from __future__ import annotations

import base64
import io
import threading
from pathlib import Path

import numpy as np

from ..bench.sweep import register_case
from ..condnet.checkpoint import load_checkpoint
from ..datagen.synth import load_manifest, load_pair
from ..errors import CondRegError
from .schemas import (
    OUTPUT_KINDS,
    PLANES,
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

_PLANE_AXIS = {"axial": 0, "coronal": 1, "sagittal": 2}


def _mid_slice(arr: np.ndarray, plane: str) -> np.ndarray:
    if arr.ndim == 2:
        return arr
    axis = _PLANE_AXIS[plane]
    return np.take(arr, arr.shape[axis] // 2, axis=axis)


def _encode_png(slice2d: np.ndarray, window=None) -> ImagePayload:
    from PIL import Image as PILImage

    arr = np.asarray(slice2d, dtype=np.float64)
    if window is None:
        lo, hi = float(arr.min()), float(arr.max())
    else:
        lo, hi = window
    span = (hi - lo) if hi > lo else 1.0
    u8 = (np.clip((arr - lo) / span, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    img = PILImage.fromarray(u8, mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return ImagePayload(
        png_base64=base64.b64encode(buf.getvalue()).decode("ascii"),
        window=(lo, hi),
        shape=list(arr.shape),
    )


def _encode_heatmap(slice2d: np.ndarray) -> ImagePayload:
    """Jacobian heatmap: diverging colors in a window symmetric about 1."""
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import cm
    from PIL import Image as PILImage

    arr = np.asarray(slice2d, dtype=np.float64)
    half = max(float(np.abs(arr - 1.0).max()), 0.1)
    lo, hi = 1.0 - half, 1.0 + half
    norm = np.clip((arr - lo) / (hi - lo), 0.0, 1.0)
    rgba = (cm.coolwarm(norm) * 255.0).round().astype(np.uint8)
    img = PILImage.fromarray(rgba[..., :3], mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return ImagePayload(
        png_base64=base64.b64encode(buf.getvalue()).decode("ascii"),
        window=(lo, hi),
        shape=list(arr.shape),
    )


def _grid_overlay(field_values: np.ndarray, plane: str, stride: int = 8) -> OverlayPayload:
    """Deformed grid polylines for one slice, points as (x, y) = (col, row)."""
    if field_values.ndim == 3:  # (2, H, W)
        u = field_values
    else:  # (3, Z, Y, X): keep the two in-plane components of the mid-slice
        axis = _PLANE_AXIS[plane]
        keep = [d for d in range(3) if d != axis]
        mid = field_values.shape[axis + 1] // 2
        u = np.stack(
            [np.take(field_values[d], mid, axis=axis) for d in keep], axis=0
        )
    _, h, w = u.shape
    lines = []
    for r in range(0, h, stride):
        pts = [
            (float(c + u[1, r, c]), float(r + u[0, r, c])) for c in range(0, w, 2)
        ]
        lines.append(pts)
    for c in range(0, w, stride):
        pts = [
            (float(c + u[1, r, c]), float(r + u[0, r, c])) for r in range(0, h, 2)
        ]
        lines.append(pts)
    return OverlayPayload(polylines=lines, stride=stride)


class _ServiceState:
    def __init__(self, model_path, data_dir, max_inflight: int = 4):
        self.model = load_checkpoint(model_path)
        self.model_id = Path(model_path).stem
        self.data_dir = Path(data_dir)
        self.manifest = load_manifest(data_dir)
        self.entries = {p["id"]: p for p in self.manifest["pairs"]}
        self._records = {}
        self._records_lock = threading.Lock()
        self.gate = threading.Semaphore(max_inflight)

    def record(self, pair_id: str):
        with self._records_lock:
            if pair_id not in self._records:
                self._records[pair_id] = load_pair(self.data_dir, self.entries[pair_id])
            return self._records[pair_id]


def create_app(model_path, data_dir, max_inflight: int = 4):
    from fastapi import APIRouter, FastAPI, HTTPException

    state = _ServiceState(model_path, data_dir, max_inflight)
    lo, hi = state.model.config.lambda_range
    app = FastAPI(title="condreg service", version="1")
    router = APIRouter()

    def _run_case(pair_id: str, lam: float):
        if pair_id not in state.entries:
            raise HTTPException(status_code=404, detail=f"unknown pair {pair_id!r}")
        if not (lo <= lam <= hi):
            raise HTTPException(
                status_code=422,
                detail=f"lambda {lam} outside the model range [{lo:g}, {hi:g}]",
            )
        record = state.record(pair_id)
        with state.gate:
            try:
                return record, *register_case(state.model, record, lam)
            except CondRegError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc

    @router.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            status="ok", model_id=state.model_id, lambda_range=(lo, hi)
        )

    @router.get("/pairs", response_model=list[PairInfo])
    def pairs():
        out = []
        for pid, entry in state.entries.items():
            rec = state.record(pid)
            out.append(
                PairInfo(
                    id=pid,
                    split=entry["split"],
                    shape=list(rec.fixed.shape),
                    n_labels=len(rec.fixed_labels.labels),
                )
            )
        return out

    @router.get("/schemas")
    def schemas():
        return published_schemas()

    @router.post("/register", response_model=RegisterResponse, response_model_by_alias=True)
    def register(req: RegisterRequest):
        unknown = [o for o in req.outputs if o not in OUTPUT_KINDS]
        if unknown:
            raise HTTPException(
                status_code=422,
                detail=f"unknown outputs {unknown}; expected subset of {list(OUTPUT_KINDS)}",
            )
        if req.plane not in PLANES:
            raise HTTPException(
                status_code=422, detail=f"plane must be one of {list(PLANES)}"
            )
        record, fld, d, elapsed = _run_case(req.pair_id, req.lam)

        from ..grid.ops import jacobian_determinant, std_jacobian, warp

        resp = RegisterResponse(
            pair_id=req.pair_id,
            lam=req.lam,
            plane=req.plane,
            std_jac=std_jacobian(fld),
            dsc=d.mean,
            inference_s=elapsed,
        )
        if "warped" in req.outputs:
            warped = warp(record.moving, fld)
            fslice = _mid_slice(record.fixed.values, req.plane)
            window = (float(fslice.min()), float(fslice.max()))
            resp.warped = _encode_png(_mid_slice(warped.values, req.plane), window)
        if "field_preview" in req.outputs:
            resp.grid_overlay = _grid_overlay(fld.values, req.plane)
        if "jacobian" in req.outputs:
            jac = jacobian_determinant(fld)
            resp.jacobian_slice = _encode_heatmap(_mid_slice(jac, req.plane))
        return resp

    @router.get("/sweep", response_model=SweepResponse, response_model_by_alias=True)
    def sweep_endpoint(pair: str, lambdas: str = "0.1,0.5,1,2,4,8,10"):
        try:
            grid = [float(v) for v in lambdas.split(",")]
        except ValueError:
            raise HTTPException(
                status_code=422, detail=f"lambdas must be comma-separated numbers"
            )
        from ..grid.ops import std_jacobian

        rows = []
        for lam in grid:
            _, fld, d, elapsed = _run_case(pair, lam)
            rows.append(
                SweepRow(
                    lam=lam,
                    dsc_mean=d.mean,
                    std_jac=std_jacobian(fld),
                    inference_s=elapsed,
                )
            )
        return SweepResponse(pair_id=pair, rows=rows)

    app.include_router(router, prefix="/v1")
    app.include_router(router)
    return app
