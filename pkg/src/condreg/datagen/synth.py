"""Synthetic registration pairs with known-good deformations.

Each pair is built from one seeded recipe: a fixed image made of smooth
labeled blobs, a random smooth displacement field, and a moving image
produced by resampling the fixed image through that field.

The field mixes three ingredients, each chosen so the warp stays provably
fold-free while label volumes barely change:

* a global translation (no gradient at all, so it is free in the bound),
* swirls derived from a Gaussian stream function (divergence-free, so
  volume change is second order in the amplitude),
* a small genuinely divergent part at a coarser scale, which is where
  almost all of the volume change budget goes.

Amplitudes are capped so the row sums of |grad u| stay below 1 everywhere,
making I + grad(u) strictly diagonally dominant with positive diagonal and
hence det > 0: no folding, analytically, for every seed.

Blob peak intensities are drawn from one overlapping range on purpose; if
each structure had its own intensity band the similarity term could match
them by brightness alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConfigError, DataError
from ..grid.containers import DisplacementField, Image, LabelMap
from ..grid.io import load_tensor, save_tensor
from ..grid.ops import warp

MANIFEST_VERSION = 1

# peak slope of exp(-t^2/2) is exp(-1/2); its second derivative peaks at 1
_GAUSS_SLOPE = float(np.exp(-0.5))
_GAUSS_CROSS = _GAUSS_SLOPE**2
# keep the analytic row-sum bound on |grad u| away from 1
_JACOBIAN_MARGIN = 0.95

# displacement budget split and bump counts for the three field parts
_SHIFT_SHARE, _SWIRL_SHARE, _DIV_SHARE = 0.35, 0.45, 0.20
_N_SWIRLS, _N_DIV_BUMPS = 5, 2
_DIV_SCALE = 1.6  # divergent bumps live at this multiple of `smoothness`


@dataclass
class PairSpec:
    shape: tuple = (64, 64)
    n_blobs: int = 8
    smoothness: float = 9.0
    max_disp: float = 7.0

    def __post_init__(self):
        self.shape = tuple(int(n) for n in self.shape)
        if len(self.shape) not in (2, 3):
            raise ConfigError(f"shape must be 2-D or 3-D, got {self.shape}")
        if any(n < 8 for n in self.shape):
            raise ConfigError(f"axes must be at least 8 voxels, got {self.shape}")
        if self.n_blobs < 1:
            raise ConfigError("n_blobs must be >= 1")
        if self.smoothness <= 0:
            raise ConfigError("smoothness must be positive")
        if self.max_disp < 0:
            raise ConfigError("max_disp must be >= 0")
        bound = self.gradient_bound()
        if bound >= _JACOBIAN_MARGIN:
            raise ConfigError(
                f"spec violates the invertibility bound: row-sum bound on "
                f"|grad u| is {bound:.3f} >= {_JACOBIAN_MARGIN}; lower "
                f"max_disp or raise smoothness"
            )

    def gradient_bound(self) -> float:
        """Analytic upper bound on the row sums of |grad u|.

        The translation part has zero gradient. A swirl bump with
        per-component displacement cap ``delta`` is built from a stream
        function of scale sigma whose second derivatives are bounded by
        A/sigma^2 (pure) and A * exp(-1) / sigma^2 (mixed) for stream
        amplitude A = delta * sigma / exp(-1/2); a row of its gradient sums
        below (1 + (D-1) * exp(-1)) / exp(-1/2) * delta / sigma. A divergent
        bump with cap delta contributes at most D * exp(-1/2) * delta per
        row, at its own coarser scale. Summed over all bumps (amplitude caps
        add up to the per-part share of max_disp), a total under 1 makes
        I + grad(u) strictly diagonally dominant with positive diagonal,
        hence det > 0 everywhere: no folding.
        """
        d = len(self.shape)
        swirl_coef = (1.0 + (d - 1) * _GAUSS_CROSS) / _GAUSS_SLOPE
        swirl = swirl_coef * _SWIRL_SHARE * self.max_disp / self.smoothness
        div = (
            d
            * _GAUSS_SLOPE
            * _DIV_SHARE
            * self.max_disp
            / (_DIV_SCALE * self.smoothness)
        )
        return swirl + div

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PairSpec":
        data = dict(data)
        data["shape"] = tuple(data["shape"])
        return cls(**data)


@dataclass
class PairRecord:
    fixed: Image
    moving: Image
    fixed_labels: LabelMap
    moving_labels: LabelMap
    gt_field: Optional[DisplacementField]
    seed: int


def _coordinate_axes(shape):
    return [np.arange(n, dtype=np.float64) for n in shape]


def _gauss_factors(mesh, center, sigma):
    return [np.exp(-((mesh[a] - center[a]) ** 2) / (2.0 * sigma**2)) for a in range(len(center))]


def _composite_field(rng, shape, smoothness, max_disp) -> np.ndarray:
    """Translation + stream-function swirls + a mildly divergent remainder."""
    d = len(shape)
    mesh = np.meshgrid(*_coordinate_axes(shape), indexing="ij")
    u = np.zeros((d, *shape), dtype=np.float64)

    shift_cap = _SHIFT_SHARE * max_disp
    shift = rng.uniform(0.5, 1.0, size=d) * shift_cap * rng.choice([-1.0, 1.0], size=d)
    u += shift.reshape((d,) + (1,) * d)

    sigma = smoothness
    swirl_per = _SWIRL_SHARE * max_disp / _N_SWIRLS
    for _ in range(_N_SWIRLS):
        center = [rng.uniform(0.2 * n, 0.8 * n) for n in shape]
        delta = rng.uniform(0.6, 1.0) * swirl_per * rng.choice([-1.0, 1.0])
        # swirl in the plane of two axes; the stream amplitude that yields a
        # per-component displacement cap |delta| is |delta| * sigma / slope
        i, j = (0, 1) if d == 2 else tuple(rng.choice(d, size=2, replace=False))
        g = _gauss_factors(mesh, center, sigma)
        ti = (mesh[i] - center[i]) / sigma
        tj = (mesh[j] - center[j]) / sigma
        rest = np.ones(shape)
        for a in range(d):
            if a not in (i, j):
                rest = rest * g[a]
        scale = delta / _GAUSS_SLOPE
        u[i] += scale * g[i] * (-tj * g[j]) * rest
        u[j] -= scale * (-ti * g[i]) * g[j] * rest

    div_sigma = _DIV_SCALE * smoothness
    div_per = _DIV_SHARE * max_disp / _N_DIV_BUMPS
    for _ in range(_N_DIV_BUMPS):
        center = [rng.uniform(0.2 * n, 0.8 * n) for n in shape]
        amp = rng.uniform(0.6, 1.0, size=d) * div_per * rng.choice([-1.0, 1.0], size=d)
        g = _gauss_factors(mesh, center, div_sigma)
        bump = g[0]
        for f in g[1:]:
            bump = bump * f
        u += amp.reshape((d,) + (1,) * d) * bump
    return u


def _separated_centers(rng, shape, count):
    """Blob centers kept apart so no label is reduced to a sliver by
    occlusion. Falls back to the farthest of 50 draws when the box is full."""
    min_dist = 0.22 * min(shape)
    centers = []
    for _ in range(count):
        best, best_dist = None, -1.0
        for _ in range(50):
            cand = [rng.uniform(0.2 * n, 0.8 * n) for n in shape]
            dist = min(
                (sum((a - b) ** 2 for a, b in zip(cand, c)) ** 0.5 for c in centers),
                default=float("inf"),
            )
            if dist >= min_dist:
                best = cand
                break
            if dist > best_dist:
                best, best_dist = cand, dist
        centers.append(best)
    return centers


def _blob_image(rng, spec: PairSpec):
    shape = spec.shape
    d = len(shape)
    mesh = np.meshgrid(*_coordinate_axes(shape), indexing="ij")

    intensity = np.zeros(shape, dtype=np.float64)
    support = np.zeros((spec.n_blobs, *shape), dtype=np.float64)
    for k, center in enumerate(_separated_centers(rng, shape, spec.n_blobs)):
        radii = [rng.uniform(n / 10.0, n / 5.0) for n in shape]
        peak = rng.uniform(0.45, 1.0)
        m = np.zeros(shape, dtype=np.float64)
        for a in range(d):
            m += ((mesh[a] - center[a]) / radii[a]) ** 2
        support[k] = np.exp(-0.5 * m)
        intensity += peak * support[k]

    # gentle smooth background so flat regions still carry local structure
    bg = np.ones(shape)
    for a in range(d):
        bg = bg * np.sin(2.0 * np.pi * (mesh[a] + 0.25 * shape[a]) / shape[a])
    intensity += 0.05 * (bg + 1.0)

    best = support.argmax(axis=0)
    labels = np.where(support.max(axis=0) > 0.5, best + 1, 0).astype(np.int32)
    return intensity.astype(np.float32), labels


def generate_pair(seed: int, spec: PairSpec) -> PairRecord:
    """Deterministic pair from a seed: same seed, bit-identical record."""
    if not isinstance(spec, PairSpec):
        spec = PairSpec.from_dict(dict(spec))
    rng = np.random.default_rng(seed)
    values, labels = _blob_image(rng, spec)
    fixed = Image(values=values)
    fixed_labels = LabelMap(values=labels)

    u = _composite_field(rng, spec.shape, spec.smoothness, spec.max_disp)
    gt_field = DisplacementField(values=u.astype(np.float32))

    if spec.max_disp == 0:
        moving = Image(values=values.copy())
        moving_labels = LabelMap(values=labels.copy())
    else:
        moving = warp(fixed, gt_field)
        moving_labels = warp(fixed_labels, gt_field, mode="nearest")
    return PairRecord(
        fixed=fixed,
        moving=moving,
        fixed_labels=fixed_labels,
        moving_labels=moving_labels,
        gt_field=gt_field,
        seed=seed,
    )


_ROLES = ("fixed", "moving", "fixed_labels", "moving_labels", "gt_field")


def _split_counts(n: int, split) -> list:
    n_train = int(n * split[0])
    n_val = int(n * split[1])
    return ["train"] * n_train + ["val"] * n_val + ["test"] * (n - n_train - n_val)


def make_dataset(
    n_pairs: int,
    spec: PairSpec,
    out_dir,
    split=(0.6, 0.2, 0.2),
    seed0: int = 0,
) -> dict:
    """Generate pairs, save them in the tensor container format, and write a
    manifest describing the whole set. Returns the manifest dict."""
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    if len(split) != 3 or abs(sum(split) - 1.0) > 1e-9 or min(split) < 0:
        raise ConfigError(f"split must be three non-negative fractions summing to 1, got {split}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    splits = _split_counts(n_pairs, split)
    entries = []
    for i in range(n_pairs):
        pair_id = f"pair_{i:04d}"
        record = generate_pair(seed0 + i, spec)
        rel_base = Path("pairs") / pair_id
        paths = {}
        for role in _ROLES:
            obj = getattr(record, role if role != "gt_field" else "gt_field")
            rel = rel_base / role
            save_tensor(out_dir / rel, obj)
            paths[role] = str(rel)
        entries.append(
            {"id": pair_id, "seed": seed0 + i, "paths": paths, "split": splits[i]}
        )

    manifest = {"version": MANIFEST_VERSION, "spec": spec.to_dict(), "pairs": entries}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest


def load_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise DataError(f"no manifest.json under {dataset_dir}")
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest {path}: {exc}") from exc
    version = manifest.get("version")
    if version != MANIFEST_VERSION:
        raise DataError(
            f"manifest version {version} not supported (expected {MANIFEST_VERSION})"
        )
    for key in ("spec", "pairs"):
        if key not in manifest:
            raise DataError(f"manifest {path} missing key {key!r}")
    return manifest


def load_pair(dataset_dir, entry: dict) -> PairRecord:
    root = Path(dataset_dir)
    loaded = {}
    for role in _ROLES:
        rel = entry["paths"].get(role)
        loaded[role] = load_tensor(root / rel) if rel else None
    return PairRecord(seed=entry["seed"], **loaded)


def pairs_for_split(manifest: dict, split_name: str) -> list:
    return [p for p in manifest["pairs"] if p["split"] == split_name]
