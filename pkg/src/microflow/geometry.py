"""Parametric microstructure catalog.

Every family lives on the closed unit cell [0,1]^2, is centered at
(0.5, 0.5), and scales homothetically with its size parameter s in [0,1]:
the solid region at size s is the s=1 region contracted about the cell
center by the factor s. All families are star-shaped about the center,
which makes the solid regions nested as s grows, the solid area scale
exactly as s^2, and the boundary length scale exactly as s. At the
default orientation every family is mirror-symmetric about both cell
axes, so the off-diagonal permeability components vanish.

Catalog order is fixed; "the first m shapes" always refers to this order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import InputDomainError

SHAPE_IDS: tuple[str, ...] = (
    "squircle",
    "fish_body_1",
    "fish_body_2",
    "square",
    "circle",
    "ellipse",
    "mucosa_10",
    "mucosa_20",
)

# Slender symmetric profile, classic four-digit thickness polynomial with a
# closed trailing edge. Argument is the chordwise fraction in [0, 1].
_PROFILE_COEFFS = (0.2969, -0.1260, -0.3516, 0.2843, -0.1036)

_FISH_THICKNESS = {"fish_body_1": 0.40, "fish_body_2": 0.25}

# Corrugated-disk ("mucosa") boundary: r(phi) = s * (base + amp * cos(k phi)).
_MUCOSA_BASE = 0.30
_MUCOSA_AMP = 0.15
_MUCOSA_PERIODS = {"mucosa_10": 10, "mucosa_20": 20}

_PERIMETER_SEGMENTS = 32768


@dataclass(frozen=True)
class MicrostructureFamily:
    """One catalog entry: shape id, its constants, and its s=1 extremes."""

    id: str
    params: dict = field(default_factory=dict)
    gamma_max: float = 0.0  # boundary length at s=1, unit-cell side lengths
    v_max: float = 0.0  # solid area fraction at s=1

    def __post_init__(self):
        if not self.gamma_max > 0:
            raise InputDomainError(f"{self.id}: gamma_max must be positive")
        if not 0 < self.v_max <= 1:
            raise InputDomainError(f"{self.id}: v_max must be in (0, 1]")


@dataclass(frozen=True)
class UnitCellGrid:
    """Per-cell solid fractions of one shape sampled on an n-by-n grid.

    ``occupancy[ix, iy]`` is the solid fraction of the cell whose lower-left
    corner sits at (ix/n, iy/n).
    """

    resolution: int
    occupancy: np.ndarray

    def __post_init__(self):
        occ = self.occupancy
        if occ.shape != (self.resolution, self.resolution):
            raise InputDomainError("occupancy grid must be square n x n")
        if occ.size and (occ.min() < 0.0 or occ.max() > 1.0):
            raise InputDomainError("occupancy values must lie in [0, 1]")


def _check_shape_id(shape_id: str) -> None:
    if shape_id not in SHAPE_IDS:
        raise InputDomainError(f"unknown shape id {shape_id!r}")


def _half_thickness(shape_id: str, xi: np.ndarray) -> np.ndarray:
    """Half-thickness of a fish-body profile at chordwise fraction xi."""
    t = _FISH_THICKNESS[shape_id]
    a0, a1, a2, a3, a4 = _PROFILE_COEFFS
    xi = np.clip(xi, 0.0, 1.0)
    yt = 5.0 * t * (a0 * np.sqrt(xi) + xi * (a1 + xi * (a2 + xi * (a3 + xi * a4))))
    # roundoff can leave a tiny negative value at the closed trailing edge
    return np.maximum(yt, 0.0)


def _mucosa_radius(shape_id: str, phi: np.ndarray) -> np.ndarray:
    k = _MUCOSA_PERIODS[shape_id]
    return _MUCOSA_BASE + _MUCOSA_AMP * np.cos(k * phi)


def solid_mask(shape_id: str, s: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized membership test: True where (x, y) lies in the solid.

    Coordinates are unit-cell coordinates in [0, 1]; the caller is
    responsible for range checks (see :func:`indicator` for the checked
    scalar form).
    """
    _check_shape_id(shape_id)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if s <= 0.0:
        return np.zeros(np.broadcast(x, y).shape, dtype=bool)
    X = x - 0.5
    Y = y - 0.5
    half = 0.5 * s
    if shape_id == "circle":
        return X * X + Y * Y <= half * half
    if shape_id == "square":
        return np.maximum(np.abs(X), np.abs(Y)) <= half
    if shape_id == "ellipse":
        # 2:1 axis ratio, major axis of length s along x
        return (X / half) ** 2 + (Y / (0.5 * half)) ** 2 <= 1.0
    if shape_id == "squircle":
        return X**4 + Y**4 <= half**4
    if shape_id in _FISH_THICKNESS:
        xi = X / s + 0.5
        yt = _half_thickness(shape_id, xi)
        return (np.abs(X) <= half) & (np.abs(Y) <= s * yt)
    # mucosa: corrugated disk
    r = np.hypot(X, Y)
    phi = np.arctan2(Y, X)
    return r <= s * _mucosa_radius(shape_id, phi)


def indicator(shape_id: str, s: float, point: tuple[float, float]) -> bool:
    """True iff ``point`` lies in the solid inclusion of ``shape_id`` at size ``s``."""
    _check_shape_id(shape_id)
    if not 0.0 <= s <= 1.0:
        raise InputDomainError(f"size s={s} outside [0, 1]")
    px, py = float(point[0]), float(point[1])
    if not (0.0 <= px <= 1.0 and 0.0 <= py <= 1.0):
        raise InputDomainError(f"point {point} outside the closed unit cell")
    return bool(solid_mask(shape_id, s, np.asarray(px), np.asarray(py)))


def rasterize(shape_id: str, s: float, n: int, subsamples: int = 4) -> UnitCellGrid:
    """Sample per-cell solid fractions on an n-by-n grid (k x k subsampling)."""
    _check_shape_id(shape_id)
    if n < 32:
        raise InputDomainError(f"rasterization resolution n={n} below minimum 32")
    if not 0.0 <= s <= 1.0:
        raise InputDomainError(f"size s={s} outside [0, 1]")
    k = subsamples
    m = n * k
    pts = (np.arange(m) + 0.5) / m
    xs, ys = np.meshgrid(pts, pts, indexing="ij")
    mask = solid_mask(shape_id, s, xs, ys)
    occ = mask.reshape(n, k, n, k).mean(axis=(1, 3))
    return UnitCellGrid(resolution=n, occupancy=occ)


def boundary_polyline(shape_id: str, s: float = 1.0, segments: int = 512) -> np.ndarray:
    """Closed boundary loop of the solid at size ``s``, centered at the origin.

    Returns an (N, 2) vertex array; the loop closes from the last vertex back
    to the first. Vertices are in unit-cell lengths (add (0.5, 0.5) to place
    the shape in the cell).
    """
    _check_shape_id(shape_id)
    if s <= 0.0:
        return np.zeros((0, 2))
    half = 0.5 * s
    if shape_id == "circle":
        t = np.linspace(0.0, 2.0 * math.pi, segments, endpoint=False)
        return np.column_stack([half * np.cos(t), half * np.sin(t)])
    if shape_id == "square":
        q = max(segments // 4, 1)
        u = np.linspace(-half, half, q, endpoint=False)
        top = np.column_stack([u, np.full(q, half)])
        right = np.column_stack([np.full(q, half), -u])
        bottom = np.column_stack([-u, np.full(q, -half)])
        left = np.column_stack([np.full(q, -half), u])
        return np.vstack([top, right, bottom, left])
    if shape_id == "ellipse":
        t = np.linspace(0.0, 2.0 * math.pi, segments, endpoint=False)
        return np.column_stack([half * np.cos(t), 0.5 * half * np.sin(t)])
    if shape_id == "squircle":
        t = np.linspace(0.0, 2.0 * math.pi, segments, endpoint=False)
        c, sn = np.cos(t), np.sin(t)
        # (|cos|^(1/2))^4 = cos^2, so cos^2 + sin^2 = 1 parametrizes x^4+y^4=r^4
        return np.column_stack(
            [half * np.sign(c) * np.sqrt(np.abs(c)), half * np.sign(sn) * np.sqrt(np.abs(sn))]
        )
    if shape_id in _FISH_THICKNESS:
        m = max(segments // 2, 2)
        # cosine clustering resolves the blunt leading edge
        xi = 0.5 * (1.0 - np.cos(np.linspace(0.0, math.pi, m)))
        yt = s * _half_thickness(shape_id, xi)
        xc = s * (xi - 0.5)
        upper = np.column_stack([xc, yt])
        lower = np.column_stack([xc[::-1][1:-1], -yt[::-1][1:-1]])
        return np.vstack([upper, lower])
    # mucosa
    phi = np.linspace(0.0, 2.0 * math.pi, segments, endpoint=False)
    r = s * _mucosa_radius(shape_id, phi)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def _polyline_length(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    d = np.diff(np.vstack([points, points[:1]]), axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def perimeter_max(shape_id: str) -> float:
    """Boundary length at s=1, in unit-cell side lengths.

    Closed forms where available (circle, square, ellipse); otherwise the
    length of a dense boundary polyline.
    """
    _check_shape_id(shape_id)
    if shape_id == "circle":
        return math.pi
    if shape_id == "square":
        return 4.0
    if shape_id == "ellipse":
        # perimeter of semi-axes (1/2, 1/4)
        return 2.0 * float(special.ellipe(0.75))
    return _polyline_length(boundary_polyline(shape_id, 1.0, _PERIMETER_SEGMENTS))


def volume_fraction_max(shape_id: str) -> float:
    """Solid area fraction at s=1."""
    _check_shape_id(shape_id)
    if shape_id == "circle":
        return math.pi / 4.0
    if shape_id == "square":
        return 1.0
    if shape_id == "ellipse":
        return math.pi / 8.0
    if shape_id == "squircle":
        # area of x^4 + y^4 <= (1/2)^4
        g = special.gamma
        return float(g(1.25) ** 2 / g(1.5))
    if shape_id in _FISH_THICKNESS:
        t = _FISH_THICKNESS[shape_id]
        a0, a1, a2, a3, a4 = _PROFILE_COEFFS
        return 10.0 * t * (a0 * 2.0 / 3.0 + a1 / 2.0 + a2 / 3.0 + a3 / 4.0 + a4 / 5.0)
    # mucosa: (1/2) integral of r(phi)^2 over a full turn
    return math.pi * (_MUCOSA_BASE**2 + 0.5 * _MUCOSA_AMP**2)


def _shape_params(shape_id: str) -> dict:
    if shape_id == "squircle":
        return {"exponent": 4.0}
    if shape_id in _FISH_THICKNESS:
        return {"thickness_ratio": _FISH_THICKNESS[shape_id]}
    if shape_id == "ellipse":
        return {"axis_ratio": 2.0}
    if shape_id in _MUCOSA_PERIODS:
        return {
            "periods": _MUCOSA_PERIODS[shape_id],
            "base_radius": _MUCOSA_BASE,
            "corrugation": _MUCOSA_AMP,
        }
    return {}


@lru_cache(maxsize=None)
def family(shape_id: str) -> MicrostructureFamily:
    """Catalog entry for one shape id (perimeter and volume are cached)."""
    _check_shape_id(shape_id)
    return MicrostructureFamily(
        id=shape_id,
        params=_shape_params(shape_id),
        gamma_max=perimeter_max(shape_id),
        v_max=volume_fraction_max(shape_id),
    )


def full_catalog() -> tuple[MicrostructureFamily, ...]:
    return tuple(family(sid) for sid in SHAPE_IDS)


def resolve_shapes(spec: str | list[str]) -> list[str]:
    """Expand a shape selection: 'all', 'first:m', a name list, or one name."""
    if isinstance(spec, str):
        if spec == "all":
            return list(SHAPE_IDS)
        if spec.startswith("first:"):
            m = int(spec.split(":", 1)[1])
            if not 1 <= m <= len(SHAPE_IDS):
                raise InputDomainError(f"shape count {m} outside 1..{len(SHAPE_IDS)}")
            return list(SHAPE_IDS[:m])
        spec = [s.strip() for s in spec.split(",") if s.strip()]
    for sid in spec:
        _check_shape_id(sid)
    if not spec:
        raise InputDomainError("shape selection is empty")
    return list(spec)


def catalog_json() -> str:
    """Catalog dump used for documentation and test goldens."""
    entries = [
        {
            "id": fam.id,
            "params": fam.params,
            "gamma_max": fam.gamma_max,
            "v_max": fam.v_max,
        }
        for fam in full_catalog()
    ]
    return json.dumps({"schema_version": 1, "shapes": entries}, indent=2)
