"""Unit-cell permeability by periodic Stokes-Brinkman solves.

For every microstructure and size, two flow problems are solved on the
periodic unit cell, one with a unit body force along x and one along y.
Solid subcells act through a volumetric drag proportional to their solid
fraction. Volume-averaging the resulting velocities gives the rows of the
2x2 permeability tensor; at the default orientation every catalog shape
is mirror-symmetric about both axes, so the off-diagonal averages vanish
and only the diagonal is kept.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import fea, geometry
from .errors import DegenerateCellError, InputDomainError, SingularSystemError

PERMEABILITY_FLOOR = 1e-7
ALPHA_SOLID = 1e7

# Default unit-cell resolution is a runtime/accuracy compromise: a full
# 8-shape x 6-size dataset stays within a ~2 minute budget on one core.
DEFAULT_RESOLUTION = 48
DEFAULT_SIZES = tuple(np.linspace(1.0 / 6.0, 1.0, 6))


@dataclass(frozen=True)
class PermeabilitySample:
    """Diagonal permeability of one shape at one size."""

    shape_id: str
    s: float
    c00: float
    c11: float
    floored: bool = False
    offdiag_max: float = 0.0


@dataclass
class HomogenizationDataset:
    """Permeability samples for a set of shapes over a common size grid."""

    shape_ids: list[str]
    sizes: np.ndarray
    c00: dict[str, np.ndarray]
    c11: dict[str, np.ndarray]
    floored: dict[str, np.ndarray]
    gamma_max: dict[str, float]
    v_max: dict[str, float]
    resolution: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=float)
        if sizes.size and np.any(np.diff(sizes) <= 0):
            raise InputDomainError("size grid must be strictly increasing")
        self.sizes = sizes
        for sid in self.shape_ids:
            if len(self.c00[sid]) != sizes.size or len(self.c11[sid]) != sizes.size:
                raise InputDomainError(f"shape {sid}: sample count does not match size grid")

    def samples(self, shape_id: str) -> list[PermeabilitySample]:
        return [
            PermeabilitySample(
                shape_id=shape_id,
                s=float(s),
                c00=float(self.c00[shape_id][i]),
                c11=float(self.c11[shape_id][i]),
                floored=bool(self.floored[shape_id][i]),
            )
            for i, s in enumerate(self.sizes)
        ]

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "resolution": self.resolution,
            "sizes": [float(s) for s in self.sizes],
            "metadata": self.metadata,
            "shapes": [
                {
                    "id": sid,
                    "gamma_max": self.gamma_max[sid],
                    "v_max": self.v_max[sid],
                    "c00": [float(c) for c in self.c00[sid]],
                    "c11": [float(c) for c in self.c11[sid]],
                    "floored": [bool(b) for b in self.floored[sid]],
                }
                for sid in self.shape_ids
            ],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HomogenizationDataset":
        doc = json.loads(text)
        if doc.get("schema_version") != 1:
            raise InputDomainError(f"unsupported dataset schema {doc.get('schema_version')!r}")
        shape_ids = [entry["id"] for entry in doc["shapes"]]
        return cls(
            shape_ids=shape_ids,
            sizes=np.array(doc["sizes"], dtype=float),
            c00={e["id"]: np.array(e["c00"]) for e in doc["shapes"]},
            c11={e["id"]: np.array(e["c11"]) for e in doc["shapes"]},
            floored={e["id"]: np.array(e["floored"], dtype=bool) for e in doc["shapes"]},
            gamma_max={e["id"]: float(e["gamma_max"]) for e in doc["shapes"]},
            v_max={e["id"]: float(e["v_max"]) for e in doc["shapes"]},
            resolution=int(doc["resolution"]),
            metadata=doc.get("metadata", {}),
        )


@dataclass
class UnitCellSolution:
    """One periodic solve: velocity averages plus diagnostics."""

    mesh: fea.Mesh
    solution: fea.FlowSolution
    mean_u: float
    mean_v: float
    mean_divergence: float


def _mean_velocity(mesh: fea.Mesh, templates: fea.ElementTemplates, U: np.ndarray):
    nodes = mesh.elem_vel_nodes
    w = templates.load
    mean_u = float((U[2 * nodes] * w).sum())
    mean_v = float((U[2 * nodes + 1] * w).sum())
    return mean_u, mean_v  # cell volume is 1


def mean_divergence(mesh: fea.Mesh, templates: fea.ElementTemplates, U: np.ndarray) -> float:
    """Volume integral of div(u), from the same quadrature as assembly."""
    h = mesh.h
    total = 0.0
    ue = U[mesh.elem_vel_dofs]
    for i, xi in enumerate(fea._GAUSS_PTS):
        for j, eta in enumerate(fea._GAUSS_PTS):
            w = fea._GAUSS_WTS[i] * fea._GAUSS_WTS[j] * h * h / 4.0
            gx = (2.0 / h) * np.outer(fea._dq2(xi), fea._q2(eta)).ravel()
            gy = (2.0 / h) * np.outer(fea._q2(xi), fea._dq2(eta)).ravel()
            total += w * float((ue[:, 0::2] @ gx + ue[:, 1::2] @ gy).sum())
    return total


def solve_unit_cell(
    grid: geometry.UnitCellGrid,
    force_axis: str,
    mu: float = 1.0,
    alpha_solid: float = ALPHA_SOLID,
    alpha_fluid: float = 0.0,
) -> UnitCellSolution:
    """Periodic Stokes-Brinkman solve with a unit body force along one axis.

    Per-cell drag is ``alpha_solid * occupancy + alpha_fluid``. A grid with
    no drag anywhere is singular under periodic forcing and is rejected.
    """
    if force_axis not in ("x", "y"):
        raise InputDomainError(f"force axis must be 'x' or 'y', got {force_axis!r}")
    alpha = alpha_solid * grid.occupancy.ravel() + alpha_fluid
    if alpha.max() <= 0.0:
        raise DegenerateCellError("all-fluid periodic cell: uniform body force has no solution")
    mesh = fea.build_periodic_mesh(grid.resolution)
    templates = fea.element_matrices(mesh, mu=mu)
    dinv = np.zeros((mesh.n_elements, 2, 2))
    dinv[:, 0, 0] = alpha
    dinv[:, 1, 1] = alpha
    force = (1.0, 0.0) if force_axis == "x" else (0.0, 1.0)
    system = fea.assemble(mesh, templates, dinv=dinv, body_force=force)
    solution = fea.solve_stokes(system)
    mu_, mv_ = _mean_velocity(mesh, templates, solution.U)
    return UnitCellSolution(
        mesh=mesh,
        solution=solution,
        mean_u=mu_,
        mean_v=mv_,
        mean_divergence=mean_divergence(mesh, templates, solution.U),
    )


def _solve_both_axes(grid: geometry.UnitCellGrid, mu, alpha_solid, alpha_fluid):
    """Both forcings share one factorization (K is force-independent)."""
    alpha = alpha_solid * grid.occupancy.ravel() + alpha_fluid
    if alpha.max() <= 0.0:
        raise DegenerateCellError("all-fluid periodic cell: uniform body force has no solution")
    mesh = fea.build_periodic_mesh(grid.resolution)
    templates = fea.element_matrices(mesh, mu=mu)
    dinv = np.zeros((mesh.n_elements, 2, 2))
    dinv[:, 0, 0] = alpha
    dinv[:, 1, 1] = alpha
    system = fea.assemble(mesh, templates, dinv=dinv, body_force=(1.0, 0.0))
    sol_x = fea.solve_stokes(system)
    rhs_y = np.zeros(mesh.n_dofs)
    np.add.at(
        rhs_y, (2 * mesh.elem_vel_nodes + 1).ravel(), np.tile(templates.load, mesh.n_elements)
    )
    full_y = system.solve_full(rhs_y)
    u0, v0 = _mean_velocity(mesh, templates, sol_x.U)
    u1, v1 = _mean_velocity(mesh, templates, full_y[: 2 * mesh.n_vel_nodes])
    return u0, v0, u1, v1


def permeability_tensor(
    shape_id: str,
    s: float,
    n: int = DEFAULT_RESOLUTION,
    mu: float = 1.0,
    alpha_solid: float = ALPHA_SOLID,
    floor: float = PERMEABILITY_FLOOR,
) -> PermeabilitySample:
    """Volume-averaged permeability diagonal of one shape at one size.

    Degenerate cells (no drag, or a failed factorization) fall back to the
    permeability floor and are flagged.
    """
    grid = geometry.rasterize(shape_id, s, n)
    try:
        u0, v0, u1, v1 = _solve_both_axes(grid, mu, alpha_solid, 0.0)
    except (DegenerateCellError, SingularSystemError):
        return PermeabilitySample(shape_id=shape_id, s=s, c00=floor, c11=floor, floored=True)
    offdiag = max(abs(v0), abs(u1))
    floored = u0 < floor or v1 < floor
    return PermeabilitySample(
        shape_id=shape_id,
        s=s,
        c00=max(u0, floor),
        c11=max(v1, floor),
        floored=bool(floored),
        offdiag_max=float(offdiag),
    )


def build_dataset(
    shape_ids=geometry.SHAPE_IDS,
    sizes=DEFAULT_SIZES,
    n: int = DEFAULT_RESOLUTION,
    mu: float = 1.0,
    alpha_solid: float = ALPHA_SOLID,
) -> HomogenizationDataset:
    """Solve every shape at every size (two solves each, one factorization)."""
    sizes = np.asarray(list(sizes), dtype=float)
    if sizes.size and sizes.size < 6:
        raise InputDomainError("need at least 6 size samples for the quintic fit")
    started = time.perf_counter()
    c00, c11, floored, gmax, vmax = {}, {}, {}, {}, {}
    for sid in shape_ids:
        fam = geometry.family(sid)
        rows = [permeability_tensor(sid, float(s), n, mu, alpha_solid) for s in sizes]
        c00[sid] = np.array([r.c00 for r in rows])
        c11[sid] = np.array([r.c11 for r in rows])
        floored[sid] = np.array([r.floored for r in rows], dtype=bool)
        gmax[sid] = fam.gamma_max
        vmax[sid] = fam.v_max
    return HomogenizationDataset(
        shape_ids=list(shape_ids),
        sizes=sizes,
        c00=c00,
        c11=c11,
        floored=floored,
        gamma_max=gmax,
        v_max=vmax,
        resolution=n,
        metadata={
            "mu": mu,
            "alpha_solid": alpha_solid,
            "permeability_floor": PERMEABILITY_FLOOR,
            "subsamples": 4,
            "build_seconds": round(time.perf_counter() - started, 3),
        },
    )
