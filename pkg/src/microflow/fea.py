"""Stokes-Brinkman finite elements on structured quadrilateral meshes.

Velocity is biquadratic (9-node) and pressure bilinear (4-node), the
inf-sup stable Taylor-Hood pair. The discrete system is the symmetric
saddle point

    [ A   B   0 ] [U]   [f]
    [ B^T 0   a ] [P] = [0]
    [ 0   a^T 0 ] [l]   [0]

where A combines the viscous block with a per-element Brinkman drag
tensor, B couples velocity divergence to pressure, and the single
multiplier row ``a`` pins the pressure mean to zero. Dirichlet velocity
values are imposed by reduction (rows/columns eliminated), not penalty.

Meshes are uniform with square elements. Periodic meshes (used by the
unit-cell permeability solves) identify opposite-boundary velocity and
pressure nodes and carry no Dirichlet data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import ConfigError, InputDomainError, SingularSystemError

try:  # UMFPACK (via cvxopt) orders these saddle systems far better than SuperLU
    import cvxopt as _cvxopt
    import cvxopt.umfpack as _umfpack
except ImportError:  # pragma: no cover - cvxopt is a declared dependency
    _cvxopt = None
    _umfpack = None


class _UmfpackFactor:
    """Cached UMFPACK factorization with a numpy solve interface."""

    def __init__(self, matrix_csc: sparse.csc_matrix):
        coo = matrix_csc.tocoo()
        self._a = _cvxopt.spmatrix(
            coo.data, coo.row.astype(int), coo.col.astype(int), coo.shape
        )
        try:
            symbolic = _umfpack.symbolic(self._a)
            self._numeric = _umfpack.numeric(self._a, symbolic)
        except ArithmeticError as exc:
            raise SingularSystemError(f"UMFPACK factorization failed: {exc}") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = _cvxopt.matrix(np.asarray(rhs, dtype=float))
        try:
            _umfpack.solve(self._a, self._numeric, x)
        except ArithmeticError as exc:
            raise SingularSystemError(f"UMFPACK solve failed: {exc}") from exc
        return np.asarray(x).ravel()


def factorize_csc(matrix: sparse.csc_matrix):
    """Direct sparse factorization (UMFPACK when available, else SuperLU)."""
    if _umfpack is not None:
        return _UmfpackFactor(matrix)
    try:
        return splu(matrix)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc

_GAUSS_PTS = (-math.sqrt(0.6), 0.0, math.sqrt(0.6))
_GAUSS_WTS = (5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0)

_GEOM_TOL = 1e-9


def _q2(x: float) -> np.ndarray:
    return np.array([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)])


def _dq2(x: float) -> np.ndarray:
    return np.array([x - 0.5, -2.0 * x, x + 0.5])


def _q1(x: float) -> np.ndarray:
    return np.array([0.5 * (1.0 - x), 0.5 * (1.0 + x)])


@dataclass
class Mesh:
    """Structured Q2-Q1 mesh with contiguous dof numbering.

    Velocity dofs come first (u, v interleaved per node), then pressure
    dofs, then the single pressure-mean multiplier. Elements are numbered
    x-major: ``e = ix * ny + iy``.
    """

    nx: int
    ny: int
    lx: float
    ly: float
    periodic: bool
    h: float = field(init=False)
    n_elements: int = field(init=False)
    n_vel_nodes: int = field(init=False)
    n_pres_nodes: int = field(init=False)
    n_dofs: int = field(init=False)
    elem_vel_nodes: np.ndarray = field(init=False, repr=False)
    elem_vel_dofs: np.ndarray = field(init=False, repr=False)
    elem_pres_dofs: np.ndarray = field(init=False, repr=False)
    centers: np.ndarray = field(init=False, repr=False)
    vel_node_xy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nx, ny = self.nx, self.ny
        if nx < 2 or ny < 2:
            raise InputDomainError(f"mesh needs at least 2x2 elements, got {nx}x{ny}")
        hx, hy = self.lx / nx, self.ly / ny
        if abs(hx - hy) > _GEOM_TOL * max(hx, hy):
            raise InputDomainError(f"elements must be square: lx/nx={hx} != ly/ny={hy}")
        self.h = hx
        self.n_elements = nx * ny

        dx = np.arange(3)
        ex, ey = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        gx = 2 * ex[..., None, None] + dx[None, None, :, None]  # (nx,ny,3,3)
        gy = 2 * ey[..., None, None] + dx[None, None, None, :]
        if self.periodic:
            nvx, nvy = 2 * nx, 2 * ny
            gx, gy = gx % nvx, gy % nvy
        else:
            nvx, nvy = 2 * nx + 1, 2 * ny + 1
        self.n_vel_nodes = nvx * nvy
        vel_nodes = (gx * nvy + gy).reshape(self.n_elements, 9)

        dp = np.arange(2)
        px = ex[..., None, None] + dp[None, None, :, None]
        py = ey[..., None, None] + dp[None, None, None, :]
        if self.periodic:
            npx, npy = nx, ny
            px, py = px % npx, py % npy
        else:
            npx, npy = nx + 1, ny + 1
        self.n_pres_nodes = npx * npy
        pres_nodes = (px * npy + py).reshape(self.n_elements, 4)

        self.n_dofs = 2 * self.n_vel_nodes + self.n_pres_nodes + 1
        self.elem_vel_nodes = vel_nodes
        dofs = np.empty((self.n_elements, 18), dtype=np.int64)
        dofs[:, 0::2] = 2 * vel_nodes
        dofs[:, 1::2] = 2 * vel_nodes + 1
        self.elem_vel_dofs = dofs
        self.elem_pres_dofs = 2 * self.n_vel_nodes + pres_nodes

        self.centers = np.column_stack(
            [(ex.ravel() + 0.5) * self.h, (ey.ravel() + 0.5) * self.h]
        )
        ids = np.arange(self.n_vel_nodes)
        self.vel_node_xy = np.column_stack([ids // nvy * 0.5 * self.h, ids % nvy * 0.5 * self.h])

    @property
    def multiplier_dof(self) -> int:
        return self.n_dofs - 1


def build_mesh(nx: int, ny: int, lx: float, ly: float) -> Mesh:
    """Uniform mesh over [0, lx] x [0, ly] with square elements."""
    return Mesh(nx=nx, ny=ny, lx=lx, ly=ly, periodic=False)


def build_periodic_mesh(n: int) -> Mesh:
    """Periodic unit-cell mesh over [0, 1]^2 (opposite boundaries identified)."""
    return Mesh(nx=n, ny=n, lx=1.0, ly=1.0, periodic=True)


@dataclass(frozen=True)
class ElementTemplates:
    """Reference-element matrices, shared by all elements of a uniform mesh."""

    mu: float
    h: float
    a_mu: np.ndarray  # (18,18) viscous block
    mass: np.ndarray  # (9,9) scalar velocity mass (Brinkman kernel)
    b_div: np.ndarray  # (18,4) divergence coupling
    a_p: np.ndarray  # (4,) pressure integrals (zero-mean row)
    load: np.ndarray  # (9,) scalar body-force integrals


def element_matrices(mesh: Mesh, mu: float = 1.0) -> ElementTemplates:
    """Exact 3x3 Gauss integration of the element integrals on an h-square."""
    if mu <= 0:
        raise InputDomainError(f"viscosity mu={mu} must be positive")
    h = mesh.h
    a_mu = np.zeros((18, 18))
    mass = np.zeros((9, 9))
    b_div = np.zeros((18, 4))
    a_p = np.zeros(4)
    load = np.zeros(9)
    jac = h * h / 4.0  # area scale, d(x,y) = (h/2)^2 d(xi,eta)
    for i, xi in enumerate(_GAUSS_PTS):
        for j, eta in enumerate(_GAUSS_PTS):
            w = _GAUSS_WTS[i] * _GAUSS_WTS[j] * jac
            n9 = np.outer(_q2(xi), _q2(eta)).ravel()
            gx = (2.0 / h) * np.outer(_dq2(xi), _q2(eta)).ravel()
            gy = (2.0 / h) * np.outer(_q2(xi), _dq2(eta)).ravel()
            l4 = np.outer(_q1(xi), _q1(eta)).ravel()
            mass += w * np.outer(n9, n9)
            load += w * n9
            a_p += w * l4
            a_mu[0::2, 0::2] += w * mu * (2.0 * np.outer(gx, gx) + np.outer(gy, gy))
            a_mu[1::2, 1::2] += w * mu * (2.0 * np.outer(gy, gy) + np.outer(gx, gx))
            a_mu[0::2, 1::2] += w * mu * np.outer(gy, gx)
            a_mu[1::2, 0::2] += w * mu * np.outer(gx, gy)
            b_div[0::2, :] += w * np.outer(gx, l4)
            b_div[1::2, :] += w * np.outer(gy, l4)
    return ElementTemplates(mu=mu, h=h, a_mu=a_mu, mass=mass, b_div=b_div, a_p=a_p, load=load)


@dataclass(frozen=True)
class FlowSegment:
    """Parabolic Dirichlet velocity profile on part of one boundary side.

    The velocity is normal to the side; ``peak`` is signed along the +x
    axis for left/right segments and along +y for bottom/top ones. The
    profile vanishes at the segment endpoints.
    """

    side: str
    center: float
    span: float
    peak: float

    def __post_init__(self):
        if self.side not in ("left", "right", "bottom", "top"):
            raise ConfigError(f"unknown boundary side {self.side!r}")
        if self.span <= 0:
            raise ConfigError("segment span must be positive")

    def signed_outflux(self) -> float:
        # integral of the parabola is 2/3 peak span; outward normal flips
        # the sign on the left/bottom sides
        direction = 1.0 if self.side in ("right", "top") else -1.0
        return direction * (2.0 / 3.0) * self.peak * self.span


@dataclass
class BoundaryConditions:
    """Dirichlet records; every unlisted boundary velocity dof is no-slip."""

    segments: list[FlowSegment]

    def validate(self) -> None:
        total_in = sum(max(-seg.signed_outflux(), 0.0) for seg in self.segments)
        net = sum(seg.signed_outflux() for seg in self.segments)
        scale = max(total_in, 1e-12)
        if abs(net) > 1e-8 * scale:
            raise ConfigError(
                f"prescribed boundary flux does not balance: net outflux {net:g} "
                f"against total influx {total_in:g}"
            )

    def inflow(self) -> float:
        return sum(max(-seg.signed_outflux(), 0.0) for seg in self.segments)


def dirichlet_data(mesh: Mesh, bcs: BoundaryConditions) -> tuple[np.ndarray, np.ndarray]:
    """Fixed velocity dof indices and values for a non-periodic mesh."""
    if mesh.periodic:
        raise InputDomainError("periodic meshes take no Dirichlet data")
    bcs.validate()
    xy = mesh.vel_node_xy
    tol = _GEOM_TOL * max(mesh.lx, mesh.ly)
    on_side = {
        "left": xy[:, 0] <= tol,
        "right": xy[:, 0] >= mesh.lx - tol,
        "bottom": xy[:, 1] <= tol,
        "top": xy[:, 1] >= mesh.ly - tol,
    }
    boundary = on_side["left"] | on_side["right"] | on_side["bottom"] | on_side["top"]
    nodes = np.where(boundary)[0]
    values = np.zeros((mesh.n_vel_nodes, 2))
    for seg in bcs.segments:
        axis = 1 if seg.side in ("left", "right") else 0
        comp = 0 if seg.side in ("left", "right") else 1
        t = xy[:, axis]
        in_span = on_side[seg.side] & (np.abs(t - seg.center) <= seg.span / 2.0 + tol)
        prof = seg.peak * (1.0 - (2.0 * (t - seg.center) / seg.span) ** 2)
        values[in_span, comp] = np.where(seg.peak >= 0, np.maximum(prof, 0.0), np.minimum(prof, 0.0))[in_span]
    fixed = np.concatenate([2 * nodes, 2 * nodes + 1])
    vals = np.concatenate([values[nodes, 0], values[nodes, 1]])
    order = np.argsort(fixed)
    return fixed[order], vals[order]


def _check_drag_tensors(dinv: np.ndarray, n_elements: int) -> np.ndarray:
    dinv = np.asarray(dinv, dtype=float)
    if dinv.shape != (n_elements, 2, 2):
        raise InputDomainError(f"expected ({n_elements},2,2) drag tensors, got {dinv.shape}")
    scale = np.abs(dinv).max(axis=(1, 2))
    asym = np.abs(dinv[:, 0, 1] - dinv[:, 1, 0])
    bad = np.where(asym > 1e-9 * np.maximum(scale, 1.0))[0]
    if bad.size:
        raise InputDomainError(f"drag tensor of element {bad[0]} is not symmetric")
    tr = dinv[:, 0, 0] + dinv[:, 1, 1]
    det_disc = np.sqrt((dinv[:, 0, 0] - dinv[:, 1, 1]) ** 2 + 4.0 * dinv[:, 0, 1] ** 2)
    lam_min = 0.5 * (tr - det_disc)
    bad = np.where(lam_min < -1e-9 * np.maximum(scale, 1.0))[0]
    if bad.size:
        raise InputDomainError(
            f"drag tensor of element {bad[0]} has negative eigenvalue {lam_min[bad[0]]:g}"
        )
    return dinv


@dataclass
class AssembledSystem:
    """Assembled saddle-point system plus its solver-ready reduction.

    The full matrix carries the zero-mean pressure multiplier row. For the
    factorization that dense row is removed by pinning one pressure dof and
    the multiplier to zero; for balanced boundary data the solution is
    identical (the multiplier vanishes and the pressure is shifted to zero
    mean afterwards), and the residual is still verified against the full
    system.
    """

    mesh: Mesh
    templates: ElementTemplates
    dinv: np.ndarray
    matrix: sparse.csr_matrix  # full, unreduced
    rhs: np.ndarray
    free: np.ndarray  # all dofs minus Dirichlet-fixed
    fixed: np.ndarray
    fixed_values: np.ndarray
    keep: np.ndarray  # free minus {pinned pressure dof, multiplier}
    reduced_matrix: sparse.csc_matrix
    reduced_rhs: np.ndarray
    pressure_weights: np.ndarray  # assembled pressure integrals (zero-mean row)
    _lu: object = None

    def factorize(self):
        if self._lu is None:
            self._lu = factorize_csc(self.reduced_matrix)
        return self._lu

    def solve_reduced(self, rhs: np.ndarray) -> np.ndarray:
        return self.factorize().solve(rhs)

    def solve_full(self, rhs_full: np.ndarray) -> np.ndarray:
        """Solve for an alternative full-length right-hand side.

        Returns the full dof vector (Dirichlet dofs zero, pressure shifted
        to zero mean). Used for extra forcings and adjoint solves.
        """
        reduced = rhs_full[self.keep]
        if self.fixed.size:
            reduced = reduced - self.matrix[self.keep][:, self.fixed] @ self.fixed_values
        x = self.solve_reduced(reduced)
        full = np.zeros(self.mesh.n_dofs)
        full[self.keep] = x
        if self.fixed.size:
            full[self.fixed] = self.fixed_values
        nv2 = 2 * self.mesh.n_vel_nodes
        p = full[nv2 : nv2 + self.mesh.n_pres_nodes]
        p -= (self.pressure_weights @ p) / self.pressure_weights.sum()
        return full


def brinkman_element_blocks(mass: np.ndarray, dinv: np.ndarray) -> np.ndarray:
    """Per-element 18x18 Brinkman blocks: mass kernel contracted with the drag tensor."""
    n = dinv.shape[0]
    blocks = np.zeros((n, 18, 18))
    blocks[:, 0::2, 0::2] = dinv[:, 0, 0, None, None] * mass
    blocks[:, 0::2, 1::2] = dinv[:, 0, 1, None, None] * mass
    blocks[:, 1::2, 0::2] = dinv[:, 1, 0, None, None] * mass
    blocks[:, 1::2, 1::2] = dinv[:, 1, 1, None, None] * mass
    return blocks


def assemble(
    mesh: Mesh,
    templates: ElementTemplates,
    dinv: np.ndarray | None = None,
    bcs: BoundaryConditions | None = None,
    body_force: tuple[float, float] | None = None,
) -> AssembledSystem:
    """Assemble the global saddle-point system.

    ``dinv`` holds one symmetric positive-semidefinite 2x2 inverse
    permeability tensor per element (None means zero drag everywhere).
    Dirichlet conditions are imposed by reduction.
    """
    ne = mesh.n_elements
    if dinv is None:
        dinv = np.zeros((ne, 2, 2))
    dinv = _check_drag_tensors(dinv, ne)

    ke = templates.a_mu[None, :, :] + brinkman_element_blocks(templates.mass, dinv)
    vd = mesh.elem_vel_dofs
    pd = mesh.elem_pres_dofs
    rows_v = np.repeat(vd, 18, axis=1).ravel()
    cols_v = np.tile(vd, (1, 18)).ravel()

    rows_b = np.repeat(vd, 4, axis=1).ravel()
    cols_b = np.tile(pd, (1, 18)).ravel()
    data_b = np.tile(templates.b_div.ravel(), ne)

    mdof = np.full((ne, 4), mesh.multiplier_dof)
    rows_a = pd.ravel()
    cols_a = mdof.ravel()
    data_a = np.tile(templates.a_p, ne)

    rows = np.concatenate([rows_v, rows_b, cols_b, rows_a, cols_a])
    cols = np.concatenate([cols_v, cols_b, rows_b, cols_a, rows_a])
    data = np.concatenate([ke.ravel(), data_b, data_b, data_a, data_a])
    matrix = sparse.coo_matrix((data, (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)).tocsr()

    rhs = np.zeros(mesh.n_dofs)
    if body_force is not None:
        fx, fy = body_force
        if fx:
            np.add.at(rhs, (2 * mesh.elem_vel_nodes).ravel(), np.tile(fx * templates.load, ne))
        if fy:
            np.add.at(rhs, (2 * mesh.elem_vel_nodes + 1).ravel(), np.tile(fy * templates.load, ne))

    if bcs is not None:
        fixed, fixed_values = dirichlet_data(mesh, bcs)
    else:
        fixed = np.empty(0, dtype=np.int64)
        fixed_values = np.empty(0)
    free_mask = np.ones(mesh.n_dofs, dtype=bool)
    free_mask[fixed] = False
    free = np.where(free_mask)[0]

    # pin one pressure dof and the multiplier; see AssembledSystem docstring
    keep_mask = free_mask.copy()
    keep_mask[2 * mesh.n_vel_nodes] = False
    keep_mask[mesh.multiplier_dof] = False
    keep = np.where(keep_mask)[0]

    k_keep = matrix[keep]
    reduced = k_keep[:, keep].tocsc()
    reduced_rhs = rhs[keep]
    if fixed.size:
        reduced_rhs = reduced_rhs - k_keep[:, fixed] @ fixed_values

    pressure_weights = np.zeros(mesh.n_pres_nodes)
    np.add.at(
        pressure_weights,
        (mesh.elem_pres_dofs - 2 * mesh.n_vel_nodes).ravel(),
        np.tile(templates.a_p, ne),
    )

    return AssembledSystem(
        mesh=mesh,
        templates=templates,
        dinv=dinv,
        matrix=matrix,
        rhs=rhs,
        free=free,
        fixed=fixed,
        fixed_values=fixed_values,
        keep=keep,
        reduced_matrix=reduced,
        reduced_rhs=reduced_rhs,
        pressure_weights=pressure_weights,
    )


@dataclass
class FlowSolution:
    """Velocity/pressure fields plus the pressure-mean multiplier."""

    U: np.ndarray  # (2 * n_vel_nodes,), u and v interleaved
    P: np.ndarray  # (n_pres_nodes,), solver-convention sign
    multiplier: float
    residual: float

    @property
    def u(self) -> np.ndarray:
        return self.U[0::2]

    @property
    def v(self) -> np.ndarray:
        return self.U[1::2]

    @property
    def pressure(self) -> np.ndarray:
        # the +B convention of the saddle system stores the negative of
        # the physical pressure
        return -self.P


def solve_stokes(system: AssembledSystem) -> FlowSolution:
    """Direct sparse solve with a residual guard against the full system."""
    full = system.solve_full(system.rhs)
    if not np.all(np.isfinite(full)):
        raise SingularSystemError("solve produced non-finite values (singular system?)")
    # residual of the unreduced saddle system on the non-Dirichlet rows
    scale = np.linalg.norm(system.reduced_rhs)
    if scale > 0:
        res = (system.matrix @ full - system.rhs)[system.free]
        rel = float(np.linalg.norm(res)) / scale
        if rel > 1e-9:
            raise SingularSystemError(f"solver residual {rel:g} exceeds 1e-9")
    else:
        rel = 0.0
    nv2 = 2 * system.mesh.n_vel_nodes
    return FlowSolution(
        U=full[:nv2],
        P=full[nv2 : nv2 + system.mesh.n_pres_nodes],
        multiplier=float(full[-1]),
        residual=rel,
    )


def mean_pressure(mesh: Mesh, templates: ElementTemplates, P: np.ndarray) -> float:
    acc = np.zeros(mesh.n_pres_nodes)
    np.add.at(acc, (mesh.elem_pres_dofs - 2 * mesh.n_vel_nodes).ravel(), np.tile(templates.a_p, mesh.n_elements))
    return float(acc @ P) / (mesh.lx * mesh.ly)


def element_power(
    mesh: Mesh, templates: ElementTemplates, dinv: np.ndarray, U: np.ndarray
) -> np.ndarray:
    """Per-element dissipated power, 1/2 U_e^T [A_mu + Brinkman] U_e."""
    ue = U[mesh.elem_vel_dofs]
    j_mu = 0.5 * np.einsum("ei,ij,ej->e", ue, templates.a_mu, ue)
    ux, uy = ue[:, 0::2], ue[:, 1::2]
    g00 = np.einsum("ea,ab,eb->e", ux, templates.mass, ux)
    g01 = np.einsum("ea,ab,eb->e", ux, templates.mass, uy)
    g10 = np.einsum("ea,ab,eb->e", uy, templates.mass, ux)
    g11 = np.einsum("ea,ab,eb->e", uy, templates.mass, uy)
    j_br = 0.5 * (
        dinv[:, 0, 0] * g00 + dinv[:, 0, 1] * g01 + dinv[:, 1, 0] * g10 + dinv[:, 1, 1] * g11
    )
    return j_mu + j_br


def dissipated_power(
    mesh: Mesh, templates: ElementTemplates, dinv: np.ndarray, U: np.ndarray
) -> float:
    """Total dissipated power of a solved velocity field."""
    return float(element_power(mesh, templates, dinv, U).sum())


def boundary_flux(mesh: Mesh, U: np.ndarray) -> tuple[float, float]:
    """(net outflux, gross influx) through the domain boundary.

    Edge integrals use Simpson's rule, exact for the quadratic velocity
    trace of a Q2 element.
    """
    if mesh.periodic:
        raise InputDomainError("boundary flux is undefined on a periodic mesh")
    u, v = U[0::2], U[1::2]
    nvy = 2 * mesh.ny + 1
    h = mesh.h

    def node(gx, gy):
        return gx * nvy + gy

    net = 0.0
    influx = 0.0
    for iy in range(mesh.ny):
        for gx, sign in ((0, -1.0), (2 * mesh.nx, 1.0)):
            ids = [node(gx, 2 * iy), node(gx, 2 * iy + 1), node(gx, 2 * iy + 2)]
            q = sign * h / 6.0 * (u[ids[0]] + 4.0 * u[ids[1]] + u[ids[2]])
            net += q
            influx += max(-q, 0.0)
    for ix in range(mesh.nx):
        for gy, sign in ((0, -1.0), (2 * mesh.ny, 1.0)):
            ids = [node(2 * ix, gy), node(2 * ix + 1, gy), node(2 * ix + 2, gy)]
            q = sign * h / 6.0 * (v[ids[0]] + 4.0 * v[ids[1]] + v[ids[2]])
            net += q
            influx += max(-q, 0.0)
    return float(net), float(influx)


def write_vtk(
    path,
    mesh: Mesh,
    solution: FlowSolution | None = None,
    cell_fields: dict[str, np.ndarray] | None = None,
) -> None:
    """Legacy-VTK structured grid with point fields (velocity magnitude,
    pressure) and per-element cell fields (design variables, power)."""
    if mesh.periodic:
        raise InputDomainError("VTK export expects a non-periodic mesh")
    nx, ny, h = mesh.nx, mesh.ny, mesh.h
    npx, npy = nx + 1, ny + 1
    lines = [
        "# vtk DataFile Version 3.0",
        "microflow fields",
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {npx} {npy} 1",
        f"POINTS {npx * npy} double",
    ]
    for j in range(npy):
        for i in range(npx):
            lines.append(f"{i * h:.9g} {j * h:.9g} 0")
    if solution is not None:
        nvy = 2 * ny + 1
        corner = (2 * np.arange(npx)[None, :] * nvy + 2 * np.arange(npy)[:, None]).ravel()
        vmag = np.hypot(solution.u[corner], solution.v[corner])
        pres = solution.pressure.reshape(npx, npy).T.ravel()  # pressure nodes are x-major
        lines.append(f"POINT_DATA {npx * npy}")
        lines.append("SCALARS velocity_magnitude double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{val:.9g}" for val in vmag)
        lines.append("SCALARS pressure double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{val:.9g}" for val in pres)
    if cell_fields:
        lines.append(f"CELL_DATA {mesh.n_elements}")
        for name, values in cell_fields.items():
            grid = np.asarray(values).reshape(nx, ny).T.ravel()  # elements are x-major
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{val:.9g}" for val in grid)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_design_csv(path, mesh: Mesh, shape_ids, rho, s, theta, j_e) -> None:
    """Per-element design table: id, center, densities, size, angle, power."""
    rho = np.asarray(rho)
    header = ["element", "x", "y"] + [f"rho_{sid}" for sid in shape_ids] + ["s", "theta", "J_e"]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for e in range(mesh.n_elements):
            row = [str(e), f"{mesh.centers[e, 0]:.10g}", f"{mesh.centers[e, 1]:.10g}"]
            row += [f"{val:.10g}" for val in rho[e]]
            row += [f"{s[e]:.10g}", f"{theta[e]:.10g}", f"{j_e[e]:.10g}"]
            fh.write(",".join(row) + "\n")
