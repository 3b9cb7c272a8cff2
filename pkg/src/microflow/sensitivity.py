"""Loss evaluation and end-to-end gradients through the flow solve.

The loss is the augmented-Lagrangian form

    L = J / J0 + alpha * g^2 + lambda * g

with J the dissipated power and g the active constraint (contact area or
fluid volume). Its gradient with respect to the network weights is a
fixed-structure reverse sweep: output heads -> surrogate -> element drag
tensors -> flow solve. The solve contributes through one adjoint system
with the already-factorized (symmetric) matrix, so a gradient costs about
one extra triangular solve on top of the forward evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fea
from .designfield import DesignField, DesignSnapshot
from .errors import InputDomainError
from .surrogate import PermeabilitySurrogate, mixed_eigenvalues

CONSTRAINT_MODES = ("contact_area", "volume")


@dataclass
class FlowProblem:
    """Everything fixed during one optimization run."""

    mesh: fea.Mesh
    templates: fea.ElementTemplates
    bcs: fea.BoundaryConditions
    surrogate: PermeabilitySurrogate  # restricted to the active shapes, in order
    constraint_mode: str
    constraint_value: float
    size_fixed: float | None = None
    orientation_enabled: bool = True

    def __post_init__(self):
        if self.constraint_mode not in CONSTRAINT_MODES:
            raise InputDomainError(f"unknown constraint mode {self.constraint_mode!r}")
        if self.constraint_mode == "contact_area" and self.constraint_value <= 0:
            raise InputDomainError("contact-area target must be positive")
        if self.constraint_mode == "volume" and not 0 < self.constraint_value <= 1:
            raise InputDomainError("volume fraction target must lie in (0, 1]")

    @property
    def n_shapes(self) -> int:
        return len(self.surrogate.shape_ids)


@dataclass
class LossBreakdown:
    """One loss evaluation: objective, constraint, and their combination."""

    J: float
    g: float
    L: float
    J0: float


def loss(J: float, g: float, alpha: float, lam: float, J0: float) -> LossBreakdown:
    """Augmented-Lagrangian loss L = J/J0 + alpha g^2 + lambda g."""
    if J0 <= 0:
        raise InputDomainError(f"loss normalizer J0={J0} must be positive")
    return LossBreakdown(J=J, g=g, L=J / J0 + alpha * g * g + lam * g, J0=J0)


def apply_overrides(snapshot: DesignSnapshot, problem: FlowProblem) -> DesignSnapshot:
    """Fixed-size and orientation-off modes replace the respective heads."""
    s = snapshot.s
    theta = snapshot.theta
    if problem.size_fixed is not None:
        s = np.full_like(s, problem.size_fixed)
    if not problem.orientation_enabled:
        theta = np.zeros_like(theta)
    return DesignSnapshot(rho=snapshot.rho, s=s, theta=theta)


def constraint_value(snapshot: DesignSnapshot, problem: FlowProblem) -> float:
    """Active constraint value g for a per-element design snapshot."""
    surr = problem.surrogate
    h = problem.mesh.h
    if problem.constraint_mode == "contact_area":
        total = float((h * snapshot.s * (snapshot.rho @ surr.gamma_max)).sum())
        return 1.0 - total / problem.constraint_value
    cell = h * h
    fluid = float((cell * (1.0 - snapshot.s**2 * (snapshot.rho @ surr.v_max))).sum())
    total_volume = cell * problem.mesh.n_elements
    return fluid / (total_volume * problem.constraint_value) - 1.0


def _constraint_partials(snapshot: DesignSnapshot, problem: FlowProblem):
    """(dg/drho, dg/ds) for the active constraint (both explicit in zeta)."""
    surr = problem.surrogate
    h = problem.mesh.h
    n = snapshot.n_elements
    if problem.constraint_mode == "contact_area":
        scale = h / problem.constraint_value
        d_rho = -scale * snapshot.s[:, None] * surr.gamma_max[None, :]
        d_s = -scale * (snapshot.rho @ surr.gamma_max)
        return d_rho, d_s
    cell = h * h
    denom = cell * n * problem.constraint_value
    d_rho = -(cell / denom) * (snapshot.s**2)[:, None] * surr.v_max[None, :]
    d_s = -(cell / denom) * 2.0 * snapshot.s * (snapshot.rho @ surr.v_max)
    return d_rho, d_s


def drag_tensors(e0: np.ndarray, e1: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Inverse effective permeability per element, (N, 2, 2).

    The mixed tensor shares the rotation across shapes, so its inverse is
    the same rotation applied to the reciprocal eigenvalues.
    """
    d0, d1 = 1.0 / e0, 1.0 / e1
    c, sn = np.cos(theta), np.sin(theta)
    out = np.empty((e0.size, 2, 2))
    out[:, 0, 0] = d0 * c * c + d1 * sn * sn
    out[:, 1, 1] = d0 * sn * sn + d1 * c * c
    out[:, 0, 1] = (d0 - d1) * sn * c
    out[:, 1, 0] = out[:, 0, 1]
    return out


@dataclass
class Evaluation:
    """Forward (and optionally backward) results at one set of weights."""

    breakdown: LossBreakdown
    gradient: np.ndarray | None
    solution: fea.FlowSolution
    element_power: np.ndarray
    snapshot: DesignSnapshot  # after overrides


def evaluate(
    field: DesignField,
    problem: FlowProblem,
    p: float,
    alpha: float,
    lam: float,
    J0: float | None,
    need_grad: bool = True,
) -> Evaluation:
    """One loss (and gradient) evaluation at the field's current weights.

    ``J0=None`` normalizes by the evaluated J itself (used at epoch 0).
    """
    mesh, tmpl = problem.mesh, problem.templates
    raw_snap, cache = field.forward_cached(mesh.centers)
    snap = apply_overrides(raw_snap, problem)

    e0, e1, floor0, floor1, c00, c11, d00, d11 = mixed_eigenvalues(
        problem.surrogate, snap.rho, snap.s, p
    )
    dinv = drag_tensors(e0, e1, snap.theta)
    system = fea.assemble(mesh, tmpl, dinv=dinv, bcs=problem.bcs)
    solution = fea.solve_stokes(system)

    j_e = fea.element_power(mesh, tmpl, dinv, solution.U)
    J = float(j_e.sum())
    g = constraint_value(snap, problem)
    J0 = J if J0 is None else J0
    breakdown = loss(J, g, alpha, lam, J0)
    if not need_grad:
        return Evaluation(breakdown, None, solution, j_e, snap)

    # adjoint right-hand side: dJ/dS, nonzero only on velocity dofs
    ue = solution.U[mesh.elem_vel_dofs]
    ae_u = ue @ tmpl.a_mu + _brinkman_apply(tmpl.mass, dinv, ue)
    rhs_adj = np.zeros(mesh.n_dofs)
    np.add.at(rhs_adj, mesh.elem_vel_dofs.ravel(), ae_u.ravel())
    w_full = np.zeros(mesh.n_dofs)
    w_full[system.keep] = system.solve_reduced(rhs_adj[system.keep])
    we = w_full[mesh.elem_vel_dofs]

    # dJ/dD per element, from the quadratic form and the adjoint term
    ux, uy = ue[:, 0::2], ue[:, 1::2]
    wx, wy = we[:, 0::2], we[:, 1::2]
    mux, muy = ux @ tmpl.mass, uy @ tmpl.mass
    djdd = np.empty((mesh.n_elements, 2, 2))
    djdd[:, 0, 0] = 0.5 * (ux * mux).sum(1) - (wx * mux).sum(1)
    djdd[:, 0, 1] = 0.5 * (ux * muy).sum(1) - (wx * muy).sum(1)
    djdd[:, 1, 0] = 0.5 * (uy * mux).sum(1) - (wy * mux).sum(1)
    djdd[:, 1, 1] = 0.5 * (uy * muy).sum(1) - (wy * muy).sum(1)

    # chain through D = R diag(1/e0, 1/e1) R^T
    c, sn = np.cos(snap.theta), np.sin(snap.theta)
    r0_d_r0 = (
        djdd[:, 0, 0] * c * c + (djdd[:, 0, 1] + djdd[:, 1, 0]) * sn * c + djdd[:, 1, 1] * sn * sn
    )
    r1_d_r1 = (
        djdd[:, 0, 0] * sn * sn - (djdd[:, 0, 1] + djdd[:, 1, 0]) * sn * c + djdd[:, 1, 1] * c * c
    )
    dj_de0 = -r0_d_r0 / (e0 * e0)
    dj_de1 = -r1_d_r1 / (e1 * e1)
    delta = 1.0 / e0 - 1.0 / e1
    dj_dtheta = delta * (
        -2.0 * sn * c * djdd[:, 0, 0]
        + (c * c - sn * sn) * (djdd[:, 0, 1] + djdd[:, 1, 0])
        + 2.0 * sn * c * djdd[:, 1, 1]
    )

    # eigenvalue floor freezes the affected element/component
    dj_de0 = np.where(floor0, 0.0, dj_de0)
    dj_de1 = np.where(floor1, 0.0, dj_de1)

    w_pow = snap.rho.T ** (p - 1.0)  # (M, N)
    dj_drho = (dj_de0[None, :] * c00 + dj_de1[None, :] * c11) * p * w_pow
    dj_ds = dj_de0 * (snap.rho.T**p * d00).sum(0) + dj_de1 * (snap.rho.T**p * d11).sum(0)

    dg_drho, dg_ds = _constraint_partials(snap, problem)
    g_weight = 2.0 * alpha * g + lam
    dl_drho = dj_drho.T / breakdown.J0 + g_weight * dg_drho
    dl_ds = dj_ds / breakdown.J0 + g_weight * dg_ds
    dl_dtheta = dj_dtheta / breakdown.J0

    if problem.size_fixed is not None:
        dl_ds = np.zeros_like(dl_ds)
    if not problem.orientation_enabled:
        dl_dtheta = np.zeros_like(dl_dtheta)

    gradient = field.backward(cache, dl_drho, dl_ds, dl_dtheta)
    return Evaluation(breakdown, gradient, solution, j_e, snap)


def _brinkman_apply(mass: np.ndarray, dinv: np.ndarray, ue: np.ndarray) -> np.ndarray:
    """Per-element product of the Brinkman block with element velocities."""
    ux, uy = ue[:, 0::2], ue[:, 1::2]
    mux, muy = ux @ mass, uy @ mass
    out = np.empty_like(ue)
    out[:, 0::2] = dinv[:, 0, 0, None] * mux + dinv[:, 0, 1, None] * muy
    out[:, 1::2] = dinv[:, 1, 0, None] * mux + dinv[:, 1, 1, None] * muy
    return out
