"""Size-to-permeability surrogates and the per-element effective tensor.

Each shape's sampled permeability components are interpolated by quintic
polynomials of the size parameter. If an interpolant dips non-positive on
the sampled interval it is refit on log-values and exponentiated at
evaluation time. Below the smallest sampled size the surrogate blends
linearly toward a large finite "pure fluid" permeability cap, keeping the
Brinkman drag (the tensor inverse) well defined all the way to s=0.

All catalog shapes share one rotation: the mixed tensor

    C(rho, s, theta) = sum_m rho_m^p R(theta) diag(C_m^00(s), C_m^11(s)) R(theta)^T

has eigenvectors given by R and eigenvalues sum_m rho_m^p C_m(s), so the
eigenvalue floor is applied directly in the rotated frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ContractViolationError, InputDomainError
from .homogenize import PERMEABILITY_FLOOR, HomogenizationDataset

C_FLOOR = PERMEABILITY_FLOOR
C_CAP = 1e3

_SIMPLEX_TOL = 1e-6


@dataclass
class PermeabilitySurrogate:
    """Per-shape quintic permeability polynomials plus area/volume constants."""

    shape_ids: list[str]
    sizes: np.ndarray  # interpolation nodes, strictly increasing
    coeff00: np.ndarray  # (M, 6) ascending-power coefficients
    coeff11: np.ndarray
    log00: np.ndarray  # (M,) bool: component fit on log-values
    log11: np.ndarray
    gamma_max: np.ndarray  # (M,)
    v_max: np.ndarray  # (M,)
    metadata: dict = field(default_factory=dict)

    @property
    def s_lo(self) -> float:
        return float(self.sizes[0])

    def index(self, shape_id: str) -> int:
        try:
            return self.shape_ids.index(shape_id)
        except ValueError:
            raise InputDomainError(f"shape {shape_id!r} not in surrogate") from None

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "shape_ids": list(self.shape_ids),
            "sizes": self.sizes.tolist(),
            "coeff00": self.coeff00.tolist(),
            "coeff11": self.coeff11.tolist(),
            "log00": self.log00.tolist(),
            "log11": self.log11.tolist(),
            "gamma_max": self.gamma_max.tolist(),
            "v_max": self.v_max.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PermeabilitySurrogate":
        if doc.get("schema_version") != 1:
            raise InputDomainError(f"unsupported surrogate schema {doc.get('schema_version')!r}")
        return cls(
            shape_ids=list(doc["shape_ids"]),
            sizes=np.asarray(doc["sizes"], dtype=float),
            coeff00=np.asarray(doc["coeff00"], dtype=float),
            coeff11=np.asarray(doc["coeff11"], dtype=float),
            log00=np.asarray(doc["log00"], dtype=bool),
            log11=np.asarray(doc["log11"], dtype=bool),
            gamma_max=np.asarray(doc["gamma_max"], dtype=float),
            v_max=np.asarray(doc["v_max"], dtype=float),
            metadata=doc.get("metadata", {}),
        )

    def subset(self, shape_ids) -> "PermeabilitySurrogate":
        """Surrogate restricted to (and reordered as) the given shapes."""
        idx = [self.index(sid) for sid in shape_ids]
        return PermeabilitySurrogate(
            shape_ids=list(shape_ids),
            sizes=self.sizes,
            coeff00=self.coeff00[idx],
            coeff11=self.coeff11[idx],
            log00=self.log00[idx],
            log11=self.log11[idx],
            gamma_max=self.gamma_max[idx],
            v_max=self.v_max[idx],
            metadata=self.metadata,
        )


def _fit_component(sizes: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, bool]:
    """Interpolating quintic; falls back to a log-space fit if it dips <= 0."""
    coeff = npoly.polyfit(sizes, values, 5)
    scan = npoly.polyval(np.linspace(sizes[0], sizes[-1], 1000), coeff)
    if scan.min() > 0.0:
        return coeff, False
    coeff = npoly.polyfit(sizes, np.log(values), 5)
    return coeff, True


def fit_polynomials(dataset: HomogenizationDataset) -> PermeabilitySurrogate:
    """Interpolate every shape's sampled components with quintics."""
    sizes = np.asarray(dataset.sizes, dtype=float)
    if sizes.size != 6:
        raise InputDomainError(f"quintic interpolation needs exactly 6 sizes, got {sizes.size}")
    if np.unique(sizes).size != sizes.size:
        raise InputDomainError("size abscissae must be distinct")
    m = len(dataset.shape_ids)
    coeff00 = np.zeros((m, 6))
    coeff11 = np.zeros((m, 6))
    log00 = np.zeros(m, dtype=bool)
    log11 = np.zeros(m, dtype=bool)
    for i, sid in enumerate(dataset.shape_ids):
        coeff00[i], log00[i] = _fit_component(sizes, np.asarray(dataset.c00[sid]))
        coeff11[i], log11[i] = _fit_component(sizes, np.asarray(dataset.c11[sid]))
    return PermeabilitySurrogate(
        shape_ids=list(dataset.shape_ids),
        sizes=sizes,
        coeff00=coeff00,
        coeff11=coeff11,
        log00=log00,
        log11=log11,
        gamma_max=np.array([dataset.gamma_max[sid] for sid in dataset.shape_ids]),
        v_max=np.array([dataset.v_max[sid] for sid in dataset.shape_ids]),
        metadata={"resolution": dataset.resolution, **dataset.metadata},
    )


def _eval_poly_block(coeff: np.ndarray, logflag: np.ndarray, s: np.ndarray):
    """Value and s-derivative of every shape's polynomial at every s."""
    val = npoly.polyval(s, coeff.T)  # (M, N)
    dcoeff = npoly.polyder(coeff.T, axis=0)
    der = npoly.polyval(s, dcoeff)
    if logflag.any():
        exp_val = np.exp(val[logflag])
        der[logflag] = exp_val * der[logflag]
        val[logflag] = exp_val
    return val, der


def eval_components(surr: PermeabilitySurrogate, s: np.ndarray):
    """Clamped permeability components and their s-derivatives.

    ``s`` is an (N,) array; returns c00, c11, dc00, dc11 with shape (M, N).
    Sizes below the smallest node blend linearly toward the fluid cap; the
    derivative is zero wherever a clamp is active.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s < 0.0) | (s > 1.0)):
        raise InputDomainError("sizes must lie in [0, 1]")
    s_lo = surr.s_lo
    s_eval = np.maximum(s, s_lo)
    out = []
    for coeff, logflag in ((surr.coeff00, surr.log00), (surr.coeff11, surr.log11)):
        val, der = _eval_poly_block(coeff, logflag, s_eval)
        below = s < s_lo
        if below.any():
            v_lo, _ = _eval_poly_block(coeff, logflag, np.array([s_lo]))
            slope = (v_lo[:, 0:1] - C_CAP) / s_lo  # (M, 1)
            val[:, below] = C_CAP + slope * s[below]
            der[:, below] = np.broadcast_to(slope, (coeff.shape[0], int(below.sum())))
        clamped = (val < C_FLOOR) | (val > C_CAP)
        val = np.clip(val, C_FLOOR, C_CAP)
        der = np.where(clamped, 0.0, der)
        out.extend([val, der])
    c00, d00, c11, d11 = out
    return c00, c11, d00, d11


def eval_permeability(surr: PermeabilitySurrogate, shape_id: str, s: float):
    """(c00, c11) of one shape at one size."""
    i = surr.index(shape_id)
    c00, c11, _, _ = eval_components(surr, np.array([float(s)]))
    return float(c00[i, 0]), float(c11[i, 0])


def rotate_tensor(c00: float, c11: float, theta: float) -> np.ndarray:
    """Rotate a diagonal permeability tensor by theta (pi-periodic result)."""
    if c00 <= 0 or c11 <= 0:
        raise InputDomainError("rotation expects positive diagonal components")
    c, sn = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [c00 * c * c + c11 * sn * sn, (c00 - c11) * sn * c],
            [(c00 - c11) * sn * c, c00 * sn * sn + c11 * c * c],
        ]
    )


def _check_simplex(rho: np.ndarray) -> None:
    sums = rho.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > _SIMPLEX_TOL) or np.any(rho < -1e-12):
        raise ContractViolationError("densities must lie on the unit simplex")


def mixed_eigenvalues(surr: PermeabilitySurrogate, rho: np.ndarray, s: np.ndarray, p: float):
    """Eigenvalues of the mixed (unrotated) tensor, floored at C_FLOOR.

    ``rho`` is (N, M), ``s`` is (N,). Returns (e0, e1, floor_mask0/1,
    c00, c11, dc00, dc11) so callers can assemble exact derivatives.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    _check_simplex(rho)
    if p < 1.0:
        raise InputDomainError(f"mixing exponent p={p} must be >= 1")
    c00, c11, d00, d11 = eval_components(surr, s)
    w = rho.T**p  # (M, N)
    e0 = (w * c00).sum(axis=0)
    e1 = (w * c11).sum(axis=0)
    floor0 = e0 < C_FLOOR
    floor1 = e1 < C_FLOOR
    return (
        np.maximum(e0, C_FLOOR),
        np.maximum(e1, C_FLOOR),
        floor0,
        floor1,
        c00,
        c11,
        d00,
        d11,
    )


def mix_permeability(
    surr: PermeabilitySurrogate, rho: np.ndarray, s: float, theta: float, p: float
) -> np.ndarray:
    """Effective 2x2 permeability of one element (mixing, rotation, floor)."""
    e0, e1, *_ = mixed_eigenvalues(surr, np.atleast_2d(rho), np.atleast_1d(float(s)), p)
    return rotate_tensor(float(e0[0]), float(e1[0]), theta)


def effective_tensors(
    surr: PermeabilitySurrogate, rho: np.ndarray, s: np.ndarray, theta: np.ndarray, p: float
) -> np.ndarray:
    """Batch effective permeability tensors, shape (N, 2, 2)."""
    e0, e1, *_ = mixed_eigenvalues(surr, rho, s, p)
    c, sn = np.cos(theta), np.sin(theta)
    out = np.empty((e0.size, 2, 2))
    out[:, 0, 0] = e0 * c * c + e1 * sn * sn
    out[:, 1, 1] = e0 * sn * sn + e1 * c * c
    out[:, 0, 1] = (e0 - e1) * sn * c
    out[:, 1, 0] = out[:, 0, 1]
    return out


def contact_area(rho: np.ndarray, s, gamma_max: np.ndarray, h: float = 1.0):
    """Fluid-solid interface length contributed by each element.

    Per-unit-cell perimeters scale linearly with size and with the physical
    element side h.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    _check_simplex(rho)
    return h * np.asarray(s) * (rho @ np.asarray(gamma_max))


def fluid_volume(rho: np.ndarray, s, v_max: np.ndarray, cell_volume: float = 1.0):
    """Fluid volume left in each element: V_e (1 - sum_m rho_m s^2 v_m^max)."""
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    _check_simplex(rho)
    s = np.asarray(s)
    return cell_volume * (1.0 - s**2 * (rho @ np.asarray(v_max)))


def write_surrogate_file(path, dataset: HomogenizationDataset, surr: PermeabilitySurrogate):
    """One JSON artifact holding the sampled dataset and the fitted surrogate."""
    doc = {
        "schema_version": 1,
        "dataset": json.loads(dataset.to_json()),
        "surrogate": surr.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def load_surrogate_file(path) -> tuple[HomogenizationDataset, PermeabilitySurrogate]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != 1:
        raise InputDomainError(f"unsupported surrogate file schema {doc.get('schema_version')!r}")
    dataset = HomogenizationDataset.from_json(json.dumps(doc["dataset"]))
    surr = PermeabilitySurrogate.from_dict(doc["surrogate"])
    return dataset, surr
