"""Coordinate network mapping element centers to design variables.

A small fully connected network (two LeakyReLU hidden layers of 20
neurons by default) maps a normalized 2D point to M shape densities, a
size, and an orientation. The density head is a softmax, so the
per-element densities sum to one by construction; size and orientation
heads are sigmoids scaled to (0, 1) and (0, 2*pi). The network weights
are the only design variables of an optimization run.

Weight initialization uses Xavier-uniform bounds driven by a 64-bit
counter-based generator (SplitMix64), so a given seed reproduces the
same field on any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputDomainError

DEFAULT_HIDDEN = (20, 20)
NEGATIVE_SLOPE = 0.01

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def uniform_stream(seed: int, count: int) -> np.ndarray:
    """Deterministic float64 samples in [0, 1) from a SplitMix64 counter."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass
class DesignSnapshot:
    """Per-element design variables aligned with a mesh's element order."""

    rho: np.ndarray  # (N, M)
    s: np.ndarray  # (N,)
    theta: np.ndarray  # (N,)

    @property
    def n_elements(self) -> int:
        return self.s.size

    def argmax_shape(self) -> np.ndarray:
        return self.rho.argmax(axis=1)


class DesignField:
    """MLP design field over a rectangular domain."""

    def __init__(self, shape_ids, weights, biases, domain, seed=0):
        self.shape_ids = list(shape_ids)
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.domain = (float(domain[0]), float(domain[1]))  # (lx, ly)
        self.seed = int(seed)
        sizes = [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]
        if sizes[0] != 2 or sizes[-1] != len(self.shape_ids) + 2:
            raise InputDomainError("layer sizes must run 2 -> ... -> M+2")
        self.layer_sizes = sizes

    @property
    def n_shapes(self) -> int:
        return len(self.shape_ids)

    @property
    def n_weights(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    # -- flat parameter vector ------------------------------------------------

    def get_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_weights:
            raise InputDomainError(f"expected {self.n_weights} parameters, got {vec.size}")
        at = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = vec[at : at + w.size].reshape(w.shape).copy()
            at += w.size
            self.biases[i] = vec[at : at + b.size].copy()
            at += b.size

    # -- evaluation -----------------------------------------------------------

    def _normalize(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InputDomainError(f"points must be (N, 2), got {pts.shape}")
        lx, ly = self.domain
        return np.column_stack([pts[:, 0] / lx - 0.5, pts[:, 1] / ly - 0.5])

    def forward_cached(self, points: np.ndarray):
        """Snapshot plus the activation cache needed for backprop."""
        a = self._normalize(points)
        activations = [a]
        pre = []
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w.T + b
            pre.append(z)
            a = np.where(z >= 0.0, z, NEGATIVE_SLOPE * z)
            activations.append(a)
        z_out = a @ self.weights[-1].T + self.biases[-1]
        m = self.n_shapes
        logits = z_out[:, :m]
        shifted = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        rho = expz / expz.sum(axis=1, keepdims=True)
        sig_s = 1.0 / (1.0 + np.exp(-z_out[:, m]))
        sig_t = 1.0 / (1.0 + np.exp(-z_out[:, m + 1]))
        snap = DesignSnapshot(rho=rho, s=sig_s, theta=2.0 * np.pi * sig_t)
        cache = {"activations": activations, "pre": pre, "rho": rho, "sig_s": sig_s, "sig_t": sig_t}
        return snap, cache

    def forward(self, points: np.ndarray) -> DesignSnapshot:
        snap, _ = self.forward_cached(points)
        return snap

    def backward(self, cache, d_rho: np.ndarray, d_s: np.ndarray, d_theta: np.ndarray) -> np.ndarray:
        """Accumulate loss gradients w.r.t. the flat parameter vector.

        ``d_rho``, ``d_s``, ``d_theta`` are the loss partials w.r.t. the
        head outputs at every evaluation point.
        """
        rho, sig_s, sig_t = cache["rho"], cache["sig_s"], cache["sig_t"]
        n, m = rho.shape
        dz = np.empty((n, m + 2))
        inner = (d_rho * rho).sum(axis=1, keepdims=True)
        dz[:, :m] = rho * (d_rho - inner)
        dz[:, m] = d_s * sig_s * (1.0 - sig_s)
        dz[:, m + 1] = d_theta * 2.0 * np.pi * sig_t * (1.0 - sig_t)

        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            a_in = cache["activations"][layer]
            grads_w[layer] = dz.T @ a_in
            grads_b[layer] = dz.sum(axis=0)
            if layer > 0:
                da = dz @ self.weights[layer]
                z = cache["pre"][layer - 1]
                dz = da * np.where(z >= 0.0, 1.0, NEGATIVE_SLOPE)
        parts = []
        for gw, gb in zip(grads_w, grads_b):
            parts.append(gw.ravel())
            parts.append(gb)
        return np.concatenate(parts)

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "shape_ids": self.shape_ids,
            "domain": list(self.domain),
            "seed": self.seed,
            "negative_slope": NEGATIVE_SLOPE,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, doc: dict) -> "DesignField":
        if doc.get("schema_version") != 1:
            raise InputDomainError(f"unsupported checkpoint schema {doc.get('schema_version')!r}")
        return cls(
            shape_ids=doc["shape_ids"],
            weights=doc["weights"],
            biases=doc["biases"],
            domain=doc["domain"],
            seed=doc.get("seed", 0),
        )

    @classmethod
    def load(cls, path) -> "DesignField":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_weights(
    seed: int,
    shape_ids,
    domain: tuple[float, float],
    hidden=DEFAULT_HIDDEN,
) -> DesignField:
    """Xavier-uniform weights, zero biases, reproducible for a fixed seed."""
    sizes = [2, *hidden, len(list(shape_ids)) + 2]
    total = sum(sizes[i + 1] * sizes[i] for i in range(len(sizes) - 1))
    stream = uniform_stream(seed, total)
    weights, biases = [], []
    at = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        block = stream[at : at + fan_in * fan_out]
        at += fan_in * fan_out
        weights.append(bound * (2.0 * block.reshape(fan_out, fan_in) - 1.0))
        biases.append(np.zeros(fan_out))
    return DesignField(shape_ids=shape_ids, weights=weights, biases=biases, domain=domain, seed=seed)


def resample(field: DesignField, mesh) -> DesignSnapshot:
    """Evaluate a trained field at another mesh's element centers.

    The mesh must cover the same physical domain the field was trained on.
    """
    lx, ly = field.domain
    if abs(mesh.lx - lx) > 1e-9 * max(lx, 1.0) or abs(mesh.ly - ly) > 1e-9 * max(ly, 1.0):
        raise InputDomainError(
            f"mesh domain {mesh.lx}x{mesh.ly} does not match field domain {lx}x{ly}"
        )
    return field.forward(mesh.centers)
