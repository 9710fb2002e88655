"""FD-Net: a residual network built from trainable finite-difference stencils.

One auxiliary step maps a field ``u`` to::

    u + c1 * filter(u, f1) + c2 * filter(u, f2)

where each filter is a 3-point stencil on interior points and a 2-point
stencil at either end. ``k`` auxiliary steps advance one data interval.
The network has no biases or activations, so every step is linear in ``u``
and the whole model has 16 weights whatever the grid size or ``k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError

__all__ = [
    "DerivativeFilter",
    "FDNetParams",
    "NUM_PARAMS",
    "PARAM_NAMES",
    "apply_filter",
    "auxiliary_step",
    "forward_step",
    "rollout",
    "init_params",
    "euler_params",
    "identity_params",
    "stencil_basis",
    "step_matrix",
    "save_params",
    "load_params",
    "params_to_json",
    "params_from_json",
]

NUM_CHANNELS = 2
FILTER_SIZE = 7
NUM_PARAMS = NUM_CHANNELS * FILTER_SIZE + NUM_CHANNELS
PARAMS_FORMAT_VERSION = "1"

_FILTER_FIELDS = (
    "interior.left",
    "interior.center",
    "interior.right",
    "left_boundary.point",
    "left_boundary.right",
    "right_boundary.left",
    "right_boundary.point",
)
PARAM_NAMES = tuple(
    f"filter{c + 1}.{name}" for c in range(NUM_CHANNELS) for name in _FILTER_FIELDS
) + tuple(f"agg.c{c + 1}" for c in range(NUM_CHANNELS))


@dataclass(frozen=True)
class DerivativeFilter:
    interior: tuple = (0.0, 0.0, 0.0)
    left_boundary: tuple = (0.0, 0.0)
    right_boundary: tuple = (0.0, 0.0)

    def __post_init__(self):
        for name, size in (("interior", 3), ("left_boundary", 2), ("right_boundary", 2)):
            values = tuple(float(v) for v in getattr(self, name))
            if len(values) != size:
                raise ConfigError(f"{name} needs {size} weights, got {len(values)}")
            if not all(math.isfinite(v) for v in values):
                raise ConfigError(f"{name} weights must be finite")
            object.__setattr__(self, name, values)

    def as_array(self) -> np.ndarray:
        return np.array(self.interior + self.left_boundary + self.right_boundary)

    @classmethod
    def from_array(cls, w):
        w = [float(v) for v in w]
        return cls(tuple(w[0:3]), tuple(w[3:5]), tuple(w[5:7]))


@dataclass(frozen=True)
class FDNetParams:
    filters: tuple
    agg: tuple
    k: int = 1

    def __post_init__(self):
        if len(self.filters) != NUM_CHANNELS or len(self.agg) != NUM_CHANNELS:
            raise ConfigError(f"FD-Net uses exactly {NUM_CHANNELS} channels")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        agg = tuple(float(c) for c in self.agg)
        if not all(math.isfinite(c) for c in agg):
            raise ConfigError("aggregation weights must be finite")
        object.__setattr__(self, "filters", tuple(self.filters))
        object.__setattr__(self, "agg", agg)
        object.__setattr__(self, "k", int(self.k))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([f.as_array() for f in self.filters] + [np.array(self.agg)])

    @classmethod
    def from_vector(cls, theta, k):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (NUM_PARAMS,):
            raise ConfigError(f"expected {NUM_PARAMS} weights, got shape {theta.shape}")
        filters = tuple(
            DerivativeFilter.from_array(theta[c * FILTER_SIZE:(c + 1) * FILTER_SIZE])
            for c in range(NUM_CHANNELS)
        )
        return cls(filters, tuple(theta[NUM_CHANNELS * FILTER_SIZE:]), k)

    def with_k(self, k):
        return FDNetParams(self.filters, self.agg, k)

    def combined_stencil(self) -> np.ndarray:
        """The single 7-weight stencil ``c1 * f1 + c2 * f2`` a step applies."""
        return sum(c * f.as_array() for c, f in zip(self.agg, self.filters))


def _check_width(u):
    if u.shape[-1] < 3:
        raise ValueError(f"filters need at least 3 grid points, got {u.shape[-1]}")


def apply_filter(u, f: DerivativeFilter) -> np.ndarray:
    """Apply ``f`` along the last axis of ``u``."""
    u = np.asarray(u, dtype=np.float64)
    _check_width(u)
    wl, wc, wr = f.interior
    out = np.empty_like(u)
    out[..., 1:-1] = wl * u[..., :-2] + wc * u[..., 1:-1] + wr * u[..., 2:]
    out[..., 0] = f.left_boundary[0] * u[..., 0] + f.left_boundary[1] * u[..., 1]
    out[..., -1] = f.right_boundary[0] * u[..., -2] + f.right_boundary[1] * u[..., -1]
    return out


def auxiliary_step(u, p: FDNetParams) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    out = u
    for c, f in zip(p.agg, p.filters):
        out = out + c * apply_filter(u, f)
    return out


def forward_step(u, p: FDNetParams) -> np.ndarray:
    """Advance ``u`` by one data interval (``p.k`` auxiliary steps)."""
    for _ in range(p.k):
        u = auxiliary_step(u, p)
    return u


def rollout(u0, p: FDNetParams, n_steps: int, check_finite: bool = True) -> np.ndarray:
    """Iterate ``forward_step`` from ``u0``, feeding back its own predictions.

    ``u0`` may carry leading batch axes; the result has shape
    ``u0.shape[:-1] + (n_steps + 1, M)``. With ``check_finite`` a non-finite
    state raises :class:`DivergenceError`; otherwise it is left in place.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    u = np.asarray(u0, dtype=np.float64)
    _check_width(u)
    seq = np.empty(u.shape[:-1] + (n_steps + 1, u.shape[-1]))
    seq[..., 0, :] = u
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(n_steps):
            u = forward_step(u, p)
            if check_finite and not np.all(np.isfinite(u)):
                raise DivergenceError(f"rollout diverged at step {j + 1}", step=j + 1)
            seq[..., j + 1, :] = u
    return seq


def init_params(seed: int, k: int, scale: float = 0.1) -> FDNetParams:
    """All 16 weights i.i.d. normal with standard deviation ``scale``."""
    if not (math.isfinite(scale) and scale >= 0):
        raise ConfigError(f"scale must be finite and >= 0, got {scale!r}")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    return FDNetParams.from_vector(scale * rng.standard_normal(NUM_PARAMS), k)


def identity_params(k: int = 1) -> FDNetParams:
    return FDNetParams.from_vector(np.zeros(NUM_PARAMS), k)


def euler_params(alpha: float, k: int = 1) -> FDNetParams:
    """Weights under which FD-Net runs explicit Euler with ``alpha / k`` per sub-step."""
    theta = np.zeros(NUM_PARAMS)
    theta[FILTER_SIZE:FILTER_SIZE + 3] = (1.0, -2.0, 1.0)
    theta[-1] = alpha / k
    return FDNetParams.from_vector(theta, k)


def stencil_basis(M: int) -> np.ndarray:
    """Boolean masks ``E[l]`` (7, M, M) marking where stencil weight ``l`` sits."""
    if M < 3:
        raise ValueError(f"filters need at least 3 grid points, got {M}")
    E = np.zeros((FILTER_SIZE, M, M), dtype=bool)
    rows = np.arange(1, M - 1)
    E[0, rows, rows - 1] = True
    E[1, rows, rows] = True
    E[2, rows, rows + 1] = True
    E[3, 0, 0] = True
    E[4, 0, 1] = True
    E[5, M - 1, M - 2] = True
    E[6, M - 1, M - 1] = True
    return E


def stencil_matrix(w, M: int) -> np.ndarray:
    """Dense M x M operator of a 7-weight stencil."""
    w = np.asarray(w, dtype=np.float64)
    S = np.zeros((M, M))
    rows = np.arange(1, M - 1)
    S[rows, rows - 1] = w[0]
    S[rows, rows] = w[1]
    S[rows, rows + 1] = w[2]
    S[0, 0], S[0, 1] = w[3], w[4]
    S[M - 1, M - 2], S[M - 1, M - 1] = w[5], w[6]
    return S


def step_matrix(p: FDNetParams, M: int) -> np.ndarray:
    """Matrix of one auxiliary step, ``I + S(c1 f1 + c2 f2)``."""
    return np.eye(M) + stencil_matrix(p.combined_stencil(), M)


def params_to_json(p: FDNetParams, metadata=None) -> str:
    doc = {
        "format_version": PARAMS_FORMAT_VERSION,
        "k": p.k,
        "weights": dict(zip(PARAM_NAMES, (float(v) for v in p.to_vector()))),
    }
    if metadata:
        doc["metadata"] = metadata
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def params_from_json(text: str):
    """Parse a params document; returns ``(params, metadata)``."""
    try:
        doc = json.loads(text)
        if doc["format_version"] != PARAMS_FORMAT_VERSION:
            raise ConfigError(f"unsupported params format {doc['format_version']!r}")
        weights = doc["weights"]
        if set(weights) != set(PARAM_NAMES):
            raise ConfigError("params file must list exactly the 16 named weights")
        theta = np.array([float(weights[name]) for name in PARAM_NAMES])
        return FDNetParams.from_vector(theta, int(doc["k"])), doc.get("metadata", {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed params document: {exc}") from exc


def save_params(p: FDNetParams, path, metadata=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(params_to_json(p, metadata))


def load_params(path):
    with open(path, encoding="utf-8") as fh:
        return params_from_json(fh.read())
