"""Mini-batch loss, exact gradient and exact Hessian-vector products for FD-Net.

Everything is expressed through the combined stencil ``W = c1 f1 + c2 f2``
and its step matrix ``A = I + S(W)``. With ``u_0`` the input and
``u_{j+1} = A u_j`` the loss is a boundary-weighted MSE on ``u_k``.

The gradient is the adjoint sweep::

    g_k = 2 w * (u_k - y) / (B M),      g_j = A^T g_{j+1}
    dL/dA = sum_j g_{j+1} u_j^T

followed by the chain rule through ``W``. The HVP differentiates that
sweep once more along a parameter direction (forward-over-reverse), so the
16 x 16 Hessian is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DivergenceError
from .model import FILTER_SIZE, NUM_CHANNELS, NUM_PARAMS, FDNetParams, stencil_basis, stencil_matrix

__all__ = [
    "TrainingPair",
    "Batch",
    "LossConfig",
    "BatchObjective",
    "batch_loss",
    "batch_gradient",
    "batch_hvp",
]


class TrainingPair(NamedTuple):
    input: np.ndarray
    target: np.ndarray
    sample_id: int = -1
    time_index: int = -1


@dataclass(frozen=True)
class Batch:
    """Stacked training pairs; iterates as :class:`TrainingPair`."""

    inputs: np.ndarray
    targets: np.ndarray
    sample_ids: np.ndarray
    time_indices: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape != self.targets.shape:
            raise ValueError("inputs and targets must both have shape (B, M)")
        if self.inputs.shape[0] == 0:
            raise ValueError("batch must be nonempty")

    @classmethod
    def from_pairs(cls, pairs):
        if isinstance(pairs, Batch):
            return pairs
        pairs = list(pairs)
        if not pairs:
            raise ValueError("batch must be nonempty")
        return cls(
            np.stack([np.asarray(p.input, dtype=np.float64) for p in pairs]),
            np.stack([np.asarray(p.target, dtype=np.float64) for p in pairs]),
            np.array([p.sample_id for p in pairs]),
            np.array([p.time_index for p in pairs]),
        )

    def __len__(self):
        return self.inputs.shape[0]

    def __getitem__(self, i):
        return TrainingPair(
            self.inputs[i], self.targets[i], int(self.sample_ids[i]), int(self.time_indices[i])
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class LossConfig:
    boundary_weight: float = 10.0

    def __post_init__(self):
        if not (np.isfinite(self.boundary_weight) and self.boundary_weight >= 1):
            raise ConfigError(f"boundary_weight must be finite and >= 1, got {self.boundary_weight!r}")

    def weights(self, M):
        w = np.ones(M)
        w[0] = w[-1] = self.boundary_weight
        return w


def _split(theta):
    f = theta[: NUM_CHANNELS * FILTER_SIZE].reshape(NUM_CHANNELS, FILTER_SIZE)
    c = theta[NUM_CHANNELS * FILTER_SIZE:]
    return f, c


def _join(df, dc):
    return np.concatenate([df.ravel(), dc])


class BatchObjective:
    """Loss, gradient and HVP of one fixed batch as functions of the 16-vector.

    The forward states and adjoints for the last ``theta`` are cached, so a
    run of HVPs at one point (as inside CG) costs one tangent sweep each.
    """

    def __init__(self, batch, k, cfg=None, weights=None):
        self.batch = Batch.from_pairs(batch)
        self.k = int(k)
        self.cfg = cfg if cfg is not None else LossConfig()
        B, M = self.batch.inputs.shape
        self.M = M
        self.w = self.cfg.weights(M) if weights is None else np.asarray(weights, dtype=np.float64)
        self._scale = 1.0 / (B * M)
        self._basis = stencil_basis(M)
        self._key = None

    def _forward(self, theta):
        f, c = _split(theta)
        A = np.eye(self.M) + stencil_matrix(c @ f, self.M)
        states = [self.batch.inputs]
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(self.k):
                states.append(states[-1] @ A.T)
            resid = states[-1] - self.batch.targets
            loss = self._scale * float(np.sum(self.w * resid * resid))
        return A, states, resid, loss

    def loss(self, theta) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        if self._key is not None and np.array_equal(theta, self._key):
            return self._loss
        return self._forward(theta)[3]

    def _prepare(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if self._key is not None and np.array_equal(theta, self._key):
            return
        A, states, resid, loss = self._forward(theta)
        if not np.isfinite(loss):
            raise DivergenceError("non-finite loss on mini-batch")
        adj = [None] * (self.k + 1)
        adj[self.k] = 2.0 * self._scale * self.w * resid
        for j in range(self.k - 1, 0, -1):
            adj[j] = adj[j + 1] @ A
        G = sum(adj[j + 1].T @ states[j] for j in range(self.k))
        if not np.all(np.isfinite(G)):
            raise DivergenceError("non-finite gradient on mini-batch")
        self._key = theta.copy()
        self._A, self._states, self._adj, self._loss = A, states, adj, loss
        self._gW = self._extract(G)
        f, c = _split(theta)
        self._grad = _join(np.outer(c, self._gW), f @ self._gW)

    def _extract(self, G):
        return np.array([G[E].sum() for E in self._basis])

    def gradient(self, theta) -> np.ndarray:
        self._prepare(theta)
        return self._grad.copy()

    def loss_and_gradient(self, theta):
        self._prepare(theta)
        return self._loss, self._grad.copy()

    def hvp(self, theta, v) -> np.ndarray:
        self._prepare(theta)
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (NUM_PARAMS,):
            raise ValueError(f"direction must have shape ({NUM_PARAMS},), got {v.shape}")
        f, c = _split(self._key)
        df, dc = _split(v)
        dW = dc @ f + c @ df
        dA = stencil_matrix(dW, self.M)
        A, u, g = self._A, self._states, self._adj

        with np.errstate(over="ignore", invalid="ignore"):
            du = [np.zeros_like(u[0])]
            for j in range(self.k):
                du.append(du[j] @ A.T + u[j] @ dA.T)
            dg = [None] * (self.k + 1)
            dg[self.k] = 2.0 * self._scale * self.w * du[self.k]
            for j in range(self.k - 1, 0, -1):
                dg[j] = dg[j + 1] @ A + g[j + 1] @ dA
            dG = sum(dg[j + 1].T @ u[j] + g[j + 1].T @ du[j] for j in range(self.k))
            dgW = self._extract(dG)
            out = _join(np.outer(dc, self._gW) + np.outer(c, dgW), df @ self._gW + f @ dgW)
        if not np.all(np.isfinite(out)):
            raise DivergenceError("non-finite Hessian-vector product")
        return out


def batch_loss(p: FDNetParams, batch, cfg: LossConfig = LossConfig()) -> float:
    loss = BatchObjective(batch, p.k, cfg).loss(p.to_vector())
    if not np.isfinite(loss):
        raise DivergenceError("non-finite loss on mini-batch")
    return loss


def batch_gradient(p: FDNetParams, batch, cfg: LossConfig = LossConfig()) -> np.ndarray:
    return BatchObjective(batch, p.k, cfg).gradient(p.to_vector())


def batch_hvp(p: FDNetParams, batch, cfg: LossConfig, v) -> np.ndarray:
    return BatchObjective(batch, p.k, cfg).hvp(p.to_vector(), v)
