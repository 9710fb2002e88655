"""Euler baseline, stability diagnosis and rollout-error reporting."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import FDNetParams, rollout, step_matrix

__all__ = [
    "StabilityParams",
    "RolloutReport",
    "stability_alpha",
    "euler_rollout",
    "rollout_rmse",
    "evaluate_model",
    "evaluate_euler",
    "frozen_field_rmse",
    "fast_test_rmse",
    "write_table1_csv",
    "write_snapshots_csv",
    "snapshot_indices",
    "STABILITY_LIMIT",
]

STABILITY_LIMIT = 0.5
TABLE1_HEADER = ("batch_size", "k1", "k10", "k20", "euler")
SNAPSHOT_HEADER = ("t", "x", "u_true", "u_pred_trcg", "u_pred_adam", "u_euler")


@dataclass(frozen=True)
class StabilityParams:
    alpha: float
    stable: bool


def stability_alpha(beta, dt, dx) -> StabilityParams:
    if not (beta > 0 and dt > 0 and dx > 0):
        raise ValueError("beta, dt and dx must all be positive")
    alpha = beta * dt / (dx * dx)
    return StabilityParams(alpha, alpha <= STABILITY_LIMIT)


def euler_rollout(u0, alpha, n_steps) -> np.ndarray:
    """Explicit Euler for ``u_t = beta u_xx`` with zero end values.

    Returns ``u0.shape[:-1] + (n_steps + 1, M)``. Overflow is not an error:
    non-finite states simply propagate.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    u = np.array(u0, dtype=np.float64)
    seq = np.empty(u.shape[:-1] + (n_steps + 1, u.shape[-1]))
    seq[..., 0, :] = u
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, n_steps + 1):
            nxt = np.empty_like(u)
            nxt[..., 1:-1] = u[..., 1:-1] + alpha * (u[..., :-2] - 2.0 * u[..., 1:-1] + u[..., 2:])
            nxt[..., 0] = 0.0
            nxt[..., -1] = 0.0
            u = nxt
            seq[..., j, :] = u
    return seq


def rollout_rmse(predicted, truth) -> float:
    """RMSE over every predicted (time, space) point; time index 0 is the seed."""
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.ndim < 2 or predicted.shape[-2] < 2:
        raise ValueError("need a time axis with at least one predicted snapshot")
    err = predicted[..., 1:, :] - truth[..., 1:, :]
    return math.sqrt(float(np.mean(err * err)))


@dataclass
class RolloutReport:
    method: str
    k: int | None
    batch_size: int | None
    rmse: float
    per_sample_rmse: list
    diverged: bool
    fingerprint: str = ""
    sample_indices: list = field(default_factory=list)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["rmse"] = _json_float(self.rmse)
        doc["per_sample_rmse"] = [_json_float(v) for v in self.per_sample_rmse]
        return json.dumps(doc, indent=2) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


def _json_float(v):
    return v if math.isfinite(v) else None


def _scaled_rms(err, mask):
    """RMS of ``err[mask]`` without overflow for values near the float limit."""
    vals = np.abs(err[mask])
    if vals.size == 0:
        return math.inf
    top = float(vals.max())
    if top == 0.0:
        return 0.0
    return top * math.sqrt(float(np.mean((vals / top) ** 2)))


def _report(pred, truth, method, indices, k=None, batch_size=None, fingerprint=""):
    """Aggregate RMSE, keeping only the finite prefix of divergent rollouts."""
    with np.errstate(over="ignore", invalid="ignore"):
        err = pred[:, 1:, :] - truth[:, 1:, :]
    finite = np.isfinite(err)
    diverged = not bool(np.all(np.isfinite(pred)))
    if diverged:
        warnings.warn(f"{method}: rollout went non-finite; scoring finite prefix only", RuntimeWarning)
        # a step counts only if every state up to it is finite
        step_ok = np.cumprod(np.all(finite, axis=-1), axis=-1).astype(bool)
        finite = step_ok[..., None] & finite
    rmse = _scaled_rms(err, finite)
    per_sample = [_scaled_rms(err[s], finite[s]) for s in range(pred.shape[0])]
    return RolloutReport(
        method, k, batch_size, rmse, per_sample, diverged, fingerprint, [int(i) for i in indices]
    )


def evaluate_model(p: FDNetParams, dataset, method_label="fdnet", batch_size=None,
                   fingerprint="", indices=None) -> RolloutReport:
    """Roll out every test sample from its t=0 snapshot over the full horizon."""
    indices = dataset.test_indices if indices is None else np.asarray(indices)
    if len(indices) == 0:
        raise ValueError("test split is empty")
    truth = dataset.samples[indices]
    pred = rollout(truth[:, 0, :], p, dataset.physics.num_steps, check_finite=False)
    return _report(pred, truth, method_label, indices, p.k, batch_size, fingerprint)


def evaluate_euler(dataset, fingerprint="", indices=None) -> RolloutReport:
    indices = dataset.test_indices if indices is None else np.asarray(indices)
    truth = dataset.samples[indices]
    ph = dataset.physics
    alpha = stability_alpha(ph.beta, ph.dt, ph.grid.dx).alpha
    pred = euler_rollout(truth[:, 0, :], alpha, ph.num_steps)
    return _report(pred, truth, "euler", indices, fingerprint=fingerprint)


def frozen_field_rmse(dataset) -> float:
    """Error of predicting every snapshot by the t=0 field."""
    truth = dataset.test
    frozen = np.broadcast_to(truth[:, :1, :], truth.shape)
    return rollout_rmse(frozen, truth)


def fast_test_rmse(dataset, indices=None):
    """Callable ``params -> RMSE`` using the dense k-step matrix.

    Agrees with :func:`evaluate_model` to rounding error and is much
    cheaper, which makes it suitable for per-iteration training traces.
    """
    indices = dataset.test_indices if indices is None else np.asarray(indices)
    truth = dataset.samples[indices]
    M = truth.shape[-1]
    n = dataset.physics.num_steps

    def score(p: FDNetParams) -> float:
        P = np.linalg.matrix_power(step_matrix(p, M), p.k).T
        u = truth[:, 0, :]
        total = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for j in range(1, n + 1):
                u = u @ P
                e = u - truth[:, j, :]
                total += float(np.sum(e * e))
        return math.sqrt(total / (truth.shape[0] * n * M)) if math.isfinite(total) else math.inf

    return score


def _cell(value):
    if value is None or not math.isfinite(value):
        return "DIVERGED"
    return repr(float(value))


def write_table1_csv(path, cells, euler, batch_sizes=(32, 64, 128), ks=(1, 10, 20)):
    """``cells[(batch_size, k)]`` holds an RMSE or None for a divergent run."""
    header = ("batch_size",) + tuple(f"k{k}" for k in ks) + ("euler",)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for b in batch_sizes:
            writer.writerow([b] + [_cell(cells.get((b, k))) for k in ks] + [_cell(euler)])


def snapshot_indices(times, dt, num_steps):
    """Snapshot indices nearest to the requested physical times, within the horizon."""
    out = []
    for t in times:
        j = int(round(t / dt))
        if 0 <= j <= num_steps and j not in out:
            out.append(j)
    return out


def write_snapshots_csv(path, x, dt, indices, truth, trcg=None, adam=None, euler=None):
    """Per-(t, x) rows for one sample; missing predictors leave blank cells."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SNAPSHOT_HEADER)
        for j in indices:
            for i, xi in enumerate(x):
                row = [repr(float(j * dt)), repr(float(xi)), repr(float(truth[j, i]))]
                for seq in (trcg, adam, euler):
                    row.append("" if seq is None else repr(float(seq[j, i])))
                writer.writerow(row)
