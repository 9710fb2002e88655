"""Training FD-Net: mini-batch sampling, ADAM, and a stochastic trust-region
Newton method whose subproblem is solved by Steihaug's truncated CG."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .diff import Batch, BatchObjective, LossConfig
from .errors import ConfigError, DivergenceError
from .model import NUM_PARAMS, FDNetParams

__all__ = [
    "MiniBatchSampler",
    "sample_minibatch",
    "AdamConfig",
    "AdamState",
    "adam_step",
    "adam_train",
    "TrustRegionConfig",
    "CGResult",
    "steihaug_cg",
    "trcg_train",
    "TraceRecord",
    "TrainTrace",
    "TrainingDivergedError",
    "CG_STATUSES",
]

CG_STATUSES = ("converged", "hit_boundary", "negative_curvature", "max_iters")


class MiniBatchSampler:
    """Uniform draws, with replacement, of consecutive-snapshot pairs.

    ``series`` is the training array ``[sample][time][space]``; pair
    ``(n, i)`` is ``(series[n, i], series[n, i + 1])``.
    """

    def __init__(self, series, batch_size, rng_seed=0, sample_ids=None):
        series = np.asarray(series, dtype=np.float64)
        if series.ndim != 3 or series.shape[0] == 0 or series.shape[1] < 2:
            raise ConfigError("sampler needs at least one series with two snapshots")
        if int(batch_size) != batch_size or batch_size < 1:
            raise ConfigError(f"batch_size must be a positive integer, got {batch_size!r}")
        self.series = series
        self.batch_size = int(batch_size)
        self.rng_seed = int(rng_seed)
        self.sample_ids = (
            np.arange(series.shape[0]) if sample_ids is None else np.asarray(sample_ids)
        )
        self.num_intervals = series.shape[1] - 1
        self.rng = np.random.Generator(np.random.PCG64(self.rng_seed))

    @classmethod
    def from_dataset(cls, dataset, batch_size, rng_seed=0):
        return cls(dataset.train, batch_size, rng_seed, dataset.train_indices)

    @property
    def num_train_pairs(self) -> int:
        return self.series.shape[0] * self.num_intervals

    def sample(self) -> Batch:
        flat = self.rng.integers(0, self.num_train_pairs, size=self.batch_size)
        n, i = np.divmod(flat, self.num_intervals)
        return Batch(self.series[n, i], self.series[n, i + 1], self.sample_ids[n], i)


def sample_minibatch(sampler: MiniBatchSampler) -> Batch:
    return sampler.sample()


class TraceRecord(NamedTuple):
    iter: int
    epoch: float
    loss: float
    test_rmse: float = math.nan
    step_norm: float = math.nan
    delta: float = math.nan
    rho: float = math.nan
    cg_status: str = ""
    outer_epoch: float = math.nan
    cg_iters: int = 0
    accepted: bool = True


CSV_HEADER = ("iter", "epoch", "loss", "test_rmse", "step_norm", "delta", "rho", "cg_status")


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if math.isnan(value) else repr(float(value))


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)

    def append(self, record: TraceRecord):
        if self.records and record.epoch < self.records[-1].epoch:
            raise ValueError("epoch fraction must be non-decreasing")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in self.records:
                writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])


class TrainingDivergedError(DivergenceError):
    """Training hit persistent non-finite losses; carries best-so-far state."""

    def __init__(self, message, params, trace):
        super().__init__(message)
        self.params = params
        self.trace = trace


# ---------------------------------------------------------------- ADAM


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 200
    record_every: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigError("learning_rate must be finite and >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError("epochs must be a positive integer")
        if not self.record_every > 0:
            raise ConfigError("record_every must be positive")


class AdamState(NamedTuple):
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n=NUM_PARAMS):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(theta, state: AdamState, gradient, cfg: AdamConfig):
    """One bias-corrected ADAM update; returns ``(theta', state')``."""
    g = np.asarray(gradient, dtype=np.float64)
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (g * g)
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    theta = np.asarray(theta, dtype=np.float64) - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return theta, AdamState(m, v, t)


def adam_train(
    p0: FDNetParams,
    sampler: MiniBatchSampler,
    cfg: AdamConfig,
    loss_cfg: LossConfig = LossConfig(),
    evaluate: Optional[Callable[[FDNetParams], float]] = None,
):
    """Epoch-based ADAM; an epoch is ``ceil(num_train_pairs / batch_size)`` draws.

    A trace record is written at ``epoch = 0`` and then every
    ``cfg.record_every`` epochs, holding the latest mini-batch loss and,
    when ``evaluate`` is given, its value at the current parameters.
    """
    theta = p0.to_vector()
    state = AdamState.zeros()
    per_epoch = math.ceil(sampler.num_train_pairs / sampler.batch_size)
    record_iters = max(1, round(cfg.record_every * per_epoch))
    total = cfg.epochs * per_epoch
    trace = TrainTrace()

    def record(it, loss):
        params = FDNetParams.from_vector(theta, p0.k)
        rmse = evaluate(params) if evaluate is not None else math.nan
        trace.append(TraceRecord(it, it / per_epoch, loss, rmse, outer_epoch=it / per_epoch))

    first = BatchObjective(sampler.sample(), p0.k, loss_cfg).loss(theta)
    record(0, first)
    last_good = theta
    for it in range(1, total + 1):
        obj = BatchObjective(sampler.sample(), p0.k, loss_cfg)
        try:
            loss, g = obj.loss_and_gradient(theta)
        except DivergenceError as exc:
            raise TrainingDivergedError(
                f"ADAM diverged at iteration {it}", FDNetParams.from_vector(last_good, p0.k), trace
            ) from exc
        last_good = theta
        theta, state = adam_step(theta, state, g, cfg)
        if it % record_iters == 0 or it == total:
            record(it, loss)
    return FDNetParams.from_vector(theta, p0.k), trace


# ---------------------------------------------------------------- Steihaug CG


class CGResult(NamedTuple):
    step: np.ndarray
    status: str
    iterations: int
    model_value: float
    iterate_norms: tuple


def _boundary_taus(z, d, delta):
    """Both roots ``tau`` of ``||z + tau d|| = delta``, smaller first."""
    a = d @ d
    b = 2.0 * (z @ d)
    c = z @ z - delta * delta
    disc = math.sqrt(max(b * b - 4.0 * a * c, 0.0))
    # numerically stable pair of roots
    q = -0.5 * (b + math.copysign(disc, b))
    if q == 0.0:
        r = math.sqrt(max(-c / a, 0.0))
        return -r, r
    t1, t2 = q / a, c / q
    return (t1, t2) if t1 <= t2 else (t2, t1)


def steihaug_cg(g, hvp, delta, tol, max_iters=NUM_PARAMS) -> CGResult:
    """Approximately minimise ``m(p) = g.p + p.H p / 2`` over ``||p|| <= delta``.

    CG on ``H p = -g`` from ``p = 0``; stops when the residual falls below
    ``tol``, when an iterate would leave the region (``hit_boundary``),
    or when a direction of non-positive curvature appears
    (``negative_curvature``). In the last two cases the step is the point
    on the boundary along the current direction. ``model_value`` is
    ``m(step)``, accumulated exactly from the CG recurrences.
    """
    g = np.asarray(g, dtype=np.float64)
    if not delta > 0:
        raise ValueError(f"trust radius must be positive, got {delta!r}")
    z = np.zeros_like(g)
    r = g.copy()
    d = -r
    rr = r @ r
    mval = 0.0
    norms = [0.0]
    if math.sqrt(rr) <= tol:
        return CGResult(z, "converged", 0, 0.0, tuple(norms))

    for it in range(1, max_iters + 1):
        Hd = np.asarray(hvp(d), dtype=np.float64)
        if not np.all(np.isfinite(Hd)):
            raise DivergenceError("curvature oracle returned non-finite values")
        dHd = d @ Hd
        rd = r @ d
        if dHd <= 0:
            # pick the boundary point along d with the lower model value
            best = None
            for tau in _boundary_taus(z, d, delta):
                val = mval + tau * rd + 0.5 * tau * tau * dHd
                if best is None or val < best[1]:
                    best = (tau, val)
            tau, mval = best
            p = z + tau * d
            norms.append(float(np.linalg.norm(p)))
            return CGResult(p, "negative_curvature", it, mval, tuple(norms))
        alpha = rr / dHd
        z_next = z + alpha * d
        if np.linalg.norm(z_next) >= delta:
            tau = _boundary_taus(z, d, delta)[1]
            p = z + tau * d
            mval = mval + tau * rd + 0.5 * tau * tau * dHd
            norms.append(float(np.linalg.norm(p)))
            return CGResult(p, "hit_boundary", it, mval, tuple(norms))
        mval = mval + alpha * rd + 0.5 * alpha * alpha * dHd
        z = z_next
        norms.append(float(np.linalg.norm(z)))
        r = r + alpha * Hd
        rr_next = r @ r
        if math.sqrt(rr_next) < tol:
            return CGResult(z, "converged", it, mval, tuple(norms))
        d = -r + (rr_next / rr) * d
        rr = rr_next
    return CGResult(z, "max_iters", max_iters, mval, tuple(norms))


# ---------------------------------------------------------------- trust region

_MIN_RADIUS = 1e-300


@dataclass(frozen=True)
class TrustRegionConfig:
    delta0: float = 1.0
    delta_max: float = 100.0
    eta_accept: float = 1e-4
    shrink_threshold: float = 0.25
    expand_threshold: float = 0.75
    cg_max_iters: int = NUM_PARAMS
    cg_tol_factor: float = 0.1
    epoch_budget: float = 3.0
    eval_every: int = 10
    max_nonfinite: int = 20

    def __post_init__(self):
        if not (0 < self.delta0 <= self.delta_max):
            raise ConfigError("need 0 < delta0 <= delta_max")
        if not (0 <= self.eta_accept < self.shrink_threshold < self.expand_threshold < 1):
            raise ConfigError("need 0 <= eta_accept < shrink_threshold < expand_threshold < 1")
        if int(self.cg_max_iters) != self.cg_max_iters or self.cg_max_iters < 1:
            raise ConfigError("cg_max_iters must be a positive integer")
        if not 0 < self.cg_tol_factor < 1:
            raise ConfigError("cg_tol_factor must lie in (0, 1)")
        if not self.epoch_budget > 0:
            raise ConfigError("epoch_budget must be positive")
        if int(self.eval_every) != self.eval_every or self.eval_every < 1:
            raise ConfigError("eval_every must be a positive integer")


def trcg_train(
    p0: FDNetParams,
    sampler,
    cfg: TrustRegionConfig,
    loss_cfg: LossConfig = LossConfig(),
    evaluate: Optional[Callable[[FDNetParams], float]] = None,
    objective_factory=None,
):
    """Stochastic trust-region Newton-CG.

    Each iteration draws one mini-batch and uses it for the gradient, the
    CG Hessian-vector products and the ratio test. The budget counts oracle
    passes: an iteration costs ``batch_size / num_train_pairs`` epochs per
    gradient or HVP evaluation. The budget is a hard ceiling; the last
    iteration's CG is truncated to the passes that remain, and training
    stops once a gradient plus one HVP no longer fits.
    ``objective_factory(batch)`` may replace the
    FD-Net objective with any object offering ``loss``,
    ``loss_and_gradient`` and ``hvp``.
    """
    if objective_factory is None:
        def objective_factory(batch):
            return BatchObjective(batch, p0.k, loss_cfg)

    theta = p0.to_vector()
    delta = cfg.delta0
    pass_cost = sampler.batch_size / sampler.num_train_pairs
    budget_passes = math.floor(cfg.epoch_budget / pass_cost + 1e-9)
    passes = 0
    trace = TrainTrace()
    nonfinite = 0
    it = 0

    while budget_passes - passes >= 2:
        it += 1
        cg_cap = min(cfg.cg_max_iters, budget_passes - passes - 1)
        obj = objective_factory(sampler.sample())
        try:
            f, g = obj.loss_and_gradient(theta)
            gnorm = float(np.linalg.norm(g))
            if gnorm == 0.0:
                break
            tol = cfg.cg_tol_factor * min(1.0, math.sqrt(gnorm)) * gnorm
            with np.errstate(over="ignore", invalid="ignore"):
                cg = steihaug_cg(g, lambda v: obj.hvp(theta, v), delta, tol, cg_cap)
        except DivergenceError as exc:
            raise TrainingDivergedError(
                f"non-finite derivatives at accepted parameters, iteration {it}: {exc}",
                FDNetParams.from_vector(theta, p0.k), trace,
            ) from exc
        p = cg.step
        predicted = -cg.model_value
        with np.errstate(over="ignore", invalid="ignore"):
            trial = obj.loss(theta + p)
        if not math.isfinite(trial):
            nonfinite += 1
            rho = -math.inf
            if nonfinite > cfg.max_nonfinite:
                raise TrainingDivergedError(
                    f"{nonfinite} consecutive non-finite trial losses",
                    FDNetParams.from_vector(theta, p0.k), trace,
                )
        else:
            nonfinite = 0
            rho = (f - trial) / predicted if predicted > 0 else -math.inf

        step_norm = float(np.linalg.norm(p))
        accepted = rho > cfg.eta_accept
        if accepted:
            theta = theta + p
        if rho < cfg.shrink_threshold:
            delta = max(delta / 4.0, _MIN_RADIUS)
        elif rho > cfg.expand_threshold and step_norm >= 0.99 * delta:
            delta = min(2.0 * delta, cfg.delta_max)

        passes += 1 + cg.iterations
        rmse = math.nan
        if evaluate is not None and it % cfg.eval_every == 0:
            rmse = evaluate(FDNetParams.from_vector(theta, p0.k))
        trace.append(TraceRecord(
            it, passes * pass_cost, trial if accepted else f, rmse, step_norm, delta, rho,
            cg.status, it * pass_cost, cg.iterations, accepted,
        ))

    final = FDNetParams.from_vector(theta, p0.k)
    if evaluate is not None and trace.records and math.isnan(trace.records[-1].test_rmse):
        trace.records[-1] = trace.records[-1]._replace(test_rmse=evaluate(final))
    return final, trace
