"""Heat-equation datasets built from the closed-form Fourier-sine solution.

On a bar ``[0, L]`` with zero-value ends, a sample with mode amplitudes
``C_1..C_n`` evolves as::

    u(x, t) = sum_m C_m sin(m pi x / L) exp(-beta (m pi / L)**2 t)

Datasets store snapshots at ``t = 0, dt, ..., num_steps * dt`` for every
sample together with a seeded train/test split.

File layout (``.fdds``, format version "1")::

    b"FDDS" | uint64 LE manifest length | UTF-8 JSON manifest | float64 LE payload

The payload is the ``[sample][time][space]`` array in C order. Floats in the
manifest use Python's shortest round-trip repr, so values survive exactly.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    ManifestError,
    ShapeMismatchError,
    TruncatedPayloadError,
)

__all__ = [
    "Grid1D",
    "SampleSpec",
    "PhysicsConfig",
    "Dataset",
    "analytic_solution",
    "generate_dataset",
    "split_indices",
    "save_dataset",
    "load_dataset",
    "FORMAT_VERSION",
    "DEFAULT_NUM_MODES",
]

FORMAT_VERSION = "1"
MAGIC = b"FDDS"
DEFAULT_NUM_MODES = 3
_HEADER = struct.Struct("<4sQ")


def make_rng(seed):
    """PCG64 generator; normals come from numpy's ziggurat sampler."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class Grid1D:
    num_points: int
    length: float = math.pi

    def __post_init__(self):
        if int(self.num_points) != self.num_points or self.num_points < 2:
            raise ConfigError(f"num_points must be an integer >= 2, got {self.num_points!r}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise ConfigError(f"length must be finite and positive, got {self.length!r}")

    @property
    def dx(self) -> float:
        return self.length / (self.num_points - 1)

    @property
    def x(self) -> np.ndarray:
        x = np.arange(self.num_points) * self.dx
        x[-1] = self.length
        return x


@dataclass(frozen=True)
class SampleSpec:
    coeffs: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise ConfigError("a sample needs at least one mode coefficient")

    @property
    def num_modes(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class PhysicsConfig:
    beta: float
    dt: float
    num_steps: int
    grid: Grid1D

    def __post_init__(self):
        for name in ("beta", "dt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be finite and positive, got {value!r}")
        if int(self.num_steps) != self.num_steps or self.num_steps < 1:
            raise ConfigError(f"num_steps must be a positive integer, got {self.num_steps!r}")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.num_steps + 1) * self.dt


@dataclass(eq=False)
class Dataset:
    """Simulated series ``samples[s, t, i]`` plus provenance and split."""

    samples: np.ndarray
    specs: list
    physics: PhysicsConfig
    train_indices: np.ndarray
    test_indices: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.train_indices = np.asarray(self.train_indices, dtype=np.int64)
        self.test_indices = np.asarray(self.test_indices, dtype=np.int64)
        expected = (len(self.specs), self.physics.num_steps + 1, self.physics.grid.num_points)
        if self.samples.shape != expected:
            raise ShapeMismatchError(
                f"samples have shape {self.samples.shape}, expected {expected}"
            )
        both = np.concatenate([self.train_indices, self.test_indices])
        if not np.array_equal(np.sort(both), np.arange(len(self.specs))):
            raise ConfigError("train/test indices must partition the samples exactly once")
        if np.any(self.samples[..., 0]) or np.any(self.samples[..., -1]):
            raise ValueError("boundary values must be exactly zero at every snapshot")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def train(self) -> np.ndarray:
        return self.samples[self.train_indices]

    @property
    def test(self) -> np.ndarray:
        return self.samples[self.test_indices]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.samples.shape == other.samples.shape
            and self.samples.tobytes() == other.samples.tobytes()
            and self.specs == other.specs
            and self.physics == other.physics
            and np.array_equal(self.train_indices, other.train_indices)
            and np.array_equal(self.test_indices, other.test_indices)
            and self.meta == other.meta
        )


def _mode_fields(coeffs, grid, beta, times):
    """Fields at each time in ``times``; returns shape (len(times), M)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    wavenumbers = np.arange(1, coeffs.size + 1) * math.pi / grid.length
    shapes = np.sin(np.outer(wavenumbers, grid.x))
    decay = np.exp(-beta * np.outer(np.asarray(times, dtype=np.float64), wavenumbers**2))
    u = (decay * coeffs) @ shapes
    u[:, 0] = 0.0
    u[:, -1] = 0.0
    return u


def analytic_solution(spec: SampleSpec, physics: PhysicsConfig, t: float) -> np.ndarray:
    """Exact field ``u(x_i, t)`` on the physics grid."""
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"t must be finite and >= 0, got {t!r}")
    if not all(math.isfinite(c) for c in spec.coeffs):
        raise ValueError("mode coefficients must be finite")
    return _mode_fields(spec.coeffs, physics.grid, physics.beta, [t])[0]


def split_indices(num_samples, split_ratio, split_seed):
    """Seeded permutation split into sorted (train, test) index arrays."""
    if not 0 < split_ratio < 1:
        raise ConfigError(f"split_ratio must lie in (0, 1), got {split_ratio!r}")
    num_train = int(round(split_ratio * num_samples))
    if num_train == 0 or num_train == num_samples:
        raise ConfigError(
            f"split_ratio={split_ratio} leaves an empty partition for {num_samples} samples"
        )
    perm = make_rng(split_seed).permutation(num_samples)
    return np.sort(perm[:num_train]), np.sort(perm[num_train:])


def generate_dataset(
    num_samples: int,
    physics: PhysicsConfig,
    num_modes: int = DEFAULT_NUM_MODES,
    coeff_seed: int = 0,
    split_ratio: float = 0.75,
    split_seed: int = 0,
) -> Dataset:
    """Simulate ``num_samples`` series with standard-normal mode amplitudes.

    Sample ``s`` draws its amplitudes from its own stream seeded with
    ``coeff_seed + s``, so the result does not depend on generation order.
    """
    if int(num_samples) != num_samples or num_samples < 2:
        raise ConfigError(f"num_samples must be an integer >= 2, got {num_samples!r}")
    if int(num_modes) != num_modes or num_modes < 1:
        raise ConfigError(f"num_modes must be a positive integer, got {num_modes!r}")
    train, test = split_indices(num_samples, split_ratio, split_seed)

    times = physics.times
    specs = []
    samples = np.empty((num_samples, times.size, physics.grid.num_points))
    for s in range(num_samples):
        seed = coeff_seed + s
        coeffs = make_rng(seed).standard_normal(num_modes)
        specs.append(SampleSpec(tuple(coeffs), seed))
        samples[s] = _mode_fields(coeffs, physics.grid, physics.beta, times)

    meta = {
        "num_modes": int(num_modes),
        "coeff_seed": int(coeff_seed),
        "split_ratio": float(split_ratio),
        "split_seed": int(split_seed),
    }
    return Dataset(samples, specs, physics, train, test, meta)


def _manifest(dataset):
    p = dataset.physics
    return {
        "format_version": FORMAT_VERSION,
        "shape": list(dataset.samples.shape),
        "dtype": "<f8",
        "payload_bytes": int(dataset.samples.size * 8),
        "grid": {"num_points": p.grid.num_points, "length": p.grid.length},
        "physics": {"beta": p.beta, "dt": p.dt, "num_steps": p.num_steps},
        "specs": [{"coeffs": list(s.coeffs), "seed": s.seed} for s in dataset.specs],
        "train_indices": dataset.train_indices.tolist(),
        "test_indices": dataset.test_indices.tolist(),
        "meta": dataset.meta,
    }


def save_dataset(dataset: Dataset, path) -> None:
    manifest = json.dumps(_manifest(dataset), sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(dataset.samples, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, len(manifest)))
        fh.write(manifest)
        fh.write(payload)


def load_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ManifestError("file too short to hold a dataset header")
    magic, length = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ManifestError(f"bad magic {magic!r}, not a dataset file")
    end = _HEADER.size + length
    if end > len(raw):
        raise ManifestError("manifest extends past end of file")
    try:
        m = json.loads(raw[_HEADER.size:end].decode("utf-8"))
        if m["format_version"] != FORMAT_VERSION:
            raise ManifestError(f"unsupported format version {m['format_version']!r}")
        if m["dtype"] != "<f8":
            raise ManifestError(f"unsupported dtype {m['dtype']!r}")
        shape = tuple(int(n) for n in m["shape"])
        declared = int(m["payload_bytes"])
        grid = Grid1D(int(m["grid"]["num_points"]), float(m["grid"]["length"]))
        physics = PhysicsConfig(
            float(m["physics"]["beta"]),
            float(m["physics"]["dt"]),
            int(m["physics"]["num_steps"]),
            grid,
        )
        specs = [SampleSpec(tuple(s["coeffs"]), int(s["seed"])) for s in m["specs"]]
        train, test = m["train_indices"], m["test_indices"]
        meta = m.get("meta", {})
    except ManifestError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest: {exc}") from exc

    expected = (len(specs), physics.num_steps + 1, grid.num_points)
    if len(shape) != 3 or shape != expected:
        raise ShapeMismatchError(f"manifest shape {shape} does not match grid/physics {expected}")
    if declared != math.prod(shape) * 8:
        raise ShapeMismatchError(
            f"payload of {declared} bytes cannot hold shape {shape} "
            f"({declared // 8 // max(1, shape[0] * shape[1])} values per snapshot, "
            f"manifest declares {shape[2]})"
        )
    payload = raw[end:]
    if len(payload) < declared:
        raise TruncatedPayloadError(
            f"truncated payload: {len(payload)} of {declared} bytes present"
        )
    if len(payload) > declared:
        raise ShapeMismatchError(
            f"payload holds {len(payload)} bytes, manifest declares {declared}"
        )
    samples = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    return Dataset(samples, specs, physics, train, test, meta)
