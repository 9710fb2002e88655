"""Acceptance criteria, each run at its stated tolerance.

Every sub-check is recorded and printed as one PASS/FAIL line in the
pytest terminal summary (or directly when this file is run as a script).
A criterion's test fails if any of its sub-checks fails.
"""

import math
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import central_difference, fd_gradient, random_batch, random_params, rel_err  # noqa: E402
from test_optim import brute_force_tr, random_symmetric, subproblem_value  # noqa: E402

from fdnet.cli import main as cli_main, table1_config, train_model  # noqa: E402
from fdnet.config import load_config, with_overrides  # noqa: E402
from fdnet.diff import BatchObjective  # noqa: E402
from fdnet.evalsuite import euler_rollout, evaluate_euler, evaluate_model, stability_alpha  # noqa: E402
from fdnet.heat_data import Grid1D, PhysicsConfig, SampleSpec, analytic_solution, generate_dataset  # noqa: E402
from fdnet.model import FDNetParams, auxiliary_step, euler_params, forward_step, rollout  # noqa: E402
from fdnet.optim import steihaug_cg  # noqa: E402

RESULTS = []


def check(criterion, name, ok, detail):
    RESULTS.append((criterion, name, bool(ok), detail))
    return bool(ok)


def verdict(criterion):
    failed = [r for r in RESULTS if r[0] == criterion and not r[2]]
    assert not failed, "; ".join(f"{r[1]}: {r[3]}" for r in failed)


def _build(cfg):
    d = cfg.data
    return generate_dataset(d.num_samples, cfg.physics.build(), d.num_modes, d.coeff_seed,
                            d.split_ratio, d.split_seed)


# ------------------------------------------------------------------ 1


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(20240601)
    worst_g = worst_h = worst_s = 0.0
    for draw in range(20):
        k = (1, 5, 10)[draw % 3]
        p = random_params(rng, k, 0.15)
        batch = random_batch(rng, int(rng.integers(1, 9)), int(rng.integers(3, 32)))
        obj = BatchObjective(batch, k)
        theta = p.to_vector()
        worst_g = max(worst_g, rel_err(obj.gradient(theta), fd_gradient(obj.loss, theta)))
        v = rng.standard_normal(16)
        fd = central_difference(lambda t: BatchObjective(batch, k).gradient(t), theta, v)
        worst_h = max(worst_h, rel_err(obj.hvp(theta, v), fd))
        u, w = rng.standard_normal((2, 16))
        a, b = u @ obj.hvp(theta, w), w @ obj.hvp(theta, u)
        worst_s = max(worst_s, abs(a - b) / max(1.0, abs(a)))
    check(1, "gradient vs central differences, rel err < 1e-6", worst_g < 1e-6, f"worst {worst_g:.2e}")
    check(1, "HVP vs differenced gradient, rel err < 1e-6", worst_h < 1e-6, f"worst {worst_h:.2e}")
    check(1, "HVP symmetry uHw = wHu to 1e-10", worst_s <= 1e-10, f"worst {worst_s:.2e}")
    verdict(1)


# ------------------------------------------------------------------ 2


def test_steihaug_subproblem_quality():
    rng = np.random.default_rng(7)
    gaps, inside, monotone = [], True, True
    for trial in range(100):
        n = 2 if trial < 50 else 3
        H = random_symmetric(rng, n)
        g = rng.standard_normal(n)
        delta = float(rng.uniform(0.1, 3.0))
        res = steihaug_cg(g, lambda v: H @ v, delta, 1e-12)
        gaps.append(subproblem_value(g, H, res.step) - brute_force_tr(g, H, delta))
        inside &= np.linalg.norm(res.step) <= delta * (1 + 1e-12)
        monotone &= all(b >= a for a, b in zip(res.iterate_norms, res.iterate_norms[1:]))
    gaps = np.array(gaps)
    bad = int(np.sum(gaps > 1e-6))
    check(2, "m(p) within 1e-6 of global optimum (100 systems)", bad == 0,
          f"{bad}/100 above tolerance, largest gap {gaps.max():.3e}")
    check(2, "||p|| <= delta (1 + 1e-12)", inside, "all 100 systems" if inside else "violated")
    check(2, "iterate norms non-decreasing", monotone, "all 100 systems" if monotone else "violated")

    H = np.diag([1.0, -1.0])
    g = np.array([1.0, 0.0])
    res = steihaug_cg(g, lambda v: H @ v, 1.0, 1e-12)
    opt = brute_force_tr(g, H, 1.0)
    check(2, "diag(1,-1), g=(1,0): negative_curvature exit at global optimum",
          res.status == "negative_curvature" and res.model_value <= opt + 1e-6,
          f"status {res.status}, m(p) {res.model_value:.4f}, optimum {opt:.4f}")
    verdict(2)


# ------------------------------------------------------------------ 3


def test_euler_baseline_regimes(unstable_dataset):
    ph = PhysicsConfig(0.0002, 1.0, 1000, Grid1D(31))
    alpha = stability_alpha(ph.beta, ph.dt, ph.grid.dx).alpha
    u0 = analytic_solution(SampleSpec((1.0,), 0), ph, 0.0)
    err = np.max(np.abs(euler_rollout(u0, alpha, 1000)[-1]
                        - analytic_solution(SampleSpec((1.0,), 0), ph, 1000.0)))
    check(3, "stable single mode, max-abs at t=1000 < 2e-2", err < 2e-2, f"alpha {alpha:.4f}, max-abs {err:.2e}")

    uph = unstable_dataset.physics
    ua = stability_alpha(uph.beta, uph.dt, uph.grid.dx).alpha
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rmse = evaluate_euler(unstable_dataset).rmse
    check(3, "unstable dataset (dt=200, 5 steps), Euler RMSE > 10", rmse > 10,
          f"alpha {ua:.3f}, RMSE {rmse:.4g}")
    verdict(3)


# ------------------------------------------------------------------ 4


@pytest.fixture(scope="module")
def stable_runs(stable_dataset):
    cfg = load_config()
    trcg_params, trcg_trace = train_model(cfg, stable_dataset, evaluate=False)
    adam_cfg = with_overrides(cfg, {"optimizer": "adam"})
    adam_params, _ = train_model(adam_cfg, stable_dataset, evaluate=False)
    return trcg_params, trcg_trace, adam_params


@pytest.mark.slow
def test_fine_step_training(stable_dataset, stable_runs):
    trcg_params, trace, adam_params = stable_runs
    used = trace.records[-1].epoch
    trcg = evaluate_model(trcg_params, stable_dataset, "fdnet-trcg").rmse
    adam = evaluate_model(adam_params, stable_dataset, "fdnet-adam").rmse
    check(4, "TRCG budget, counted in oracle passes, <= 3 epochs", used <= 3.0, f"{used:.4f} epochs")
    check(4, "TRCG test rollout RMSE <= 1e-3", trcg <= 1e-3, f"RMSE {trcg:.3e}")
    check(4, "ADAM (lr 1e-3, 200 epochs) RMSE >= 10x TRCG", adam >= 10 * trcg,
          f"ADAM {adam:.3e}, ratio {adam / trcg:.2f}")
    verdict(4)


# ------------------------------------------------------------------ 5


@pytest.mark.slow
def test_coarse_step_table():
    cfg = table1_config(load_config())
    ds = _build(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        euler = [evaluate_euler(ds).rmse for _ in cfg.table1.batch_sizes]
        for b in cfg.table1.batch_sizes:
            cell = {}
            for k in cfg.table1.ks:
                c = with_overrides(cfg, {"sampler.batch_size": b, "model.k": k})
                params, _ = train_model(c, ds, evaluate=False)
                cell[k] = evaluate_model(params, ds, "fdnet-trcg", b).rmse
            check(5, f"batch {b}: RMSE(k=1) in [0.01, 0.1]", 0.01 <= cell[1] <= 0.1, f"{cell[1]:.4g}")
            check(5, f"batch {b}: RMSE(k=20) < 0.01", cell[20] < 0.01, f"{cell[20]:.4g}")
            check(5, f"batch {b}: RMSE(k=1) > RMSE(k=10)", cell[1] > cell[10],
                  f"{cell[1]:.4g} vs {cell[10]:.4g}")
    check(5, "Euler column identical across rows", len(set(euler)) == 1, f"{euler[0]:.6g}")
    check(5, "Euler column > 10", euler[0] > 10, f"{euler[0]:.4g}")
    verdict(5)


# ------------------------------------------------------------------ 6


def _assembled(p, M):
    return np.column_stack([auxiliary_step(e, p.with_k(1)) for e in np.eye(M)])


def test_model_structure():
    rng = np.random.default_rng(6)
    worst_mat = worst_lin = 0.0
    for _ in range(50):
        M = int(rng.integers(3, 9))
        k = int(rng.integers(1, 6))
        p = FDNetParams.from_vector(0.5 * rng.standard_normal(16), k)
        u, v = rng.standard_normal((2, M))
        A = np.linalg.matrix_power(_assembled(p, M), k)
        worst_mat = max(worst_mat, np.max(np.abs(forward_step(u, p) - A @ u)))
        a, b = rng.standard_normal(2)
        lhs = forward_step(a * u + b * v, p)
        worst_lin = max(worst_lin, np.max(np.abs(lhs - a * forward_step(u, p) - b * forward_step(v, p))))
    check(6, "forward equals assembled matrix on M <= 8, to 1e-12", worst_mat <= 1e-12, f"worst {worst_mat:.1e}")
    check(6, "forward_step linear, to 1e-12", worst_lin <= 1e-12, f"worst {worst_lin:.1e}")

    x = Grid1D(31).x
    identical = True
    for alpha in (0.0182378, 0.3, 3.6476):
        u0 = np.sin(x) - 0.4 * np.sin(3 * x)
        u0[0] = u0[-1] = 0.0
        identical &= np.array_equal(rollout(u0, euler_params(alpha), 200, check_finite=False),
                                    euler_rollout(u0, alpha, 200))
    check(6, "Euler-embedding params (k=1) bit-identical to euler_rollout", identical, "3 alphas, 200 steps")
    verdict(6)


# ------------------------------------------------------------------ 7


@pytest.mark.slow
def test_cli_reproducibility(tmp_path):
    def run_all(root):
        root.mkdir()
        codes = [
            cli_main(["generate", "--set", "data.num_samples=40", "--out", str(root / "d.fdds")]),
            cli_main(["train", "--dataset", str(root / "d.fdds"), "--out", str(root / "trcg")]),
            cli_main(["train", "--dataset", str(root / "d.fdds"), "--set", 'optimizer="adam"',
                      "--set", "adam.epochs=3", "--out", str(root / "adam")]),
            cli_main(["evaluate", "--params", str(root / "trcg" / "params.json"),
                      "--compare", str(root / "adam" / "params.json"),
                      "--dataset", str(root / "d.fdds"), "--out", str(root / "eval")]),
            cli_main(["table1", "--out", str(root / "table1.csv")]),
        ]
        return codes, sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())

    codes_a, files_a = run_all(tmp_path / "a")
    codes_b, files_b = run_all(tmp_path / "b")
    check(7, "all commands exit 0", codes_a == codes_b == [0] * 5, f"{codes_a} / {codes_b}")
    same = files_a == files_b and all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files_a
    )
    check(7, "rerun outputs byte-identical", same, f"{len(files_a)} files compared")
    verdict(7)


def format_results():
    lines = []
    for crit, name, ok, detail in RESULTS:
        lines.append(f"[{'PASS' if ok else 'FAIL'}] criterion {crit}: {name} ({detail})")
    return lines


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
