"""Command-line driver: ``fdnet generate|train|evaluate|table1``.

Exit codes: 0 success, 2 configuration/validation error, 3 I/O error,
4 numerical divergence during training.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

from .config import RunConfig, load_config, with_overrides
from .errors import ConfigError, DatasetFormatError
from .evalsuite import (
    evaluate_euler,
    evaluate_model,
    euler_rollout,
    fast_test_rmse,
    snapshot_indices,
    stability_alpha,
    write_snapshots_csv,
    write_table1_csv,
)
from .heat_data import generate_dataset, load_dataset, save_dataset
from .model import init_params, load_params, rollout, save_params
from .optim import MiniBatchSampler, TrainingDivergedError, adam_train, trcg_train

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _config(args) -> RunConfig:
    try:
        return load_config(args.config, args.set or ())
    except ConfigError as exc:
        raise CLIError(str(exc), EXIT_CONFIG) from exc


def _load_dataset(path):
    try:
        return load_dataset(path)
    except (OSError, DatasetFormatError) as exc:
        raise CLIError(f"cannot load dataset {path}: {exc}", EXIT_IO) from exc


def _build_dataset(cfg: RunConfig):
    d = cfg.data
    return generate_dataset(
        d.num_samples, cfg.physics.build(), d.num_modes, d.coeff_seed, d.split_ratio, d.split_seed
    )


def _describe(dataset, out=None):
    out = out or sys.stdout
    ph = dataset.physics
    st = stability_alpha(ph.beta, ph.dt, ph.grid.dx)
    s, t, m = dataset.samples.shape
    print(f"shape: {s} samples x {t} snapshots x {m} points ({dataset.samples.size} values)", file=out)
    print(f"alpha = {st.alpha:.6g} ({'stable' if st.stable else 'unstable'} for explicit Euler)", file=out)


def _params_metadata(cfg, dataset, method):
    ph = dataset.physics
    return {
        "method": method,
        "num_points": ph.grid.num_points,
        "length": ph.grid.length,
        "dt": ph.dt,
        "beta": ph.beta,
        "config_fingerprint": cfg.fingerprint(),
    }


def train_model(cfg: RunConfig, dataset, evaluate=True):
    """Train per ``cfg``; returns ``(params, trace)`` or raises TrainingDivergedError."""
    p0 = init_params(cfg.model.init_seed, cfg.model.k, cfg.model.init_scale)
    sampler = MiniBatchSampler.from_dataset(dataset, cfg.sampler.batch_size, cfg.sampler.seed)
    score = fast_test_rmse(dataset) if evaluate else None
    if cfg.optimizer == "adam":
        return adam_train(p0, sampler, cfg.adam, cfg.loss, score)
    return trcg_train(p0, sampler, cfg.trcg, cfg.loss, score)


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    cfg = _config(args)
    dataset = _build_dataset(cfg)
    try:
        save_dataset(dataset, args.out)
    except OSError as exc:
        raise CLIError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    _describe(dataset)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    dataset = _load_dataset(args.dataset)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(f"cannot create {out}: {exc}", EXIT_IO) from exc
    method = f"fdnet-{cfg.optimizer}"
    meta = _params_metadata(cfg, dataset, method)
    code = EXIT_OK
    try:
        params, trace = train_model(cfg, dataset, cfg.eval.trace_rmse)
    except TrainingDivergedError as exc:
        print(f"error: {exc}; writing best-so-far parameters", file=sys.stderr)
        params, trace, code = exc.params, exc.trace, EXIT_DIVERGED
    try:
        save_params(params, out / "params.json", meta)
        trace.write_csv(out / "trace.csv")
    except OSError as exc:
        raise CLIError(f"cannot write outputs to {out}: {exc}", EXIT_IO) from exc
    if trace.records:
        last = trace.records[-1]
        print(f"final mini-batch loss: {last.loss:.6e}")
        print(f"budget consumed: {last.epoch:.4f} epochs ({last.iter} iterations)")
        if math.isfinite(last.test_rmse):
            print(f"final test rollout RMSE: {last.test_rmse:.6e}")
    elif code == EXIT_OK:
        print("no iteration completed (zero initial gradient or budget below one iteration); parameters unchanged")
    else:
        print("diverged before the first completed iteration; initial parameters kept")
    print(f"wrote {out / 'params.json'} and {out / 'trace.csv'}")
    return code


def _read_params(path, dataset):
    try:
        params, meta = load_params(path)
    except OSError as exc:
        raise CLIError(f"cannot read params {path}: {exc}", EXIT_IO) from exc
    except ConfigError as exc:
        raise CLIError(f"invalid params file {path}: {exc}", EXIT_CONFIG) from exc
    n = meta.get("num_points")
    if n is not None and n != dataset.physics.grid.num_points:
        raise CLIError(
            f"grid mismatch: {path} was trained on {n} points, dataset has "
            f"{dataset.physics.grid.num_points}",
            EXIT_CONFIG,
        )
    return params, meta


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    dataset = _load_dataset(args.dataset)
    params, meta = _read_params(args.params, dataset)
    label = meta.get("method", "fdnet")
    runs = [(params, label)]
    if args.compare:
        other, other_meta = _read_params(args.compare, dataset)
        runs.append((other, other_meta.get("method", "fdnet")))

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(f"cannot create {out}: {exc}", EXIT_IO) from exc

    fp = cfg.fingerprint()
    reports = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for p, lab in runs:
            reports.append(evaluate_model(p, dataset, lab, fingerprint=fp))
        euler = evaluate_euler(dataset, fingerprint=fp)

    ph = dataset.physics
    sample = dataset.test_indices[cfg.eval.snapshot_sample % len(dataset.test_indices)]
    truth = dataset.samples[sample]
    columns = {"trcg": None, "adam": None}
    for p, lab in runs:
        key = "adam" if "adam" in lab else "trcg"
        if columns[key] is None:
            columns[key] = rollout(truth[0], p, ph.num_steps, check_finite=False)
    alpha = stability_alpha(ph.beta, ph.dt, ph.grid.dx).alpha
    idx = snapshot_indices(cfg.eval.snapshot_times, ph.dt, ph.num_steps)
    try:
        reports[0].save(out / "report.json")
        if len(reports) > 1:
            reports[1].save(out / "compare_report.json")
        euler.save(out / "euler_report.json")
        write_snapshots_csv(
            out / "snapshots.csv", ph.grid.x, ph.dt, idx, truth,
            columns["trcg"], columns["adam"], euler_rollout(truth[0], alpha, ph.num_steps),
        )
    except OSError as exc:
        raise CLIError(f"cannot write outputs to {out}: {exc}", EXIT_IO) from exc
    for rep in reports + [euler]:
        flag = " (diverged)" if rep.diverged else ""
        print(f"{rep.method}: test rollout RMSE {rep.rmse:.6e}{flag}")
    return EXIT_OK


def table1_config(cfg: RunConfig) -> RunConfig:
    t = cfg.table1
    return with_overrides(cfg, {
        "physics.dt": t.dt, "physics.num_steps": t.num_steps,
        "trcg.epoch_budget": t.epoch_budget, "optimizer": "trcg",
    })


def table1_jobs(cfg: RunConfig):
    jobs = [("generate", None, None)]
    jobs += [("trcg", b, k) for b in cfg.table1.batch_sizes for k in cfg.table1.ks]
    jobs += [("euler", b, None) for b in cfg.table1.batch_sizes]
    return jobs


def cmd_table1(args) -> int:
    cfg = table1_config(_config(args))
    jobs = table1_jobs(cfg)
    ph = cfg.physics
    if args.dry_run:
        print(f"planned {len(jobs)} jobs (dt={ph.dt}, num_steps={ph.num_steps}, "
              f"epoch budget {cfg.trcg.epoch_budget}):")
        for kind, b, k in jobs:
            if kind == "generate":
                print("  generate dataset")
            elif kind == "trcg":
                print(f"  train+evaluate TRCG batch_size={b} k={k}")
            else:
                print(f"  euler baseline row batch_size={b}")
        return EXIT_OK

    dataset = _build_dataset(cfg)
    _describe(dataset)
    cells = {}
    diverged = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        euler = evaluate_euler(dataset).rmse
        for kind, b, k in jobs:
            if kind != "trcg":
                continue
            cell = with_overrides(cfg, {"sampler.batch_size": b, "model.k": k})
            try:
                params, _ = train_model(cell, dataset, evaluate=False)
                rep = evaluate_model(params, dataset, "fdnet-trcg", b)
                cells[(b, k)] = None if rep.diverged else rep.rmse
            except TrainingDivergedError:
                cells[(b, k)] = None
            if cells[(b, k)] is None:
                diverged.append((b, k))
            shown = "DIVERGED" if cells[(b, k)] is None else f"{cells[(b, k)]:.4g}"
            print(f"batch_size={b} k={k}: {shown}", flush=True)
    print(f"euler: {euler:.6g}")
    try:
        write_table1_csv(args.out, cells, euler, cfg.table1.batch_sizes, cfg.table1.ks)
    except OSError as exc:
        raise CLIError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    if diverged:
        print(f"warning: {len(diverged)} cell(s) diverged: {diverged}", file=sys.stderr)
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="fdnet", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults if omitted)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set model.k=20")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="simulate and save a dataset")
    p.add_argument("--out", required=True, help="output .fdds path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="train FD-Net on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="roll out trained weights on the test split")
    p.add_argument("--params", required=True)
    p.add_argument("--compare", help="second params file, e.g. the ADAM run")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("table1", parents=[common], help="coarse-step RMSE grid over batch size and k")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--dry-run", action="store_true", help="list the planned jobs and exit")
    p.set_defaults(func=cmd_table1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
