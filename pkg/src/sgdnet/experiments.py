"""Experiment orchestration: config loading, multi-seed runs and artifact writing.

Config files are INI-style (see README). Every run ``r`` uses the stream
``seeded_rng(base_seed + r)``: initialization draws first, then one 63-bit
integer that seeds the sampling order. A row of ``runs.csv`` can therefore be
reproduced alone with :func:`reproduce_run`.
"""
from __future__ import annotations

import configparser
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds
from .constructions import (adversarial_init, adversarial_sequence, compute_dead_set, dead_set_of,
                            orthogonal_dataset, relu_bad_local_min)
from .core import ActivationKind, LabeledDataset, TrainConfig, seeded_rng
from .data import (NotSeparableError, SeparableSpec, build_mnist_task, estimate_separator,
                   generate_separable, load_idx)
from .network import full_batch_subgradient, hinge_loss
from .report import emit_csv, emit_svg_plot, run_row
from .trainer import BoundedRows, DefaultCorollary2, SymmetricBox, initialize, train

TASKS = ("train", "bounds", "lower-bound-demo", "relu-localmin-demo", "relu-montecarlo", "mnist-fig1")


class ExperimentError(RuntimeError):
    pass


class LemmaViolation(AssertionError):
    """The dead set predicted one outcome and training produced another."""


@dataclass
class ExperimentConfig:
    task: str
    runs: int = 1
    base_seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    # data
    d: int = 20
    n: int = 500
    n_test: int = 500
    norm_wstar: float = 4.0
    data_seed: int = 12345
    images: Optional[str] = None
    labels: Optional[str] = None
    digit_pos: int = 3
    digit_neg: int = 5
    n_train: int = 3000
    # trainer
    k: list = field(default_factory=lambda: [5])
    eta: float = 0.1
    alpha: float = 0.25
    activation: str = "leaky_relu"
    init: str = "corollary2"
    R: float = 1.0
    v: float = 1.0
    C: float = 1.0
    order: str = "uniform_with_replacement"
    max_epochs: int = 1000
    # bounds / demos
    delta: float = 0.05
    c_k: int = 10
    L_V: float = 0.0
    d_list: list = field(default_factory=lambda: [4, 16, 64])
    eta_list: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    trials: int = 1000
    perturbations: int = 1000

    def __post_init__(self):
        if self.task not in TASKS:
            raise ExperimentError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.runs < 1:
            raise ExperimentError("runs must be >= 1")
        if not self.k:
            raise ExperimentError("k list must be nonempty")
        self.k = [int(v) for v in self.k]

    def activation_kind(self) -> ActivationKind:
        if self.activation == "relu":
            return ActivationKind.relu()
        if self.activation == "leaky_relu":
            return ActivationKind.leaky_relu(self.alpha)
        raise ExperimentError(f"unknown activation {self.activation!r}")

    def init_scheme(self):
        if self.init == "corollary2":
            return DefaultCorollary2()
        if self.init == "bounded_rows":
            return BoundedRows(self.R, self.v)
        if self.init == "symmetric_box":
            return SymmetricBox(self.C)
        raise ExperimentError(f"unknown init scheme {self.init!r}")


MNIST_DEFAULTS = dict(k=[10, 100, 1000], runs=40, eta=0.01, alpha=0.01, n_train=3000,
                      n_test=1000, digit_pos=3, digit_neg=5, init="corollary2", max_epochs=200)
MONTECARLO_DEFAULTS = dict(d=32, k=[3, 12], C=1.0, eta=0.5, trials=5000, activation="relu")
LOWER_BOUND_DEFAULTS = dict(k=[2, 8], alpha=0.25, order="cyclic")
LOCALMIN_DEFAULTS = dict(d=10, n=40, runs=50, k=[3], norm_wstar=4.0, activation="relu")
TASK_DEFAULTS = {"mnist-fig1": MNIST_DEFAULTS, "relu-montecarlo": MONTECARLO_DEFAULTS,
                 "lower-bound-demo": LOWER_BOUND_DEFAULTS, "relu-localmin-demo": LOCALMIN_DEFAULTS}

_LIST_KEYS = {"k": int, "d_list": int, "eta_list": float}


def _coerce(name, raw: str, default):
    if name in _LIST_KEYS:
        return [_LIST_KEYS[name](p) for p in raw.replace(",", " ").split()]
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def load_config(path=None, task: Optional[str] = None, **overrides) -> ExperimentConfig:
    """Build a config from an INI file, task defaults and explicit overrides (in rising priority).

    All sections are flattened: ``[experiment]``, ``[data]``, ``[trainer]`` and
    ``[bounds]`` only group keys for readability.
    """
    values = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ExperimentError(f"cannot read config {path}: {exc}") from exc
        for section in parser.sections():
            values.update(parser[section])
    task = task or values.pop("task", None)
    values.pop("task", None)
    if task is None:
        raise ExperimentError("no task given (set task in [experiment] or use a subcommand)")
    probe = ExperimentConfig(task=task)
    merged = dict(TASK_DEFAULTS.get(task, {}))
    known = {f for f in probe.__dataclass_fields__ if f != "task"}
    for key, raw in values.items():
        if key not in known:
            raise ExperimentError(f"unknown config key {key!r}")
        try:
            merged[key] = _coerce(key, raw, getattr(probe, key))
        except ValueError as exc:
            raise ExperimentError(f"bad value for {key}: {raw!r}") from exc
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(task=task, **merged)


def _prepare_output(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExperimentError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ExperimentError(f"output directory {out} is not writable")
    return out


def _write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")
    return path


def _mean_std(values):
    a = np.asarray(values, dtype=np.float64)
    return {"mean": float(a.mean()), "std": float(a.std()), "min": float(a.min()), "max": float(a.max())}


# ----------------------------------------------------------------------------- training runs

def run_jobs(cfg: ExperimentConfig):
    pairs = [k for k in cfg.k for _ in range(cfg.runs)]
    return [(run_id, k, cfg.base_seed + run_id) for run_id, k in enumerate(pairs)]


def load_datasets(cfg: ExperimentConfig):
    if cfg.task == "mnist-fig1":
        raw = load_idx(cfg.images, cfg.labels)
        return build_mnist_task(raw, cfg.digit_pos, cfg.digit_neg, cfg.n_train, cfg.n_test,
                                seed=cfg.data_seed)
    full = generate_separable(SeparableSpec(cfg.d, cfg.n + cfg.n_test, cfg.norm_wstar, cfg.data_seed))
    train_set = LabeledDataset(full.X[: cfg.n], full.y[: cfg.n], separator=full.separator,
                               metadata=full.metadata)
    test_set = None
    if cfg.n_test:
        test_set = LabeledDataset(full.X[cfg.n:], full.y[cfg.n:], separator=full.separator)
    return train_set, test_set


def single_run(cfg: ExperimentConfig, k: int, seed: int, train_set, test_set, **kwargs):
    rng = seeded_rng(seed)
    params = initialize(cfg.init_scheme(), k, train_set.d, cfg.activation_kind(), rng)
    tc = TrainConfig(eta=cfg.eta, max_epochs=cfg.max_epochs, order=cfg.order,
                     seed=int(rng.integers(2**63)))
    return params, train(params, train_set, tc, test=test_set, **kwargs)


def reproduce_run(cfg: ExperimentConfig, run_id: int):
    """Recompute row ``run_id`` of ``runs.csv`` without running the others."""
    jobs = run_jobs(cfg)
    _, k, seed = jobs[run_id]
    train_set, test_set = load_datasets(cfg)
    return single_run(cfg, k, seed, train_set, test_set)[1]


_WORKER_STATE = {}


def _init_worker(cfg):
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["data"] = load_datasets(cfg)


def _worker(job):
    run_id, k, seed = job
    cfg = _WORKER_STATE["cfg"]
    rec = single_run(cfg, k, seed, *_WORKER_STATE["data"])[1]
    rec.params = None
    return run_id, rec


def execute_runs(cfg: ExperimentConfig, train_set, test_set):
    jobs = run_jobs(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=(cfg,)) as pool:
            results = dict(pool.map(_worker, jobs))
    else:
        results = {}
        for run_id, k, seed in jobs:
            results[run_id] = single_run(cfg, k, seed, train_set, test_set)[1]
    return [(run_id, k, seed, results[run_id]) for run_id, k, seed in jobs]


def _padded_curve(records, attr):
    length = max(len(r.epoch_stats) for r in records)
    curves = []
    for r in records:
        vals = [getattr(e, attr) for e in r.epoch_stats]
        curves.append(vals + [vals[-1]] * (length - len(vals)))
    return list(range(length)), np.mean(np.asarray(curves, dtype=np.float64), axis=0).tolist()


def _init_R_v(cfg, k):
    if cfg.init == "corollary2":
        r = 1.0 / math.sqrt(2 * k)
        return r, r
    if cfg.init == "bounded_rows":
        return cfg.R, cfg.v
    return None


def _training_summary(cfg, results, train_set, test_set, norm_wstar, out: Path):
    rows = [run_row(run_id, seed, k, cfg.eta, cfg.activation_kind().alpha, cfg.activation, rec)
            for run_id, k, seed, rec in results]
    csv_path = emit_csv(out / "runs.csv", rows)
    per_k = {}
    svgs = []
    loss_series, err_series = {}, {}
    for k in cfg.k:
        recs = [rec for _, kk, _, rec in results if kk == k]
        entry = {
            "runs": len(recs),
            "global_min_fraction": sum(r.status == "global_min" for r in recs) / len(recs),
            "nonzero_updates": _mean_std([r.nonzero_updates for r in recs]),
            "epochs": _mean_std([r.epochs for r in recs]),
            "final_train_loss": _mean_std([r.final.hinge_loss for r in recs]),
            "final_train_err": _mean_std([r.final.train_error for r in recs]),
        }
        if test_set is not None:
            entry["final_test_err"] = _mean_std([r.final.test_error for r in recs])
        rv = _init_R_v(cfg, k)
        if norm_wstar is not None and rv is not None and not cfg.activation_kind().is_relu:
            R, v = rv
            mk = bounds.report("Mk", norm_wstar=norm_wstar, alpha=cfg.alpha, eta=cfg.eta, k=k, v=v, R=R)
            entry["bounds"] = {"Mk": mk.to_dict(), "Mk_ceil": math.ceil(mk.value)}
            entry["max_updates_within_Mk"] = max(r.nonzero_updates for r in recs) <= math.ceil(mk.value)
            try:
                g = bounds.report("GeneralizationGlobalMin", norm_wstar=norm_wstar, alpha=cfg.alpha,
                                  eta=cfg.eta, k=k, v=v, R=R, n=train_set.n, delta=cfg.delta)
                entry["bounds"]["GeneralizationGlobalMin"] = g.to_dict()
            except ValueError as exc:
                entry["bounds"]["GeneralizationGlobalMin"] = {"skipped": str(exc)}
        # compression bound with the observed scheme size of the worst run
        worst = max(r.nonzero_updates for r in recs)
        if train_set.n >= 2 * worst:
            entry["compression_bound_worst_run"] = bounds.report(
                "Compression", c_k=worst, n=train_set.n, delta=cfg.delta, L_V=0.0).to_dict()
        per_k[str(k)] = entry
        xs, ys = _padded_curve(recs, "hinge_loss")
        loss_series[f"k={k}"] = (xs, ys)
        svgs.append(emit_svg_plot(out / f"k{k}_train_loss.svg", {f"k={k}": (xs, ys)},
                                  f"Training hinge loss, k={k} (mean of {len(recs)} runs)",
                                  "epoch", "train hinge loss"))
        if test_set is not None:
            xs, ys = _padded_curve(recs, "test_error")
            err_series[f"k={k}"] = (xs, ys)
            svgs.append(emit_svg_plot(out / f"k{k}_test_error.svg", {f"k={k}": (xs, ys)},
                                      f"Test 0-1 error, k={k} (mean of {len(recs)} runs)",
                                      "epoch", "test error"))
    svgs.append(emit_svg_plot(out / "train_loss.svg", loss_series, "Training hinge loss",
                              "epoch", "train hinge loss"))
    if err_series:
        svgs.append(emit_svg_plot(out / "test_error.svg", err_series, "Test 0-1 error",
                                  "epoch", "test error"))
    return csv_path, per_k, svgs


def _config_echo(cfg):
    d = asdict(cfg)
    return {k: v for k, v in d.items() if v is not None}


def run_training_task(cfg: ExperimentConfig, out: Path):
    train_set, test_set = load_datasets(cfg)
    norm_source = "generating separator"
    if train_set.separator is not None:
        norm_wstar = float(np.linalg.norm(train_set.separator))
    else:
        try:
            norm_wstar = float(np.linalg.norm(estimate_separator(train_set, cfg.max_epochs)))
            norm_source = "estimate_separator (upper-bound surrogate for the minimal norm)"
        except NotSeparableError as exc:
            norm_wstar, norm_source = None, f"unavailable: {exc}"
    results = execute_runs(cfg, train_set, test_set)
    csv_path, per_k, svgs = _training_summary(cfg, results, train_set, test_set, norm_wstar, out)
    summary = {"task": cfg.task, "config": _config_echo(cfg), "per_k": per_k,
               "train_size": train_set.n, "test_size": test_set.n if test_set is not None else 0,
               "norm_wstar": norm_wstar, "norm_wstar_source": norm_source}
    if cfg.task == "mnist-fig1":
        summary["defaults_note"] = ("learning rate and alpha are not stated for the MNIST figure; "
                                    f"eta={cfg.eta}, alpha={cfg.alpha} are this package's defaults")
    return [csv_path, _write_json(out / "summary.json", summary), *svgs]


# ----------------------------------------------------------------------------- bounds

def bounds_task(cfg: ExperimentConfig, out: Path):
    k = cfg.k[0]
    R = cfg.R if cfg.init == "bounded_rows" else 1.0 / math.sqrt(2 * k)
    v = cfg.v if cfg.init == "bounded_rows" else R
    common = dict(norm_wstar=cfg.norm_wstar, alpha=cfg.alpha, eta=cfg.eta, k=k, v=v, R=R)
    reports = {
        "Mk": bounds.report("Mk", **common),
        "LowerBound": bounds.report("LowerBound", **common),
        "Compression": bounds.report("Compression", c_k=cfg.c_k, n=cfg.n, delta=cfg.delta, L_V=cfg.L_V),
        "ReluKFail": bounds.report("ReluKFail", d=cfg.d, delta=cfg.delta),
        "ReluKSucceed": bounds.report("ReluKSucceed", d=cfg.d, delta=cfg.delta),
        "ReluIterBound": bounds.report("ReluIterBound", d=cfg.d, C=cfg.C, eta=cfg.eta),
    }
    payload = {name: r.to_dict() for name, r in reports.items()}
    try:
        payload["GeneralizationGlobalMin"] = bounds.report(
            "GeneralizationGlobalMin", n=cfg.n, delta=cfg.delta, **common).to_dict()
    except ValueError as exc:
        payload["GeneralizationGlobalMin"] = {"skipped": str(exc)}
    return [_write_json(out / "summary.json", {"task": cfg.task, "config": _config_echo(cfg),
                                                "bounds": payload})]


# ----------------------------------------------------------------------------- lower bound demo

def lower_bound_run(d: int, eta: float, k: int, alpha: float, max_epochs: int = 100_000):
    """Cyclic SGD over copies of the adversarial sequence from the adversarial start."""
    R = v = 1.0 / math.sqrt(2 * k)
    params = adversarial_init(k, d, R, v, ActivationKind.leaky_relu(alpha))
    rec = train(params, adversarial_sequence(d), TrainConfig(eta=eta, max_epochs=max_epochs, order="cyclic"))
    lb = bounds.lower_bound(math.sqrt(d), alpha, eta, k, v, R)
    return rec, lb


def lower_bound_task(cfg: ExperimentConfig, out: Path):
    rows, cases = [], []
    run_id = 0
    for d in cfg.d_list:
        for eta in cfg.eta_list:
            for k in cfg.k:
                rec, lb = lower_bound_run(d, eta, k, cfg.alpha, cfg.max_epochs)
                rows.append(run_row(run_id, None, k, eta, cfg.alpha, "leaky_relu", rec))
                B1, B2 = bounds.lower_bound_terms(math.sqrt(d), cfg.alpha, eta, k,
                                                  1 / math.sqrt(2 * k), 1 / math.sqrt(2 * k))
                cases.append({"run_id": run_id, "d": d, "eta": eta, "k": k, "alpha": cfg.alpha,
                              "nonzero_updates": rec.nonzero_updates, "status": rec.status,
                              "B1": B1, "B2": B2, "lower_bound": lb,
                              "holds": rec.status == "global_min" and rec.nonzero_updates >= lb
                              and rec.nonzero_updates >= d})
                run_id += 1
    summary = {"task": cfg.task, "config": _config_echo(cfg), "cases": cases,
               "all_hold": all(c["holds"] for c in cases), "note": bounds.LOWER_BOUND_NOTE}
    return [emit_csv(out / "runs.csv", rows), _write_json(out / "summary.json", summary)]


# ----------------------------------------------------------------------------- ReLU local minimum

def check_local_min(dataset, k: int, rng, perturbations: int = 1000):
    """Build the bad ReLU point and probe it; returns a dict of observations."""
    params, eps = relu_bad_local_min(dataset, k, rng)
    loss = hinge_loss(params, dataset)
    grad = full_batch_subgradient(params, dataset)
    changed = 0
    for _ in range(perturbations):
        D = rng.standard_normal(params.W.shape)
        D *= eps * rng.random() / np.linalg.norm(D)
        if hinge_loss(params.with_weights(params.W + D), dataset) != loss:
            changed += 1
    return {"params": params, "safe_eps": eps, "loss": loss,
            "grad_exactly_zero": bool(not grad.any()), "perturbations_changed": changed}


def localmin_task(cfg: ExperimentConfig, out: Path):
    cases, rows = [], []
    k = cfg.k[0]
    for r in range(cfg.runs):
        seed = cfg.base_seed + r
        ds = generate_separable(SeparableSpec(cfg.d, cfg.n, cfg.norm_wstar, seed))
        obs = check_local_min(ds, k, seeded_rng(seed), cfg.perturbations)
        rec = train(obs["params"], ds, TrainConfig(eta=cfg.eta, max_epochs=cfg.max_epochs, seed=seed))
        rows.append(run_row(r, seed, k, cfg.eta, 0.0, "relu", rec))
        cases.append({"run_id": r, "seed": seed, "loss": obs["loss"], "safe_eps": obs["safe_eps"],
                      "grad_exactly_zero": obs["grad_exactly_zero"],
                      "perturbations_changed": obs["perturbations_changed"],
                      "train_status": rec.status})
    ok = all(c["loss"] > 0.5 and c["grad_exactly_zero"] and c["perturbations_changed"] == 0
             for c in cases)
    summary = {"task": cfg.task, "config": _config_echo(cfg), "cases": cases, "all_hold": ok}
    return [emit_csv(out / "runs.csv", rows), _write_json(out / "summary.json", summary)]


# ----------------------------------------------------------------------------- ReLU Monte Carlo

@dataclass
class MonteCarloResult:
    frac_global: float
    frac_nonglobal: float
    max_iters_when_global: int
    trials: int
    records: list = field(repr=False, default_factory=list)


def monte_carlo_relu(d: int, k: int, C: float, eta: float, trials: int, base_seed: int = 0,
                     max_epochs: int = 10_000, keep_records: bool = False) -> MonteCarloResult:
    """Random symmetric-box starts on the orthogonal dataset, checked against the dead-set prediction.

    Raises :class:`LemmaViolation` if the dead set ever changes during a run or
    the predicted outcome differs from the trained one.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ds = orthogonal_dataset(d)
    relu = ActivationKind.relu()
    n_global = 0
    max_iters = 0
    records = []
    for trial in range(trials):
        seed = base_seed + trial
        rng = seeded_rng(seed)
        params = initialize(SymmetricBox(C), k, d, relu, rng)
        dead0 = compute_dead_set(params)

        def check(step, i, nonzero, W, dead0=dead0, trial=trial):
            if nonzero and dead_set_of(W, k) != dead0:
                raise LemmaViolation(f"trial {trial}: dead set changed at step {step}")

        rec = train(params, ds, TrainConfig(eta=eta, max_epochs=max_epochs, seed=int(rng.integers(2**63))),
                    on_step=check)
        predicted = "nonglobal_stall" if dead0 else "global_min"
        if rec.status != predicted:
            raise LemmaViolation(f"trial {trial}: predicted {predicted}, training gave {rec.status}")
        if rec.status == "global_min":
            n_global += 1
            max_iters = max(max_iters, rec.nonzero_updates)
        if keep_records:
            rec.params = None
            records.append((seed, rec))
    return MonteCarloResult(n_global / trials, 1 - n_global / trials, max_iters, trials, records)


def montecarlo_task(cfg: ExperimentConfig, out: Path):
    per_k, rows = {}, []
    run_id = 0
    for k in cfg.k:
        res = monte_carlo_relu(cfg.d, k, cfg.C, cfg.eta, cfg.trials, cfg.base_seed + run_id,
                               max_epochs=cfg.max_epochs, keep_records=True)
        for seed, rec in res.records:
            rows.append(run_row(run_id, seed, k, cfg.eta, 0.0, "relu", rec))
            run_id += 1
        k_fail, k_succeed = bounds.relu_thresholds(cfg.d, cfg.delta)
        per_k[str(k)] = {
            "trials": res.trials, "frac_global": res.frac_global, "frac_nonglobal": res.frac_nonglobal,
            "expected_nonglobal": 1 - (1 - 2.0 ** -k) ** cfg.d,
            "max_iters_when_global": res.max_iters_when_global,
            "iteration_bound": bounds.relu_iteration_bound(cfg.d, cfg.C, cfg.eta),
            "k_fail_threshold": k_fail, "k_succeed_threshold": k_succeed,
            "prediction_mismatches": 0,
        }
    summary = {"task": cfg.task, "config": _config_echo(cfg), "per_k": per_k}
    return [emit_csv(out / "runs.csv", rows), _write_json(out / "summary.json", summary)]


# ----------------------------------------------------------------------------- entry point

def run_experiment(cfg: ExperimentConfig) -> list:
    """Validate inputs, run the task, and return the paths of every artifact written."""
    if cfg.task == "mnist-fig1":
        for p in (cfg.images, cfg.labels):
            if not p or not Path(p).is_file():
                raise ExperimentError(f"MNIST file not found: {p!r} (set images= and labels=)")
    out = _prepare_output(cfg)
    if cfg.task in ("train", "mnist-fig1"):
        return run_training_task(cfg, out)
    if cfg.task == "bounds":
        return bounds_task(cfg, out)
    if cfg.task == "lower-bound-demo":
        return lower_bound_task(cfg, out)
    if cfg.task == "relu-localmin-demo":
        return localmin_task(cfg, out)
    return montecarlo_task(cfg, out)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
