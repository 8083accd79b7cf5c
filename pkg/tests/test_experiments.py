import csv
import json
import math
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from sgdnet import bounds
from sgdnet.cli import main
from sgdnet.data import write_idx
from sgdnet.experiments import (ExperimentConfig, ExperimentError, load_config, monte_carlo_relu,
                                reproduce_run, run_experiment, run_jobs)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


TINY = ["--runs", "2"]


def test_cli_train_smoke(tmp_path, capsys):
    cfg = tmp_path / "tiny.ini"
    cfg.write_text("[data]\nd = 4\nn = 40\nn_test = 20\nnorm_wstar = 3\n"
                   "[trainer]\nk = 2 3\neta = 0.5\nmax_epochs = 100\n")
    out = tmp_path / "out"
    assert main(["train", "--config", str(cfg), "--out", str(out), "--runs", "2", "--seed", "5"]) == 0
    rows = _read_csv(out / "runs.csv")
    assert len(rows) == 4
    assert [r["seed"] for r in rows] == ["5", "6", "7", "8"]
    assert all(r["status"] == "global_min" for r in rows)
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["per_k"]) == {"2", "3"}
    for name in ("train_loss.svg", "test_error.svg", "k2_train_loss.svg", "k3_test_error.svg"):
        ET.parse(out / name)
    printed = capsys.readouterr().out.split()
    assert str(out / "runs.csv") in printed


def test_reproduce_run_matches_csv(tmp_path):
    cfg = load_config(None, task="train", d=4, n=40, n_test=10, norm_wstar=3.0, k=[2, 4], runs=3,
                      eta=0.5, max_epochs=50, output_dir=str(tmp_path), base_seed=11)
    run_experiment(cfg)
    rows = _read_csv(tmp_path / "runs.csv")
    for run_id in (0, 4):
        rec = reproduce_run(cfg, run_id)
        row = rows[run_id]
        assert int(row["nonzero_updates"]) == rec.nonzero_updates
        assert float(row["final_train_loss"]) == rec.final.hinge_loss
        assert int(row["epochs"]) == rec.epochs


def test_cli_runs_are_reproducible(tmp_path):
    args = ["train", "--runs", "2"]
    ini = tmp_path / "c.ini"
    ini.write_text("[data]\nd = 3\nn = 30\nn_test = 10\n[trainer]\nk = 2\neta = 1.0\n")
    assert main(args + ["--config", str(ini), "--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--config", str(ini), "--out", str(tmp_path / "b")]) == 0
    for name in ("runs.csv", "train_loss.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bounds_task_values(tmp_path):
    cfg = load_config(None, task="bounds", norm_wstar=1.0, alpha=0.5, eta=1.0, k=[2],
                      output_dir=str(tmp_path))
    run_experiment(cfg)
    b = json.loads((tmp_path / "summary.json").read_text())["bounds"]
    assert b["Mk"]["value"] == pytest.approx(22.928203230275509, rel=1e-12)
    assert b["Mk"]["value"] == bounds.theorem1_Mk(1.0, 0.5, 1.0, 2, 0.5, 0.5)
    assert b["ReluKSucceed"]["value"] == bounds.relu_thresholds(cfg.d, cfg.delta)[1]


def test_lower_bound_task(tmp_path):
    cfg = load_config(None, task="lower-bound-demo", d_list=[4, 9], eta_list=[0.5, 2.0],
                      output_dir=str(tmp_path))
    run_experiment(cfg)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["all_hold"] and len(summary["cases"]) == 2 * 2 * 2
    assert len(_read_csv(tmp_path / "runs.csv")) == 8


def test_localmin_task(tmp_path):
    cfg = load_config(None, task="relu-localmin-demo", runs=3, perturbations=100,
                      max_epochs=5, output_dir=str(tmp_path))
    run_experiment(cfg)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["all_hold"]
    # SGD started at the bad point never leaves it
    assert all(c["train_status"] == "nonglobal_stall" for c in summary["cases"])


def test_montecarlo_task(tmp_path):
    cfg = load_config(None, task="relu-montecarlo", d=8, k=[1, 6], trials=40,
                      output_dir=str(tmp_path))
    run_experiment(cfg)
    per_k = json.loads((tmp_path / "summary.json").read_text())["per_k"]
    assert per_k["1"]["frac_nonglobal"] > 0.9
    assert per_k["6"]["max_iters_when_global"] <= per_k["6"]["iteration_bound"]
    assert len(_read_csv(tmp_path / "runs.csv")) == 80


def test_monte_carlo_is_deterministic():
    a = monte_carlo_relu(6, 2, 1.0, 0.5, 30, base_seed=3)
    b = monte_carlo_relu(6, 2, 1.0, 0.5, 30, base_seed=3)
    assert (a.frac_global, a.max_iters_when_global) == (b.frac_global, b.max_iters_when_global)


def test_mnist_plan_has_120_runs():
    cfg = load_config(None, task="mnist-fig1")
    assert cfg.k == [10, 100, 1000] and cfg.runs == 40
    jobs = run_jobs(cfg)
    assert len(jobs) == 120 and len({j[0] for j in jobs}) == 120


def test_mnist_missing_files(tmp_path, capsys):
    code = main(["mnist-fig1", "--out", str(tmp_path)])
    assert code != 0
    assert "MNIST file not found" in capsys.readouterr().err


def test_mnist_on_synthetic_idx(tmp_path):
    rng = np.random.default_rng(0)
    labels = np.array([3, 5] * 60, dtype=np.uint8)
    images = rng.integers(0, 40, size=(120, 6, 6), dtype=np.uint8)
    images[labels == 3, 0, :] = 255  # make the two digits linearly separable
    ip, lp = tmp_path / "i.idx", tmp_path / "l.idx"
    write_idx(images, labels, ip, lp)
    ini = tmp_path / "m.ini"
    ini.write_text(f"[data]\nimages = {ip}\nlabels = {lp}\nn_train = 80\nn_test = 40\n"
                   "[trainer]\nk = 2 4\neta = 0.5\nmax_epochs = 30\n")
    out = tmp_path / "out"
    assert main(["mnist-fig1", "--config", str(ini), "--out", str(out), "--runs", "2"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["train_size"] == 80 and "defaults_note" in summary
    assert len(_read_csv(out / "runs.csv")) == 4


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_output(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    with pytest.raises(ExperimentError):
        run_experiment(load_config(None, task="bounds", output_dir=str(ro / "x")))


def test_output_path_is_a_file(tmp_path, capsys):
    f = tmp_path / "file"
    f.write_text("")
    assert main(["bounds", "--out", str(f / "sub")]) == 2
    assert "error" in capsys.readouterr().err


def test_config_parsing(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[experiment]\ntask = train\nruns = 3\n[data]\nd = 7\n"
                   "[trainer]\nk = 1, 2,3\neta = 0.25\n[bounds]\ndelta = 0.01\n")
    cfg = load_config(ini)
    assert (cfg.task, cfg.runs, cfg.d, cfg.k, cfg.eta, cfg.delta) == ("train", 3, 7, [1, 2, 3], 0.25, 0.01)
    assert load_config(ini, runs=9).runs == 9


def test_config_errors(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[trainer]\nlearning_rate = 0.1\n")
    with pytest.raises(ExperimentError, match="unknown config key"):
        load_config(ini, task="train")
    ini.write_text("[trainer]\neta = fast\n")
    with pytest.raises(ExperimentError, match="bad value"):
        load_config(ini, task="train")
    with pytest.raises(ExperimentError):
        load_config(None, task="nope")
    with pytest.raises(ExperimentError):
        load_config(tmp_path / "missing.ini", task="train")
    with pytest.raises(ExperimentError):
        ExperimentConfig(task="train", activation="tanh").activation_kind()


def test_cli_rejects_unknown_task(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code != 0
