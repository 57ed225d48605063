import json
import math
import os

import numpy as np
import pytest

from aammsu import cli
from aammsu.harness import (
    ConfigError,
    ExperimentConfig,
    config_from_values,
    config_values,
    emit_rate_curve,
    load_config,
    make_eta_for,
    run_experiment,
    save_config,
    sweep,
)
from aammsu.oracles import make_oracle
from aammsu.schedules import Constant, Decreasing, FiniteHorizon, eta_at


MINIMAL = """
# minimal quadratic experiment
optimizer = sagm
oracle = quadratic
dim = 6
sigma = 0.1
n_iters = 80
n_runs = 2
base_seed = 3
eta = constant
eta_value = 1e-3
"""


def write_cfg(tmp_path, text=MINIMAL, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text.strip() + "\n")
    return str(path)


class TestConfigFile:
    def test_minimal_loads(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        assert cfg.optimizer == "sagm"
        assert cfg.oracle.kind == "quadratic"
        assert cfg.coefficients.eta == Constant(1e-3)

    def test_paper_defaults_load_cleanly(self, tmp_path):
        text = MINIMAL + "\nM = 0.75\nmu = 0.5\nnu = 0.5\ngamma_tilde = 0.75\nbeta2 = 0.999\nepsilon = 1e-8\n"
        cfg = load_config(write_cfg(tmp_path, text))
        c = cfg.coefficients
        assert (c.M, c.mu, c.nu, c.gamma_tilde, c.beta2, c.epsilon) == (0.75, 0.5, 0.5, 0.75, 0.999, 1e-8)

    def test_constraint_violation_names_condition(self, tmp_path):
        text = MINIMAL + "\nmu = 0.5\ngamma_tilde = 0.3\n"
        with pytest.raises(ConfigError, match="gamma_tilde >= mu"):
            load_config(write_cfg(tmp_path, text))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(write_cfg(tmp_path, MINIMAL + "\nmystery = 3\n"))

    def test_round_trip_is_byte_identical(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        p1, p2 = str(tmp_path / "a.cfg"), str(tmp_path / "b.cfg")
        save_config(cfg, p1)
        again = load_config(p1)
        save_config(again, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()
        assert again == cfg

    def test_value_round_trip_dict(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        assert config_from_values(config_values(cfg)) == cfg

    def test_finite_horizon_defaults_to_n_iters(self):
        cfg = config_from_values({"eta": "finite_horizon", "eta_c": 2.0, "n_iters": 400})
        assert cfg.coefficients.eta == FiniteHorizon(2.0, 400)

    def test_milestones_must_increase(self):
        with pytest.raises(ConfigError, match="strictly increasing"):
            config_from_values({"lr_milestones": (50, 40)})


class TestLrDecay:
    def test_decay_applies_exactly_at_milestones(self):
        cfg = config_from_values(
            {"eta": "constant", "eta_value": 1.0, "lr_milestones": (5, 9), "lr_factor": 0.1, "n_iters": 12}
        )
        eta_for = make_eta_for(cfg)
        values = [eta_for(n) for n in range(1, 13)]
        assert values[:4] == [1.0] * 4
        assert values[4] == pytest.approx(0.1)  # decayed at n = 5, not after
        assert values[5:8] == [values[4]] * 3
        assert values[8] == pytest.approx(0.01)
        # bit-exact sequential products
        assert values[4] == 1.0 * 0.1
        assert values[8] == (1.0 * 0.1) * 0.1

    def test_no_milestones_is_identity(self):
        cfg = config_from_values({"eta": "decreasing", "eta_c": 2.0, "n_iters": 9})
        eta_for = make_eta_for(cfg)
        for n in (1, 4, 9):
            assert eta_for(n) == eta_at(cfg.coefficients, n)


class TestRunExperiment:
    def test_deterministic_traces(self, tmp_path):
        from dataclasses import replace

        base = load_config(write_cfg(tmp_path))
        out1 = replace(base, out_dir=str(tmp_path / "run1"))
        out2 = replace(base, out_dir=str(tmp_path / "run2"))
        rep1 = run_experiment(out1)
        rep2 = run_experiment(out2)
        for p1, p2 in zip(rep1.trace_paths, rep2.trace_paths):
            assert open(p1, "rb").read() == open(p2, "rb").read()
        a1 = json.load(open(os.path.join(out1.out_dir, "aggregate.json")))
        a2 = json.load(open(os.path.join(out2.out_dir, "aggregate.json")))
        assert a1 == a2
        assert a1["schema_version"] == 1

    def test_noise_gives_positive_std(self, tmp_path):
        text = MINIMAL.replace("n_runs = 2", "n_runs = 5")
        cfg = load_config(write_cfg(tmp_path, text))
        rep = run_experiment(cfg, write=False)
        assert rep.aggregate["min_grad_sq"]["std"] > 0.0

    def test_aggregate_matches_two_pass_reference(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, MINIMAL.replace("n_runs = 2", "n_runs = 4")))
        rep = run_experiment(cfg, write=False)
        values = [s["min_grad_sq"] for s in rep.summaries]
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)  # population formula
        assert rep.aggregate["min_grad_sq"]["mean"] == pytest.approx(mean, rel=1e-12)
        assert rep.aggregate["min_grad_sq"]["std"] == pytest.approx(math.sqrt(var), rel=1e-12)

    def test_logistic_reports_accuracies(self, tmp_path):
        text = """
optimizer = sutskever
oracle = logistic
dim = 4
n_samples = 120
class_sep = 4.0
batch_size = 16
n_iters = 200
n_runs = 2
base_seed = 9
eta = constant
eta_value = 0.05
"""
        cfg = load_config(write_cfg(tmp_path, text))
        rep = run_experiment(cfg, write=False)
        for key in ("train_acc", "val_acc", "test_acc"):
            assert key in rep.aggregate
            assert 0.5 <= rep.aggregate[key]["mean"] <= 1.0

    def test_trace_csv_schema(self, tmp_path):
        from dataclasses import replace

        cfg = load_config(write_cfg(tmp_path))
        cfg = replace(cfg, out_dir=str(tmp_path / "o"))
        rep = run_experiment(cfg)
        header = open(rep.trace_paths[0]).readline().strip()
        assert header == "n,loss,grad_norm_sq,min_grad_sq,eta,alpha_mean,alpha_max"
        rows = open(rep.trace_paths[0]).read().strip().splitlines()
        assert len(rows) == cfg.n_iters + 1


class TestSweep:
    def test_single_point_reduces_to_run(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        rep = sweep(cfg, {"M": [0.75]}, write=False)
        direct = run_experiment(cfg, write=False)
        assert rep.rows[0]["min_grad_sq_mean"] == pytest.approx(direct.aggregate["min_grad_sq"]["mean"])

    def test_grid_size_and_rows(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, MINIMAL.replace("n_iters = 80", "n_iters = 30")))
        rep = sweep(cfg, {"M": [0.25, 0.75, 1.25], "gamma_tilde": [0.75, 0.95]}, write=False)
        assert len(rep.rows) == 6

    def test_cap_enforced(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        with pytest.raises(ConfigError, match="cap"):
            sweep(cfg, {"M": list(np.linspace(0.1, 2.0, 30))}, cap=10, write=False)

    def test_best_point_on_constructed_fixture(self, tmp_path):
        # one eta value is far better on a quadratic; the sweep must find it
        text = MINIMAL.replace("n_iters = 80", "n_iters = 200").replace("sigma = 0.1", "sigma = 0.0")
        cfg = load_config(write_cfg(tmp_path, text))
        rep = sweep(cfg, {"eta_value": [1e-6, 0.05]}, write=False)
        assert rep.rows[rep.best_index]["eta_value"] == 0.05

    def test_unknown_key_rejected(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        with pytest.raises(ConfigError):
            sweep(cfg, {"sigma": [0.1]}, write=False)


class TestRateCurve:
    def test_three_points_and_bound_column(self, tmp_path):
        text = """
optimizer = sagm
oracle = quadratic
dim = 6
sigma = 0.05
epsilon = 1.0
n_iters = 100
n_runs = 2
base_seed = 5
init_scale = 1.0
eta = finite_horizon
eta_c = 3.0
"""
        cfg = load_config(write_cfg(tmp_path, text))
        rep = emit_rate_curve(cfg, [30, 300, 3000], write=False)
        assert len(rep.n_values) == 3
        assert all(r is not None for r in rep.rhs_bound)
        for mean, rhs in zip(rep.mean_min_grad_sq, rep.rhs_bound):
            assert mean <= rhs

    def test_sigma_zero_bound_is_mbar_over_sum_m(self, tmp_path):
        text = """
optimizer = sagm
oracle = quadratic
dim = 4
sigma = 0.0
epsilon = 1.0
n_iters = 50
n_runs = 1
base_seed = 2
eta = finite_horizon
eta_c = 1.0
"""
        cfg = load_config(write_cfg(tmp_path, text))
        rep = emit_rate_curve(cfg, [50, 500, 5000], write=False)
        # with sigma = 0 the bound column is M_bar / sum m_n exactly: recompute one point
        from dataclasses import replace

        from aammsu.diagnostics import bound_rhs, make_audit_config

        point = replace(cfg, n_iters=50, coefficients=replace(cfg.coefficients, eta=FiniteHorizon(1.0, 50)))
        runs = run_experiment(point, write=False)
        oracle = make_oracle(point.oracle)
        audit = make_audit_config(runs.results, oracle, point.coefficients)
        rhs, sum_m, _ = bound_rhs(runs.results, point.coefficients, audit)
        assert rep.rhs_bound[0] == pytest.approx(rhs, rel=1e-12)
        assert rhs == pytest.approx(audit.M_bar / sum_m, rel=1e-12)

    def test_requires_three_values(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        with pytest.raises(ConfigError):
            emit_rate_curve(cfg, [10, 100], eta_c=1.0, write=False)


class TestCli:
    def test_run_and_exit_code(self, tmp_path, capsys):
        path = write_cfg(tmp_path)
        code = cli.main(["run", "--config", path, "--out", str(tmp_path / "cli_out")])
        assert code == 0
        assert (tmp_path / "cli_out" / "aggregate.json").exists()

    def test_verify_equivalence_passes(self, tmp_path, capsys):
        path = write_cfg(tmp_path)
        code = cli.main(["verify-equivalence", "--config", path, "--iters", "100", "--extra-configs", "2"])
        out = capsys.readouterr().out
        assert code == 0 and "PASS" in out

    def test_verify_equivalence_fails_on_absurd_tolerance(self, tmp_path, capsys):
        path = write_cfg(tmp_path)
        code = cli.main(["verify-equivalence", "--config", path, "--iters", "50", "--tol", "1e-30"])
        assert code == 1

    def test_audit_quadratic(self, tmp_path, capsys):
        text = MINIMAL + "\nepsilon = 1.0\neta = finite_horizon\neta_c = 2.0\n"
        path = write_cfg(tmp_path, text)
        code = cli.main(["audit", "--config", path])
        out = capsys.readouterr().out
        assert code == 0 and "PASS" in out

    def test_audit_unavailable_for_rosenbrock(self, tmp_path, capsys):
        text = MINIMAL.replace("oracle = quadratic", "oracle = rosenbrock")
        path = write_cfg(tmp_path, text)
        code = cli.main(["audit", "--config", path])
        assert code == 2

    def test_config_error_exit_code(self, tmp_path, capsys):
        path = write_cfg(tmp_path, MINIMAL + "\ngamma_tilde = 0.2\n")
        code = cli.main(["run", "--config", path])
        assert code == 2

    def test_sweep_cli(self, tmp_path, capsys):
        path = write_cfg(tmp_path, MINIMAL.replace("n_iters = 80", "n_iters = 20"))
        code = cli.main(["sweep", "--config", path, "--grid", "M=0.5,1.0", "--out", str(tmp_path / "sw")])
        assert code == 0
        assert (tmp_path / "sw" / "sweep.csv").exists()

    def test_rate_curve_cli(self, tmp_path, capsys):
        text = MINIMAL + "\nepsilon = 1.0\neta = finite_horizon\neta_c = 2.0\n"
        path = write_cfg(tmp_path, text)
        code = cli.main(
            ["rate-curve", "--config", path, "--n-list", "20,200,2000", "--out", str(tmp_path / "rc")]
        )
        assert code == 0
        assert (tmp_path / "rc" / "rate_curve.csv").exists()

    def test_optimizer_override(self, tmp_path):
        path = write_cfg(tmp_path)
        code = cli.main(["run", "--config", path, "--optimizer", "amsgrad", "--out", str(tmp_path / "ao")])
        assert code == 0
        data = json.load(open(tmp_path / "ao" / "aggregate.json"))
        assert data["optimizer"] == "amsgrad"
