import math

import numpy as np
import pytest

from mqreg import (
    BvnParams,
    DgpSpec,
    McConfig,
    conditional_joint_params,
    coverage_probability,
    dgp_sample,
    mc_cell,
    mc_table,
    oracle_graph,
    parse_experiment_config,
)
from mqreg.exceptions import EmptyGraphError, SchemaError, ValidationError
from mqreg.montecarlo import format_mc_text, write_mc_csv


class TestDgpSample:
    def test_deterministic_for_fixed_seed(self):
        spec = DgpSpec(seed=42)
        a = dgp_sample(spec, 100)
        b = dgp_sample(spec, 100)
        assert np.array_equal(a.Y, b.Y) and np.array_equal(a.X, b.X)

    def test_degenerate_spec_is_pure_noise(self):
        spec = DgpSpec(beta10=0, beta11=0, beta20=0, beta21=0, gamma21=0)
        data = dgp_sample(spec, 40000, np.random.default_rng(1))
        se = 1.0 / math.sqrt(40000)
        assert abs(data.Y[:, 0].mean()) < 4 * se
        assert abs(data.Y[:, 1].mean()) < 4 * se
        # gamma = 0 breaks the structural link
        assert abs(np.corrcoef(data.Y.T)[0, 1]) < 4 * se

    def test_regression_recovers_coefficients(self):
        data = dgp_sample(DgpSpec(), 200000, np.random.default_rng(2))
        coef, *_ = np.linalg.lstsq(data.X, data.Y[:, 0], rcond=None)
        assert coef == pytest.approx([1.0, 1.0], abs=0.02)

    def test_rejects_tiny_samples(self):
        with pytest.raises(ValidationError):
            dgp_sample(DgpSpec(), 5)

    def test_rejects_negative_alpha(self):
        with pytest.raises(ValidationError):
            DgpSpec(alpha1=-0.5)


class TestConditionalJointParams:
    def test_location_shift_at_one(self):
        p = conditional_joint_params(DgpSpec(), 1.0)
        assert (p.mu1, p.mu2) == (2.0, 4.0)
        assert p.s1 == 1.0
        assert p.s2 == pytest.approx(math.sqrt(2.0))
        assert p.rho == pytest.approx(1.0 / math.sqrt(2.0))

    def test_location_scale_at_one(self):
        p = conditional_joint_params(DgpSpec(alpha1=1, alpha2=1), 1.0)
        assert (p.mu1, p.mu2) == (2.0, 4.0)
        assert p.s1 == 2.0
        assert p.s2 == pytest.approx(math.sqrt(8.0))
        assert p.rho == pytest.approx(1.0 / math.sqrt(2.0))

    def test_no_structural_link_means_independence(self):
        p = conditional_joint_params(DgpSpec(gamma21=0.0), 0.3)
        assert p.rho == 0.0

    @pytest.mark.parametrize("alpha", [0.0, 1.0])
    def test_against_simulated_moments(self, alpha):
        # independent oracle: simulate the two structural equations at x=1
        spec = DgpSpec(alpha1=alpha, alpha2=alpha)
        rng = np.random.default_rng(7)
        n = 400000
        x = 1.0
        e1 = rng.standard_normal(n)
        e2 = rng.standard_normal(n)
        y1 = spec.beta10 + spec.beta11 * x + (1 + spec.alpha1 * abs(x)) * e1
        y2 = (
            spec.beta20 + spec.beta21 * x + spec.gamma21 * y1
            + (1 + spec.alpha2 * abs(x)) * e2
        )
        p = conditional_joint_params(spec, x)
        se = 3.0 / math.sqrt(n)
        assert y1.mean() == pytest.approx(p.mu1, abs=4 * p.s1 * se)
        assert y2.mean() == pytest.approx(p.mu2, abs=4 * p.s2 * se)
        assert y1.std() == pytest.approx(p.s1, rel=0.01)
        assert y2.std() == pytest.approx(p.s2, rel=0.01)
        assert np.corrcoef(y1, y2)[0, 1] == pytest.approx(p.rho, abs=0.01)


class TestCoverageProbability:
    def test_single_central_point_independent(self):
        params = BvnParams(1.0, -1.0, 2.0, 0.5, 0.0)
        assert coverage_probability([(1.0, -1.0)], params) == pytest.approx(0.25)

    def test_oracle_graph_scores_its_target(self):
        params = BvnParams(2.0, 4.0, 1.0, math.sqrt(2), 1 / math.sqrt(2))
        for tau in (0.1, 0.25, 0.5, 0.75):
            graph = oracle_graph(params, tau, 0.01)
            assert coverage_probability(graph, params) == pytest.approx(tau, abs=1e-8)

    def test_empty_graph_rejected(self):
        with pytest.raises(EmptyGraphError):
            coverage_probability([], BvnParams(0, 0, 1, 1, 0.0))


@pytest.fixture(scope="module")
def small_cell():
    return mc_cell(DgpSpec(), 200, 0.25, (0, 1), 0.05, 20, seed=5)


class TestMcCell:
    def test_mse_identity(self, small_cell):
        r = small_cell
        assert r.mse == pytest.approx(r.variance + r.bias**2, abs=1e-12)

    def test_deterministic_rerun(self, small_cell):
        again = mc_cell(DgpSpec(), 200, 0.25, (0, 1), 0.05, 20, seed=5)
        assert np.array_equal(again.phat, small_cell.phat)

    def test_thread_count_invariance(self, small_cell):
        threaded = mc_cell(DgpSpec(), 200, 0.25, (0, 1), 0.05, 20, seed=5, threads=2)
        assert np.array_equal(threaded.phat, small_cell.phat)

    def test_phat_near_target(self, small_cell):
        assert small_cell.bias == pytest.approx(0.0, abs=0.08)
        assert small_cell.failed == 0

    def test_rejects_single_rep(self):
        with pytest.raises(ValidationError):
            mc_cell(DgpSpec(), 100, 0.25, (0, 1), 0.05, 1, seed=0)


class TestMcTable:
    def test_single_cell_grid_matches_mc_cell(self):
        config = McConfig(
            n_values=(150,), taus=(0.3,), orders=((0, 1),), reps=10, step=0.05, seed=9
        )
        results = mc_table(config)
        assert len(results) == 1
        base = np.random.SeedSequence(9)
        direct = mc_cell(
            DgpSpec(), 150, 0.3, (0, 1), 0.05, 10, seed=base.spawn(1)[0]
        )
        assert np.array_equal(results[0].phat, direct.phat)

    def test_rerun_identical(self):
        config = McConfig(
            n_values=(120,), taus=(0.25,), orders=((0, 1), (1, 0)),
            reps=6, step=0.1, seed=31,
        )
        a = mc_table(config)
        b = mc_table(config)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.phat, rb.phat)

    def test_failed_cell_becomes_marker(self, tmp_path):
        # an infeasible grid makes every replication fail, so the cell
        # trips the attrition rule and must be kept as an explicit marker
        config = McConfig(
            n_values=(100,), taus=(0.3, 0.98), orders=((0, 1),),
            reps=4, step=0.05, seed=2,
        )
        results = mc_table(config)
        ok = [r for r in results if r.error is None]
        bad = [r for r in results if r.error is not None]
        assert len(ok) == 1 and len(bad) == 1
        assert bad[0].tau == 0.98 and math.isnan(bad[0].bias)
        out = tmp_path / "partial.csv"
        write_mc_csv(results, out)
        lines = out.read_text().strip().splitlines()
        assert lines[-1].startswith("100,0.98") and lines[-1].endswith(",,")
        text = format_mc_text(results)
        assert "failed" in text
        from mqreg.montecarlo import write_mc_cells_csv

        cells = tmp_path / "cells_long.csv"
        write_mc_cells_csv(results, cells)
        assert len(cells.read_text().strip().splitlines()) == 1 + 2

    def test_csv_and_text_layout(self, tmp_path):
        config = McConfig(
            n_values=(120, 150), taus=(0.25, 0.5), orders=((0, 1), (1, 0)),
            reps=4, step=0.1, seed=13,
        )
        results = mc_table(config)
        out = tmp_path / "cells.csv"
        write_mc_csv(results, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("n,tau,bias_1>2,var_1>2,mse_1>2,bias_2>1")
        assert len(lines) == 1 + 4  # header + one row per (n, tau)
        text = format_mc_text(results)
        assert len(text.strip().splitlines()) == 1 + 4


class TestExperimentConfig:
    def test_round_trip(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "# comment\n"
            "alpha1 = 1\nalpha2 = 0.5\n"
            "n = 100, 200\ntau = 0.25, 0.75\norders = 1>2, 2>1\n"
            "reps = 12\nstep = 0.02\nseed = 99\nx = 1.0\n"
            "csv = out.csv\ntext = out.txt\n"
        )
        config = parse_experiment_config(cfg)
        assert config.spec.alpha1 == 1.0 and config.spec.alpha2 == 0.5
        assert config.n_values == (100, 200)
        assert config.taus == (0.25, 0.75)
        assert config.orders == ((0, 1), (1, 0))
        assert config.reps == 12 and config.seed == 99
        assert config.csv_path == "out.csv"

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("frobnicate = 3\n")
        with pytest.raises(SchemaError):
            parse_experiment_config(cfg)

    def test_malformed_line_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just some words\n")
        with pytest.raises(SchemaError):
            parse_experiment_config(cfg)
