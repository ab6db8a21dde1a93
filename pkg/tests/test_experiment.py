import math

import numpy as np
import pytest

from mrfnet.errors import ConfigError, SamplerTimeoutError
from mrfnet.experiment import ExperimentConfig, generate_truth, run_experiment, sample_size, truths_for
from mrfnet.metrics import structure_stats
from mrfnet.model import PenaltyConfig
from mrfnet.sampler import SamplerConfig

TINY = dict(p=6, r_values=(0, 2), beta_grid=(1.0, 2.0), replications=2, cross_degree=2)


def test_sample_size():
    assert sample_size(26, 20, 1.0) == round(26 * math.log(20))
    assert sample_size(26, 20, 2.0) == round(26 * math.log(20) / 4)
    assert sample_size(1, 2, 100.0) == 1


def test_truth_without_hidden_nodes():
    truth = generate_truth(20, 0, seed=3)
    st = structure_stats(truth)
    assert st.b_n == 0.0 and st.boundary == () and truth.hidden == ()


def test_truth_edge_count_and_degree():
    truth = generate_truth(50, 8, seed=1)
    star = truth.observed_block()
    assert sum(1 for (s, l) in star.entries if s != l) == 65
    dense = truth.theta_full.to_dense()
    assert ((dense != 0).sum(axis=1) - (np.diag(dense) != 0)).max() <= 8
    assert np.all(dense >= 0)
    w = dense[dense != 0]
    assert w.min() >= 0.4 and w.max() <= 0.9


def test_truth_hidden_attachment():
    truth = generate_truth(50, 8, seed=1, cross_degree=2)
    dense = truth.theta_full.to_dense()
    for h in truth.hidden:
        assert np.count_nonzero(dense[h, :50]) == 2
        assert np.count_nonzero(dense[h, 50:]) == 0
    # fresh observed nodes are preferred: 8 x 2 distinct boundary nodes
    assert structure_stats(truth).boundary_size == 16


def test_truth_deterministic_and_nested():
    a = generate_truth(20, 3, seed=7)
    assert a.theta_full == generate_truth(20, 3, seed=7).theta_full
    assert a.theta_full != generate_truth(20, 3, seed=8).theta_full
    big = generate_truth(20, 8, seed=7)
    assert big.observed_block() == a.observed_block()
    for key, w in a.theta_full.entries.items():
        assert big.theta_full.get(*key) == w


def test_truth_b_n_grows_with_r():
    cfg = ExperimentConfig()
    b = [structure_stats(t).b_n for t in truths_for(cfg).values()]
    assert b[0] == 0.0 and b[0] < b[1] < b[2]


def test_truth_rejects_impossible_budgets():
    with pytest.raises(ValueError, match="edge budget"):
        generate_truth(4, 0, edge_factor=3.0)
    with pytest.raises(ValueError):
        generate_truth(4, 1, cross_degree=5)
    with pytest.raises(ValueError):
        generate_truth(6, 5, edge_factor=1.0, max_degree=2)


def test_config_validation():
    for bad in (
        dict(p=1),
        dict(r_values=()),
        dict(r_values=(-1,)),
        dict(beta_grid=(0.0,)),
        dict(replications=0),
        dict(weight_range=(0.9, 0.4)),
        dict(lambda_c=0.0),
        dict(kappa=0),
        dict(cross_degree=0),
    ):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)


def test_config_dict_round_trip():
    cfg = ExperimentConfig(p=8, penalty=PenaltyConfig("scad", 0.0), sampler=SamplerConfig(method="gibbs"))
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({**cfg.to_dict(), "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"sampler": {"method": "mh"}})


def test_single_replication_run():
    cfg = ExperimentConfig(p=6, r_values=(0,), beta_grid=(1.0,), replications=1, cross_degree=2)
    report = run_experiment(cfg)
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.n == sample_size(row.a_n, 6, 1.0) and row.n_failed == 0
    assert row.rel_mse_sd == 0.0 and np.isfinite(row.rel_mse_mean)


def test_report_grid_and_determinism():
    cfg = ExperimentConfig(**TINY)
    a = run_experiment(cfg)
    assert [(row.setting_r, row.beta) for row in a.rows] == [(0, 1.0), (0, 2.0), (2, 1.0), (2, 2.0)]
    assert a.row(2, 2.0).b_n > 0 and a.row(0, 1.0).b_n == 0
    assert a.curve(0).shape == (2,)
    b = run_experiment(cfg)
    for x, y in zip(a.rows, b.rows):
        assert (x.rel_mse_mean, x.precision_mean, x.iters_mean) == (y.rel_mse_mean, y.precision_mean, y.iters_mean)


def test_report_independent_of_workers():
    cfg = ExperimentConfig(**TINY)
    serial = run_experiment(cfg, workers=1)
    pooled = run_experiment(cfg, workers=2)
    for x, y in zip(serial.rows, pooled.rows):
        assert x.rel_mse_mean == y.rel_mse_mean and x.recall_mean == y.recall_mean


def test_failed_replications_are_recorded():
    cfg = ExperimentConfig(
        p=6,
        r_values=(0, 2),
        beta_grid=(1.0,),
        replications=2,
        weight_range=(2.5, 3.0),
        sampler=SamplerConfig(max_cftp_epochs=1),
    )
    seen = []
    report = run_experiment(cfg, on_result=seen.append)
    assert seen == [report]
    assert len(report.failures) == 4
    assert all(f.error.startswith("SamplerTimeoutError") for f in report.failures)
    assert all(row.n_failed == 2 and math.isnan(row.rel_mse_mean) for row in report.rows)
    with pytest.raises(SamplerTimeoutError):
        run_experiment(cfg, strict=True)
