import numpy as np
import pytest

from conftest import random_network
from mrfnet.experiment import generate_truth
from mrfnet.errors import PreconditionError, SamplerTimeoutError
from mrfnet.model import Dataset, SymmetricNetwork, auto_binomial_spec, auto_logistic_spec, enumerate_joint
from mrfnet.rng import counter_uniforms, derive_seed, stream_keys
from mrfnet.sampler import (
    SamplerConfig,
    drop_nodes,
    gibbs_chain,
    gibbs_sweep,
    row_seed,
    sample_cftp,
    sample_dataset,
    update_node,
)

CYCLE4 = SymmetricNetwork(4, {(0, 1): 0.3, (1, 2): 0.3, (2, 3): 0.3, (0, 3): 0.3})


def empirical_tv(data, theta, spec):
    states, log_pmf = enumerate_joint(theta, spec)
    m, p = spec.m, theta.p
    codes = data @ (m ** np.arange(p - 1, -1, -1))
    emp = np.bincount(codes, minlength=m**p) / len(data)
    return 0.5 * np.abs(emp - np.exp(log_pmf)).sum()


def test_config_validation():
    assert SamplerConfig(method="GIBBS").method == "gibbs"
    for bad in (dict(method="mh"), dict(burn_in=-1), dict(thinning=0), dict(max_cftp_epochs=0)):
        with pytest.raises(ValueError):
            SamplerConfig(**bad)


def test_uniforms_look_uniform():
    keys = stream_keys(7, np.arange(200_000))
    u = counter_uniforms(keys, 3, 1)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.003
    assert abs(np.corrcoef(u, counter_uniforms(keys, 3, 2))[0, 1]) < 0.01
    assert abs(np.corrcoef(u, counter_uniforms(keys, 4, 1))[0, 1]) < 0.01


def test_derive_seed_distinct():
    seeds = {derive_seed(1, r, j, k) for r in range(3) for j in range(4) for k in range(5)}
    assert len(seeds) == 60
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)


# -- Gibbs -------------------------------------------------------------------------


def test_gibbs_sweep_at_zero_is_uniform():
    spec = auto_binomial_spec(2)
    rng = np.random.default_rng(0)
    theta = SymmetricNetwork.zeros(3)
    out = np.array([gibbs_sweep([2, 0, 1], theta, spec, rng) for _ in range(30_000)])
    for s in range(3):
        freq = np.bincount(out[:, s], minlength=3) / len(out)
        np.testing.assert_allclose(freq, [0.25, 0.5, 0.25], atol=0.015)


def test_gibbs_sweep_deterministic():
    spec = auto_logistic_spec()
    a = gibbs_sweep([0, 1, 0, 1], CYCLE4, spec, np.random.default_rng(5))
    b = gibbs_sweep([0, 1, 0, 1], CYCLE4, spec, np.random.default_rng(5))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        gibbs_sweep([0, 2, 0, 1], CYCLE4, spec, np.random.default_rng(5))


def test_gibbs_chain_matches_enumeration():
    # 1e5 retained states (thinning 5) from 1000 lockstep chains
    spec = auto_logistic_spec()
    theta = SymmetricNetwork(3, {(0, 0): -0.4, (0, 1): 0.8, (1, 2): -0.5, (0, 2): 0.3})
    cfg = SamplerConfig(method="gibbs", burn_in=50, thinning=5, seed=3)
    draws = gibbs_chain(theta, spec, 100_000, cfg, chains=1000)
    assert draws.shape == (100_000, 3)
    assert empirical_tv(draws, theta, spec) <= 0.01


def test_gibbs_kernel_invariance():
    # one analytic application of each single-site kernel leaves the pmf fixed
    spec = auto_binomial_spec(2)
    theta = SymmetricNetwork(3, {(0, 0): 0.2, (0, 1): -0.7, (1, 2): 0.4, (2, 2): -0.3})
    states, log_pmf = enumerate_joint(theta, spec)
    pmf = np.exp(log_pmf)
    m = spec.m
    place = m ** np.arange(2, -1, -1)
    for s in range(3):
        K = np.zeros((len(states), len(states)))
        for i, x in enumerate(states):
            eta = np.array(
                [
                    spec.a[u]
                    + theta.get(s, s) * spec.b0[u]
                    + sum(theta.get(s, l) * spec.b[u, x[l]] for l in range(3) if l != s)
                    for u in range(m)
                ]
            )
            w = np.exp(eta - eta.max())
            w /= w.sum()
            for u in range(m):
                y = x.copy()
                y[s] = u
                K[i, int(y @ place)] = w[u]
        np.testing.assert_allclose(K.sum(axis=1), 1.0, atol=1e-14)
        np.testing.assert_allclose(pmf @ K, pmf, atol=1e-10, rtol=0)


def test_gibbs_dataset_rows_independent_of_n():
    spec = auto_logistic_spec()
    cfg = SamplerConfig(method="gibbs", burn_in=200, seed=9)
    a = sample_dataset(CYCLE4, spec, 5, cfg)
    b = sample_dataset(CYCLE4, spec, 12, cfg)
    assert np.array_equal(a.data, b.data[:5])


def test_gibbs_dataset_distribution():
    spec = auto_logistic_spec()
    data = sample_dataset(CYCLE4, spec, 40_000, SamplerConfig(method="gibbs", burn_in=100, seed=2))
    assert empirical_tv(data.data, CYCLE4, spec) <= 0.015


def test_gibbs_handles_repulsive_models():
    spec = auto_logistic_spec()
    theta = SymmetricNetwork(3, {(0, 1): -1.0, (1, 2): 0.5, (0, 2): -0.3})
    data = sample_dataset(theta, spec, 40_000, SamplerConfig(method="gibbs", burn_in=100, seed=4))
    assert empirical_tv(data.data, theta, spec) <= 0.015


# -- monotone coupling --------------------------------------------------------------


def test_monotone_update_preserves_order(rng):
    spec = auto_binomial_spec(3)
    p = 6
    theta = random_network(rng, p, scale=0.8, attractive=True, density=0.7)
    dense = theta.to_dense()
    n = 10_000
    lo = rng.integers(0, 4, size=(n, p))
    hi = np.minimum(lo + rng.integers(0, 4, size=(n, p)), 3)
    for s in range(p):
        u = rng.random(n)
        a, b = lo.copy(), hi.copy()
        update_node(a, s, u, dense, spec)
        update_node(b, s, u, dense, spec)
        assert np.all(a <= b)


def test_update_with_negative_weight_can_break_order():
    spec = auto_logistic_spec()
    dense = SymmetricNetwork(2, {(0, 1): -3.0}).to_dense()
    lo, hi = np.array([[0, 0]]), np.array([[0, 1]])
    u = np.array([0.7])
    update_node(lo, 0, u, dense, spec)
    update_node(hi, 0, u, dense, spec)
    assert lo[0, 0] > hi[0, 0]


# -- CFTP -----------------------------------------------------------------------


def test_cftp_zero_theta_is_uniform():
    spec = auto_binomial_spec(2)
    data = sample_dataset(SymmetricNetwork.zeros(3), spec, 30_000, SamplerConfig(seed=1, max_cftp_epochs=1))
    for s in range(3):
        np.testing.assert_allclose(np.bincount(data.data[:, s], minlength=3) / 30_000, [0.25, 0.5, 0.25], atol=0.015)


def test_cftp_cycle_exact():
    spec = auto_logistic_spec()
    data = sample_dataset(CYCLE4, spec, 100_000, SamplerConfig(seed=11))
    assert empirical_tv(data.data, CYCLE4, spec) <= 0.01


def test_cftp_auto_binomial_exact():
    spec = auto_binomial_spec(2)
    theta = SymmetricNetwork(3, {(0, 0): -0.5, (0, 1): 0.3, (1, 2): 0.2, (2, 2): 0.1})
    data = sample_dataset(theta, spec, 60_000, SamplerConfig(seed=5))
    assert empirical_tv(data.data, theta, spec) <= 0.015


def test_cftp_rejects_non_attractive():
    theta = SymmetricNetwork(3, {(1, 2): -0.1})
    with pytest.raises(PreconditionError, match="non-attractive"):
        sample_cftp(theta, auto_logistic_spec(), seed=0)
    with pytest.raises(PreconditionError):
        sample_dataset(theta, auto_logistic_spec(), 3, SamplerConfig())


def test_cftp_negative_diagonal_is_fine():
    theta = SymmetricNetwork(2, {(0, 0): -2.0, (0, 1): 0.5})
    sample_cftp(theta, auto_logistic_spec(), seed=0)


def test_cftp_timeout_reports_depth():
    theta = SymmetricNetwork.from_dense(np.full((8, 8), 1.5) - np.diag(np.full(8, 1.5 + 5.0)))
    with pytest.raises(SamplerTimeoutError) as info:
        sample_dataset(theta, auto_logistic_spec(), 200, SamplerConfig(seed=0, max_cftp_epochs=2))
    assert info.value.deepest_start == -2
    assert "-2" in str(info.value)


def test_cftp_seed_determinism_and_isolation():
    spec = auto_logistic_spec()
    cfg = SamplerConfig(seed=77)
    a = sample_dataset(CYCLE4, spec, 50, cfg)
    b = sample_dataset(CYCLE4, spec, 50, cfg)
    c = sample_dataset(CYCLE4, spec, 120, cfg)
    assert a == b
    assert np.array_equal(a.data, c.data[:50])
    for i in (0, 17, 49):
        assert np.array_equal(sample_cftp(CYCLE4, spec, row_seed(77, i)), a.data[i])


def test_zero_theta_column_means():
    data = sample_dataset(SymmetricNetwork.zeros(4), auto_logistic_spec(), 100_000, SamplerConfig(seed=8))
    np.testing.assert_allclose(data.data.mean(axis=0), 0.5, atol=0.005)


# -- ENUM -------------------------------------------------------------------------


def test_enum_sampler():
    spec = auto_logistic_spec()
    theta = SymmetricNetwork(3, {(0, 1): -0.8, (2, 2): 0.4})
    data = sample_dataset(theta, spec, 100, SamplerConfig(method="enum", seed=1))
    assert data.data.shape == (100, 3)
    big = sample_dataset(theta, spec, 100_000, SamplerConfig(method="enum", seed=1))
    assert np.array_equal(big.data[:100], data.data)
    assert empirical_tv(big.data, theta, spec) <= 0.01


# -- drop_nodes ------------------------------------------------------------------


def test_drop_nodes():
    data = Dataset(np.arange(10).reshape(2, 5) % 2, 2)
    same, kept = drop_nodes(data, [])
    assert same == data and kept.tolist() == [0, 1, 2, 3, 4]
    sub, kept = drop_nodes(data, {3, 4})
    assert sub.p == 3 and kept.tolist() == [0, 1, 2] and sub.columns == (0, 1, 2)
    assert np.array_equal(sub.data, data.data[:, :3])
    sub, kept = drop_nodes(data, [1])
    assert sub.columns == (0, 2, 3, 4)
    with pytest.raises(ValueError):
        drop_nodes(data, range(5))
    with pytest.raises(ValueError):
        drop_nodes(data, [5])


def test_drop_last_r_gives_observed_block():
    truth = generate_truth(8, 3, seed=1)
    full = sample_dataset(truth.theta_full, auto_logistic_spec(), 20, SamplerConfig(seed=2))
    obs, kept = drop_nodes(full, truth.hidden)
    assert tuple(kept.tolist()) == truth.observed
    assert obs.p == 8
