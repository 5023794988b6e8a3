"""Generator tests: Lorenz ring, bifurcation networks, observation noise."""

import numpy as np
import pytest

from stpca import (
    BifNetConfig,
    LorenzConfig,
    NoiseSpec,
    ParameterError,
    add_observation_noise,
    fold_branch,
    network_drift,
    simulate_bifurcation_network,
    simulate_coupled_lorenz,
)


def test_lorenz_config_validation():
    with pytest.raises(ParameterError):
        LorenzConfig(n=4, m=10)
    with pytest.raises(ParameterError):
        LorenzConfig(n=0, m=10)
    with pytest.raises(ParameterError):
        LorenzConfig(n=3, m=1)
    with pytest.raises(ParameterError):
        LorenzConfig(n=3, m=10, dt=0.05)
    with pytest.raises(ParameterError):
        LorenzConfig(n=3, m=10, sample_every=0)
    with pytest.raises(ParameterError):
        LorenzConfig(n=3, m=10, transient_steps=-1)


def test_lorenz_shapes_names_and_time_index():
    cfg = LorenzConfig(n=6, m=7, seed=3, sample_every=4)
    x = simulate_coupled_lorenz(cfg)
    assert x.values.shape == (6, 7)
    assert x.variable_names == ["x1", "y1", "z1", "x2", "y2", "z2"]
    steps = np.diff(x.time_index)
    assert np.allclose(steps, cfg.dt * cfg.sample_every, atol=1e-12)


def test_lorenz_determinism_and_seed_sensitivity():
    cfg = LorenzConfig(n=9, m=12, seed=5)
    a = simulate_coupled_lorenz(cfg)
    b = simulate_coupled_lorenz(cfg)
    assert np.array_equal(a.values, b.values)
    c = simulate_coupled_lorenz(LorenzConfig(n=9, m=12, seed=6))
    assert not np.array_equal(a.values, c.values)


def test_single_lorenz_stays_in_attractor_box():
    cfg = LorenzConfig(n=3, m=2000, seed=1, coupling=0.0, sample_every=5)
    v = simulate_coupled_lorenz(cfg).values
    assert np.all(np.abs(v[0]) <= 25.0)
    assert np.all(np.abs(v[1]) <= 30.0)
    assert np.all((v[2] >= 0.0) & (v[2] <= 50.0))


def test_lorenz_long_run_stays_finite():
    cfg = LorenzConfig(n=3, m=2, seed=2, transient_steps=1_000_000,
                       sample_every=1)
    v = simulate_coupled_lorenz(cfg).values
    assert np.all(np.isfinite(v))


def test_bifnet_config_defaults_and_validation():
    assert BifNetConfig("fold").nodes == 18
    assert BifNetConfig("hopf").nodes == 16
    with pytest.raises(ParameterError):
        BifNetConfig("cusp")
    with pytest.raises(ParameterError):
        BifNetConfig("fold", nodes=1)
    with pytest.raises(ParameterError):
        BifNetConfig("fold", tau_star=0)
    with pytest.raises(ParameterError):
        BifNetConfig("fold", tau_star=500, tau_steps=300)
    with pytest.raises(ParameterError):
        BifNetConfig("fold", noise=-0.1)


def test_parameter_ramp_hits_zero_at_tau_star():
    cfg = BifNetConfig("fold", tau_steps=300, tau_star=200)
    assert cfg.parameter_at(1) == -1.0
    assert cfg.parameter_at(200) == 0.0
    assert cfg.parameter_at(300) == pytest.approx(0.3, abs=1e-12)
    # piecewise-linear in between
    mid = cfg.parameter_at(100)
    assert mid == pytest.approx(-1.0 + 99 * (1.0 / 199), abs=1e-12)
    post = cfg.parameter_at(250)
    assert post == pytest.approx(0.3 * 50 / 100, abs=1e-12)


def test_bifurcation_network_output_contract():
    cfg = BifNetConfig("fold", tau_steps=60, tau_star=40, seed=9)
    x, tau_star = simulate_bifurcation_network(cfg)
    assert tau_star == 40
    assert x.values.shape == (18, 60)
    assert np.array_equal(x.time_index, np.arange(1.0, 61.0))
    h, _ = simulate_bifurcation_network(BifNetConfig("hopf", tau_steps=50,
                                                     tau_star=30, seed=9))
    assert h.values.shape == (16, 50)
    assert h.variable_names[:4] == ["x1", "y1", "x2", "y2"]


def test_bifurcation_network_determinism():
    cfg = BifNetConfig("hopf", tau_steps=40, tau_star=30, seed=4)
    a, _ = simulate_bifurcation_network(cfg)
    b, _ = simulate_bifurcation_network(cfg)
    assert np.array_equal(a.values, b.values)


def test_fold_nodes_track_stable_branch_before_tipping():
    cfg = BifNetConfig("fold", tau_steps=300, tau_star=200, coupling=0.5,
                       noise=0.05, seed=7)
    x, _ = simulate_bifurcation_network(cfg)
    for tau in (10, 50, 100):
        p = cfg.parameter_at(tau)
        branch = np.sqrt(-p)
        dev = np.abs(x.values[:, tau - 1] - branch)
        assert dev.mean() < 3.0 * cfg.noise


def test_fold_branch_solves_the_drift_root():
    for p in (-1.0, -0.5, -0.1):
        x = fold_branch(p)
        assert -(x * x + p) - 0.05 * x**3 == pytest.approx(0.0, abs=1e-12)
        assert x == pytest.approx(np.sqrt(-p), abs=0.05)


def test_jacobian_is_stable_far_before_tipping():
    for kind in ("fold", "hopf"):
        cfg = BifNetConfig(kind, tau_steps=300, tau_star=200, coupling=0.5)
        p = cfg.parameter_at(50)
        if kind == "fold":
            eq = np.full(cfg.nodes, fold_branch(p))
        else:
            eq = np.zeros(cfg.nodes)
        eps = 1e-6
        jac = np.empty((cfg.nodes, cfg.nodes))
        for j in range(cfg.nodes):
            up, down = eq.copy(), eq.copy()
            up[j] += eps
            down[j] -= eps
            jac[:, j] = (network_drift(cfg, up, p) - network_drift(cfg, down, p)) / (2 * eps)
        real_parts = np.linalg.eigvals(jac).real
        assert real_parts.max() < -1e-3, kind


def test_observation_noise_contract():
    x = simulate_coupled_lorenz(LorenzConfig(n=60, m=50, seed=8))
    same = add_observation_noise(x, NoiseSpec(sd=0.0, seed=1))
    assert np.array_equal(same.values, x.values)
    a = add_observation_noise(x, NoiseSpec(sd=20.0, seed=2))
    b = add_observation_noise(x, NoiseSpec(sd=20.0, seed=2))
    assert np.array_equal(a.values, b.values)
    delta = a.values - x.values
    assert abs(delta.std(ddof=1) - 20.0) / 20.0 < 0.05
    with pytest.raises(ParameterError):
        NoiseSpec(sd=-1.0)
