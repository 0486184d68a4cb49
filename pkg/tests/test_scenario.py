import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetnetlab.rng import derive_rng
from hetnetlab.scenario import (
    NetworkTopology,
    ScenarioConfig,
    assign_pilots,
    build_topology,
    draw_channels,
    estimate_channels,
    estimate_quality,
    large_scale_fading,
    make_scenario,
)


def test_degenerate_tier():
    cfg = ScenarioConfig(num_small_cells=0, num_ues=1)
    topo = build_topology(cfg, derive_rng(0, "t"))
    assert topo.num_cells == 1 and topo.num_ues == 1
    assert np.allclose(topo.cell_positions[0], [cfg.area_side / 2] * 2)
    assert list(topo.active_set) == [0]


def test_topology_deterministic():
    cfg = ScenarioConfig()
    a = build_topology(cfg, derive_rng(3, "t"))
    b = build_topology(cfg, derive_rng(3, "t"))
    assert np.array_equal(a.cell_positions, b.cell_positions)
    assert np.array_equal(a.ue_positions, b.ue_positions)


def test_topology_within_area():
    cfg = ScenarioConfig(num_small_cells=4, num_ues=8)
    for seed in range(1000):
        topo = build_topology(cfg, derive_rng(seed, "topology"))
        assert topo.num_cells == 5 and topo.num_ues == 8
        for pts in (topo.cell_positions, topo.ue_positions):
            assert pts.min() >= 0 and pts.max() <= cfg.area_side


def _topo(cells, ues):
    return NetworkTopology(np.array(cells, float), np.array(ues, float), np.arange(len(cells)))


def test_pathloss_calibration_points():
    cfg = ScenarioConfig(reference_distance=10.0, pathloss_exponent=3.76)
    beta = large_scale_fading(_topo([[0, 0]], [[10, 0], [20, 0], [3, 0]]), cfg)
    assert beta[0, 0] == pytest.approx(1.0)
    assert beta[0, 1] == pytest.approx(2.0**-3.76)
    assert beta[0, 2] == pytest.approx(1.0)  # clamped inside the reference distance


def test_pathloss_symmetry():
    beta = large_scale_fading(_topo([[0, 0]], [[30, 40], [-50, 0]]), ScenarioConfig())
    assert beta[0, 0] == beta[0, 1]


def test_pilot_examples():
    assert [g.tolist() for g in assign_pilots(2, 2).groups] == [[0], [1]]
    p = assign_pilots(4, 2)
    assert [g.tolist() for g in p.groups] == [[0, 2], [1, 3], [0, 2], [1, 3]]


@given(st.integers(1, 40), st.integers(1, 40))
def test_pilot_groups_partition(k, tp):
    p = assign_pilots(k, tp)
    distinct = {tuple(g.tolist()) for g in p.groups}
    assert sorted(u for g in distinct for u in g) == list(range(k))
    for i, g in enumerate(p.groups):
        assert i in g
    if tp >= k:
        assert all(len(g) == 1 for g in p.groups)


def test_disabled_link_gives_zero_channel(rng):
    h = draw_channels(np.array([[0.0, 1.0]]), 4, rng, batch=(10,))
    assert np.all(h[:, 0, 0] == 0)


def test_channel_moments(rng):
    beta = np.array([[1.0, 0.25]])
    n = 4
    h = draw_channels(beta, n, rng, batch=(100_000,))
    power = np.mean(np.sum(np.abs(h) ** 2, axis=-1), axis=0)
    assert np.allclose(power, n * beta, rtol=0.01)
    mean = h.mean(axis=0)
    se = np.sqrt(beta[..., None] / 2 / 100_000)  # per real component
    assert np.all(np.abs(mean.real) < 3 * se)
    assert np.all(np.abs(mean.imag) < 3 * se)


def test_shared_pilot_quality_oracle():
    # tau_p p_p = 10, sigma^2 = 1, two UEs on one pilot with beta = 1
    pilots = assign_pilots(2, 1)
    gamma = estimate_quality(np.ones((1, 2)), pilots, 10.0, 1.0)
    assert np.allclose(gamma, 10.0 / 21.0)


def test_perfect_estimation_limit():
    beta = np.array([[0.3, 0.7]])
    gamma = estimate_quality(beta, assign_pilots(2, 2), 1e12, 1.0)
    assert np.allclose(gamma, beta, rtol=1e-9)


def test_zero_pilot_power(rng):
    beta = np.array([[0.3, 0.7]])
    pilots = assign_pilots(2, 2)
    h = draw_channels(beta, 3, rng, batch=(5,))
    st_ = estimate_channels(h, beta, pilots, 0.0, 1.0, rng)
    assert np.all(st_.gamma == 0) and np.all(st_.h_hat == 0)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(1, 6), st.integers(1, 6), st.integers(1, 4),
    st.floats(1e-3, 1e3), st.floats(1e-6, 1e2), st.integers(0, 2**32),
)
def test_quality_bounded_by_beta(m, k, tp, pp, s2, seed):
    beta = derive_rng(seed, "beta").uniform(0.0, 1.0, size=(m, k))
    gamma = estimate_quality(beta, assign_pilots(k, tp), pp, s2)
    assert np.all(gamma >= 0) and np.all(gamma <= beta * (1 + 1e-12))


def test_estimate_variance_matches_gamma(rng):
    beta = np.array([[1.0, 0.5, 0.2], [0.1, 0.8, 0.4]])
    pilots = assign_pilots(3, 2)
    h = draw_channels(beta, 2, rng, batch=(100_000,))
    state = estimate_channels(h, beta, pilots, 0.5, 0.3, rng)
    var = np.mean(np.abs(state.h_hat) ** 2, axis=(0, -1))
    assert np.allclose(var, state.gamma, rtol=0.02)
    # MMSE orthogonality: the estimation error is uncorrelated with the estimate
    err = state.h - state.h_hat
    corr = np.mean(np.conj(err) * state.h_hat, axis=(0, -1))
    assert np.max(np.abs(corr)) < 0.01


def test_scenario_is_pure_function():
    cfg = ScenarioConfig()
    a = make_scenario(cfg, derive_rng(1, "scenario"))
    b = make_scenario(cfg, derive_rng(1, "scenario"))
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.gamma, b.gamma)


def test_config_rejects_long_pilots():
    with pytest.raises(ValueError, match="coherence_block"):
        ScenarioConfig(pilot_length=200, coherence_block=200)
