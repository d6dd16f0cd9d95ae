import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fcsl.channel import (ChannelProfile, ConfigError, GridConfig, PathSet, cfr, cfr_grid, cir,
                          draw_paths, sample_grid, steering)
from fcsl.metrics import spatial_autocorrelation

CFG = GridConfig(n_tx=8, n_rx=2, n_c=24)


def _random_paths(rng, p=3, max_delay=1e-6):
    return PathSet(rng.normal(size=p) + 1j * rng.normal(size=p), rng.uniform(0, max_delay, p),
                   rng.uniform(-50, 50, p), rng.uniform(-1, 1, p), rng.uniform(-1, 1, p))


# ---------------------------------------------------------------- steering

def test_steering_broadside_all_ones():
    np.testing.assert_array_equal(steering(0.0, 5), np.ones(5))


@given(st.floats(-np.pi, np.pi), st.integers(1, 32), st.floats(0.1, 2.0))
def test_steering_unit_modulus(theta, count, spacing):
    np.testing.assert_allclose(np.abs(steering(theta, count, spacing)), 1.0, atol=1e-12)


def test_steering_phase_oracle():
    a = steering(np.pi / 6, 4, 0.5)
    # sin(pi/6) = 1/2, so the phase step is 2*pi*0.5*0.5 = pi/2
    np.testing.assert_allclose(a, np.exp(1j * np.array([0, np.pi / 2, np.pi, 3 * np.pi / 2])), atol=1e-12)


def test_steering_rejects_empty_array():
    with pytest.raises(ConfigError):
        steering(0.1, 0)


# ---------------------------------------------------------------- cfr

def test_cfr_single_static_path_rank_one_and_flat():
    paths = PathSet([1.0], [0.0], [0.0], [0.3], [-0.2])
    h0 = cfr(paths, 0.0, 0.0, CFG)
    h1 = cfr(paths, 0.0, 1.7e6, CFG)
    expect = np.outer(steering(0.3, 8), steering(-0.2, 2).conj())
    np.testing.assert_allclose(h0, expect, atol=1e-12)
    np.testing.assert_allclose(h1, h0, atol=1e-12)
    assert np.linalg.matrix_rank(h0) == 1


def test_cfr_linear_in_gains():
    rng = np.random.default_rng(0)
    p = _random_paths(rng)
    np.testing.assert_allclose(cfr(p.scaled(2.0), 1e-3, 3e5, CFG), 2 * cfr(p, 1e-3, 3e5, CFG), atol=1e-12)


def test_cfr_matches_term_by_term_sum():
    rng = np.random.default_rng(1)
    p = _random_paths(rng)
    t, f = 2.5e-3, 4.2e5
    expect = np.zeros((8, 2), complex)
    for i in range(3):
        a_t = np.exp(2j * np.pi * 0.5 * np.arange(8) * np.sin(p.aod[i]))
        a_r = np.exp(2j * np.pi * 0.5 * np.arange(2) * np.sin(p.aoa[i]))
        w = p.gains[i] * np.exp(2j * np.pi * p.dopplers[i] * t) * np.exp(-2j * np.pi * p.delays[i] * f)
        expect += w * np.outer(a_t, a_r.conj())
    np.testing.assert_allclose(cfr(p, t, f, CFG), expect, atol=1e-12)


def test_pathset_validation():
    with pytest.raises(ConfigError):
        PathSet([], [], [], [], [])
    with pytest.raises(ConfigError):
        PathSet([1.0], [-1e-9], [0.0], [0.0], [0.0])
    with pytest.raises(ConfigError):
        PathSet([1.0, 1.0], [0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])


# ---------------------------------------------------------------- cir

def test_cir_single_path_one_tap():
    p = PathSet([0.7j], [2e-7], [10.0], [0.1], [0.2])
    taps = cir(p, 0.0, np.arange(8) * 1e-7, CFG)
    nz = [i for i in range(8) if np.abs(taps[i]).max() > 0]
    assert nz == [2]


def test_cir_dft_matches_cfr_for_grid_aligned_delays():
    rng = np.random.default_rng(2)
    n_c, df = CFG.n_c, CFG.delta_f
    step = 1.0 / (n_c * df)
    grid = np.arange(n_c) * step
    p = PathSet(rng.normal(size=3) + 0j, grid[[0, 3, 7]], rng.uniform(-20, 20, 3), rng.uniform(-1, 1, 3),
                rng.uniform(-1, 1, 3))
    t = 1.5e-3
    taps = cir(p, t, grid, CFG)
    k = np.arange(n_c)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / n_c)
    via_dft = np.einsum("kd,dij->kij", dft, taps)
    direct = cfr_grid(p, [t], k * df, CFG)[0]
    np.testing.assert_allclose(via_dft, direct, atol=1e-9)


def test_cir_zero_gains_zero_tensor():
    p = PathSet([0.0, 0.0], [0.0, 1e-7], [0.0, 0.0], [0.0, 0.1], [0.0, 0.1])
    assert not cir(p, 0.0, np.arange(4) * 1e-7, CFG).any()


def test_cir_delay_outside_grid():
    p = PathSet([1.0], [5e-6], [0.0], [0.0], [0.0])
    with pytest.raises(ValueError, match="outside grid"):
        cir(p, 0.0, np.arange(4) * 1e-7, CFG)


def test_cir_rejects_non_monotone_grid():
    p = PathSet([1.0], [0.0], [0.0], [0.0], [0.0])
    with pytest.raises(ValueError):
        cir(p, 0.0, [0.0, 2e-7, 1e-7], CFG)


# ---------------------------------------------------------------- sample_grid

def test_sample_grid_table_scale_slice_shape():
    cfg = GridConfig(n_tx=64, n_rx=8, n_c=12)
    p = draw_paths(0, ChannelProfile())
    assert sample_grid(p, cfg, 1).shape[2:] == (64, 8)


def test_sample_grid_static_channel_constant_in_time():
    rng = np.random.default_rng(3)
    p = _random_paths(rng)
    p.dopplers[:] = 0.0
    h = sample_grid(p, CFG, 5)
    for n in range(1, 5):
        np.testing.assert_allclose(h[n], h[0], atol=1e-12)


def test_sample_grid_matches_pointwise_cfr():
    rng = np.random.default_rng(4)
    p = _random_paths(rng)
    h = sample_grid(p, CFG, 1)
    for k in range(0, CFG.n_c, 5):
        np.testing.assert_allclose(h[0, k], cfr(p, 0.0, k * CFG.delta_f, CFG), atol=1e-12)


def test_sample_grid_explicit_slots():
    p = draw_paths(5)
    a = sample_grid(p, CFG, 7)
    b = sample_grid(p, CFG, slots=[2, 6])
    np.testing.assert_array_equal(b, a[[2, 6]])


def test_reciprocity_bit_identical():
    """The grid sampled for the SRS schedule and for the CSI-RS schedule agree bit for bit
    wherever the two schedules share a slot."""
    from fcsl.pilots import PilotConfig, schedule_map

    grid, pc = GridConfig(), PilotConfig()
    tt = schedule_map(pc, grid)
    p = draw_paths(6)
    ul = sample_grid(p, grid, slots=tt.srs_slots.ravel())
    dl = sample_grid(p, grid, slots=tt.csirs_slots)
    shared = np.intersect1d(tt.srs_slots.ravel(), tt.csirs_slots)
    assert shared.size > 0
    for s in shared:
        u = ul[list(tt.srs_slots.ravel()).index(s)]
        d = dl[list(tt.csirs_slots).index(s)]
        assert u.tobytes() == d.tobytes()


# ---------------------------------------------------------------- draw_paths

def test_draw_paths_deterministic():
    a, b = draw_paths(11), draw_paths(11)
    for name in ("gains", "delays", "dopplers", "aod", "aoa"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 120.0))
def test_draw_paths_doppler_bound(seed, speed):
    prof = ChannelProfile(speed_kmh=speed)
    p = draw_paths(seed, prof)
    assert np.all(np.abs(p.dopplers) <= speed / 3.6 * prof.f_c / 299_792_458.0 + 1e-9)
    assert prof.p_min <= p.n_paths <= prof.p_max


def test_draw_paths_power_normalized_monte_carlo():
    rng = np.random.default_rng(12)
    tot = np.array([np.sum(np.abs(draw_paths(rng).gains) ** 2) for _ in range(10_000)])
    assert abs(tot.mean() - 1.0) <= 0.02


def test_draw_paths_empty_range():
    with pytest.raises(ConfigError):
        draw_paths(0, ChannelProfile(p_min=5, p_max=4))


# ---------------------------------------------------------------- invariants

def test_single_path_autocorrelation_unit_magnitude():
    p = PathSet([1.3 - 0.2j], [1e-7], [30.0], [0.4], [-0.7])
    h = sample_grid(p, CFG, 2)
    for end in ("BS", "UE"):
        r = spatial_autocorrelation(h, end)
        np.testing.assert_allclose(np.abs(r), 1.0, atol=1e-12)


def test_frequency_smoothness_bound():
    rng = np.random.default_rng(13)
    p = _random_paths(rng, p=5, max_delay=5e-7)
    tau = p.delays.max()
    bound_scale = 2 * np.pi * tau * np.sum(np.abs(p.gains)) * np.sqrt(CFG.n_tx * CFG.n_rx)
    f0 = 1e6
    for delta in (1e3, 1e1):
        diff = np.linalg.norm(cfr(p, 0.0, f0, CFG) - cfr(p, 0.0, f0 + delta, CFG))
        assert diff <= bound_scale * delta


def test_grid_config_validation():
    with pytest.raises(ConfigError):
        GridConfig(n_tx=0)
    with pytest.raises(ConfigError):
        GridConfig(delta_f=-1.0)
