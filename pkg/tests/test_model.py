import numpy as np
import pytest

from eemimo.model import (
    CHANNEL_MODELS, RNG_ALGORITHM, RngHandle, Scenario, SystemParams, default_params,
    initial_beamformer, sample_scenario,
)
from oracles import jacobi_eigenvalues


def test_default_params():
    p = default_params(10, 8)
    assert p.p_max == pytest.approx(3.1623e-3, rel=1e-4)
    assert (p.n_tx, p.packet_len, p.info_len, p.rate, p.noise_psd) == (4, 120, 120, 1e5, 1e-9)
    assert p.noise_var == 5e-10
    assert default_params(1, 4).target_sinr == pytest.approx(6.689, abs=1e-3)
    assert default_params(2, 4).info_len / default_params(2, 4).packet_len == 1


def test_params_validation():
    with pytest.raises(ValueError):
        default_params(2, 4, info_len=121)
    with pytest.raises(ValueError):
        default_params(0, 4)
    with pytest.raises(ValueError):
        default_params(2, 4, p_max=0.0)
    with pytest.raises(ValueError):
        default_params(2, 4, target_sinr=5.0)
    with pytest.raises(ValueError):
        default_params(2, 4, packet_len=1)
    with pytest.raises(ValueError):
        default_params(2, 4, channel_model="rician")
    with pytest.raises(ValueError):
        default_params(2, 4, d_min=100.0, d_max=10.0)


def test_per_user_caps():
    p = default_params(2, 4, p_max_per_user=(1e-3, 2e-3))
    np.testing.assert_array_equal(p.caps(), [1e-3, 2e-3])
    np.testing.assert_array_equal(default_params(3, 4).caps(), [10 ** -2.5] * 3)
    with pytest.raises(ValueError):
        default_params(3, 4, p_max_per_user=(1e-3,))


def test_rayleigh_mean_calibration():
    params = default_params(1, 250, n_tx=400)
    sc = sample_scenario(params, RngHandle(11), distances=[100.0])
    assert sc.channels.size >= 10 ** 5
    assert sc.channels.mean() == pytest.approx(0.01, rel=0.01)
    assert np.all(sc.channels >= 0)


def test_gaussian_entries_spread():
    params = default_params(1, 250, n_tx=400, channel_model="gaussian_entries")
    H = sample_scenario(params, RngHandle(12), distances=[50.0]).channels
    assert abs(H.mean()) < 1e-3 / 50 * 10
    assert H.std() == pytest.approx(1 / 50, rel=0.01)
    assert np.any(H < 0)


def test_fixed_single_user():
    params = default_params(1, 4)
    sc = sample_scenario(params, RngHandle(0), distances=[10.0])
    assert sc.channels.shape == (1, 4, 4)
    assert np.all(sc.channels >= 0)
    assert sc.seed_record["placement"] == "fixed"
    assert sc.seed_record["rng"] == RNG_ALGORITHM


@pytest.mark.parametrize("d", [[5.0, 100.0], [100.0], [100.0, 2000.0], [np.nan, 100.0]])
def test_bad_fixed_distances(d):
    with pytest.raises(ValueError):
        sample_scenario(default_params(2, 4), RngHandle(0), distances=d)


def test_uniform_distances_in_range():
    params = default_params(10, 4)
    for t in range(50):
        d = sample_scenario(params, RngHandle(3, t)).distances
        assert np.all((d >= 10) & (d <= 1000))


def test_scenario_determinism_and_streams():
    params = default_params(5, 8)
    a = sample_scenario(params, RngHandle(42, 7))
    b = sample_scenario(params, RngHandle(42, 7))
    c = sample_scenario(params, RngHandle(42, 8))
    np.testing.assert_array_equal(a.channels, b.channels)
    np.testing.assert_array_equal(a.distances, b.distances)
    assert not np.array_equal(a.channels, c.channels)


def test_distances_shared_across_antenna_counts():
    a = sample_scenario(default_params(4, 4), RngHandle(1, 3))
    b = sample_scenario(default_params(4, 8), RngHandle(1, 3))
    np.testing.assert_array_equal(a.distances, b.distances)


def test_scenario_is_read_only():
    sc = sample_scenario(default_params(2, 4), RngHandle(0))
    with pytest.raises(ValueError):
        sc.channels[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        Scenario(params=default_params(2, 4), distances=[10.0, 20.0], channels=np.zeros((2, 4, 3)))


def test_rng_handle_bounds():
    with pytest.raises(ValueError):
        RngHandle(-1)
    with pytest.raises(ValueError):
        RngHandle(0, 2 ** 64)
    with pytest.raises(TypeError):
        sample_scenario(default_params(1, 4), np.random.default_rng(0))


def test_initial_beamformer_cases():
    a = initial_beamformer(np.eye(4))
    assert np.linalg.norm(np.eye(4) @ a - a) < 1e-12
    np.testing.assert_allclose(initial_beamformer(np.diag([2.0, 1, 1, 1])), [1, 0, 0, 0], atol=1e-12)


def test_initial_beamformer_against_jacobi():
    rng = np.random.default_rng(5)
    for _ in range(100):
        H = rng.standard_normal((6, 4)) * np.array([1.0, 1.0, 5.0, 1.0])
        a = initial_beamformer(H)
        w, V = jacobi_eigenvalues(H.T @ H)
        assert abs(np.linalg.norm(a) - 1) <= 1e-12
        assert abs(abs(a @ V[:, -1]) - 1) < 1e-8
        assert np.argmax(np.abs(a)) == 2
