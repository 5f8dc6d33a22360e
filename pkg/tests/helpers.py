"""Small scenario builders shared by the test modules."""

import numpy as np

from eemimo.model import RngHandle, Scenario, SystemParams, default_params, initial_beamformer, sample_scenario
from eemimo.receivers import AllocationState, optimal_filters, sic_order


def hand_scenario(channels, noise_var=1.0, p_max=10.0, **kw):
    H = np.asarray(channels, dtype=float)
    K, nr, nt = H.shape
    params = SystemParams(n_users=K, n_tx=nt, n_rx=nr, noise_psd=2 * noise_var, p_max=p_max, **kw)
    return Scenario(params=params, distances=np.full(K, 100.0), channels=H)


def hand_state(scenario, powers, beams, kind="matched", order=None):
    K = scenario.n_users
    st = AllocationState(powers=powers, beamformers=beams, filters=np.zeros((K, scenario.params.n_rx)),
                         receiver_kind="matched", order=order)
    if kind == "sic_mmse" and order is None:
        st.order = sic_order(scenario, st)
    st.receiver_kind = kind
    st.filters = optimal_filters(scenario, st)
    return st


def random_case(rng, K=None, n_rx=None, kind="mmse", random_beams=True):
    K = int(rng.integers(1, 9)) if K is None else K
    n_rx = int(rng.choice([2, 4, 8])) if n_rx is None else n_rx
    params = default_params(K, n_rx)
    sc = sample_scenario(params, RngHandle(int(rng.integers(2 ** 32)), int(rng.integers(1000))))
    if random_beams:
        beams = rng.standard_normal((K, params.n_tx))
        beams /= np.linalg.norm(beams, axis=1, keepdims=True)
    else:
        beams = np.array([initial_beamformer(H) for H in sc.channels])
    powers = params.p_max * rng.uniform(0.01, 1.0, size=K)
    return sc, hand_state(sc, powers, beams, kind)
