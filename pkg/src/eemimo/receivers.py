"""Receive filters and output SINR for matched-filter, MMSE and SIC-MMSE reception.

Every SINR goes through the same explicit quotient

    gamma_k = p_k (d_k . h_k)^2 / (N0/2 |d_k|^2 + sum_{i in I_k} p_i (d_k . h_i)^2)

with ``h_k = H_k a_k`` the effective signature. ``I_k`` is every other user
for linear receivers and only the users detected after ``k`` for SIC.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .numerics import spd_solve

__all__ = [
    "RECEIVER_KINDS",
    "AllocationState",
    "DegenerateChannelError",
    "signatures",
    "covariance",
    "interference_covariance",
    "matched_filter",
    "mmse_filter",
    "mmse_filters",
    "sinr",
    "sinr_all",
    "mmse_sinr_closed_form",
    "sic_order",
    "sic_filter",
    "sic_filters",
    "optimal_filters",
]

RECEIVER_KINDS = ("matched", "mmse", "sic_mmse")


class DegenerateChannelError(ValueError):
    """A user's effective signature or receive filter vanished."""


@dataclass
class AllocationState:
    """Strategy profile: powers (K,), beamformers (K, N_T), filters (K, N_R).

    ``order`` is the SIC detection order (a permutation of user indices),
    required when ``receiver_kind == "sic_mmse"``.
    """

    powers: np.ndarray
    beamformers: np.ndarray
    filters: np.ndarray
    receiver_kind: str = "matched"
    order: Optional[tuple] = None

    def __post_init__(self):
        self.powers = np.array(self.powers, dtype=float)
        self.beamformers = np.array(self.beamformers, dtype=float)
        self.filters = np.array(self.filters, dtype=float)
        if self.receiver_kind not in RECEIVER_KINDS:
            raise ValueError(f"receiver_kind must be one of {RECEIVER_KINDS}")
        if np.any(self.powers < 0):
            raise ValueError("powers must be non-negative")
        norms = np.linalg.norm(self.beamformers, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValueError("beamformers must have unit norm")
        if self.order is not None:
            self.order = tuple(int(i) for i in self.order)
            if sorted(self.order) != list(range(len(self.powers))):
                raise ValueError("order must be a permutation of the user indices")
        if self.receiver_kind == "sic_mmse" and self.order is None:
            raise ValueError("sic_mmse state needs a detection order")

    def copy(self):
        return replace(self, powers=self.powers.copy(), beamformers=self.beamformers.copy(),
                       filters=self.filters.copy())


def signatures(scenario, beamformers):
    """Effective signatures ``H_k a_k`` stacked as rows, shape (K, N_R)."""
    return np.einsum("krt,kt->kr", scenario.channels, beamformers)


def _cov(S, p, noise_var):
    M = (S.T * p) @ S
    M = 0.5 * (M + M.T)
    M[np.diag_indices_from(M)] += noise_var
    return M


def covariance(scenario, state):
    """Received-data covariance ``sum_k p_k h_k h_k^T + (N0/2) I``."""
    S = signatures(scenario, state.beamformers)
    return _cov(S, state.powers, scenario.noise_var)


def interference_covariance(scenario, state, k):
    """Covariance ``M_k`` seen by user k (its own term left out, not subtracted)."""
    S = signatures(scenario, state.beamformers)
    p = state.powers.copy()
    p[k] = 0.0
    return _cov(S, p, scenario.noise_var)


def matched_filter(H, a):
    return np.asarray(H, dtype=float) @ np.asarray(a, dtype=float)


def mmse_filters(scenario, state):
    """All MMSE filters ``sqrt(p_k) M^{-1} h_k`` as rows, shape (K, N_R)."""
    S = signatures(scenario, state.beamformers)
    X = spd_solve(covariance(scenario, state), S.T, check=False).T
    return np.sqrt(state.powers)[:, None] * X


def mmse_filter(scenario, state, k):
    return mmse_filters(scenario, state)[k]


def _later_mask(order, K):
    # later[k, i] is True when user i is detected after user k
    pos = np.empty(K, dtype=int)
    pos[list(order)] = np.arange(K)
    return pos[None, :] > pos[:, None]


def _interference_mask(state):
    K = len(state.powers)
    if state.receiver_kind == "sic_mmse":
        return _later_mask(state.order, K)
    return ~np.eye(K, dtype=bool)


def sinr_all(scenario, state, filters=None):
    """Output SINR of every user under ``state`` (filters taken from the state
    unless given explicitly)."""
    D = state.filters if filters is None else np.asarray(filters, dtype=float)
    S = signatures(scenario, state.beamformers)
    p = state.powers
    G = D @ S.T
    G2 = G * G
    signal = p * np.diag(G2)
    interf = np.where(_interference_mask(state), G2 * p[None, :], 0.0).sum(axis=1)
    noise = scenario.noise_var * np.einsum("kr,kr->k", D, D)
    zero = noise == 0.0
    if np.any(zero & (p > 0)):
        k = int(np.flatnonzero(zero & (p > 0))[0])
        raise DegenerateChannelError(f"receive filter of user {k} is zero")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(zero, 0.0, signal / np.where(zero, 1.0, noise + interf))
    return out


def sinr(scenario, state, k):
    return float(sinr_all(scenario, state)[k])


def mmse_sinr_closed_form(scenario, state, k):
    """``p_k h_k^T M_k^{-1} h_k`` with ``M_k`` the covariance without user k."""
    h = signatures(scenario, state.beamformers)[k]
    Mk = interference_covariance(scenario, state, k)
    return float(state.powers[k] * h @ spd_solve(Mk, h))


def sic_order(scenario, state):
    """Detection order: non-increasing ``|H_k a_k|``, ties by ascending index."""
    norms = np.linalg.norm(signatures(scenario, state.beamformers), axis=1)
    return tuple(int(i) for i in np.argsort(-norms, kind="stable"))


def sic_filters(scenario, state, order=None):
    """SIC-MMSE filters as rows, shape (K, N_R).

    User ``k`` sees only itself and the users detected after it, so its filter
    is ``sqrt(p_k) (Ht_k P_k Ht_k^T + (N0/2) I)^{-1} h_k`` where ``Ht_k``
    stacks those signatures.
    """
    order = state.order if order is None else order
    S = signatures(scenario, state.beamformers)
    p = state.powers
    K, nr = S.shape
    D = np.empty_like(S)
    # build the remaining-user covariance from the last detected user backwards
    C = scenario.noise_var * np.eye(nr)
    for k in reversed(order):
        C = C + p[k] * np.outer(S[k], S[k])
        D[k] = np.sqrt(p[k]) * spd_solve(C, S[k], check=False)
    return D


def sic_filter(scenario, state, order, k):
    return sic_filters(scenario, state, order)[k]


def optimal_filters(scenario, state):
    """The filters implied by ``state.receiver_kind`` for the current powers/beams."""
    if state.receiver_kind == "matched":
        return signatures(scenario, state.beamformers)
    if state.receiver_kind == "mmse":
        return mmse_filters(scenario, state)
    return sic_filters(scenario, state)
