"""Best-response dynamics for the four energy-efficiency games.

Each game is solved by iterating users' best responses until the transmit
powers stop moving:

* ``mf_power``        power only, matched filter, fixed beamformer;
* ``mmse_power``      power and linear receiver (MMSE);
* ``mmse_beam_power`` power, linear receiver and beamformer;
* ``sic_power``       power and SIC-MMSE receiver, fixed detection order.

The power step is the standard-interference-function update
``p_k <- min(p_max, p_k * target / gamma_k)`` applied to all users at once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from .efficiency import utility
from .model import initial_beamformer
from .numerics import dominant_eigenpair, log_det_spd, spd_solve
from .receivers import (
    AllocationState,
    DegenerateChannelError,
    covariance,
    interference_covariance,
    optimal_filters,
    signatures,
    sic_order,
    sinr_all,
)

__all__ = [
    "GameKind",
    "SolverOptions",
    "EquilibriumReport",
    "NashCheck",
    "power_best_response",
    "beamformer_best_response",
    "sum_capacity",
    "initial_state",
    "solve_game",
    "verify_nash",
    "equilibrium_structure_ok",
]

log = logging.getLogger(__name__)


class GameKind(str, Enum):
    MF_POWER = "mf_power"
    MMSE_POWER = "mmse_power"
    MMSE_BEAM_POWER = "mmse_beam_power"
    SIC_POWER = "sic_power"

    @property
    def receiver_kind(self):
        return {"mf_power": "matched", "sic_power": "sic_mmse"}.get(self.value, "mmse")

    @property
    def chooses_receiver(self):
        return self is not GameKind.MF_POWER

    @property
    def chooses_beamformer(self):
        return self is GameKind.MMSE_BEAM_POWER


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6
    max_power_rounds: int = 1000
    max_outer_rounds: int = 50
    beam_tol: float = 1e-8
    max_beam_sweeps: int = 200
    cold_start: float = 0.01
    eig_method: str = "eigh"
    beam_schedule: str = "interleaved"
    # (power damping, beam step, rounds) tried in turn by the interleaved schedule
    damping_stages: tuple = ((0.5, 1.0, 150), (0.5, 0.5, 300), (0.3, 0.3, 300), (0.15, 0.15, 400))

    def __post_init__(self):
        for name in ("tol", "beam_tol", "cold_start"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_power_rounds", "max_outer_rounds", "max_beam_sweeps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.beam_schedule not in ("interleaved", "nested"):
            raise ValueError(f"unknown beam_schedule {self.beam_schedule!r}")
        stages = tuple(tuple(st) for st in self.damping_stages)
        if not stages:
            raise ValueError("damping_stages must not be empty")
        for alpha, beta, n in stages:
            if not (0 < alpha <= 1 and 0 < beta <= 1 and int(n) == n and n >= 1):
                raise ValueError(f"bad damping stage {(alpha, beta, n)!r}")
        object.__setattr__(self, "damping_stages", stages)
        if self.eig_method not in ("eigh", "power"):
            raise ValueError(f"unknown eig_method {self.eig_method!r}")


@dataclass
class EquilibriumReport:
    """Outcome of one game on one scenario.

    ``capacity_trace`` holds one list per outer round of the beamforming game:
    the sum capacity before the first beamformer sweep and after every sweep.
    Powers are fixed inside a list, so each list is non-decreasing.
    """

    kind: GameKind
    state: AllocationState
    sinr: np.ndarray
    utility: np.ndarray
    converged: bool
    outer_iterations: int
    power_rounds: int
    power_residual: float
    beam_residual: float = 0.0
    capacity_trace: List[List[float]] = field(default_factory=list)


@dataclass
class NashCheck:
    ok: bool
    worst_gain: float
    per_user_gain: np.ndarray
    worst_user: int
    worst_deviation: str

    def __bool__(self):
        return self.ok


def power_best_response(scenario, state, k, target, p_max):
    """Standard power update for user ``k`` against the current filters."""
    g = sinr_all(scenario, state)[k]
    p = state.powers[k]
    if p > 0 and g <= 0:
        raise DegenerateChannelError(f"user {k} has zero SINR at positive power")
    if p <= 0:
        raise ValueError(f"user {k} needs a positive power to update")
    return float(min(p_max, p * target / g))


def _power_round(scenario, state, target, caps):
    if state.receiver_kind != "matched":
        state.filters = optimal_filters(scenario, state)
    g = sinr_all(scenario, state)
    p = state.powers
    bad = (g <= 0) & (p > 0)
    if np.any(bad):
        raise DegenerateChannelError(f"user {int(np.flatnonzero(bad)[0])} has zero SINR at positive power")
    new = np.minimum(caps, p * target / g)
    resid = float(np.max(np.abs(new - p) / np.maximum(p, 1e-12)))
    state.powers = new
    return resid


def _run_power_rounds(scenario, state, target, caps, opts):
    """Synchronous power rounds until the relative change drops below ``tol``."""
    resid = np.inf
    for n in range(1, opts.max_power_rounds + 1):
        resid = _power_round(scenario, state, target, caps)
        if resid < opts.tol:
            return True, n, resid
    return False, opts.max_power_rounds, resid


def sum_capacity(scenario, state):
    """``1/2 log det M - 1/2 log det((N0/2) I)`` in nats."""
    M = covariance(scenario, state)
    n = M.shape[0]
    return 0.5 * (log_det_spd(M, check=False) - n * np.log(scenario.noise_var))


def beamformer_best_response(scenario, state, k, method="eigh"):
    """SINR-maximizing unit beamformer for user ``k``: the dominant eigenvector
    of ``H_k^T M_k^{-1} H_k``."""
    H = scenario.channels[k]
    Mk = interference_covariance(scenario, state, k)
    A = H.T @ spd_solve(Mk, H)
    A = 0.5 * (A + A.T)
    _, v = dominant_eigenpair(A, method=method)
    return v


def _beam_distance(a, b):
    # sign-invariant: -a and a give the same SINR
    return min(np.linalg.norm(a - b), np.linalg.norm(a + b))


def _beam_sweep(scenario, state, method, step=1.0):
    """One cyclic pass of beamformer updates at fixed powers.

    Each user moves its beamformer a fraction ``step`` of the way towards its
    best response (``step = 1`` plays the best response itself). Any such
    move raises the user's own MMSE SINR and hence the sum capacity.
    Returns the largest sign-invariant beamformer change.
    """
    H = scenario.channels
    p = state.powers
    S = signatures(scenario, state.beamformers)
    nv = scenario.noise_var
    change = 0.0
    for k in range(scenario.n_users):
        q = p.copy()
        q[k] = 0.0
        Mk = (S.T * q) @ S
        Mk = 0.5 * (Mk + Mk.T)
        Mk[np.diag_indices_from(Mk)] += nv
        A = H[k].T @ spd_solve(Mk, H[k], check=False)
        _, a = dominant_eigenpair(0.5 * (A + A.T), method=method, check=False)
        if step < 1.0:
            prev = state.beamformers[k]
            if a @ prev < 0:
                a = -a
            a = (1.0 - step) * prev + step * a
            a /= np.linalg.norm(a)
        change = max(change, _beam_distance(a, state.beamformers[k]))
        state.beamformers[k] = a
        S[k] = H[k] @ a
    return change


def initial_state(scenario, kind, opts=None):
    """Cold start: dominant-eigenvector beamformers, ``cold_start * p_max`` powers."""
    opts = opts or SolverOptions()
    kind = GameKind(kind)
    params = scenario.params
    beams = np.array([initial_beamformer(H) for H in scenario.channels])
    state = AllocationState(
        powers=opts.cold_start * params.caps(),
        beamformers=beams,
        filters=np.zeros((scenario.n_users, params.n_rx)),
    )
    if kind is GameKind.SIC_POWER:
        state.order = sic_order(scenario, state)
    state.receiver_kind = kind.receiver_kind
    state.filters = optimal_filters(scenario, state)
    return state


def _damped_power_step(scenario, state, target, caps, alpha, tol):
    state.filters = optimal_filters(scenario, state)
    g = sinr_all(scenario, state)
    p = state.powers
    if np.any((g <= 0) & (p > 0)):
        raise DegenerateChannelError("zero SINR at positive power")
    br = np.minimum(caps, p * target / g)
    new = p ** (1.0 - alpha) * br ** alpha
    # geometric damping never lands exactly on the cap
    snap = (br == caps) & (np.abs(new - caps) <= tol * caps)
    new[snap] = caps[snap]
    state.powers = new
    return float(np.max(np.abs(new - p) / np.maximum(p, 1e-12)))


def _solve_interleaved(scenario, state, opts):
    """Beamforming game: one cyclic beam sweep then one damped power step per
    round, with progressively stronger damping if a stage fails to settle."""
    params = scenario.params
    caps = params.caps()
    traces = []
    resid = beam_resid = np.inf
    n = 0
    for alpha, step, stage_rounds in opts.damping_stages:
        for _ in range(stage_rounds):
            n += 1
            trace = [sum_capacity(scenario, state)]
            # distance to the best response, not the damped move
            beam_resid = _beam_sweep(scenario, state, opts.eig_method, step) / step
            trace.append(sum_capacity(scenario, state))
            traces.append(trace)
            resid = _damped_power_step(scenario, state, params.target_sinr, caps, alpha, opts.tol)
            if max(resid, beam_resid) < opts.tol:
                return True, n, resid, beam_resid, traces
    return False, n, resid, beam_resid, traces



def _solve_nested(scenario, state, opts):
    """Beamforming game: beam sweeps to a fixed point, then power rounds to
    convergence, repeated. Prone to limit cycles; kept for comparison."""
    params = scenario.params
    caps = params.caps()
    traces = []
    rounds = 0
    resid = beam_resid = np.inf
    for n in range(1, opts.max_outer_rounds + 1):
        p0 = state.powers.copy()
        a0 = state.beamformers.copy()
        trace = [sum_capacity(scenario, state)]
        for _ in range(opts.max_beam_sweeps):
            change = _beam_sweep(scenario, state, opts.eig_method)
            trace.append(sum_capacity(scenario, state))
            if change < opts.beam_tol:
                break
        traces.append(trace)
        ok, m, _ = _run_power_rounds(scenario, state, params.target_sinr, caps, opts)
        rounds += m
        if not ok:
            return False, n, rounds, resid, beam_resid, traces
        resid = float(np.max(np.abs(state.powers - p0) / np.maximum(p0, 1e-12)))
        beam_resid = max(_beam_distance(a, b) for a, b in zip(state.beamformers, a0))
        if max(resid, beam_resid) < opts.tol:
            return True, n, rounds, resid, beam_resid, traces
    return False, opts.max_outer_rounds, rounds, resid, beam_resid, traces


def solve_game(scenario, kind, options=None):
    """Run best-response dynamics for ``kind`` on ``scenario``.

    Hitting an iteration cap yields a report with ``converged=False``; a
    vanishing effective channel raises ``DegenerateChannelError``.
    """
    opts = options or SolverOptions()
    kind = GameKind(kind)
    params = scenario.params
    target = params.target_sinr
    caps = params.caps()
    state = initial_state(scenario, kind, opts)
    traces = []

    if not kind.chooses_beamformer:
        converged, rounds, resid = _run_power_rounds(scenario, state, target, caps, opts)
        outer, beam_resid = 1, 0.0
    elif opts.beam_schedule == "interleaved":
        converged, outer, resid, beam_resid, traces = _solve_interleaved(scenario, state, opts)
        rounds = outer
    else:
        converged, outer, rounds, resid, beam_resid, traces = _solve_nested(scenario, state, opts)

    state.filters = optimal_filters(scenario, state)
    g = sinr_all(scenario, state)
    u = utility(g, state.powers, params)
    if not converged:
        log.debug("%s did not converge (residual %.3e)", kind.value, resid)
    return EquilibriumReport(
        kind=kind, state=state, sinr=g, utility=np.atleast_1d(u), converged=converged,
        outer_iterations=outer, power_rounds=rounds, power_residual=float(resid),
        beam_residual=float(beam_resid), capacity_trace=traces,
    )


def equilibrium_structure_ok(report, params, rtol=1e-4):
    """Every user sits at the target SINR or is pinned at its cap below it."""
    target = params.target_sinr
    caps = params.caps()
    g, p = report.sinr, report.state.powers
    at_target = np.abs(g - target) <= rtol * target
    pinned = (p == caps) & (g < target)
    return bool(np.all(at_target | pinned))


def _user_sinr(scenario, state, kind, k, p_k, beam=None):
    trial = state.copy()
    trial.powers[k] = p_k
    if beam is not None:
        trial.beamformers[k] = beam
    if kind.chooses_receiver:
        trial.filters[k] = optimal_filters(scenario, trial)[k]
    return sinr_all(scenario, trial)[k]


def verify_nash(scenario, report, deltas=(0.01, 0.05, 0.10), rtol=1e-6):
    """Check that no unilateral deviation raises a user's utility.

    Power deviations ``p_k (1 +/- delta)`` are tried with the other users
    frozen; upward moves are skipped at the cap. The deviating user re-derives
    its own receive filter when the game lets it choose one, and in the
    beamforming game it also plays its best beamformer at every trial power.
    """
    kind = GameKind(report.kind)
    params = scenario.params
    state = report.state
    caps = params.caps()
    K = scenario.n_users
    gains = np.zeros(K)
    labels = [""] * K
    for k in range(K):
        p = state.powers[k]
        base = utility(_user_sinr(scenario, state, kind, k, p), p, params)
        trials = [(p, "p")]
        for d in deltas:
            trials.append((p * (1 - d), f"p*(1-{d})"))
            if p * (1 + d) <= caps[k]:
                trials.append((p * (1 + d), f"p*(1+{d})"))
        beam = beamformer_best_response(scenario, state, k) if kind.chooses_beamformer else None
        for q, label in trials:
            cands = [(None, label)]
            if beam is not None:
                cands.append((beam, label + "+beam"))
            for b, lab in cands:
                if b is None and q == p:
                    continue
                u = utility(_user_sinr(scenario, state, kind, k, q, b), q, params)
                gain = (u - base) / base if base > 0 else (np.inf if u > 0 else 0.0)
                if gain > gains[k]:
                    gains[k], labels[k] = gain, lab
    worst = int(np.argmax(gains))
    return NashCheck(ok=bool(gains[worst] <= rtol), worst_gain=float(gains[worst]),
                     per_user_gain=gains, worst_user=worst, worst_deviation=labels[worst])
