"""Monte Carlo sweeps over user count and receive antennas.

Trial ``t`` of every cell draws its scenario from stream ``(seed, t)``, so
the four games see the same scenario (paired comparison), and cells with
different ``K`` or ``N_R`` share the same distance draws up to length.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .games import GameKind, SolverOptions, equilibrium_structure_ok, solve_game, verify_nash
from .model import RngHandle, default_params, sample_scenario
from .numerics import LinAlgError
from .receivers import DegenerateChannelError

__all__ = ["SweepSpec", "TrialRecord", "CellSummary", "SweepSummary", "run_sweep", "paired_ratio"]

log = logging.getLogger(__name__)

ALL_KINDS = tuple(GameKind)


@dataclass(frozen=True)
class SweepSpec:
    kinds: Tuple[GameKind, ...] = ALL_KINDS
    k_values: Tuple[int, ...] = (2, 4, 6, 8, 10)
    n_rx_values: Tuple[int, ...] = (4, 8)
    trials: int = 100
    seed: int = 0
    overrides: dict = field(default_factory=dict)
    distances: Optional[Tuple[float, ...]] = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    # run verify_nash and the structure/capacity checks on every trial
    verify: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(GameKind(k) for k in self.kinds))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.kinds:
            raise ValueError("at least one game kind is required")
        if any(k < 1 for k in self.k_values) or any(n < 1 for n in self.n_rx_values):
            raise ValueError("K and N_R values must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class TrialRecord:
    trial: int
    converged: bool
    mean_utility: float = math.nan
    mean_power: float = math.nan
    mean_sinr: float = math.nan
    rounds: int = 0
    error: Optional[str] = None
    nash_ok: Optional[bool] = None
    structure_ok: Optional[bool] = None
    capacity_monotone: Optional[bool] = None


@dataclass
class CellSummary:
    kind: GameKind
    K: int
    n_rx: int
    mean_utility: float
    mean_power_w: float
    mean_power_dbw: float
    mean_sinr: float
    mean_sinr_db: float
    convergence_rate: float
    trials: int
    n_converged: int
    n_failed: int
    se_utility: float
    se_power: float
    se_sinr: float


@dataclass
class SweepSummary:
    spec: SweepSpec
    cells: Dict[Tuple[GameKind, int, int], CellSummary]
    records: Dict[Tuple[GameKind, int, int], List[TrialRecord]]
    target_sinr: float

    def cell(self, kind, K, n_rx):
        return self.cells[(GameKind(kind), K, n_rx)]

    def trial_records(self, kind, K, n_rx):
        return self.records[(GameKind(kind), K, n_rx)]


def capacity_trace_monotone(traces, rtol=1e-10):
    for trace in traces:
        t = np.asarray(trace)
        if t.size > 1 and np.any(np.diff(t) < -rtol * np.maximum(np.abs(t[:-1]), 1.0)):
            return False
    return True


def _run_trial(task):
    spec, K, n_rx, t = task
    params = default_params(K, n_rx, **spec.overrides)
    scenario = sample_scenario(params, RngHandle(spec.seed, t), distances=spec.distances)
    out = []
    for kind in spec.kinds:
        try:
            rep = solve_game(scenario, kind, spec.solver)
        except (DegenerateChannelError, LinAlgError) as exc:
            out.append(TrialRecord(trial=t, converged=False, error=f"{type(exc).__name__}: {exc}"))
            continue
        rec = TrialRecord(
            trial=t, converged=rep.converged,
            mean_utility=float(np.mean(rep.utility)),
            mean_power=float(np.mean(rep.state.powers)),
            mean_sinr=float(np.mean(rep.sinr)),
            rounds=rep.power_rounds,
        )
        if spec.verify and rep.converged:
            rec.nash_ok = verify_nash(scenario, rep).ok
            rec.structure_ok = equilibrium_structure_ok(rep, params)
            rec.capacity_monotone = capacity_trace_monotone(rep.capacity_trace)
        out.append(rec)
    return out


def _mean_se(x):
    n = len(x)
    if n == 0:
        return math.nan, math.nan
    m = math.fsum(x) / n
    if n < 2:
        return m, 0.0
    var = math.fsum((v - m) ** 2 for v in x) / (n - 1)
    return m, math.sqrt(var / n)


def _summarize(kind, K, n_rx, recs):
    good = [r for r in recs if r.converged]
    mu, se_u = _mean_se([r.mean_utility for r in good])
    mp, se_p = _mean_se([r.mean_power for r in good])
    ms, se_s = _mean_se([r.mean_sinr for r in good])

    def db(x):
        return 10.0 * math.log10(x) if x > 0 else (-math.inf if x == 0 else math.nan)

    return CellSummary(
        kind=kind, K=K, n_rx=n_rx, mean_utility=mu, mean_power_w=mp, mean_power_dbw=db(mp),
        mean_sinr=ms, mean_sinr_db=db(ms), convergence_rate=len(good) / len(recs),
        trials=len(recs), n_converged=len(good), n_failed=sum(r.error is not None for r in recs),
        se_utility=se_u, se_power=se_p, se_sinr=se_s,
    )


def run_sweep(spec, threads=1, progress=None):
    """Run every (kind, K, N_R) cell of ``spec``.

    Per-trial failures are recorded rather than raised. Non-converged trials
    count against the convergence rate and are left out of the means, which
    pool users and trials (per-trial user means, then averaged over trials).
    ``threads > 1`` fans trials out over worker processes; the reduction is
    done in trial order, so results do not depend on the worker count.
    """
    tasks = [(spec, K, n_rx, t) for K in spec.k_values for n_rx in spec.n_rx_values
             for t in range(spec.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_run_trial, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    else:
        results = []
        for i, task in enumerate(tasks):
            results.append(_run_trial(task))
            if progress is not None:
                progress(i + 1, len(tasks))

    records: Dict[Tuple[GameKind, int, int], List[TrialRecord]] = {}
    for (_, K, n_rx, _), res in zip(tasks, results):
        for kind, rec in zip(spec.kinds, res):
            records.setdefault((kind, K, n_rx), []).append(rec)
    cells = {}
    for K in spec.k_values:
        for n_rx in spec.n_rx_values:
            for kind in spec.kinds:
                cells[(kind, K, n_rx)] = _summarize(kind, K, n_rx, records[(kind, K, n_rx)])
    target = default_params(1, 1, **spec.overrides).target_sinr
    return SweepSummary(spec=spec, cells=cells, records=records, target_sinr=target)


def paired_ratio(summary, kind_a, kind_b, K, n_rx):
    """Ratio of mean utilities of two games on the same cell."""
    a = summary.cells.get((GameKind(kind_a), K, n_rx))
    b = summary.cells.get((GameKind(kind_b), K, n_rx))
    if a is None or b is None:
        raise KeyError(f"cell ({kind_a!s}/{kind_b!s}, K={K}, N_R={n_rx}) not in summary")
    return a.mean_utility / b.mean_utility
