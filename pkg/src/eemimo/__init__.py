"""Energy-efficient power and beamforming games for a multiuser MIMO uplink."""

__version__ = "0.1.0"

from .efficiency import eff, eff_prime, solve_target_sinr, utility
from .games import GameKind, SolverOptions, solve_game, verify_nash
from .model import Scenario, SystemParams, default_params, sample_scenario, RngHandle
from .montecarlo import SweepSpec, run_sweep

__all__ = [
    "eff", "eff_prime", "solve_target_sinr", "utility",
    "GameKind", "SolverOptions", "solve_game", "verify_nash",
    "Scenario", "SystemParams", "default_params", "sample_scenario", "RngHandle",
    "SweepSpec", "run_sweep",
]
