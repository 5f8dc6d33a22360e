"""Command-line front end.

Configuration is TOML. Sweep keys live at the top level, the rest in
sections::

    games = ["mf_power", "mmse_power", "mmse_beam_power", "sic_power"]
    K = [2, 4, 6, 8, 10]
    n_rx = [4, 8]
    trials = 100
    seed = 0

    [system]
    n_tx = 4
    noise_psd = 1e-9
    rate = 1e5
    packet_len = 120
    p_max_dbw = -25.0
    channel_model = "rayleigh_entries"

    [solver]
    tol = 1e-6

    [output]
    dir = "results"
    formats = ["csv", "json"]
    threads = 1
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
import tomli
import tomli_w

from . import __version__
from .games import GameKind, SolverOptions, solve_game, verify_nash
from .model import CHANNEL_MODELS, RNG_ALGORITHM, RngHandle, default_params, sample_scenario
from .montecarlo import SweepSpec, run_sweep

log = logging.getLogger("eemimo")

CSV_HEADER = [
    "game", "K", "n_rx", "mean_utility_bits_per_joule", "mean_power_w", "mean_power_dbw",
    "mean_sinr", "mean_sinr_db", "convergence_rate", "trials", "se_utility", "se_power", "se_sinr",
]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    games: tuple = tuple(k.value for k in GameKind)
    K: tuple = (2, 4, 6, 8, 10)
    n_rx: tuple = (4, 8)
    trials: int = 100
    seed: int = 0
    # [system]
    n_tx: int = 4
    noise_psd: float = 1e-9
    rate: float = 1e5
    packet_len: int = 120
    info_len: Optional[int] = None
    p_max_dbw: float = -25.0
    channel_model: str = "rayleigh_entries"
    d_min: float = 10.0
    d_max: float = 1000.0
    distances: Optional[tuple] = None
    # [solver]
    tol: float = 1e-6
    max_power_rounds: int = 1000
    max_outer_rounds: int = 50
    cold_start: float = 0.01
    eig_method: str = "eigh"
    beam_schedule: str = "interleaved"
    # [output]
    out_dir: str = "results"
    formats: tuple = ("csv", "json")
    threads: int = 1

    @property
    def p_max_w(self):
        return 10.0 ** (self.p_max_dbw / 10.0)

    def param_overrides(self):
        return dict(n_tx=self.n_tx, noise_psd=self.noise_psd, rate=self.rate,
                    packet_len=self.packet_len, info_len=self.info_len, p_max=self.p_max_w,
                    channel_model=self.channel_model, d_min=self.d_min, d_max=self.d_max)

    def solver_options(self):
        return SolverOptions(tol=self.tol, max_power_rounds=self.max_power_rounds,
                             max_outer_rounds=self.max_outer_rounds, cold_start=self.cold_start,
                             eig_method=self.eig_method, beam_schedule=self.beam_schedule)

    def sweep_spec(self, verify=False):
        return SweepSpec(kinds=self.games, k_values=self.K, n_rx_values=self.n_rx,
                         trials=self.trials, seed=self.seed, overrides=self.param_overrides(),
                         distances=self.distances, solver=self.solver_options(), verify=verify)

    def to_toml(self):
        doc = {}
        for sect, keys in _LAYOUT.items():
            src = {}
            for cfg_key, attr in keys.items():
                v = getattr(self, attr)
                if v is None:
                    continue
                src[cfg_key] = list(v) if isinstance(v, tuple) else v
            if sect == "":
                doc.update(src)
            else:
                doc[sect] = src
        return tomli_w.dumps(doc)


# section -> {config key: RunConfig attribute}
_LAYOUT = {
    "": {"games": "games", "K": "K", "n_rx": "n_rx", "trials": "trials", "seed": "seed"},
    "system": {k: k for k in ("n_tx", "noise_psd", "rate", "packet_len", "info_len", "p_max_dbw",
                              "channel_model", "d_min", "d_max", "distances")},
    "solver": {k: k for k in ("tol", "max_power_rounds", "max_outer_rounds", "cold_start",
                              "eig_method", "beam_schedule")},
    "output": {"dir": "out_dir", "formats": "formats", "threads": "threads"},
}

_INT_KEYS = {"trials", "n_tx", "packet_len", "info_len", "max_power_rounds", "max_outer_rounds",
             "threads"}
_INT_LIST_KEYS = {"K", "n_rx"}
_POS_FLOAT_KEYS = {"noise_psd", "rate", "d_min", "d_max", "tol", "cold_start"}
_CHOICES = {
    "channel_model": CHANNEL_MODELS,
    "eig_method": ("eigh", "power"),
    "beam_schedule": ("interleaved", "nested"),
}


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_value(path, key, v):
    if key in _INT_KEYS:
        if not _is_int(v):
            raise ConfigError(f"{path}: expected an integer, got {v!r}")
        if v < 1:
            raise ConfigError(f"{path}: must be positive, got {v!r}")
        return v
    if key in _INT_LIST_KEYS:
        if not isinstance(v, list) or not v or not all(_is_int(x) for x in v):
            raise ConfigError(f"{path}: expected a non-empty list of integers, got {v!r}")
        if any(x < 1 for x in v):
            raise ConfigError(f"{path}: all entries must be positive, got {v!r}")
        return tuple(v)
    if key in _POS_FLOAT_KEYS:
        if not _is_num(v):
            raise ConfigError(f"{path}: expected a number, got {v!r}")
        if not v > 0:
            raise ConfigError(f"{path}: must be positive, got {v!r}")
        return float(v)
    if key == "seed":
        if not _is_int(v) or not 0 <= v < 2 ** 64:
            raise ConfigError(f"{path}: expected an unsigned 64-bit integer, got {v!r}")
        return v
    if key == "p_max_dbw":
        if not _is_num(v) or not math.isfinite(v):
            raise ConfigError(f"{path}: expected a finite number, got {v!r}")
        return float(v)
    if key == "games":
        valid = [k.value for k in GameKind]
        if not isinstance(v, list) or not v or any(g not in valid for g in v):
            raise ConfigError(f"{path}: expected a non-empty list drawn from {valid}, got {v!r}")
        return tuple(v)
    if key == "distances":
        if not isinstance(v, list) or not v or not all(_is_num(x) and x > 0 for x in v):
            raise ConfigError(f"{path}: expected a list of positive distances, got {v!r}")
        return tuple(float(x) for x in v)
    if key == "formats":
        if not isinstance(v, list) or not v or any(f not in ("csv", "json") for f in v):
            raise ConfigError(f"{path}: expected a non-empty subset of ['csv', 'json'], got {v!r}")
        return tuple(v)
    if key in _CHOICES:
        if v not in _CHOICES[key]:
            raise ConfigError(f"{path}: expected one of {list(_CHOICES[key])}, got {v!r}")
        return v
    if key == "dir":
        if not isinstance(v, str) or not v:
            raise ConfigError(f"{path}: expected a directory path, got {v!r}")
        return v
    raise ConfigError(f"{path}: unhandled key")


def parse_config(text):
    """Parse TOML text into a fully resolved :class:`RunConfig`."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    values = {}
    unknown = []
    for key, v in doc.items():
        if key in _LAYOUT and key != "":
            if not isinstance(v, dict):
                raise ConfigError(f"{key}: expected a table")
            for sub, sv in v.items():
                if sub not in _LAYOUT[key]:
                    unknown.append(f"{key}.{sub}")
                    continue
                values[_LAYOUT[key][sub]] = _check_value(f"{key}.{sub}", sub, sv)
        elif key in _LAYOUT[""]:
            values[_LAYOUT[""][key]] = _check_value(key, key, v)
        else:
            unknown.append(key)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.d_min > cfg.d_max:
        raise ConfigError("system.d_min: must not exceed system.d_max")
    if cfg.info_len is not None and cfg.info_len > cfg.packet_len:
        raise ConfigError("system.info_len: must not exceed system.packet_len")
    if cfg.packet_len < 2:
        raise ConfigError("system.packet_len: must be at least 2 (no positive target SINR for M = 1)")
    if cfg.distances is not None:
        if any(len(cfg.distances) != k for k in cfg.K):
            raise ConfigError("system.distances: length must equal every K value")
        if any(not cfg.d_min <= d <= cfg.d_max for d in cfg.distances):
            raise ConfigError("system.distances: entries must lie in [d_min, d_max]")


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _cell_row(c):
    return [c.kind.value, c.K, c.n_rx, c.mean_utility, c.mean_power_w, c.mean_power_dbw,
            c.mean_sinr, c.mean_sinr_db, c.convergence_rate, c.trials, c.se_utility,
            c.se_power, c.se_sinr]


def summary_csv(summary):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in summary.cells.values():
        w.writerow([_fmt(v) for v in _cell_row(c)])
    return buf.getvalue()


def _json_num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def summary_json(summary):
    rows = [{k: _json_num(v) for k, v in zip(CSV_HEADER, _cell_row(c))} for c in summary.cells.values()]
    return json.dumps({"target_sinr": summary.target_sinr, "cells": rows}, indent=2) + "\n"


def run(cfg, timings=None):
    """Run the sweep described by ``cfg`` and write its output files.

    Returns the :class:`~eemimo.montecarlo.SweepSummary`.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    if not os.access(cfg.out_dir, os.W_OK):
        raise OSError(f"output directory {cfg.out_dir!r} is not writable")
    t0 = time.perf_counter()
    summary = run_sweep(cfg.sweep_spec(), threads=cfg.threads)
    elapsed = time.perf_counter() - t0
    if "csv" in cfg.formats:
        _write(os.path.join(cfg.out_dir, "summary.csv"), summary_csv(summary))
    if "json" in cfg.formats:
        _write(os.path.join(cfg.out_dir, "summary.json"), summary_json(summary))
    meta = run_metadata(cfg, summary, {"sweep_seconds": elapsed})
    _write(os.path.join(cfg.out_dir, "metadata.json"), json.dumps(meta, indent=2) + "\n")
    return summary


def run_metadata(cfg, summary, timings):
    return {
        "artifact": "eemimo",
        "version": __version__,
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "config_toml": cfg.to_toml(),
        "target_sinr": summary.target_sinr,
        "p_max_w": cfg.p_max_w,
        "solver": asdict(cfg.solver_options()),
        "placement": "fixed" if cfg.distances else "uniform_distance",
        "pooling": "per-trial user means averaged over converged trials",
        "cold_start": f"p_k = {cfg.cold_start} * p_max",
        "timings": timings,
        "cells": [
            {"game": c.kind.value, "K": c.K, "n_rx": c.n_rx, "trials": c.trials,
             "non_converged": c.trials - c.n_converged, "failed": c.n_failed}
            for c in summary.cells.values()
        ],
    }


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _arr(x):
    return np.asarray(x).tolist()


def emit_single(cfg):
    """Solve each configured game on one scenario and write ``single_report.json``."""
    K, n_rx = cfg.K[0], cfg.n_rx[0]
    params = default_params(K, n_rx, **cfg.param_overrides())
    scenario = sample_scenario(params, RngHandle(cfg.seed, 0), distances=cfg.distances)
    games = {}
    for g in cfg.games:
        rep = solve_game(scenario, g, cfg.solver_options())
        check = verify_nash(scenario, rep) if rep.converged else None
        games[g] = {
            "converged": rep.converged,
            "outer_iterations": rep.outer_iterations,
            "power_rounds": rep.power_rounds,
            "power_residual": rep.power_residual,
            "powers_w": _arr(rep.state.powers),
            "sinr": _arr(rep.sinr),
            "utility_bits_per_joule": _arr(rep.utility),
            "beamformers": _arr(rep.state.beamformers),
            "filters": _arr(rep.state.filters),
            "sic_order": list(rep.state.order) if rep.state.order is not None else None,
            "capacity_trace": rep.capacity_trace,
            "verify_nash": None if check is None else {
                "ok": check.ok, "worst_gain": check.worst_gain, "worst_user": check.worst_user,
                "worst_deviation": check.worst_deviation,
            },
        }
    report = {
        "version": __version__,
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "K": K,
        "n_rx": n_rx,
        "target_sinr": params.target_sinr,
        "p_max_w": params.p_max,
        "rate": params.rate,
        "info_len": params.info_len,
        "packet_len": params.packet_len,
        "distances_m": _arr(scenario.distances),
        "channels": _arr(scenario.channels),
        "games": games,
    }
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "single_report.json")
    _write(path, json.dumps(report, indent=2) + "\n")
    return report


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="eemimo",
        description="Nash equilibria of energy-efficiency games in a multiuser MIMO uplink.")
    ap.add_argument("--config", help="TOML configuration file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--games", help="comma-separated game kinds")
    ap.add_argument("--k", type=_int_list, help="comma-separated user counts")
    ap.add_argument("--nrx", type=_int_list, help="comma-separated receive-antenna counts")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--single", action="store_true", help="solve one scenario and dump a per-user report")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args):
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    doc = tomli.loads(text) if text else {}
    if args.games is not None:
        doc["games"] = [g.strip() for g in args.games.split(",") if g.strip()]
    for flag, key in (("seed", "seed"), ("trials", "trials"), ("k", "K"), ("nrx", "n_rx")):
        v = getattr(args, flag)
        if v is not None:
            doc[key] = v
    out = doc.setdefault("output", {})
    if args.out is not None:
        out["dir"] = args.out
    if args.threads is not None:
        out["threads"] = args.threads
    if not out:
        del doc["output"]
    return parse_config(tomli_w.dumps(doc))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if args.single:
            emit_single(cfg)
            log.info("wrote %s", os.path.join(cfg.out_dir, "single_report.json"))
        else:
            summary = run(cfg)
            bad = sum(c.trials - c.n_converged for c in summary.cells.values())
            log.info("wrote %d cells to %s (%d non-converged trials)", len(summary.cells),
                     cfg.out_dir, bad)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"eemimo: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
