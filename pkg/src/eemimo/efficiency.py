"""BPSK packet efficiency function, its derivative, the target SINR and utility."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["eff", "eff_prime", "solve_target_sinr", "utility", "to_db"]


def _check_gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError(f"SINR must be non-negative, got {gamma!r}")
    return g


def _log_one_minus_exp(gamma):
    # log(1 - e^{-g}); -inf at g = 0
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-gamma))


def eff(gamma, M):
    """Packet success proxy ``(1 - e^{-gamma})**M``, evaluated in log space."""
    g = _check_gamma(gamma)
    out = np.exp(M * _log_one_minus_exp(g))
    return float(out) if out.ndim == 0 else out


def eff_prime(gamma, M):
    """Derivative ``M e^{-gamma} (1 - e^{-gamma})**(M-1)``."""
    g = _check_gamma(gamma)
    if M == 1:
        out = np.exp(-g)
    else:
        out = M * np.exp(-g + (M - 1) * _log_one_minus_exp(g))
    return float(out) if np.ndim(out) == 0 else out


def solve_target_sinr(M, max_iter=200):
    """Unique positive root of ``f(g) = g f'(g)`` for packet length ``M >= 2``.

    Dividing through by ``(1 - e^{-g})**(M-1)`` leaves ``e^g = 1 + M g``,
    which is bisected on ``[1e-6, 10 + 2 ln M]``.
    """
    if int(M) != M or M < 2:
        raise ValueError(
            f"packet length must be an integer >= 2, got {M!r}: for M = 1 the "
            "equation e^g = 1 + g has no positive root"
        )
    M = int(M)

    def h(g):
        return math.expm1(g) - M * g

    lo, hi = 1e-6, 10.0 + 2.0 * math.log(M)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def utility(gamma, p, params):
    """Energy efficiency ``R (L/M) f(gamma) / p`` in bits per joule."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0):
        raise ValueError(f"transmit power must be non-negative, got {p!r}")
    f = np.asarray(eff(gamma, params.packet_len))
    scale = params.rate * params.info_len / params.packet_len
    with np.errstate(divide="ignore", invalid="ignore"):
        # p -> 0 limit is 0 because f(gamma) = o(gamma)
        out = np.where(p_arr > 0, scale * f / np.where(p_arr > 0, p_arr, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def to_db(x):
    return 10.0 * np.log10(x)
