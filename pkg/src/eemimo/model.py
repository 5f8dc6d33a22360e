"""System parameters, reproducible randomness and scenario generation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .efficiency import eff, eff_prime, solve_target_sinr
from .numerics import dominant_eigenpair

__all__ = [
    "SystemParams",
    "RngHandle",
    "Scenario",
    "CHANNEL_MODELS",
    "RNG_ALGORITHM",
    "default_params",
    "sample_scenario",
    "initial_beamformer",
]

CHANNEL_MODELS = ("rayleigh_entries", "gaussian_entries")
RNG_ALGORITHM = f"numpy.random.PCG64/SeedSequence(seed, spawn_key=(stream,)) numpy=={np.__version__}"

D_MIN = 10.0
D_MAX = 1000.0


@dataclass(frozen=True)
class SystemParams:
    """Global constants of the uplink.

    ``p_max`` is the common power cap in watts; ``p_max_per_user`` optionally
    overrides it user by user. ``target_sinr`` is solved from ``packet_len``
    when left as ``None``.
    """

    n_users: int
    n_tx: int
    n_rx: int
    noise_psd: float = 1e-9
    rate: float = 1e5
    packet_len: int = 120
    info_len: Optional[int] = None
    p_max: float = 10 ** -2.5
    target_sinr: Optional[float] = None
    p_max_per_user: Optional[tuple] = None
    channel_model: str = "rayleigh_entries"
    d_min: float = D_MIN
    d_max: float = D_MAX

    def __post_init__(self):
        for name in ("n_users", "n_tx", "n_rx", "packet_len"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("noise_psd", "rate", "p_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.info_len is None:
            object.__setattr__(self, "info_len", self.packet_len)
        if not 1 <= self.info_len <= self.packet_len:
            raise ValueError(f"info_len must lie in [1, packet_len], got {self.info_len!r}")
        if self.channel_model not in CHANNEL_MODELS:
            raise ValueError(f"channel_model must be one of {CHANNEL_MODELS}, got {self.channel_model!r}")
        if not 0 < self.d_min <= self.d_max:
            raise ValueError("need 0 < d_min <= d_max")
        if self.p_max_per_user is not None:
            caps = tuple(float(c) for c in self.p_max_per_user)
            if len(caps) != self.n_users or any(not c > 0 for c in caps):
                raise ValueError("p_max_per_user needs n_users positive entries")
            object.__setattr__(self, "p_max_per_user", caps)
        if self.target_sinr is None:
            object.__setattr__(self, "target_sinr", solve_target_sinr(self.packet_len))
        g = self.target_sinr
        resid = abs(eff(g, self.packet_len) - g * eff_prime(g, self.packet_len))
        if not g > 0 or resid > 1e-9:
            raise ValueError(f"target_sinr {g!r} does not solve f(g) = g f'(g) (residual {resid:.2e})")

    @property
    def noise_var(self):
        """Per-antenna noise variance N0/2."""
        return self.noise_psd / 2.0

    def caps(self):
        """Per-user power caps as an array of length ``n_users``."""
        if self.p_max_per_user is not None:
            return np.array(self.p_max_per_user)
        return np.full(self.n_users, self.p_max)

    def with_users(self, K, n_rx=None):
        return replace(self, n_users=K, n_rx=self.n_rx if n_rx is None else n_rx,
                       p_max_per_user=None)


def default_params(K, n_rx, **overrides):
    """Uplink configuration of the reference experiment: 4 transmit antennas,
    M = L = 120, R = 100 kbit/s, N0 = 1e-9 W/Hz and a -25 dBW power cap."""
    base = dict(n_users=K, n_tx=4, n_rx=n_rx, noise_psd=1e-9, rate=1e5,
                packet_len=120, p_max=10 ** -2.5)
    base.update(overrides)
    return SystemParams(**base)


@dataclass(frozen=True)
class RngHandle:
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not 0 <= v < 2 ** 64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer")

    def generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Scenario:
    """One realization: distances in metres and channels of shape (K, N_R, N_T)."""

    params: SystemParams
    distances: np.ndarray
    channels: np.ndarray
    seed_record: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        d = np.array(self.distances, dtype=float)
        H = np.array(self.channels, dtype=float)
        if d.shape != (p.n_users,):
            raise ValueError(f"expected {p.n_users} distances, got shape {d.shape}")
        if H.shape != (p.n_users, p.n_rx, p.n_tx):
            raise ValueError(f"channels must have shape {(p.n_users, p.n_rx, p.n_tx)}, got {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValueError("channels contain non-finite entries")
        d.flags.writeable = False
        H.flags.writeable = False
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "channels", H)

    @property
    def n_users(self):
        return self.params.n_users

    @property
    def noise_var(self):
        return self.params.noise_var


def _check_distances(distances, params):
    d = np.asarray(distances, dtype=float)
    if d.shape != (params.n_users,):
        raise ValueError(f"fixed placement needs {params.n_users} distances, got {d.size}")
    if np.any(~np.isfinite(d)) or np.any(d < params.d_min) or np.any(d > params.d_max):
        raise ValueError(f"fixed distances must lie in [{params.d_min}, {params.d_max}] m")
    return d


def sample_scenario(params, rng, distances=None):
    """Draw user distances and channel matrices.

    Distances are uniform on ``[d_min, d_max]`` unless ``distances`` fixes
    them. Under ``rayleigh_entries`` every channel entry is an independent
    Rayleigh variate with mean ``1/d_k``; ``gaussian_entries`` uses zero-mean
    normal entries of standard deviation ``1/d_k`` instead.

    Distances are drawn before channels, so the first ``K`` distances of a
    stream do not depend on the antenna counts.
    """
    if not isinstance(rng, RngHandle):
        raise TypeError("rng must be an RngHandle")
    gen = rng.generator()
    K, nr, nt = params.n_users, params.n_rx, params.n_tx
    if distances is None:
        d = gen.uniform(params.d_min, params.d_max, size=K)
        placement = "uniform_distance"
    else:
        d = _check_distances(distances, params)
        placement = "fixed"
    mean = 1.0 / d
    if params.channel_model == "rayleigh_entries":
        scale = mean / np.sqrt(np.pi / 2.0)
        H = gen.rayleigh(size=(K, nr, nt)) * scale[:, None, None]
    else:
        H = gen.standard_normal(size=(K, nr, nt)) * mean[:, None, None]
    record = {"seed": rng.seed, "stream": rng.stream, "rng": RNG_ALGORITHM, "placement": placement}
    return Scenario(params=params, distances=d, channels=H, seed_record=record)


def initial_beamformer(H):
    """Dominant right singular direction of ``H`` (top eigenvector of H^T H)."""
    H = np.asarray(H, dtype=float)
    _, v = dominant_eigenpair(H.T @ H)
    return v
