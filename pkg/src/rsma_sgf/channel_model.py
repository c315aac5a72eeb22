"""Rayleigh block-fading channels and the order-statistic densities of the GF gains.

All channel power gains are unit-mean exponentials (unit-power Rayleigh
amplitudes). Powers are linear everywhere in this package; noise has unit
variance, so a transmit power doubles as a transmit SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of one RSMA-SGF uplink cell.

    Parameters
    ----------
    k_users : int
        Number of contending grant-free users, ``K >= 1``.
    p_b, p_f : float
        Linear transmit powers of the grant-based user and of every GF user.
    rate_b, rate_f : float
        Target rates of the GB user and of the GF users, in bits per channel use.
    """

    k_users: int
    p_b: float
    p_f: float
    rate_b: float
    rate_f: float
    eps_b: float = field(init=False, repr=False)
    eps_f: float = field(init=False, repr=False)
    eta_b: float = field(init=False, repr=False)
    eta_f: float = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.k_users) != self.k_users or self.k_users < 1:
            raise ValueError(f"k_users must be a positive integer, got {self.k_users!r}")
        for name in ("p_b", "p_f", "rate_b", "rate_f"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        object.__setattr__(self, "k_users", int(self.k_users))
        eps_b = 2.0**self.rate_b - 1.0
        eps_f = 2.0**self.rate_f - 1.0
        object.__setattr__(self, "eps_b", eps_b)
        object.__setattr__(self, "eps_f", eps_f)
        object.__setattr__(self, "eta_b", eps_b / self.p_b)
        object.__setattr__(self, "eta_f", eps_f / self.p_f)

    def replace(self, **changes) -> "SystemConfig":
        kwargs = dict(
            k_users=self.k_users, p_b=self.p_b, p_f=self.p_f, rate_b=self.rate_b, rate_f=self.rate_f
        )
        kwargs.update(changes)
        return SystemConfig(**kwargs)


@dataclass(frozen=True)
class ChannelRealization:
    """One block: the GB gain and the ascending-ordered GF gains."""

    g_b: float
    g_f: np.ndarray

    def __post_init__(self):
        g_f = np.asarray(self.g_f, dtype=float)
        if g_f.ndim != 1 or g_f.size == 0:
            raise ValueError("g_f must be a non-empty 1-D array")
        if self.g_b < 0 or np.any(g_f < 0):
            raise ValueError("channel gains must be nonnegative")
        if np.any(np.diff(g_f) < 0):
            raise ValueError("g_f must be sorted ascending")
        object.__setattr__(self, "g_f", g_f)


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """Deterministic PCG64 stream for ``seed``, or its ``stream``-th child.

    Children are derived through ``SeedSequence`` spawn keys, so stream ``i``
    of seed ``s`` is the same no matter how many workers are in play.
    """
    if stream is None:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def sample_gains(k_users: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` blocks at once.

    Returns ``g_b`` with shape ``(n,)`` and ``g_f`` with shape ``(n, k_users)``,
    each row sorted ascending. Draws go through the inverse CDF of Exp(1) on
    uniforms. The ``n`` GB draws come first, so a given stream yields the same
    ``g_b`` for every ``k_users``.
    """
    g_b = -np.log1p(-rng.random(n))
    g_f = np.sort(-np.log1p(-rng.random((n, k_users))), axis=1)
    return g_b, g_f


def sample_realization(config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    g_b, g_f = sample_gains(config.k_users, 1, rng)
    return ChannelRealization(g_b=float(g_b[0]), g_f=g_f[0])


def min_max_joint_pdf(x: float, y: float, k_users: int) -> float:
    """Joint density of the smallest and largest of ``k_users`` Exp(1) gains."""
    if k_users < 2:
        raise ValueError("min_max_joint_pdf needs k_users >= 2")
    if x < 0 or y < 0 or x >= y:
        return 0.0
    phi0 = k_users * (k_users - 1)
    ex, ey = math.exp(-x), math.exp(-y)
    return phi0 * ex * (ex - ey) ** (k_users - 2) * ey


def top_pair_joint_pdf(x: float, y: float, k_users: int) -> float:
    """Joint density of the second-largest (``x``) and largest (``y``) gains."""
    if k_users < 2:
        raise ValueError("top_pair_joint_pdf needs k_users >= 2")
    if x < 0 or y < 0 or x > y:
        return 0.0
    phi0 = k_users * (k_users - 1)
    return phi0 * math.exp(-x) * (-math.expm1(-x)) ** (k_users - 2) * math.exp(-y)


def interior_pair_max_joint_pdf(x: float, y: float, z: float, k: int, k_users: int) -> float:
    """Joint density of the k-th, (k+1)-th and largest gains (1-based ``k``).

    Valid for ``1 <= k <= k_users - 2``; zero outside ``0 <= x <= y <= z``.
    """
    if not 1 <= k <= k_users - 2:
        raise ValueError(f"k must lie in [1, {k_users - 2}], got {k}")
    if x < 0 or not (x <= y <= z):
        return 0.0
    coef = math.factorial(k_users) / (math.factorial(k - 1) * math.factorial(k_users - k - 2))
    ex, ey, ez = math.exp(-x), math.exp(-y), math.exp(-z)
    return coef * ex * (-math.expm1(-x)) ** (k - 1) * ey * (ey - ez) ** (k_users - k - 2) * ez


def max_gain_cdf(t: float, k_users: int) -> float:
    """``Pr(max of k_users Exp(1) gains < t)``."""
    if t <= 0:
        return 0.0
    return (-math.expm1(-t)) ** k_users
