"""Admission and transmission rules of the RSMA semi-grant-free uplink.

The scalar functions mirror the per-user rules one to one. ``run_blocks`` is
the array version used by the Monte Carlo engine; ``run_block`` wraps it for a
single realization so both paths share one implementation.

Rates are computed as ``log1p(.) / ln 2`` (natural log, then scaled).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelRealization, SystemConfig

LN2 = math.log(2.0)


class Group(enum.Enum):
    GROUP_I = "GroupI"
    GROUP_II = "GroupII"


class SchemeKind(enum.Enum):
    RSMA_SGF = "rsma"
    OMA_GB_ONLY = "oma"
    NOMA_SGF_NO_RS = "noma"

    @classmethod
    def parse(cls, text: str) -> "SchemeKind":
        key = text.strip().lower().replace("-", "_")
        aliases = {
            "rsma": cls.RSMA_SGF,
            "rsma_sgf": cls.RSMA_SGF,
            "rsmasgf": cls.RSMA_SGF,
            "oma": cls.OMA_GB_ONLY,
            "oma_gb_only": cls.OMA_GB_ONLY,
            "omagbonly": cls.OMA_GB_ONLY,
            "noma": cls.NOMA_SGF_NO_RS,
            "noma_sgf_no_rs": cls.NOMA_SGF_NO_RS,
            "nomasgfnors": cls.NOMA_SGF_NO_RS,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown scheme {text!r}") from None


@dataclass(frozen=True)
class TransmissionOutcome:
    tau: float
    winner: int
    group: Group
    alpha: float
    rate_gf: float
    rate_gb: float
    gf_outage: bool
    gb_outage: bool
    gf_silent: bool


def _log2_1p(x):
    return np.log1p(x) / LN2


def compute_tau(config: SystemConfig, g_b: float) -> float:
    """Interference power the GB user can absorb while still meeting its target."""
    return max(0.0, g_b / config.eta_b - 1.0)


def classify(config: SystemConfig, tau: float, g_k: float) -> Group:
    # boundary P_F g_k == tau belongs to Group I
    return Group.GROUP_I if config.p_f * g_k <= tau else Group.GROUP_II


def rs_alpha(config: SystemConfig, tau: float, g_k: float) -> float:
    received = config.p_f * g_k
    if not received > tau:
        raise ValueError("rs_alpha is defined for Group II users only (P_F*g_k > tau)")
    return 1.0 - tau / received


def rate_group1(config: SystemConfig, g_k: float) -> float:
    return math.log1p(config.p_f * g_k) / LN2


def rate_group2(config: SystemConfig, tau: float, g_b: float, g_k: float) -> float:
    """Sum rate of both split streams for a Group II user."""
    received = config.p_f * g_k
    if not received > tau:
        raise ValueError("rate_group2 is defined for Group II users only (P_F*g_k > tau)")
    first = math.log1p((received - tau) / (config.p_b * g_b + tau + 1.0))
    return (first + math.log1p(tau)) / LN2


def gb_outage(config: SystemConfig, g_b):
    """GB outage indicator; the same predicate is used by every scheme.

    Under RSMA-SGF the GB user either decodes at exactly its OMA threshold
    (interference pinned at tau) or is left alone, so its outage event is the
    OMA event ``g_b < eta_b``.
    """
    return g_b < config.eta_b


def run_blocks(config: SystemConfig, g_b: np.ndarray, g_f: np.ndarray, scheme: SchemeKind) -> dict:
    """Vectorised protocol over ``n`` blocks.

    ``g_b`` has shape ``(n,)`` and ``g_f`` shape ``(n, K)`` with ascending rows.
    Returns a dict of equally long arrays keyed like ``TransmissionOutcome``.
    """
    g_b = np.asarray(g_b, dtype=float)
    g_f = np.asarray(g_f, dtype=float)
    n = g_b.shape[0]
    k_users = g_f.shape[1]
    p_b, p_f = config.p_b, config.p_f
    oma_rate_gb = _log2_1p(p_b * g_b)
    out_gb = gb_outage(config, g_b)
    winner = np.full(n, k_users - 1, dtype=np.int64)

    if scheme is SchemeKind.OMA_GB_ONLY:
        zeros = np.zeros(n)
        return dict(
            tau=zeros,
            winner=winner,
            group_ii=np.zeros(n, dtype=bool),
            alpha=zeros,
            rate_gf=zeros,
            rate_gb=oma_rate_gb,
            gf_outage=np.ones(n, dtype=bool),
            gb_outage=out_gb,
            gf_silent=np.ones(n, dtype=bool),
        )

    g_max = g_f[:, -1]
    received = p_f * g_max
    tau = np.maximum(0.0, g_b / config.eta_b - 1.0)
    group_ii = received > tau
    interferer = p_b * g_b

    if scheme is SchemeKind.RSMA_SGF:
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = np.where(group_ii, 1.0 - tau / received, 0.0)
        r1 = _log2_1p(received)
        r2 = (np.log1p(np.maximum(received - tau, 0.0) / (interferer + tau + 1.0)) + np.log1p(tau)) / LN2
        silent = group_ii & (r2 < config.rate_f)
        rate_gf = np.where(group_ii, np.where(silent, 0.0, r2), r1)
        # GB rate: Group I decodes x_B first against the whole GF signal,
        # Group II against the (1 - alpha) share, which is tau.
        rate_gb = np.where(
            silent,
            oma_rate_gb,
            np.where(group_ii, _log2_1p(interferer / (tau + 1.0)), _log2_1p(interferer / (received + 1.0))),
        )
        return dict(
            tau=tau,
            winner=winner,
            group_ii=group_ii,
            alpha=alpha,
            rate_gf=rate_gf,
            rate_gb=rate_gb,
            gf_outage=rate_gf < config.rate_f,
            gb_outage=out_gb,
            gf_silent=silent,
        )

    if scheme is SchemeKind.NOMA_SGF_NO_RS:
        # GB decoded first (alpha = 0) is feasible iff received <= tau with tau > 0,
        # and then it beats decoding GF first, which adds P_B g_b to the GF noise.
        use_b_first = (~group_ii) & (tau > 0)
        # GF decoded first (alpha = 1): GB then sees no interference and needs
        # g_b >= eta_b, since the baseline admits the GF user only when some
        # order meets the GB target. The GF stream must decode or SIC breaks,
        # hence the rate gate.
        rate_f_first = _log2_1p(received / (interferer + 1.0))
        use_f_first = (~use_b_first) & (~out_gb) & (rate_f_first >= config.rate_f)
        silent = ~(use_b_first | use_f_first)
        rate_gf = np.where(use_b_first, _log2_1p(received), np.where(use_f_first, rate_f_first, 0.0))
        rate_gb = np.where(use_b_first, _log2_1p(interferer / (received + 1.0)), oma_rate_gb)
        alpha = np.where(group_ii, 1.0, 0.0)
        return dict(
            tau=tau,
            winner=winner,
            group_ii=group_ii,
            alpha=alpha,
            rate_gf=rate_gf,
            rate_gb=rate_gb,
            gf_outage=rate_gf < config.rate_f,
            gb_outage=out_gb,
            gf_silent=silent,
        )

    raise ValueError(f"unsupported scheme {scheme!r}")


def run_block(config: SystemConfig, ch: ChannelRealization, scheme: SchemeKind) -> TransmissionOutcome:
    res = run_blocks(config, np.array([ch.g_b]), ch.g_f[np.newaxis, :], scheme)
    return TransmissionOutcome(
        tau=float(res["tau"][0]),
        winner=int(res["winner"][0]),
        group=Group.GROUP_II if res["group_ii"][0] else Group.GROUP_I,
        alpha=float(res["alpha"][0]),
        rate_gf=float(res["rate_gf"][0]),
        rate_gb=float(res["rate_gb"][0]),
        gf_outage=bool(res["gf_outage"][0]),
        gb_outage=bool(res["gb_outage"][0]),
        gf_silent=bool(res["gf_silent"][0]),
    )
