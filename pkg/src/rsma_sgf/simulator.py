"""Monte Carlo estimates of outage probabilities and ergodic rates.

Trials are cut into fixed-size chunks; chunk ``i`` always draws from RNG stream
``i`` of the seed and results are merged in chunk order, so an estimate depends
only on ``(config, scheme, trials, seed)`` and never on the worker count.
Workers are threads (numpy releases the GIL in the heavy kernels); their number
comes from the ``workers`` argument or the ``RSMA_SGF_THREADS`` environment
variable and defaults to 1.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel_model import SystemConfig, make_rng, sample_gains
from .protocol import SchemeKind, run_blocks

CHUNK = 1 << 18
DEFAULT_Z = 3.0
TRIAL_CAP = 10**8


@dataclass(frozen=True)
class OutageEstimate:
    """Empirical outage probability with a normal-approximation interval."""

    p_hat: float
    trials: int
    ci_halfwidth: float
    scheme: SchemeKind
    events: int = 0
    z: float = DEFAULT_Z

    def wilson_interval(self) -> tuple[float, float]:
        """Wilson score interval at the same ``z``; stays informative when ``p_hat`` is 0 or 1."""
        n, z = self.trials, self.z
        denom = 1.0 + z * z / n
        centre = (self.p_hat + z * z / (2 * n)) / denom
        half = z * math.sqrt(self.p_hat * (1 - self.p_hat) / n + z * z / (4 * n * n)) / denom
        return max(0.0, centre - half), min(1.0, centre + half)

    def covers(self, p: float, wilson: bool = False) -> bool:
        """Whether ``p`` lies inside the interval."""
        if wilson:
            lo, hi = self.wilson_interval()
            return lo <= p <= hi
        return abs(self.p_hat - p) <= self.ci_halfwidth


@dataclass(frozen=True)
class ErgodicRateEstimate:
    mean_rate_gf: float
    mean_rate_sum: float
    trials: int
    std_error: float
    std_error_sum: float = 0.0


@dataclass
class SweepPoint:
    config: SystemConfig
    outage: OutageEstimate | None
    ergodic: ErgodicRateEstimate | None
    error: str | None = None


@dataclass
class _Acc:
    """Per-chunk sums; merged by plain addition in chunk order."""

    n: int = 0
    gf_out: int = 0
    gb_out: int = 0
    rate_gf: float = 0.0
    rate_gf_sq: float = 0.0
    rate_sum: float = 0.0
    rate_sum_sq: float = 0.0
    q_counts: np.ndarray | None = field(default=None)


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("RSMA_SGF_THREADS", "1") or 1)
    return max(1, int(workers))


def _chunk_sizes(trials: int) -> list[int]:
    full, rest = divmod(trials, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _run_chunk(config, scheme, seed, index, size, q_terms):
    g_b, g_f = sample_gains(config.k_users, size, make_rng(seed, index))
    res = run_blocks(config, g_b, g_f, scheme)
    rate_gf = res["rate_gf"]
    rate_sum = rate_gf + res["rate_gb"]
    acc = _Acc(
        n=size,
        gf_out=int(np.count_nonzero(res["gf_outage"])),
        gb_out=int(np.count_nonzero(res["gb_outage"])),
        rate_gf=math.fsum(rate_gf),
        rate_gf_sq=math.fsum(rate_gf * rate_gf),
        rate_sum=math.fsum(rate_sum),
        rate_sum_sq=math.fsum(rate_sum * rate_sum),
    )
    if q_terms:
        acc.q_counts = _q_event_counts(config, g_b, g_f, res["gf_outage"])
    return acc


def _q_event_counts(config, g_b, g_f, gf_outage):
    # index = number of Group I users when tau > 0, K + 1 when g_b < eta_b
    K = config.k_users
    tau = np.maximum(0.0, g_b / config.eta_b - 1.0)
    n_group_i = np.count_nonzero(config.p_f * g_f <= tau[:, None], axis=1)
    index = np.where(g_b < config.eta_b, K + 1, n_group_i)
    return np.bincount(index[gf_outage], minlength=K + 2)


def _accumulate(config, scheme, trials, seed, workers=None, q_terms=False) -> _Acc:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    sizes = _chunk_sizes(int(trials))
    jobs = [(config, scheme, seed, i, size, q_terms) for i, size in enumerate(sizes)]
    n_workers = min(_worker_count(workers), len(jobs))
    if n_workers == 1:
        parts = [_run_chunk(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            parts = list(pool.map(lambda job: _run_chunk(*job), jobs))
    total = _Acc()
    for part in parts:
        total.n += part.n
        total.gf_out += part.gf_out
        total.gb_out += part.gb_out
        total.rate_gf += part.rate_gf
        total.rate_gf_sq += part.rate_gf_sq
        total.rate_sum += part.rate_sum
        total.rate_sum_sq += part.rate_sum_sq
        if part.q_counts is not None:
            total.q_counts = part.q_counts if total.q_counts is None else total.q_counts + part.q_counts
    return total


def _estimate(events: int, trials: int, scheme: SchemeKind, z: float) -> OutageEstimate:
    p = events / trials
    return OutageEstimate(
        p_hat=p, trials=trials, ci_halfwidth=z * math.sqrt(p * (1 - p) / trials), scheme=scheme, events=events, z=z
    )


def _escalating(count, config, scheme, trials, seed, z, workers, cap):
    # redraw from scratch at each doubling so the result stays a pure function of the final trial count
    while True:
        acc = _accumulate(config, scheme, trials, seed, workers)
        est = _estimate(count(acc), trials, scheme, z)
        if est.p_hat > 0 and est.ci_halfwidth < 0.1 * est.p_hat:
            return est
        if trials >= cap:
            return est
        trials = min(2 * trials, cap)


def estimate_outage(
    config: SystemConfig,
    scheme: SchemeKind,
    trials: int,
    seed: int,
    *,
    z: float = DEFAULT_Z,
    workers: int | None = None,
    escalate: bool = False,
    trial_cap: int = TRIAL_CAP,
) -> OutageEstimate:
    """Fraction of blocks in which the admitted GF user misses its target rate.

    Under ``OMA_GB_ONLY`` no GF user transmits and the GF outage is 1 by
    convention. With ``escalate=True`` the trial count doubles until the
    interval half-width drops below a tenth of ``p_hat`` or ``trial_cap`` is
    reached.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if scheme is SchemeKind.OMA_GB_ONLY:
        return _estimate(trials, trials, scheme, z)
    if escalate:
        return _escalating(lambda acc: acc.gf_out, config, scheme, trials, seed, z, workers, trial_cap)
    return _estimate(_accumulate(config, scheme, trials, seed, workers).gf_out, trials, scheme, z)


def estimate_gb_outage(
    config: SystemConfig,
    scheme: SchemeKind,
    trials: int,
    seed: int,
    *,
    z: float = DEFAULT_Z,
    workers: int | None = None,
) -> OutageEstimate:
    """Fraction of blocks in which the GB user misses its target rate."""
    return _estimate(_accumulate(config, scheme, trials, seed, workers).gb_out, trials, scheme, z)


def _ergodic_from(acc: _Acc) -> ErgodicRateEstimate:
    n = acc.n

    def stderr(s, sq):
        var = max(sq / n - (s / n) ** 2, 0.0) * n / max(n - 1, 1)
        return math.sqrt(var / n)

    return ErgodicRateEstimate(
        mean_rate_gf=acc.rate_gf / n,
        mean_rate_sum=acc.rate_sum / n,
        trials=n,
        std_error=stderr(acc.rate_gf, acc.rate_gf_sq),
        std_error_sum=stderr(acc.rate_sum, acc.rate_sum_sq),
    )


def estimate_ergodic(
    config: SystemConfig, scheme: SchemeKind, trials: int, seed: int, *, workers: int | None = None
) -> ErgodicRateEstimate:
    """Mean GF rate and mean GF+GB sum rate, in bits per channel use."""
    return _ergodic_from(_accumulate(config, scheme, trials, seed, workers))


def simulate_point(
    config: SystemConfig, scheme: SchemeKind, trials: int, seed: int, *, z: float = DEFAULT_Z, workers=None
) -> tuple[OutageEstimate, OutageEstimate, ErgodicRateEstimate]:
    """GF outage, GB outage and ergodic rates from one shared set of realizations."""
    acc = _accumulate(config, scheme, trials, seed, workers)
    gf_events = trials if scheme is SchemeKind.OMA_GB_ONLY else acc.gf_out
    return _estimate(gf_events, trials, scheme, z), _estimate(acc.gb_out, trials, scheme, z), _ergodic_from(acc)


def q_event_estimates(config: SystemConfig, trials: int, seed: int, *, z: float = DEFAULT_Z, workers=None) -> list[OutageEstimate]:
    """Empirical probability of each outage term ``Q_0 .. Q_{K+1}`` under RSMA-SGF.

    A block counts towards ``Q_k`` when the GF user is in outage, ``g_b >=
    eta_b`` and exactly ``k`` users fall in Group I; towards ``Q_{K+1}`` when
    the GF user is in outage and ``g_b < eta_b``.
    """
    acc = _accumulate(config, SchemeKind.RSMA_SGF, trials, seed, workers, q_terms=True)
    return [_estimate(int(c), acc.n, SchemeKind.RSMA_SGF, z) for c in acc.q_counts]


def sweep(
    config_grid: list[SystemConfig], scheme: SchemeKind, trials: int, seed: int, *, z: float = DEFAULT_Z, workers=None
) -> list[SweepPoint]:
    """Outage and ergodic estimates for every point, in grid order.

    Every point reuses ``seed`` so neighbouring points share realizations,
    which keeps swept curves smooth. A failing point is reported in its row
    and does not stop the sweep.
    """
    if not config_grid:
        raise ValueError("config_grid must not be empty")
    rows = []
    for config in config_grid:
        try:
            outage, _, ergodic = simulate_point(config, scheme, trials, seed, z=z, workers=workers)
            rows.append(SweepPoint(config, outage, ergodic))
        except Exception as exc:  # noqa: BLE001 - reported per point
            rows.append(SweepPoint(config, None, None, f"{type(exc).__name__}: {exc}"))
    return rows
