"""Closed-form and high-SNR outage probability of the admitted GF user.

The exact expression is a signed binomial sum whose terms are far larger than
the result at high SNR, so every exact evaluation reports a condition number
``sum(|terms|) / |sum|``. Terms are accumulated with ``math.fsum``; when that
is not enough, pass ``dps`` to redo the evaluation in mpmath at the given
number of decimal digits, or call :func:`theorem1_trusted`.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from math import comb

import mpmath

from .channel_model import SystemConfig

EPS64 = 2.0**-52
NU_SWITCH = 1e-8


class Method(enum.Enum):
    THEOREM1 = "theorem1"
    COROLLARY1 = "corollary1"
    THEOREM2 = "theorem2"
    COROLLARY2 = "corollary2"
    COROLLARY3 = "corollary3"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class AnalyticResult:
    value: float
    raw: float
    method: Method
    condition_flag: float = 1.0
    est_error: float = 0.0
    dps: int | None = None

    @property
    def unit_roundoff(self) -> float:
        return EPS64 if self.dps is None else 10.0 ** (-self.dps)

    @property
    def trusted(self) -> bool:
        """Whether cancellation leaves at least three good digits."""
        return self.condition_flag * self.unit_roundoff < 1e-3 * abs(self.value)


class AnalyticRangeError(ArithmeticError):
    """Raw closed-form value fell outside [0, 1] by more than its rounding budget."""


@dataclass(frozen=True)
class NuArgs:
    ell: int
    mu: float


class _FloatOps:
    exp = staticmethod(math.exp)
    expm1 = staticmethod(math.expm1)

    @staticmethod
    def nu_switch():
        return NU_SWITCH

    @staticmethod
    def num(x):
        return float(x)

    @staticmethod
    def total(terms):
        return math.fsum(terms)


class _MpOps:
    exp = staticmethod(mpmath.exp)
    expm1 = staticmethod(mpmath.expm1)

    @staticmethod
    def nu_switch():
        # keeps the dropped second-order term below the working precision
        return mpmath.mpf(10) ** (-(mpmath.mp.dps // 2 + 1))

    @staticmethod
    def num(x):
        return mpmath.mpf(x)

    @staticmethod
    def total(terms):
        return mpmath.fsum(terms)


def _nu(ops, ell, mu, eta_b, eps_f, p_f):
    c = ell / (p_f * eta_b) + mu + 1
    width = eta_b * eps_f
    if abs(c) * eta_b * (1 + eps_f) < ops.nu_switch():
        # first-order expansion of the defining integral around c = 0
        return width * (1 - c * eta_b * (1 + eps_f / 2))
    return ops.exp(-eta_b * c) * (-ops.expm1(-c * width)) / c


def nu(config: SystemConfig, ell: int, mu: float) -> float:
    """``integral of exp(-c x) over (eta_B, eta_B (1 + eps_F))``, ``c = ell/(P_F eta_B) + mu + 1``.

    This is the truncated expectation of ``exp(-(ell/(P_F eta_B) + mu) |h_B|^2)``
    over the GB-gain window in which Group II outage is possible.
    """
    eps_b, eps_f, eta_b, eta_f, p_b, p_f = _consts(_FloatOps, config)
    return _nu(_FloatOps, ell, mu, eta_b, eps_f, p_f)


def _consts(ops, config):
    # derived thresholds are recomputed in working precision so the signed
    # sums see exactly consistent parameters
    n = ops.num
    p_b, p_f = n(config.p_b), n(config.p_f)
    eps_b = n(2) ** n(config.rate_b) - 1
    eps_f = n(2) ** n(config.rate_f) - 1
    return eps_b, eps_f, eps_b / p_b, eps_f / p_f, p_b, p_f


def _block_terms(ops, config: SystemConfig, block: str, k: int | None = None) -> list:
    """Signed summands of one block of the exact expression.

    Blocks: ``"q0"``, ``"qk"`` (needs ``1 <= k <= K-2``), ``"qkm1"``,
    ``"qK"`` and ``"qKp1"``.
    """
    K = config.k_users
    eps_b, eps_f, eta_b, eta_f, p_b, p_f = _consts(ops, config)
    exp = ops.exp
    nu_ = lambda ell, mu: _nu(ops, ell, mu, eta_b, eps_f, p_f)  # noqa: E731
    pair = (1 + eps_b) * (1 + eps_f)
    terms = []
    if block == "q0":
        for ell in range(K + 1):
            mu1 = exp((K - ell * pair) / p_f)
            mu2 = (K - ell) / (p_f * eta_b) - p_b * ell / p_f
            terms.append((-1) ** ell * comb(K, ell) * mu1 * nu_(0, mu2))
    elif block == "qk":
        if k is None or not 1 <= k <= K - 2:
            raise ValueError(f"block qk needs 1 <= k <= {K - 2}")
        phi_k = comb(K, k)
        for n_ in range(K - k + 1):
            mu3 = exp((K - k - n_ * pair) / p_f)
            mu4 = (K - k - n_) / (p_f * eta_b) - n_ * p_b / p_f
            for ell in range(k + 1):
                sign = (-1) ** (n_ + ell)
                terms.append(sign * phi_k * comb(K - k, n_) * comb(k, ell) * exp(ell / p_f) * mu3 * nu_(ell, mu4))
    elif block == "qkm1":
        mu5 = 1 / (p_f * eta_b)
        mu6 = -p_b / p_f
        shrink = exp(-(eps_b + eps_f + eps_b * eps_f) / p_f)
        for ell in range(K):
            coef = (-1) ** ell * K * comb(K - 1, ell) * exp(ell / p_f)
            terms.append(coef * exp(1 / p_f) * nu_(ell, mu5))
            terms.append(-coef * shrink * nu_(ell, mu6))
    elif block == "qK":
        for ell in range(K + 1):
            terms.append((-1) ** ell * comb(K, ell) * exp(ell / p_f) * nu_(ell, 0))
        terms.append((-ops.expm1(-eta_f)) ** K * exp(-eta_b * (1 + eps_f)))
    elif block == "qKp1":
        for ell in range(K + 1):
            rate = 1 + ell * eta_f * p_b
            terms.append((-1) ** ell * comb(K, ell) * exp(-ell * eta_f) * (-ops.expm1(-rate * eta_b)) / rate)
    else:
        raise ValueError(f"unknown block {block!r}")
    return terms


def _summarise(ops, terms):
    total = ops.total(terms)
    mag = ops.total(abs(t) for t in terms)
    cond = float(mag / abs(total)) if total != 0 else math.inf
    return float(total), max(cond, 1.0)


def theorem1_block(config: SystemConfig, block: str, k: int | None = None, dps: int | None = None) -> tuple[float, float]:
    """Value and condition number of one closed-form Q block (``K >= 2``)."""
    if config.k_users < 2:
        raise ValueError("closed-form blocks require k_users >= 2")
    if dps is None:
        return _summarise(_FloatOps, _block_terms(_FloatOps, config, block, k))
    with mpmath.workdps(dps):
        return _summarise(_MpOps, _block_terms(_MpOps, config, block, k))


def _theorem1_terms(ops, config):
    K = config.k_users
    terms = _block_terms(ops, config, "q0")
    for k in range(1, K - 1):
        terms += _block_terms(ops, config, "qk", k)
    for block in ("qkm1", "qK", "qKp1"):
        terms += _block_terms(ops, config, block)
    return terms


def _corollary1_terms(ops, config):
    eps_b, eps_f, eta_b, eta_f, p_b, p_f = _consts(ops, config)
    exp = ops.exp
    shrink = exp(-(eps_b + eps_f + eps_b * eps_f) / p_f)
    rate = 1 + p_b * eta_f
    return [
        ops.num(1),
        -shrink * _nu(ops, 0, -p_b / p_f, eta_b, eps_f, p_f),
        -exp(-eta_f - eta_b * (1 + eps_f)),
        -exp(-eta_f) * (-ops.expm1(-eta_b - eps_b * eta_f)) / rate,
    ]


def _finish(raw, cond: float, method: Method, check: bool, dps: int | None) -> AnalyticResult:
    unit = EPS64 if dps is None else 10.0 ** (-dps)
    tol = 16 * cond * unit
    raw = float(raw)
    if check and math.isnan(raw):
        raise AnalyticRangeError(f"{method.value} overflows float64; use a dps or the trusted evaluator")
    if check and not (-tol <= raw <= 1 + tol):
        raise AnalyticRangeError(f"{method.value} evaluated to {raw!r}, outside [0, 1] beyond tolerance {tol:.3g}")
    return AnalyticResult(value=min(max(raw, 0.0), 1.0), raw=raw, method=method, condition_flag=cond, dps=dps)


def _evaluate(terms_fn, config, method, dps, check):
    if dps is None:
        try:
            raw, cond = _summarise(_FloatOps, terms_fn(_FloatOps, config))
        except OverflowError:
            # individual terms exceed float64 at very low power; only mpmath can sum them
            raw, cond = math.nan, math.inf
    else:
        with mpmath.workdps(dps):
            raw, cond = _summarise(_MpOps, terms_fn(_MpOps, config))
    return _finish(raw, cond, method, check, dps)


def theorem1_pout(config: SystemConfig, dps: int | None = None, check: bool = True) -> AnalyticResult:
    """Exact outage probability of the admitted GF user for ``K >= 2``.

    Parameters
    ----------
    dps : int, optional
        Evaluate in mpmath with this many decimal digits instead of float64.
    check : bool
        Raise :class:`AnalyticRangeError` when the raw value leaves [0, 1] by
        more than the rounding the condition number allows.
    """
    if config.k_users < 2:
        raise ValueError("theorem1_pout requires k_users >= 2; use corollary1_pout for K = 1")
    return _evaluate(_theorem1_terms, config, Method.THEOREM1, dps, check)


def corollary1_pout(config: SystemConfig, dps: int | None = None, check: bool = True) -> AnalyticResult:
    """Exact outage probability of a lone GF user (``K = 1``)."""
    if config.k_users != 1:
        raise ValueError("corollary1_pout requires k_users == 1")
    return _evaluate(_corollary1_terms, config, Method.COROLLARY1, dps, check)


def _escalate(fn, config, max_dps):
    res = fn(config, check=False)
    if res.trusted:
        return res
    cond = res.condition_flag if math.isfinite(res.condition_flag) else 1e300
    dps = 20 + int(math.log10(cond))
    while dps <= max_dps:
        res = fn(config, dps=dps, check=False)
        if res.trusted:
            return res
        dps *= 2
    raise ArithmeticError(f"{fn.__name__} did not stabilise within {max_dps} digits")


def theorem1_trusted(config: SystemConfig, max_dps: int = 400) -> AnalyticResult:
    """Theorem 1 value, re-evaluated in mpmath until cancellation is harmless."""
    return _escalate(theorem1_pout, config, max_dps)


def exact_pout(config: SystemConfig, trusted: bool = False) -> AnalyticResult:
    """Theorem 1 for ``K >= 2``, Corollary 1 for ``K = 1``."""
    if config.k_users == 1:
        return _escalate(corollary1_pout, config, 400) if trusted else corollary1_pout(config)
    return theorem1_trusted(config) if trusted else theorem1_pout(config)


def _warn_unequal_powers(config: SystemConfig, name: str):
    if not math.isclose(config.p_b, config.p_f, rel_tol=1e-12):
        warnings.warn(f"{name} assumes P_B == P_F; got P_B={config.p_b}, P_F={config.p_f}", stacklevel=3)


def theorem2_blocks(config: SystemConfig) -> dict[str, float]:
    """High-SNR approximations of each Q block, keyed like :func:`theorem1_block`.

    ``"qk"`` is the sum over ``1 <= k <= K-2`` (zero for ``K = 2``).
    """
    K = config.k_users
    if K < 2:
        raise ValueError("theorem2_approx requires k_users >= 2")
    eb, ef, p = config.eps_b, config.eps_f, config.p_f
    pk1 = p ** (K + 1)
    q0 = (
        eb
        * (1 + eb) ** K
        / pk1
        * math.fsum(
            comb(K, ell) * (-1) ** ell / (ell + 1) * ((1 + ef) ** (K + 1) - (1 + ef) ** (K - ell))
            for ell in range(K + 1)
        )
    )
    qk_terms = []
    for k in range(1, K - 1):
        inner = math.fsum(
            comb(K - k, n_)
            * (-1) ** n_
            * (1 + ef) ** (K - k - n_)
            * math.fsum(
                comb(k, ell) * (-1) ** ell * ((1 + ef) ** (n_ + ell + 1) - 1) / (n_ + ell + 1) for ell in range(k + 1)
            )
            for n_ in range(K - k + 1)
        )
        qk_terms.append(comb(K, k) * eb * (1 + eb) ** (K - k) * (-1) ** k / pk1 * inner)
    qk = math.fsum(qk_terms)
    # the subtracted term integrates (eps_B^-1 + 1) x (x - eps_B/P)^(K-1) eps_B^-(K-1),
    # which carries eps_B (1 + eps_B) overall
    qkm1 = eb * ef**K * (1 + eb) * (1 + ef) / pk1 - ef**K * eb * (1 + eb) * (K * (1 + ef) + 1) / (pk1 * (K + 1))
    qK = eb * ef ** (K + 1) / (pk1 * (K + 1)) + ef**K / p**K - eb * ef**K * (1 + ef) / pk1
    qKp1 = ef**K * ((1 + eb) ** (K + 1) - 1) / (pk1 * (K + 1)) - ef**K * (
        (eb * (K + 1) - 1) * (1 + eb) ** (K + 1) + 1
    ) / (p ** (K + 2) * (K + 2) * (K + 1))
    return {"q0": q0, "qk": qk, "qkm1": qkm1, "qK": qK, "qKp1": qKp1}


def theorem2_approx(config: SystemConfig) -> AnalyticResult:
    """High-SNR approximation of the exact outage for ``K >= 2``, ``P_B = P_F``."""
    _warn_unequal_powers(config, "theorem2_approx")
    blocks = theorem2_blocks(config)
    raw = math.fsum(blocks.values())
    return AnalyticResult(value=min(max(raw, 0.0), 1.0), raw=raw, method=Method.THEOREM2)


def corollary2_approx(config: SystemConfig) -> AnalyticResult:
    """Leading high-SNR term ``(eps_F / P_F) ** K``: diversity order K."""
    if config.k_users < 2:
        raise ValueError("corollary2_approx requires k_users >= 2")
    raw = config.eta_f**config.k_users
    return AnalyticResult(value=min(raw, 1.0), raw=raw, method=Method.COROLLARY2)


def corollary3_approx(config: SystemConfig) -> AnalyticResult:
    if config.k_users != 1:
        raise ValueError("corollary3_approx requires k_users == 1")
    raw = config.eta_f
    return AnalyticResult(value=min(raw, 1.0), raw=raw, method=Method.COROLLARY3)


def nu_args(config: SystemConfig, args: NuArgs) -> float:
    if not 0 <= args.ell <= config.k_users:
        raise ValueError("ell must lie in [0, K]")
    return nu(config, args.ell, args.mu)
