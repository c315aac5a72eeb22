"""Brute-force quadrature of every term of the outage decomposition.

Each ``Q`` term is integrated directly from the joint order-statistic
densities over the GB-gain window, independently of the closed forms in
:mod:`rsma_sgf.analytic`. Nested ``scipy.integrate.quad`` calls carry an error
budget: the outer tolerance is split evenly over the nesting levels and the
reported error adds the outer estimate to the worst inner estimate times the
outer interval length.

With ``QuadratureSpec.full_depth=False`` (the default) the innermost integral
is replaced by its exponential antiderivative, which removes one nesting level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

from .analytic import AnalyticResult, Method
from .channel_model import (
    SystemConfig,
    interior_pair_max_joint_pdf,
    max_gain_cdf,
    min_max_joint_pdf,
    top_pair_joint_pdf,
)

TAIL_SPAN = 40.0


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-10
    max_subdivisions: int = 200
    full_depth: bool = False

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


@dataclass(frozen=True)
class QTermValue:
    index: int
    value: float
    est_error: float


class _Nested:
    """Runs nested quad calls and keeps the worst error seen per level."""

    def __init__(self, spec: QuadratureSpec, levels: int):
        self.spec = spec
        self.levels = levels
        self.worst = [0.0] * levels

    def quad(self, f, a, b, level=0):
        if not b > a:
            return 0.0
        tol = self.spec.abs_tol / self.levels
        if level > 0:
            # inner results get multiplied by the width of enclosing intervals (all O(1) or less)
            tol = tol / max(1.0, b - a)
        res = integrate.quad(
            f, a, b, epsabs=tol, epsrel=self.spec.rel_tol, limit=self.spec.max_subdivisions, full_output=1
        )
        value, err = res[0], res[1]
        if len(res) > 3 and res[2].get("last", 0) >= self.spec.max_subdivisions:
            raise QuadratureError(f"no convergence within {self.spec.max_subdivisions} subdivisions: {res[3]}")
        self.worst[level] = max(self.worst[level], err)
        return value

    def error(self, outer_width):
        total = self.worst[0]
        width = outer_width
        for level in range(1, self.levels):
            total += width * self.worst[level]
        return total


def _bounds(config: SystemConfig):
    """Group boundary and Group II outage bound on the strongest gain, as functions of |h_B|^2."""
    eps_b, eps_f, eta_b, p_b, p_f = config.eps_b, config.eps_f, config.eta_b, config.p_b, config.p_f
    pair = (1 + eps_f) * (1 + eps_b)

    def lower(h):
        return max(0.0, (h / eta_b - 1.0) / p_f)

    def upper(h):
        return (pair - (1.0 + p_b * h)) / p_f

    return lower, upper


def _window(config: SystemConfig):
    return config.eta_b, config.eta_b * (1.0 + config.eps_f)


def q0_quadrature(config: SystemConfig, spec: QuadratureSpec | None = None, h_upper: float | None = None) -> QTermValue:
    """All GF users in Group II and the strongest one still short of its target.

    ``h_upper`` widens the GB-gain integration window beyond its natural end,
    where the inner region is empty; used to check that claim.
    """
    spec = spec or QuadratureSpec()
    K = config.k_users
    if K < 2:
        raise ValueError("q0_quadrature requires k_users >= 2")
    lower, upper = _bounds(config)
    h_lo, h_hi = _window(config)
    if h_upper is not None:
        h_hi = h_upper
    nest = _Nested(spec, 3 if spec.full_depth else 2)

    def s0(h):
        a, b = lower(h), upper(h)
        if not b > a:
            return 0.0
        if spec.full_depth:
            return nest.quad(lambda x: nest.quad(lambda y: min_max_joint_pdf(x, y, K), x, b, level=2), a, b, level=1)
        # y-antiderivative of the min/max density
        return nest.quad(
            lambda x: K * math.exp(-x) * (math.exp(-x) * -math.expm1(-(b - x))) ** (K - 1), a, b, level=1
        )

    value = nest.quad(lambda h: math.exp(-h) * s0(h), h_lo, h_hi)
    return QTermValue(0, value, nest.error(h_hi - h_lo))


def qk_quadrature(config: SystemConfig, k: int, spec: QuadratureSpec | None = None) -> QTermValue:
    """Exactly ``k`` users in Group I (``1 <= k <= K-2``) and the strongest in outage."""
    spec = spec or QuadratureSpec()
    K = config.k_users
    if not 1 <= k <= K - 2:
        raise ValueError(f"qk_quadrature needs 1 <= k <= K-2 = {K - 2}, got {k}")
    lower, upper = _bounds(config)
    h_lo, h_hi = _window(config)
    nest = _Nested(spec, 4 if spec.full_depth else 3)
    m = K - k - 2

    def reduced(x, y, b):
        # z-antiderivative: integral of (e^-y - e^-z)^m e^-z over (y, b)
        coef = math.factorial(K) / (math.factorial(k - 1) * math.factorial(m))
        tail = (math.exp(-y) * -math.expm1(-(b - y))) ** (m + 1) / (m + 1)
        return coef * math.exp(-x) * (-math.expm1(-x)) ** (k - 1) * math.exp(-y) * tail

    def s_k(h):
        a, b = lower(h), upper(h)
        if not (a > 0 and b > a):
            return 0.0
        if spec.full_depth:
            inner = lambda x, y: nest.quad(  # noqa: E731
                lambda z: interior_pair_max_joint_pdf(x, y, z, k, K), y, b, level=3
            )
        else:
            inner = lambda x, y: reduced(x, y, b)  # noqa: E731
        return nest.quad(lambda x: nest.quad(lambda y: inner(x, y), a, b, level=2), 0.0, a, level=1)

    value = nest.quad(lambda h: math.exp(-h) * s_k(h), h_lo, h_hi)
    return QTermValue(k, value, nest.error(h_hi - h_lo))


def qk_minus1_quadrature(config: SystemConfig, spec: QuadratureSpec | None = None) -> QTermValue:
    """Only the strongest user in Group II, and in outage."""
    spec = spec or QuadratureSpec()
    K = config.k_users
    if K < 2:
        raise ValueError("qk_minus1_quadrature requires k_users >= 2")
    lower, upper = _bounds(config)
    h_lo, h_hi = _window(config)
    nest = _Nested(spec, 3 if spec.full_depth else 2)

    def s(h):
        a, b = lower(h), upper(h)
        if not (a > 0 and b > a):
            return 0.0
        if spec.full_depth:
            return nest.quad(lambda x: nest.quad(lambda y: top_pair_joint_pdf(x, y, K), a, b, level=2), 0.0, a, level=1)
        band = math.exp(-a) * -math.expm1(-(b - a))
        return nest.quad(lambda x: K * (K - 1) * math.exp(-x) * (-math.expm1(-x)) ** (K - 2) * band, 0.0, a, level=1)

    value = nest.quad(lambda h: math.exp(-h) * s(h), h_lo, h_hi)
    return QTermValue(K - 1, value, nest.error(h_hi - h_lo))


def qK_and_qKplus1_quadrature(config: SystemConfig, spec: QuadratureSpec | None = None) -> tuple[QTermValue, QTermValue]:
    """All users in Group I with the strongest in outage; and the tau = 0 window."""
    spec = spec or QuadratureSpec()
    K = config.k_users
    lower, _ = _bounds(config)
    h_lo, h_hi = _window(config)

    nest = _Nested(spec, 1)
    group_i = nest.quad(lambda h: math.exp(-h) * max_gain_cdf(lower(h), K), h_lo, h_hi)
    tail = qK_tail_quadrature(config, spec)
    q_K = QTermValue(K, group_i + tail.value, nest.error(h_hi - h_lo) + tail.est_error)

    nest = _Nested(spec, 1)
    ratio = config.eps_f / config.p_f
    value = nest.quad(lambda h: math.exp(-h) * max_gain_cdf(ratio * (1.0 + config.p_b * h), K), 0.0, h_lo)
    q_Kp1 = QTermValue(K + 1, value, nest.error(h_lo))
    return q_K, q_Kp1


def qK_tail_quadrature(config: SystemConfig, spec: QuadratureSpec | None = None) -> QTermValue:
    """Part of ``Q_K`` where ``g_b`` is past the Group II window and only the GF target binds.

    Integrated over a window truncated ``TAIL_SPAN`` beyond its start; the
    dropped mass is below ``exp(-TAIL_SPAN)`` and is added to the error.
    """
    spec = spec or QuadratureSpec()
    K = config.k_users
    _, h_hi = _window(config)
    nest = _Nested(spec, 1)
    cap = max_gain_cdf(config.eta_f, K)
    value = nest.quad(lambda h: math.exp(-h) * cap, h_hi, h_hi + TAIL_SPAN)
    return QTermValue(K, value, nest.error(TAIL_SPAN) + cap * math.exp(-(h_hi + TAIL_SPAN)))


def q_terms(config: SystemConfig, spec: QuadratureSpec | None = None) -> list[QTermValue]:
    """Every term ``Q_0 .. Q_{K+1}`` for ``K >= 2``, in index order."""
    spec = spec or QuadratureSpec()
    K = config.k_users
    if K < 2:
        raise ValueError("q_terms requires k_users >= 2")
    terms = [q0_quadrature(config, spec)]
    terms += [qk_quadrature(config, k, spec) for k in range(1, K - 1)]
    terms.append(qk_minus1_quadrature(config, spec))
    terms += list(qK_and_qKplus1_quadrature(config, spec))
    return terms


def single_user_quadrature(config: SystemConfig, spec: QuadratureSpec | None = None) -> list[QTermValue]:
    """The three GB-gain regions of the ``K = 1`` outage, integrated separately."""
    spec = spec or QuadratureSpec()
    if config.k_users != 1:
        raise ValueError("single_user_quadrature requires k_users == 1")
    _, upper = _bounds(config)
    h_lo, h_hi = _window(config)
    out = []
    nest = _Nested(spec, 1)
    v = nest.quad(lambda h: math.exp(-h) * max_gain_cdf(upper(h), 1), h_lo, h_hi)
    out.append(QTermValue(0, v, nest.error(h_hi - h_lo)))
    tail = qK_tail_quadrature(config, spec)
    out.append(QTermValue(1, tail.value, tail.est_error))
    nest = _Nested(spec, 1)
    ratio = config.eps_f / config.p_f
    v = nest.quad(lambda h: math.exp(-h) * max_gain_cdf(ratio * (1.0 + config.p_b * h), 1), 0.0, h_lo)
    out.append(QTermValue(2, v, nest.error(h_lo)))
    return out


def assemble_pout(config: SystemConfig, spec: QuadratureSpec | None = None) -> AnalyticResult:
    """Outage probability as the sum of independently integrated terms."""
    if config.k_users == 1:
        terms = single_user_quadrature(config, spec)
    else:
        terms = q_terms(config, spec)
    raw = math.fsum(t.value for t in terms)
    err = math.fsum(t.est_error for t in terms)
    return AnalyticResult(value=min(max(raw, 0.0), 1.0), raw=raw, method=Method.QUADRATURE, est_error=err)


def reduced_pout(config: SystemConfig, spec: QuadratureSpec | None = None) -> AnalyticResult:
    """Outage probability through the largest-gain CDF alone.

    Only the strongest GF user matters once it is known to win, so the whole
    probability is a single integral over the GB gain. Serves as a cheap
    cross-check that does not go through the per-group decomposition.
    """
    spec = spec or QuadratureSpec()
    K = config.k_users
    _, upper = _bounds(config)
    h_lo, h_hi = _window(config)
    ratio = config.eps_f / config.p_f
    pieces = []
    errs = []
    for f, a, b in (
        (lambda h: math.exp(-h) * max_gain_cdf(ratio * (1.0 + config.p_b * h), K), 0.0, h_lo),
        (lambda h: math.exp(-h) * max_gain_cdf(upper(h), K), h_lo, h_hi),
    ):
        nest = _Nested(spec, 1)
        pieces.append(nest.quad(f, a, b))
        errs.append(nest.error(b - a))
    pieces.append(math.exp(-h_hi) * max_gain_cdf(config.eta_f, K))
    raw = math.fsum(pieces)
    return AnalyticResult(value=min(max(raw, 0.0), 1.0), raw=raw, method=Method.QUADRATURE, est_error=math.fsum(errs))
