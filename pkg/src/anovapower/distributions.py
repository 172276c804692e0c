"""Central and noncentral F-distribution evaluation.

Everything here works on plain floats. Degrees of freedom may be real, which
the real-parameter sample-size search and the quasi-F test both need.

The noncentral F CDF is the Poisson mixture of regularized incomplete beta
functions::

    P(F <= x) = sum_j  exp(-lam/2) (lam/2)**j / j!  *  I_u(df1/2 + j, df2/2)

with ``u = df1*x / (df1*x + df2)``. The sum is evaluated outward from the
Poisson mode, and consecutive beta terms come from the standard recurrence
``I_u(p+1, q) = I_u(p, q) - u**p (1-u)**q / (p B(p, q))``, so each call costs
one continued-fraction evaluation plus a short loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import DomainError

__all__ = [
    "FParams",
    "regularized_incomplete_beta",
    "central_f_cdf",
    "central_f_quantile",
    "noncentral_f_cdf",
    "power_from_lambda",
    "find_increasing_root",
]

_EPS = 1e-16
_FPMIN = 1e-300
_CF_MAXITER = 20000
_SERIES_TOL = 1e-14


@dataclass(frozen=True)
class FParams:
    """Parameters of a (possibly noncentral) F-distribution."""

    df1: float
    df2: float
    lam: float = 0.0

    def __post_init__(self):
        if not (self.df1 > 0 and math.isfinite(self.df1)):
            raise DomainError(f"df1 must be a positive finite number, got {self.df1!r}")
        if not (self.df2 > 0 and math.isfinite(self.df2)):
            raise DomainError(f"df2 must be a positive finite number, got {self.df2!r}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise DomainError(f"noncentrality must be finite and >= 0, got {self.lam!r}")


def _log_beta(p: float, q: float) -> float:
    return math.lgamma(p) + math.lgamma(q) - math.lgamma(p + q)


def _betacf(x: float, p: float, q: float) -> float:
    # Modified Lentz evaluation of the incomplete beta continued fraction.
    qab = p + q
    qap = p + 1.0
    qam = p - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (q - m) * x / ((qam + m2) * (p + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(p + m) * (qab + m) * x / ((p + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise DomainError(f"incomplete beta continued fraction did not converge (p={p}, q={q}, x={x})")


def _stirling_delta(z: float) -> float:
    """``lgamma(z)`` minus its Stirling approximation, for ``z >= 10``."""
    r = 1.0 / (z * z)
    return (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / z


def _xlog_ratio(p: float, x: float, x0: float) -> float:
    # p * log(x / x0), accurate when x is close to x0
    return p * math.log1p((x - x0) / x0)


def _front(x: float, y: float, p: float, q: float) -> float:
    """``x**p * y**q / B(p, q)`` evaluated in log space.

    For large shapes the log-gammas cancel badly, so the Stirling form
    centered at ``p / (p + q)`` is used instead.
    """
    if min(p, q) < 10.0:
        return math.exp(p * math.log(x) + q * math.log(y) - _log_beta(p, q))
    s = p + q
    log_front = (
        _xlog_ratio(p, x, p / s)
        + _xlog_ratio(q, y, q / s)
        + 0.5 * math.log(p * q / (2.0 * math.pi * s))
        - (_stirling_delta(p) + _stirling_delta(q) - _stirling_delta(s))
    )
    return math.exp(log_front)


def _ibeta(x: float, y: float, p: float, q: float) -> float:
    """I_x(p, q) with ``y = 1 - x`` supplied separately to avoid cancellation."""
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    if x < (p + 1.0) / (p + q + 2.0):
        return _front(x, y, p, q) * _betacf(x, p, q) / p
    return 1.0 - _front(x, y, p, q) * _betacf(y, q, p) / q


def regularized_incomplete_beta(x: float, p: float, q: float) -> float:
    """Regularized incomplete beta function ``I_x(p, q)``.

    Uses the continued fraction directly when ``x < (p+1)/(p+q+2)`` and the
    reflection ``I_x(p, q) = 1 - I_{1-x}(q, p)`` otherwise.

    Raises:
        DomainError: if ``x`` is outside ``[0, 1]`` or ``p``, ``q`` are not positive.
    """
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    if not (p > 0 and q > 0):
        raise DomainError(f"shape parameters must be positive, got p={p!r}, q={q!r}")
    return _ibeta(x, 1.0 - x, p, q)


def _beta_args(x: float, df1: float, df2: float) -> tuple[float, float]:
    s = df1 * x + df2
    return df1 * x / s, df2 / s


def central_f_cdf(x: float, df1: float, df2: float) -> float:
    """CDF of the central F-distribution."""
    return noncentral_f_cdf(x, FParams(df1, df2, 0.0))


def noncentral_f_cdf(x: float, params: FParams) -> float:
    """CDF of the noncentral F-distribution at ``x``.

    For ``params.lam == 0`` the Poisson mixture collapses to its single
    central term, so this also serves as the central CDF.
    """
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    p = params.df1 / 2.0
    q = params.df2 / 2.0
    h = params.lam / 2.0
    u, y = _beta_args(x, params.df1, params.df2)
    if h == 0.0:
        return _ibeta(u, y, p, q)
    if u <= 0.0:
        return 0.0

    mode = int(h)
    w_mode = math.exp(-h + mode * math.log(h) - math.lgamma(mode + 1.0))
    i_mode = _ibeta(u, y, p + mode, q)
    # t(p) = I_u(p, q) - I_u(p+1, q)
    t_mode = _front(u, y, p + mode, q) / (p + mode) if y > 0.0 else 0.0

    total = w_mode * i_mode
    mass = w_mode

    # Downward from the mode: I increases, weights decrease geometrically.
    w, i, t = w_mode, i_mode, t_mode
    for j in range(mode - 1, -1, -1):
        pj = p + j
        t = t * (pj + 1.0) / (u * (pj + q))
        i = min(1.0, i + t)
        w = w * (j + 1) / h
        total += w * i
        mass += w
        if w < 1e-20 * mass:
            break

    # Upward from the mode until the unvisited Poisson mass is negligible.
    w, i, t = w_mode, i_mode, t_mode
    j = mode
    max_j = mode + 1000 + int(60.0 * math.sqrt(h + 1.0))
    while j < max_j:
        pj = p + j
        i = max(0.0, i - t)
        t = t * u * (pj + q) / (pj + 1.0)
        j += 1
        w = w * h / j
        total += w * i
        mass += w
        if (1.0 - mass) * i <= _SERIES_TOL or w * i < 1e-300:
            break
    return min(1.0, max(0.0, total))


def find_increasing_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float = 1e-13,
    ftol: float = 0.0,
    maxiter: int = 200,
) -> float:
    """Root of a non-decreasing function on a sign-changing bracket.

    Illinois-modified regula falsi with a bisection step whenever the
    bracket fails to halve, so the bracket always shrinks geometrically.
    Requires ``f(lo) <= 0 <= f(hi)``.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo > 0 or fhi < 0:
        raise DomainError(f"root is not bracketed by [{lo}, {hi}] (f={flo}, {fhi})")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    side = 0
    width = hi - lo
    for _ in range(maxiter):
        if hi - lo <= xtol * max(1.0, abs(lo), abs(hi)):
            break
        x = (lo * fhi - hi * flo) / (fhi - flo)
        if not (lo < x < hi) or (hi - lo) > 0.5 * width:
            x = 0.5 * (lo + hi)
            width = hi - lo
        fx = f(x)
        if abs(fx) <= ftol or fx == 0:
            return x
        if fx < 0:
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
    return lo if abs(flo) < abs(fhi) else hi


def central_f_quantile(gamma: float, df1: float, df2: float) -> float:
    """Quantile ``x`` with ``central_f_cdf(x, df1, df2) == gamma``."""
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    FParams(df1, df2)

    def g(t: float) -> float:
        return central_f_cdf(math.exp(t), df1, df2) - gamma

    lo, hi, step = 0.0, 0.0, 1.0
    while g(lo) > 0:
        lo -= step
        step *= 2.0
        if lo < -700:
            raise DomainError("quantile underflows double precision")
    step = 1.0
    while g(hi) < 0:
        hi += step
        step *= 2.0
        if hi > 700:
            raise DomainError("quantile overflows double precision")
    return math.exp(find_increasing_root(g, lo, hi, xtol=1e-14))


def power_from_lambda(alpha: float, params: FParams) -> float:
    """Power ``P(F > F_{df1, df2; 1-alpha})`` under noncentrality ``params.lam``."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    crit = central_f_quantile(1.0 - alpha, params.df1, params.df2)
    return 1.0 - noncentral_f_cdf(crit, params)
