"""Special functions, quadrature and root finding.

The Bessel-K and Tricomi-U functions are evaluated from their Laplace-type
integral representations.  Both integrands are handled in the log domain:
the peak of the log-integrand is located analytically (or by a bracketed
solve), the integrand is rescaled by its peak value and only the window
where it exceeds ``exp(-_LOG_CUTOFF)`` of the peak is integrated.  This keeps
the functions usable for orders/parameters in the hundreds, where the raw
values over- or underflow double precision.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate as _spi
from scipy.optimize import brentq

from .exceptions import BracketError, ConvergenceError, DomainError

__all__ = [
    "QuadratureSpec",
    "Bracket",
    "log_gamma",
    "bessel_k",
    "log_bessel_k",
    "tricomi_u",
    "log_tricomi_u",
    "integrate",
    "find_root_monotone",
    "find_roots_monotone",
    "DEFAULT_RTOL",
    "ROOT_TOL",
]

DEFAULT_RTOL = 1e-9
ROOT_TOL = 1e-12

# integrand tails below exp(-45) of the peak are dropped
_LOG_CUTOFF = 45.0
# tighter than DEFAULT_RTOL so special-function error stays well below 1e-9
_SPECIAL_RTOL = 1e-12

_LOG_MAX_FLOAT = math.log(np.finfo(float).max)

_KINDS = ("finite", "semi-infinite", "log-semi-infinite")


@dataclass(frozen=True)
class QuadratureSpec:
    """How :func:`integrate` should treat a one-dimensional integral.

    Parameters
    ----------
    kind : {'finite', 'semi-infinite', 'log-semi-infinite'}
        ``log-semi-infinite`` integrates in ``u = log y``; use it for
        integrable singularities at the origin or very wide scale ranges.
    rel_tol : float
        Requested relative tolerance, in ``(0, 1e-3]``.
    max_subdivisions : int
        Upper bound on adaptive interval bisections.
    abs_tol : float
        Absolute floor for the accepted error (for integrals that vanish).
    """

    kind: str = "finite"
    rel_tol: float = DEFAULT_RTOL
    max_subdivisions: int = 200
    abs_tol: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if not 0.0 < self.rel_tol <= 1e-3:
            raise DomainError("rel_tol must lie in (0, 1e-3]")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")
        if self.abs_tol < 0.0:
            raise DomainError("abs_tol must be non-negative")


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise BracketError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for positive real ``x``."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


# ---------------------------------------------------------------------------
# peaked log-domain integrals
# ---------------------------------------------------------------------------

def _curvature_width(h, peak, hp):
    d = 1e-4 * max(1.0, abs(peak))
    c = (h(peak + d) - 2.0 * hp + h(peak - d)) / (d * d)
    if c < 0.0 and math.isfinite(c):
        return 1.0 / math.sqrt(-c)
    return 0.1


def _edge(h, hp, peak, direction, bound, step):
    t = peak
    while True:
        t_new = t + direction * step
        if (direction > 0 and t_new >= bound) or (direction < 0 and t_new <= bound):
            return bound
        if h(t_new) - hp < -_LOG_CUTOFF:
            return t_new
        t = t_new
        step *= 2.0


def _log_peaked_integral(h, peak, lo, hi, rel_tol=_SPECIAL_RTOL):
    """log of int_lo^hi exp(h(t)) dt for a unimodal ``h`` peaking at ``peak``."""
    hp = h(peak)
    width = _curvature_width(h, peak, hp) if lo < peak < hi else 0.1
    a = lo if peak <= lo else _edge(h, hp, peak, -1.0, lo, width)
    b = _edge(h, hp, peak, 1.0, hi, width)
    points = [peak] if a < peak < b else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        val, err = _spi.quad(lambda t: math.exp(h(t) - hp), a, b, points=points,
                             epsabs=0.0, epsrel=rel_tol, limit=500)
    if not val > 0.0 or err > 1e-9 * val:
        raise ConvergenceError("peaked integral failed to converge", val, err)
    return hp + math.log(val)


def _log_cosh(z):
    z = abs(z)
    return z + math.log1p(math.exp(-2.0 * z)) - math.log(2.0)


def log_bessel_k(order: float, x: float) -> float:
    """log K_nu(x) from int_0^inf exp(-x cosh t) cosh(nu t) dt."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"bessel_k needs x > 0, got {x}")
    nu = abs(float(order))

    def h(t):
        if t > 700.0:
            return -math.inf
        return -x * math.cosh(t) + _log_cosh(nu * t)

    peak = 0.0
    if nu * nu > x:
        # d/dt h is concave on t >= 0 with a single positive root below asinh(nu/x)
        g = lambda t: nu * math.tanh(nu * t) - x * math.sinh(t)
        t_hi = math.asinh(nu / x)
        t_lo = 1e-8 * t_hi
        if g(t_lo) > 0.0 and g(t_hi) < 0.0:
            peak = brentq(g, t_lo, t_hi, xtol=1e-14, rtol=1e-14)
        elif g(t_lo) > 0.0:
            peak = t_hi
    return _log_peaked_integral(h, peak, 0.0, 710.0)


def bessel_k(order: float, x: float) -> float:
    """Modified Bessel function of the second kind, real order, x > 0."""
    return math.exp(log_bessel_k(order, x))


def log_tricomi_u(a: float, b: float, x: float) -> float:
    """log U(a, b, x) from the Laplace integral, for a > 0 and x > 0.

    The substitution ``t = exp(u)`` turns the integrand into a smooth
    unimodal function of ``u`` whose peak solves
    ``x t**2 - (b - 1 - x) t - a = 0``.
    """
    a, b, x = float(a), float(b), float(x)
    if not a > 0.0:
        raise DomainError(f"tricomi_u needs a > 0, got {a}")
    if not x > 0.0:
        raise DomainError(f"tricomi_u needs x > 0, got {x}")
    c = b - a - 1.0

    def h(u):
        t = math.exp(u) if u < 700.0 else math.inf
        log1p_t = u + math.log1p(math.exp(-u)) if u > 0.0 else math.log1p(t)
        return -x * t + a * u + c * log1p_t

    bb = b - 1.0 - x
    disc = math.sqrt(bb * bb + 4.0 * a * x)
    t_star = (bb + disc) / (2.0 * x) if bb >= 0.0 else 2.0 * a / (disc - bb)
    return _log_peaked_integral(h, math.log(t_star), -math.inf, 710.0) - math.lgamma(a)


def tricomi_u(a: float, b: float, x: float) -> float:
    """Confluent hypergeometric function of the second kind U(a, b, x)."""
    return math.exp(log_tricomi_u(a, b, x))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def integrate(f: Callable[[float], float], lo: float, hi: float = math.inf,
              spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[lo, hi]``.

    Returns
    -------
    value, error : float
        The estimate and its absolute error indicator.

    Raises
    ------
    ConvergenceError
        If the error indicator exceeds the tolerance in ``spec``.
    """
    if spec.kind == "finite" and not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError("finite quadrature needs finite limits")
    if spec.kind == "log-semi-infinite":
        if lo < 0.0:
            raise DomainError("log-spaced quadrature needs lo >= 0")
        def g(u):
            # outside the float range y f(y) has to vanish for the integral to exist
            if u > _LOG_MAX_FLOAT:
                return 0.0
            y = math.exp(u)
            if y == 0.0:
                return 0.0
            return f(y) * y
        a = -math.inf if lo == 0.0 else math.log(lo)
        b = math.inf if hi == math.inf else math.log(hi)
    else:
        g, a, b = f, lo, hi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        val, err = _spi.quad(g, a, b, epsabs=0.0, epsrel=spec.rel_tol,
                             limit=spec.max_subdivisions)
    if not math.isfinite(val) or err > max(spec.rel_tol * abs(val), spec.abs_tol):
        raise ConvergenceError(
            f"quadrature did not reach rel_tol={spec.rel_tol:g} "
            f"(estimate {val:.6g}, error {err:.3g})", val, err)
    return val, err


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def find_root_monotone(f: Callable[[float], float], bracket: Bracket,
                       tol: float = ROOT_TOL,
                       fprime: Callable[[float], float] | None = None,
                       maxiter: int = 200) -> float:
    """Root of a monotone function on a bracket with a sign change.

    With ``fprime`` this is a safeguarded Newton iteration: a Newton step
    that would leave the current bracket is replaced by bisection, so ``f``
    is never evaluated outside ``bracket``.  Without ``fprime`` Brent's
    method is used.  ``tol`` is a relative abscissa tolerance (absolute
    below ``|x| = 1``).
    """
    lo, hi = float(bracket.lo), float(bracket.hi)
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo:.3g}, {fhi:.3g}")
    if fprime is None:
        return brentq(f, lo, hi, xtol=tol, rtol=max(tol, 4 * np.finfo(float).eps),
                      maxiter=maxiter)
    increasing = fhi > 0.0
    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx > 0.0) == increasing:
            hi = x
        else:
            lo = x
        scale = max(1.0, abs(x))
        if hi - lo <= tol * scale:
            return 0.5 * (lo + hi)
        d = fprime(x)
        x_new = x - fx / d if d != 0.0 and math.isfinite(d) else math.nan
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * scale:
            return x_new
        x = x_new
    raise ConvergenceError("iteration limit reached in find_root_monotone", x, hi - lo)


def find_roots_monotone(f_df, lo, hi, tol=ROOT_TOL, x0=None, maxiter=200):
    """Vectorised safeguarded Newton for increasing functions.

    ``f_df(x)`` returns ``(f, df)`` arrays with the shape of ``x``.  Each
    element carries its own bracket ``[lo, hi]``; the caller guarantees
    ``f(lo) < 0 < f(hi)`` elementwise.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    x = 0.5 * (lo + hi) if x0 is None else np.clip(x0, lo, hi)
    x = np.where((x <= lo) | (x >= hi), 0.5 * (lo + hi), x)
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(maxiter):
        f, df = f_df(x)
        pos = f > 0.0
        hi = np.where(pos, x, hi)
        lo = np.where(pos, lo, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - f / df
        bad = ~((x_new > lo) & (x_new < hi))
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        scale = np.maximum(1.0, np.abs(x))
        done = (np.abs(x_new - x) <= tol * scale) | (hi - lo <= tol * scale) | (f == 0.0)
        x = np.where(f == 0.0, x, x_new)
        if done.all():
            return x
    raise ConvergenceError("iteration limit reached in find_roots_monotone",
                           float(np.nanmax(x)), float(np.max(hi - lo)))
