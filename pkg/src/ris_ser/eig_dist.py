"""Distribution of the cascaded-channel eigenvalue and of the effective SNR variable.

The nonzero Gram eigenvalue is ``lam = sum_i g_i E_i`` with unit exponentials
``E_i`` and gains ``g_i = beta_i(phi_i)**2``; the effective SNR variable is
``Z = lam * V`` with ``V ~ Gamma(Nt, 1)`` independent of ``lam``.

Three routes are provided:

* exact: Erlang (identical gains) and hypoexponential (distinct gains);
* Gaussian limit (moment matched);
* saddle-point approximation, valid for any gain profile.

Integrals against the saddle-point density use a log-spaced abscissa grid
that is solved for all its saddle points at once (see :class:`SpaGrid`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from .exceptions import ConvergenceError, DegenerateRatesError, DivergenceError, DomainError
from .numerics import (ROOT_TOL, Bracket, find_root_monotone, find_roots_monotone,
                       log_bessel_k)

__all__ = [
    "EPS_RATE",
    "GainProfile",
    "SpaSolution",
    "SpaGrid",
    "erlang_lambda_pdf",
    "hypoexp_lambda_pdf",
    "lclt_lambda_pdf",
    "cgf",
    "cgf_d1",
    "cgf_d2",
    "saddle_point",
    "spa_lambda_pdf",
    "spa_grid",
    "fz_exact_identical",
    "fz_exact_hypoexp",
    "fz_spa",
    "negative_moment",
    "negative_moments_from_counts",
    "hypoexp_branch_weights",
    "hypoexp_branch_sum",
]

EPS_RATE = 1e-6
IDENTICAL_RTOL = 1e-12
EPS_POLE = 1e-12

GRID_POINTS = 401
GRID_LOWER_FRAC = 1e-4
GRID_UPPER_SIGMAS = 12.0

_LOG_2PI = math.log(2.0 * math.pi)


def _classify(gains, eps_rate):
    g = np.sort(gains)
    if g[-1] - g[0] <= IDENTICAL_RTOL * g[-1]:
        return "identical"
    gaps = np.diff(g) / g[1:]
    return "distinct" if np.all(gaps > eps_rate) else "clustered"


@dataclass(frozen=True, eq=False)
class GainProfile:
    """Squared amplitude responses of all RIS elements.

    Build with :meth:`from_gains`, which classifies the profile as
    ``identical``, ``distinct`` (all relative gaps above ``eps_rate``) or
    ``clustered``.  ``values``/``counts`` hold the compressed form used by
    every saddle-point computation.
    """

    gains: np.ndarray = field(repr=False)
    classification: str
    values: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)

    @classmethod
    def from_gains(cls, gains, eps_rate=EPS_RATE) -> "GainProfile":
        g = np.atleast_1d(np.asarray(gains, dtype=float)).copy()
        if g.ndim != 1 or g.size == 0:
            raise DomainError("a gain profile needs at least one gain")
        if not np.all(np.isfinite(g)) or np.any(g <= 0.0):
            raise DomainError("gains must be finite and positive")
        values, counts = np.unique(g, return_counts=True)
        g.setflags(write=False)
        return cls(g, _classify(g, eps_rate), values, counts.astype(float))

    @classmethod
    def identical(cls, n_ris, gain=1.0) -> "GainProfile":
        return cls.from_gains(np.full(int(n_ris), float(gain)))

    @property
    def n(self) -> int:
        return self.gains.size

    @property
    def mean(self) -> float:
        """Mean of the eigenvalue, ``sum(g)``."""
        return float(np.dot(self.values, self.counts))

    @property
    def variance(self) -> float:
        """Variance of the eigenvalue, ``sum(g**2)``."""
        return float(np.dot(self.values ** 2, self.counts))

    @property
    def key(self):
        return (self.values.tobytes(), self.counts.tobytes())

    def summary(self) -> dict:
        return {
            "n_ris": self.n,
            "classification": self.classification,
            "distinct_gains": int(self.values.size),
            "gain_min": float(self.values[0]),
            "gain_max": float(self.values[-1]),
            "mean": self.mean,
        }


@dataclass(frozen=True)
class SpaSolution:
    y: float
    s_hat: float
    psi: float
    psi2: float


def _positive(y, name="y"):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0.0)):
        raise DomainError(f"{name} must be > 0")
    return y


def _scalar_or_array(out):
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# exact eigenvalue densities
# ---------------------------------------------------------------------------

def erlang_lambda_pdf(y, n_ris: int, gain: float):
    """Erlang(N, 1/gain) density of the eigenvalue for identical gains."""
    y = _positive(y)
    if not gain > 0.0:
        raise DomainError("gain must be > 0")
    n = int(n_ris)
    logf = (-n * math.log(gain) + (n - 1) * np.log(y) - y / gain - math.lgamma(n))
    return _scalar_or_array(np.exp(logf))


def hypoexp_branch_weights(profile: GainProfile):
    """Signs and logs of ``prod_i r_i / prod_{k != j}(r_k - r_j)`` per branch j.

    ``r_i = 1/g_i`` are the exponential rates.  Raises
    :class:`DegenerateRatesError` unless the gains are pairwise distinct.
    """
    if profile.classification != "distinct" and profile.n > 1:
        raise DegenerateRatesError(
            f"hypoexponential form needs distinct gains, profile is {profile.classification}")
    r = 1.0 / profile.gains
    log_pref = float(np.sum(np.log(r)))
    diff = r[None, :] - r[:, None]
    np.fill_diagonal(diff, 1.0)
    log_den = np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    return r, sign, log_pref - log_den


# above this condition number the branch sum is redone in extended precision
_LOG10_COND_LIMIT = 6.0
# extra digits used to confirm an extended-precision branch sum
_MP_CHECK_DIGITS = 20
_MP_MAX_ROUNDS = 8


@lru_cache(maxsize=16)
def _mp_weights(gains, digits):
    """Rates and branch weights ``prod_i r_i / prod_{k != j}(r_k - r_j)`` at ``digits``."""
    with mpmath.workdps(digits):
        r = [1 / mpmath.mpf(g) for g in gains]
        pref = mpmath.fprod(r)
        w = [pref / mpmath.fprod(rk - rj for k, rk in enumerate(r) if k != j)
             for j, rj in enumerate(r)]
    return r, w


def _mp_branch_sum(gains, term, log10_cond):
    """Branch sum ``sum_j w_j term(r_j)`` in extended precision.

    Rates and weights are rebuilt from the stored gains at the working
    precision.  The precision starts from the estimated condition number and
    grows until two evaluations agree to double precision.
    """
    key = tuple(float(g) for g in gains)
    digits = 20 + int(math.ceil(max(log10_cond, 0.0)))
    prev = None
    for _ in range(_MP_MAX_ROUNDS):
        with mpmath.workdps(digits):
            r, w = _mp_weights(key, digits)
            total = mpmath.fsum(wj * term(rj) for wj, rj in zip(w, r))
        if prev is not None and abs(total - prev) <= 1e-15 * abs(total):
            return float(total)
        prev = total
        digits += max(_MP_CHECK_DIGITS, digits // 2)
    raise ConvergenceError("extended-precision branch sum did not settle",
                           estimate=float(prev), error=float("nan"))


def _alternating_sum(sign, log_terms, what, exact=None):
    """Sum signed branch terms along the last axis.

    The sum is formed relative to the largest term so that huge weights do
    not overflow.  Rows whose condition number exceeds ``1e6`` are recomputed
    with ``exact(row_index, log10_cond)`` when given; otherwise a warning is
    issued.
    """
    log_terms = np.atleast_2d(log_terms)
    top = np.max(log_terms, axis=-1, keepdims=True)
    rel = sign * np.exp(log_terms - top)
    part = rel.sum(axis=-1)
    scale = np.abs(rel).sum(axis=-1)
    top = top[:, 0]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        log10_cond = np.where(part != 0.0, np.log10(scale / np.abs(part)), np.inf)
        total = part * np.exp(top)
    bad = np.flatnonzero((log10_cond > _LOG10_COND_LIMIT) | ~np.isfinite(total))
    if bad.size and exact is not None:
        for i in bad:
            # a fully cancelled row still needs the magnitude of its terms
            lc = float(log10_cond[i])
            if not math.isfinite(lc):
                lc = 16.0 + max(top[i], 0.0) / math.log(10.0)
            total[i] = exact(i, lc)
    elif bad.size:
        warnings.warn(f"{what}: alternating branch sum lost about "
                      f"{np.max(log10_cond[bad]):.0f} digits", RuntimeWarning, stacklevel=3)
    return total


def hypoexp_branch_sum(profile: GainProfile, log_term, mp_term, what="branch sum") -> float:
    """``sum_j w_j t(r_j)`` over the hypoexponential branches of ``profile``.

    Parameters
    ----------
    log_term : callable
        Vectorised ``log t(r)`` on the array of rates; ``t`` must be positive.
    mp_term : callable
        The same ``t`` on a single ``mpmath.mpf`` rate, used when cancellation
        between branches is severe.
    """
    r, sign, log_w = hypoexp_branch_weights(profile)
    log_terms = (log_w + np.asarray(log_term(r), dtype=float))[None, :]
    out = _alternating_sum(sign, log_terms, what,
                           lambda i, lc: _mp_branch_sum(profile.gains, mp_term, lc))
    return float(np.atleast_1d(out)[0])


def hypoexp_lambda_pdf(y, profile: GainProfile):
    """Hypoexponential density of the eigenvalue for distinct gains."""
    y = _positive(y)
    r, sign, log_w = hypoexp_branch_weights(profile)
    flat = np.atleast_1d(y).ravel()
    log_terms = log_w[None, :] - np.multiply.outer(flat, r)

    def exact(i, log10_cond):
        yi = mpmath.mpf(float(flat[i]))
        return _mp_branch_sum(profile.gains, lambda rj: mpmath.exp(-rj * yi), log10_cond)

    out = _alternating_sum(sign, log_terms, "hypoexp_lambda_pdf", exact)
    return _scalar_or_array(out.reshape(y.shape))


def lclt_lambda_pdf(y, profile: GainProfile):
    """Moment-matched Gaussian density (mean sum g, variance sum g^2)."""
    y = np.asarray(y, dtype=float)
    mu, var = profile.mean, profile.variance
    return _scalar_or_array(np.exp(-0.5 * (y - mu) ** 2 / var) / math.sqrt(2.0 * math.pi * var))


# ---------------------------------------------------------------------------
# cumulant generating function and saddle points
# ---------------------------------------------------------------------------

def _check_cgf_domain(s, profile):
    s = np.asarray(s, dtype=float)
    if np.any(s * profile.values[-1] >= 1.0):
        raise DomainError(f"CGF argument must be < 1/max gain = {1.0 / profile.values[-1]:.6g}")
    return s


def cgf(s, profile: GainProfile):
    """``psi(s) = -sum log(1 - s g_i)``."""
    s = _check_cgf_domain(s, profile)
    out = -np.sum(profile.counts * np.log1p(-np.multiply.outer(s, profile.values)), axis=-1)
    return _scalar_or_array(out)


def cgf_d1(s, profile: GainProfile):
    s = _check_cgf_domain(s, profile)
    g = profile.values
    out = np.sum(profile.counts * g / (1.0 - np.multiply.outer(s, g)), axis=-1)
    return _scalar_or_array(out)


def cgf_d2(s, profile: GainProfile):
    s = _check_cgf_domain(s, profile)
    g = profile.values
    out = np.sum(profile.counts * g * g / (1.0 - np.multiply.outer(s, g)) ** 2, axis=-1)
    return _scalar_or_array(out)


def _saddle_bracket(values, counts, y):
    """Lower end left of the root for every y; upper end just below the pole."""
    gmax = np.max(np.where(counts > 0, values, 0.0), axis=-1, keepdims=True)
    n = counts.sum(axis=-1, keepdims=True)
    # psi'(s) <= n*gmax/(1 - s*gmax) for s < 1/gmax, so psi'(lo) <= y/2 here
    lo = 1.0 / gmax - 2.0 * n / y
    hi = (1.0 / gmax) * (1.0 - EPS_POLE)
    return lo, hi, gmax, n


def saddle_point(y: float, profile: GainProfile) -> SpaSolution:
    """Solve ``psi'(s) = y`` for one abscissa."""
    y = float(y)
    if not y > 0.0:
        raise DomainError("y must be > 0")
    g, n = profile.values, profile.counts
    lo, hi, _, _ = _saddle_bracket(g, n, y)
    f = lambda s: float(np.sum(n * g / (1.0 - s * g))) - y
    df = lambda s: float(np.sum(n * g * g / (1.0 - s * g) ** 2))
    s_hat = find_root_monotone(f, Bracket(float(lo[0]), float(hi[0])), tol=ROOT_TOL, fprime=df)
    psi = float(-np.sum(n * np.log1p(-s_hat * g)))
    return SpaSolution(y, s_hat, psi, df(s_hat))


def _solve_saddles(values, counts, y):
    """Batched saddle points.

    ``values``: (K,) gains; ``counts``: (C, K) multiplicities; ``y``: (C, P).
    Returns ``s_hat, psi, psi2`` each of shape (C, P).
    """
    lo, hi, _, n = _saddle_bracket(values, counts, y)
    lo = np.broadcast_to(lo, y.shape)
    hi = np.broadcast_to(hi, y.shape)
    g = values
    w = counts[:, None, :]
    mean_gain = (counts @ values)[:, None] / n

    used = w > 0.0

    # unused gains may sit beyond the pole of the active ones; mask them out
    def f_df(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            gq = np.where(used, g / (1.0 - s[..., None] * g), 0.0)
        return np.sum(w * gq, axis=-1) - y, np.sum(w * gq * gq, axis=-1)

    x0 = 1.0 / mean_gain - n / y
    s = find_roots_monotone(f_df, lo, hi, tol=ROOT_TOL, x0=x0)
    sg = s[..., None] * g
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = -np.sum(np.where(used, w * np.log1p(-sg), 0.0), axis=-1)
        psi2 = np.sum(np.where(used, w * (g / (1.0 - sg)) ** 2, 0.0), axis=-1)
    return s, psi, psi2


def _log_spa(values, counts, y):
    s, psi, psi2 = _solve_saddles(values, counts, y)
    return psi - s * y - 0.5 * (_LOG_2PI + np.log(psi2))


def spa_lambda_pdf(y, profile: GainProfile):
    """Raw (unnormalised) saddle-point density of the eigenvalue."""
    y = _positive(y)
    flat = np.atleast_1d(y).reshape(1, -1)
    out = np.exp(_log_spa(profile.values, profile.counts[None, :], flat))
    return _scalar_or_array(out.reshape(y.shape))


# ---------------------------------------------------------------------------
# log-spaced grid for integrals against the SPA density
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpaGrid:
    """SPA density tabulated on a log-spaced grid with trapezoid weights.

    ``expect(v)`` returns ``sum(w * f * v)``, divided by ``mass`` when
    ``normalize`` is set.  ``mass`` also counts the analytic piece below
    the first abscissa.  ``mass_error`` is the difference between the
    trapezoid sums at spacing h and 2h.
    """

    y: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    mass: float
    mass_error: float

    def expect(self, values, normalize=True):
        total = np.sum(self.weights * self.density * values, axis=-1)
        return total / self.mass if normalize else total


def _grid_batch(values, counts, n_points, lower_frac, upper_sigmas):
    mu = counts @ values
    sd = np.sqrt(counts @ values ** 2)
    u_lo = np.log(mu * lower_frac)
    u_hi = np.log(mu + upper_sigmas * sd)
    t = np.linspace(0.0, 1.0, n_points)
    u = u_lo[:, None] + (u_hi - u_lo)[:, None] * t
    y = np.exp(u)
    h = (u_hi - u_lo)[:, None] / (n_points - 1)
    w = h * y
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    dens = np.exp(_log_spa(values, counts, y))
    return y, w, dens


def _origin_tail(y0, f0, n, order):
    """``int_0^y0 y**-order f(y) dy`` for a density behaving as ``f0 (y/y0)**(n-1)``.

    Every eigenvalue density here (exact or SPA) has this power law at the
    origin, so the grid's left end is closed analytically.
    """
    return f0 * y0 ** (1.0 - order) / (n - order)


@lru_cache(maxsize=256)
def _spa_grid_cached(key, n_points, lower_frac, upper_sigmas):
    values = np.frombuffer(key[0])
    counts = np.frombuffer(key[1])[None, :]
    y, w, dens = _grid_batch(values, counts, n_points, lower_frac, upper_sigmas)
    y, w, dens = y[0], w[0], dens[0]
    n = float(counts.sum())
    tail = _origin_tail(y[0], dens[0], n, 0)
    mass = float(np.sum(w * dens)) + tail
    coarse = 2.0 * w[::2]
    mass_2h = float(np.sum(coarse * dens[::2])) + tail
    for arr in (y, w, dens):
        arr.setflags(write=False)
    return SpaGrid(y, w, dens, mass, abs(mass - mass_2h))


def spa_grid(profile: GainProfile, n_points=GRID_POINTS, lower_frac=GRID_LOWER_FRAC,
             upper_sigmas=GRID_UPPER_SIGMAS) -> SpaGrid:
    """Tabulate the raw SPA density on ``[mu*lower_frac, mu + upper_sigmas*sd]``.

    ``n_points`` should be odd so the 2h sub-grid keeps both end points.
    Results are cached per gain profile.
    """
    return _spa_grid_cached(profile.key, int(n_points), float(lower_frac), float(upper_sigmas))


# ---------------------------------------------------------------------------
# density of Z = lam * V
# ---------------------------------------------------------------------------

def fz_exact_identical(a, n_ris: int, gain: float, nt: int):
    """Bessel-K closed form of the density of Z for identical gains."""
    a = _positive(a, "a")
    n, nt = int(n_ris), int(nt)
    beta = math.sqrt(gain)
    const = (math.log(2.0) - (n + nt) * math.log(beta) - math.lgamma(nt) - math.lgamma(n))
    flat = np.atleast_1d(a).ravel()
    out = np.array([
        math.exp(const + 0.5 * (n + nt - 2) * math.log(ai)
                 + log_bessel_k(n - nt, 2.0 * math.sqrt(ai) / beta))
        for ai in flat
    ])
    return _scalar_or_array(out.reshape(a.shape))


def fz_exact_hypoexp(a, profile: GainProfile, nt: int):
    """Bessel-K mixture over the hypoexponential branches (distinct gains)."""
    a = _positive(a, "a")
    nt = int(nt)
    r, sign, log_w = hypoexp_branch_weights(profile)
    flat = np.atleast_1d(a).ravel()
    log_terms = np.empty((flat.size, r.size))
    for i, ai in enumerate(flat):
        for j, rj in enumerate(r):
            log_terms[i, j] = (log_w[j] + 0.5 * (nt - 1) * math.log(rj)
                               + log_bessel_k(1 - nt, 2.0 * math.sqrt(ai * rj)))
        log_terms[i] += math.log(2.0) + 0.5 * (nt - 1) * math.log(ai) - math.lgamma(nt)

    def exact(i, log10_cond):
        ai = mpmath.mpf(float(flat[i]))
        scale = 2 * ai ** (mpmath.mpf(nt - 1) / 2) / mpmath.gamma(nt)
        return _mp_branch_sum(
            profile.gains,
            lambda rj: scale * rj ** (mpmath.mpf(nt - 1) / 2)
            * mpmath.besselk(1 - nt, 2 * mpmath.sqrt(ai * rj)),
            log10_cond)

    out = _alternating_sum(sign, log_terms, "fz_exact_hypoexp", exact)
    return _scalar_or_array(out.reshape(a.shape))


def fz_spa(a, profile: GainProfile, nt: int, normalize: bool = False):
    """Density of Z from the SPA eigenvalue density by grid quadrature.

    The raw SPA density integrates to a constant different from one; pass
    ``normalize=True`` to rescale it to unit mass first.
    """
    a = _positive(a, "a")
    nt = int(nt)
    grid = spa_grid(profile)
    flat = np.atleast_1d(a).ravel()[:, None]
    y = grid.y[None, :]
    kernel = np.exp((nt - 1) * np.log(flat) - flat / y - nt * np.log(y) - math.lgamma(nt))
    out = grid.expect(kernel, normalize=normalize)
    return _scalar_or_array(out.reshape(a.shape))


# ---------------------------------------------------------------------------
# negative moments
# ---------------------------------------------------------------------------

def negative_moment(profile: GainProfile, nt: int, normalize: bool = True) -> float:
    """``E[lam**-nt]`` under the SPA density (unit-mass rescaled by default)."""
    nt = int(nt)
    if profile.n <= nt:
        raise DivergenceError(f"E[lam^-{nt}] diverges for N_RIS = {profile.n} <= {nt}")
    grid = spa_grid(profile)
    val = (float(grid.expect(grid.y ** (-nt), normalize=False))
           + _origin_tail(grid.y[0], grid.density[0], profile.n, nt))
    return val / grid.mass if normalize else val


def negative_moments_from_counts(values, counts, nt: int, normalize: bool = True,
                                 chunk: int = 512):
    """Batched normalised-SPA negative moments.

    ``values`` are the K possible gains, ``counts`` a (C, K) array of how
    many elements take each gain.  Same grid and solver as
    :func:`negative_moment`.
    """
    values = np.asarray(values, dtype=float)
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    nt = int(nt)
    n = counts.sum(axis=1)
    if np.any(n <= nt):
        raise DivergenceError(f"E[lam^-{nt}] diverges for N_RIS <= {nt}")
    out = np.empty(counts.shape[0])
    for start in range(0, counts.shape[0], chunk):
        c = counts[start:start + chunk]
        y, w, dens = _grid_batch(values, c, GRID_POINTS, GRID_LOWER_FRAC, GRID_UPPER_SIGMAS)
        wd = w * dens
        m = n[start:start + chunk]
        num = np.sum(wd * y ** (-nt), axis=1) + _origin_tail(y[:, 0], dens[:, 0], m, nt)
        mass = np.sum(wd, axis=1) + _origin_tail(y[:, 0], dens[:, 0], m, 0)
        out[start:start + chunk] = num / mass if normalize else num
    return out
