"""MGFs of the instantaneous SNR, M-PSK symbol error rates and high-SNR gains.

Every MGF here is ``M(s) = E[exp(-s * rho)]`` with ``rho = (gamma_bar/Rc) Z``,
so ``M(s) = E_lam[(1 + mu(s) lam)**-Nt]`` with ``mu(s) = gamma_bar * s / Rc``.
``gamma_bar`` is the linear average received SNR throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from .eig_dist import GainProfile, hypoexp_branch_sum, negative_moment, spa_grid
from .exceptions import DomainError, InsufficientDataError, ValidityError
from .numerics import QuadratureSpec, integrate, log_tricomi_u
from .ris_model import OstbcScheme

__all__ = [
    "SnrSweep",
    "SerCurve",
    "db_to_linear",
    "alpha_psk",
    "check_mod_order",
    "mgf_identical",
    "mgf_hypoexp",
    "mgf_spa",
    "ser_mpsk",
    "sin_power_integral",
    "ser_asymptotic_identical",
    "ser_asymptotic_spa",
    "diversity_coding_gain",
    "coding_gain_ratio",
    "estimate_diversity_slope",
    "ser_curve",
    "snr_at_ser",
]

# exp() underflows below this
_LOG_UNDERFLOW = -745.0
SER_QUAD = QuadratureSpec("finite", rel_tol=1e-8, max_subdivisions=200, abs_tol=1e-300)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def check_mod_order(m):
    if int(m) != m or m < 2 or (int(m) & (int(m) - 1)):
        raise DomainError(f"modulation order must be a power of two >= 2, got {m}")
    return int(m)


def alpha_psk(m: int) -> float:
    return 2.0 * math.sin(math.pi / check_mod_order(m)) ** 2


@dataclass(frozen=True)
class SnrSweep:
    snr_db: np.ndarray
    scheme: OstbcScheme
    mod_order: int = 2

    def __post_init__(self):
        snr = np.atleast_1d(np.asarray(self.snr_db, dtype=float))
        if snr.size == 0:
            raise DomainError("empty SNR sweep")
        if np.any(np.diff(snr) <= 0.0):
            raise DomainError("SNR sweep must be strictly increasing")
        check_mod_order(self.mod_order)
        object.__setattr__(self, "snr_db", snr)

    @property
    def gamma_bar(self):
        return db_to_linear(self.snr_db)

    @classmethod
    def from_range(cls, start, stop, step, scheme, mod_order=2):
        if stop < start:
            raise DomainError(f"empty SNR sweep: start {start} > stop {stop}")
        if not step > 0.0:
            raise DomainError("SNR step must be > 0")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return cls(start + step * np.arange(n), scheme, mod_order)


@dataclass
class SerCurve:
    snr_db: np.ndarray
    ser: np.ndarray
    method: str
    profile: dict = field(default_factory=dict)
    std_error: np.ndarray | None = None


def _mu(s, scheme, gamma_bar):
    if not s > 0.0:
        raise DomainError(f"MGF argument must be > 0, got {s}")
    return gamma_bar * s / scheme.rc


def _exp_clamped(log_val):
    return 0.0 if log_val < _LOG_UNDERFLOW else math.exp(log_val)


def mgf_identical(s: float, n_ris: int, gain: float, scheme: OstbcScheme,
                  gamma_bar: float) -> float:
    """Tricomi-U closed form for identical gains."""
    mu = _mu(s, scheme, gamma_bar)
    n, nt = int(n_ris), scheme.nt
    log_m = (-n * math.log(mu) - n * math.log(gain)
             + log_tricomi_u(n, n - nt + 1, 1.0 / (mu * gain)))
    return _exp_clamped(log_m)


def mgf_hypoexp(s: float, profile: GainProfile, scheme: OstbcScheme,
                gamma_bar: float) -> float:
    """Branch sum of ``U(1, 2 - Nt, r_j/mu)`` terms for distinct gains.

    Uses ``U(1, 2 - n, x) = exp(x) E_n(x)`` for the extended-precision
    fallback taken when the branches nearly cancel.
    """
    mu = _mu(s, scheme, gamma_bar)
    nt = scheme.nt
    log_mu = math.log(mu)

    def log_term(r):
        return np.array([log_tricomi_u(1.0, 2.0 - nt, rj / mu) for rj in r]) - log_mu

    def mp_term(rj):
        x = rj / mu
        return mpmath.exp(x) * mpmath.expint(nt, x) / mu

    val = hypoexp_branch_sum(profile, log_term, mp_term, "mgf_hypoexp")
    return min(max(val, 0.0), 1.0)


def mgf_spa(s: float, profile: GainProfile, scheme: OstbcScheme, gamma_bar: float,
            normalize: bool = True) -> float:
    """Grid quadrature of the SPA density against ``(1 + mu y)**-Nt``."""
    mu = _mu(s, scheme, gamma_bar)
    grid = spa_grid(profile)
    return float(grid.expect((1.0 + mu * grid.y) ** (-scheme.nt), normalize=normalize))


def ser_mpsk(mgf: Callable[[float], float], mod_order: int,
             spec: QuadratureSpec = SER_QUAD) -> float:
    """Average M-PSK SER ``(1/pi) int_0^{(M-1)pi/M} M(alpha/(2 sin^2 t)) dt``."""
    m = check_mod_order(mod_order)
    alpha = alpha_psk(m)

    def integrand(theta):
        sin_t = math.sin(theta)
        if sin_t == 0.0:
            return 0.0
        return mgf(alpha / (2.0 * sin_t * sin_t))

    val, _ = integrate(integrand, 0.0, (m - 1) * math.pi / m, spec)
    return val / math.pi


def sin_power_integral(nt: int, mod_order: int) -> float:
    """``int_0^{(M-1)pi/M} sin(t)**(2 Nt) dt``."""
    if nt < 1:
        raise DomainError("Nt must be >= 1")
    m = check_mod_order(mod_order)
    val, _ = integrate(lambda t: math.sin(t) ** (2 * nt), 0.0, (m - 1) * math.pi / m,
                       QuadratureSpec("finite", rel_tol=1e-12))
    return val


def ser_asymptotic_identical(gamma_bar, n_ris: int, gain: float, scheme: OstbcScheme,
                             mod_order: int):
    """High-SNR SER line for identical gains; needs N_RIS > Nt + 2."""
    n, nt = int(n_ris), scheme.nt
    if not n > nt + 2:
        raise ValidityError(f"asymptotic identical-gain SER needs N_RIS > Nt + 2 = {nt + 2}")
    log_ratio = math.lgamma(n - nt) - math.lgamma(n)
    return _asymptote(gamma_bar, gain, log_ratio, scheme, mod_order)


def _asymptote(gamma_bar, gain, log_moment, scheme, mod_order):
    nt = scheme.nt
    g = np.asarray(gamma_bar, dtype=float)
    log_i = math.log(sin_power_integral(nt, mod_order) / math.pi)
    log_base = math.log(gain * alpha_psk(mod_order) / (2.0 * scheme.rc))
    out = np.exp(-nt * (log_base + np.log(g)) + log_moment + log_i)
    return float(out) if out.ndim == 0 else out


def ser_asymptotic_spa(gamma_bar, profile: GainProfile, scheme: OstbcScheme, mod_order: int):
    """High-SNR SER line from the normalised-SPA negative moment."""
    moment = negative_moment(profile, scheme.nt, normalize=True)
    return _asymptote(gamma_bar, 1.0, math.log(moment), scheme, mod_order)


def diversity_coding_gain(profile: GainProfile, scheme: OstbcScheme, mod_order: int):
    """``(Gd, Gc)`` with ``SER ~ (Gc * gamma_bar)**-Gd`` at high SNR.

    Identical profiles with ``N_RIS > Nt + 2`` use the Gamma-ratio moment;
    every other profile uses the normalised-SPA negative moment.
    """
    nt = scheme.nt
    if profile.classification == "identical" and profile.n > nt + 2:
        gain = float(profile.values[0])
        log_moment = math.lgamma(profile.n - nt) - math.lgamma(profile.n)
    else:
        gain = 1.0
        log_moment = math.log(negative_moment(profile, nt))
    log_i = math.log(sin_power_integral(nt, mod_order) / math.pi)
    gc = (gain * alpha_psk(mod_order) / (2.0 * scheme.rc)
          * math.exp(-(log_moment + log_i) / nt))
    return nt, gc


def coding_gain_ratio(profile: GainProfile, scheme: OstbcScheme) -> float:
    """Coding-gain ratio to the ideal unit-gain surface: ``Gamma(N-Nt)/(Gamma(N) E[lam^-Nt])``."""
    nt = scheme.nt
    moment = negative_moment(profile, nt)
    return math.exp(math.lgamma(profile.n - nt) - math.lgamma(profile.n)) / moment


def estimate_diversity_slope(curve: SerCurve, lo: float = 1e-7, hi: float = 1e-3,
                             min_points: int = 4) -> float:
    """Negative log-log slope of the SER curve over its final qualifying decade.

    Qualifying points have ``lo <= SER <= hi``; the fit uses those within one
    decade of the smallest qualifying SER.
    """
    snr = np.asarray(curve.snr_db, dtype=float)
    ser = np.asarray(curve.ser, dtype=float)
    ok = (ser >= lo) & (ser <= hi)
    if not ok.any():
        raise InsufficientDataError("no SER points inside the fitting window")
    floor = ser[ok].min()
    tail = ok & (ser <= 10.0 * floor)
    if tail.sum() < min_points:
        raise InsufficientDataError(
            f"need >= {min_points} points in the final decade, found {int(tail.sum())}")
    slope = np.polyfit(snr[tail] / 10.0, np.log10(ser[tail]), 1)[0]
    return float(-slope)


def _mgf_for(profile, scheme, gamma_bar, method):
    if method == "exact":
        method = "exact-identical" if profile.classification == "identical" else "exact-hypoexp"
    if method == "exact-identical":
        if profile.classification != "identical":
            raise DomainError("exact-identical needs an identical gain profile")
        n, g = profile.n, float(profile.values[0])
        return method, lambda s: mgf_identical(s, n, g, scheme, gamma_bar)
    if method == "exact-hypoexp":
        return method, lambda s: mgf_hypoexp(s, profile, scheme, gamma_bar)
    if method == "spa":
        return method, lambda s: mgf_spa(s, profile, scheme, gamma_bar)
    raise DomainError(f"unknown analytic method {method!r}")


def ser_curve(profile: GainProfile, scheme: OstbcScheme, mod_order: int, snr_db,
              method: str = "spa") -> SerCurve:
    """SER over an SNR sweep (dB of average received SNR).

    ``method`` is ``exact`` (routes to exact-identical or exact-hypoexp),
    ``exact-identical``, ``exact-hypoexp``, ``spa`` or ``asymptotic``.
    """
    sweep = SnrSweep(snr_db, scheme, mod_order)
    if method == "asymptotic":
        if profile.classification == "identical" and profile.n > scheme.nt + 2:
            ser = ser_asymptotic_identical(sweep.gamma_bar, profile.n, float(profile.values[0]),
                                           scheme, mod_order)
        else:
            ser = ser_asymptotic_spa(sweep.gamma_bar, profile, scheme, mod_order)
        return SerCurve(sweep.snr_db, np.atleast_1d(ser), method, profile.summary())
    out = np.empty(sweep.snr_db.size)
    name = method
    for i, g in enumerate(sweep.gamma_bar):
        name, mgf = _mgf_for(profile, scheme, g, method)
        out[i] = ser_mpsk(mgf, mod_order)
    return SerCurve(sweep.snr_db, out, name, profile.summary())


def snr_at_ser(ser_of_db: Callable[[float], float], target: float, lo_db: float = -20.0,
               hi_db: float = 80.0, tol: float = 1e-6) -> float:
    """SNR in dB where a monotone SER function crosses ``target`` (log-domain bisection)."""
    from scipy.optimize import brentq

    f = lambda x: math.log(ser_of_db(x)) - math.log(target)
    return brentq(f, lo_db, hi_db, xtol=tol)
