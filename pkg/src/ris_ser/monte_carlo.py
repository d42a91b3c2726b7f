"""Monte Carlo oracles: channel realizations, eigenvalue samples and semi-analytic SER.

Random numbers come from Philox streams keyed by ``(seed, purpose, batch)``.
A batch is therefore reproducible on its own, and results do not depend on
how batches are scheduled; reductions always run in batch order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import special

from .eig_dist import GainProfile
from .exceptions import DomainError
from .ris_model import AmplitudeLaw, OstbcScheme, RisConfig, amplitude, reflection_gains
from .perf_analysis import alpha_psk, check_mod_order

__all__ = [
    "RunSpec",
    "EmpiricalPdf",
    "SemiAnalyticSer",
    "rng_stream",
    "complex_normal",
    "iter_cascade_z",
    "sample_cascade_z",
    "iter_lambda",
    "sample_lambda",
    "iter_reduced_z",
    "sample_reduced_z",
    "conditional_sep_mpsk",
    "ser_semi_analytic",
    "empirical_lambda_pdf",
]

# stream purposes
PURPOSE_MC = 0
PURPOSE_PHASES = 1
PURPOSE_OPTIMIZER = 2

_GL_NODES = 96


@dataclass(frozen=True)
class RunSpec:
    """Seed and size of a Monte Carlo run.

    ``batch_size`` also fixes how the random streams are keyed, so changing
    it changes the samples.
    """

    seed: int = 0
    trials: int = 1_000_000
    batch_size: int = 1 << 14

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.trials) < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        if int(self.batch_size) < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def n_batches(self) -> int:
        return -(-int(self.trials) // int(self.batch_size))

    def batch_sizes(self) -> Iterator[tuple[int, int]]:
        """``(batch index, size)`` pairs; the last batch may be short."""
        left = int(self.trials)
        for b in range(self.n_batches):
            size = min(int(self.batch_size), left)
            left -= size
            yield b, size


@dataclass(frozen=True)
class EmpiricalPdf:
    edges: np.ndarray
    density: np.ndarray
    n_samples: int
    n_outside: int = 0

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * self.widths))


@dataclass(frozen=True)
class SemiAnalyticSer:
    gamma_bar: np.ndarray
    ser: np.ndarray
    std_error: np.ndarray
    trials: int


def rng_stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Independent counter-based generator for one ``(seed, purpose, index)`` key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) draws by Box-Muller, variance 1/2 per real component."""
    u1 = 1.0 - rng.random(shape)  # (0, 1]
    u2 = rng.random(shape)
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)


def iter_cascade_z(spec: RunSpec, config: RisConfig, law: AmplitudeLaw,
                   nt: int) -> Iterator[np.ndarray]:
    """Batches of ``||g Phi H||^2`` from full channel draws."""
    nt = int(nt)
    if nt < 1:
        raise DomainError("Nt must be >= 1")
    beta = np.atleast_1d(amplitude(law, config.phases))
    phi = beta * np.exp(1j * config.phases)
    n = config.n_ris
    for b, size in spec.batch_sizes():
        rng = rng_stream(spec.seed, PURPOSE_MC, b)
        h = complex_normal(rng, (size, n, nt))
        g = complex_normal(rng, (size, n))
        f = np.einsum("bi,bij->bj", g * phi, h)
        yield np.sum(f.real ** 2 + f.imag ** 2, axis=1)


def sample_cascade_z(spec: RunSpec, config: RisConfig, law: AmplitudeLaw, nt: int) -> np.ndarray:
    return np.concatenate(list(iter_cascade_z(spec, config, law, nt)))


def _lambda_batch(rng, values, counts, size):
    shapes = np.broadcast_to(counts, (size, counts.size))
    return rng.standard_gamma(shapes) @ values


def iter_lambda(spec: RunSpec, profile: GainProfile) -> Iterator[np.ndarray]:
    """Batches of ``lam = sum_k g_k Gamma(n_k, 1)`` over the distinct gains."""
    for b, size in spec.batch_sizes():
        rng = rng_stream(spec.seed, PURPOSE_MC, b)
        yield _lambda_batch(rng, profile.values, profile.counts, size)


def sample_lambda(spec: RunSpec, profile: GainProfile) -> np.ndarray:
    return np.concatenate(list(iter_lambda(spec, profile)))


def iter_reduced_z(spec: RunSpec, profile: GainProfile, nt: int) -> Iterator[np.ndarray]:
    """Batches of ``Z = lam * V`` with ``V ~ Gamma(Nt, 1)``."""
    nt = int(nt)
    if nt < 1:
        raise DomainError("Nt must be >= 1")
    for b, size in spec.batch_sizes():
        rng = rng_stream(spec.seed, PURPOSE_MC, b)
        lam = _lambda_batch(rng, profile.values, profile.counts, size)
        yield lam * rng.standard_gamma(float(nt), size)


def sample_reduced_z(spec: RunSpec, profile: GainProfile, nt: int) -> np.ndarray:
    return np.concatenate(list(iter_reduced_z(spec, profile, nt)))


@np.errstate(under="ignore")
def conditional_sep_mpsk(rho, mod_order: int) -> np.ndarray:
    """M-PSK symbol error probability at fixed instantaneous SNR ``rho``."""
    m = check_mod_order(mod_order)
    rho = np.asarray(rho, dtype=float)
    if m == 2:
        return 0.5 * special.erfc(np.sqrt(rho))
    # split at pi/2 where the integrand peaks
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    upper = (m - 1) * math.pi / m
    parts = [(0.0, 0.5 * math.pi), (0.5 * math.pi, upper)]
    theta = np.concatenate([0.5 * (hi - lo) * x + 0.5 * (hi + lo) for lo, hi in parts])
    weights = np.concatenate([0.5 * (hi - lo) * w for lo, hi in parts])
    c = alpha_psk(m) / (2.0 * np.sin(theta) ** 2)
    vals = np.exp(-rho[..., None] * c) @ weights
    return vals / math.pi


def _z_batches(spec, source, law, nt):
    if isinstance(source, RisConfig):
        if law is None:
            raise DomainError("an amplitude law is needed to sample from a RIS configuration")
        return iter_reduced_z(spec, reflection_gains(source, law), nt)
    return iter_reduced_z(spec, source, nt)


def ser_semi_analytic(spec: RunSpec, source, scheme: OstbcScheme, mod_order: int,
                      gamma_bar, law: AmplitudeLaw | None = None) -> SemiAnalyticSer:
    """Average of the conditional M-PSK SEP over sampled ``rho = (gamma_bar/Rc) Z``.

    ``source`` is a :class:`GainProfile` or a :class:`RisConfig` (then ``law``
    is required).  The same Z samples serve every ``gamma_bar`` value.
    """
    gb = np.atleast_1d(np.asarray(gamma_bar, dtype=float))
    if np.any(gb < 0.0):
        raise DomainError("gamma_bar must be >= 0")
    sums, sqs = [], []
    for z in _z_batches(spec, source, law, scheme.nt):
        rho = np.multiply.outer(gb / scheme.rc, z)
        sep = conditional_sep_mpsk(rho, mod_order)
        sums.append(sep.sum(axis=1))
        sqs.append((sep * sep).sum(axis=1))
    n = int(spec.trials)
    s1 = np.array([math.fsum(col) for col in np.array(sums).T])
    s2 = np.array([math.fsum(col) for col in np.array(sqs).T])
    mean = s1 / n
    var = np.maximum(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return SemiAnalyticSer(gb, mean, np.sqrt(var / n), n)


def empirical_lambda_pdf(spec: RunSpec, profile: GainProfile, bins: int = 200,
                         upper_sigmas: float = 8.0) -> EmpiricalPdf:
    """Histogram density of eigenvalue samples over ``[0, mean + upper_sigmas * sd]``."""
    if int(bins) < 10:
        raise DomainError(f"bins must be >= 10, got {bins}")
    hi = profile.mean + upper_sigmas * math.sqrt(profile.variance)
    edges = np.linspace(0.0, hi, int(bins) + 1)
    counts = np.zeros(int(bins), dtype=np.int64)
    for lam in iter_lambda(spec, profile):
        counts += np.histogram(lam, bins=edges)[0]
    inside = int(counts.sum())
    density = counts / (inside * np.diff(edges))
    return EmpiricalPdf(edges, density, int(spec.trials), int(spec.trials) - inside)
