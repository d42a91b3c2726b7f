"""SER analysis of RIS-assisted OSTBC links with phase-dependent reflection amplitudes.

Modules
-------
numerics
    Log-domain special functions, quadrature and root finding.
ris_model
    Amplitude law, phase codebooks, OSTBC parameters and near-field path loss.
eig_dist
    Exact, Gaussian and saddle-point densities of the channel eigenvalue.
perf_analysis
    MGFs, M-PSK SER, asymptotes and diversity/coding gains.
monte_carlo
    Sampling oracles and semi-analytic SER.
optimizer
    Group-wise greedy phase search.
cli
    Batch command-line front end.
"""
from .eig_dist import GainProfile, negative_moment
from .exceptions import (ConfigError, ConvergenceError, DegenerateRatesError, DivergenceError,
                         DomainError, RisSerError, ValidityError)
from .ris_model import (PAPER_GEOMETRY, PAPER_LAW, AmplitudeLaw, LinkGeometry, RisConfig,
                        codebook, get_scheme, reflection_gains)

__all__ = [
    "GainProfile",
    "negative_moment",
    "AmplitudeLaw",
    "LinkGeometry",
    "RisConfig",
    "PAPER_LAW",
    "PAPER_GEOMETRY",
    "codebook",
    "get_scheme",
    "reflection_gains",
    "RisSerError",
    "DomainError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateRatesError",
    "DivergenceError",
    "ValidityError",
]
