"""RIS hardware model, OSTBC parameters, link geometry and near-field path loss."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eig_dist import EPS_RATE, GainProfile
from .exceptions import ComplexResultError, DomainError

__all__ = [
    "SPEED_OF_LIGHT",
    "AmplitudeLaw",
    "PAPER_LAW",
    "PhaseCodebook",
    "codebook",
    "RisConfig",
    "OstbcScheme",
    "SCHEMES",
    "get_scheme",
    "LinkGeometry",
    "PAPER_GEOMETRY",
    "amplitude",
    "reflection_gains",
    "path_loss",
    "fraunhofer_distance",
]

SPEED_OF_LIGHT = 299_792_458.0
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class AmplitudeLaw:
    """Phase-dependent reflection amplitude of one RIS element.

    ``standard`` evaluates ``(1 - zeta_min) * ((sin(phi - c) + 1) / 2)**k + zeta_min``
    which stays in ``[zeta_min, 1]`` and peaks at ``phi = pi/2 + c``.
    ``literal`` drops the ``+ 1`` inside the sine term; it is only real
    for ``sin(phi - c) >= 0`` unless ``k`` is an integer.
    """

    zeta_min: float = 0.8
    c: float = 0.43 * math.pi
    k: float = 1.6
    variant: str = "standard"

    def __post_init__(self):
        if not 0.0 <= self.zeta_min <= 1.0:
            raise DomainError(f"zeta_min must lie in [0, 1], got {self.zeta_min}")
        if self.c < 0.0:
            raise DomainError(f"c must be >= 0, got {self.c}")
        if self.k < 0.0:
            raise DomainError(f"k must be >= 0, got {self.k}")
        if self.variant not in ("standard", "literal"):
            raise DomainError(f"variant must be 'standard' or 'literal', got {self.variant!r}")

    def __call__(self, phase):
        return amplitude(self, phase)

    @property
    def best_phase(self) -> float:
        """Phase in ``[0, 2pi)`` at which the amplitude reaches 1."""
        return (0.5 * math.pi + self.c) % TWO_PI


PAPER_LAW = AmplitudeLaw(zeta_min=0.8, c=0.43 * math.pi, k=1.6)


def amplitude(law: AmplitudeLaw, phase):
    """Amplitude response beta(phi); ``phase`` may be a scalar or array."""
    phi = np.mod(np.asarray(phase, dtype=float), TWO_PI)
    s = np.sin(phi - law.c)
    if law.variant == "standard":
        base = np.clip(0.5 * (s + 1.0), 0.0, 1.0)
    else:
        base = 0.5 * s
        if float(law.k) != int(law.k) and np.any(base < 0.0):
            raise ComplexResultError(
                "literal amplitude law is complex for sin(phi - c) < 0 with non-integer k")
    out = (1.0 - law.zeta_min) * base ** law.k + law.zeta_min
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PhaseCodebook:
    bits: int
    phases: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.phases)


def codebook(bits: int) -> PhaseCodebook:
    """The ``2**bits`` equally spaced phases ``2*pi*i/2**bits``."""
    if int(bits) != bits or not 1 <= bits <= 8:
        raise DomainError(f"codebook bits must be an integer in [1, 8], got {bits}")
    n = 2 ** int(bits)
    return PhaseCodebook(int(bits), TWO_PI * np.arange(n) / n)


@dataclass(frozen=True, eq=False)
class RisConfig:
    """Phase shift of every RIS element, wrapped into ``[0, 2pi)``."""

    phases: np.ndarray

    def __post_init__(self):
        phases = np.mod(np.atleast_1d(np.asarray(self.phases, dtype=float)), TWO_PI)
        if phases.ndim != 1 or phases.size < 1:
            raise DomainError("a RIS configuration needs at least one phase")
        # mod can return exactly 2pi for tiny negative inputs
        phases[phases >= TWO_PI] = 0.0
        object.__setattr__(self, "phases", phases)

    @property
    def n_ris(self) -> int:
        return self.phases.size

    @classmethod
    def constant(cls, n_ris: int, phase: float) -> "RisConfig":
        return cls(np.full(int(n_ris), float(phase)))


@dataclass(frozen=True)
class OstbcScheme:
    name: str
    nt: int
    rc: float


SCHEMES = {
    "G2": OstbcScheme("G2", 2, 1.0),
    "G3": OstbcScheme("G3", 3, 0.5),
    "G4": OstbcScheme("G4", 4, 0.5),
}


def get_scheme(name: str) -> OstbcScheme:
    try:
        return SCHEMES[name.upper()]
    except KeyError:
        raise DomainError(f"unknown OSTBC scheme {name!r}; expected G2, G3 or G4") from None


@dataclass(frozen=True)
class LinkGeometry:
    """Transmitter/receiver placement relative to the RIS centre.

    ``wavelength`` overrides ``SPEED_OF_LIGHT / f_c`` when a scenario quotes
    a rounded wavelength directly.
    """

    d_tx: float = 30.0
    d_ty: float = 40.0
    d_rx: float = 30.0
    d_ry: float = 40.0
    f_c: float = 3.8e9
    g_t: float = 1.0
    g_r: float = 1.0
    d_m: float = 4.0397
    d_n: float = 4.0397
    wavelength: float | None = None

    def __post_init__(self):
        for name in ("d_tx", "d_ty", "d_rx", "d_ry", "f_c", "g_t", "g_r"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("d_m", "d_n"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.wavelength is not None and not self.wavelength > 0.0:
            raise DomainError(f"wavelength must be > 0, got {self.wavelength}")

    @property
    def lam(self) -> float:
        return self.wavelength if self.wavelength is not None else SPEED_OF_LIGHT / self.f_c

    @property
    def d_t(self) -> float:
        return math.hypot(self.d_tx, self.d_ty)

    @property
    def d_r(self) -> float:
        return math.hypot(self.d_rx, self.d_ry)


PAPER_GEOMETRY = LinkGeometry(wavelength=0.0789)


def reflection_gains(config: RisConfig, law: AmplitudeLaw,
                     eps_rate: float = EPS_RATE) -> GainProfile:
    """Squared amplitudes ``beta_i(phi_i)**2`` of every element, classified."""
    beta = np.atleast_1d(amplitude(law, config.phases))
    return GainProfile.from_gains(beta * beta, eps_rate=eps_rate)


def path_loss(geom: LinkGeometry, beta_max: float = 1.0) -> float:
    """Near-field cascaded path loss ``Gt Gr l^2/(16 pi^2) (beta_max/(d_t + d_r))^2``."""
    if not 0.0 < beta_max <= 1.0:
        raise DomainError(f"beta_max must lie in (0, 1], got {beta_max}")
    lam = geom.lam
    return (geom.g_t * geom.g_r * lam * lam / (16.0 * math.pi ** 2)
            * (beta_max / (geom.d_t + geom.d_r)) ** 2)


def fraunhofer_distance(geom: LinkGeometry) -> float:
    """Near/far-field boundary ``2 D^2 / l`` for the largest panel dimension D."""
    d = max(geom.d_m, geom.d_n)
    return 2.0 * d * d / geom.lam
