"""Group-wise greedy search over quantized RIS phases.

The objective is the Nt-th negative moment of the eigenvalue, taken under
the normalised saddle-point density.  It depends on a configuration only
through how many elements use each codebook phase, which lets candidates
be deduplicated and evaluated in batches.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .eig_dist import negative_moment, negative_moments_from_counts
from .exceptions import DivergenceError, DomainError
from .monte_carlo import PURPOSE_OPTIMIZER, rng_stream
from .ris_model import AmplitudeLaw, PhaseCodebook, RisConfig, amplitude, reflection_gains

__all__ = [
    "GroupPartition",
    "OptResult",
    "partition_groups",
    "objective",
    "lower_bound",
    "random_objectives",
    "optimize",
]

DEFAULT_CANDIDATES = 10_000


@dataclass(frozen=True)
class GroupPartition:
    """Consecutive, balanced element groups (sizes differ by at most one)."""

    n_groups: int
    assignment: np.ndarray

    @property
    def groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignment == g) for g in range(self.n_groups)]


def partition_groups(n_ris: int, n_groups: int) -> GroupPartition:
    n_ris, n_groups = int(n_ris), int(n_groups)
    if not 1 <= n_groups <= n_ris:
        raise DomainError(f"group count must lie in [1, N_RIS={n_ris}], got {n_groups}")
    assignment = np.empty(n_ris, dtype=np.intp)
    for g, block in enumerate(np.array_split(np.arange(n_ris), n_groups)):
        assignment[block] = g
    return GroupPartition(n_groups, assignment)


@dataclass(frozen=True)
class OptResult:
    """Outcome of :func:`optimize`.

    ``trace[0]`` is the objective of the random starting point and
    ``trace[g + 1]`` the incumbent after group ``g``; ``accepted[g]`` tells
    whether group ``g`` changed the configuration.
    """

    config: RisConfig
    indices: np.ndarray
    trace: np.ndarray
    accepted: np.ndarray
    ratio: float
    lower_bound: float
    wall_time: float

    @property
    def objective(self) -> float:
        return float(self.trace[-1])


def objective(config: RisConfig, law: AmplitudeLaw, nt: int) -> float:
    """Normalised-SPA ``E[lam**-Nt]`` for the gains induced by ``config``."""
    return negative_moment(reflection_gains(config, law), nt, normalize=True)


def lower_bound(n_ris: int, nt: int) -> float:
    """``Gamma(N - Nt) / Gamma(N)``, the negative moment at unit gains."""
    n_ris, nt = int(n_ris), int(nt)
    if n_ris <= nt:
        raise DivergenceError(f"E[lam^-{nt}] diverges for N_RIS = {n_ris} <= {nt}")
    return math.exp(math.lgamma(n_ris - nt) - math.lgamma(n_ris))


def _codebook_gains(cb: PhaseCodebook, law: AmplitudeLaw) -> np.ndarray:
    return np.atleast_1d(amplitude(law, cb.phases)) ** 2


def _counts(indices, k):
    """Per-row codebook usage counts of an index array."""
    indices = np.atleast_2d(indices)
    out = np.zeros((indices.shape[0], k))
    rows = np.repeat(np.arange(indices.shape[0]), indices.shape[1])
    np.add.at(out, (rows, indices.ravel()), 1.0)
    return out


def _evaluate(values, counts, nt):
    """Objective per count row, evaluating each distinct row once."""
    uniq, inverse = np.unique(counts, axis=0, return_inverse=True)
    return negative_moments_from_counts(values, uniq, nt)[inverse.ravel()]


def random_objectives(n_ris: int, nt: int, cb: PhaseCodebook, law: AmplitudeLaw,
                      n_configs: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Objectives of ``n_configs`` uniformly random codebook configurations.

    Returns ``(objectives, indices)`` with ``indices`` of shape (n_configs, N_RIS).
    """
    rng = rng_stream(seed, PURPOSE_OPTIMIZER, 1)
    idx = rng.integers(0, len(cb), (int(n_configs), int(n_ris)))
    values = _codebook_gains(cb, law)
    return _evaluate(values, _counts(idx, len(cb)), nt), idx


def optimize(n_ris: int, nt: int, n_groups: int, n_candidates: int, cb: PhaseCodebook,
             law: AmplitudeLaw, seed: int = 0) -> OptResult:
    """Group-wise greedy search.

    Starts from a uniformly random codebook configuration.  Group by group,
    ``n_candidates`` random phase sub-vectors are drawn for that group; the
    best one replaces the incumbent only if it strictly lowers the objective.
    Ties between candidates go to the lowest candidate index.
    """
    n_ris, nt = int(n_ris), int(nt)
    if int(n_candidates) < 1:
        raise DomainError(f"candidate count must be >= 1, got {n_candidates}")
    bound = lower_bound(n_ris, nt)
    part = partition_groups(n_ris, n_groups)
    k = len(cb)
    values = _codebook_gains(cb, law)
    rng = rng_stream(seed, PURPOSE_OPTIMIZER, 0)

    t0 = time.perf_counter()
    idx = rng.integers(0, k, n_ris)
    best = float(_evaluate(values, _counts(idx, k), nt)[0])
    trace = [best]
    accepted = []
    for members in part.groups:
        cand = rng.integers(0, k, (int(n_candidates), members.size))
        rest = np.delete(idx, members)
        counts = _counts(cand, k) + np.bincount(rest, minlength=k)
        obj = _evaluate(values, counts, nt)
        j = int(np.argmin(obj))
        take = obj[j] < best
        if take:
            idx[members] = cand[j]
            best = float(obj[j])
        accepted.append(take)
        trace.append(best)
    wall = time.perf_counter() - t0

    config = RisConfig(cb.phases[idx])
    return OptResult(config, idx, np.array(trace), np.array(accepted), bound / best, bound, wall)
