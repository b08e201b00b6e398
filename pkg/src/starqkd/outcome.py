"""Joint measurement-outcome statistics for one time-bin-entangled pair.

A pump pulse is split into an early and a late half with relative phase
phi; each down-converted photon then traverses its receiver's unbalanced
interferometer (short/long path, phase alpha or beta on the long path)
and exits on one of two detector ports.  Arrival times fall on three
bins: Early (short path, early half), Late (long path, late half), and
Central, where the two indistinguishable histories early+long and
late+short interfere.  The Central/Central coincidences carry the
phase-basis correlations; the outer bins carry the time-basis ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "TimeBin",
    "PairOutcome",
    "OutcomeDistribution",
    "joint_outcome_distribution",
    "sample_pair_outcome",
    "sample_pair_outcomes",
]

N_OUTCOMES = 36  # 3 bins x 2 ports per photon, squared


class TimeBin(IntEnum):
    """Arrival-time bin of one photon behind its interferometer."""

    EARLY = 0
    CENTRAL = 1
    LATE = 2


# Joint bins reachable by a single path combination; ports are uniform
# there because nothing interferes.
_SINGLE_PATH_BINS = (
    (TimeBin.EARLY, TimeBin.EARLY),
    (TimeBin.EARLY, TimeBin.CENTRAL),
    (TimeBin.CENTRAL, TimeBin.EARLY),
    (TimeBin.CENTRAL, TimeBin.LATE),
    (TimeBin.LATE, TimeBin.CENTRAL),
    (TimeBin.LATE, TimeBin.LATE),
)

# All joint bins a single pair can populate: |bin_a - bin_b| <= 1.
# Early/Late coincidences of opposite extremes would require the photons
# to take different pump halves and cannot occur.
ALLOWED_JOINT_BINS = _SINGLE_PATH_BINS + ((TimeBin.CENTRAL, TimeBin.CENTRAL),)


@dataclass(frozen=True)
class PairOutcome:
    """Measured bins and detector ports of the two photons of one pair."""

    bin_a: TimeBin
    port_a: int
    bin_b: TimeBin
    port_b: int

    def __post_init__(self) -> None:
        if self.port_a not in (0, 1) or self.port_b not in (0, 1):
            raise ConfigurationError("detector ports must be 0 or 1")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability table over all 36 joint outcomes.

    ``probabilities`` is indexed ``[bin_a, port_a, bin_b, port_b]``.
    """

    probabilities: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (3, 2, 3, 2):
            raise ConfigurationError("outcome table must have shape (3, 2, 3, 2)")
        if p.min() < -1e-12:
            raise ConfigurationError("outcome probabilities must be non-negative")
        total = p.sum()
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(
                f"outcome probabilities must sum to 1, got {total!r}"
            )
        object.__setattr__(self, "probabilities", np.clip(p, 0.0, None))

    def joint_bin_probability(self, bin_a: TimeBin, bin_b: TimeBin) -> float:
        """Probability of the (bin_a, bin_b) coincidence, summed over ports."""
        return float(self.probabilities[bin_a, :, bin_b, :].sum())

    def conditional_port_probabilities(
        self, bin_a: TimeBin, bin_b: TimeBin
    ) -> np.ndarray:
        """2x2 port table conditioned on the given joint bin."""
        block = self.probabilities[bin_a, :, bin_b, :]
        total = block.sum()
        if total <= 0:
            raise ConfigurationError(
                f"joint bin ({bin_a.name}, {bin_b.name}) has zero probability"
            )
        return block / total

    def phase_error_probability(self) -> float:
        """Port-mismatch probability conditioned on Central/Central."""
        cond = self.conditional_port_probabilities(TimeBin.CENTRAL, TimeBin.CENTRAL)
        return float(cond[0, 1] + cond[1, 0])

    def flat(self) -> np.ndarray:
        """The table as a length-36 vector (C order)."""
        return self.probabilities.ravel()


def joint_outcome_distribution(
    alpha: float, beta: float, phi: float, visibility: float = 1.0
) -> OutcomeDistribution:
    """Outcome table for receiver phases alpha, beta and source phase phi.

    Interference shows up only in the Central/Central block, where the
    port correlations follow (1 + (-1)^(i+j) V cos(alpha + beta - phi))/16;
    every other allowed joint bin is reached through a single path
    combination and is uniform over ports at 1/32.

    Args:
        alpha: phase delay of receiver A's interferometer (radians).
        beta: phase delay of receiver B's interferometer (radians).
        phi: phase delay of the source's pump interferometer (radians).
        visibility: scale of the interference term, 0..1.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ConfigurationError("visibility must lie in [0, 1]")
    probs = np.zeros((3, 2, 3, 2))
    for ga, gb in _SINGLE_PATH_BINS:
        probs[ga, :, gb, :] = 1.0 / 32.0
    fringe = visibility * math.cos(alpha + beta - phi)
    for port_a in (0, 1):
        for port_b in (0, 1):
            sign = -1.0 if (port_a + port_b) % 2 else 1.0
            probs[TimeBin.CENTRAL, port_a, TimeBin.CENTRAL, port_b] = (
                (1.0 + sign * fringe) / 16.0
            )
    return OutcomeDistribution(probs)


def sample_pair_outcomes(
    dist: OutcomeDistribution, rng: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``size`` independent outcomes from ``dist``.

    Returns:
        Arrays ``(bins_a, ports_a, bins_b, ports_b)``, each of length
        ``size`` with integer dtype.
    """
    if size < 0:
        raise ConfigurationError("size must be non-negative")
    flat = dist.flat()
    codes = rng.choice(N_OUTCOMES, size=size, p=flat)
    ports_b = codes % 2
    bins_b = (codes // 2) % 3
    ports_a = (codes // 6) % 2
    bins_a = codes // 12
    return bins_a, ports_a, bins_b, ports_b


def sample_pair_outcome(
    dist: OutcomeDistribution, rng: np.random.Generator
) -> PairOutcome:
    """Draw a single outcome from ``dist``."""
    bins_a, ports_a, bins_b, ports_b = sample_pair_outcomes(dist, rng, 1)
    return PairOutcome(
        bin_a=TimeBin(int(bins_a[0])),
        port_a=int(ports_a[0]),
        bin_b=TimeBin(int(bins_b[0])),
        port_b=int(ports_b[0]),
    )
