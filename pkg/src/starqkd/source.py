"""Entangled-pair source: SPDC spectrum, pair statistics, event generation.

The source emits photon pairs at frequencies symmetric about the band
center; a demultiplexer window pair selects which participants receive
them.  The mean pair number per pulse inside a window pair scales
linearly with pump power and with the spectral weight of the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator

import numpy as np

from .core import CENTER_FREQUENCY_THZ, PhaseState, SourceParams
from .errors import AllocationError, ConfigurationError
from .outcome import (
    PairOutcome,
    TimeBin,
    joint_outcome_distribution,
    sample_pair_outcomes,
)

if TYPE_CHECKING:  # pragma: no cover
    from .wdm import ChannelPlan, FrequencyWindow

__all__ = [
    "SpectrumModel",
    "PhotonPairEvent",
    "PhotonStream",
    "mu_from_pump",
    "sample_pair_count",
    "generate_photon_streams",
    "generate_events",
]

FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

# Pump power and window width defining the mu calibration point.
_CALIBRATION_POWER_UW = 30.0
_CALIBRATION_WIDTH_GHZ = 100.0
_CALIBRATION_MU = 0.03

MAX_MU = 0.5


@dataclass(frozen=True)
class SpectrumModel:
    """Gaussian down-conversion spectrum with a hard band-pass filter."""

    center_thz: float = CENTER_FREQUENCY_THZ
    fwhm_thz: float = 9.3
    passband_half_width_thz: float = 2.55

    def __post_init__(self) -> None:
        if self.fwhm_thz <= 0:
            raise ConfigurationError("spectrum FWHM must be positive")
        if self.passband_half_width_thz < 0:
            raise ConfigurationError("passband half-width must be non-negative")

    @property
    def sigma_thz(self) -> float:
        return self.fwhm_thz / FWHM_TO_SIGMA

    def spectral_fraction(self, lo_thz: float, hi_thz: float) -> float:
        """Fraction of the total pair flux between two frequencies."""
        scale = self.sigma_thz * math.sqrt(2.0)
        a = (lo_thz - self.center_thz) / scale
        b = (hi_thz - self.center_thz) / scale
        return 0.5 * (math.erf(b) - math.erf(a))

    def contains(self, lo_thz: float, hi_thz: float) -> bool:
        """Whether [lo, hi] lies inside the band-pass filter."""
        tol = 1e-9
        return (
            lo_thz >= self.center_thz - self.passband_half_width_thz - tol
            and hi_thz <= self.center_thz + self.passband_half_width_thz + tol
        )


def _window_bounds(
    window: "FrequencyWindow | float", spectrum: SpectrumModel
) -> tuple[float, float]:
    """Bounds in THz of a window given as an object or a width in GHz.

    A bare number is read as a window of that width in GHz centered on
    the degenerate frequency.
    """
    if hasattr(window, "center_thz"):
        half = window.width_ghz * 1e-3 / 2.0
        return window.center_thz - half, window.center_thz + half
    width_ghz = float(window)
    if width_ghz < 0:
        raise ConfigurationError("window width must be non-negative")
    half = width_ghz * 1e-3 / 2.0
    return spectrum.center_thz - half, spectrum.center_thz + half


def mu_from_pump(
    shg_power: float,
    window: "FrequencyWindow | float",
    spectrum: SpectrumModel | None = None,
) -> float:
    """Mean pair number per pulse emitted into one demux window.

    Linear in pump power and in the spectral weight of the window,
    anchored so that 30 microwatts into a centered 100 GHz window gives
    mu = 0.03.

    Args:
        shg_power: second-harmonic pump power in microwatts.
        window: a frequency window, or a width in GHz centered on the
            degenerate frequency.
        spectrum: down-conversion spectrum; defaults to the nominal one.

    Raises:
        AllocationError: if the window pokes outside the band-pass filter.
    """
    if spectrum is None:
        spectrum = SpectrumModel()
    if shg_power < 0:
        raise ConfigurationError("shg_power must be non-negative")
    lo, hi = _window_bounds(window, spectrum)
    if not spectrum.contains(lo, hi):
        raise AllocationError(
            f"window [{lo:.4f}, {hi:.4f}] THz outside the band-pass filter "
            f"(center {spectrum.center_thz} THz "
            f"+/- {spectrum.passband_half_width_thz} THz)"
        )
    half_cal = _CALIBRATION_WIDTH_GHZ * 1e-3 / 2.0
    reference = spectrum.spectral_fraction(
        spectrum.center_thz - half_cal, spectrum.center_thz + half_cal
    )
    fraction = spectrum.spectral_fraction(lo, hi)
    return (
        _CALIBRATION_MU
        * (shg_power / _CALIBRATION_POWER_UW)
        * (fraction / reference)
    )


def sample_pair_count(mu: float, rng: np.random.Generator) -> int:
    """Number of pairs emitted by a single pump pulse."""
    if not 0.0 <= mu <= MAX_MU:
        raise ConfigurationError(f"mu must lie in [0, {MAX_MU}], got {mu}")
    return int(rng.poisson(mu))


@dataclass(frozen=True)
class PhotonPairEvent:
    """One emitted pair, with per-photon emission times.

    Emission times sit on the grid pulse_index * T_rep + bin * delay,
    plus a shared pump-pulse timing jitter.
    """

    pulse_index: int
    channel_pair: tuple
    outcome: PairOutcome
    emission_time_a: float
    emission_time_b: float


@dataclass
class PhotonStream:
    """Photons headed to one participant, as parallel arrays.

    Sorted by emission time.  ``pulse_index`` and ``bin_index`` record
    ground truth used only by tests and diagnostics; the receiver must
    recover them from timing alone.
    """

    times: np.ndarray
    pulse_index: np.ndarray
    bin_index: np.ndarray
    port: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.times)
        for arr in (self.pulse_index, self.bin_index, self.port):
            if len(arr) != n:
                raise ConfigurationError("photon stream arrays must align")

    def __len__(self) -> int:
        return len(self.times)

    @classmethod
    def empty(cls) -> "PhotonStream":
        return cls(
            times=np.empty(0),
            pulse_index=np.empty(0, dtype=np.int64),
            bin_index=np.empty(0, dtype=np.int8),
            port=np.empty(0, dtype=np.int8),
        )


def _emission_times(
    params: SourceParams,
    pulse_index: np.ndarray,
    bin_index: np.ndarray,
    jitter: np.ndarray,
) -> np.ndarray:
    return (
        pulse_index * params.repetition_period
        + bin_index * params.interferometer_delay
        + jitter
    )


def _marginal_bins_ports(
    rng: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Bin and port of one photon whose partner is lost: bins 1/4, 1/2,
    1/4 and uniform independent ports."""
    bins = rng.choice(3, size=size, p=[0.25, 0.5, 0.25]).astype(np.int8)
    ports = rng.integers(0, 2, size=size, dtype=np.int8)
    return bins, ports


def _draw_pairs(
    params: SourceParams,
    phase: PhaseState,
    rate: float,
    n_pulses: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, ...]:
    """Draw aligned arrays for Poisson(rate * n_pulses) complete pairs.

    Returns (pulse_index, bins_a, ports_a, bins_b, ports_b, jitter),
    sorted by pulse index so rows stay pair-aligned.
    """
    dist = joint_outcome_distribution(
        phase.alpha, phase.beta, phase.phi, params.visibility
    )
    count = rng.poisson(rate * n_pulses)
    pulses = rng.integers(0, n_pulses, size=count, dtype=np.int64)
    bins_a, ports_a, bins_b, ports_b = sample_pair_outcomes(dist, rng, count)
    jitter = rng.normal(0.0, params.pulse_width / FWHM_TO_SIGMA, size=count)
    order = np.argsort(pulses, kind="stable")
    return (
        pulses[order],
        bins_a[order].astype(np.int8),
        ports_a[order].astype(np.int8),
        bins_b[order].astype(np.int8),
        ports_b[order].astype(np.int8),
        jitter[order],
    )


def _stream_from(
    params: SourceParams,
    pulse_index: np.ndarray,
    bins: np.ndarray,
    ports: np.ndarray,
    jitter: np.ndarray,
) -> PhotonStream:
    times = _emission_times(params, pulse_index, bins, jitter)
    order = np.argsort(times, kind="stable")
    return PhotonStream(
        times=times[order],
        pulse_index=pulse_index[order],
        bin_index=bins[order].astype(np.int8),
        port=ports[order].astype(np.int8),
    )


def generate_photon_streams(
    params: SourceParams,
    mu: float,
    duration: float,
    rng: np.random.Generator,
    phase: PhaseState | None = None,
    survival_a: float = 1.0,
    survival_b: float = 1.0,
) -> tuple[PhotonStream, PhotonStream]:
    """Emit pairs for one channel pair over ``duration`` seconds.

    Pair counts per pulse are Poisson(mu); multi-pair pulses appear as
    repeated pulse indices with independently drawn outcomes.  When
    survival probabilities below 1 are given, each photon is thinned
    immediately (importance sampling standing in for downstream loss and
    detector efficiency), which keeps long runs tractable: the three
    surviving categories (both photons, only A's, only B's) are drawn as
    independent Poisson streams of the exactly equivalent rates, and a
    lone survivor's outcome follows the pair distribution's one-photon
    marginal.

    Args:
        params: source settings (timing grid, pulse width, visibility).
        mu: mean pair number per pulse for this channel pair.
        duration: emission span in seconds.
        rng: random generator for this stream.
        phase: interferometer phases; defaults to all zero.
        survival_a: probability that A's photon reaches detection.
        survival_b: probability that B's photon reaches detection.

    Returns:
        The two participants' photon streams, each sorted by time.
    """
    if duration < 0:
        raise ConfigurationError("duration must be non-negative")
    if not 0.0 <= survival_a <= 1.0 or not 0.0 <= survival_b <= 1.0:
        raise ConfigurationError("survival probabilities must lie in [0, 1]")
    if not 0.0 <= mu <= MAX_MU:
        raise ConfigurationError(f"mu must lie in [0, {MAX_MU}], got {mu}")
    if phase is None:
        phase = PhaseState()

    n_pulses = int(duration / params.repetition_period)
    if n_pulses == 0 or mu == 0.0:
        return PhotonStream.empty(), PhotonStream.empty()

    sigma = params.pulse_width / FWHM_TO_SIGMA
    p_both = survival_a * survival_b
    p_a_only = survival_a * (1.0 - survival_b)
    p_b_only = (1.0 - survival_a) * survival_b

    # Pairs with both photons surviving: joint outcomes, shared jitter.
    pulses_both, bins_a, ports_a, bins_b, ports_b, jitter_both = _draw_pairs(
        params, phase, mu * p_both, n_pulses, rng
    )

    # Lone survivors: the partner is gone, so only the marginal matters.
    k_a = rng.poisson(mu * p_a_only * n_pulses)
    pulses_a = rng.integers(0, n_pulses, size=k_a, dtype=np.int64)
    lone_bins_a, lone_ports_a = _marginal_bins_ports(rng, k_a)
    jitter_a = rng.normal(0.0, sigma, size=k_a)

    k_b = rng.poisson(mu * p_b_only * n_pulses)
    pulses_b = rng.integers(0, n_pulses, size=k_b, dtype=np.int64)
    lone_bins_b, lone_ports_b = _marginal_bins_ports(rng, k_b)
    jitter_b = rng.normal(0.0, sigma, size=k_b)

    stream_a = _stream_from(
        params,
        np.concatenate([pulses_both, pulses_a]),
        np.concatenate([bins_a, lone_bins_a]),
        np.concatenate([ports_a, lone_ports_a]),
        np.concatenate([jitter_both, jitter_a]),
    )
    stream_b = _stream_from(
        params,
        np.concatenate([pulses_both, pulses_b]),
        np.concatenate([bins_b, lone_bins_b]),
        np.concatenate([ports_b, lone_ports_b]),
        np.concatenate([jitter_both, jitter_b]),
    )
    return stream_a, stream_b


def generate_events(
    params: SourceParams,
    plan: "ChannelPlan",
    duration: float,
    rng: np.random.Generator,
    phase: PhaseState | None = None,
) -> Iterator[PhotonPairEvent]:
    """Yield every emitted pair across all channel pairs of a plan.

    Events come out ordered by (earliest) emission time.  Intended for
    demonstrations and small durations; long simulations use
    :func:`generate_photon_streams` per channel pair instead.
    """
    if duration < 0:
        raise ConfigurationError("duration must be non-negative")
    if phase is None:
        phase = PhaseState()
    n_pulses = int(duration / params.repetition_period)
    merged: list[PhotonPairEvent] = []
    for pairing in plan.pairings:
        if n_pulses == 0 or pairing.mu == 0.0:
            continue
        label = (pairing.participant_a, pairing.participant_b)
        pulses, bins_a, ports_a, bins_b, ports_b, jitter = _draw_pairs(
            params, phase, pairing.mu, n_pulses, rng
        )
        times_a = _emission_times(params, pulses, bins_a, jitter)
        times_b = _emission_times(params, pulses, bins_b, jitter)
        for i in range(len(pulses)):
            outcome = PairOutcome(
                bin_a=TimeBin(int(bins_a[i])),
                port_a=int(ports_a[i]),
                bin_b=TimeBin(int(bins_b[i])),
                port_b=int(ports_b[i]),
            )
            merged.append(
                PhotonPairEvent(
                    pulse_index=int(pulses[i]),
                    channel_pair=label,
                    outcome=outcome,
                    emission_time_a=float(times_a[i]),
                    emission_time_b=float(times_b[i]),
                )
            )
    merged.sort(key=lambda e: min(e.emission_time_a, e.emission_time_b))
    yield from merged
