"""Shared physical constants and parameter types.

All times are in seconds, frequencies in THz unless noted otherwise, and
powers in microwatts.  Parameter objects are frozen dataclasses validated
at construction, so they can be shared freely between worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigurationError

# Nominal pulsed-pump repetition rate (Hz) and the derived time grid.
REPETITION_RATE = 219.78e6
REPETITION_PERIOD = 1.0 / REPETITION_RATE
# Imbalance of every unbalanced interferometer.  Chosen as exactly 2/3 of
# the repetition period so that consecutive pulse trains interleave:
# 2 * T_rep == 3 * delay.
INTERFEROMETER_DELAY = REPETITION_PERIOD * 2.0 / 3.0

SPEED_OF_LIGHT = 299792458.0  # m/s

# ITU DWDM grid: 100 GHz channel spacing anchored at 190.0 THz.
ITU_GRID_ANCHOR_THZ = 190.0
ITU_GRID_STEP_THZ = 0.1
# Degenerate (center) frequency of the down-conversion spectrum, midway
# between channels C33 and C34 (1550.52 nm).
CENTER_FREQUENCY_THZ = 193.35


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


@dataclass(frozen=True)
class SourceParams:
    """Entangled-pair source settings.

    Attributes:
        repetition_period: Pump pulse spacing in seconds.
        pulse_width: FWHM of a pump pulse in seconds.
        interferometer_delay: Long-minus-short path delay of the pump
            interferometer (and, nominally, of both receiver
            interferometers) in seconds.
        pump_phase_phi: Phase imprinted between the early and late pump
            halves, in radians.
        visibility: Two-photon interference visibility, 0..1.
        shg_power: Second-harmonic pump power in microwatts; linear proxy
            for the mean pair number per pulse.
    """

    repetition_period: float = REPETITION_PERIOD
    pulse_width: float = 300e-12
    interferometer_delay: float = INTERFEROMETER_DELAY
    pump_phase_phi: float = 0.0
    visibility: float = 0.99
    shg_power: float = 30.0

    def __post_init__(self) -> None:
        _require(self.repetition_period > 0, "repetition_period must be positive")
        _require(self.pulse_width > 0, "pulse_width must be positive")
        _require(self.interferometer_delay > 0, "interferometer_delay must be positive")
        _require(0.0 <= self.visibility <= 1.0, "visibility must lie in [0, 1]")
        _require(self.shg_power >= 0, "shg_power must be non-negative")
        # Interleaving contract: pulses from consecutive periods must land
        # exactly on the half-delay grid, i.e. T_rep = (3/2) * delay.
        ratio = self.repetition_period / self.interferometer_delay
        _require(
            abs(ratio - 1.5) <= 1.5e-6,
            "repetition_period must equal 1.5 x interferometer_delay within 1 ppm",
        )
        # Peaks on the arrival-time grid are half a delay apart; wider
        # pulses would smear neighbouring time bins into each other.
        _require(
            self.pulse_width < self.interferometer_delay / 2.0,
            "pulse_width must be smaller than half the interferometer delay",
        )

    @property
    def grid_unit(self) -> float:
        """Spacing of the arrival-time grid (half the interferometer delay)."""
        return self.interferometer_delay / 2.0


@dataclass(frozen=True)
class DetectorParams:
    """Single-photon detector settings (one value for every detector)."""

    efficiency: float = 0.20
    dead_time: float = 10e-6
    jitter_fwhm: float = 250e-12
    dark_count_rate: float = 1000.0

    def __post_init__(self) -> None:
        _require(0.0 <= self.efficiency <= 1.0, "efficiency must lie in [0, 1]")
        _require(self.dead_time >= 0, "dead_time must be non-negative")
        _require(self.jitter_fwhm >= 0, "jitter_fwhm must be non-negative")
        _require(self.dark_count_rate >= 0, "dark_count_rate must be non-negative")


@dataclass(frozen=True)
class LinkParams:
    """Fiber-link propagation settings."""

    attenuation_db_per_km: float = 0.22
    dispersion_ps_nm_km: float = 17.0
    thermal_delay_coeff: float = 39e-12  # seconds of delay per km per kelvin
    group_delay_per_km: float = 4.9e-6  # seconds of base delay per km

    def __post_init__(self) -> None:
        _require(self.attenuation_db_per_km >= 0, "attenuation must be non-negative")
        _require(self.dispersion_ps_nm_km >= 0, "dispersion must be non-negative")
        _require(self.thermal_delay_coeff >= 0, "thermal_delay_coeff must be non-negative")
        _require(self.group_delay_per_km > 0, "group_delay_per_km must be positive")


@dataclass(frozen=True)
class ClockParams:
    """Free-running local-clock model of one participant's time tagger.

    local(t) = offset + (1 + frequency_error) * t + random walk, quantized
    to ``resolution``.
    """

    offset: float = 0.0
    frequency_error: float = 0.0
    random_walk_sigma: float = 30e-12  # seconds per sqrt(second)
    resolution: float = 13e-12

    def __post_init__(self) -> None:
        _require(self.resolution > 0, "resolution must be positive")
        _require(abs(self.frequency_error) < 1e-3, "frequency_error must be < 1e-3")
        _require(self.random_walk_sigma >= 0, "random_walk_sigma must be non-negative")


@dataclass(frozen=True)
class PhaseState:
    """Interferometer phases entering the joint-outcome cosine.

    alpha and beta are the two receivers' phase delays, phi the source's.
    Temperature coefficients map heater adjustments (mK) onto alpha/beta.
    """

    alpha: float = 0.0
    beta: float = 0.0
    phi: float = 0.0
    temp_coeff_a: float = field(default=0.039 * math.pi)  # rad per mK
    temp_coeff_b: float = field(default=0.039 * math.pi)
    temp_resolution: float = 0.5  # mK

    def __post_init__(self) -> None:
        _require(self.temp_resolution > 0, "temp_resolution must be positive")
        for name, coeff in (("temp_coeff_a", self.temp_coeff_a),
                            ("temp_coeff_b", self.temp_coeff_b)):
            _require(
                0.033 * math.pi - 1e-12 <= coeff <= 0.045 * math.pi + 1e-12,
                f"{name} must lie in [0.033*pi, 0.045*pi] rad/mK",
            )

    @property
    def interference_phase(self) -> float:
        """Total phase alpha + beta - phi reduced to (-pi, pi]."""
        delta = self.alpha + self.beta - self.phi
        reduced = math.remainder(delta, 2.0 * math.pi)
        return reduced


def itu_channel_center_frequency(channel: int) -> float:
    """Center frequency in THz of a 100-GHz ITU C-band channel.

    Args:
        channel: channel number, 8..72.

    Raises:
        ConfigurationError: if the channel is outside the supported band.
    """
    if not 8 <= channel <= 72:
        raise ConfigurationError(f"channel {channel} outside supported range 8..72")
    return ITU_GRID_ANCHOR_THZ + channel * ITU_GRID_STEP_THZ


def symmetric_channel_pair(channel: int) -> int:
    """Partner channel energy-matched with ``channel`` about 193.35 THz.

    Down-converted photons are emitted pairwise at frequencies symmetric
    about half the pump frequency, so channel c pairs with 67 - c.

    Raises:
        ConfigurationError: if no partner exists inside C17..C50.
    """
    if not 17 <= channel <= 50:
        raise ConfigurationError(
            f"channel {channel} has no symmetric partner inside C17..C50"
        )
    return 67 - channel


def frequency_to_wavelength_nm(frequency_thz: float) -> float:
    """Vacuum wavelength in nm for a frequency in THz."""
    if frequency_thz <= 0:
        raise ConfigurationError("frequency must be positive")
    return SPEED_OF_LIGHT / (frequency_thz * 1e12) * 1e9
