"""Fiber propagation: loss, delay, thermal drift, dispersion broadening.

A link is characterized by its length, excess loss, and a thermal drift
rate.  Propagation delays every photon by the group delay plus a slow
thermal ramp, broadens arrival times by chromatic dispersion over the
photon's demux window, and (optionally) thins the stream by the link
transmission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CENTER_FREQUENCY_THZ, LinkParams, SPEED_OF_LIGHT
from .errors import ConfigurationError
from .source import FWHM_TO_SIGMA, PhotonStream

__all__ = [
    "FiberLink",
    "transmission_probability",
    "thermal_delay_shift",
    "dispersion_sigma",
    "propagate",
]


@dataclass(frozen=True)
class FiberLink:
    """One span of fiber from the source to a participant.

    ``thermal_rate`` is the temperature slew seen by the whole span, in
    kelvin per second; the resulting delay drift is a deterministic
    linear ramp.
    """

    length_km: float
    extra_loss_db: float = 0.0
    thermal_rate: float = 0.0
    params: LinkParams = field(default_factory=LinkParams)

    def __post_init__(self) -> None:
        if self.length_km < 0:
            raise ConfigurationError("length_km must be non-negative")
        if self.extra_loss_db < 0:
            raise ConfigurationError("extra_loss_db must be non-negative")

    @property
    def total_loss_db(self) -> float:
        return self.length_km * self.params.attenuation_db_per_km + self.extra_loss_db

    @property
    def base_delay(self) -> float:
        """Nominal group delay of the span in seconds."""
        return self.length_km * self.params.group_delay_per_km

    def thermal_drift_at(self, t: float | np.ndarray):
        """Accumulated thermal delay shift at session time ``t`` seconds."""
        delta_t_kelvin = self.thermal_rate * t
        return thermal_delay_shift(
            self.length_km, delta_t_kelvin, self.params.thermal_delay_coeff
        )

    def delay_at(self, t: float | np.ndarray):
        """Total propagation delay at session time ``t``."""
        return self.base_delay + self.thermal_drift_at(t)


def transmission_probability(link: FiberLink) -> float:
    """Probability that a photon survives the span."""
    return 10.0 ** (-link.total_loss_db / 10.0)


def thermal_delay_shift(
    length_km: float, delta_t_kelvin: float, coeff: float = 39e-12
) -> float:
    """Propagation-delay change for a temperature excursion.

    Args:
        length_km: span length in km.
        delta_t_kelvin: temperature change in kelvin.
        coeff: delay sensitivity in seconds per km per kelvin.
    """
    if np.any(np.asarray(length_km) < 0):
        raise ConfigurationError("length_km must be non-negative")
    return coeff * length_km * delta_t_kelvin


def _window_center_and_width(window) -> tuple[float, float]:
    if hasattr(window, "center_thz"):
        return window.center_thz, window.width_ghz
    return CENTER_FREQUENCY_THZ, float(window)


def dispersion_sigma(link: FiberLink, window) -> float:
    """RMS arrival-time broadening from chromatic dispersion, seconds.

    The demux window bounds the photon's spectral width; the spread of
    group delays across that width, treated as a Gaussian FWHM, sets the
    jitter.

    Args:
        window: the photon's frequency window, or a width in GHz at the
            band center.
    """
    center_thz, width_ghz = _window_center_and_width(window)
    wavelength_m = SPEED_OF_LIGHT / (center_thz * 1e12)
    delta_lambda_nm = (wavelength_m**2) * (width_ghz * 1e9) / SPEED_OF_LIGHT * 1e9
    fwhm_s = (
        link.params.dispersion_ps_nm_km * link.length_km * delta_lambda_nm * 1e-12
    )
    return fwhm_s / FWHM_TO_SIGMA


def propagate(
    stream: PhotonStream,
    link: FiberLink,
    rng: np.random.Generator,
    window=100.0,
    sample_loss: bool = True,
) -> PhotonStream:
    """Send a photon stream down a link.

    Arrival time = emission + base delay + thermal ramp (evaluated at
    emission time) + dispersion jitter.  With ``sample_loss`` each photon
    survives with the link transmission; generators that pre-thinned
    their streams pass ``sample_loss=False``.

    Returns a new stream sorted by arrival time.
    """
    times = stream.times
    keep = slice(None)
    if sample_loss:
        p = transmission_probability(link)
        keep = rng.random(len(times)) < p
        times = times[keep]
    sigma = dispersion_sigma(link, window)
    jitter = rng.normal(0.0, sigma, size=len(times)) if sigma > 0 else 0.0
    arrivals = times + link.base_delay + link.thermal_drift_at(times) + jitter
    order = np.argsort(arrivals, kind="stable")
    return PhotonStream(
        times=arrivals[order],
        pulse_index=stream.pulse_index[keep][order],
        bin_index=stream.bin_index[keep][order],
        port=stream.port[keep][order],
    )
