"""Closed-loop interferometer phase stabilization via temperature.

The phase-basis error rate is a symmetric function of the interference
phase misalignment, so its value reveals the size of the error but not
the sign.  The controller therefore walks downhill with direction
memory: it keeps stepping the same way while the error rate improves
and reverses after a step makes things worse.  Step sizes come from
inverting the error-rate model, are quantized to the 0.5 mK heater
resolution, and are skipped entirely when the measured rate is
statistically indistinguishable from the deadband.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "MIN_TEMP_COEFF",
    "MAX_TEMP_COEFF",
    "NOMINAL_TEMP_COEFF",
    "TEMP_RESOLUTION_MK",
    "ControlDecision",
    "ControllerSettings",
    "ControllerState",
    "phase_from_temperature",
    "infer_phase_error",
    "control_step",
    "drift_process",
]

MIN_TEMP_COEFF = 0.033 * math.pi
MAX_TEMP_COEFF = 0.045 * math.pi
NOMINAL_TEMP_COEFF = 0.039 * math.pi
TEMP_RESOLUTION_MK = 0.5
MIN_CONTROL_BITS = 100


def phase_from_temperature(delta_t_mk: float, coeff: float) -> float:
    """Phase shift produced by a temperature change of an interferometer.

    Args:
        delta_t_mk: temperature change in milli-kelvin.
        coeff: thermal phase coefficient in radians per milli-kelvin,
            within the hardware range [0.033*pi, 0.045*pi].
    """
    if not MIN_TEMP_COEFF <= coeff <= MAX_TEMP_COEFF:
        raise ConfigurationError(
            f"temperature coefficient {coeff:.4f} rad/mK outside "
            f"[{MIN_TEMP_COEFF:.4f}, {MAX_TEMP_COEFF:.4f}]"
        )
    return coeff * delta_t_mk


def infer_phase_error(q_phase: float, visibility: float) -> float:
    """Magnitude of the phase misalignment implied by a phase-basis QBER.

    Inverts q = (1 - V cos(delta)) / 2.  The sign of the misalignment is
    unknowable from the error rate alone.  Error rates outside the range
    the model can produce ([(1-V)/2, (1+V)/2]) are clamped to the
    nearest boundary with a warning.
    """
    if not 0.0 <= q_phase <= 1.0:
        raise ConfigurationError("q_phase must lie in [0, 1]")
    if not 0.0 < visibility <= 1.0:
        raise ConfigurationError("visibility must lie in (0, 1]")
    lo = (1.0 - visibility) / 2.0
    hi = (1.0 + visibility) / 2.0
    if q_phase < lo or q_phase > hi:
        warnings.warn(
            f"phase-basis QBER {q_phase:.4f} outside the visibility-"
            f"limited range [{lo:.4f}, {hi:.4f}]; clamping",
            stacklevel=2,
        )
        q_phase = min(max(q_phase, lo), hi)
    return math.acos((1.0 - 2.0 * q_phase) / visibility)


@dataclass(frozen=True)
class ControlDecision:
    """One logged controller decision."""

    time: float
    qber: float
    adjustment_mk: float


@dataclass(frozen=True)
class ControllerSettings:
    """Tuning of the hill-descent temperature controller."""

    deadband: float = 0.005
    nominal_coeff: float = NOMINAL_TEMP_COEFF
    temp_resolution_mk: float = TEMP_RESOLUTION_MK
    max_step_mk: float = 10.0
    visibility: float = 0.99
    confidence_z: float = 1.96
    history_length: int = 64

    def __post_init__(self) -> None:
        if self.deadband <= 0 or self.deadband >= 0.5:
            raise ConfigurationError("deadband must lie in (0, 0.5)")
        if self.temp_resolution_mk <= 0:
            raise ConfigurationError("temp_resolution_mk must be positive")
        if self.max_step_mk < self.temp_resolution_mk:
            raise ConfigurationError(
                "max_step_mk must be at least one resolution unit"
            )
        if not 0.0 < self.visibility <= 1.0:
            raise ConfigurationError("visibility must lie in (0, 1]")


@dataclass(frozen=True)
class ControllerState:
    """Direction memory and decision log of one interferometer loop."""

    last_direction: int = 1
    last_qber: float | None = None
    step_mk: float = 0.0
    history: tuple[ControlDecision, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.last_direction not in (-1, 1):
            raise ConfigurationError("last_direction must be +1 or -1")


def control_step(
    state: ControllerState,
    new_qber: float,
    time: float = 0.0,
    n_bits: int | None = None,
    settings: ControllerSettings | None = None,
) -> tuple[float, ControllerState]:
    """Decide one temperature adjustment from a fresh QBER sample.

    Args:
        state: controller memory from the previous decision.
        new_qber: phase-basis error rate of the latest interval.
        time: timestamp recorded with the decision.
        n_bits: number of phase-basis bits behind the estimate; with
            fewer than 100 bits, or when the confidence interval
            overlaps the deadband, no step is taken.
        settings: loop tuning; defaults apply when omitted.

    Returns:
        (adjustment in mK, updated state).  The adjustment is always an
        integer multiple of the temperature resolution.
    """
    cfg = settings or ControllerSettings()
    if not 0.0 <= new_qber <= 1.0:
        raise ConfigurationError("new_qber must lie in [0, 1]")

    def _log(adjustment: float, direction: int) -> ControllerState:
        entry = ControlDecision(time, new_qber, adjustment)
        hist = (state.history + (entry,))[-cfg.history_length :]
        return replace(
            state,
            last_direction=direction,
            last_qber=new_qber,
            step_mk=abs(adjustment),
            history=hist,
        )

    uncertain = n_bits is not None and n_bits < MIN_CONTROL_BITS
    if not uncertain and n_bits is not None and n_bits > 0:
        margin = cfg.confidence_z * math.sqrt(
            max(new_qber * (1.0 - new_qber), 1e-12) / n_bits
        )
        uncertain = new_qber - margin <= cfg.deadband
    if uncertain and new_qber > cfg.deadband:
        # Statistically compatible with an aligned system: hold.
        return 0.0, _log(0.0, state.last_direction)

    if new_qber <= cfg.deadband:
        return 0.0, _log(0.0, state.last_direction)

    direction = state.last_direction
    if state.last_qber is not None and new_qber > state.last_qber:
        direction = -direction

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        magnitude_rad = infer_phase_error(new_qber, cfg.visibility)
    target_mk = magnitude_rad / cfg.nominal_coeff
    units = round(target_mk / cfg.temp_resolution_mk)
    if units == 0:
        # Within half a quantization step of aligned: stepping can only
        # make things worse, so hold.
        return 0.0, _log(0.0, state.last_direction)
    step_mk = min(units * cfg.temp_resolution_mk, cfg.max_step_mk)
    adjustment = direction * step_mk
    return adjustment, _log(adjustment, direction)


def drift_process(
    interval: float, drift_rate: float, rng: np.random.Generator
) -> float:
    """Random phase perturbation accumulated over one interval.

    Models slow environmental drift of a receiver interferometer as a
    random walk with standard deviation ``drift_rate`` radians per
    square-root hour.

    Args:
        interval: elapsed time in seconds.
        drift_rate: walk scale in radians per sqrt(hour); 0 disables.
        rng: random generator.
    """
    if interval < 0:
        raise ConfigurationError("interval must be non-negative")
    if drift_rate < 0:
        raise ConfigurationError("drift_rate must be non-negative")
    if drift_rate == 0.0 or interval == 0.0:
        return 0.0
    return float(rng.normal(0.0, drift_rate * math.sqrt(interval / 3600.0)))
