"""Demultiplexer models: frequency windows, channel plans, capacity.

Two devices route photon pairs to participants: a fixed arrayed-waveguide
grating with 100 GHz channels, and a reconfigurable wavelength-selective
switch that slices arbitrary bandwidth on a 12.5 GHz grid.  Either way a
participant pair shares two windows placed symmetrically about the band
center, so energy conservation pairs their photons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import (
    CENTER_FREQUENCY_THZ,
    itu_channel_center_frequency,
    symmetric_channel_pair,
)
from .errors import AllocationError
from .source import SpectrumModel, mu_from_pump

__all__ = [
    "FrequencyWindow",
    "Pairing",
    "ChannelPlan",
    "AwgSpec",
    "GridSpec",
    "awg_plan",
    "wss_plan",
    "max_participants",
    "validate_plan",
]

PASSBAND_HALF_WIDTH_THZ = 2.55
WSS_GRANULARITY_GHZ = 12.5
# Two windows count as a symmetric pair if their centers mirror about the
# band center to better than this.
SYMMETRY_TOLERANCE_THZ = 1e-3


@dataclass(frozen=True)
class FrequencyWindow:
    """One demux passband: center in THz, width in GHz."""

    center_thz: float
    width_ghz: float

    def __post_init__(self) -> None:
        if self.width_ghz < 0:
            raise AllocationError("window width must be non-negative")
        if self.center_thz <= 0:
            raise AllocationError("window center must be positive")

    @property
    def lo_thz(self) -> float:
        return self.center_thz - self.width_ghz * 1e-3 / 2.0

    @property
    def hi_thz(self) -> float:
        return self.center_thz + self.width_ghz * 1e-3 / 2.0

    def overlaps(self, other: "FrequencyWindow") -> bool:
        tol = 1e-9
        return self.lo_thz < other.hi_thz - tol and other.lo_thz < self.hi_thz - tol

    def mirrored(self) -> "FrequencyWindow":
        """The energy-matched window on the other side of the center."""
        return FrequencyWindow(
            center_thz=2.0 * CENTER_FREQUENCY_THZ - self.center_thz,
            width_ghz=self.width_ghz,
        )


@dataclass(frozen=True)
class Pairing:
    """Two participants sharing a symmetric window pair.

    ``mu`` is the mean pair number per pulse emitted into this window
    pair at the plan's pump power.
    """

    participant_a: str
    participant_b: str
    window_a: FrequencyWindow
    window_b: FrequencyWindow
    mu: float


@dataclass(frozen=True)
class ChannelPlan:
    """Validated allocation of demux windows to participants."""

    device: str
    allocations: Mapping[str, tuple[FrequencyWindow, ...]]
    pairings: tuple[Pairing, ...]
    spectrum: SpectrumModel = field(default_factory=SpectrumModel)

    def __post_init__(self) -> None:
        validate_plan(self)

    @property
    def participants(self) -> tuple[str, ...]:
        return tuple(self.allocations.keys())


def validate_plan(plan: ChannelPlan) -> None:
    """Check every plan invariant, independent of how it was built.

    Raises:
        AllocationError: listing each violated invariant.
    """
    problems: list[str] = []
    center = plan.spectrum.center_thz
    half_width = plan.spectrum.passband_half_width_thz

    windows: list[tuple[str, FrequencyWindow]] = []
    for participant, wins in plan.allocations.items():
        for win in wins:
            windows.append((participant, win))

    for participant, win in windows:
        if win.lo_thz < center - half_width - 1e-9 or win.hi_thz > center + half_width + 1e-9:
            problems.append(
                f"window {win.center_thz:.4f} THz of {participant} "
                f"outside the +/-{half_width} THz passband"
            )
    for i in range(len(windows)):
        for j in range(i + 1, len(windows)):
            pi, wi = windows[i]
            pj, wj = windows[j]
            if wi.overlaps(wj):
                problems.append(
                    f"windows of {pi} and {pj} overlap "
                    f"({wi.center_thz:.4f} / {wj.center_thz:.4f} THz)"
                )

    allocated = {p: set(wins) for p, wins in plan.allocations.items()}
    for pairing in plan.pairings:
        mid = 0.5 * (pairing.window_a.center_thz + pairing.window_b.center_thz)
        if abs(mid - center) > SYMMETRY_TOLERANCE_THZ:
            problems.append(
                f"pairing {pairing.participant_a}/{pairing.participant_b} "
                f"windows not symmetric about {center} THz (midpoint {mid:.4f})"
            )
        if pairing.mu < 0:
            problems.append(
                f"pairing {pairing.participant_a}/{pairing.participant_b} "
                "has negative mu"
            )
        for participant, window in (
            (pairing.participant_a, pairing.window_a),
            (pairing.participant_b, pairing.window_b),
        ):
            if window not in allocated.get(participant, set()):
                problems.append(
                    f"pairing window {window.center_thz:.4f} THz not "
                    f"allocated to {participant}"
                )

    if problems:
        raise AllocationError("; ".join(problems))


def awg_plan(
    pairs: Sequence[tuple[str, str, int]],
    shg_power: float = 30.0,
    spectrum: SpectrumModel | None = None,
) -> ChannelPlan:
    """Fixed-grating plan: each pair sits on channels (c, 67 - c).

    Args:
        pairs: (participant, participant, channel) triples; the first
            participant gets the named channel, the second its partner.
        shg_power: pump power in microwatts, setting each pairing's mu.
        spectrum: down-conversion spectrum; defaults to the nominal one.

    Raises:
        AllocationError: on out-of-range channels, duplicates, or a
            channel colliding with another pair's partner channel.
    """
    spectrum = spectrum or SpectrumModel()
    used_channels: dict[int, str] = {}
    allocations: dict[str, tuple[FrequencyWindow, ...]] = {}
    pairings: list[Pairing] = []
    for participant_a, participant_b, channel in pairs:
        if not 17 <= channel <= 50:
            raise AllocationError(
                f"channel {channel} outside the grating's range C17..C50"
            )
        partner = symmetric_channel_pair(channel)
        for c, owner in ((channel, participant_a), (partner, participant_b)):
            if c in used_channels:
                raise AllocationError(
                    f"channel C{c} requested for {owner} already in use "
                    f"by {used_channels[c]}"
                )
            used_channels[c] = owner
        window_a = FrequencyWindow(itu_channel_center_frequency(channel), 100.0)
        window_b = FrequencyWindow(itu_channel_center_frequency(partner), 100.0)
        for participant, window in (
            (participant_a, window_a),
            (participant_b, window_b),
        ):
            if participant in allocations:
                raise AllocationError(
                    f"participant {participant} appears in more than one pair"
                )
            allocations[participant] = (window,)
        mu = mu_from_pump(shg_power, window_a, spectrum)
        pairings.append(
            Pairing(participant_a, participant_b, window_a, window_b, mu)
        )
    return ChannelPlan(
        device="awg-100ghz",
        allocations=allocations,
        pairings=tuple(pairings),
        spectrum=spectrum,
    )


def wss_plan(
    demands: Mapping[tuple[str, str], float],
    shg_power: float = 30.0,
    spectrum: SpectrumModel | None = None,
) -> ChannelPlan:
    """Switch plan: bandwidth demands packed outward from the center.

    Each demand of B GHz becomes two B-wide windows mirrored about the
    band center, placed just beyond all previously placed windows.
    Demands are processed in mapping order, so callers control who sits
    closest to the center (where spectral density, hence mu, is
    highest).

    Args:
        demands: (participant, participant) -> bandwidth in GHz; must be
            a multiple of the 12.5 GHz switching granularity.
        shg_power: pump power in microwatts, setting each pairing's mu.
        spectrum: down-conversion spectrum; defaults to the nominal one.

    Raises:
        AllocationError: if a demand is off-grid or the passband is full.
    """
    spectrum = spectrum or SpectrumModel()
    center = spectrum.center_thz
    capacity_ghz = spectrum.passband_half_width_thz * 1e3
    seen: set[str] = set()
    allocations: dict[str, tuple[FrequencyWindow, ...]] = {}
    pairings: list[Pairing] = []
    frontier_ghz = 0.0
    for (participant_a, participant_b), width_ghz in demands.items():
        slots = width_ghz / WSS_GRANULARITY_GHZ
        if width_ghz < WSS_GRANULARITY_GHZ or abs(slots - round(slots)) > 1e-9:
            raise AllocationError(
                f"demand of {width_ghz} GHz for {participant_a}/"
                f"{participant_b} is not a positive multiple of the "
                f"{WSS_GRANULARITY_GHZ} GHz granularity"
            )
        if frontier_ghz + width_ghz > capacity_ghz + 1e-9:
            raise AllocationError(
                f"passband exhausted: {width_ghz} GHz for {participant_a}/"
                f"{participant_b} does not fit in the remaining "
                f"{capacity_ghz - frontier_ghz:.1f} GHz per side"
            )
        for participant in (participant_a, participant_b):
            if participant in seen:
                raise AllocationError(
                    f"participant {participant} appears in more than one demand"
                )
            seen.add(participant)
        offset_thz = (frontier_ghz + width_ghz / 2.0) * 1e-3
        window_hi = FrequencyWindow(center + offset_thz, width_ghz)
        window_lo = window_hi.mirrored()
        frontier_ghz += width_ghz
        allocations[participant_a] = (window_hi,)
        allocations[participant_b] = (window_lo,)
        mu = mu_from_pump(shg_power, window_hi, spectrum)
        pairings.append(
            Pairing(participant_a, participant_b, window_hi, window_lo, mu)
        )
    return ChannelPlan(
        device="wss",
        allocations=allocations,
        pairings=tuple(pairings),
        spectrum=spectrum,
    )


@dataclass(frozen=True)
class AwgSpec:
    """A fixed 100 GHz grating exposing channels first..last."""

    first_channel: int = 17
    last_channel: int = 50

    def __post_init__(self) -> None:
        if self.first_channel > self.last_channel:
            raise AllocationError("empty channel range")


@dataclass(frozen=True)
class GridSpec:
    """A flexible grid of contiguous channels of fixed spacing."""

    spacing_ghz: float = 50.0

    def __post_init__(self) -> None:
        if self.spacing_ghz <= 0:
            raise AllocationError("channel spacing must be positive")


def max_participants(
    device: AwgSpec | GridSpec,
    passband_half_width_thz: float = PASSBAND_HALF_WIDTH_THZ,
) -> int:
    """Participant capacity of a demux device behind the band filter.

    Every symmetric window pair serves two participants, so capacity is
    twice the number of such pairs that fit both the device and the
    filter passband.
    """
    if passband_half_width_thz < 0:
        raise AllocationError("passband half-width must be non-negative")
    if isinstance(device, GridSpec):
        pairs = int(passband_half_width_thz * 1e3 / device.spacing_ghz + 1e-9)
        return 2 * pairs
    count = 0
    for channel in range(device.first_channel, device.last_channel + 1):
        try:
            partner = symmetric_channel_pair(channel)
        except Exception:
            continue
        if not device.first_channel <= partner <= device.last_channel:
            continue
        if channel >= partner:
            continue  # count each pair once
        window = FrequencyWindow(itu_channel_center_frequency(channel), 100.0)
        lo_ok = window.lo_thz >= CENTER_FREQUENCY_THZ - passband_half_width_thz - 1e-9
        hi_ok = window.hi_thz <= CENTER_FREQUENCY_THZ + passband_half_width_thz + 1e-9
        if lo_ok and hi_ok:
            count += 1
    return 2 * count
