"""Classical protocol core: classification, sifting, QBER, key rate.

Receivers never see pulse indices directly; they classify their local
timestamps onto the half-delay time grid.  Grid positions 3n, 3n+2 and
3n+4 hold the Early, Central and Late bins of pulse n, so consecutive
pulses interleave: the Late bin of pulse n and the Early bin of pulse
n+1 coexist at distinct grid slots.  Outer bins give time-basis bits
(Early 0, Late 1); the central bin gives phase-basis bits from the
detector port.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigurationError, EmptySiftError
from .outcome import TimeBin

__all__ = [
    "Basis",
    "Qubit",
    "QubitStream",
    "SiftResult",
    "QberEstimate",
    "RateReport",
    "classify",
    "qubit_stream",
    "sift",
    "estimate_qber",
    "binary_entropy",
    "secure_rate",
    "rate_report",
]

DEFAULT_WINDOW_HALF_WIDTH = 500e-12
DEFAULT_DISCLOSED_FRACTION = 0.1
RECONCILIATION_EFFICIENCY = 1.5


class Basis(IntEnum):
    TIME = 0
    PHASE = 1


@dataclass(frozen=True)
class Qubit:
    """One classified detection, scalar view."""

    pulse_index: int
    basis: Basis
    bit: int
    port: int
    bin: TimeBin

    def __post_init__(self) -> None:
        expected_basis = Basis.PHASE if self.bin == TimeBin.CENTRAL else Basis.TIME
        if self.basis != expected_basis:
            raise ConfigurationError(
                f"bin {self.bin.name} implies basis {expected_basis.name}"
            )
        expected_bit = (
            self.port if self.basis == Basis.PHASE else int(self.bin == TimeBin.LATE)
        )
        if self.bit != expected_bit:
            raise ConfigurationError(
                f"bit {self.bit} inconsistent with bin/port ({self.bin.name}, "
                f"{self.port})"
            )
        if self.pulse_index < 0:
            raise ConfigurationError("pulse_index must be non-negative")


@dataclass
class QubitStream:
    """Classified detections of one participant, as parallel arrays."""

    pulse: np.ndarray
    bin: np.ndarray
    port: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.pulse) == len(self.bin) == len(self.port)):
            raise ConfigurationError("qubit stream arrays must align")

    def __len__(self) -> int:
        return len(self.pulse)

    @property
    def basis(self) -> np.ndarray:
        return np.where(self.bin == TimeBin.CENTRAL, Basis.PHASE, Basis.TIME).astype(
            np.int8
        )

    @property
    def bit(self) -> np.ndarray:
        return np.where(
            self.bin == TimeBin.CENTRAL, self.port, self.bin == TimeBin.LATE
        ).astype(np.uint8)

    def __getitem__(self, i: int) -> Qubit:
        b = TimeBin(int(self.bin[i]))
        basis = Basis.PHASE if b == TimeBin.CENTRAL else Basis.TIME
        bit = int(self.port[i]) if basis == Basis.PHASE else int(b == TimeBin.LATE)
        return Qubit(
            pulse_index=int(self.pulse[i]),
            basis=basis,
            bit=bit,
            port=int(self.port[i]),
            bin=b,
        )


def classify(
    times: np.ndarray,
    period: float,
    phase: float = 0.0,
    window_half_width: float = DEFAULT_WINDOW_HALF_WIDTH,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Snap timestamps to the time grid and decode (pulse, bin).

    The grid has one slot every ``period`` seconds (half an
    interferometer delay), anchored at ``phase``.  Grid index residues
    mod 3 decode as: 0 -> Early of pulse g/3, 2 -> Central of pulse
    (g-2)/3, 1 -> Late of pulse (g-4)/3.

    Args:
        times: timestamps in seconds (any order).
        period: grid spacing in seconds.
        phase: time of grid slot 0.
        window_half_width: acceptance radius around each slot; must not
            exceed half the spacing.

    Returns:
        ``(pulse, bin, ok)`` arrays; entries with ``ok`` False were off
        the grid or decoded to an impossible slot and must be dropped.
    """
    if period <= 0:
        raise ConfigurationError("grid period must be positive")
    if not 0 < window_half_width <= period / 2:
        raise ConfigurationError(
            "window_half_width must lie in (0, period/2]"
        )
    times = np.asarray(times, dtype=np.float64)
    slots = np.round((times - phase) / period)
    residual = times - (phase + slots * period)
    ok = np.abs(residual) <= window_half_width
    g = slots.astype(np.int64)
    residue = np.mod(g, 3)

    pulse = np.empty(len(times), dtype=np.int64)
    bin_index = np.empty(len(times), dtype=np.int8)

    is_early = residue == 0
    is_central = residue == 2
    is_late = residue == 1
    pulse[is_early] = g[is_early] // 3
    bin_index[is_early] = TimeBin.EARLY
    pulse[is_central] = (g[is_central] - 2) // 3
    bin_index[is_central] = TimeBin.CENTRAL
    pulse[is_late] = (g[is_late] - 4) // 3
    bin_index[is_late] = TimeBin.LATE

    ok &= g >= 0
    ok &= ~(is_late & (g < 4))
    pulse[~ok] = -1
    return pulse, bin_index, ok


def qubit_stream(
    times: np.ndarray,
    ports: np.ndarray,
    period: float,
    phase: float = 0.0,
    window_half_width: float = DEFAULT_WINDOW_HALF_WIDTH,
) -> QubitStream:
    """Classify a timestamp/port stream into qubits, dropping rejects."""
    pulse, bin_index, ok = classify(times, period, phase, window_half_width)
    ports = np.asarray(ports)
    return QubitStream(
        pulse=pulse[ok], bin=bin_index[ok], port=ports[ok].astype(np.int8)
    )


@dataclass
class SiftResult:
    """Outcome of basis reconciliation between two participants.

    QBER fields compare the two sifted keys bit-by-bit (simulation
    ground truth); a protocol-visible estimate comes from
    :func:`estimate_qber`.
    """

    key_bits_a: np.ndarray
    key_bits_b: np.ndarray
    matched_pulses: np.ndarray
    basis: np.ndarray
    qber_time: float
    qber_phase: float
    qber_total: float

    def __post_init__(self) -> None:
        n = len(self.key_bits_a)
        if not (len(self.key_bits_b) == len(self.matched_pulses) == len(self.basis) == n):
            raise ConfigurationError("sift arrays must align")
        for q in (self.qber_time, self.qber_phase, self.qber_total):
            if not 0.0 <= q <= 1.0:
                raise ConfigurationError("QBER must lie in [0, 1]")

    @property
    def sifted_count(self) -> int:
        return len(self.key_bits_a)


def _single_detection_rows(stream: QubitStream) -> tuple[np.ndarray, np.ndarray]:
    """Pulse indices observed exactly once, and their row positions."""
    order = np.argsort(stream.pulse, kind="stable")
    sorted_pulses = stream.pulse[order]
    unique, first, counts = np.unique(
        sorted_pulses, return_index=True, return_counts=True
    )
    singles = counts == 1
    return unique[singles], order[first[singles]]


def sift(stream_a: QubitStream, stream_b: QubitStream) -> SiftResult:
    """Keep pulses where both sides saw exactly one qubit, same basis.

    Pulses with multiple detections on either side are discarded
    entirely; basis-mismatched coincidences are discarded; surviving
    bits are ordered by pulse index.
    """
    pulses_a, rows_a = _single_detection_rows(stream_a)
    pulses_b, rows_b = _single_detection_rows(stream_b)
    _, ia, ib = np.intersect1d(
        pulses_a, pulses_b, assume_unique=True, return_indices=True
    )
    rows_a = rows_a[ia]
    rows_b = rows_b[ib]

    basis_a = stream_a.basis[rows_a]
    same_basis = basis_a == stream_b.basis[rows_b]
    rows_a = rows_a[same_basis]
    rows_b = rows_b[same_basis]

    bits_a = stream_a.bit[rows_a]
    bits_b = stream_b.bit[rows_b]
    basis = basis_a[same_basis]
    pulses = stream_a.pulse[rows_a]

    errors = bits_a != bits_b
    in_time = basis == Basis.TIME
    n_time = int(np.count_nonzero(in_time))
    n_phase = len(basis) - n_time
    qber_time = float(np.count_nonzero(errors & in_time)) / n_time if n_time else 0.0
    qber_phase = (
        float(np.count_nonzero(errors & ~in_time)) / n_phase if n_phase else 0.0
    )
    qber_total = float(np.count_nonzero(errors)) / len(basis) if len(basis) else 0.0

    return SiftResult(
        key_bits_a=bits_a.astype(np.uint8),
        key_bits_b=bits_b.astype(np.uint8),
        matched_pulses=pulses,
        basis=basis.astype(np.int8),
        qber_time=qber_time,
        qber_phase=qber_phase,
        qber_total=qber_total,
    )


@dataclass(frozen=True)
class QberEstimate:
    """Publicly estimated QBER and the bits spent obtaining it."""

    q: float
    disclosed_indices: np.ndarray
    n_disclosed: int


def estimate_qber(
    result: SiftResult,
    disclosed_fraction: float = DEFAULT_DISCLOSED_FRACTION,
    rng: np.random.Generator | None = None,
) -> QberEstimate:
    """Estimate QBER by disclosing a random sample of the sifted key.

    Discloses ceil(fraction x count) bits without replacement; those
    positions must be dropped from key material afterwards.

    Raises:
        EmptySiftError: when there are no sifted bits to sample.
    """
    if not 0.0 < disclosed_fraction <= 1.0:
        raise ConfigurationError("disclosed_fraction must lie in (0, 1]")
    if result.sifted_count == 0:
        raise EmptySiftError("cannot estimate QBER from an empty sifted key")
    rng = rng or np.random.default_rng()
    n = math.ceil(disclosed_fraction * result.sifted_count)
    indices = rng.choice(result.sifted_count, size=n, replace=False)
    mismatches = np.count_nonzero(
        result.key_bits_a[indices] != result.key_bits_b[indices]
    )
    return QberEstimate(
        q=mismatches / n, disclosed_indices=np.sort(indices), n_disclosed=n
    )


def binary_entropy(q):
    """Shannon entropy of a bit with bias q, in bits; h(0) = h(1) = 0."""
    q = np.asarray(q, dtype=np.float64)
    if np.any((q < 0) | (q > 1)):
        raise ConfigurationError("q must lie in [0, 1]")
    out = np.zeros_like(q)
    interior = (q > 0) & (q < 1)
    qi = q[interior]
    out[interior] = -qi * np.log2(qi) - (1.0 - qi) * np.log2(1.0 - qi)
    if out.ndim == 0:
        return float(out)
    return out


def secure_rate(r_sift: float, q: float, f: float = RECONCILIATION_EFFICIENCY) -> float:
    """Asymptotic secure key rate after reconciliation at efficiency f.

    r_sec = r_sift * (1 - (1 + f) * h(q)), clamped below at zero.
    """
    if not 0.0 <= q <= 0.5:
        raise ConfigurationError("q must lie in [0, 0.5]")
    if f < 1.0:
        raise ConfigurationError("reconciliation efficiency must be >= 1")
    if r_sift < 0:
        raise ConfigurationError("r_sift must be non-negative")
    return max(0.0, r_sift * (1.0 - (1.0 + f) * binary_entropy(q)))


@dataclass(frozen=True)
class RateReport:
    """Sifted and secure rates of one evaluation interval."""

    r_sift: float
    q: float
    f: float = RECONCILIATION_EFFICIENCY
    r_sec: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "r_sec", secure_rate(self.r_sift, self.q, self.f))


def rate_report(r_sift: float, q: float, f: float = RECONCILIATION_EFFICIENCY) -> RateReport:
    """Build a rate report with r_sec filled in via :func:`secure_rate`."""
    return RateReport(r_sift=r_sift, q=q, f=f)
