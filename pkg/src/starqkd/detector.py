"""Detection and timestamping: efficiency, jitter, dark counts, dead
time, and the free-running local clock of each participant's time tagger.

Detection works on one participant's two detectors (ports 0 and 1) at a
time.  Dark counts are merged into the signal stream before the
non-extending dead-time filter, so a dark click can blind a detector to
a following photon exactly as in hardware.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ClockParams, DetectorParams
from .errors import ConfigurationError
from .source import FWHM_TO_SIGMA, PhotonStream

__all__ = [
    "DetectionBatch",
    "DetectionRecord",
    "LocalClock",
    "detect",
    "timestamp",
    "dead_time_filter",
    "write_timestamps",
    "read_timestamps",
]

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but be safe
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _dead_time_keep(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Non-extending dead-time mask over one detector's sorted clicks."""
    n = times.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    last = -np.inf
    for i in range(n):
        if times[i] - last >= dead_time:
            keep[i] = True
            last = times[i]
    return keep


def dead_time_filter(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Boolean mask of clicks surviving a non-extending dead time.

    A click is kept iff it falls at least ``dead_time`` after the last
    *kept* click; rejected clicks do not restart the hold-off.
    """
    times = np.ascontiguousarray(times, dtype=np.float64)
    if np.any(np.diff(times) < 0):
        raise ConfigurationError("click times must be sorted")
    if dead_time < 0:
        raise ConfigurationError("dead_time must be non-negative")
    if dead_time == 0 or len(times) == 0:
        return np.ones(len(times), dtype=bool)
    return np.asarray(_dead_time_keep(times, dead_time))


@dataclass
class DetectionBatch:
    """All accepted clicks of one participant, sorted by true time.

    ``origin_pulse``/``origin_bin`` are simulation ground truth (-1 for
    dark counts); protocol code must only look at timestamps and ports.
    """

    participant: str
    true_times: np.ndarray
    ports: np.ndarray
    origin_pulse: np.ndarray
    origin_bin: np.ndarray
    local_timestamps: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.true_times)
        for arr in (self.ports, self.origin_pulse, self.origin_bin):
            if len(arr) != n:
                raise ConfigurationError("detection arrays must align")

    def __len__(self) -> int:
        return len(self.true_times)

    def port_times(self, port: int) -> np.ndarray:
        return self.true_times[self.ports == port]


@dataclass(frozen=True)
class DetectionRecord:
    """One click, scalar view (used for iteration and export)."""

    detector_id: str
    true_time: float
    local_timestamp: float
    origin_pulse: int
    origin_bin: int

    @property
    def is_dark(self) -> bool:
        return self.origin_pulse < 0


def detect(
    stream: PhotonStream,
    det: DetectorParams,
    span: tuple[float, float],
    rng: np.random.Generator,
    participant: str = "receiver",
    sample_efficiency: bool = True,
) -> DetectionBatch:
    """Turn photon arrivals into accepted detector clicks.

    Per photon: survive with the quantum efficiency (unless the stream
    was pre-thinned), jitter the time by a Gaussian of the configured
    FWHM, merge with a uniform dark-count process over ``span``, then
    apply the dead time separately per port.

    Args:
        stream: photon arrivals for this participant, sorted in time.
        det: detector settings shared by both ports.
        span: (start, stop) of the observation window in seconds; dark
            counts are generated over this window.
        rng: random generator.
        participant: label recorded on the output batch.
        sample_efficiency: when False, efficiency thinning is skipped
            because the source already folded it into survival sampling.
    """
    t0, t1 = span
    if t1 < t0:
        raise ConfigurationError("span must satisfy start <= stop")

    times = stream.times
    ports = stream.port
    pulses = stream.pulse_index
    bins = stream.bin_index
    if sample_efficiency and det.efficiency < 1.0:
        keep = rng.random(len(times)) < det.efficiency
        times, ports = times[keep], ports[keep]
        pulses, bins = pulses[keep], bins[keep]

    if det.jitter_fwhm > 0 and len(times):
        times = times + rng.normal(0.0, det.jitter_fwhm / FWHM_TO_SIGMA, len(times))

    # Dark counts: homogeneous Poisson per port over the span.
    dark_parts = []
    for port in (0, 1):
        n_dark = rng.poisson(det.dark_count_rate * (t1 - t0))
        dark_times = rng.uniform(t0, t1, size=n_dark)
        dark_parts.append((dark_times, port))

    all_times = np.concatenate([times] + [d[0] for d in dark_parts])
    all_ports = np.concatenate(
        [ports]
        + [np.full(len(d[0]), d[1], dtype=np.int8) for d in dark_parts]
    )
    all_pulses = np.concatenate(
        [pulses]
        + [np.full(len(d[0]), -1, dtype=np.int64) for d in dark_parts]
    )
    all_bins = np.concatenate(
        [bins] + [np.full(len(d[0]), -1, dtype=np.int8) for d in dark_parts]
    )

    order = np.argsort(all_times, kind="stable")
    all_times = all_times[order]
    all_ports = all_ports[order]
    all_pulses = all_pulses[order]
    all_bins = all_bins[order]

    keep = np.zeros(len(all_times), dtype=bool)
    for port in (0, 1):
        on_port = all_ports == port
        keep[on_port] = dead_time_filter(all_times[on_port], det.dead_time)

    return DetectionBatch(
        participant=participant,
        true_times=all_times[keep],
        ports=all_ports[keep],
        origin_pulse=all_pulses[keep],
        origin_bin=all_bins[keep],
    )


@dataclass
class LocalClock:
    """Free-running clock: offset, rate error, and a random walk.

    The walk is realized lazily at the times handed to
    :meth:`transform`; its state persists across calls so one clock can
    timestamp many consecutive runs of a session.  The realized
    transform is kept monotone by resampling (vanishingly rare)
    increments that would fold time backwards.
    """

    params: ClockParams
    rng: np.random.Generator = field(
        default_factory=lambda: np.random.default_rng()
    )
    _last_time: float | None = None
    _last_walk: float = 0.0

    def transform(self, times: np.ndarray) -> np.ndarray:
        """Local timestamps for sorted true times, quantized to the
        tagger resolution."""
        times = np.asarray(times, dtype=np.float64)
        if (
            times.size
            and self._last_time is not None
            and times[0] < self._last_time
        ):
            raise ConfigurationError(
                "clock already advanced past the requested times"
            )
        if np.any(np.diff(times) < 0):
            raise ConfigurationError("times must be sorted")
        walk = np.zeros(times.size)
        if times.size:
            # The walk is anchored at the first click ever seen; the
            # unobservable span before it is absorbed into the offset.
            prev = self._last_time if self._last_time is not None else times[0]
            dt = np.diff(times, prepend=prev)
            sigma = self.params.random_walk_sigma * np.sqrt(dt)
            rate = 1.0 + self.params.frequency_error
            increments = self.rng.normal(0.0, sigma)
            # Monotonicity: the realized local clock must never run
            # backwards between consecutive clicks.
            bad = rate * dt + increments < 0.0
            while np.any(bad):
                increments[bad] = self.rng.normal(0.0, sigma[bad])
                bad = rate * dt + increments < 0.0
            walk = self._last_walk + np.cumsum(increments)
            self._last_time = float(times[-1])
            self._last_walk = float(walk[-1])
        local = (
            self.params.offset
            + (1.0 + self.params.frequency_error) * times
            + walk
        )
        res = self.params.resolution
        return np.round(local / res) * res


def timestamp(batch: DetectionBatch, clock: LocalClock) -> DetectionBatch:
    """Fill a batch's local timestamps through the participant's clock."""
    batch.local_timestamps = clock.transform(batch.true_times)
    return batch


def _records(batch: DetectionBatch):
    if batch.local_timestamps is None:
        raise ConfigurationError("batch has no local timestamps yet")
    for i in range(len(batch)):
        yield DetectionRecord(
            detector_id=f"{batch.participant}:{int(batch.ports[i])}",
            true_time=float(batch.true_times[i]),
            local_timestamp=float(batch.local_timestamps[i]),
            origin_pulse=int(batch.origin_pulse[i]),
            origin_bin=int(batch.origin_bin[i]),
        )


def write_timestamps(path: str | Path, batch: DetectionBatch) -> None:
    """Export a timestamped batch as CSV: integer picoseconds, detector id.

    Rows are ordered by timestamp; detector id is ``participant:port``.
    """
    if batch.local_timestamps is None:
        raise ConfigurationError("batch has no local timestamps yet")
    path = Path(path)
    order = np.argsort(batch.local_timestamps, kind="stable")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["local_timestamp_ps", "detector_id"])
        for i in order:
            ps = int(round(batch.local_timestamps[i] * 1e12))
            writer.writerow([ps, f"{batch.participant}:{int(batch.ports[i])}"])


def read_timestamps(path: str | Path) -> DetectionBatch:
    """Read a timestamp CSV back into a batch.

    Ground-truth origin columns do not exist in the external format, so
    they come back as -1 (unknown).
    """
    path = Path(path)
    timestamps: list[float] = []
    ports: list[int] = []
    participant = "external"
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["local_timestamp_ps", "detector_id"]:
            raise ConfigurationError(
                f"{path}: expected header 'local_timestamp_ps,detector_id'"
            )
        for row in reader:
            if not row:
                continue
            if len(row) < 2:
                raise ConfigurationError(f"{path}: malformed row {row!r}")
            try:
                ps = int(row[0])
            except ValueError as exc:
                raise ConfigurationError(
                    f"{path}: bad timestamp {row[0]!r}"
                ) from exc
            det = row[1]
            if ":" in det:
                participant, port_txt = det.rsplit(":", 1)
            else:
                port_txt = det
            try:
                port = int(port_txt)
            except ValueError as exc:
                raise ConfigurationError(f"{path}: bad detector id {det!r}") from exc
            if port not in (0, 1):
                raise ConfigurationError(f"{path}: port must be 0 or 1, got {port}")
            timestamps.append(ps * 1e-12)
            ports.append(port)
    ts = np.asarray(timestamps)
    order = np.argsort(ts, kind="stable")
    n = len(ts)
    return DetectionBatch(
        participant=participant,
        true_times=ts[order],
        ports=np.asarray(ports, dtype=np.int8)[order],
        origin_pulse=np.full(n, -1, dtype=np.int64),
        origin_bin=np.full(n, -1, dtype=np.int8),
        local_timestamps=ts[order],
    )
