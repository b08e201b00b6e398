"""Clock recovery and pair alignment from photon timestamps alone.

Each participant sees a pulse-train comb in its own free-running clock.
Recovery estimates the comb period and phase per run ("phasor ladder"):
a coarse frequency scan over a short prefix of the run, geometric
span-doubling refinement on narrow frequency grids, and finally a
segmented phase regression that polishes the period and anchors the
grid.  The Central time bin carries twice the weight of Early/Late, so
the residue of the grid slots mod 3 can be identified locally and both
parties can label slots consistently without exchanging photons.

Pair alignment (t0) is found once by cross-correlating the two parties'
timestamps after rescaling each to source-rate units; the peak fixes the
integer pulse shift between their numbering schemes.  A clock slip shows
up downstream as a time-basis error rate near 1/2 and triggers the same
cross-correlation again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, SyncFailure

__all__ = [
    "SyncState",
    "correlation_histogram",
    "crosscorrelate_offset",
    "brute_force_offset",
    "recover_clock",
    "rescale_to_source",
    "calibrate_pair",
    "detect_slip",
]

DEFAULT_SEARCH_RANGE = 2.5e-3
DEFAULT_BIN_WIDTH = 500e-12
DEFAULT_MIN_SIGNIFICANCE = 7.0
DEFAULT_SLIP_THRESHOLD = 0.20
MIN_SLIP_BITS = 100
DEFAULT_MIN_EVENTS = 500
MAX_BRUTE_FORCE_EVENTS = 5000
SEARCH_PPM = 100.0

QUALITY_LOCKED = "locked"
QUALITY_UNLOCKED = "unlocked"
QUALITY_SLIPPED = "slipped"


@dataclass(frozen=True)
class SyncState:
    """Recovered grid of one participant, in its own local time.

    The grid slot of local time t is ``round((t - grid_origin) /
    period_estimate)``; slots 3n, 3n+2, 3n+4 hold the Early, Central and
    Late bins of pulse n.  ``reference_slot`` is the global index of the
    slot at ``reference_time``; carrying the pair (time, slot) across
    runs preserves pulse numbering through the gaps between runs.
    """

    period_estimate: float
    nominal_period: float
    reference_time: float
    reference_slot: int
    t0_offset: float = 0.0
    last_run_quality: str = QUALITY_LOCKED

    def __post_init__(self) -> None:
        if self.nominal_period <= 0:
            raise ConfigurationError("nominal_period must be positive")
        if abs(self.drift_estimate) > SEARCH_PPM * 1e-6:
            raise ConfigurationError(
                "period_estimate outside the +/-100 ppm search contract"
            )
        if self.last_run_quality not in (
            QUALITY_LOCKED,
            QUALITY_UNLOCKED,
            QUALITY_SLIPPED,
        ):
            raise ConfigurationError(
                f"unknown run quality {self.last_run_quality!r}"
            )

    @property
    def drift_estimate(self) -> float:
        """Relative deviation of the recovered period from nominal."""
        return self.period_estimate / self.nominal_period - 1.0

    @property
    def grid_origin(self) -> float:
        """Local time of grid slot 0."""
        return self.reference_time - self.reference_slot * self.period_estimate

    @property
    def phase_estimate(self) -> float:
        """Grid phase in [0, period)."""
        return self.grid_origin % self.period_estimate


# ---------------------------------------------------------------------------
# Cross-correlation offset search


def _expand_ranges(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Concatenate arange(lo[i], hi[i]) for all i, vectorized."""
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.repeat(lo, counts)
    ends = np.cumsum(counts)
    resets = np.repeat(ends - counts, counts)
    return starts + (np.arange(total, dtype=np.int64) - resets)


def _subsample(times: np.ndarray, max_events: int | None) -> np.ndarray:
    if max_events is None or len(times) <= max_events:
        return times
    stride = int(math.ceil(len(times) / max_events))
    return times[::stride]


def correlation_histogram(
    times_a: np.ndarray,
    times_b: np.ndarray,
    search_range: float = DEFAULT_SEARCH_RANGE,
    bin_width: float = DEFAULT_BIN_WIDTH,
    max_events: int | None = None,
    chunk: int = 8192,
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of pairwise differences (b - a) within the search range.

    Bins are centered on integer multiples of ``bin_width`` so that a
    rigid shift by an exact multiple is recovered exactly.  Only pairs
    inside the range contribute; the scan is windowed via searchsorted,
    not all-pairs.

    Returns:
        (bin_centers, counts)
    """
    if search_range <= 0 or bin_width <= 0:
        raise ConfigurationError("search_range and bin_width must be positive")
    if bin_width > search_range:
        raise ConfigurationError("bin_width must not exceed search_range")
    a = np.ascontiguousarray(times_a, dtype=np.float64)
    b = np.ascontiguousarray(times_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ConfigurationError("cannot correlate an empty stream")
    a = np.sort(a)
    b = np.sort(b)
    a = _subsample(a, max_events)
    b = _subsample(b, max_events)

    n_side = int(math.floor(search_range / bin_width))
    centers = np.arange(-n_side, n_side + 1, dtype=np.float64) * bin_width
    counts = np.zeros(len(centers), dtype=np.int64)
    half = bin_width / 2.0
    reach = n_side * bin_width + half

    for start in range(0, len(a), chunk):
        part = a[start : start + chunk]
        lo = np.searchsorted(b, part - reach, side="left")
        hi = np.searchsorted(b, part + reach, side="left")
        idx = _expand_ranges(lo, hi)
        if len(idx) == 0:
            continue
        reps = np.repeat(part, hi - lo)
        diffs = b[idx] - reps
        bins = np.round(diffs / bin_width).astype(np.int64) + n_side
        np.clip(bins, 0, len(centers) - 1, out=bins)
        counts += np.bincount(bins, minlength=len(centers))
    return centers, counts


def _peak_significance(counts: np.ndarray) -> float:
    background = float(np.median(counts))
    peak = float(counts.max())
    return (peak - background) / math.sqrt(background + 1.0)


def crosscorrelate_offset(
    times_a: np.ndarray,
    times_b: np.ndarray,
    search_range: float = DEFAULT_SEARCH_RANGE,
    bin_width: float = DEFAULT_BIN_WIDTH,
    min_significance: float = DEFAULT_MIN_SIGNIFICANCE,
    max_events: int | None = None,
) -> float:
    """Offset of stream b relative to stream a at the correlation peak.

    Raises:
        SyncFailure: when no histogram bin stands significantly above
            the accidental-coincidence background.
    """
    centers, counts = correlation_histogram(
        times_a, times_b, search_range, bin_width, max_events
    )
    significance = _peak_significance(counts)
    if significance < min_significance:
        raise SyncFailure(
            f"no significant correlation peak (significance "
            f"{significance:.1f} < {min_significance})"
        )
    return float(centers[int(np.argmax(counts))])


def brute_force_offset(
    times_a: np.ndarray,
    times_b: np.ndarray,
    search_range: float = DEFAULT_SEARCH_RANGE,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> float:
    """All-pairs offset search; slow reference for small instances only.

    Raises:
        ConfigurationError: on empty inputs or more than 5000 events.
    """
    a = np.asarray(times_a, dtype=np.float64)
    b = np.asarray(times_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ConfigurationError("cannot correlate an empty stream")
    if len(a) > MAX_BRUTE_FORCE_EVENTS or len(b) > MAX_BRUTE_FORCE_EVENTS:
        raise ConfigurationError(
            f"brute-force offset refuses more than {MAX_BRUTE_FORCE_EVENTS} events"
        )
    n_side = int(math.floor(search_range / bin_width))
    centers = np.arange(-n_side, n_side + 1, dtype=np.float64) * bin_width
    counts = np.zeros(len(centers), dtype=np.int64)
    half = bin_width / 2.0
    reach = n_side * bin_width + half
    for ta in a:
        diffs = b - ta
        inside = np.abs(diffs) < reach
        bins = np.round(diffs[inside] / bin_width).astype(np.int64) + n_side
        np.clip(bins, 0, len(centers) - 1, out=bins)
        counts += np.bincount(bins, minlength=len(centers))
    return float(centers[int(np.argmax(counts))])


# ---------------------------------------------------------------------------
# Per-run clock recovery


def _phasor_amplitudes(
    times: np.ndarray, freqs: np.ndarray, chunk: int = 24
) -> np.ndarray:
    """|sum_j exp(2 pi i f t_j)| for each candidate frequency."""
    out = np.empty(len(freqs), dtype=np.float64)
    for i in range(0, len(freqs), chunk):
        block = freqs[i : i + chunk, None] * times[None, :]
        out[i : i + chunk] = np.abs(np.exp(2j * np.pi * block).sum(axis=1))
    return out


def _coarse_frequency(
    t: np.ndarray,
    f_nominal: float,
    search_ppm: float,
    oversample: float = 3.0,
    min_events: int = 150,
    budget: float = 3e7,
    min_snr: float = 6.0,
) -> tuple[float, float]:
    """Acquire the comb frequency from a short prefix of the run.

    The prefix length balances scan cost against statistics: the number
    of scan points grows with the span while the event count grows with
    the rate, so the span is chosen to keep points x events near the
    budget, with a floor on the event count.

    Returns (frequency, relative step of the scan grid).

    Raises:
        SyncFailure: when the scan shows no outstanding peak.
    """
    total = t[-1] - t[0]
    if total <= 0:
        raise SyncFailure("degenerate timestamp span; cannot acquire clock")
    rate = len(t) / total
    half_hz = f_nominal * search_ppm * 1e-6
    span = math.sqrt(budget / max(2.0 * half_hz * oversample * rate, 1e-12))
    n = int(np.searchsorted(t, t[0] + span))
    n = max(n, min(len(t), min_events))
    sub = t[:n] - t[0]
    span = sub[-1]
    if span <= 0:
        raise SyncFailure("degenerate timestamp prefix; cannot acquire clock")
    df = 1.0 / (span * oversample)
    count = int(2.0 * half_hz / df) + 1
    if count > 1_200_000:
        raise SyncFailure(
            "frequency scan too fine; reduce search_ppm or supply a prior"
        )
    freqs = f_nominal + (np.arange(count) - count // 2) * df
    amps = _phasor_amplitudes(sub, freqs)
    noise = float(np.median(amps))
    spread = float(np.median(np.abs(amps - noise))) * 1.4826 + 1e-12
    best = int(np.argmax(amps))
    if (amps[best] - noise) / spread < min_snr:
        raise SyncFailure(
            "no pulse-train signature found in the frequency scan"
        )
    return float(freqs[best]), df / f_nominal


def _refine_frequency(
    t: np.ndarray,
    f_start: float,
    rel_uncertainty: float,
    oversample: float = 4.0,
    grid_points: int = 48,
    max_events: int = 50_000,
    min_stage_events: int = 200,
) -> float:
    """Span-doubling refinement of the comb frequency."""
    full = t[-1] - t[0]
    f = f_start
    unc = rel_uncertainty
    # Keep the initial span short enough that the current uncertainty
    # costs at most ~0.15 cycle of phase smear across it, but long
    # enough to contain a usable number of events.
    span = min(full, 0.15 / (f * unc)) if unc > 0 else full
    if len(t) > min_stage_events:
        span = max(span, t[min_stage_events] - t[0])
    while True:
        end = int(np.searchsorted(t, t[0] + span))
        end = max(end, min(len(t), min_stage_events))
        sub = _subsample(t[: max(end, 2)], max_events) - t[0]
        span = max(span, sub[-1])
        half_hz = 3.0 * unc * f
        df = max(2.0 * half_hz / grid_points, 1.0 / (max(sub[-1], 1e-9) * oversample))
        count = max(int(2.0 * half_hz / df) + 1, 9)
        freqs = f + (np.arange(count) - count // 2) * df
        amps = _phasor_amplitudes(sub, freqs)
        f = float(freqs[int(np.argmax(amps))])
        unc = df / f
        if span >= full:
            return f
        span = min(full, span * 2.0)


def _phase_regression(
    t: np.ndarray,
    f: float,
    n_segments: int = 24,
    max_events: int = 200_000,
) -> tuple[float, float, float]:
    """Polish the frequency and anchor the grid phase.

    Splits the run into equal-count segments, measures the phasor angle
    of each, and fits angle vs. time: the slope corrects the frequency,
    the intercept anchors the phase at the middle of the run.

    Returns:
        (frequency, anchor_local_time, coherence) where coherence is the
        fraction of events phase-aligned with the comb (0..1).
    """
    sub = _subsample(t, max_events)
    t_ref = sub[len(sub) // 2]
    x = sub - t_ref
    n_segments = max(2, min(n_segments, len(x) // 50 or 2))
    bounds = np.linspace(0, len(x), n_segments + 1, dtype=int)
    angles = np.empty(n_segments)
    weights = np.empty(n_segments)
    mids = np.empty(n_segments)
    for s in range(n_segments):
        seg = x[bounds[s] : bounds[s + 1]]
        z = np.exp(2j * np.pi * f * seg).sum()
        angles[s] = np.angle(z) / (2.0 * np.pi)
        weights[s] = abs(z)
        mids[s] = seg.mean() if len(seg) else 0.0
    # Unwrap sequentially: adjacent segments drift by far less than half
    # a cycle once the ladder has converged.
    for s in range(1, n_segments):
        angles[s] += round(angles[s - 1] - angles[s])
    wsum = weights.sum()
    if wsum <= 0:
        raise SyncFailure("phase regression lost the comb")
    w = weights / wsum
    xm = float((w * mids).sum())
    ym = float((w * angles).sum())
    var = float((w * (mids - xm) ** 2).sum())
    if var <= 0:
        slope = 0.0
    else:
        slope = float((w * (mids - xm) * (angles - ym)).sum()) / var
    f_final = f + slope
    # Events cluster at x == angle/f (mod 1/f); evaluate at the weighted
    # center to place the anchor where the fit is tightest.
    anchor_angle = ym + slope * (0.0 - xm)  # angle at x = 0, cycles
    anchor = t_ref + (anchor_angle - round(anchor_angle)) / f_final
    coherence = float(wsum) / len(x)
    return f_final, anchor, coherence


def _central_residue(
    times: np.ndarray, period: float, anchor: float, window: float
) -> tuple[int, np.ndarray]:
    """Identify which slot residue class (mod 3) holds the Central bin.

    The Central bin receives half of all photons versus a quarter each
    for Early and Late, so the heaviest residue class is Central.
    """
    slots = np.round((times - anchor) / period)
    residual = times - (anchor + slots * period)
    on_grid = np.abs(residual) <= window
    classes = (slots[on_grid].astype(np.int64)) % 3
    counts = np.bincount(classes, minlength=3)
    if counts.sum() == 0:
        raise SyncFailure("no events landed on the recovered grid")
    return int(np.argmax(counts)), counts


def recover_clock(
    timestamps: np.ndarray,
    nominal_period: float,
    prior: SyncState | None = None,
    min_events: int = DEFAULT_MIN_EVENTS,
    search_ppm: float = SEARCH_PPM,
    min_coherence: float = 0.02,
) -> SyncState:
    """Estimate the grid period and phase of one run of timestamps.

    With a locked prior the frequency search is reseeded near the prior
    estimate and the slot numbering is extrapolated across the gap so
    that pulse indices stay globally consistent; without one, numbering
    starts at the first observed pulse.

    Args:
        timestamps: one participant's local timestamps, sorted.
        nominal_period: nominal grid period in seconds.
        prior: state of the previous run, if any.
        min_events: below this count the prior is carried forward
            flagged "unlocked" (or SyncFailure is raised with no prior).
        search_ppm: half-width of the frequency acquisition range.
        min_coherence: minimum fraction of phase-aligned events for a
            lock.

    Raises:
        SyncFailure: when no comb can be acquired and there is no prior.
    """
    t = np.asarray(timestamps, dtype=np.float64)
    if np.any(np.diff(t) < 0):
        raise ConfigurationError("timestamps must be sorted")
    if len(t) < min_events:
        if prior is not None:
            return replace(prior, last_run_quality=QUALITY_UNLOCKED)
        raise SyncFailure(
            f"{len(t)} events is too few to acquire a clock (need "
            f">= {min_events})"
        )

    f_nominal = 1.0 / nominal_period
    seeded = prior is not None and prior.last_run_quality != QUALITY_UNLOCKED

    def _estimate(f_start: float, rel_unc: float) -> tuple[float, float, float]:
        f_mid = _refine_frequency(t, f_start, rel_unc)
        return _phase_regression(t, f_mid)

    try:
        if seeded:
            f_final, anchor, coherence = _estimate(
                1.0 / prior.period_estimate, 2e-6
            )
            if abs(f_final * prior.period_estimate - 1.0) > 5e-6:
                # A seeded estimate should stay close to the prior; a
                # large move means the refinement lost the comb.
                raise SyncFailure("seeded refinement diverged from prior")
        else:
            f_final, anchor, coherence = _estimate(
                *_coarse_frequency(t, f_nominal, search_ppm)
            )
    except SyncFailure:
        if not seeded:
            raise
        f_final, anchor, coherence = _estimate(
            *_coarse_frequency(t, f_nominal, search_ppm)
        )

    period = 1.0 / f_final
    if abs(period / nominal_period - 1.0) > search_ppm * 1e-6:
        raise SyncFailure(
            f"recovered period off by "
            f"{(period / nominal_period - 1.0) * 1e6:.1f} ppm, outside the "
            f"+/-{search_ppm:.0f} ppm contract"
        )
    # Pure accidentals still produce a nonzero phasor sum ~ sqrt(n) per
    # segment; require the coherence to clear that noise floor as well
    # as the absolute minimum.
    n_used = min(len(t), 200_000)
    noise_floor = 0.886 * math.sqrt(24.0 / n_used)
    if coherence < max(min_coherence, 1.8 * noise_floor):
        raise SyncFailure(
            f"comb coherence {coherence:.3f} below threshold "
            f"{max(min_coherence, 1.8 * noise_floor):.3f}"
        )

    central_class, _ = _central_residue(t, period, anchor, nominal_period / 3.0)
    anchor = anchor + ((central_class - 2) % 3) * period
    # Re-center the canonical anchor near the middle of the run, moving
    # by whole pulses so the residue labeling is preserved.
    t_mid = t[len(t) // 2]
    anchor += 3.0 * period * round((t_mid - anchor) / (3.0 * period))

    if seeded:
        blend = 0.5 * (period + prior.period_estimate)
        k_float = prior.reference_slot + (anchor - prior.reference_time) / blend
        k0 = 3 * round(k_float / 3.0)
    else:
        first_slot = round((t[0] - anchor) / period)
        k0 = -3 * math.floor(first_slot / 3.0)

    return SyncState(
        period_estimate=period,
        nominal_period=nominal_period,
        reference_time=anchor,
        reference_slot=int(k0),
        t0_offset=prior.t0_offset if prior is not None else 0.0,
        last_run_quality=QUALITY_LOCKED,
    )


# ---------------------------------------------------------------------------
# Pair alignment


def rescale_to_source(times: np.ndarray, state: SyncState) -> np.ndarray:
    """Map local timestamps onto the source-rate time axis.

    In the returned axis the grid slot k of this participant sits at
    k x nominal_period, so two participants' rescaled streams differ
    only by (an integer number of pulses) x (3 x nominal_period) plus
    residual estimation error.
    """
    scale = state.nominal_period / state.period_estimate
    return (np.asarray(times, dtype=np.float64) - state.grid_origin) * scale


def calibrate_pair(
    state_a: SyncState,
    times_a: np.ndarray,
    state_b: SyncState,
    times_b: np.ndarray,
    search_range: float = DEFAULT_SEARCH_RANGE,
    bin_width: float = DEFAULT_BIN_WIDTH,
    min_significance: float = DEFAULT_MIN_SIGNIFICANCE,
    max_events: int | None = 250_000,
) -> tuple[SyncState, float]:
    """Align participant B's pulse numbering to participant A's.

    Cross-correlates the two rescaled timestamp streams, reads the
    integer pulse shift off the peak, and folds it into B's slot
    numbering.  Returns the updated B state and the measured offset (in
    source-axis seconds).

    Raises:
        SyncFailure: if the correlation peak is not significant.
    """
    tau_a = rescale_to_source(times_a, state_a)
    tau_b = rescale_to_source(times_b, state_b)
    delta = crosscorrelate_offset(
        tau_a,
        tau_b,
        search_range=search_range,
        bin_width=bin_width,
        min_significance=min_significance,
        max_events=max_events,
    )
    pulse_period = 3.0 * state_b.nominal_period
    shift = round(delta / pulse_period)
    new_state = replace(
        state_b,
        reference_slot=state_b.reference_slot - 3 * shift,
        t0_offset=delta,
        last_run_quality=QUALITY_LOCKED,
    )
    return new_state, delta


def detect_slip(
    qber_time: float,
    threshold: float = DEFAULT_SLIP_THRESHOLD,
    n_bits: int | None = None,
) -> bool:
    """Whether a time-basis error rate reveals a clock slip.

    A slipped grid pairs unrelated pulses, pushing the time-basis QBER
    to ~0.5; values strictly above the threshold flag a slip.  With
    fewer than 100 contributing bits (when given) the verdict is always
    False because the estimate is too noisy to act on.
    """
    if not 0.0 <= qber_time <= 1.0:
        raise ConfigurationError("qber_time must lie in [0, 1]")
    if n_bits is not None and n_bits < MIN_SLIP_BITS:
        return False
    return qber_time > threshold
