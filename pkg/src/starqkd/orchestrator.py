"""Session orchestration: runs the full bench and collects reports.

One session simulates a sequence of fixed-length runs separated by
intermissions.  Per run and per participant pair: entangled photons are
generated at the hub, propagated down each arm, detected and
timestamped against free-running local clocks; each side recovers the
pulse grid from its own timestamps, the pair alignment found on the
very first run (consumed for calibration) carries forward, and the
sifted key with its error rates feeds both the slip detector and the
temperature controller.

Pairs are independent — different wavelength slices of one source — so
they simulate concurrently on separate RNG substreams derived from the
scenario seed; reports merge deterministically afterwards.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .control import (
    ControllerSettings,
    ControllerState,
    control_step,
    drift_process,
    phase_from_temperature,
)
from .core import INTERFEROMETER_DELAY, PhaseState
from .detector import DetectionBatch, LocalClock, detect, timestamp, write_timestamps
from .errors import ConfigurationError
from .fiber import propagate, transmission_probability
from .protocol import Basis, qubit_stream, rate_report, sift
from .scenario import Scenario
from .source import PhotonStream, generate_photon_streams
from .sync import calibrate_pair, detect_slip, recover_clock
from .wdm import Pairing, awg_plan

__all__ = [
    "RunReport",
    "CSV_COLUMNS",
    "run_pair_session",
    "run_scenario",
    "run_channel_sweep",
    "summarize",
    "emit_report",
    "read_report",
    "SWEEP_COLUMNS",
]

GRID = INTERFEROMETER_DELAY / 2.0

CSV_COLUMNS = [
    "run_index",
    "pair",
    "sifted_count",
    "r_sift_bps",
    "qber_time",
    "qber_phase",
    "qber_total",
    "r_sec_bps",
    "delta_T_mK",
    "recalibrated",
    "slipped",
]

SWEEP_COLUMNS = [
    "channel",
    "partner_channel",
    "mu",
    "r_sift_bps_mean",
    "qber_total_mean",
    "r_sec_bps_mean",
]


@dataclass(frozen=True)
class RunReport:
    """Per-run, per-pair outcome of a session."""

    run_index: int
    pair: str
    sifted_count: int
    r_sift_bps: float
    qber_time: float
    qber_phase: float
    qber_total: float
    r_sec_bps: float
    delta_T_mK: float
    recalibrated: bool
    slipped: bool


def _rng(seed: int, pair_index: int, run_index: int, stage: int):
    seq = np.random.SeedSequence(
        entropy=seed, spawn_key=(pair_index, run_index, stage)
    )
    return np.random.default_rng(seq)


def _session_rng(seed: int, pair_index: int, stream: int):
    # Session-lifetime streams (clocks, drift) are keyed outside the
    # per-run stage space.
    seq = np.random.SeedSequence(
        entropy=seed, spawn_key=(pair_index, 1_000_000, stream)
    )
    return np.random.default_rng(seq)


def _shifted(stream: PhotonStream, offset: float) -> PhotonStream:
    return PhotonStream(
        stream.times + offset,
        stream.pulse_index,
        stream.bin_index,
        stream.port,
    )


def run_pair_session(
    scenario: Scenario,
    pair_index: int,
    output_dir: str | Path | None = None,
) -> list[RunReport]:
    """Simulate one participant pair through the whole session."""
    pairing: Pairing = scenario.pairings[pair_index]
    name_a, name_b = pairing.participant_a, pairing.participant_b
    pair_label = f"{name_a}-{name_b}"
    spec_a = scenario.participant(name_a)
    spec_b = scenario.participant(name_b)
    schedule = scenario.schedule
    ctrl_cfg = scenario.control
    sync_cfg = scenario.sync

    survival_a = transmission_probability(spec_a.link) * spec_a.detector.efficiency
    survival_b = transmission_probability(spec_b.link) * spec_b.detector.efficiency

    clock_a = LocalClock(spec_a.clock, _session_rng(scenario.seed, pair_index, 0))
    clock_b = LocalClock(spec_b.clock, _session_rng(scenario.seed, pair_index, 1))
    drift_rng = _session_rng(scenario.seed, pair_index, 2)

    controller = ControllerState()
    controller_settings = ControllerSettings(
        deadband=ctrl_cfg.deadband,
        max_step_mk=ctrl_cfg.max_step_mk,
        visibility=scenario.source.visibility,
    )

    alpha = spec_a.initial_phase
    beta = spec_b.initial_phase
    sync_a = sync_b = None
    phase_errors = 0
    phase_bits = 0
    reports: list[RunReport] = []

    # Each receiver's observation window trails the emission window by
    # its link delay; with back-to-back runs the windows would otherwise
    # overlap the tail of the previous run's (delayed) arrivals.
    delay_a = spec_a.link.base_delay
    delay_b = spec_b.link.base_delay

    for run_index in range(schedule.runs):
        t_start = schedule.run_start(run_index)
        span_a = (t_start + delay_a, t_start + schedule.run_length + delay_a)
        span_b = (t_start + delay_b, t_start + schedule.run_length + delay_b)

        if run_index > 0 and ctrl_cfg.drift_rate > 0.0:
            alpha += drift_process(schedule.cycle, ctrl_cfg.drift_rate, drift_rng)
            beta += drift_process(schedule.cycle, ctrl_cfg.drift_rate, drift_rng)

        phase = PhaseState(
            alpha=alpha,
            beta=beta,
            phi=scenario.source.pump_phase_phi,
            temp_coeff_a=spec_a.temp_coeff,
            temp_coeff_b=spec_b.temp_coeff,
        )
        stream_a, stream_b = generate_photon_streams(
            scenario.source,
            pairing.mu,
            schedule.run_length,
            _rng(scenario.seed, pair_index, run_index, 0),
            phase=phase,
            survival_a=survival_a,
            survival_b=survival_b,
        )
        stream_a = _shifted(stream_a, t_start)
        stream_b = _shifted(stream_b, t_start)

        arrived_a = propagate(
            stream_a,
            spec_a.link,
            _rng(scenario.seed, pair_index, run_index, 1),
            window=pairing.window_a,
            sample_loss=False,
        )
        arrived_b = propagate(
            stream_b,
            spec_b.link,
            _rng(scenario.seed, pair_index, run_index, 2),
            window=pairing.window_b,
            sample_loss=False,
        )
        batch_a = detect(
            arrived_a,
            spec_a.detector,
            span_a,
            _rng(scenario.seed, pair_index, run_index, 3),
            participant=name_a,
            sample_efficiency=False,
        )
        batch_b = detect(
            arrived_b,
            spec_b.detector,
            span_b,
            _rng(scenario.seed, pair_index, run_index, 4),
            participant=name_b,
            sample_efficiency=False,
        )
        timestamp(batch_a, clock_a)
        timestamp(batch_b, clock_b)
        if scenario.export_timestamps and output_dir is not None:
            _export(output_dir, scenario, pair_label, run_index, batch_a, batch_b)

        sync_a = recover_clock(
            batch_a.local_timestamps,
            GRID,
            prior=sync_a,
            min_events=sync_cfg.min_events,
        )
        sync_b = recover_clock(
            batch_b.local_timestamps,
            GRID,
            prior=sync_b,
            min_events=sync_cfg.min_events,
        )

        if run_index == 0:
            # The first run is consumed whole to establish the pair
            # time offset; it yields no key material.
            sync_b, _ = calibrate_pair(
                sync_a,
                batch_a.local_timestamps,
                sync_b,
                batch_b.local_timestamps,
                search_range=sync_cfg.search_range,
                bin_width=sync_cfg.bin_width,
            )
            continue

        qubits_a = qubit_stream(
            batch_a.local_timestamps,
            batch_a.ports,
            sync_a.period_estimate,
            sync_a.grid_origin,
        )
        qubits_b = qubit_stream(
            batch_b.local_timestamps,
            batch_b.ports,
            sync_b.period_estimate,
            sync_b.grid_origin,
        )
        result = sift(qubits_a, qubits_b)
        n_time = int(np.count_nonzero(result.basis == Basis.TIME))
        n_phase = result.sifted_count - n_time

        slipped = detect_slip(
            result.qber_time,
            threshold=sync_cfg.slip_threshold,
            n_bits=n_time,
        )
        recalibrated = False
        if slipped:
            # Re-run the offset search so the NEXT run is aligned
            # again; this run's bits are already compromised and the
            # clamped secure rate discards them.
            sync_b, _ = calibrate_pair(
                sync_a,
                batch_a.local_timestamps,
                sync_b,
                batch_b.local_timestamps,
                search_range=sync_cfg.search_range,
                bin_width=sync_cfg.bin_width,
            )
            recalibrated = True

        rates = rate_report(
            result.sifted_count / schedule.run_length, result.qber_total
        )

        adjustment = 0.0
        if not slipped:
            phase_errors += int(round(result.qber_phase * n_phase))
            phase_bits += n_phase
        if (
            ctrl_cfg.enabled
            and run_index % ctrl_cfg.cadence_runs == 0
            and phase_bits > 0
        ):
            qber_phase_agg = phase_errors / phase_bits
            adjustment, controller = control_step(
                controller,
                qber_phase_agg,
                time=t_start,
                n_bits=phase_bits,
                settings=controller_settings,
            )
            alpha += phase_from_temperature(adjustment, spec_a.temp_coeff)
            phase_errors = 0
            phase_bits = 0

        reports.append(
            RunReport(
                run_index=run_index,
                pair=pair_label,
                sifted_count=result.sifted_count,
                r_sift_bps=rates.r_sift,
                qber_time=result.qber_time,
                qber_phase=result.qber_phase,
                qber_total=result.qber_total,
                r_sec_bps=rates.r_sec,
                delta_T_mK=adjustment,
                recalibrated=recalibrated,
                slipped=slipped,
            )
        )
    return reports


def _export(
    output_dir: str | Path,
    scenario: Scenario,
    pair_label: str,
    run_index: int,
    batch_a: DetectionBatch,
    batch_b: DetectionBatch,
) -> None:
    base = Path(output_dir)
    base.mkdir(parents=True, exist_ok=True)
    for batch in (batch_a, batch_b):
        name = f"{scenario.name}_{pair_label}_run{run_index:03d}_{batch.participant}.csv"
        write_timestamps(base / name, batch)


def _session_worker(args) -> list[RunReport]:
    scenario, pair_index, output_dir = args
    return run_pair_session(scenario, pair_index, output_dir)


def run_scenario(
    scenario: Scenario,
    output_dir: str | Path | None = None,
    max_workers: int | None = None,
) -> list[RunReport]:
    """Simulate every pair of a scenario and merge the reports.

    Pairs run in separate processes when there is more than one; the
    merge order (run index, then pair label) and the per-pair RNG
    substreams make the output independent of scheduling.
    """
    n_pairs = len(scenario.pairings)
    if n_pairs == 0:
        raise ConfigurationError("scenario has no pairings to simulate")
    jobs = [(scenario, i, output_dir) for i in range(n_pairs)]
    if max_workers is None:
        max_workers = min(n_pairs, os.cpu_count() or 1)
    if n_pairs == 1 or max_workers <= 1:
        per_pair = [_session_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            per_pair = list(pool.map(_session_worker, jobs))
    merged = [report for session in per_pair for report in session]
    merged.sort(key=lambda r: (r.run_index, r.pair))
    return merged


def run_channel_sweep(
    scenario: Scenario,
    channels: range | list[int] | None = None,
    max_workers: int | None = None,
) -> list[dict]:
    """Re-run one pair over the symmetric wavelength channel pairs.

    The base scenario must use the channel-router (awg) device; its
    first pairing's participants are re-tuned to each requested channel
    with everything else held fixed.

    Returns one summary row per channel.
    """
    if channels is None:
        channels = range(17, 34)
    channels = list(channels)
    if not channels:
        raise ConfigurationError("channel sweep needs at least one channel")
    if not scenario.pairings:
        raise ConfigurationError("scenario has no pairings to sweep")
    if not scenario.plan.device.startswith("awg"):
        raise ConfigurationError(
            "channel sweep needs a fixed-grating (awg) base scenario"
        )
    base_pairing = scenario.pairings[0]
    rows = []
    for channel in channels:
        plan = awg_plan(
            [(base_pairing.participant_a, base_pairing.participant_b, channel)],
            shg_power=scenario.source.shg_power,
        )
        sub = Scenario(
            name=f"{scenario.name}-c{channel}",
            seed=scenario.seed,
            source=scenario.source,
            plan=plan,
            participants=scenario.participants,
            schedule=scenario.schedule,
            control=scenario.control,
            sync=scenario.sync,
        )
        reports = run_scenario(sub, max_workers=max_workers)
        stats = next(iter(summarize(reports).values()))
        rows.append(
            {
                "channel": channel,
                "partner_channel": 67 - channel,
                "mu": plan.pairings[0].mu,
                "r_sift_bps_mean": stats["r_sift_mean"],
                "qber_total_mean": stats["qber_mean"],
                "r_sec_bps_mean": stats["r_sec_mean"],
            }
        )
    return rows


def summarize(reports: list[RunReport]) -> dict[str, dict]:
    """Per-pair mean/spread statistics recomputed from report rows."""
    if not reports:
        raise ConfigurationError("no reports to summarize")
    pairs: dict[str, list[RunReport]] = {}
    for report in reports:
        pairs.setdefault(report.pair, []).append(report)
    out = {}
    for pair, rows in sorted(pairs.items()):
        sift_rates = np.array([r.r_sift_bps for r in rows])
        qbers = np.array([r.qber_total for r in rows])
        sec_rates = np.array([r.r_sec_bps for r in rows])
        out[pair] = {
            "runs": len(rows),
            "sifted_total": int(sum(r.sifted_count for r in rows)),
            "r_sift_mean": float(sift_rates.mean()),
            "r_sift_std": float(sift_rates.std()),
            "qber_mean": float(qbers.mean()),
            "qber_std": float(qbers.std()),
            "r_sec_mean": float(sec_rates.mean()),
            "r_sec_std": float(sec_rates.std()),
            "recalibrations": sum(1 for r in rows if r.recalibrated),
            "slips": sum(1 for r in rows if r.slipped),
        }
    return out


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        # repr is the shortest exact form, so written reports re-parse
        # to identical rows and equal seeds give identical bytes.
        return repr(value)
    return str(value)


def emit_report(
    reports: list[RunReport],
    fmt: str = "csv",
    path: str | Path | None = None,
) -> str:
    """Render reports as CSV rows or a per-pair text summary.

    Returns the rendered text; writes it to ``path`` when given.
    """
    if not reports:
        raise ConfigurationError("no reports to emit")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for report in reports:
            writer.writerow(
                [_format_value(getattr(report, col)) for col in CSV_COLUMNS]
            )
        text = buf.getvalue()
    elif fmt == "text":
        lines = []
        for pair, stats in summarize(reports).items():
            lines.append(f"pair {pair}: {stats['runs']} runs")
            lines.append(
                f"  sifted rate  {stats['r_sift_mean']:8.1f} +/- "
                f"{stats['r_sift_std']:.1f} bit/s "
                f"({stats['sifted_total']} bits total)"
            )
            lines.append(
                f"  QBER         {100 * stats['qber_mean']:8.2f} +/- "
                f"{100 * stats['qber_std']:.2f} %"
            )
            lines.append(
                f"  secure rate  {stats['r_sec_mean']:8.1f} +/- "
                f"{stats['r_sec_std']:.1f} bit/s"
            )
            lines.append(
                f"  recalibrations {stats['recalibrations']}, "
                f"slipped runs {stats['slips']}"
            )
        text = "\n".join(lines) + "\n"
    else:
        raise ConfigurationError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_report(path: str | Path) -> list[RunReport]:
    """Parse a CSV report file back into report rows."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read report: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigurationError("report file is empty") from None
    if header != CSV_COLUMNS:
        raise ConfigurationError(
            f"unexpected report header {header!r}; expected {CSV_COLUMNS!r}"
        )
    reports = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise ConfigurationError(f"malformed report row at line {lineno}")
        try:
            reports.append(
                RunReport(
                    run_index=int(row[0]),
                    pair=row[1],
                    sifted_count=int(row[2]),
                    r_sift_bps=float(row[3]),
                    qber_time=float(row[4]),
                    qber_phase=float(row[5]),
                    qber_total=float(row[6]),
                    r_sec_bps=float(row[7]),
                    delta_T_mK=float(row[8]),
                    recalibrated=row[9] == "true",
                    slipped=row[10] == "true",
                )
            )
        except ValueError as exc:
            raise ConfigurationError(
                f"malformed report row at line {lineno}: {exc}"
            ) from exc
    if not reports:
        raise ConfigurationError("report file has no data rows")
    return reports
