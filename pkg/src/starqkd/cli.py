"""Command-line front end.

Subcommands:

* ``simulate <config>`` — run a scenario file, write the report.
* ``presets list`` / ``presets run <name>`` — shipped configurations.
* ``sweep <config>`` — re-run one pair across symmetric channel pairs.
* ``report <raw>`` — re-render an existing CSV report.

Exit codes: 0 success, 2 configuration/validation problem, 3 clock
synchronization failure, 4 I/O failure.  Failures also print a JSON
object ``{"error": category, "message": ...}`` to stderr so callers can
dispatch without parsing prose.  The output directory defaults to the
current directory and can be overridden by ``--output-dir`` or the
``STARQKD_OUTPUT_DIR`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from pathlib import Path

from .errors import (
    AllocationError,
    ConfigurationError,
    ScenarioError,
    StarQkdError,
    SyncFailure,
)
from .orchestrator import (
    SWEEP_COLUMNS,
    emit_report,
    read_report,
    run_channel_sweep,
    run_scenario,
    summarize,
)
from .scenario import Scenario, list_presets, load_preset, load_scenario

__all__ = ["main", "build_parser"]

OUTPUT_DIR_ENV = "STARQKD_OUTPUT_DIR"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SYNC = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starqkd",
        description="Simulate a star-shaped time-bin QKD network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--output-dir",
            default=None,
            help=f"directory for output files (default: ${OUTPUT_DIR_ENV} "
            "or the current directory)",
        )
        p.add_argument(
            "--format",
            choices=("csv", "text"),
            default="csv",
            help="report format written to disk (default csv)",
        )
        p.add_argument(
            "--max-workers",
            type=int,
            default=None,
            help="process count for parallel pairs (default: one per pair)",
        )
        p.add_argument(
            "--export-timestamps",
            action="store_true",
            help="also write per-run raw timestamp files",
        )

    p_sim = sub.add_parser("simulate", help="run a scenario config file")
    p_sim.add_argument("config", help="path to a YAML scenario")
    add_common(p_sim)

    p_presets = sub.add_parser("presets", help="shipped scenario presets")
    sub_presets = p_presets.add_subparsers(dest="presets_command", required=True)
    sub_presets.add_parser("list", help="list available presets")
    p_run = sub_presets.add_parser("run", help="run a preset by name")
    p_run.add_argument("name", help="preset name (see 'presets list')")
    p_run.add_argument(
        "--full",
        action="store_true",
        help="use the full-length schedule (11 runs of 90 s) instead of "
        "the preset's desk-scale one",
    )
    add_common(p_run)

    p_sweep = sub.add_parser(
        "sweep", help="sweep the first pair of a config across channels"
    )
    p_sweep.add_argument("config", help="path to a YAML scenario (awg plan)")
    p_sweep.add_argument(
        "--channels",
        default="17-33",
        help="channel range 'LO-HI' or comma list (default 17-33)",
    )
    p_sweep.add_argument("--output-dir", default=None)
    p_sweep.add_argument("--max-workers", type=int, default=None)

    p_report = sub.add_parser(
        "report", help="re-render an existing CSV report"
    )
    p_report.add_argument("raw", help="path to a report written by simulate")
    p_report.add_argument(
        "--format", choices=("csv", "text"), default="text"
    )
    p_report.add_argument(
        "--output-dir",
        default=None,
        help="write the rendering here instead of stdout",
    )
    return parser


def _output_dir(args) -> Path:
    chosen = args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    return Path(chosen)


def _parse_channels(text: str) -> list[int]:
    text = text.strip()
    try:
        if "-" in text and "," not in text:
            lo, hi = text.split("-", 1)
            channels = list(range(int(lo), int(hi) + 1))
        else:
            channels = [int(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise ConfigurationError(
            f"cannot parse channel list {text!r}; use 'LO-HI' or 'c1,c2,...'"
        ) from None
    if not channels:
        raise ConfigurationError("empty channel list")
    return channels


def _run_and_write(scenario: Scenario, args) -> None:
    out_dir = _output_dir(args)
    if args.export_timestamps:
        scenario = dataclasses.replace(scenario, export_timestamps=True)
    reports = run_scenario(
        scenario, output_dir=out_dir, max_workers=args.max_workers
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = "csv" if args.format == "csv" else "txt"
    path = out_dir / f"{scenario.name}_report.{suffix}"
    emit_report(reports, args.format, path)
    print(f"wrote {path}")
    print(emit_report(reports, "text"), end="")


def _cmd_simulate(args) -> None:
    _run_and_write(load_scenario(args.config), args)


def _cmd_presets(args) -> None:
    if args.presets_command == "list":
        for name in list_presets():
            print(name)
        return
    scenario = load_preset(args.name)
    if args.full:
        scenario = dataclasses.replace(
            scenario,
            schedule=dataclasses.replace(
                scenario.schedule, runs=11, run_length=90.0
            ),
        )
    _run_and_write(scenario, args)


def _cmd_sweep(args) -> None:
    scenario = load_scenario(args.config)
    channels = _parse_channels(args.channels)
    rows = run_channel_sweep(
        scenario, channels=channels, max_workers=args.max_workers
    )
    out_dir = _output_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{scenario.name}_sweep.csv"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buf.getvalue())
    print(f"wrote {path}")
    for row in rows:
        print(
            f"C{row['channel']:02d}<->C{row['partner_channel']:02d}  "
            f"mu={row['mu']:.4f}  "
            f"r_sift={row['r_sift_bps_mean']:9.1f} bit/s  "
            f"QBER={100 * row['qber_total_mean']:5.2f} %  "
            f"r_sec={row['r_sec_bps_mean']:9.1f} bit/s"
        )


def _cmd_report(args) -> None:
    reports = read_report(args.raw)
    text = emit_report(reports, args.format)
    if args.output_dir is not None:
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        suffix = "csv" if args.format == "csv" else "txt"
        path = out_dir / (Path(args.raw).stem + f"_rendered.{suffix}")
        path.write_text(text)
        print(f"wrote {path}")
    else:
        print(text, end="")


def _fail(category: str, exc: BaseException, code: int) -> int:
    payload: dict = {"error": category, "message": str(exc)}
    if isinstance(exc, ScenarioError):
        payload["violations"] = list(exc.violations)
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "presets": _cmd_presets,
        "sweep": _cmd_sweep,
        "report": _cmd_report,
    }
    try:
        handlers[args.command](args)
    except SyncFailure as exc:
        return _fail("sync", exc, EXIT_SYNC)
    except (ScenarioError, AllocationError, ConfigurationError) as exc:
        return _fail("validation", exc, EXIT_VALIDATION)
    except StarQkdError as exc:
        return _fail("validation", exc, EXIT_VALIDATION)
    except OSError as exc:
        return _fail("io", exc, EXIT_IO)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
