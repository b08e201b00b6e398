"""Scenario configuration: schema, validation, YAML loading, presets.

A scenario wires the whole bench together: pump power and spectral plan
on the source side, one fiber link + receiver + free-running clock per
participant, the run/intermission schedule, and the control-loop and
synchronization settings.  Configs are YAML; shipped presets cover the
bench configurations exercised in the docs and demos.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .core import ClockParams, DetectorParams, SourceParams
from .errors import ConfigurationError, ScenarioError
from .fiber import FiberLink
from .source import SpectrumModel
from .wdm import ChannelPlan, Pairing, awg_plan, wss_plan

__all__ = [
    "ParticipantSpec",
    "ScheduleSpec",
    "ControlSpec",
    "SyncSpec",
    "Scenario",
    "scenario_from_dict",
    "load_scenario",
    "list_presets",
    "load_preset",
]


@dataclass(frozen=True)
class ParticipantSpec:
    """One receiver site: fiber link, detectors, clock, interferometer."""

    link: FiberLink = field(default_factory=lambda: FiberLink(length_km=0.0))
    detector: DetectorParams = field(default_factory=DetectorParams)
    clock: ClockParams = field(default_factory=ClockParams)
    initial_phase: float = 0.0
    temp_coeff: float = 0.039 * math.pi


@dataclass(frozen=True)
class ScheduleSpec:
    """Run/intermission timing of a session."""

    runs: int = 5
    run_length: float = 90.0
    intermission: float = 6.0
    pipelined: bool = False

    @property
    def cycle(self) -> float:
        """Wall-clock spacing between run starts."""
        if self.pipelined:
            return self.run_length
        return self.run_length + self.intermission

    def run_start(self, index: int) -> float:
        return index * self.cycle

    @property
    def total_exchange_time(self) -> float:
        return self.runs * self.run_length


@dataclass(frozen=True)
class ControlSpec:
    """Phase-control loop settings at session level."""

    enabled: bool = True
    cadence_runs: int = 2
    deadband: float = 0.005
    max_step_mk: float = 10.0
    drift_rate: float = 0.0


@dataclass(frozen=True)
class SyncSpec:
    """Clock recovery and pair-alignment settings."""

    bin_width: float = 500e-12
    search_range: float = 2.5e-3
    min_events: int = 500
    slip_threshold: float = 0.20


@dataclass(frozen=True)
class Scenario:
    """A fully resolved simulation configuration."""

    name: str
    seed: int
    source: SourceParams
    plan: ChannelPlan
    participants: Mapping[str, ParticipantSpec]
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    control: ControlSpec = field(default_factory=ControlSpec)
    sync: SyncSpec = field(default_factory=SyncSpec)
    export_timestamps: bool = False

    @property
    def pairings(self) -> tuple[Pairing, ...]:
        return self.plan.pairings

    def participant(self, name: str) -> ParticipantSpec:
        try:
            return self.participants[name]
        except KeyError:
            raise ConfigurationError(f"unknown participant {name!r}") from None


def _check_keys(section: Mapping, allowed: set[str], where: str, problems: list):
    for key in section:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r}")


def _build_source(cfg: Mapping, problems: list) -> tuple[SourceParams, float]:
    _check_keys(
        cfg,
        {"shg_power", "visibility", "pulse_width", "pump_phase"},
        "source",
        problems,
    )
    power = float(cfg.get("shg_power", 30.0))
    try:
        params = SourceParams(
            pulse_width=float(cfg.get("pulse_width", 300e-12)),
            pump_phase_phi=float(cfg.get("pump_phase", 0.0)),
            visibility=float(cfg.get("visibility", 0.99)),
            shg_power=power,
        )
    except ConfigurationError as exc:
        problems.append(f"source: {exc}")
        params = SourceParams()
    return params, power


def _build_plan(cfg: Mapping, power: float, problems: list) -> ChannelPlan | None:
    _check_keys(cfg, {"device", "pairs", "demands"}, "plan", problems)
    device = cfg.get("device", "awg")
    try:
        if device == "awg":
            pairs = [
                (str(p["a"]), str(p["b"]), int(p["channel"]))
                for p in cfg.get("pairs", [])
            ]
            if not pairs:
                problems.append("plan: awg device needs a non-empty pairs list")
                return None
            return awg_plan(pairs, shg_power=power)
        if device == "wss":
            demands = {
                (str(d["a"]), str(d["b"])): float(d["width_ghz"])
                for d in cfg.get("demands", [])
            }
            if not demands:
                problems.append("plan: wss device needs a non-empty demands list")
                return None
            return wss_plan(demands, shg_power=power)
        problems.append(f"plan: unknown device {device!r}")
    except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
        problems.append(f"plan: {exc}")
    return None


def _build_participant(
    name: str, cfg: Mapping, problems: list
) -> ParticipantSpec:
    where = f"participants.{name}"
    _check_keys(cfg, {"link", "detector", "clock", "phase"}, where, problems)
    link_cfg = cfg.get("link", {})
    det_cfg = cfg.get("detector", {})
    clk_cfg = cfg.get("clock", {})
    ph_cfg = cfg.get("phase", {})
    _check_keys(
        link_cfg,
        {"length_km", "extra_loss_db", "thermal_rate"},
        f"{where}.link",
        problems,
    )
    _check_keys(
        det_cfg,
        {"efficiency", "dead_time", "jitter_fwhm", "dark_count_rate"},
        f"{where}.detector",
        problems,
    )
    _check_keys(
        clk_cfg,
        {"offset", "frequency_error", "random_walk_sigma", "resolution"},
        f"{where}.clock",
        problems,
    )
    _check_keys(
        ph_cfg, {"initial", "temp_coeff_pi_per_mk"}, f"{where}.phase", problems
    )
    try:
        link = FiberLink(
            length_km=float(link_cfg.get("length_km", 0.0)),
            extra_loss_db=float(link_cfg.get("extra_loss_db", 0.0)),
            thermal_rate=float(link_cfg.get("thermal_rate", 0.0)),
        )
        detector = DetectorParams(
            efficiency=float(det_cfg.get("efficiency", 0.20)),
            dead_time=float(det_cfg.get("dead_time", 10e-6)),
            jitter_fwhm=float(det_cfg.get("jitter_fwhm", 250e-12)),
            dark_count_rate=float(det_cfg.get("dark_count_rate", 1000.0)),
        )
        clock = ClockParams(
            offset=float(clk_cfg.get("offset", 0.0)),
            frequency_error=float(clk_cfg.get("frequency_error", 0.0)),
            random_walk_sigma=float(clk_cfg.get("random_walk_sigma", 30e-12)),
            resolution=float(clk_cfg.get("resolution", 13e-12)),
        )
        return ParticipantSpec(
            link=link,
            detector=detector,
            clock=clock,
            initial_phase=float(ph_cfg.get("initial", 0.0)),
            temp_coeff=float(ph_cfg.get("temp_coeff_pi_per_mk", 0.039))
            * math.pi,
        )
    except ConfigurationError as exc:
        problems.append(f"{where}: {exc}")
        return ParticipantSpec()


def scenario_from_dict(raw: Mapping[str, Any]) -> Scenario:
    """Build and validate a scenario from a parsed config tree.

    Raises:
        ScenarioError: listing every violation found, not just the first.
    """
    problems: list[str] = []
    _check_keys(
        raw,
        {
            "name",
            "seed",
            "source",
            "plan",
            "participants",
            "schedule",
            "control",
            "sync",
            "export_timestamps",
        },
        "top level",
        problems,
    )
    name = str(raw.get("name", "unnamed"))
    try:
        seed = int(raw["seed"])
    except (KeyError, TypeError, ValueError):
        problems.append("top level: integer 'seed' is required")
        seed = 0

    source, power = _build_source(raw.get("source", {}), problems)
    plan = _build_plan(raw.get("plan", {}), power, problems)

    participants_cfg = raw.get("participants", {})
    if not isinstance(participants_cfg, Mapping) or not participants_cfg:
        problems.append("participants: at least one participant is required")
        participants_cfg = {}
    participants = {
        str(pname): _build_participant(pname, pcfg or {}, problems)
        for pname, pcfg in participants_cfg.items()
    }

    sched_cfg = raw.get("schedule", {})
    _check_keys(
        sched_cfg,
        {"runs", "run_length", "intermission", "pipelined"},
        "schedule",
        problems,
    )
    schedule = ScheduleSpec(
        runs=int(sched_cfg.get("runs", 5)),
        run_length=float(sched_cfg.get("run_length", 90.0)),
        intermission=float(sched_cfg.get("intermission", 6.0)),
        pipelined=bool(sched_cfg.get("pipelined", False)),
    )
    if schedule.runs < 2:
        problems.append(
            "schedule: at least 2 runs are required (the first run is "
            "consumed by pair calibration)"
        )
    if schedule.run_length <= 0:
        problems.append("schedule: run_length must be positive")
    if schedule.intermission < 0:
        problems.append("schedule: intermission must be non-negative")

    ctrl_cfg = raw.get("control", {})
    _check_keys(
        ctrl_cfg,
        {"enabled", "cadence_runs", "deadband", "max_step_mk", "drift_rate"},
        "control",
        problems,
    )
    control = ControlSpec(
        enabled=bool(ctrl_cfg.get("enabled", True)),
        cadence_runs=int(ctrl_cfg.get("cadence_runs", 2)),
        deadband=float(ctrl_cfg.get("deadband", 0.005)),
        max_step_mk=float(ctrl_cfg.get("max_step_mk", 10.0)),
        drift_rate=float(ctrl_cfg.get("drift_rate", 0.0)),
    )
    if control.cadence_runs < 1:
        problems.append("control: cadence_runs must be >= 1")
    if control.drift_rate < 0:
        problems.append("control: drift_rate must be non-negative")

    sync_cfg = raw.get("sync", {})
    _check_keys(
        sync_cfg,
        {"bin_width", "search_range", "min_events", "slip_threshold"},
        "sync",
        problems,
    )
    sync = SyncSpec(
        bin_width=float(sync_cfg.get("bin_width", 500e-12)),
        search_range=float(sync_cfg.get("search_range", 2.5e-3)),
        min_events=int(sync_cfg.get("min_events", 500)),
        slip_threshold=float(sync_cfg.get("slip_threshold", 0.20)),
    )
    if sync.bin_width <= 0 or sync.search_range <= 0:
        problems.append("sync: bin_width and search_range must be positive")
    if sync.bin_width > sync.search_range:
        problems.append("sync: bin_width must not exceed search_range")

    if plan is not None:
        for pairing in plan.pairings:
            for pname in (pairing.participant_a, pairing.participant_b):
                if pname not in participants:
                    problems.append(
                        f"plan: pairing references undefined participant "
                        f"{pname!r}"
                    )

    if problems:
        raise ScenarioError(problems)
    assert plan is not None
    return Scenario(
        name=name,
        seed=seed,
        source=source,
        plan=plan,
        participants=participants,
        schedule=schedule,
        control=control,
        sync=sync,
        export_timestamps=bool(raw.get("export_timestamps", False)),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a YAML scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario file: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"invalid YAML: {exc}"]) from exc
    if not isinstance(raw, Mapping):
        raise ScenarioError(["config root must be a mapping"])
    return scenario_from_dict(raw)


def _preset_dir():
    return importlib.resources.files("starqkd") / "presets"


def list_presets() -> list[str]:
    """Names of the shipped scenario presets."""
    return sorted(
        entry.name.removesuffix(".yaml")
        for entry in _preset_dir().iterdir()
        if entry.name.endswith(".yaml")
    )


def load_preset(name: str) -> Scenario:
    """Load a shipped preset by name."""
    resource = _preset_dir() / f"{name}.yaml"
    try:
        text = resource.read_text()
    except FileNotFoundError:
        available = ", ".join(list_presets())
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {available}"
        ) from None
    raw = yaml.safe_load(text)
    return scenario_from_dict(raw)
