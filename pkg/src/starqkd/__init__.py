"""starqkd: discrete-event simulator for a star-topology time-bin QKD network.

A single entangled-pair source distributes wavelength-multiplexed photon
pairs to pairs of participants, each of which measures in a passively
chosen time or phase basis, recovers timing from its own free-running
clock, sifts a key, and steers its interferometer phase from the observed
error rate.
"""

from .control import (
    ControlDecision,
    ControllerSettings,
    ControllerState,
    control_step,
    drift_process,
    infer_phase_error,
    phase_from_temperature,
)
from .core import (
    CENTER_FREQUENCY_THZ,
    INTERFEROMETER_DELAY,
    REPETITION_PERIOD,
    REPETITION_RATE,
    ClockParams,
    DetectorParams,
    LinkParams,
    PhaseState,
    SourceParams,
    frequency_to_wavelength_nm,
    itu_channel_center_frequency,
    symmetric_channel_pair,
)
from .detector import (
    DetectionBatch,
    LocalClock,
    detect,
    read_timestamps,
    timestamp,
    write_timestamps,
)
from .errors import (
    AllocationError,
    ConfigurationError,
    EmptySiftError,
    ScenarioError,
    StarQkdError,
    SyncFailure,
)
from .fiber import FiberLink, dispersion_sigma, propagate, transmission_probability
from .orchestrator import (
    RunReport,
    emit_report,
    read_report,
    run_channel_sweep,
    run_pair_session,
    run_scenario,
    summarize,
)
from .outcome import (
    OutcomeDistribution,
    PairOutcome,
    TimeBin,
    joint_outcome_distribution,
    sample_pair_outcomes,
)
from .protocol import (
    Basis,
    QubitStream,
    SiftResult,
    binary_entropy,
    classify,
    estimate_qber,
    qubit_stream,
    rate_report,
    secure_rate,
    sift,
)
from .scenario import (
    Scenario,
    list_presets,
    load_preset,
    load_scenario,
    scenario_from_dict,
)
from .source import (
    PhotonStream,
    SpectrumModel,
    generate_events,
    generate_photon_streams,
    mu_from_pump,
)
from .sync import (
    SyncState,
    brute_force_offset,
    calibrate_pair,
    correlation_histogram,
    crosscorrelate_offset,
    detect_slip,
    recover_clock,
    rescale_to_source,
)
from .wdm import (
    AwgSpec,
    ChannelPlan,
    FrequencyWindow,
    GridSpec,
    Pairing,
    awg_plan,
    max_participants,
    validate_plan,
    wss_plan,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationError",
    "AwgSpec",
    "Basis",
    "CENTER_FREQUENCY_THZ",
    "ChannelPlan",
    "ClockParams",
    "ConfigurationError",
    "ControlDecision",
    "ControllerSettings",
    "ControllerState",
    "DetectionBatch",
    "DetectorParams",
    "EmptySiftError",
    "FiberLink",
    "FrequencyWindow",
    "GridSpec",
    "INTERFEROMETER_DELAY",
    "LinkParams",
    "LocalClock",
    "OutcomeDistribution",
    "PairOutcome",
    "Pairing",
    "PhaseState",
    "PhotonStream",
    "QubitStream",
    "REPETITION_PERIOD",
    "REPETITION_RATE",
    "RunReport",
    "Scenario",
    "ScenarioError",
    "SiftResult",
    "SourceParams",
    "SpectrumModel",
    "StarQkdError",
    "SyncFailure",
    "SyncState",
    "TimeBin",
    "awg_plan",
    "binary_entropy",
    "brute_force_offset",
    "calibrate_pair",
    "classify",
    "control_step",
    "correlation_histogram",
    "crosscorrelate_offset",
    "detect",
    "detect_slip",
    "dispersion_sigma",
    "drift_process",
    "emit_report",
    "estimate_qber",
    "frequency_to_wavelength_nm",
    "generate_events",
    "generate_photon_streams",
    "infer_phase_error",
    "itu_channel_center_frequency",
    "joint_outcome_distribution",
    "list_presets",
    "load_preset",
    "load_scenario",
    "max_participants",
    "mu_from_pump",
    "phase_from_temperature",
    "propagate",
    "qubit_stream",
    "rate_report",
    "read_report",
    "read_timestamps",
    "recover_clock",
    "rescale_to_source",
    "run_channel_sweep",
    "run_pair_session",
    "run_scenario",
    "sample_pair_outcomes",
    "scenario_from_dict",
    "secure_rate",
    "sift",
    "summarize",
    "symmetric_channel_pair",
    "timestamp",
    "transmission_probability",
    "validate_plan",
    "write_timestamps",
    "__version__",
]
