"""Freshness-coverage toolkit for edge-assisted wireless sensor networks.

The package has three layers:

* :mod:`freshcov.model` — pure physical-layer/energy/age/coverage maths.
* :mod:`freshcov.analysis` — closed-form coverage probability and the
  energy-constrained probability search for a single pre-charged sensor.
* :mod:`freshcov.simulator` — slot-granular multi-sensor simulation with
  energy harvesting, an edge-server queue, and Monte Carlo coverage
  estimation, plus :mod:`freshcov.bridge` exposing it as a multi-agent
  environment over a line-delimited JSON protocol.

:mod:`freshcov.oracles` holds independent Monte Carlo estimators used to
validate the closed forms, and :mod:`freshcov.cli` binds everything to a
config-driven experiment runner.
"""

__version__ = "0.1.0"

from .params import (
    AoiState,
    ChannelParams,
    CorrelationParams,
    EnergyParams,
    MODE_EDGE,
    MODE_LOCAL,
    TimingParams,
    dbm_to_mw,
    mw_to_dbm,
)
from .model import (
    CoverageGrid,
    battery_step,
    coverage_ratio,
    estimation_error,
    outage_probability,
    sensing_radius,
)
from .analysis import (
    ClosedFormResult,
    MultiOptimum,
    NeverUpdates,
    SingleOptimum,
    SingleSensorScenario,
    TargetAoi,
    UnreachableTarget,
    avg_energy_per_round,
    conditional_mode_prob,
    eta_coverage_closed_form,
    expected_inter_update,
    expected_tx_count,
    optimal_ps_given_pe,
    optimize_multi,
    optimize_single,
    p_update,
    per_mode_round_energy,
    target_aoi,
    violation_time_conditional,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    MULTI_EH,
    SINGLE_PRECHARGED,
    ScenarioConfig,
    load_experiment,
    parse_experiment,
    parse_scenario,
    scenario_defaults,
)
from .policies import (
    Action,
    PolicySpec,
    RoundObservation,
    cic_coverage_ratio,
    coerce_actions,
    decide,
    make_policy,
)
from .simulator import (
    EcServerQueue,
    EpisodeEngine,
    EpisodeTrace,
    SensorRuntime,
    UpdateEvent,
    estimate_eta_coverage,
    run_episode,
    waiting_time,
)

__all__ = [
    "__version__",
    "AoiState",
    "ChannelParams",
    "CorrelationParams",
    "EnergyParams",
    "TimingParams",
    "MODE_EDGE",
    "MODE_LOCAL",
    "dbm_to_mw",
    "mw_to_dbm",
    "CoverageGrid",
    "battery_step",
    "coverage_ratio",
    "estimation_error",
    "outage_probability",
    "sensing_radius",
    "ClosedFormResult",
    "MultiOptimum",
    "NeverUpdates",
    "SingleOptimum",
    "SingleSensorScenario",
    "TargetAoi",
    "UnreachableTarget",
    "avg_energy_per_round",
    "conditional_mode_prob",
    "eta_coverage_closed_form",
    "expected_inter_update",
    "expected_tx_count",
    "optimal_ps_given_pe",
    "optimize_multi",
    "optimize_single",
    "p_update",
    "per_mode_round_energy",
    "target_aoi",
    "violation_time_conditional",
    "ConfigError",
    "ExperimentConfig",
    "MULTI_EH",
    "SINGLE_PRECHARGED",
    "ScenarioConfig",
    "load_experiment",
    "parse_experiment",
    "parse_scenario",
    "scenario_defaults",
    "Action",
    "PolicySpec",
    "RoundObservation",
    "cic_coverage_ratio",
    "coerce_actions",
    "decide",
    "make_policy",
    "EcServerQueue",
    "EpisodeEngine",
    "EpisodeTrace",
    "SensorRuntime",
    "UpdateEvent",
    "estimate_eta_coverage",
    "run_episode",
    "waiting_time",
]
