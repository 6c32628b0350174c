"""hpwansim: packet-level discrete-event simulation of massive data transfers
over bandwidth-isolated HP-WAN virtual circuits."""

__version__ = "0.1.0"

from .engine import Engine, EngineStats, SimulationError, derive_seed
from .metrics import (TrialResult, VcSummary, aggregate, fct_efficiency,
                      ideal_fct, overhead_pct)
from .scenarios import (ConfigError, RunPlan, ScenarioConfig, config_from_dict,
                        get_preset, preset_matrix, preset_names,
                        run_experiment, validate_config)

__all__ = [
    "Engine", "EngineStats", "SimulationError", "derive_seed",
    "TrialResult", "VcSummary", "aggregate", "fct_efficiency", "ideal_fct",
    "overhead_pct", "ConfigError", "RunPlan", "ScenarioConfig",
    "config_from_dict", "get_preset", "preset_matrix", "preset_names",
    "run_experiment", "validate_config",
]
