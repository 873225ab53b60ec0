from .cosine import CosineDemoResult, RegMode, run_cosine_demo
from .scenarios import PRESETS, Scenario, ScenarioError, get_preset
from .sweep import SweepRecord, SweepResult, fit_loglog_slope, run_rate_sweep

__all__ = [
    "CosineDemoResult",
    "PRESETS",
    "RegMode",
    "Scenario",
    "ScenarioError",
    "SweepRecord",
    "SweepResult",
    "fit_loglog_slope",
    "get_preset",
    "run_cosine_demo",
    "run_rate_sweep",
]
