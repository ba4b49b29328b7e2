"""Relational event models with nodal random effects.

Simulation, stratified Cox partial-likelihood estimation with Gaussian
sender/receiver frailties, penalized-spline baseline hazards, and the
study runners demonstrating how unmodelled actor heterogeneity masquerades
as triadic closure.
"""

from ._kernels import ACTIVE_BACKEND
from .baseline import (RatioSummary, SmoothHazardCurve, SplineConfig,
                       StepCumulativeHazard, breslow, curves_to_csv,
                       hazard_ratio_summary, pspline_smooth)
from .errors import (BaselineError, EstimationError, EventDataError,
                     RemfrailError, SimulationError)
from .events import (EventHistory, NetworkState, PreprocessPolicy,
                     PreprocessReport, RelationalEvent, SymbolTable,
                     apply_event, build_history, parse_events,
                     preprocess_email, read_event_rows)
from .experiments import (ExperimentSpec, StudyReport, run_case_study,
                          run_ghost_triadic, run_recovery, run_sample_size,
                          run_study)
from .fitting import (CoxObjective, FitOptions, FitResult, fit_fixed,
                      fit_frailty, inner_newton, laplace_marginal,
                      laplace_value, newton_maximize)
from .likelihood import (Parameters, VarianceSpec, event_log_denominators,
                         lpl, lpl_value, lppl, lppl_value)
from .model_data import EventRecord, ModelData, RiskPolicy, build_model_data
from .simulate import (FrailtyVector, SimulationConfig, draw_frailties,
                       dyad_rates, simulate)
from .strata import (StratumLabel, StratumTimeline, TriadicKind,
                     build_timelines, has_reciprocal, has_triad, stratum_of,
                     timelines_to_csv)

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "BaselineError", "EstimationError", "EventDataError", "RemfrailError",
    "SimulationError",
    "EventHistory", "NetworkState", "PreprocessPolicy", "PreprocessReport",
    "RelationalEvent", "SymbolTable", "apply_event", "build_history",
    "parse_events", "preprocess_email", "read_event_rows",
    "ExperimentSpec", "StudyReport", "run_case_study", "run_ghost_triadic",
    "run_recovery", "run_sample_size", "run_study",
    "CoxObjective", "FitOptions", "FitResult", "fit_fixed", "fit_frailty",
    "inner_newton", "laplace_marginal", "laplace_value", "newton_maximize",
    "Parameters", "VarianceSpec", "event_log_denominators", "lpl",
    "lpl_value", "lppl", "lppl_value",
    "EventRecord", "ModelData", "RiskPolicy", "build_model_data",
    "FrailtyVector", "SimulationConfig", "draw_frailties", "dyad_rates",
    "simulate",
    "StratumLabel", "StratumTimeline", "TriadicKind", "build_timelines",
    "has_reciprocal", "has_triad", "stratum_of", "timelines_to_csv",
    "RatioSummary", "SmoothHazardCurve", "SplineConfig",
    "StepCumulativeHazard", "breslow", "curves_to_csv",
    "hazard_ratio_summary", "pspline_smooth",
]
