"""Microgrid ramping capability and ramp-constrained scheduling."""

from .formulation import (MILPModel, RampBandError, VariableMap, add_grid_limits,
                          add_power_balance, add_ramp_band, build_base_model,
                          build_component_constraints, set_cost_objective, set_ramp_objective,
                          to_lp_text)
from .instance import (AdjustableLoad, DispatchableUnit, FeederContext, FixedProfiles, GridLink,
                       InvalidInstanceError, MicrogridInstance, StorageUnit, TimeGrid,
                       ValidationReport, validate_instance)
from .ramp import (CapabilityResult, CertificationError, ScheduleInfeasible, SolverFailure,
                   SweepCurve, SweepPoint, UtilityProfile, capability_vs_line_capacity,
                   compute_ramp_bounds, cost_vs_ramp_limit, optimal_schedule, ramping_capability,
                   utility_ramp_profile)
from .schedule import CostBreakdown, Schedule, certify_schedule
from .solver import MILPSolution, SolveOptions, get_backend, solve_lp, solve_milp

__all__ = [
    "AdjustableLoad", "CapabilityResult", "CertificationError", "CostBreakdown",
    "DispatchableUnit", "FeederContext", "FixedProfiles", "GridLink", "InvalidInstanceError",
    "MILPModel", "MILPSolution", "MicrogridInstance", "RampBandError", "Schedule",
    "ScheduleInfeasible", "SolveOptions", "SolverFailure", "StorageUnit", "SweepCurve",
    "SweepPoint", "TimeGrid", "UtilityProfile", "ValidationReport", "VariableMap",
    "add_grid_limits", "add_power_balance", "add_ramp_band", "build_base_model",
    "build_component_constraints", "capability_vs_line_capacity", "certify_schedule",
    "compute_ramp_bounds", "cost_vs_ramp_limit", "get_backend", "optimal_schedule",
    "ramping_capability", "set_cost_objective", "set_ramp_objective", "solve_lp", "solve_milp",
    "to_lp_text", "utility_ramp_profile", "validate_instance",
]
