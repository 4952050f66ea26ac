"""Low-thrust initial-guess trajectories from thrust-forced Clohessy-Wiltshire motion.

The package chains closed-form propagations of the forced relative-motion
equations over re-centered circular reference orbits and solves the
per-segment steering parameters to meet rendezvous, orbit-insertion,
phasing, or orbit-raising boundary conditions. Solutions are initial
guesses for high-fidelity optimizers, exportable as control histories,
trajectory samples, and optimizer seed files.
"""
from .analytic import (RESONANCE_REL_BAND, SegmentPropagation, cw_stm,
                       propagate_in_plane, propagate_out_of_plane,
                       propagate_segment)
from .builder import (Scenario, SegmentParams, SegmentRecord,
                      TrajectorySolution, default_initial_guess,
                      default_section_count, estimate_revolutions,
                      evaluate_chain, partition_sections, residuals,
                      solve_scenario, solve_sectioned)
from .errors import (CwTrajError, DegenerateOrbit, InsufficientSampling,
                     NoConvergence, NonConvergence, ParseError,
                     ResonantSteeringRate, SingularRadius, ValidationError)
from .hill import (ControlLaw, HillState, ReferenceOrbit, cw_derivative,
                   thrust_components)
from .leastsq import SolverSettings
from .numint import (IntegrationSettings, integrate_numeric,
                     integrate_two_body)
from .orbits import (InertialState, KeplerianElements, elements_to_state,
                     hill_to_inertial, inertial_to_hill, propagate_target,
                     recenter_reference, solve_kepler, state_to_elements)
from .performance import (G0_KM_S2, SpacecraftParams, count_revolutions,
                          delta_v, mass_at)

__version__ = "0.1.0"

__all__ = [
    "ControlLaw", "CwTrajError", "DegenerateOrbit", "G0_KM_S2", "HillState",
    "InertialState", "InsufficientSampling", "IntegrationSettings",
    "KeplerianElements", "NoConvergence", "NonConvergence", "ParseError",
    "RESONANCE_REL_BAND", "ReferenceOrbit", "ResonantSteeringRate",
    "Scenario", "SegmentParams", "SegmentPropagation", "SegmentRecord",
    "SingularRadius", "SolverSettings", "SpacecraftParams",
    "TrajectorySolution", "ValidationError", "count_revolutions",
    "cw_derivative", "cw_stm", "default_initial_guess",
    "default_section_count", "delta_v", "elements_to_state",
    "estimate_revolutions", "evaluate_chain", "hill_to_inertial",
    "inertial_to_hill", "integrate_numeric", "integrate_two_body",
    "mass_at", "partition_sections", "propagate_in_plane",
    "propagate_out_of_plane", "propagate_segment", "propagate_target",
    "recenter_reference", "residuals", "solve_kepler", "solve_scenario",
    "solve_sectioned", "state_to_elements", "thrust_components",
]
