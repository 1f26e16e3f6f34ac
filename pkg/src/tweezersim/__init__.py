"""Monte Carlo simulation and analysis of two-trap single-atom rearrangement.

Two crossed standing-wave dipole traps move individual atoms in all three
directions: an optical conveyor belt along the horizontal trap, a mirror
tilt across it, and a movable vertical tweezer for extraction and
reinsertion.  The package simulates manipulation sequences against
measured noise parameters, models collision-based same-well detection,
and provides the statistical toolkit (error budgets, comb-histogram fits,
exact binomial intervals) used to analyze the outcomes.
"""

from .analysis import (CombFit, DistanceSample, Histogram, RateEstimate,
                       binomial_ci, build_histogram, collect_distances,
                       deconvolve_width, error_budget, fit_comb,
                       insertion_success_probability,
                       insertion_success_quadrature, loss_algebra,
                       success_rate, well_capture_probability)
from .collision import (AtomCount, FluorescenceTrace, MolassesEpisode,
                        TraceLayout, apply_molasses, expected_multi_occupancy,
                        fluorescence_trace, steady_alive_expectation)
from .config import (ConfigError, ExperimentConfig, FluorescenceSettings,
                     load_config, packaged_config, packaged_sequence)
from .dsl import (Sequence, SequenceError, SequenceRangeError,
                  SequenceSyntaxError, parse_sequence, render_sequence)
from .engine import (Atom, ExecutionError, Measurement, TrialRecord,
                     WorldState, execute_step, run_ensemble, run_trial)
from .noise import NoiseModel, RngStream, trial_stream
from .traps import (TrapConfig, WellIndex, default_hdt, default_vdt,
                    nearest_well, potential_at, stiffness_ratio,
                    total_potential, well_center)

__version__ = "0.1.0"

__all__ = [
    "Atom", "AtomCount", "CombFit", "ConfigError", "DistanceSample",
    "ExecutionError", "ExperimentConfig", "FluorescenceSettings",
    "FluorescenceTrace", "Histogram", "Measurement", "MolassesEpisode",
    "NoiseModel", "RateEstimate", "RngStream", "Sequence", "SequenceError",
    "SequenceRangeError", "SequenceSyntaxError", "TraceLayout", "TrapConfig",
    "TrialRecord", "WellIndex", "WorldState", "apply_molasses", "binomial_ci",
    "build_histogram", "collect_distances", "deconvolve_width",
    "default_hdt", "default_vdt", "error_budget", "execute_step",
    "expected_multi_occupancy", "fit_comb", "fluorescence_trace",
    "insertion_success_probability", "insertion_success_quadrature",
    "load_config", "loss_algebra", "nearest_well", "packaged_config",
    "packaged_sequence", "parse_sequence", "potential_at", "render_sequence",
    "run_ensemble", "run_trial", "steady_alive_expectation",
    "stiffness_ratio", "success_rate", "total_potential", "trial_stream",
    "well_capture_probability", "well_center",
]
