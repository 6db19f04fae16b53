"""Current-biased Josephson junction toolkit.

Quantised levels of the washboard well, microwave transmission in the
cavity and two-level limits, RCSJ switching statistics and the fits that
connect them to measured data.
"""
from importlib.metadata import PackageNotFoundError, version as _pkg_version

try:
    __version__ = _pkg_version("cbjj")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .junction import (BiasPoint, JunctionError, JunctionParams, NoWellError, PhysicalConstants,
                       ambegaokar_baratoff_ic, barrier_height, plasma_frequency, plate_capacitance,
                       washboard_potential, well_extrema)
from .boundstates import (BoundStateSolution, GridSpec, LevelTable, bound_count_threshold,
                          convergence_check, count_bound_states, level_table, phase_matrix_element,
                          solve_bound_states, transition_frequency)
from .scattering import (RATE_UNIT, BosonScatterParams, FermionScatterParams, Spectrum,
                         quality_factor, sweep_spectrum)
from .rcsj import (NoiseModel, SweepProtocol, SwitchDetector, SwitchingHistogram,
                   escape_rate_distribution, integrate_trial, simulate_trajectory,
                   switching_histogram)
from .fitting import (FitResult, MeasuredTrace, capacitance_from_resonance, fit_boson_spectrum,
                      fit_fermion_spectrum, fit_switching_histogram)

__all__ = [
    "BiasPoint", "JunctionError", "JunctionParams", "NoWellError", "PhysicalConstants",
    "ambegaokar_baratoff_ic", "barrier_height", "plasma_frequency", "plate_capacitance",
    "washboard_potential", "well_extrema",
    "BoundStateSolution", "GridSpec", "LevelTable", "bound_count_threshold", "convergence_check",
    "count_bound_states", "level_table", "phase_matrix_element", "solve_bound_states",
    "transition_frequency",
    "RATE_UNIT", "BosonScatterParams", "FermionScatterParams", "Spectrum", "quality_factor",
    "sweep_spectrum",
    "NoiseModel", "SweepProtocol", "SwitchDetector", "SwitchingHistogram",
    "escape_rate_distribution", "integrate_trial", "simulate_trajectory", "switching_histogram",
    "FitResult", "MeasuredTrace", "capacitance_from_resonance", "fit_boson_spectrum",
    "fit_fermion_spectrum", "fit_switching_histogram",
    "__version__",
]
