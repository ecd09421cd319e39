"""Simulation and parameter extraction for inductively shunted transmon circuits.

Submodules
----------
circuit   phase-grid Hamiltonian, spectra, anharmonicity, flux sweeps
charge    offset-charge bands and gauge-invariant shunted spectra
cavity    coupled circuit-resonator dressed states and resonator traces
lindblad  driven-dissipative steady states and two-tone maps
fitting   spectral-line parameter extraction
cli       command-line front end (``kinemon-lab``)
"""

from .cavity import CavityConfig, CoupledSolution, dressed_resonator_frequency, resonator_trace
from .charge import ChargeBasisConfig, band_width, shunted_gauge_spectrum, transmon_charge_hamiltonian
from .circuit import (
    CircuitParams,
    EigenSolution,
    PhaseGrid,
    TransitionTable,
    anharmonicity,
    build_hamiltonian,
    eigensolve,
    find_equidistance_points,
    flux_sweep,
    solve,
    special_points,
    transitions,
)
from .fitting import (
    FitOptions,
    FitResult,
    FluxCalibration,
    SpectralDataset,
    assign_lines,
    fit_cavity,
    fit_qubit_spectrum,
)
from .lindblad import (
    DissipationConfig,
    DriveConfig,
    SteadyState,
    TwoToneMap,
    kinemon_lowering_operator,
    steady_state,
    two_tone_map,
)

__version__ = "0.1.0"

__all__ = [
    "CavityConfig",
    "ChargeBasisConfig",
    "CircuitParams",
    "CoupledSolution",
    "DissipationConfig",
    "DriveConfig",
    "EigenSolution",
    "FitOptions",
    "FitResult",
    "FluxCalibration",
    "PhaseGrid",
    "SpectralDataset",
    "SteadyState",
    "TransitionTable",
    "TwoToneMap",
    "anharmonicity",
    "assign_lines",
    "band_width",
    "build_hamiltonian",
    "dressed_resonator_frequency",
    "eigensolve",
    "find_equidistance_points",
    "fit_cavity",
    "fit_qubit_spectrum",
    "flux_sweep",
    "kinemon_lowering_operator",
    "resonator_trace",
    "shunted_gauge_spectrum",
    "solve",
    "special_points",
    "steady_state",
    "transitions",
    "transmon_charge_hamiltonian",
    "two_tone_map",
]
