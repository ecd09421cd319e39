import numpy as np
import pytest

from kinemon_lab import CircuitParams, PhaseGrid

# Device parameter sets used throughout the suite (energies E/h in GHz).
# The two-loop devices take the tabulated Josephson energy per junction.
DEVICES = {
    "I": CircuitParams(ej1=5.38, ej2=0.0, ec=0.90, el=8.59, kappa=1.0),
    "II": CircuitParams(ej1=6.00, ej2=0.0, ec=1.10, el=8.75, kappa=1.0),
    "III": CircuitParams(ej1=4.00, ej2=0.0, ec=1.50, el=7.40, kappa=1.0),
    "IV": CircuitParams(ej1=2.92, ej2=0.0, ec=1.95, el=8.40, kappa=1.0),
    "V": CircuitParams(ej1=2.44, ej2=0.0, ec=1.80, el=9.07, kappa=1.0),
    "VI": CircuitParams(ej1=5.90, ej2=0.0, ec=0.70, el=14.65, kappa=1.0),
    "VII": CircuitParams(ej1=8.61, ej2=8.61, ec=0.47, el=8.11, kappa=0.35),
    "VIII": CircuitParams(ej1=14.00, ej2=14.00, ec=0.32, el=12.2, kappa=0.37),
}

MEASURED_F01_TOP = {
    "I": 4.947,
    "II": 5.596,
    "III": 5.719,
    "IV": 6.508,
    "V": 6.359,
    "VI": 5.312,
    "VII": 4.769,
    "VIII": 5.008,
}

MEASURED_ALPHA_TOP = {
    "I": -0.086,
    "II": -0.118,
    "III": -0.131,
    "IV": -0.116,
    "V": -0.087,
    "VI": -0.049,
    "VII": -0.084,
    "VIII": -0.080,
}

MEASURED_ALPHA_BOTTOM = {
    "I": 0.219,
    "II": 0.301,
    "III": 0.257,
    "IV": 0.182,
    "V": 0.124,
    "VI": 0.096,
}

RESONATORS = {
    "I": (7.185, 0.064),
    "II": (7.284, 0.044),
    "III": (7.341, 0.034),
    "IV": (7.433, 0.035),
    "V": (7.495, 0.034),
    "VI": (7.608, 0.090),
    "VII": (7.688, 0.083),
    "VIII": (7.779, 0.068),
}


@pytest.fixture
def kinemon_i():
    return DEVICES["I"]


@pytest.fixture
def kinemon_vii():
    return DEVICES["VII"]


@pytest.fixture
def default_grid():
    return PhaseGrid()


@pytest.fixture
def fine_grid():
    return PhaseGrid.symmetric(phi_max=8.0, n_nodes=601)


def harmonic_params(ec=0.47, el=8.11):
    return CircuitParams(ej1=0.0, ej2=0.0, ec=ec, el=el, kappa=1.0)


def harmonic_spacing(ec, el):
    return np.sqrt(2.0 * ec * el)
