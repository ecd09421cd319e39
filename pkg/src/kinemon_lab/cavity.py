"""Circuit coupled to its readout resonator.

The coupled Hamiltonian is

    H = H_circuit (x) 1 + 1 (x) omega_r (a^dag a + 1/2) + g C (x) (a^dag - a)

with C the phase-derivative (charge-like) operator of the circuit. The
circuit factor comes first in every tensor product. The circuit is projected
onto its lowest eigenstates before tensoring, which keeps the coupled
dimension small; the charge matrix element <m|d/dphi|n> is real and
antisymmetric there, making the full matrix Hermitian up to rounding, which
is asserted and then symmetrized away.

Dressed states are labeled by maximum overlap with the bare product states
(optimal one-to-one assignment), so the dressed resonator frequency is the
energy difference between the states labeled (circuit 0, photon 1) and
(circuit 0, photon 0).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels
from .circuit import CircuitParams, EigenSolution, PhaseGrid, solve

HERMITICITY_LIMIT = 1e-10


class LabelAmbiguityError(ValueError):
    """Two dressed states overlap a bare label equally; both candidates reported."""

    def __init__(self, label, candidates):
        super().__init__(
            f"bare label {label} is ambiguous between dressed energies {candidates}"
        )
        self.label = label
        self.candidates = candidates


@dataclass(frozen=True)
class CavityConfig:
    """Readout resonator: frequency and coupling in GHz, Fock cutoff."""

    omega_r: float
    g: float
    fock_cutoff: int = 5

    def __post_init__(self):
        if self.fock_cutoff < 3:
            raise ValueError("fock_cutoff must be at least 3")
        if not 0.0 <= self.g < self.omega_r:
            raise ValueError("need 0 <= g < omega_r")

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1


@dataclass(frozen=True)
class CoupledSolution:
    """Dressed spectrum with bare-state labels at one flux bias."""

    phi_e: float
    energies: np.ndarray
    labels: tuple
    overlaps: np.ndarray

    def energy_of(self, circuit_index: int, photon_index: int) -> float:
        try:
            i = self.labels.index((circuit_index, photon_index))
        except ValueError:
            raise KeyError(
                f"no dressed state labeled ({circuit_index}, {photon_index})"
            ) from None
        return float(self.energies[i])


def charge_matrix_element(eig: EigenSolution, n_levels: int | None = None) -> np.ndarray:
    """d/dphi projected into the circuit eigenbasis (real, antisymmetric)."""
    n_levels = n_levels or eig.n_levels
    d1 = _kernels.first_derivative_numpy(eig.grid.n_nodes, eig.grid.step)
    v = eig.states[:, :n_levels]
    return (v.T @ d1 @ v) * eig.grid.step


def annihilation_operator(n_fock: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1.0, n_fock)), 1)


def build_cqed_hamiltonian(
    params: CircuitParams,
    cavity: CavityConfig,
    phi_e: float,
    grid: PhaseGrid | None = None,
    n_kinemon_levels: int = 6,
    max_dim: int = 64,
    _eig: EigenSolution | None = None,
) -> np.ndarray:
    """Coupled Hamiltonian in the (circuit eigenbasis) x (Fock) product space."""
    grid = grid or PhaseGrid()
    dim = n_kinemon_levels * cavity.n_fock
    if dim > max_dim:
        raise ValueError(
            f"coupled dimension {dim} exceeds the configured bound {max_dim}"
        )
    eig = _eig if _eig is not None else solve(params, phi_e, grid, k=n_kinemon_levels)
    d = charge_matrix_element(eig, n_kinemon_levels)
    a = annihilation_operator(cavity.n_fock)
    i_f = np.eye(cavity.n_fock)
    i_k = np.eye(n_kinemon_levels)
    h = (
        np.kron(np.diag(eig.energies[:n_kinemon_levels]), i_f)
        + cavity.omega_r * np.kron(i_k, np.diag(np.arange(cavity.n_fock) + 0.5))
        + cavity.g * np.kron(d, a.T - a)
    ).astype(complex)
    defect = np.abs(h - h.conj().T).max()
    scale = max(np.abs(h).max(), 1.0)
    if defect > HERMITICITY_LIMIT * scale:
        raise AssertionError(
            f"pre-symmetrization Hermiticity defect {defect:.3e} above threshold"
        )
    return (h + h.conj().T) / 2.0


def diagonalize_coupled(
    params: CircuitParams,
    cavity: CavityConfig,
    phi_e: float,
    grid: PhaseGrid | None = None,
    n_kinemon_levels: int = 6,
    **kwargs,
) -> CoupledSolution:
    """Dressed energies with maximum-overlap labels.

    The assignment maximizes the total squared overlap between dressed and
    bare product states, so each bare label is used exactly once.
    """
    h = build_cqed_hamiltonian(
        params, cavity, phi_e, grid, n_kinemon_levels, **kwargs
    )
    energies, vectors = np.linalg.eigh(h)
    n_fock = cavity.n_fock
    overlap = np.abs(vectors) ** 2  # rows: bare product index, cols: dressed
    bare_rows, dressed_cols = linear_sum_assignment(-overlap)
    label_of_dressed: dict[int, tuple[int, int]] = {}
    for r, c in zip(bare_rows, dressed_cols):
        label_of_dressed[c] = (r // n_fock, r % n_fock)
    labels = tuple(label_of_dressed[c] for c in range(len(energies)))
    return CoupledSolution(
        phi_e=phi_e, energies=energies, labels=labels, overlaps=overlap
    )


def _check_label_margin(sol: CoupledSolution, label: tuple[int, int], n_fock: int):
    row = label[0] * n_fock + label[1]
    o = sol.overlaps[row, :]
    order = np.argsort(o)[::-1]
    if len(order) > 1 and o[order[0]] - o[order[1]] < 1e-10:
        raise LabelAmbiguityError(
            label, (float(sol.energies[order[0]]), float(sol.energies[order[1]]))
        )


def dressed_resonator_frequency(
    params: CircuitParams,
    cavity: CavityConfig,
    phi_e: float,
    grid: PhaseGrid | None = None,
    n_kinemon_levels: int = 6,
    **kwargs,
) -> float:
    """Dressed one-photon transition of the resonator at this flux bias."""
    sol = diagonalize_coupled(params, cavity, phi_e, grid, n_kinemon_levels, **kwargs)
    _check_label_margin(sol, (0, 0), cavity.n_fock)
    _check_label_margin(sol, (0, 1), cavity.n_fock)
    return sol.energy_of(0, 1) - sol.energy_of(0, 0)


def resonator_trace(
    params: CircuitParams,
    cavity: CavityConfig,
    phi_e_list: Sequence[float],
    grid: PhaseGrid | None = None,
    n_kinemon_levels: int = 6,
    threads: int | None = None,
) -> list[tuple[float, float]]:
    """Dressed resonator frequency over a flux list (parallel, order-stable)."""
    if len(phi_e_list) == 0:
        raise ValueError("phi_e_list must not be empty")

    def one(phi_e: float) -> tuple[float, float]:
        return (
            phi_e,
            dressed_resonator_frequency(params, cavity, phi_e, grid, n_kinemon_levels),
        )

    if threads == 1 or len(phi_e_list) == 1:
        return [one(p) for p in phi_e_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, phi_e_list))


def write_trace_csv(trace: Sequence[tuple[float, float]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi_e_over_pi", "f_r_GHz"])
        for phi_e, f_r in trace:
            writer.writerow([f"{phi_e / math.pi:.10g}", f"{f_r:.10g}"])
