"""Phase-basis model of the inductively shunted transmon circuit.

The Hamiltonian

    H = -ec d2/dphi2 + el phi^2 / 2
        - ej1 cos(phi + kappa phi_e) - ej2 cos(phi - (1 - kappa) phi_e)

is discretized on a uniform grid with 6th-order central differences and
Dirichlet boundaries (the wavefunction is zero outside the grid). All energies
are E/h in GHz; phases and flux biases are in radians. The single-loop
geometry is the special case ej2 = 0, kappa = 1.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from . import _kernels

BOUNDARY_WEIGHT_LIMIT = 1e-10


class BoundaryError(ValueError):
    """Requested eigenstates are not confined inside the phase grid."""


class EigensolverError(RuntimeError):
    """The dense symmetric eigensolver failed to converge."""


class DegenerateAnharmonicity(ValueError):
    """Anharmonicity is identically zero over the scanned interval."""

    def __init__(self, lo: float, hi: float):
        super().__init__(
            f"anharmonicity is identically zero on [{lo:.6g}, {hi:.6g}] rad; "
            "every point of the interval is a root"
        )
        self.interval = (lo, hi)


@dataclass(frozen=True)
class CircuitParams:
    """Circuit energies (E/h, GHz) and the flux split between the two loops.

    ``kappa`` is the fraction of the external flux phase applied to the first
    loop; a single-loop device is ``ej2=0, kappa=1``.
    """

    ej1: float
    ej2: float
    ec: float
    el: float
    kappa: float = 1.0

    def __post_init__(self):
        if not all(map(math.isfinite, (self.ej1, self.ej2, self.ec, self.el, self.kappa))):
            raise ValueError("circuit parameters must be finite")
        if self.ec <= 0:
            raise ValueError(f"ec must be positive, got {self.ec}")
        if self.el <= 0:
            raise ValueError(
                f"el must be positive, got {self.el}; the unshunted (el=0) limit "
                "is handled in the charge-basis module"
            )
        if self.ej1 < 0 or self.ej2 < 0:
            raise ValueError("Josephson energies must be non-negative")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitParams":
        known = {"ej1", "ej2", "ec", "el", "kappa"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown circuit parameter keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "CircuitParams":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform phase grid, symmetric about zero by default."""

    phi_min: float = -8.0
    phi_max: float = 8.0
    n_nodes: int = 201
    stencil_order: int = _kernels.STENCIL_ORDER

    def __post_init__(self):
        if self.stencil_order != _kernels.STENCIL_ORDER:
            raise ValueError("only the 6th-order stencil is supported")
        if not self.phi_min < 0.0 < self.phi_max:
            raise ValueError("grid must straddle phi = 0")
        if self.n_nodes < 2 * self.stencil_order + 1:
            raise ValueError(
                f"grid too coarse for the stencil: need at least "
                f"{2 * self.stencil_order + 1} nodes, got {self.n_nodes}"
            )

    @classmethod
    def symmetric(cls, phi_max: float = 8.0, n_nodes: int = 201) -> "PhaseGrid":
        return cls(phi_min=-phi_max, phi_max=phi_max, n_nodes=n_nodes)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.phi_min, self.phi_max, self.n_nodes)

    @property
    def step(self) -> float:
        return (self.phi_max - self.phi_min) / (self.n_nodes - 1)

    def widened(self, factor: float = 2.0) -> "PhaseGrid":
        """Same spacing, wider window (used by the boundary-retry logic)."""
        n_new = int(round((self.n_nodes - 1) * factor)) + 1
        return PhaseGrid(
            phi_min=self.phi_min * factor,
            phi_max=self.phi_max * factor,
            n_nodes=n_new,
        )


@dataclass(frozen=True)
class EigenSolution:
    """Lowest eigenpairs at a fixed flux bias.

    ``states`` has one column per level, normalized so that
    sum(|psi_i|^2) * step = 1.
    """

    phi_e: float
    energies: np.ndarray
    states: np.ndarray
    grid: PhaseGrid

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if np.any(np.diff(e) < -1e-9):
            raise ValueError("eigenenergies must be ascending")
        object.__setattr__(self, "energies", e)

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    def transition(self, i: int, j: int) -> float:
        return float(self.energies[j] - self.energies[i])


@dataclass(frozen=True)
class TransitionTable:
    """Transition frequencies derived from one eigensolution."""

    phi_e: float
    f01: float
    f12: float
    f02: float
    f02_half: float
    higher: tuple = field(default_factory=tuple)

    @property
    def alpha(self) -> float:
        return self.f12 - self.f01


def build_hamiltonian(params: CircuitParams, phi_e: float, grid: PhaseGrid) -> np.ndarray:
    """Dense real symmetric Hamiltonian on the phase grid.

    The diagonal carries the potential plus the stencil center coefficient;
    the six off-diagonals carry only the kinetic stencil scaled by -ec.
    """
    if not math.isfinite(phi_e):
        raise ValueError("phi_e must be finite")
    h = _kernels.hamiltonian_kernel(
        grid.nodes,
        grid.step,
        params.ej1,
        params.ej2,
        params.ec,
        params.el,
        params.kappa,
        phi_e,
    )
    if not np.all(np.isfinite(h)):
        raise ValueError("non-finite potential values on the grid")
    if not np.array_equal(h, h.T):
        raise AssertionError("assembled Hamiltonian is not exactly symmetric")
    return h


def eigensolve(
    H: np.ndarray, k: int, grid: PhaseGrid, phi_e: float = 0.0
) -> EigenSolution:
    """Lowest-k eigenpairs of a dense symmetric matrix, grid-normalized."""
    n = H.shape[0]
    if k > n:
        raise ValueError(f"requested {k} levels from a {n}-dimensional matrix")
    try:
        energies, states = scipy.linalg.eigh(H, subset_by_index=(0, k - 1))
    except scipy.linalg.LinAlgError as exc:
        raise EigensolverError(f"dense eigensolver failed to converge: {exc}") from exc
    states = states / math.sqrt(grid.step)
    return EigenSolution(phi_e=phi_e, energies=energies, states=states, grid=grid)


def _boundary_weight(sol: EigenSolution) -> float:
    h = sol.grid.step
    edge = np.abs(sol.states[[0, -1], :]) ** 2 * h
    return float(edge.max())


def solve(
    params: CircuitParams, phi_e: float, grid: PhaseGrid, k: int = 6
) -> EigenSolution:
    """Build and diagonalize, validating confinement at the grid edges.

    If any requested state carries more than ``BOUNDARY_WEIGHT_LIMIT``
    probability weight on an edge node, the window is widened once (same
    spacing) and the solve retried; a second failure raises BoundaryError.
    """
    sol = eigensolve(build_hamiltonian(params, phi_e, grid), k, grid, phi_e)
    if _boundary_weight(sol) < BOUNDARY_WEIGHT_LIMIT:
        return sol
    wide = grid.widened()
    sol = eigensolve(build_hamiltonian(params, phi_e, wide), k, wide, phi_e)
    if _boundary_weight(sol) < BOUNDARY_WEIGHT_LIMIT:
        return sol
    raise BoundaryError(
        f"states not confined: edge weight {_boundary_weight(sol):.2e} exceeds "
        f"{BOUNDARY_WEIGHT_LIMIT:.0e} even after widening to "
        f"[{wide.phi_min:.3g}, {wide.phi_max:.3g}] rad"
    )


def transitions(eig: EigenSolution) -> TransitionTable:
    """Labeled transition frequencies; requires at least three levels."""
    if eig.n_levels < 3:
        raise ValueError(f"need at least 3 levels, got {eig.n_levels}")
    e = eig.energies
    f01 = float(e[1] - e[0])
    f12 = float(e[2] - e[1])
    f02 = f01 + f12  # identity by construction
    higher = tuple(float(x - e[0]) for x in e[3:])
    return TransitionTable(
        phi_e=eig.phi_e, f01=f01, f12=f12, f02=f02, f02_half=f02 / 2.0, higher=higher
    )


def anharmonicity(params: CircuitParams, phi_e: float, grid: PhaseGrid) -> float:
    """alpha = 2*(f02/2 - f01) = f12 - f01, in GHz."""
    t = transitions(solve(params, phi_e, grid, k=3))
    return t.alpha


def flux_sweep(
    params: CircuitParams,
    phi_e_list: Sequence[float],
    n_levels: int = 4,
    grid: PhaseGrid | None = None,
    threads: int | None = None,
) -> list[TransitionTable]:
    """Transition tables over a flux-bias list, evaluated concurrently.

    Pure function of its inputs: the result order follows ``phi_e_list``
    regardless of scheduling.
    """
    if len(phi_e_list) == 0:
        raise ValueError("phi_e_list must not be empty")
    if n_levels < 3:
        raise ValueError("n_levels must be at least 3")
    grid = grid or PhaseGrid()

    def one(phi_e: float) -> TransitionTable:
        return transitions(solve(params, phi_e, grid, k=n_levels))

    if threads == 1 or len(phi_e_list) == 1:
        return [one(p) for p in phi_e_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, phi_e_list))


def find_equidistance_points(
    params: CircuitParams,
    phi_e_range: tuple[float, float],
    grid: PhaseGrid | None = None,
    scan_points: int = 200,
    alpha_tol: float = 1e-5,
) -> list[float]:
    """All roots of alpha(phi_e) = 0 inside the range.

    Sign changes on a uniform scan mesh are bracketed and refined by bisection
    until |alpha| < ``alpha_tol`` GHz (10 kHz by default). If alpha vanishes
    at every scan point the whole interval is degenerate and
    DegenerateAnharmonicity is raised.
    """
    lo, hi = phi_e_range
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError("phi_e_range must be a finite, increasing interval")
    grid = grid or PhaseGrid()

    mesh = np.linspace(lo, hi, scan_points)
    values = np.array([anharmonicity(params, p, grid) for p in mesh])
    if np.all(np.abs(values) < alpha_tol):
        raise DegenerateAnharmonicity(lo, hi)

    roots: list[float] = []
    for i in range(scan_points - 1):
        a, b = values[i], values[i + 1]
        if abs(a) < alpha_tol and (not roots or abs(mesh[i] - roots[-1]) > 2 * (hi - lo) / scan_points):
            roots.append(float(mesh[i]))
            continue
        if a * b >= 0:
            continue
        x0, x1, f0 = mesh[i], mesh[i + 1], a
        for _ in range(200):
            xm = 0.5 * (x0 + x1)
            fm = anharmonicity(params, xm, grid)
            if abs(fm) < alpha_tol:
                break
            if (fm > 0) == (f0 > 0):
                x0, f0 = xm, fm
            else:
                x1 = xm
        roots.append(float(0.5 * (x0 + x1) if abs(fm) >= alpha_tol else xm))
    return sorted(roots)


def special_points(kappa: float, k_range: tuple[int, int]) -> list[float]:
    """Flux biases pi*(1 + 2k)/(2*kappa - 1) for integer k in the range.

    These are the points where the sign of the anharmonicity is preserved
    through the half-flux cancellation; the formula is singular at
    kappa = 1/2.
    """
    if kappa == 0.5:
        raise ValueError("special-point formula is singular at kappa = 0.5")
    k_min, k_max = k_range
    if k_max < k_min:
        raise ValueError("empty k range")
    return [math.pi * (1 + 2 * k) / (2 * kappa - 1) for k in range(k_min, k_max + 1)]


def count_sign_changes(state: np.ndarray, rel_floor: float = 1e-8) -> int:
    """Interior sign changes of a real eigenvector, ignoring tail noise."""
    v = np.asarray(state, dtype=float)
    v = v[np.abs(v) > rel_floor * np.abs(v).max()]
    return int(np.sum(np.sign(v[:-1]) != np.sign(v[1:])))


SWEEP_CSV_HEADER = ["phi_e_over_pi", "f01", "f12", "f02", "f02_half", "alpha"]


def write_sweep_csv(tables: Sequence[TransitionTable], path) -> None:
    """Flux-sweep export with the canonical column layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        for t in tables:
            writer.writerow(
                [
                    _fmt(t.phi_e / math.pi),
                    _fmt(t.f01),
                    _fmt(t.f12),
                    _fmt(t.f02),
                    _fmt(t.f02_half),
                    _fmt(t.alpha),
                ]
            )


def _fmt(x: float) -> str:
    return f"{x:.10g}"
