"""Driven-dissipative steady states and two-tone spectroscopy maps.

The master equation contains the coupled circuit-resonator Hamiltonian, a
cavity drive, and two decay channels: photon loss at rate kappa_c and circuit
relaxation at rate gamma_q, with collapse operators sqrt(kappa) a and
sqrt(gamma) b. The circuit lowering operator b shifts neighboring eigenstates
with unit weight (no bosonic sqrt-n factors) and acts as the identity on the
Fock factor.

The default solver works in the frame rotating at the drive frequency, with
the rotating-wave approximation applied to both the drive and the coupling,
which makes the generator time independent: the steady state is then the
(one-dimensional) null space of the Liouvillian, extracted through a bordered
linear solve in which one row is replaced by the trace constraint. A direct
time-evolution path is kept alongside as an independent cross-check, and a
lab-frame integrator with the explicit cosine drive (no rotating-wave
approximation at all) validates the frame treatment itself.

Drive amplitude convention: ``DriveConfig.amplitude`` is the lab-frame
prefactor Omega/2pi in GHz of Omega (a^dag + a) cos(omega_d t); the
rotating-frame drive term therefore carries amplitude/2.

Tensor ordering is circuit first, cavity second, matching the cavity module.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from . import _kernels
from .cavity import CavityConfig, annihilation_operator, charge_matrix_element
from .circuit import CircuitParams, EigenSolution, PhaseGrid, solve

TRACE_TOL = 1e-9
HERM_TOL = 1e-9
POSITIVITY_TOL = -1e-7
RESIDUAL_REL_TOL = 1e-8


class SteadyStateError(RuntimeError):
    """Steady-state extraction failed (degenerate or ill-conditioned Liouvillian)."""


def decay_rate_linewidth_ghz(rate_per_us: float) -> float:
    """Convert a decay rate in 1/us to the equivalent linewidth in GHz.

    rate / (2 pi 10^3): 2.5 / us maps to about 0.398 MHz.
    """
    return rate_per_us / (2e3 * math.pi)


@dataclass(frozen=True)
class DissipationConfig:
    """Cavity and circuit energy-decay rates, both in 1/us."""

    kappa_c: float
    gamma_q: float

    def __post_init__(self):
        if self.kappa_c < 0 or self.gamma_q < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def kappa_c_per_ns(self) -> float:
        return self.kappa_c * 1e-3

    @property
    def gamma_q_per_ns(self) -> float:
        return self.gamma_q * 1e-3


@dataclass(frozen=True)
class DriveConfig:
    """Cavity drive: frequency and pre-RWA amplitude Omega/2pi, both GHz."""

    omega_drive: float
    amplitude: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("drive amplitude must be non-negative")


@dataclass(frozen=True)
class SteadyState:
    """Stationary density matrix over (circuit levels x Fock) with observables."""

    rho: np.ndarray
    cavity_amplitude: float
    ground_depopulation: float
    residual: float

    def __post_init__(self):
        rho = self.rho
        tr_err = abs(np.trace(rho) - 1.0)
        if tr_err > TRACE_TOL:
            raise ValueError(f"steady state trace deviates by {tr_err:.2e}")
        herm = np.abs(rho - rho.conj().T).max()
        if herm > HERM_TOL:
            raise ValueError(f"steady state Hermiticity defect {herm:.2e}")
        min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
        if min_eig < POSITIVITY_TOL:
            raise ValueError(f"steady state has negative population {min_eig:.2e}")


def kinemon_lowering_operator(
    eig: EigenSolution, n_levels: int, n_fock: int = 1
) -> np.ndarray:
    """Circuit lowering operator on the coupled space.

    In the eigenbasis this is the strict upper shift (|E_n><E_{n+1}| summed
    over n), tensored with the identity on the cavity factor. It is not a
    bosonic operator: all weights are exactly one.
    """
    if n_levels < 2:
        raise ValueError("need at least two circuit levels")
    if n_levels > eig.n_levels:
        raise ValueError(
            f"requested {n_levels} levels but the eigensolution has {eig.n_levels}"
        )
    shift = np.diag(np.ones(n_levels - 1), 1)
    return np.kron(shift, np.eye(n_fock))


@dataclass(frozen=True)
class _ColumnOps:
    """Operators shared by all drive frequencies at one flux bias."""

    energies: np.ndarray
    h_static: np.ndarray  # RWA Hamiltonian without the frame shift, GHz
    number_op: np.ndarray
    a_full: np.ndarray
    b_full: np.ndarray
    ground_proj: np.ndarray


def _column_ops(
    params: CircuitParams,
    cavity: CavityConfig,
    phi_e: float,
    grid: PhaseGrid,
    n_kinemon_levels: int,
    drive_amplitude: float,
) -> _ColumnOps:
    eig = solve(params, phi_e, grid, k=n_kinemon_levels)
    d = charge_matrix_element(eig, n_kinemon_levels)
    n_fock = cavity.n_fock
    a = annihilation_operator(n_fock)
    i_k = np.eye(n_kinemon_levels)
    i_f = np.eye(n_fock)

    energies = eig.energies - eig.energies[0]
    h = np.kron(np.diag(energies), i_f)
    h = h + cavity.omega_r * np.kron(i_k, np.diag(np.arange(n_fock) + 0.5))
    # excitation-conserving part of g*d(x)(a^dag - a)
    for m in range(n_kinemon_levels - 1):
        p = np.zeros((n_kinemon_levels, n_kinemon_levels))
        p[m, m + 1] = 1.0
        h = h + cavity.g * d[m, m + 1] * (np.kron(p, a.T) + np.kron(p.T, a))

    a_full = np.kron(i_k, a)
    h = h + 0.5 * drive_amplitude * (a_full + a_full.T)

    number_op = np.kron(np.diag(np.arange(n_kinemon_levels, dtype=float)), i_f)
    number_op = number_op + np.kron(i_k, np.diag(np.arange(n_fock, dtype=float)))
    b_full = np.kron(np.diag(np.ones(n_kinemon_levels - 1), 1), i_f)
    ground = np.zeros((n_kinemon_levels, n_kinemon_levels))
    ground[0, 0] = 1.0
    return _ColumnOps(
        energies=energies,
        h_static=h,
        number_op=number_op,
        a_full=a_full,
        b_full=b_full,
        ground_proj=np.kron(ground, i_f),
    )


def _commutator_superop(h: np.ndarray) -> np.ndarray:
    """-i[H, .] for row-major vectorized density matrices (H in angular units)."""
    dim = h.shape[0]
    eye = np.eye(dim)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _dissipator_superop(op: np.ndarray, rate: float) -> np.ndarray:
    dim = op.shape[0]
    eye = np.eye(dim)
    ndag = op.conj().T @ op
    return rate * (
        np.kron(op, op.conj())
        - 0.5 * np.kron(ndag, eye)
        - 0.5 * np.kron(eye, ndag.T)
    )


def liouvillian_matrix(
    h_ghz: np.ndarray, collapse: Sequence[tuple[float, np.ndarray]]
) -> np.ndarray:
    """Full generator in angular 1/ns units from a GHz Hamiltonian.

    ``collapse`` pairs each operator with its rate in 1/ns.
    """
    lio = _commutator_superop(2.0 * math.pi * np.asarray(h_ghz, dtype=complex))
    for rate, op in collapse:
        if rate > 0:
            lio = lio + _dissipator_superop(np.asarray(op, dtype=complex), rate)
    return lio


def _null_space_diagnosis(lio: np.ndarray) -> int:
    sv = scipy.linalg.svdvals(lio)
    return int(np.sum(sv < sv[0] * 1e-10))


def _solve_with_trace_row(lio: np.ndarray, dim: int, replaced_row: int) -> np.ndarray:
    a = lio.copy()
    a[replaced_row, :] = 0.0
    a[replaced_row, :: dim + 1] = 1.0
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[replaced_row] = 1.0
    return np.linalg.solve(a, rhs)


def _bordered_solve(lio: np.ndarray, dim: int) -> tuple[np.ndarray, float]:
    """Null vector with unit trace via a trace-constrained linear solve.

    Trace preservation makes any one diagonal row of the generator redundant,
    so replacing it with the trace constraint is well posed exactly when the
    stationary state is unique. Solving with two different replaced rows
    probes that uniqueness: a degenerate subspace gives two different valid
    answers, which is reported with the null-space dimension instead of
    returning an arbitrary member.
    """
    try:
        x = _solve_with_trace_row(lio, dim, 0)
        x2 = _solve_with_trace_row(lio, dim, dim + 1)
    except np.linalg.LinAlgError as exc:
        raise SteadyStateError(
            f"bordered solve failed: {exc}; "
            f"null-space dimension {_null_space_diagnosis(lio)}"
        ) from exc
    scale = np.abs(lio).max()
    residual = float(np.abs(lio @ x).max())
    disagreement = float(np.abs(x - x2).max())
    if residual > RESIDUAL_REL_TOL * scale or disagreement > 1e-7:
        raise SteadyStateError(
            f"steady state not unique or not converged: residual {residual:.2e} "
            f"(scale {scale:.2e}), bordering disagreement {disagreement:.2e}; "
            f"null-space dimension {_null_space_diagnosis(lio)}"
        )
    return x, residual


def _observables(
    x: np.ndarray, ops: _ColumnOps, dim: int
) -> tuple[np.ndarray, float, float]:
    rho = x.reshape(dim, dim)
    amp = abs(complex(np.trace(ops.a_full @ rho)))
    depop = 1.0 - float(np.real(np.trace(ops.ground_proj @ rho)))
    return rho, amp, depop


def steady_state(
    params: CircuitParams,
    cavity: CavityConfig,
    dissipation: DissipationConfig,
    drive: DriveConfig,
    phi_e: float,
    grid: PhaseGrid | None = None,
    n_kinemon_levels: int = 4,
    max_dim: int = 64,
    method: str = "nullspace",
) -> SteadyState:
    """Stationary state of the rotating-frame master equation.

    ``method`` selects the solver path: "nullspace" (bordered linear solve,
    the default) or "evolve" (direct time evolution from vacuum over ten times
    the slowest decay time, kept as the independent validation oracle).
    """
    grid = grid or PhaseGrid()
    dim = n_kinemon_levels * cavity.n_fock
    if dim > max_dim:
        raise ValueError(f"coupled dimension {dim} exceeds the bound {max_dim}")
    if method not in ("nullspace", "evolve"):
        raise ValueError(f"unknown steady-state method {method!r}")
    ops = _column_ops(params, cavity, phi_e, grid, n_kinemon_levels, drive.amplitude)
    h_frame = ops.h_static - drive.omega_drive * ops.number_op
    lio = liouvillian_matrix(
        h_frame,
        [
            (dissipation.kappa_c_per_ns, ops.a_full),
            (dissipation.gamma_q_per_ns, ops.b_full),
        ],
    )
    if method == "nullspace":
        x, residual = _bordered_solve(lio, dim)
    else:
        if min(dissipation.kappa_c, dissipation.gamma_q) <= 0:
            raise ValueError("time-evolution path requires strictly positive rates")
        # coherence modes decay at half the population rates, so evolving for
        # twice the 10x bound keeps the leftover transient below 1e-5
        t_final = 20.0 / min(dissipation.kappa_c_per_ns, dissipation.gamma_q_per_ns)
        rho0 = np.zeros(dim * dim, dtype=complex)
        rho0[0] = 1.0
        x = scipy.linalg.expm(lio * t_final) @ rho0
        residual = float(np.abs(lio @ x).max())
    rho, amp, depop = _observables(x, ops, dim)
    return SteadyState(
        rho=rho, cavity_amplitude=amp, ground_depopulation=depop, residual=residual
    )


@dataclass(frozen=True)
class TwoToneMap:
    """Steady-state observables on a (flux bias) x (drive frequency) grid."""

    phi_e: np.ndarray
    omega_d: np.ndarray
    cavity_amplitude: np.ndarray
    ground_depopulation: np.ndarray
    failures: tuple

    @property
    def n_cells(self) -> int:
        return self.cavity_amplitude.size


def two_tone_map(
    params: CircuitParams,
    cavity: CavityConfig,
    dissipation: DissipationConfig,
    drive_amplitude: float,
    phi_e_list: Sequence[float],
    omega_d_list: Sequence[float],
    grid: PhaseGrid | None = None,
    n_kinemon_levels: int = 4,
    threads: int | None = None,
) -> TwoToneMap:
    """Two-tone spectroscopy map; cells are independent and deterministic.

    Failing cells are marked NaN and recorded with their error message rather
    than aborting the whole map.
    """
    if len(phi_e_list) == 0 or len(omega_d_list) == 0:
        raise ValueError("phi_e_list and omega_d_list must not be empty")
    grid = grid or PhaseGrid()
    phis = np.asarray(list(phi_e_list), dtype=float)
    omegas = np.asarray(list(omega_d_list), dtype=float)
    n_fock = cavity.n_fock
    dim = n_kinemon_levels * n_fock
    amp = np.full((len(phis), len(omegas)), np.nan)
    depop = np.full((len(phis), len(omegas)), np.nan)
    failures: list[tuple[int, int, str]] = []

    def column(i: int) -> list[tuple[int, int, str]]:
        local_failures: list[tuple[int, int, str]] = []
        try:
            ops = _column_ops(
                params, cavity, phis[i], grid, n_kinemon_levels, drive_amplitude
            )
        except Exception as exc:  # pragma: no cover - defensive per-cell contract
            return [(i, j, str(exc)) for j in range(len(omegas))]
        lio_base = liouvillian_matrix(
            ops.h_static,
            [
                (dissipation.kappa_c_per_ns, ops.a_full),
                (dissipation.gamma_q_per_ns, ops.b_full),
            ],
        )
        frame_term = -_commutator_superop(
            2.0 * math.pi * ops.number_op.astype(complex)
        )
        for j, omega_d in enumerate(omegas):
            try:
                x, _ = _bordered_solve(lio_base + omega_d * frame_term, dim)
                rho, a_val, d_val = _observables(x, ops, dim)
                SteadyState(
                    rho=rho,
                    cavity_amplitude=a_val,
                    ground_depopulation=d_val,
                    residual=0.0,
                )
                amp[i, j] = a_val
                depop[i, j] = d_val
            except Exception as exc:
                local_failures.append((i, j, str(exc)))
        return local_failures

    if threads == 1 or len(phis) == 1:
        for i in range(len(phis)):
            failures.extend(column(i))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for result in pool.map(column, range(len(phis))):
                failures.extend(result)

    failures.sort()
    return TwoToneMap(
        phi_e=phis,
        omega_d=omegas,
        cavity_amplitude=amp,
        ground_depopulation=depop,
        failures=tuple(failures),
    )


def lab_frame_observables(
    params: CircuitParams,
    cavity: CavityConfig,
    dissipation: DissipationConfig,
    drive: DriveConfig,
    phi_e: float,
    grid: PhaseGrid | None = None,
    n_kinemon_levels: int = 3,
    t_final: float = 1200.0,
    steps_per_period: int = 32,
) -> tuple[float, float]:
    """Integrate the lab-frame master equation with the explicit cosine drive.

    No rotating-wave approximation anywhere: the full coupling g*d(x)(a^dag-a)
    and the time-dependent drive are kept. The cavity amplitude is demodulated
    at the drive frequency and both observables are averaged over the last two
    drive periods, which is what the rotating-frame solution predicts for
    |<a>| and the ground-state population. Times are in ns.
    """
    grid = grid or PhaseGrid()
    eig = solve(params, phi_e, grid, k=n_kinemon_levels)
    d = charge_matrix_element(eig, n_kinemon_levels)
    n_fock = cavity.n_fock
    a = annihilation_operator(n_fock)
    i_k = np.eye(n_kinemon_levels)
    i_f = np.eye(n_fock)
    energies = eig.energies - eig.energies[0]
    h_lab = (
        np.kron(np.diag(energies), i_f)
        + cavity.omega_r * np.kron(i_k, np.diag(np.arange(n_fock) + 0.5))
        + cavity.g * np.kron(d, a.T - a)
    ).astype(complex)
    a_full = np.kron(i_k, a).astype(complex)
    drive_op = a_full + a_full.conj().T
    b_full = np.kron(np.diag(np.ones(n_kinemon_levels - 1), 1), i_f).astype(complex)
    ground = np.zeros((n_kinemon_levels, n_kinemon_levels))
    ground[0, 0] = 1.0
    pg = np.kron(ground, i_f).astype(complex)

    period = 1.0 / drive.omega_drive
    dt = period / steps_per_period
    n_steps = int(round(t_final / dt))
    n_average = 2 * steps_per_period
    dim = n_kinemon_levels * n_fock
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0

    _, demod_a, avg_pg = _kernels.lab_frame_rk4(
        h_lab,
        drive_op,
        drive.omega_drive,
        drive.amplitude,
        a_full,
        dissipation.kappa_c_per_ns,
        b_full,
        dissipation.gamma_q_per_ns,
        rho0,
        dt,
        n_steps,
        a_full,
        pg,
        n_average,
    )
    return abs(demod_a), 1.0 - float(np.real(avg_pg))


MAP_CSV_HEADER = ["phi_e_over_pi", "omega_d_GHz", "cavity_amp", "ground_depop"]


def write_map_csv(result: TwoToneMap, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MAP_CSV_HEADER)
        for i, phi_e in enumerate(result.phi_e):
            for j, omega_d in enumerate(result.omega_d):
                writer.writerow(
                    [
                        f"{phi_e / math.pi:.10g}",
                        f"{omega_d:.10g}",
                        f"{result.cavity_amplitude[i, j]:.10g}",
                        f"{result.ground_depopulation[i, j]:.10g}",
                    ]
                )


def render_heatmap(result: TwoToneMap, path) -> None:
    """Two-panel amplitude/depopulation image; no timestamps embedded."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # stable element ids and no timestamps, so identical maps render
    # byte-identical files
    matplotlib.rcParams["svg.hashsalt"] = "kinemon-lab"
    fig, axes = plt.subplots(2, 1, figsize=(8, 8), sharex=True)
    x = result.phi_e / math.pi
    y = result.omega_d
    for ax, data, label in (
        (axes[0], result.cavity_amplitude, "|<a>|"),
        (axes[1], result.ground_depopulation, "1 - P(g)"),
    ):
        mesh = ax.pcolormesh(x, y, data.T, shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_ylabel("drive frequency (GHz)")
    axes[1].set_xlabel("flux bias / pi")
    metadata = {"Date": None} if str(path).endswith(".svg") else None
    fig.savefig(path, metadata=metadata)
    plt.close(fig)
