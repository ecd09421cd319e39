"""Dual-path numeric kernels.

The hot inner loops (phase-grid Hamiltonian assembly, which sits inside every
fitting objective evaluation, and the lab-frame master-equation time stepper)
are compiled with numba when it is available. Setting the environment variable
``KINEMON_LAB_DISABLE_NUMBA=1`` before import selects the pure-numpy
implementations instead. Both variants are kept importable under explicit
names so the test suite can check their equivalence and the benchmark script
can time them against each other.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLE = os.environ.get("KINEMON_LAB_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)
NUMBA_ENABLED = numba is not None and not _DISABLE

# 6th-order central finite-difference coefficients for d2/dx2 and d/dx,
# offsets -3..+3. Rows near the grid edge apply the same coefficients against
# implicit zeros outside the grid (Dirichlet boundaries).
STENCIL_ORDER = 6
STENCIL_HALF_WIDTH = 3
D2_COEFFS = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
D1_COEFFS = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])


def hamiltonian_numpy(phi, step, ej1, ej2, ec, el, kappa, phi_e):
    """Assemble the dense phase-basis Hamiltonian (vectorized numpy path)."""
    n = phi.shape[0]
    out = np.zeros((n, n))
    inv2 = 1.0 / (step * step)
    for k in range(7):
        off = k - 3
        coeff = -ec * D2_COEFFS[k] * inv2
        idx = np.arange(n - abs(off))
        if off >= 0:
            out[idx, idx + off] += coeff
        else:
            out[idx - off, idx] += coeff
    v = (
        0.5 * el * phi * phi
        - ej1 * np.cos(phi + kappa * phi_e)
        - ej2 * np.cos(phi - (1.0 - kappa) * phi_e)
    )
    out[np.arange(n), np.arange(n)] += v
    return out


def _hamiltonian_loop(phi, step, ej1, ej2, ec, el, kappa, phi_e):
    n = phi.shape[0]
    out = np.zeros((n, n))
    inv2 = 1.0 / (step * step)
    for i in range(n):
        for k in range(7):
            j = i + k - 3
            if 0 <= j < n:
                out[i, j] -= ec * D2_COEFFS[k] * inv2
        p = phi[i]
        out[i, i] += (
            0.5 * el * p * p
            - ej1 * np.cos(p + kappa * phi_e)
            - ej2 * np.cos(p - (1.0 - kappa) * phi_e)
        )
    return out


def _lab_frame_rk4_impl(
    h0,
    drive_op,
    omega_d,
    amplitude,
    c1,
    rate1,
    c2,
    rate2,
    rho0,
    dt,
    n_steps,
    obs_a,
    obs_pg,
    n_average,
):
    """Propagate the lab-frame GKSL equation with an explicit cosine drive.

    All Hamiltonian entries are E/h in GHz, rates in 1/ns and dt in ns; the
    factor 2*pi converts frequencies to angular form. Over the final
    ``n_average`` steps the cavity amplitude is demodulated at the drive
    frequency and both observables are time averaged.
    """
    two_pi = 2.0 * np.pi
    c1d = np.ascontiguousarray(c1.conj().T)
    c2d = np.ascontiguousarray(c2.conj().T)
    n1 = c1d @ c1
    n2 = c2d @ c2
    rho = rho0.astype(np.complex128).copy()
    dim = rho.shape[0]

    acc_a = 0.0 + 0.0j
    acc_pg = 0.0
    n_acc = 0

    for step_idx in range(n_steps):
        t = step_idx * dt

        h_a = h0 + (amplitude * np.cos(two_pi * omega_d * t)) * drive_op
        h_b = h0 + (amplitude * np.cos(two_pi * omega_d * (t + 0.5 * dt))) * drive_op
        h_c = h0 + (amplitude * np.cos(two_pi * omega_d * (t + dt))) * drive_op

        y = rho
        k1 = -1j * two_pi * (h_a @ y - y @ h_a)
        k1 = k1 + rate1 * (c1 @ y @ c1d - 0.5 * (n1 @ y + y @ n1))
        k1 = k1 + rate2 * (c2 @ y @ c2d - 0.5 * (n2 @ y + y @ n2))

        y = rho + 0.5 * dt * k1
        k2 = -1j * two_pi * (h_b @ y - y @ h_b)
        k2 = k2 + rate1 * (c1 @ y @ c1d - 0.5 * (n1 @ y + y @ n1))
        k2 = k2 + rate2 * (c2 @ y @ c2d - 0.5 * (n2 @ y + y @ n2))

        y = rho + 0.5 * dt * k2
        k3 = -1j * two_pi * (h_b @ y - y @ h_b)
        k3 = k3 + rate1 * (c1 @ y @ c1d - 0.5 * (n1 @ y + y @ n1))
        k3 = k3 + rate2 * (c2 @ y @ c2d - 0.5 * (n2 @ y + y @ n2))

        y = rho + dt * k3
        k4 = -1j * two_pi * (h_c @ y - y @ h_c)
        k4 = k4 + rate1 * (c1 @ y @ c1d - 0.5 * (n1 @ y + y @ n1))
        k4 = k4 + rate2 * (c2 @ y @ c2d - 0.5 * (n2 @ y + y @ n2))

        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if step_idx >= n_steps - n_average:
            t_next = (step_idx + 1) * dt
            phase = np.exp(1j * two_pi * omega_d * t_next)
            tr_a = 0.0 + 0.0j
            tr_pg = 0.0 + 0.0j
            for i in range(dim):
                for j in range(dim):
                    tr_a += obs_a[i, j] * rho[j, i]
                    tr_pg += obs_pg[i, j] * rho[j, i]
            acc_a += phase * tr_a
            acc_pg += tr_pg.real
            n_acc += 1

    return rho, acc_a / n_acc, acc_pg / n_acc


lab_frame_rk4_numpy = _lab_frame_rk4_impl

if numba is not None:
    hamiltonian_numba = numba.njit(cache=True)(_hamiltonian_loop)
    lab_frame_rk4_numba = numba.njit(cache=True)(_lab_frame_rk4_impl)
else:
    hamiltonian_numba = None
    lab_frame_rk4_numba = None

if NUMBA_ENABLED:
    hamiltonian_kernel = hamiltonian_numba
    lab_frame_rk4 = lab_frame_rk4_numba
else:
    hamiltonian_kernel = hamiltonian_numpy
    lab_frame_rk4 = lab_frame_rk4_numpy


def first_derivative_numpy(n, step):
    """Dense antisymmetric 6th-order first-derivative matrix (cold path)."""
    out = np.zeros((n, n))
    for k in range(7):
        off = k - 3
        if D1_COEFFS[k] == 0.0:
            continue
        coeff = D1_COEFFS[k] / step
        idx = np.arange(n - abs(off))
        if off >= 0:
            out[idx, idx + off] += coeff
        else:
            out[idx - off, idx] += coeff
    return out
