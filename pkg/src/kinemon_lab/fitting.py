"""Parameter extraction from measured spectral lines.

The qubit fit minimizes the weighted squared distance between measured line
frequencies and the model transitions (f01, f12, f02/2) with a derivative-free
simplex search. There are no cheap analytic gradients through the eigensolver,
so robustness comes from multi-start: several perturbed copies of the initial
guess are optimized concurrently and the best objective wins, ties broken by
start index. Untagged points are assigned to the nearest model line before
fitting, and assignment and fitting are iterated to a fixed point.

The flux axis of a dataset is in raw bias units (say mA); the calibration
maps it to flux phase via phi_e = 2 pi (bias - offset) / period and is fitted
alongside the circuit energies unless frozen.
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
import scipy.optimize

from .cavity import CavityConfig, annihilation_operator, charge_matrix_element
from .circuit import CircuitParams, PhaseGrid, build_hamiltonian, solve

QUBIT_TAGS = ("01", "12", "02/2")
OUTLIER_TAG = "outlier"
RESONATOR_TAG = "resonator"

ENERGY_BOUNDS = (0.05, 50.0)
KAPPA_BOUNDS = (0.05, 0.95)


class FitError(RuntimeError):
    """Fit did not produce a usable result."""


@dataclass(frozen=True)
class SpectralDataset:
    """Measured (bias, frequency) points with optional weights and line tags."""

    bias: np.ndarray
    frequency: np.ndarray
    weight: np.ndarray
    tags: tuple

    def __post_init__(self):
        b = np.asarray(self.bias, dtype=float)
        f = np.asarray(self.frequency, dtype=float)
        w = np.asarray(self.weight, dtype=float)
        if not (len(b) == len(f) == len(w) == len(self.tags)):
            raise ValueError("bias, frequency, weight and tags must have equal length")
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ValueError("frequencies must be finite and positive")
        if not np.all(np.isfinite(b)):
            raise ValueError("bias values must be finite")
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "weight", w)

    def __len__(self) -> int:
        return len(self.bias)

    @classmethod
    def from_arrays(cls, bias, frequency, weight=None, tags=None) -> "SpectralDataset":
        bias = np.asarray(bias, dtype=float)
        if weight is None:
            weight = np.ones_like(bias)
        if tags is None:
            tags = (None,) * len(bias)
        return cls(bias=bias, frequency=frequency, weight=weight, tags=tuple(tags))

    @classmethod
    def from_csv(cls, path) -> "SpectralDataset":
        """Load ``bias,frequency_GHz[,weight][,tag]`` rows."""
        bias, freq, weight, tags = [], [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 2 or header[0].strip() != "bias":
                raise ValueError(f"{path}: expected header starting with 'bias,frequency_GHz'")
            has_weight = len(header) > 2 and header[2].strip() == "weight"
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    bias.append(float(row[0]))
                    freq.append(float(row[1]))
                    col = 2
                    if has_weight:
                        weight.append(float(row[2]) if len(row) > 2 and row[2] != "" else 1.0)
                        col = 3
                    else:
                        weight.append(1.0)
                    tag = row[col].strip() if len(row) > col and row[col].strip() else None
                    tags.append(tag)
                except (ValueError, IndexError) as exc:
                    raise ValueError(f"{path}: malformed row at line {lineno}: {row!r}") from exc
        return cls.from_arrays(bias, freq, weight, tags)

    def qubit_mask(self) -> np.ndarray:
        return np.array([t in QUBIT_TAGS for t in self.tags])


@dataclass(frozen=True)
class FluxCalibration:
    """Affine bias-to-flux map: phi_e = 2 pi (bias - offset) / period."""

    period: float
    offset: float = 0.0

    def __post_init__(self):
        if self.period == 0:
            raise ValueError("calibration period must be nonzero")

    def phi_e(self, bias) -> np.ndarray:
        return 2.0 * math.pi * (np.asarray(bias, dtype=float) - self.offset) / self.period


@dataclass(frozen=True)
class FitOptions:
    starts: int = 8
    max_evals_per_start: int = 2000
    seed: int = 0
    grid: PhaseGrid = field(default_factory=lambda: PhaseGrid.symmetric(4.0, 51))
    vary_calibration: bool = True
    release_junction_symmetry: bool = False
    assignment_gate: float = 0.3
    assignment_rounds: int = 10
    threads: int | None = None
    xatol: float = 1e-7
    fatol: float = 1e-16


@dataclass(frozen=True)
class FitResult:
    params: CircuitParams
    calibration: FluxCalibration
    cavity: tuple | None
    rms_residual: float
    residuals: np.ndarray
    tags: tuple
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "params": {
                "ej1": self.params.ej1,
                "ej2": self.params.ej2,
                "ec": self.params.ec,
                "el": self.params.el,
                "kappa": self.params.kappa,
            },
            "calibration": {
                "period": self.calibration.period,
                "offset": self.calibration.offset,
            },
            "cavity": None
            if self.cavity is None
            else {"omega_r": self.cavity[0], "g": self.cavity[1]},
            "rms_residual_GHz": self.rms_residual,
            "residuals_GHz": [float(r) for r in self.residuals],
            "tags": list(self.tags),
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def model_line_frequencies(
    params: CircuitParams, phi_e_values: Sequence[float], grid: PhaseGrid
) -> dict[str, np.ndarray]:
    """f01, f12 and f02/2 at each flux phase (lean eigenvalue-only path)."""
    f01 = np.empty(len(phi_e_values))
    f12 = np.empty(len(phi_e_values))
    for i, phi_e in enumerate(phi_e_values):
        h = build_hamiltonian(params, phi_e, grid)
        w = scipy.linalg.eigh(h, eigvals_only=True, subset_by_index=(0, 2))
        f01[i] = w[1] - w[0]
        f12[i] = w[2] - w[1]
    return {"01": f01, "12": f12, "02/2": f01 + (f12 - f01) / 2.0}


def assign_lines(
    dataset: SpectralDataset,
    trial_params: CircuitParams,
    calibration: FluxCalibration,
    grid: PhaseGrid | None = None,
    gate: float = 0.3,
    resonator_freq: float | None = None,
) -> SpectralDataset:
    """Fill untagged points with the nearest model line, gating far outliers.

    Points farther than ``gate`` (GHz) from every candidate line are tagged
    "outlier" instead of being dropped. Existing tags are preserved.
    """
    grid = grid or PhaseGrid.symmetric(4.0, 51)
    untagged = [i for i, t in enumerate(dataset.tags) if t is None]
    if not untagged:
        return dataset
    phis = calibration.phi_e(dataset.bias[untagged])
    lines = model_line_frequencies(trial_params, phis, grid)
    candidates = list(QUBIT_TAGS)
    freq_table = np.stack([lines[t] for t in candidates], axis=1)
    if resonator_freq is not None:
        candidates.append(RESONATOR_TAG)
        freq_table = np.concatenate(
            [freq_table, np.full((len(untagged), 1), resonator_freq)], axis=1
        )
    new_tags = list(dataset.tags)
    for row, i in enumerate(untagged):
        dist = np.abs(freq_table[row] - dataset.frequency[i])
        best = int(np.argmin(dist))
        new_tags[i] = candidates[best] if dist[best] <= gate else OUTLIER_TAG
    return replace(dataset, tags=tuple(new_tags))


def _parameter_layout(initial: CircuitParams, options: FitOptions) -> list[str]:
    if initial.ej2 == 0.0 and initial.kappa == 1.0:
        return ["ej1", "ec", "el"]
    if options.release_junction_symmetry:
        return ["ej1", "ej2", "ec", "el", "kappa"]
    return ["ej", "ec", "el", "kappa"]


def _params_from_vector(names: Sequence[str], values: np.ndarray, template: CircuitParams) -> CircuitParams:
    kw = {
        "ej1": template.ej1,
        "ej2": template.ej2,
        "ec": template.ec,
        "el": template.el,
        "kappa": template.kappa,
    }
    for name, value in zip(names, values):
        if name == "ej":
            kw["ej1"] = kw["ej2"] = value
        else:
            kw[name] = value
    return CircuitParams(**kw)


def fit_qubit_spectrum(
    dataset: SpectralDataset,
    initial: CircuitParams,
    calibration: FluxCalibration,
    options: FitOptions | None = None,
) -> FitResult:
    """Multi-start simplex fit of the circuit energies and flux calibration.

    Single-loop initial guesses (ej2 = 0, kappa = 1) pin those two values and
    fit (ej1, ec, el); two-loop fits share one Josephson energy between the
    junctions unless ``release_junction_symmetry`` is set. Resonator-tagged
    and outlier points never enter the objective. Non-convergence and
    parameters pinned at a bound are reported in the diagnostics, never
    silently.
    """
    options = options or FitOptions()
    if len(dataset) < 6:
        raise ValueError("need at least 6 points for a qubit fit")

    names = _parameter_layout(initial, options)
    base_values = [initial.ej1 if n in ("ej1", "ej") else getattr(initial, n) for n in names]
    calib_names = ["period", "offset"] if options.vary_calibration else []
    x0 = np.array(base_values + [getattr(calibration, n) for n in calib_names])

    scales = np.empty_like(x0)
    lower = np.empty_like(x0)
    upper = np.empty_like(x0)
    for i, name in enumerate(names + calib_names):
        if name in ("ej", "ej1", "ej2", "ec", "el"):
            scales[i] = max(abs(x0[i]), 0.1)
            lower[i], upper[i] = ENERGY_BOUNDS
        elif name == "kappa":
            scales[i] = max(abs(x0[i]), 0.1)
            lower[i], upper[i] = KAPPA_BOUNDS
        elif name == "period":
            scales[i] = abs(x0[i])
            lower[i], upper[i] = (-np.inf, np.inf)
        else:  # offset
            scales[i] = max(abs(x0[i]), 0.05 * abs(calibration.period))
            lower[i], upper[i] = (-np.inf, np.inf)

    rng = np.random.default_rng(options.seed)
    start_vectors = [x0.copy()]
    for _ in range(options.starts - 1):
        perturbed = x0 * rng.uniform(0.8, 1.2, size=len(x0))
        start_vectors.append(np.clip(perturbed, lower, upper))

    current = dataset
    previous_tags = None
    rounds_used = 0
    reached_fixed_point = False
    best = None

    for round_idx in range(max(1, options.assignment_rounds)):
        rounds_used = round_idx + 1
        trial = best[2] if best is not None else initial
        trial_calib = best[3] if best is not None else calibration
        current = assign_lines(
            current, trial, trial_calib, options.grid, options.assignment_gate
        )
        if current.tags == previous_tags:
            reached_fixed_point = True
            break
        previous_tags = current.tags

        mask = current.qubit_mask()
        if not mask.any():
            raise FitError("no points assigned to qubit lines; nothing to fit")
        fit_bias = current.bias[mask]
        fit_freq = current.frequency[mask]
        fit_weight = current.weight[mask]
        fit_tags = [t for t, m in zip(current.tags, mask) if m]
        uniq_bias, point_to_uniq = np.unique(fit_bias, return_inverse=True)

        def objective(x_scaled: np.ndarray) -> float:
            x = x_scaled * scales
            try:
                params = _params_from_vector(names, x[: len(names)], initial)
                if options.vary_calibration:
                    calib = FluxCalibration(period=x[len(names)], offset=x[len(names) + 1])
                else:
                    calib = calibration
                lines = model_line_frequencies(
                    params, calib.phi_e(uniq_bias), options.grid
                )
            except (ValueError, scipy.linalg.LinAlgError):
                return 1e12
            model = np.empty(len(fit_freq))
            for k, tag in enumerate(fit_tags):
                model[k] = lines[tag][point_to_uniq[k]]
            return float(np.sum(fit_weight * (model - fit_freq) ** 2))

        def run_start(idx_vec):
            idx, vec = idx_vec
            descent: list[float] = []

            def tracked(x):
                value = objective(x)
                if not descent or value < descent[-1]:
                    descent.append(value)
                return value

            res = scipy.optimize.minimize(
                tracked,
                vec / scales,
                method="Nelder-Mead",
                bounds=list(zip(lower / scales, upper / scales)),
                options={
                    "maxfev": options.max_evals_per_start,
                    "xatol": options.xatol,
                    "fatol": options.fatol,
                    "adaptive": True,
                },
            )
            return idx, res, descent

        n_workers = options.threads or min(len(start_vectors), 8)
        if n_workers > 1 and len(start_vectors) > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                outcomes = list(pool.map(run_start, enumerate(start_vectors)))
        else:
            outcomes = [run_start(iv) for iv in enumerate(start_vectors)]

        outcomes.sort(key=lambda o: (o[1].fun, o[0]))
        idx, res, descent = outcomes[0]
        x_best = res.x * scales
        params_best = _params_from_vector(names, x_best[: len(names)], initial)
        calib_best = (
            FluxCalibration(period=x_best[len(names)], offset=x_best[len(names) + 1])
            if options.vary_calibration
            else calibration
        )
        best = (res, descent, params_best, calib_best, idx, outcomes)

    res, descent, params_best, calib_best, best_idx, outcomes = best
    x_best = res.x * scales

    degenerate = []
    for i, name in enumerate(names):
        if name == "kappa":
            lo, hi = KAPPA_BOUNDS
        else:
            lo, hi = ENERGY_BOUNDS
        if abs(x_best[i] - lo) < 1e-6 * max(1.0, abs(lo)) or abs(x_best[i] - hi) < 1e-6 * hi:
            degenerate.append(name)

    mask = current.qubit_mask()
    lines = model_line_frequencies(
        params_best, calib_best.phi_e(current.bias), options.grid
    )
    residuals = np.zeros(len(current))
    total_w = 0.0
    total_sq = 0.0
    for i, tag in enumerate(current.tags):
        if tag in QUBIT_TAGS:
            residuals[i] = current.frequency[i] - lines[tag][i]
            total_w += current.weight[i]
            total_sq += current.weight[i] * residuals[i] ** 2
        else:
            residuals[i] = np.nan
    rms = math.sqrt(total_sq / total_w)

    simplex_spread = float(np.max(np.abs(res.final_simplex[0] - res.final_simplex[0][0]), initial=0.0))
    diagnostics = {
        "converged": bool(res.success),
        "message": str(res.message),
        "evaluations": int(res.nfev),
        "iterations": int(res.nit),
        "final_step_norm": simplex_spread,
        "best_start": int(best_idx),
        "start_objectives": [float(o[1].fun) for o in sorted(outcomes, key=lambda o: o[0])],
        "descent_record": [float(v) for v in descent],
        "assignment_rounds": rounds_used,
        "assignment_fixed_point": reached_fixed_point,
        "degenerate_parameters": degenerate,
        "fitted_names": names + calib_names,
    }
    if not res.success:
        diagnostics["warning"] = "simplex did not report convergence within budget"

    return FitResult(
        params=params_best,
        calibration=calib_best,
        cavity=None,
        rms_residual=rms,
        residuals=residuals,
        tags=current.tags,
        diagnostics=diagnostics,
    )


def fit_cavity(
    dataset: SpectralDataset,
    params: CircuitParams,
    initial: tuple[float, float],
    grid: PhaseGrid | None = None,
    calibration: FluxCalibration | None = None,
    n_kinemon_levels: int = 6,
) -> tuple[float, float]:
    """Least-squares (omega_r, g) against resonator-tagged trace points.

    The circuit is solved once per flux point with the already-fitted
    parameters; only the small coupled matrix is rebuilt inside the search.
    """
    grid = grid or PhaseGrid()
    sel = [i for i, t in enumerate(dataset.tags) if t == RESONATOR_TAG]
    if len(sel) < 3:
        raise ValueError("need at least 3 resonator-tagged points")
    bias = dataset.bias[sel]
    meas = dataset.frequency[sel]
    phis = calibration.phi_e(bias) if calibration is not None else bias

    precomputed = []
    for phi_e in phis:
        eig = solve(params, phi_e, grid, k=n_kinemon_levels)
        precomputed.append((eig.energies - eig.energies[0], charge_matrix_element(eig)))

    i_k = np.eye(n_kinemon_levels)

    def trace_model(omega_r: float, g: float, n_fock: int = 4) -> np.ndarray:
        from scipy.optimize import linear_sum_assignment

        a = annihilation_operator(n_fock)
        i_f = np.eye(n_fock)
        out = np.empty(len(precomputed))
        for i, (energies, d) in enumerate(precomputed):
            h = (
                np.kron(np.diag(energies), i_f)
                + omega_r * np.kron(i_k, np.diag(np.arange(n_fock) + 0.5))
                + g * np.kron(d, a.T - a)
            )
            w, v = np.linalg.eigh(h)
            overlap = np.abs(v) ** 2
            rows, cols = linear_sum_assignment(-overlap)
            dressed = dict(zip(rows, cols))
            out[i] = w[dressed[1]] - w[dressed[0]]
        return out

    def objective(x: np.ndarray) -> float:
        omega_r, g = x
        if omega_r <= 0 or g < 0 or g >= omega_r:
            return 1e12
        return float(np.sum((trace_model(omega_r, g) - meas) ** 2))

    res = scipy.optimize.minimize(
        objective,
        np.asarray(initial, dtype=float),
        method="Nelder-Mead",
        options={"maxfev": 4000, "xatol": 1e-9, "fatol": 1e-20, "adaptive": True},
    )
    if not math.isfinite(res.fun):
        raise FitError("cavity fit diverged")
    return float(res.x[0]), float(abs(res.x[1]))


TABLE_ROWS = (
    ("E_J1/h (GHz)", lambda r: r.params.ej1),
    ("E_J2/h (GHz)", lambda r: r.params.ej2),
    ("E_C/h (GHz)", lambda r: r.params.ec),
    ("E_L/h (GHz)", lambda r: r.params.el),
    ("kappa", lambda r: r.params.kappa),
    ("omega_r/2pi (GHz)", lambda r: r.cavity[0] if r.cavity else float("nan")),
    ("g/2pi (MHz)", lambda r: 1e3 * r.cavity[1] if r.cavity else float("nan")),
    ("rms residual (MHz)", lambda r: 1e3 * r.rms_residual),
)


def summary_table(result: FitResult) -> str:
    """Human-readable parameter summary, one quantity per row."""
    width = max(len(name) for name, _ in TABLE_ROWS)
    lines = []
    for name, getter in TABLE_ROWS:
        value = getter(result)
        lines.append(f"{name:<{width}}  {value:.6g}")
    return "\n".join(lines) + "\n"
