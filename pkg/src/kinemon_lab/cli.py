"""Command-line front end.

One structured JSON config file drives every subcommand; unknown keys are
rejected rather than ignored so a typo cannot silently change a run. Outputs
are plain CSV/JSON with fixed numeric formatting, so identical inputs produce
byte-identical files.

    kinemon-lab <spectrum|anharmonicity|bands|cavity|twotone|fit>
                --config <path-or-fixture> [--out DIR] [--threads N]

``--config`` accepts either a filesystem path or the name of a shipped
fixture (for example ``kinemon_i``); ``kinemon-lab fixtures`` lists them.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import cavity as cavity_mod
from . import charge as charge_mod
from . import circuit as circuit_mod
from . import fitting as fitting_mod
from . import lindblad as lindblad_mod

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTE = 2


class ConfigError(ValueError):
    pass


_SECTION_KEYS = {
    "device": {"ej1", "ej2", "ec", "el", "kappa"},
    "grid": {"phi_max", "n_nodes"},
    "cavity": {"omega_r", "g", "fock_cutoff", "n_kinemon_levels"},
    "dissipation": {"kappa_c", "gamma_q"},
    "drive": {"amplitude"},
    "spectrum": {"phi_e_start_over_pi", "phi_e_stop_over_pi", "n_points", "n_levels"},
    "anharmonicity": {"phi_e_start_over_pi", "phi_e_stop_over_pi", "n_points"},
    "bands": {
        "levels",
        "n_samples",
        "charge_cutoff",
        "gauge_n_g",
        "gauge_phi_e_over_pi",
        "gauge_grid_n_nodes",
        "gauge_grid_phi_max",
    },
    "cavity_trace": {"phi_e_start_over_pi", "phi_e_stop_over_pi", "n_points"},
    "twotone": {
        "phi_e_start_over_pi",
        "phi_e_stop_over_pi",
        "n_phi",
        "omega_d_start",
        "omega_d_stop",
        "n_omega",
        "n_kinemon_levels",
        "image",
    },
    "fit": {
        "initial",
        "calibration",
        "starts",
        "max_evals",
        "seed",
        "grid",
        "fit_cavity",
        "cavity_initial",
    },
}


def _validate_config(cfg: dict) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(cfg) - set(_SECTION_KEYS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for section, keys in _SECTION_KEYS.items():
        if section not in cfg:
            continue
        if not isinstance(cfg[section], dict):
            raise ConfigError(f"config section {section!r} must be an object")
        bad = set(cfg[section]) - keys
        if bad:
            raise ConfigError(f"unknown keys in config section {section!r}: {sorted(bad)}")


def _load_config(spec: str) -> dict:
    path = Path(spec)
    if path.exists():
        raw = path.read_text(encoding="utf-8")
    else:
        name = spec if spec.endswith(".json") else f"{spec}.json"
        pkg_file = resources.files("kinemon_lab").joinpath("configs", name)
        if not pkg_file.is_file():
            raise ConfigError(f"config not found: {spec!r} (no file and no such fixture)")
        raw = pkg_file.read_text(encoding="utf-8")
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _validate_config(cfg)
    return cfg


def _require(cfg: dict, section: str) -> dict:
    if section not in cfg:
        raise ConfigError(f"config is missing the {section!r} section")
    return cfg[section]


def _device(cfg: dict) -> circuit_mod.CircuitParams:
    return circuit_mod.CircuitParams.from_dict(_require(cfg, "device"))


def _grid(cfg: dict, section: str = "grid") -> circuit_mod.PhaseGrid:
    g = cfg.get(section, {})
    return circuit_mod.PhaseGrid.symmetric(
        phi_max=float(g.get("phi_max", 8.0)), n_nodes=int(g.get("n_nodes", 201))
    )


def _cavity(cfg: dict) -> cavity_mod.CavityConfig:
    c = _require(cfg, "cavity")
    if "omega_r" not in c or "g" not in c:
        raise ConfigError("cavity section needs omega_r and g")
    return cavity_mod.CavityConfig(
        omega_r=float(c["omega_r"]),
        g=float(c["g"]),
        fock_cutoff=int(c.get("fock_cutoff", 5)),
    )


def _sweep_values(section: dict, n_key: str = "n_points") -> np.ndarray:
    try:
        start = float(section["phi_e_start_over_pi"]) * math.pi
        stop = float(section["phi_e_stop_over_pi"]) * math.pi
        n = int(section[n_key])
    except KeyError as exc:
        raise ConfigError(f"sweep section is missing {exc.args[0]!r}") from exc
    if n < 1:
        raise ConfigError("sweep needs at least one point")
    return np.linspace(start, stop, n)


def cmd_spectrum(cfg: dict, out: Path, threads: int | None) -> int:
    params = _device(cfg)
    grid = _grid(cfg)
    section = _require(cfg, "spectrum")
    phis = _sweep_values(section)
    n_levels = int(section.get("n_levels", 4))
    tables = circuit_mod.flux_sweep(params, phis, n_levels=n_levels, grid=grid, threads=threads)
    circuit_mod.write_sweep_csv(tables, out / "spectrum.csv")
    return EXIT_OK


def cmd_anharmonicity(cfg: dict, out: Path, threads: int | None) -> int:
    params = _device(cfg)
    grid = _grid(cfg)
    section = _require(cfg, "anharmonicity")
    phis = _sweep_values(section)
    tables = circuit_mod.flux_sweep(params, phis, n_levels=3, grid=grid, threads=threads)
    with open(out / "anharmonicity.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("phi_e_over_pi,alpha_GHz\n")
        for t in tables:
            fh.write(f"{t.phi_e / math.pi:.10g},{t.alpha:.10g}\n")
    return EXIT_OK


def cmd_bands(cfg: dict, out: Path, threads: int | None) -> int:
    params = _device(cfg)
    section = cfg.get("bands", {})
    levels = int(section.get("levels", 7))
    n_samples = int(section.get("n_samples", 41))
    cutoff = int(section.get("charge_cutoff", 30))
    ej_total = params.ej1 + params.ej2

    base = charge_mod.ChargeBasisConfig(ej=ej_total, ec=params.ec, charge_cutoff=cutoff)
    n_g_values = np.linspace(0.0, 1.0, n_samples, endpoint=False)
    charge_mod.write_charge_spectrum_csv(base, levels, n_g_values, out / "charge_spectrum.csv")
    charge_mod.write_band_widths_csv(
        ej_total, params.ec, levels, out / "band_widths.csv", charge_cutoff=cutoff
    )

    widths = [
        charge_mod.band_width(ej_total, params.ec, lvl, charge_cutoff=cutoff)
        for lvl in range(levels)
    ]
    gauge_n_g = [float(x) for x in section.get("gauge_n_g", [0.0, 0.25, 0.5])]
    gauge_phi = float(section.get("gauge_phi_e_over_pi", 0.0)) * math.pi
    gauge_grid = circuit_mod.PhaseGrid.symmetric(
        phi_max=float(section.get("gauge_grid_phi_max", 4.0)),
        n_nodes=int(section.get("gauge_grid_n_nodes", 801)),
    )
    spectra = [
        charge_mod.shunted_gauge_spectrum(params, gauge_phi, ng, gauge_grid, k=6).energies
        for ng in gauge_n_g
    ]
    deviation = float(max(np.abs(s - spectra[0]).max() for s in spectra))
    report = {
        "gauge": {
            "phi_e_over_pi": gauge_phi / math.pi,
            "n_g_values": gauge_n_g,
            "max_deviation_GHz": deviation,
            "tolerance_GHz": 1e-8,
            "pass": deviation < 1e-8,
        },
        "band_widths": {
            "widths_GHz": widths,
            "strictly_increasing": all(b > a for a, b in zip(widths, widths[1:])),
        },
    }
    with open(out / "gauge_check.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def cmd_cavity(cfg: dict, out: Path, threads: int | None) -> int:
    params = _device(cfg)
    grid = _grid(cfg)
    cavity = _cavity(cfg)
    n_kin = int(cfg.get("cavity", {}).get("n_kinemon_levels", 6))
    section = _require(cfg, "cavity_trace")
    phis = _sweep_values(section)
    trace = cavity_mod.resonator_trace(
        params, cavity, phis, grid, n_kinemon_levels=n_kin, threads=threads
    )
    cavity_mod.write_trace_csv(trace, out / "resonator_trace.csv")
    return EXIT_OK


def cmd_twotone(cfg: dict, out: Path, threads: int | None) -> int:
    params = _device(cfg)
    grid = _grid(cfg)
    cavity = _cavity(cfg)
    diss_cfg = _require(cfg, "dissipation")
    dissipation = lindblad_mod.DissipationConfig(
        kappa_c=float(diss_cfg["kappa_c"]), gamma_q=float(diss_cfg["gamma_q"])
    )
    amplitude = float(_require(cfg, "drive").get("amplitude", 0.0))
    section = _require(cfg, "twotone")
    phis = _sweep_values(section, n_key="n_phi")
    try:
        omegas = np.linspace(
            float(section["omega_d_start"]),
            float(section["omega_d_stop"]),
            int(section["n_omega"]),
        )
    except KeyError as exc:
        raise ConfigError(f"twotone section is missing {exc.args[0]!r}") from exc
    n_kin = int(section.get("n_kinemon_levels", 4))
    result = lindblad_mod.two_tone_map(
        params,
        cavity,
        dissipation,
        amplitude,
        phis,
        omegas,
        grid,
        n_kinemon_levels=n_kin,
        threads=threads,
    )
    lindblad_mod.write_map_csv(result, out / "two_tone_map.csv")
    image = section.get("image")
    if image:
        if image not in ("svg", "png"):
            raise ConfigError("twotone.image must be 'svg' or 'png'")
        lindblad_mod.render_heatmap(result, out / f"two_tone_map.{image}")
    if result.failures:
        sys.stderr.write(f"warning: {len(result.failures)} map cells failed\n")
    return EXIT_OK


def cmd_fit(cfg: dict, out: Path, threads: int | None, data_path: str) -> int:
    if not Path(data_path).exists():
        raise ConfigError(f"dataset file not found: {data_path}")
    dataset = fitting_mod.SpectralDataset.from_csv(data_path)
    section = _require(cfg, "fit")
    initial_cfg = section.get("initial")
    if initial_cfg is None:
        raise ConfigError("fit section needs an 'initial' device guess")
    initial = circuit_mod.CircuitParams.from_dict(initial_cfg)
    calib_cfg = section.get("calibration")
    if calib_cfg is None:
        raise ConfigError("fit section needs a 'calibration' with period and offset")
    calibration = fitting_mod.FluxCalibration(
        period=float(calib_cfg["period"]), offset=float(calib_cfg.get("offset", 0.0))
    )
    grid_cfg = section.get("grid", {})
    options = fitting_mod.FitOptions(
        starts=int(section.get("starts", 8)),
        max_evals_per_start=int(section.get("max_evals", 2000)),
        seed=int(section.get("seed", 0)),
        grid=circuit_mod.PhaseGrid.symmetric(
            phi_max=float(grid_cfg.get("phi_max", 4.0)),
            n_nodes=int(grid_cfg.get("n_nodes", 51)),
        ),
        threads=threads,
    )
    result = fitting_mod.fit_qubit_spectrum(dataset, initial, calibration, options)
    if section.get("fit_cavity"):
        cav_initial = section.get("cavity_initial")
        if cav_initial is None:
            raise ConfigError("fit.fit_cavity requires fit.cavity_initial")
        omega_r, g = fitting_mod.fit_cavity(
            dataset,
            result.params,
            (float(cav_initial["omega_r"]), float(cav_initial["g"])),
            grid=options.grid,
            calibration=result.calibration,
        )
        result = fitting_mod.FitResult(
            params=result.params,
            calibration=result.calibration,
            cavity=(omega_r, g),
            rms_residual=result.rms_residual,
            residuals=result.residuals,
            tags=result.tags,
            diagnostics=result.diagnostics,
        )
    result.to_json(out / "fit_result.json")
    with open(out / "fit_summary.txt", "w", encoding="utf-8") as fh:
        fh.write(fitting_mod.summary_table(result))
    return EXIT_OK


def list_fixtures() -> list[str]:
    pkg_dir = resources.files("kinemon_lab").joinpath("configs")
    return sorted(p.name[:-5] for p in pkg_dir.iterdir() if p.name.endswith(".json"))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="kinemon-lab",
        description="Spectra, charge bands, cavity response, two-tone maps and "
        "parameter fits for inductively shunted transmon circuits.",
    )
    parser.add_argument(
        "--json-errors",
        action="store_true",
        help="emit machine-readable error JSON on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, needs_data: bool = False):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config file path or fixture name")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--threads", type=int, default=None, help="concurrency cap")
        if needs_data:
            p.add_argument("--data", required=True, help="dataset CSV path")
        return p

    for name in ("spectrum", "anharmonicity", "bands", "cavity", "twotone"):
        add(name)
    add("fit", needs_data=True)
    sub.add_parser("fixtures")

    args = parser.parse_args(argv)

    if args.command == "fixtures":
        for name in list_fixtures():
            print(name)
        return EXIT_OK

    try:
        cfg = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        threads = args.threads if args.threads else None
        if args.command == "spectrum":
            return cmd_spectrum(cfg, out, threads)
        if args.command == "anharmonicity":
            return cmd_anharmonicity(cfg, out, threads)
        if args.command == "bands":
            return cmd_bands(cfg, out, threads)
        if args.command == "cavity":
            return cmd_cavity(cfg, out, threads)
        if args.command == "twotone":
            return cmd_twotone(cfg, out, threads)
        if args.command == "fit":
            return cmd_fit(cfg, out, threads, args.data)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError) as exc:
        _report_error(args, exc, EXIT_USAGE)
        return EXIT_USAGE
    except Exception as exc:  # computation failure
        _report_error(args, exc, EXIT_COMPUTE)
        return EXIT_COMPUTE


def _report_error(args, exc: Exception, code: int) -> None:
    if getattr(args, "json_errors", False):
        sys.stderr.write(json.dumps({"error": str(exc), "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"kinemon-lab: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
