"""Command-line front end.

Loads a config document (file and/or preset), applies flag overrides, runs
the requested command and writes a manifest plus data files (CSV / NDJSON /
SVG) into the output directory.

Exit codes: 0 success, 2 configuration error, 3 numerical-health abort,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, bases, entangle, svgplot
from .config import ConfigError, RunConfig, parse_config_dict, parse_document, render_config, schema_help
from .dynamics import (
    DegenerateSteadyStateError,
    SdeModel,
    StateHealthError,
    ensemble_mean_record,
    integrate_master,
    integrate_sle_ensemble,
    steady_state,
)
from .output import (
    matrix_json,
    write_manifest,
    write_sweep_csv,
    write_trajectory_ndjson,
)
from .qcore import PSDViolationError, QuantumState, TWO_QUBITS
from .twospin import (
    TemperatureDomainError,
    build_hamiltonian,
    classify_attractor,
    effective_temperature,
    rabi_frequency,
    run_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _initial_density(config: RunConfig, h: np.ndarray) -> np.ndarray:
    kind = config.master_initial
    if kind == "steady-linear":
        return steady_state(h, config.damping)
    if kind == "maximally-mixed":
        return np.eye(4, dtype=complex) / 4.0
    if kind == "ground":
        rho = np.zeros((4, 4), dtype=complex)
        rho[3, 3] = 1.0
        return rho
    raise ConfigError(f"unknown master.initial {kind!r}")


def _initial_psi(config: RunConfig, h: np.ndarray) -> np.ndarray:
    kind = config.sde_initial
    if kind == "ground":
        psi = np.zeros(4, dtype=complex)
        psi[3] = 1.0
        return psi
    if kind == "steady-dominant":
        rho = steady_state(h, config.damping)
        w, v = np.linalg.eigh(rho)
        psi = v[:, -1]
        # fix the global phase so runs are reproducible across platforms
        k = int(np.argmax(np.abs(psi)))
        psi = psi * np.exp(-1j * np.angle(psi[k]))
        return psi
    raise ConfigError(f"unknown sde.initial {kind!r}")


def _parse_state_psi(raw: str) -> np.ndarray:
    if not raw:
        raise ConfigError("state.psi is required for the measures command on a pure state")
    try:
        amps = [complex(tok.strip().replace(" ", "")) for tok in raw.split(",")]
    except ValueError:
        raise ConfigError(f"state.psi: cannot parse {raw!r} as complex amplitudes") from None
    psi = np.asarray(amps, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ConfigError("state.psi must not be the zero vector")
    return psi / nrm


def _bloch_plots(out: Path, rec: TrajectoryRecord, prefix: str, outputs: list[str]) -> None:
    for spin, arr in (("a", rec.k_a), ("b", rec.k_b)):
        name = f"{prefix}bloch_{spin}.svg"
        svg = svgplot.line_svg(
            rec.times,
            [(f"k_{spin},x", arr[:, 0]), (f"k_{spin},y", arr[:, 1]), (f"k_{spin},z", arr[:, 2])],
            title=f"spin {spin} Bloch components",
            xlabel="t (1/omega_a)", ylabel=f"k_{spin}",
        )
        (out / name).write_text(svg, encoding="utf-8")
        outputs.append(name)
    name = f"{prefix}measures.svg"
    svg = svgplot.line_svg(
        rec.times,
        [("tau_ab", rec.tau_ab), ("K", rec.k_entropy), ("L", rec.l_entropy),
         ("purity", rec.purity)],
        title="entanglement measures", xlabel="t (1/omega_a)", ylabel="value",
    )
    (out / name).write_text(svg, encoding="utf-8")
    outputs.append(name)


def _run_master(config: RunConfig, out: Path, outputs: list[str]) -> dict:
    h = build_hamiltonian(config.model)
    rho0 = _initial_density(config, h)
    initial = QuantumState(factor=TWO_QUBITS, rho=rho0)
    rec = integrate_master(initial, h, config.disentangle, config.damping,
                           config.integrator)
    write_trajectory_ndjson(out / "trajectory.ndjson", rec)
    outputs.append("trajectory.ndjson")
    if config.plots:
        _bloch_plots(out, rec, "", outputs)
    try:
        verdict = classify_attractor(rec, config.transient_fraction,
                                     config.amp_threshold)
        attractor = {
            "kind": verdict.kind.value,
            "amplitude": verdict.amplitude,
            "period_estimate": verdict.period_estimate,
        }
    except ValueError as exc:
        attractor = {"kind": "not-classified", "reason": str(exc)}
    return {
        "attractor": attractor,
        "final_k_a": [float(v) for v in rec.k_a[-1]],
        "final_k_b": [float(v) for v in rec.k_b[-1]],
    }


def _run_sde(config: RunConfig, out: Path, outputs: list[str]) -> dict:
    h = build_hamiltonian(config.model)
    psi0 = _initial_psi(config, h)
    model = SdeModel.two_spin(h, config.damping, config.disentangle)
    mean_rho, records = integrate_sle_ensemble(psi0, model, config.integrator,
                                               config.n_traj)
    mean_rec = ensemble_mean_record(records)
    ka, kb = mean_rec.k_a, mean_rec.k_b
    write_trajectory_ndjson(out / "trajectory_mean.ndjson", mean_rec)
    outputs.append("trajectory_mean.ndjson")
    for k in range(min(config.emit_trajectories, len(records))):
        name = f"trajectory_{k:03d}.ndjson"
        write_trajectory_ndjson(out / name, records[k])
        outputs.append(name)
    if config.plots:
        _bloch_plots(out, mean_rec, "mean_", outputs)
        if records and config.emit_trajectories > 0:
            _bloch_plots(out, records[0], "traj000_", outputs)
    return {
        "n_traj": config.n_traj,
        "mean_rho_final": matrix_json(mean_rho),
        "final_mean_k_a": [float(v) for v in ka[-1]],
        "final_mean_k_b": [float(v) for v in kb[-1]],
    }


def _run_sweep_cmd(config: RunConfig, out: Path, outputs: list[str]) -> dict:
    result = run_sweep(config.model, config.damping, config.sweep)
    write_sweep_csv(out / "sweep.csv", result)
    outputs.append("sweep.csv")
    if config.plots:
        x = result.grid.delta_values
        y = result.grid.omega1_values
        quantities = {f"b_{a}{b}": result.bloch[:, :, a, b]
                      for a in range(4) for b in range(4)}
        quantities["tau_ab"] = result.tau_ab
        quantities["t_eff"] = result.t_eff
        for name, vals in quantities.items():
            svg = svgplot.heatmap_svg(
                vals, x, y, title=name, xlabel="delta/omega_a",
                ylabel="omega1/omega_a", overlay_circle=config.model.omega_a,
            )
            (out / f"{name}.svg").write_text(svg, encoding="utf-8")
            outputs.append(f"{name}.svg")
    i, j = result.argmax_tau()
    dv = float(result.grid.delta_values[i])
    w1 = float(result.grid.omega1_values[j])
    return {
        "tau_argmax": {
            "delta": dv, "omega1": w1,
            "omega_r": float(np.hypot(dv, w1)),
            "tau_ab": float(result.tau_ab[i, j]),
        },
        "base_temperature": result.base_temperature,
        "cells_failed": int((result.status != "").sum()),
    }


def _run_steady(config: RunConfig, out: Path, outputs: list[str]) -> dict:
    h = build_hamiltonian(config.model)
    rho = steady_state(h, config.damping)
    state = QuantumState(factor=TWO_QUBITS, rho=rho)
    b = bases.bloch_matrix(state)
    k_a, k_b = bases.single_spin_bloch_vectors(b)
    rep = entangle.measure_report(state, config.integrator.log_floor)
    try:
        teff = effective_temperature(float(k_a[2]), config.model.omega_a)
    except TemperatureDomainError:
        teff = float("nan")
    payload = {
        "rho": matrix_json(rho),
        "bloch_matrix": [[float(v) for v in row] for row in b.values],
        "k_a": [float(v) for v in k_a],
        "k_b": [float(v) for v in k_b],
        "measures": rep.__dict__,
        "t_eff": teff,
        "rabi_frequency": rabi_frequency(config.model),
    }
    import json
    (out / "steady.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                                     encoding="utf-8")
    outputs.append("steady.json")
    return {"t_eff": teff, "tau_ab": rep.tau_ab}


def _run_measures(config: RunConfig, out: Path, outputs: list[str]) -> dict:
    import json
    if config.state_psi:
        psi = _parse_state_psi(config.state_psi)
        state = QuantumState.pure(psi, TWO_QUBITS)
        extra = {"weyl_t2": entangle.weyl_t2_expectation(state),
                 "delta_pure": entangle.delta_measure(psi)}
    else:
        h = build_hamiltonian(config.model)
        state = QuantumState(factor=TWO_QUBITS, rho=steady_state(h, config.damping))
        extra = {}
    rep = entangle.measure_report(state, config.integrator.log_floor)
    payload = {"measures": rep.__dict__, **extra}
    (out / "measures.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                                       encoding="utf-8")
    outputs.append("measures.json")
    return payload["measures"]


def execute(config: RunConfig) -> dict:
    """Run a validated config; returns the manifest contents."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    if config.command == "master":
        results = _run_master(config, out, outputs)
    elif config.command == "sde":
        results = _run_sde(config, out, outputs)
    elif config.command == "sweep":
        results = _run_sweep_cmd(config, out, outputs)
    elif config.command == "steady":
        results = _run_steady(config, out, outputs)
    elif config.command == "measures":
        results = _run_measures(config, out, outputs)
    elif config.command == "preset":
        (out / "config.txt").write_text(render_config(config), encoding="utf-8")
        outputs.append("config.txt")
        results = {}
    else:
        raise ConfigError(f"unknown command {config.command!r}")
    manifest = {
        "tool": "disentsim",
        "version": __version__,
        "command": config.command,
        "config": {k: v for k, v in config.flat().items()},
        "outputs": sorted(outputs),
        "results": results,
    }
    write_manifest(out / "manifest.json", manifest)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disentsim",
        description="Nonlinear open-quantum-system simulator for driven two-spin "
                    "dynamics with disentanglement drives.",
        epilog="configuration keys:\n" + schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", type=Path, help="config document path")
    parser.add_argument("--preset", help="named experiment preset")
    parser.add_argument("--seed", type=int, help="override integrator.seed")
    parser.add_argument("--out", help="override output.dir")
    parser.add_argument("--threads", type=int, default=1,
                        help="reserved; results never depend on it")
    parser.add_argument("--dt", type=float, help="override integrator.dt")
    parser.add_argument("--t-end", type=float, help="override integrator.t_end")
    parser.add_argument("--no-plots", action="store_true", help="skip SVG output")
    parser.add_argument("--version", action="version", version=__version__)
    return parser


def _load_entries(args) -> dict:
    entries: dict = {}
    if args.preset:
        entries["preset"] = args.preset
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        file_entries = parse_document(text)
        if "preset" in file_entries and args.preset:
            raise ConfigError("preset given both on the command line and in the config file")
        entries.update(file_entries)
    if not entries:
        raise ConfigError("nothing to run: pass --config PATH and/or --preset NAME")
    if args.seed is not None:
        entries["integrator.seed"] = args.seed
    if args.dt is not None:
        entries["integrator.dt"] = args.dt
    if args.t_end is not None:
        entries["integrator.t_end"] = args.t_end
    if args.out is not None:
        entries["output.dir"] = args.out
    if args.no_plots:
        entries["output.plots"] = False
    return entries


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        entries = _load_entries(args)
        config = parse_config_dict(entries)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        manifest = execute(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StateHealthError, DegenerateSteadyStateError, PSDViolationError,
            TemperatureDomainError) as exc:
        print(f"numerical-health abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if config.command == "preset":
        sys.stdout.write(render_config(config))
    else:
        print(f"wrote {len(manifest['outputs'])} file(s) to {config.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
