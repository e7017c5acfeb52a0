"""Data-file writers: CSV sweep tables, NDJSON trajectories, JSON manifests.

All output is deterministic: floats are written with 17 significant digits
in CSV (scientific notation, '.' decimal) and via repr in JSON; no
timestamps or environment-dependent content anywhere.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dynamics import TrajectoryRecord
from .twospin import SweepResult


def fmt17(x: float) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    return f"{x:.16e}"


SWEEP_COLUMNS = (
    ["delta", "omega1"]
    + [f"b_{i}{j}" for i in range(4) for j in range(4)]
    + ["tau_ab", "t_eff", "status"]
)


def sweep_rows(result: SweepResult):
    """Yield CSV rows (lists of strings) in grid order."""
    deltas = result.grid.delta_values
    omega1s = result.grid.omega1_values
    for i, dv in enumerate(deltas):
        for j, w1 in enumerate(omega1s):
            row = [fmt17(dv), fmt17(w1)]
            row += [fmt17(result.bloch[i, j, a, b]) for a in range(4) for b in range(4)]
            row += [fmt17(result.tau_ab[i, j]), fmt17(result.t_eff[i, j]),
                    str(result.status[i, j])]
            yield row


def write_sweep_csv(path: Path, result: SweepResult) -> None:
    lines = [",".join(SWEEP_COLUMNS)]
    lines += [",".join(row) for row in sweep_rows(result)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def trajectory_lines(rec: TrajectoryRecord):
    """NDJSON lines, one sample per line, stable field order."""
    for i in range(rec.n_samples):
        entry = {
            "t": float(rec.times[i]),
            "k_a": [float(v) for v in rec.k_a[i]],
            "k_b": [float(v) for v in rec.k_b[i]],
            "measures": {
                "k_entropy": float(rec.k_entropy[i]),
                "l_entropy": float(rec.l_entropy[i]),
                "delta": float(rec.delta[i]),
                "tau_ab": float(rec.tau_ab[i]),
                "purity": float(rec.purity[i]),
            },
            "diagnostics": {
                "trace_err": float(rec.trace_err[i]),
                "herm_err": float(rec.herm_err[i]),
                "min_eig": float(rec.min_eig[i]),
            },
        }
        yield json.dumps(entry)


def write_trajectory_ndjson(path: Path, rec: TrajectoryRecord) -> None:
    path.write_text("\n".join(trajectory_lines(rec)) + "\n", encoding="utf-8")


def read_trajectory_ndjson(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


def write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def complex_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def matrix_json(m: np.ndarray) -> list[list[list[float]]]:
    return [[complex_pair(complex(v)) for v in row] for row in np.asarray(m)]
