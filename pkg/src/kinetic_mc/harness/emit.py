"""CSV, JSON and SVG writers for sweeps, trajectories and validation reports."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .sweeps import CSV_COLUMNS, SweepResult

SCHEMA_VERSION = 1
FORMATS = ("csv", "json", "svg")


class EmitError(OSError):
    pass


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue().encode("utf-8")


def sweep_csv(rows) -> bytes:
    """Sweep table; floats are written with ``repr`` so they round-trip exactly."""
    return _csv_bytes(CSV_COLUMNS, [r.csv_fields() for r in rows])


def _row_dict(row) -> dict:
    return {c: v for c, v in zip(CSV_COLUMNS, row.csv_fields())} | {"per_replication": list(row.per_replication)}


def plan_echo(plan) -> dict:
    p = plan.params
    return {
        "axis": plan.axis.value,
        "values": list(plan.values),
        "replications": plan.replications,
        "reference": {"kind": plan.reference.kind, "factor": plan.reference.factor, "quantity": plan.reference.quantity},
        "master_seed": plan.master_seed,
        "n_slices": plan.n_slices,
        "mc_particles": plan.mc_particles,
        "scheme": {"name": p.scheme.value, "dt": p.dt, "horizon": p.horizon, "epsilon": p.epsilon, "record_every": p.record_every},
        "model": _model_echo(plan.model),
        "initial_condition": _ic_echo(plan.ic),
        "equilibrium": plan.equilibrium,
    }


def _model_echo(model) -> dict:
    out = {"id": model.id.value, "d": model.d}
    for name in ("gamma", "noise", "lam", "sigma", "beta_weight", "objective", "shift", "theta_point"):
        value = getattr(model, name)
        if value is not None:
            out[name] = list(value) if isinstance(value, tuple) else value
    if model.bounded:
        out["box"] = model.box
    return out


def _ic_echo(ic) -> dict:
    out = {"kind": ic.kind.value}
    for name in ("center", "half_widths", "variance", "weights"):
        if getattr(ic, name):
            out[name] = list(getattr(ic, name))
    if ic.atoms:
        out["atoms"] = [list(a) for a in ic.atoms]
    return out


def sweep_document(result: SweepResult, config: dict | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "plan": plan_echo(result.plan),
        "config": config,
        "results": [_row_dict(r) for r in result.rows],
        "rate_fit": None if result.fit is None else result.fit.as_dict(),
        "diagnostic": result.diagnostic,
        "theoretical_slope": result.theoretical_slope,
        "max_over_snapshots": {
            "results": [_row_dict(r) for r in result.max_rows],
            "rate_fit": None if result.max_fit is None else result.max_fit.as_dict(),
        },
        "monte_carlo": [_row_dict(r) for r in result.mc_rows],
    }


def json_bytes(document: dict) -> bytes:
    return (json.dumps(document, indent=2, sort_keys=False, allow_nan=False) + "\n").encode("utf-8")


def sweep_svg(result: SweepResult) -> bytes:
    """Log-log scatter of the errors with the fitted line and the theoretical slope."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = result.rows
    x = np.array([r.axis_value for r in rows], dtype=float)
    y = np.array([r.mean_error for r in rows], dtype=float)
    se = np.array([r.stderr for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    positive = y > 0
    if positive.any():
        ax.errorbar(x[positive], y[positive], yerr=se[positive], fmt="o", color="k", capsize=3, label="mean error")
        ax.set_xscale("log")
        ax.set_yscale("log")
    xs = np.geomspace(x.min(), x.max(), 50)
    if result.fit is not None:
        f = result.fit
        ax.plot(xs, np.exp(f.intercept) * xs**f.slope, "-", color="tab:blue", label=f"fit: slope {f.slope:.3f}, R² {f.r_squared:.3f}")
    if result.theoretical_slope is not None and positive.any():
        # anchor the guide line at the geometric centre of the data
        x0 = math.exp(np.mean(np.log(x[positive])))
        y0 = math.exp(np.mean(np.log(y[positive])))
        s = result.theoretical_slope
        ax.plot(xs, y0 * (xs / x0) ** s, "--", color="tab:red", label=f"reference slope {s:g}")
    ax.set_xlabel("N" if result.plan.axis.value == "ParticleCount" else "Δt")
    ax.set_ylabel("error")
    if result.diagnostic:
        ax.set_title(result.diagnostic, fontsize=8)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def trajectory_csv(traj) -> bytes:
    orders = list(traj.snapshots[0].report.moments)
    drift_keys = sorted(traj.snapshots[-1].report.conserved_drift)
    d = traj.model.d
    header = ["step_index", "time"] + [f"moment_{q:g}" for q in orders] + [f"mean_{k}" for k in range(d)] + ["energy"] + [f"drift_{k}" for k in drift_keys]
    rows = []
    for snap in traj.snapshots:
        rep = snap.report
        rows.append(
            [rep.step_index, rep.step_index * traj.params.dt]
            + [rep.moments[q] for q in orders]
            + list(rep.mean_vector)
            + [rep.energy]
            + [rep.conserved_drift.get(k, 0.0) for k in drift_keys]
        )
    return _csv_bytes(header, rows)


def trajectory_document(traj, config: dict | None = None) -> dict:
    p = traj.params
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "trajectory",
        "config": config,
        "params": {"scheme": p.scheme.value, "dt": p.dt, "horizon": p.horizon, "n_particles": p.n_particles, "epsilon": p.epsilon, "seed": p.seed, "record_every": p.record_every},
        "model": _model_echo(traj.model),
        "steps_taken": traj.steps_taken,
        "clamp_events": traj.diagnostics.clamp_events,
        "equilibrium": None if traj.equilibrium is None else {"kind": traj.equilibrium.kind.value, "mean": list(traj.equilibrium.mean), "variance": list(traj.equilibrium.variance)},
        "results": [s.report.as_dict() for s in traj.snapshots],
    }


def validation_csv(report) -> bytes:
    return _csv_bytes(["suite", "model", "passed", "margin", "detail"], [[e.suite, e.model, e.passed, e.margin, e.detail] for e in report.entries])


def validation_document(report) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "validation",
        "depth": report.depth,
        "passed": report.passed,
        "results": [e.as_dict() for e in report.entries],
    }


def emit(obj, fmt: str, config: dict | None = None) -> bytes:
    """Serialize a sweep result, trajectory or validation report."""
    from ..solvers import Trajectory
    from .validation import ValidationReport

    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    if isinstance(obj, SweepResult):
        return {"csv": lambda: sweep_csv(obj.rows), "json": lambda: json_bytes(sweep_document(obj, config)), "svg": lambda: sweep_svg(obj)}[fmt]()
    if isinstance(obj, Trajectory):
        if fmt == "svg":
            raise ValueError("SVG output is only available for sweeps")
        return trajectory_csv(obj) if fmt == "csv" else json_bytes(trajectory_document(obj, config))
    if isinstance(obj, ValidationReport):
        if fmt == "svg":
            raise ValueError("SVG output is only available for sweeps")
        return validation_csv(obj) if fmt == "csv" else json_bytes(validation_document(obj))
    if isinstance(obj, list):
        if fmt != "csv":
            raise ValueError("bare tables can only be written as CSV")
        return sweep_csv(obj)
    raise TypeError(f"cannot emit {type(obj).__name__}")


def write(path: str | Path, data: bytes) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc
    return path
