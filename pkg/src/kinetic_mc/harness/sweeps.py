"""Convergence sweeps in the particle number and in the time step."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from ..core import SchemeParams
from ..metrics import rate_exponent, w1_auto
from ..models import ICKind, InitialCondition, ModelSpec
from ..oracles import observed_quantity, oracle_for
from ..solvers import run
from ..streams import child_seed, derive_stream

logger = logging.getLogger(__name__)

ZERO_ERROR_FLOOR = 1e-14
MIN_REFERENCE_FACTOR = 16

# seed-derivation roles
_ROLE_CELL = 1
_ROLE_REFERENCE = 2
_ROLE_SLICES = 3
_ROLE_MC = 4


class SweepError(ValueError):
    pass


class ZeroErrorSweep(SweepError):
    """All errors vanish; there is no rate to fit."""


class Axis(str, enum.Enum):
    PARTICLE_COUNT = "ParticleCount"
    TIME_STEP = "TimeStep"


@dataclass(frozen=True)
class Reference:
    kind: str  # "LargeNRun" or "MomentOracle"
    factor: int = 32
    quantity: str = "mean"


@dataclass(frozen=True)
class SweepPlan:
    axis: Axis
    values: tuple
    replications: int
    reference: Reference
    params: SchemeParams
    model: ModelSpec
    ic: InitialCondition
    master_seed: int = 0
    n_slices: int = 200
    equilibrium: dict | None = None
    mc_particles: int = 0

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "values", tuple(self.values))
        self.check()

    def check(self):
        vals = self.values
        if len(vals) < 3:
            raise SweepError(f"a sweep needs at least 3 axis values to fit a rate, got {len(vals)}")
        if any(v <= 0 for v in vals):
            raise SweepError("axis values must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise SweepError(f"axis values must be strictly ascending, got {list(vals)}")
        if self.replications < 2 and not (
            self.axis is Axis.TIME_STEP and self.reference.kind == "MomentOracle"
        ):
            raise SweepError("need at least 2 replications")
        if self.axis is Axis.PARTICLE_COUNT:
            if self.reference.kind != "LargeNRun":
                raise SweepError("particle-count sweeps compare against a LargeNRun reference")
            if self.reference.factor < MIN_REFERENCE_FACTOR:
                raise SweepError(f"reference factor must be >= {MIN_REFERENCE_FACTOR}")
            if any(int(v) != v for v in vals):
                raise SweepError("particle counts must be integers")
        else:
            if self.reference.kind != "MomentOracle":
                raise SweepError("time-step sweeps compare against a MomentOracle reference")
            oracle_for(self.model.id, self.reference.quantity)
            if any(v > 1 for v in vals):
                raise SweepError("time steps must lie in (0, 1]")

    @property
    def reference_size(self) -> int:
        return int(self.reference.factor * max(self.values))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple  # (log x, log y, stderr of y)

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "points": [list(p) for p in self.points],
        }


def fit_rate(xs, ys, stderrs=None) -> RateFit:
    """Least-squares line through ``(log x, log y)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise SweepError("x and y must be 1-d arrays of equal length")
    if x.size < 3:
        raise SweepError(f"need at least 3 points to fit a rate, got {x.size}")
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)):
        raise SweepError("non-finite values")
    if np.any(x <= 0):
        raise SweepError("x values must be positive")
    if np.any(y < 0):
        raise SweepError("y values must be positive")
    if np.any(y < ZERO_ERROR_FLOOR):
        raise ZeroErrorSweep(f"zero-error sweep: an error below {ZERO_ERROR_FLOOR:g} leaves no rate to fit")
    if np.ptp(x) == 0:
        raise SweepError("x values are all equal")
    lx, ly = np.log(x), np.log(y)
    res = stats.linregress(lx, ly)
    r2 = float(min(1.0, max(0.0, res.rvalue**2)))
    se = np.zeros_like(y) if stderrs is None else np.asarray(stderrs, dtype=float)
    points = tuple((float(a), float(b), float(s)) for a, b, s in zip(lx, ly, se))
    return RateFit(float(res.slope), float(res.intercept), r2, points)


def replication_stats(values) -> tuple[float, float]:
    """Mean and standard error (sample std / sqrt(R)), two-pass."""
    v = np.asarray(values, dtype=float)
    r = v.size
    mean = float(np.sum(v) / r)
    if r < 2:
        return mean, 0.0
    var = float(np.sum((v - mean) ** 2) / (r - 1))
    return mean, math.sqrt(var) / math.sqrt(r)


@dataclass
class SweepRow:
    axis_value: float
    n_steps: int
    mean_error: float
    stderr: float
    estimator_tag: str
    replications: int
    seed: int
    per_replication: list = field(default_factory=list)

    def csv_fields(self) -> list:
        value = int(self.axis_value) if float(self.axis_value).is_integer() else self.axis_value
        return [value, self.n_steps, self.mean_error, self.stderr, self.estimator_tag, self.replications, self.seed]


CSV_COLUMNS = ["axis_value", "n_steps", "mean_error", "stderr", "estimator_tag", "replications", "seed"]


@dataclass
class SweepResult:
    plan: SweepPlan
    rows: list[SweepRow]
    fit: RateFit | None
    diagnostic: str | None = None
    max_rows: list[SweepRow] = field(default_factory=list)
    max_fit: RateFit | None = None
    mc_rows: list[SweepRow] = field(default_factory=list)
    theoretical_slope: float | None = None

    def __iter__(self):
        # unpacks as (table, fit)
        return iter((self.rows, self.fit))


def _fit_rows(rows):
    try:
        return fit_rate([r.axis_value for r in rows], [r.mean_error for r in rows], [r.stderr for r in rows]), None
    except ZeroErrorSweep as exc:
        return None, str(exc)


def cell_seed(master_seed: int, axis_value, replication: int) -> int:
    return child_seed(master_seed, _ROLE_CELL, _axis_key(axis_value), replication)


def reference_seed(master_seed: int, replication: int) -> int:
    return child_seed(master_seed, _ROLE_REFERENCE, replication)


def _axis_key(value) -> int:
    # exact bit pattern of the axis value, so 0.05 and 0.050000001 differ
    return int(np.float64(value).view(np.uint64))


def _n_replication(plan: SweepPlan, r: int):
    """One replication: a reference run and one run per particle count."""
    p = plan.params
    record = p.record_every
    ref_params = replace(p, n_particles=plan.reference_size, seed=reference_seed(plan.master_seed, r))
    ref = run(ref_params, plan.model, plan.ic, equilibrium=plan.equilibrium, keep_ensembles=True)
    ref_states = {s.step_index: s.ensemble.states for s in ref.snapshots}
    out = []
    for n in plan.values:
        seed = cell_seed(plan.master_seed, n, r)
        params = replace(p, n_particles=int(n), seed=seed, record_every=record)
        traj = run(params, plan.model, plan.ic, equilibrium=plan.equilibrium, keep_ensembles=True)
        slices = child_seed(plan.master_seed, _ROLE_SLICES, _axis_key(n), r)
        errors = []
        tag = None
        for snap in traj.snapshots[1:] or traj.snapshots:
            w = w1_auto(snap.ensemble.states, ref_states[snap.step_index], derive_stream(slices, 0, snap.step_index), plan.n_slices)
            errors.append(w.value)
            tag = w.estimator
        out.append((errors[-1], max(errors), tag, traj.steps_taken))
    return out


def converge_in_n(plan: SweepPlan, workers: int = 1) -> SweepResult:
    """Mean W1 error against a large-N reference for each N, and its rate in N.

    Replications run as independent jobs; their results are gathered in
    replication order, so the output does not depend on ``workers``.
    """
    if plan.axis is not Axis.PARTICLE_COUNT:
        raise SweepError("converge_in_n needs a ParticleCount sweep")
    reps = range(plan.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _n_replication(plan, r), reps))
    else:
        results = [_n_replication(plan, r) for r in reps]
    rows, max_rows = [], []
    for k, n in enumerate(plan.values):
        terminal = [res[k][0] for res in results]
        worst = [res[k][1] for res in results]
        tag, steps = results[0][k][2], results[0][k][3]
        for table, values in ((rows, terminal), (max_rows, worst)):
            mean, se = replication_stats(values)
            table.append(SweepRow(n, steps, mean, se, tag, plan.replications, plan.master_seed, values))
    fit, diagnostic = _fit_rows(rows)
    max_fit, _ = _fit_rows(max_rows)
    if diagnostic:
        logger.warning(diagnostic)
    return SweepResult(plan, rows, fit, diagnostic, max_rows, max_fit, theoretical_slope=rate_exponent(plan.model.d))


def initial_moment(ic: InitialCondition, quantity: str) -> float:
    """Exact mean (first component) or second raw moment of the initial law."""
    kind = ic.kind
    if kind in (ICKind.TWO_POINT, ICKind.CUSTOM):
        atoms = np.array(ic.atoms)
        w = np.array(ic.weights) if kind is ICKind.TWO_POINT else np.full(len(atoms), 1.0 / len(atoms))
        if quantity == "energy":
            return float(w @ np.sum(atoms**2, axis=1))
        return float(w @ atoms[:, 0])
    c = np.array(ic.center)
    if quantity in ("mean", "momentum"):
        return float(c[0])
    if kind is ICKind.POINT_MASS:
        spread = 0.0
    elif kind is ICKind.UNIFORM_BOX:
        spread = float(np.sum(np.array(ic.half_widths) ** 2) / 3.0)
    else:
        spread = float(np.sum(ic.variance))
    return float(c @ c) + spread


def converge_in_dt(plan: SweepPlan, workers: int = 1) -> SweepResult:
    """Forward-Euler error of a closed moment functional for each dt.

    The error is ``|discrete(n, dt) - continuous(n dt)|`` with ``n = round(T/dt)``.
    With ``plan.mc_particles > 0`` the particle scheme is also run for every
    dt and its empirical moment compared to the continuous value
    (``mc_rows``; noisy, not used for the fit).
    """
    if plan.axis is not Axis.TIME_STEP:
        raise SweepError("converge_in_dt needs a TimeStep sweep")
    oracle = oracle_for(plan.model.id, plan.reference.quantity)
    m0 = initial_moment(plan.ic, plan.reference.quantity)
    horizon = plan.params.horizon
    tag = f"MomentOracle({plan.reference.quantity})"
    rows = []
    for dt in plan.values:
        n = int(round(horizon / dt))
        err = abs(oracle.discrete_value(n, dt, m0) - oracle.continuous_value(n * dt, m0))
        rows.append(SweepRow(dt, n, err, 0.0, tag, 1, plan.master_seed, [err]))
    fit, diagnostic = _fit_rows(rows)
    if diagnostic:
        logger.warning(diagnostic)
    mc_rows = _dt_monte_carlo(plan, oracle, m0, workers) if plan.mc_particles else []
    return SweepResult(plan, rows, fit, diagnostic, mc_rows=mc_rows, theoretical_slope=1.0)


def _dt_monte_carlo(plan, oracle, m0, workers):
    horizon = plan.params.horizon
    cells = [(dt, r) for dt in plan.values for r in range(plan.replications)]

    def job(cell):
        dt, r = cell
        params = replace(
            plan.params,
            dt=dt,
            n_particles=plan.mc_particles,
            seed=child_seed(plan.master_seed, _ROLE_MC, _axis_key(dt), r),
        )
        traj = run(params, plan.model, plan.ic, equilibrium=plan.equilibrium)
        value = observed_quantity(traj.final.states, plan.reference.quantity)
        return abs(value - oracle.continuous_value(traj.final.time, m0)), traj.steps_taken

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, cells))
    else:
        results = [job(c) for c in cells]
    rows = []
    for k, dt in enumerate(plan.values):
        chunk = results[k * plan.replications : (k + 1) * plan.replications]
        errors = [e for e, _ in chunk]
        mean, se = replication_stats(errors)
        rows.append(SweepRow(dt, chunk[0][1], mean, se, "MonteCarlo", plan.replications, plan.master_seed, errors))
    return rows

