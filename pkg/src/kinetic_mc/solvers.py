"""Nanbu and first-order time-relaxed Monte Carlo steppers.

Draw layout per particle and step (slot = draw counter of the particle's
stream ``(seed, particle_id, step_index)``)::

    Nanbu: 0 collide bit | 1 partner | 2.. theta
    TRMC:  0 first bit   | 1 second bit | 2 partner | 3.. theta | then equilibrium

Slots are fixed whatever the branch outcome, and the draws a particle does not
need are simply never evaluated.  Since every draw is a pure function of its
address the result is independent of the order or the chunking in which
particles are processed.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Ensemble, Scheme, SchemeParams
from .metrics import MetricReport, metric_report
from .models import (
    CollisionDiagnostics,
    EquilibriumSpec,
    EquilibriumUnavailable,
    InitialCondition,
    ModelSpec,
    _collide_raw,
    contains,
    equilibrium_for,
    equilibrium_from_uniforms,
    sample_initial,
    theta_from_uniforms,
)
from .streams import derive_stream, partner_from_uniform, uniform_slots

logger = logging.getLogger(__name__)

SLOT_NANBU_COLLIDE = 0
SLOT_NANBU_PARTNER = 1
SLOT_NANBU_THETA = 2
SLOT_TRMC_FIRST = 0
SLOT_TRMC_SECOND = 1
SLOT_TRMC_PARTNER = 2
SLOT_TRMC_THETA = 3


class SolverError(RuntimeError):
    """A step failed; ``step_index`` is the step being computed."""

    def __init__(self, message: str, step_index: int):
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index


def relaxation_tau(dt: float, epsilon: float) -> float:
    """Relaxation weight ``1 - exp(-dt/epsilon)``."""
    if not dt > 0 or not epsilon > 0:
        raise ValueError(f"dt and epsilon must be positive, got dt={dt}, epsilon={epsilon}")
    return -math.expm1(-dt / epsilon)


@dataclass
class StepEvents:
    """Branch bookkeeping of one step, row-aligned with the ensemble."""

    collided: np.ndarray
    equilibrated: np.ndarray
    partners: np.ndarray  # 1-based partner key, 0 where no collision


def _slots(seed, ids, step, slots):
    return uniform_slots(seed, ids, step, np.asarray(slots, dtype=np.uint64))


def _collisions(model, ens, rows, seed, partner_slot, theta_slot, diagnostics):
    """Post-collision states for the particles at ``rows``."""
    ids = ens.particle_ids
    n = ens.n_particles
    x = ens.states
    _, partner_key = partner_from_uniform(_slots(seed, ids[rows], ens.step_index, [partner_slot])[:, 0], n)
    # rows are addressed by stream key, so locate the partner's row
    row_of_key = np.empty(n, dtype=np.int64)
    row_of_key[ids - 1] = np.arange(n)
    partner_rows = row_of_key[partner_key - 1]
    u = _slots(seed, ids[rows], ens.step_index, range(theta_slot, theta_slot + model.theta_draws))
    theta = theta_from_uniforms(model, u)
    out = _collide_raw(model, x[rows], x[partner_rows], theta, diagnostics)
    diagnostics.collisions += len(rows)
    return out, partner_key


def _chunks(n: int, workers: int):
    bounds = np.linspace(0, n, max(1, workers) + 1).astype(np.int64)
    return [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _map_chunks(fn, n: int, workers: int):
    chunks = _chunks(n, workers)
    if len(chunks) == 1:
        return [fn(chunks[0])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _merge(into: CollisionDiagnostics | None, part: CollisionDiagnostics):
    if into is not None:
        into.clamp_events += part.clamp_events
        into.collisions += part.collisions


def _finish(model, ens, new_states, events, diagnostics) -> tuple[Ensemble, StepEvents]:
    inside = contains(model, new_states)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise SolverError(
            f"particle {int(ens.particle_ids[bad])} left the {model.domain} domain: {new_states[bad].tolist()}",
            ens.step_index,
        )
    return ens.advanced(new_states), events


def nanbu_step_detailed(
    ens: Ensemble,
    model: ModelSpec,
    dt: float,
    seed: int,
    diagnostics: CollisionDiagnostics | None = None,
    workers: int = 1,
) -> tuple[Ensemble, StepEvents]:
    if not 0.0 < dt <= 1.0:
        raise ValueError(f"dt must lie in (0, 1], got {dt}")
    n = ens.n_particles
    x = ens.states

    def work(rows):
        local = CollisionDiagnostics()
        u = _slots(seed, ens.particle_ids[rows], ens.step_index, [SLOT_NANBU_COLLIDE])[:, 0]
        hit = rows[u < dt]
        out, partners = _collisions(model, ens, hit, seed, SLOT_NANBU_PARTNER, SLOT_NANBU_THETA, local)
        return hit, out, partners, local

    new = x.copy()
    collided = np.zeros(n, dtype=bool)
    partners = np.zeros(n, dtype=np.int64)
    for hit, out, keys, local in _map_chunks(work, n, workers):
        new[hit] = out
        collided[hit] = True
        partners[hit] = keys
        _merge(diagnostics, local)
    events = StepEvents(collided, np.zeros(n, dtype=bool), partners)
    return _finish(model, ens, new, events, diagnostics)


def nanbu_step(
    ens: Ensemble,
    model: ModelSpec,
    dt: float,
    seed: int,
    diagnostics: CollisionDiagnostics | None = None,
    workers: int = 1,
) -> Ensemble:
    """One Nanbu step.

    Each particle collides with probability ``dt`` against a uniformly chosen
    partner (possibly itself), reading the pre-step states only; the partner
    is not updated.
    """
    return nanbu_step_detailed(ens, model, dt, seed, diagnostics, workers)[0]


def trmc_step_detailed(
    ens: Ensemble,
    model: ModelSpec,
    dt: float,
    epsilon: float,
    eq: EquilibriumSpec,
    seed: int,
    diagnostics: CollisionDiagnostics | None = None,
    workers: int = 1,
) -> tuple[Ensemble, StepEvents]:
    tau = relaxation_tau(dt, epsilon)
    if eq.d and eq.d != model.d:
        raise ValueError("equilibrium dimension does not match the model")
    equilibrium_from_uniforms(eq, np.empty((0, model.d)))  # raises when unavailable
    n = ens.n_particles
    eq_slot = SLOT_TRMC_THETA + model.theta_draws

    def work(rows):
        local = CollisionDiagnostics()
        ids = ens.particle_ids[rows]
        bits = _slots(seed, ids, ens.step_index, [SLOT_TRMC_FIRST, SLOT_TRMC_SECOND]) < tau
        first, second = bits[:, 0], bits[:, 1]
        hit = rows[first & ~second]
        relax = rows[first & second]
        out, partners = _collisions(model, ens, hit, seed, SLOT_TRMC_PARTNER, SLOT_TRMC_THETA, local)
        u = _slots(seed, ens.particle_ids[relax], ens.step_index, range(eq_slot, eq_slot + model.d))
        return hit, out, partners, relax, equilibrium_from_uniforms(eq, u), local

    new = ens.states.copy()
    collided = np.zeros(n, dtype=bool)
    equilibrated = np.zeros(n, dtype=bool)
    partners = np.zeros(n, dtype=np.int64)
    for hit, out, keys, relax, samples, local in _map_chunks(work, n, workers):
        _merge(diagnostics, local)
        new[hit] = out
        new[relax] = samples
        collided[hit] = True
        equilibrated[relax] = True
        partners[hit] = keys
    events = StepEvents(collided, equilibrated, partners)
    return _finish(model, ens, new, events, diagnostics)


def trmc_step(
    ens: Ensemble,
    model: ModelSpec,
    dt: float,
    epsilon: float,
    eq: EquilibriumSpec,
    seed: int,
    diagnostics: CollisionDiagnostics | None = None,
    workers: int = 1,
) -> Ensemble:
    """One first-order TRMC step with relaxation weight ``tau = 1 - exp(-dt/eps)``.

    With two independent Bernoulli(tau) bits per particle: keep on a first bit
    of 0 (probability ``1 - tau``), collide as in Nanbu on bits (1, 0)
    (probability ``tau (1 - tau)``) and resample from the equilibrium on (1, 1)
    (probability ``tau^2``).
    """
    return trmc_step_detailed(ens, model, dt, epsilon, eq, seed, diagnostics, workers)[0]


@dataclass
class Snapshot:
    step_index: int
    report: MetricReport
    ensemble: Ensemble | None = None


@dataclass
class Trajectory:
    snapshots: list[Snapshot]
    params: SchemeParams
    model: ModelSpec
    final: Ensemble
    equilibrium: EquilibriumSpec | None = None
    diagnostics: CollisionDiagnostics = field(default_factory=CollisionDiagnostics)

    @property
    def steps_taken(self) -> int:
        return self.final.step_index


INITIAL_STREAM_STEP = 0


def initial_ensemble(params: SchemeParams, model: ModelSpec, ic: InitialCondition) -> Ensemble:
    """Initial sample from the ensemble-level stream ``(seed, 0, 0)``."""
    stream = derive_stream(params.seed, 0, INITIAL_STREAM_STEP)
    return sample_initial(model, ic, params.n_particles, stream, dt=params.dt)


def run(
    params: SchemeParams,
    model: ModelSpec,
    ic: InitialCondition | None = None,
    *,
    initial: Ensemble | None = None,
    equilibrium: EquilibriumSpec | dict | None = None,
    keep_ensembles: bool = False,
    moment_orders=(1.0, 2.0, 3.0),
    workers: int = 1,
) -> Trajectory:
    """Iterate the chosen scheme while ``n*dt < T``.

    Metrics are recorded at step 0, every ``record_every`` steps (when
    positive) and at the final step.  ``equilibrium`` is either a ready
    :class:`EquilibriumSpec` or an override dict for :func:`equilibrium_for`;
    by default TRMC matches the equilibrium to the initial ensemble.
    """
    if initial is None:
        if ic is None:
            raise ValueError("need an initial condition or an initial ensemble")
        ens = initial_ensemble(params, model, ic)
    else:
        ens = Ensemble(initial.states, 0, params.dt, model.id, initial.particle_ids)
    eq = None
    if params.scheme is Scheme.TRMC:
        if not model.has_equilibrium and not isinstance(equilibrium, EquilibriumSpec):
            raise EquilibriumUnavailable(f"no equilibrium sampler for {model.id.value}")
        eq = equilibrium if isinstance(equilibrium, EquilibriumSpec) else equilibrium_for(model, ens, equilibrium)
    diagnostics = CollisionDiagnostics()
    initial_report = metric_report(ens.states, ens.step_index, moment_orders, model=model)
    snapshots = [Snapshot(0, initial_report, ens if keep_ensembles else None)]
    n_steps = params.n_steps
    for n in range(n_steps):
        try:
            if params.scheme is Scheme.NANBU:
                ens = nanbu_step(ens, model, params.dt, params.seed, diagnostics, workers)
            else:
                ens = trmc_step(ens, model, params.dt, params.epsilon, eq, params.seed, diagnostics, workers)
        except SolverError:
            raise
        except Exception as exc:
            raise SolverError(str(exc), n) from exc
        last = n + 1 == n_steps
        if last or (params.record_every and ens.step_index % params.record_every == 0):
            report = metric_report(ens.states, ens.step_index, moment_orders, initial=initial_report, model=model)
            snapshots.append(Snapshot(ens.step_index, report, ens if keep_ensembles else None))
    if diagnostics.clamp_events:
        logger.warning("%d opinion clamp events during the run", diagnostics.clamp_events)
    return Trajectory(snapshots, params, model, ens, eq, diagnostics)
