"""Shared domain types: particle ensembles and scheme parameters."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ModelId(str, enum.Enum):
    KAC = "Kac"
    WEALTH = "Wealth"
    OPINION = "Opinion"
    MORGENSTERN = "Morgenstern"
    KINETIC_OPT = "KineticOpt"


class Scheme(str, enum.Enum):
    NANBU = "Nanbu"
    TRMC = "TRMC"


def as_states(states) -> np.ndarray:
    """Coerce to a float array of shape (N, d); 1-d input is treated as d = 1."""
    arr = np.asarray(states, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"states must have shape (N, d), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Particle states ``V_n = (V_n^1, ..., V_n^N)`` after ``step_index`` steps.

    ``particle_ids`` are the 1-based stream keys of the rows (identity by
    default).  Partners are addressed by key, so permuting rows together with
    their keys permutes the dynamics and nothing else.
    """

    states: np.ndarray
    step_index: int
    dt: float
    model_id: ModelId
    particle_ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        states = as_states(self.states)
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        if states.shape[0] < 1:
            raise ValueError("an ensemble needs at least one particle")
        if self.step_index < 0:
            raise ValueError("step_index must be nonnegative")
        ids = self.particle_ids
        if ids is None:
            ids = np.arange(1, states.shape[0] + 1, dtype=np.int64)
        else:
            ids = np.asarray(ids, dtype=np.int64)
            if ids.shape != (states.shape[0],) or not np.array_equal(
                np.sort(ids), np.arange(1, states.shape[0] + 1)
            ):
                raise ValueError("particle_ids must be a permutation of 1..N")
        ids.setflags(write=False)
        object.__setattr__(self, "particle_ids", ids)
        object.__setattr__(self, "model_id", ModelId(self.model_id))

    @property
    def n_particles(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def time(self) -> float:
        # recomputed from the integer step, never accumulated
        return self.step_index * self.dt

    def advanced(self, states: np.ndarray) -> Ensemble:
        return Ensemble(states, self.step_index + 1, self.dt, self.model_id, self.particle_ids)

    def permuted(self, perm) -> Ensemble:
        perm = np.asarray(perm)
        return Ensemble(
            self.states[perm], self.step_index, self.dt, self.model_id, self.particle_ids[perm]
        )


@dataclass(frozen=True)
class SchemeParams:
    scheme: Scheme = Scheme.NANBU
    dt: float = 0.1
    horizon: float = 1.0
    n_particles: int = 1000
    epsilon: float | None = None
    seed: int = 0
    record_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not 0.0 < self.dt <= 1.0:
            raise ValueError(f"dt must lie in (0, 1], got {self.dt}")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.n_particles < 1:
            raise ValueError("n_particles must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.record_every < 0:
            raise ValueError("record_every must be nonnegative")
        if self.scheme is Scheme.TRMC and (self.epsilon is None or self.epsilon <= 0):
            raise ValueError("TRMC requires epsilon > 0")

    @property
    def n_steps(self) -> int:
        return n_steps_for(self.horizon, self.dt)


def n_steps_for(horizon: float, dt: float) -> int:
    """Number of iterations of ``while n*dt < T``.

    The comparison forgives a relative rounding of 1e-9 dt so that T = 3*dt
    means exactly three steps.
    """
    bound = horizon - 1e-9 * dt
    n = max(0, math.ceil(bound / dt))
    while n * dt < bound:
        n += 1
    while n > 0 and (n - 1) * dt >= bound:
        n -= 1
    return n
