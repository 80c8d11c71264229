"""Collision models, parameter laws, initial data and equilibria.

All maps are vectorized: states are ``(N, d)`` arrays (a single state may be
passed as a scalar or a length-``d`` vector), and the collision parameter
``theta`` has shape ``(N,)`` for scalar-parameter models (Kac, Wealth,
Opinion) and ``(N, k)`` for vector-parameter models (Morgenstern,
KineticOpt).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Ensemble, ModelId, as_states
from .streams import RandomStream, normal_from_uniform, sphere_from_uniforms

TWO_PI = 2.0 * math.pi
OBJECTIVES = ("quadratic", "rastrigin")


class ModelError(ValueError):
    pass


class DomainError(ModelError):
    pass


class EquilibriumUnavailable(ModelError):
    pass


@dataclass
class CollisionDiagnostics:
    """Mutable counters filled in by :func:`collide`."""

    clamp_events: int = 0
    collisions: int = 0


@dataclass(frozen=True)
class ModelSpec:
    """A binary collision model.

    Use the constructors :func:`kac`, :func:`wealth`, :func:`opinion`,
    :func:`morgenstern` and :func:`kinetic_opt` rather than building this
    directly.  ``theta_point`` replaces the parameter law by a point mass
    (used to build degenerate test dynamics).  ``strict=False`` skips the
    admissibility checks so that deliberately broken models can be probed.
    """

    id: ModelId
    d: int
    gamma: float | None = None
    noise: float | None = None
    lam: float | None = None
    sigma: float | None = None
    beta_weight: float | None = None
    objective: str | None = None
    shift: tuple[float, ...] | None = None
    box: float = 1.0
    theta_point: tuple[float, ...] | float | None = None
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "id", ModelId(self.id))
        if self.strict:
            self._check_admissible()

    def _check_admissible(self):
        mid = self.id
        if mid is ModelId.KAC and self.d != 1:
            raise ModelError("Kac model is one-dimensional")
        if mid is ModelId.WEALTH:
            if self.d != 1:
                raise ModelError("wealth model is one-dimensional")
            if not (self.gamma is not None and 0.0 < self.gamma < 0.5):
                raise ModelError(f"wealth model needs gamma in (0, 1/2), got {self.gamma}")
        if mid is ModelId.OPINION:
            if self.d != 1:
                raise ModelError("opinion model is one-dimensional")
            g, s = self.gamma, self.noise
            if not (g is not None and 0.0 < g < 0.5):
                raise ModelError(f"opinion model needs gamma in (0, 1/2), got {g}")
            if not (s is not None and 0.0 <= s <= g):
                raise ModelError(f"opinion noise half-width must satisfy 0 <= sigma <= gamma, got {s}")
            # with D = 1 - v^2 the image stays in [-1, 1] iff sigma <= (1 - gamma)/2
            if s > 0.5 * (1.0 - g):
                raise ModelError(
                    f"opinion noise half-width must satisfy sigma <= (1 - gamma)/2, got {s}"
                )
        if mid is ModelId.MORGENSTERN and self.d != 3:
            raise ModelError("Morgenstern model is three-dimensional")
        if mid is ModelId.KINETIC_OPT:
            if self.d < 1:
                raise ModelError("dimension must be positive")
            for name in ("lam", "sigma", "beta_weight"):
                value = getattr(self, name)
                if value is None or value <= 0:
                    raise ModelError(f"kinetic optimization needs {name} > 0, got {value}")
            if self.objective not in OBJECTIVES:
                raise ModelError(f"unknown objective {self.objective!r}; choose from {OBJECTIVES}")
            if self.box <= 0:
                raise ModelError("box half-width must be positive")
            if self.shift is not None and len(self.shift) != self.d:
                raise ModelError("objective shift must have length d")

    # -- static metadata ------------------------------------------------------

    @property
    def domain(self) -> str:
        return {
            ModelId.KAC: "line",
            ModelId.WEALTH: "half-line",
            ModelId.OPINION: "box",
            ModelId.MORGENSTERN: "full space",
            ModelId.KINETIC_OPT: "box",
        }[self.id]

    @property
    def bounded(self) -> bool:
        return self.domain == "box"

    @property
    def theta_dim(self) -> int:
        """0 for scalar parameters, otherwise the parameter vector length."""
        if self.id is ModelId.MORGENSTERN:
            return 3
        if self.id is ModelId.KINETIC_OPT:
            return self.d
        return 0

    @property
    def theta_draws(self) -> int:
        """Uniforms consumed per parameter draw."""
        if self.id is ModelId.MORGENSTERN:
            return 2
        if self.id is ModelId.KINETIC_OPT:
            return self.d
        return 1

    @property
    def theta_sup_norm(self) -> float:
        """M_inf of the parameter law: sup of |theta| over its support."""
        if self.theta_point is not None:
            return float(np.linalg.norm(np.atleast_1d(self.theta_point)))
        return {
            ModelId.KAC: TWO_PI,
            ModelId.WEALTH: self.gamma or 0.0,
            ModelId.OPINION: self.noise or 0.0,
            ModelId.MORGENSTERN: 1.0,
            ModelId.KINETIC_OPT: math.sqrt(self.d),
        }[self.id]

    @property
    def oracle_flags(self) -> frozenset[str]:
        return {
            ModelId.KAC: frozenset({"mean_decay", "energy_conservation", "equilibrium"}),
            ModelId.WEALTH: frozenset({"mean_conservation"}),
            ModelId.OPINION: frozenset(),
            ModelId.MORGENSTERN: frozenset(
                {"momentum_conservation", "energy_conservation", "equilibrium"}
            ),
            ModelId.KINETIC_OPT: frozenset(),
        }[self.id]

    @property
    def has_equilibrium(self) -> bool:
        return "equilibrium" in self.oracle_flags

    @property
    def lipschitz_constant(self) -> float | None:
        """Certified L such that |C(v,v*,t) - C(w,w*,t)| <= L (1+|t|)(|v-w| + |v*-w*|).

        ``None`` for KineticOpt, whose constant depends on the objective and is
        fitted empirically instead.
        """
        if self.id is ModelId.OPINION:
            return 1.0 + self.gamma + 2.0 * self.noise
        if self.id is ModelId.MORGENSTERN:
            return 2.0
        if self.id is ModelId.KINETIC_OPT:
            return None
        return 1.0

    @property
    def growth_constant(self) -> float:
        """Certified C for the growth bound (see :attr:`growth_form`)."""
        if self.id is ModelId.KINETIC_OPT:
            # |Pi(x)| <= |x| since 0 is in the box, and |v_beta| <= |v| + |v*|
            return max(1.0 + 2.0 * self.lam, 2.0 * self.sigma)
        return 1.0

    @property
    def growth_form(self) -> str:
        """``"linear"``: |C| <= C (1+|t|)(|v| + |v*|).

        ``"affine"``: |C| <= C (1+|t|)(1 + |v| + |v*|).  The opinion model's
        diffusion term D(v,v*) eta does not vanish at v = v* = 0, so only the
        affine form can hold there.
        """
        return "affine" if self.id is ModelId.OPINION else "linear"


def kac(theta_point: float | None = None) -> ModelSpec:
    return ModelSpec(ModelId.KAC, 1, theta_point=theta_point)


def wealth(gamma: float = 0.25, theta_point: float | None = None) -> ModelSpec:
    return ModelSpec(ModelId.WEALTH, 1, gamma=gamma, theta_point=theta_point)


def opinion(gamma: float = 0.25, noise: float = 0.2, *, strict: bool = True) -> ModelSpec:
    return ModelSpec(ModelId.OPINION, 1, gamma=gamma, noise=noise, strict=strict)


def morgenstern() -> ModelSpec:
    return ModelSpec(ModelId.MORGENSTERN, 3)


def kinetic_opt(
    d: int = 2,
    lam: float = 0.5,
    sigma: float = 0.5,
    beta_weight: float = 10.0,
    objective: str = "quadratic",
    shift: Sequence[float] | None = None,
    box: float = 1.0,
) -> ModelSpec:
    return ModelSpec(
        ModelId.KINETIC_OPT,
        d,
        lam=lam,
        sigma=sigma,
        beta_weight=beta_weight,
        objective=objective,
        shift=None if shift is None else tuple(float(s) for s in shift),
        box=box,
    )


MODEL_FACTORIES = {
    ModelId.KAC: kac,
    ModelId.WEALTH: wealth,
    ModelId.OPINION: opinion,
    ModelId.MORGENSTERN: morgenstern,
    ModelId.KINETIC_OPT: kinetic_opt,
}


# -- domain -------------------------------------------------------------------


def contains(model: ModelSpec, states) -> np.ndarray:
    """Row-wise membership of ``states`` in the model domain."""
    x = as_states(states)
    finite = np.all(np.isfinite(x), axis=1)
    if model.id is ModelId.WEALTH:
        return finite & (x[:, 0] >= 0.0)
    if model.id is ModelId.OPINION:
        return finite & (np.abs(x[:, 0]) <= 1.0)
    if model.id is ModelId.KINETIC_OPT:
        return finite & np.all(np.abs(x) <= model.box, axis=1)
    return finite


def project(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the domain (componentwise clamp for boxes)."""
    if model.id is ModelId.KINETIC_OPT:
        return np.clip(x, -model.box, model.box)
    if model.id is ModelId.OPINION:
        return np.clip(x, -1.0, 1.0)
    if model.id is ModelId.WEALTH:
        return np.maximum(x, 0.0)
    return x


def _check_states(model: ModelSpec, x: np.ndarray, name: str):
    if x.shape[1] != model.d:
        raise DomainError(f"{name} has dimension {x.shape[1]}, model {model.id.value} needs {model.d}")
    inside = contains(model, x)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise DomainError(
            f"{name}[{bad}] = {x[bad].tolist()} lies outside the {model.domain} domain of {model.id.value}"
        )


def _theta_array(model: ModelSpec, theta, n: int) -> np.ndarray:
    t = np.asarray(theta, dtype=np.float64)
    k = model.theta_dim
    if k == 0:
        t = np.broadcast_to(t.reshape(-1), (n,)) if t.size in (1, n) else t
        if t.shape != (n,):
            raise ModelError(f"theta has shape {np.shape(theta)}, expected ({n},)")
    else:
        if t.ndim == 1:
            t = t.reshape(1, -1)
        t = np.broadcast_to(t, (n, k)) if t.shape[0] == 1 else t
        if t.shape != (n, k):
            raise ModelError(f"theta has shape {np.shape(theta)}, expected ({n}, {k})")
    return t


def theta_in_support(model: ModelSpec, theta: np.ndarray) -> np.ndarray:
    """Row-wise membership of ``theta`` in the support of the parameter law."""
    t = theta
    if model.theta_point is not None:
        point = np.asarray(model.theta_point, dtype=np.float64)
        diff = np.abs(t - point)
        return diff <= 1e-12 if t.ndim == 1 else np.all(diff <= 1e-12, axis=1)
    if model.id is ModelId.KAC:
        return (t >= 0.0) & (t <= TWO_PI)
    if model.id is ModelId.WEALTH:
        return np.abs(t) <= model.gamma
    if model.id is ModelId.OPINION:
        return np.abs(t) <= model.noise
    if model.id is ModelId.MORGENSTERN:
        return np.abs(np.linalg.norm(t, axis=1) - 1.0) <= 1e-9
    return np.all(np.abs(t) <= 1.0, axis=1)


# -- collision maps -----------------------------------------------------------


def objective_value(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Objective E evaluated row-wise (KineticOpt only)."""
    shift = np.zeros(model.d) if model.shift is None else np.asarray(model.shift)
    y = x - shift
    if model.objective == "quadratic":
        return np.sum(y * y, axis=-1)
    return np.sum(y * y + 10.0 * (1.0 - np.cos(TWO_PI * y)), axis=-1)


def weighted_average(model: ModelSpec, v, v_star) -> np.ndarray:
    """Gibbs-weighted average of ``v`` and ``v_star`` under exp(-beta E)."""
    single = np.ndim(v) <= 1
    x, y = as_states(np.atleast_2d(v)), as_states(np.atleast_2d(v_star))
    a = -model.beta_weight * objective_value(model, x)
    b = -model.beta_weight * objective_value(model, y)
    top = np.maximum(a, b)
    wa = np.exp(a - top)[:, None]
    wb = np.exp(b - top)[:, None]
    out = (wa * x + wb * y) / (wa + wb)
    return out[0] if single else out


def _collide_raw(model: ModelSpec, x, y, t, diagnostics: CollisionDiagnostics | None):
    mid = model.id
    if mid is ModelId.KAC:
        return x * np.cos(t)[:, None] - y * np.sin(t)[:, None]
    if mid is ModelId.WEALTH:
        g = model.gamma
        # (1-g) v + (g+eta) v*: both terms are nonnegative in floating point
        return (1.0 - g) * x + (g + t)[:, None] * y
    if mid is ModelId.OPINION:
        out = x - model.gamma * (x - y) + (1.0 - x * x) * t[:, None]
        escaped = np.abs(out) > 1.0
        if escaped.any():
            if diagnostics is not None:
                diagnostics.clamp_events += int(escaped.sum())
            out = np.clip(out, -1.0, 1.0)
        return out
    if mid is ModelId.MORGENSTERN:
        proj = np.sum(t * (y - x), axis=1, keepdims=True)
        return x + t * proj
    vb = weighted_average(model, x, y)
    step = vb - x
    return project(model, x + model.lam * step + model.sigma * step * t)


def collide(
    model: ModelSpec,
    v,
    v_star,
    theta,
    diagnostics: CollisionDiagnostics | None = None,
) -> np.ndarray:
    """Post-collision state(s) ``C(v, v_star, theta)``.

    Raises :class:`DomainError` for inputs outside the domain and
    :class:`ModelError` for parameters outside the support of the law.  Opinion
    results that leave [-1, 1] (impossible for admissible parameters) are
    clamped and counted in ``diagnostics.clamp_events``.
    """
    single = np.ndim(v) == 0 or (np.ndim(v) == 1 and model.d > 1)
    x = as_states(np.atleast_1d(v) if model.d == 1 else np.atleast_2d(v))
    y = as_states(np.atleast_1d(v_star) if model.d == 1 else np.atleast_2d(v_star))
    if y.shape[0] == 1 and x.shape[0] > 1:
        y = np.broadcast_to(y, x.shape)
    if x.shape != y.shape:
        raise ModelError(f"v and v_star shapes differ: {x.shape} vs {y.shape}")
    _check_states(model, x, "v")
    _check_states(model, y, "v_star")
    t = _theta_array(model, theta, x.shape[0])
    inside = theta_in_support(model, t)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise ModelError(f"theta[{bad}] = {np.asarray(t[bad]).tolist()} is outside the parameter support")
    out = _collide_raw(model, x, y, t, diagnostics)
    if diagnostics is not None:
        diagnostics.collisions += x.shape[0]
    if single:
        return out[0, 0] if model.d == 1 else out[0]
    if np.ndim(v) == 1 and model.d == 1:
        return out[:, 0]
    return out


def partner_collide(model: ModelSpec, v, v_star, theta) -> np.ndarray:
    """The partner's post-collision state with theta* paired to theta.

    Kac pairs theta* = -theta (as ``2 pi - theta`` to stay inside [0, 2 pi],
    same cosine and sine), Morgenstern pairs theta* = theta.  Used only by the
    pairwise-conservation checks; the solvers never update the partner.
    """
    if model.id is ModelId.KAC:
        t = np.asarray(theta, dtype=np.float64)
        return collide(model, v_star, v, np.where(t > 0, TWO_PI - t, 0.0))
    if model.id is ModelId.MORGENSTERN:
        return collide(model, v_star, v, theta)
    raise ModelError(f"no paired parameter rule for {model.id.value}")


# -- parameter law ------------------------------------------------------------


def theta_from_uniforms(model: ModelSpec, u: np.ndarray) -> np.ndarray:
    """Map ``(N, theta_draws)`` uniforms to parameters."""
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    if model.theta_point is not None:
        point = np.asarray(model.theta_point, dtype=np.float64)
        return np.broadcast_to(point, (n,) if model.theta_dim == 0 else (n, model.theta_dim)).copy()
    mid = model.id
    if mid is ModelId.KAC:
        return TWO_PI * u[:, 0]
    if mid is ModelId.WEALTH:
        return model.gamma * (2.0 * u[:, 0] - 1.0)
    if mid is ModelId.OPINION:
        return model.noise * (2.0 * u[:, 0] - 1.0)
    if mid is ModelId.MORGENSTERN:
        return sphere_from_uniforms(u[:, 0], u[:, 1])
    return 2.0 * u - 1.0


def sample_theta(model: ModelSpec, stream: RandomStream, size: int | None = None):
    """Draw from the parameter law; ``size=None`` returns one parameter."""
    n = 1 if size is None else int(size)
    u = stream.uniform(n * model.theta_draws).reshape(n, model.theta_draws)
    theta = theta_from_uniforms(model, u)
    if size is None:
        return float(theta[0]) if model.theta_dim == 0 else theta[0]
    return theta


# -- initial data -------------------------------------------------------------


class ICKind(str, enum.Enum):
    POINT_MASS = "PointMass"
    UNIFORM_BOX = "UniformBox"
    GAUSSIAN = "Gaussian"
    TWO_POINT = "TwoPointMixture"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class InitialCondition:
    """Initial law f_0.

    ``PointMass``: ``center``.  ``UniformBox``: ``center`` and
    ``half_widths``.  ``Gaussian``: ``center`` (mean) and ``variance``
    (diagonal).  ``TwoPointMixture``: ``atoms`` (two states) and ``weights``.
    ``Custom``: ``atoms`` drawn with equal probability.
    """

    kind: ICKind
    center: tuple[float, ...] = ()
    half_widths: tuple[float, ...] = ()
    variance: tuple[float, ...] = ()
    atoms: tuple[tuple[float, ...], ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ICKind(self.kind))
        for name in ("center", "half_widths", "variance", "weights"):
            object.__setattr__(self, name, tuple(float(x) for x in np.atleast_1d(getattr(self, name))))
        atoms = tuple(tuple(float(x) for x in np.atleast_1d(a)) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)

    @property
    def draws_per_particle(self) -> int:
        d = max(len(self.center), len(self.atoms[0]) if self.atoms else 0)
        return {
            ICKind.POINT_MASS: 0,
            ICKind.UNIFORM_BOX: d,
            ICKind.GAUSSIAN: d,
            ICKind.TWO_POINT: 1,
            ICKind.CUSTOM: 1,
        }[self.kind]


def point_mass(center) -> InitialCondition:
    return InitialCondition(ICKind.POINT_MASS, center=center)


def uniform_box(center, half_widths) -> InitialCondition:
    return InitialCondition(ICKind.UNIFORM_BOX, center=center, half_widths=half_widths)


def gaussian(mean, variance) -> InitialCondition:
    return InitialCondition(ICKind.GAUSSIAN, center=mean, variance=variance)


def two_point(atoms, weights=(0.5, 0.5)) -> InitialCondition:
    return InitialCondition(ICKind.TWO_POINT, atoms=atoms, weights=weights)


def custom(atoms) -> InitialCondition:
    return InitialCondition(ICKind.CUSTOM, atoms=atoms)


def _check_ic(model: ModelSpec, ic: InitialCondition):
    d = model.d
    kind = ic.kind
    if kind in (ICKind.POINT_MASS, ICKind.UNIFORM_BOX, ICKind.GAUSSIAN) and len(ic.center) != d:
        raise ModelError(f"{kind.value} center must have length {d}")
    if kind is ICKind.POINT_MASS:
        corners = np.array([ic.center])
    elif kind is ICKind.UNIFORM_BOX:
        if len(ic.half_widths) != d or min(ic.half_widths) < 0:
            raise ModelError(f"UniformBox half_widths must be {d} nonnegative numbers")
        c, h = np.array(ic.center), np.array(ic.half_widths)
        corners = np.array([c - h, c + h])
    elif kind is ICKind.GAUSSIAN:
        if len(ic.variance) != d or min(ic.variance) < 0:
            raise ModelError(f"Gaussian variance must be {d} nonnegative numbers")
        if model.domain != "line" and model.domain != "full space":
            raise DomainError(f"Gaussian initial data leaves the {model.domain} domain of {model.id.value}")
        corners = np.array([ic.center])
    else:
        if not ic.atoms or any(len(a) != d for a in ic.atoms):
            raise ModelError(f"{kind.value} atoms must be states of dimension {d}")
        if kind is ICKind.TWO_POINT:
            w = np.array(ic.weights)
            if len(ic.atoms) != 2 or w.shape != (2,) or w.min() < 0 or abs(w.sum() - 1) > 1e-12:
                raise ModelError("TwoPointMixture needs two atoms and two weights summing to 1")
        corners = np.array(ic.atoms)
    if not contains(model, corners).all():
        raise DomainError(f"{kind.value} initial data has support outside the {model.domain} domain of {model.id.value}")


def sample_initial(
    model: ModelSpec,
    ic: InitialCondition,
    n: int,
    stream: RandomStream,
    dt: float = 1.0,
) -> Ensemble:
    """N i.i.d. draws from the initial law, as an ensemble at step 0."""
    _check_ic(model, ic)
    if n < 1:
        raise ModelError("need at least one particle")
    k = ic.draws_per_particle
    u = stream.uniform(n * k).reshape(n, k) if k else np.empty((n, 0))
    kind = ic.kind
    if kind is ICKind.POINT_MASS:
        x = np.tile(np.array(ic.center), (n, 1))
    elif kind is ICKind.UNIFORM_BOX:
        c, h = np.array(ic.center), np.array(ic.half_widths)
        x = c - h + 2.0 * h * u
    elif kind is ICKind.GAUSSIAN:
        x = np.array(ic.center) + np.sqrt(np.array(ic.variance)) * normal_from_uniform(u)
    elif kind is ICKind.TWO_POINT:
        atoms = np.array(ic.atoms)
        x = atoms[np.where(u[:, 0] < ic.weights[0], 0, 1)]
    else:
        atoms = np.array(ic.atoms)
        idx = np.minimum((u[:, 0] * len(atoms)).astype(np.int64), len(atoms) - 1)
        x = atoms[idx]
    return Ensemble(x, 0, dt, model.id)


# -- equilibria ---------------------------------------------------------------


class EquilibriumKind(str, enum.Enum):
    GAUSSIAN_ENERGY = "GaussianMatchingEnergy"
    MAXWELLIAN = "MaxwellianMatchingMomentumEnergy"
    UNAVAILABLE = "Unavailable"


@dataclass(frozen=True)
class EquilibriumSpec:
    kind: EquilibriumKind
    mean: tuple[float, ...] = field(default=())
    variance: tuple[float, ...] = field(default=())
    model_id: ModelId | None = None

    @property
    def d(self) -> int:
        return len(self.mean)


def equilibrium_for(model: ModelSpec, ens: Ensemble | None = None, override: dict | None = None) -> EquilibriumSpec:
    """Equilibrium of the model with parameters matched to ``ens``.

    Kac: centered Gaussian whose variance is the empirical second moment.
    Morgenstern: Maxwellian with the empirical mean and per-component variance
    equal to a third of the centered energy.  ``override`` may supply
    ``mean`` and/or ``variance`` directly.
    """
    override = dict(override or {})
    if model.id is ModelId.KAC:
        kind = EquilibriumKind.GAUSSIAN_ENERGY
    elif model.id is ModelId.MORGENSTERN:
        kind = EquilibriumKind.MAXWELLIAN
    else:
        return EquilibriumSpec(EquilibriumKind.UNAVAILABLE, model_id=model.id)
    unknown = set(override) - {"mean", "variance"}
    if unknown:
        raise ModelError(f"unknown equilibrium override keys: {sorted(unknown)}")
    if ens is not None:
        x = ens.states
        if kind is EquilibriumKind.GAUSSIAN_ENERGY:
            mean = np.zeros(1)
            var = np.array([np.mean(x[:, 0] ** 2)])
        else:
            mean = x.mean(axis=0)
            centered = np.mean(np.sum((x - mean) ** 2, axis=1))
            var = np.full(3, centered / 3.0)
    elif not {"mean", "variance"} <= set(override):
        raise ModelError("equilibrium parameters need an ensemble or a full override")
    else:
        mean = var = None
    if "mean" in override:
        mean = np.atleast_1d(np.asarray(override["mean"], dtype=float))
    if "variance" in override:
        var = np.broadcast_to(np.atleast_1d(np.asarray(override["variance"], dtype=float)), (model.d,))
    if mean.shape != (model.d,) or var.shape != (model.d,) or np.any(var < 0):
        raise ModelError("equilibrium mean/variance must be length-d with nonnegative variance")
    return EquilibriumSpec(kind, tuple(map(float, mean)), tuple(map(float, var)), model.id)


def equilibrium_from_uniforms(eq: EquilibriumSpec, u: np.ndarray) -> np.ndarray:
    """Map ``(N, d)`` uniforms to equilibrium samples."""
    if eq.kind is EquilibriumKind.UNAVAILABLE:
        model = eq.model_id.value if eq.model_id else "this model"
        raise EquilibriumUnavailable(f"no equilibrium sampler for {model}")
    return np.asarray(eq.mean) + np.sqrt(np.asarray(eq.variance)) * normal_from_uniform(u)


def sample_equilibrium(eq: EquilibriumSpec, stream: RandomStream, size: int | None = None):
    """One draw (or ``size`` draws) from the equilibrium."""
    if eq.kind is EquilibriumKind.UNAVAILABLE:
        equilibrium_from_uniforms(eq, np.empty((0, 0)))
    n = 1 if size is None else int(size)
    x = equilibrium_from_uniforms(eq, stream.uniform(n * eq.d).reshape(n, eq.d))
    return x[0] if size is None else x
