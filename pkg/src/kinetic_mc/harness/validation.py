"""Invariant suites: domain closure, Lipschitz/growth bounds, conservation,
metric axioms and reproducibility."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..core import ModelId, Scheme, SchemeParams
from ..metrics import w1_exact_1d, w1_exact_matching, w1_sliced
from ..models import (
    MODEL_FACTORIES,
    CollisionDiagnostics,
    ModelSpec,
    _collide_raw,
    contains,
    project,
    theta_from_uniforms,
    uniform_box,
)
from ..solvers import run
from ..streams import derive_stream

logger = logging.getLogger(__name__)

DEPTH_SAMPLES = {"Quick": 10_000, "Full": 100_000}
LIPSCHITZ_FIT_SAFETY = 1.5
_REL = 1e-12


@dataclass
class SuiteResult:
    suite: str
    model: str
    passed: bool
    margin: float
    detail: str = ""

    def as_dict(self) -> dict:
        out = asdict(self)
        if not math.isfinite(out["margin"]):
            out["margin"] = None
        return out


@dataclass
class ValidationReport:
    depth: str
    entries: list[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[SuiteResult]:
        return [e for e in self.entries if not e.passed]


# -- samplers -----------------------------------------------------------------


def sample_states(model: ModelSpec, n: int, stream) -> np.ndarray:
    """Admissible states, spread over the domain and touching its boundary."""
    d = model.d
    u = stream.uniform(n * d).reshape(n, d)
    if model.id in (ModelId.KAC, ModelId.MORGENSTERN):
        return 3.0 * stream.normal(n * d).reshape(n, d)
    if model.id is ModelId.WEALTH:
        x = -2.0 * np.log1p(-u)
        x[stream.uniform(n) < 0.05] = 0.0
        return x
    half = 1.0 if model.id is ModelId.OPINION else model.box
    x = half * (2.0 * u - 1.0)
    snap = stream.uniform(n * d).reshape(n, d) < 0.05
    x[snap] = np.sign(x[snap]) * half
    return x


def sample_thetas(model: ModelSpec, n: int, stream) -> np.ndarray:
    return theta_from_uniforms(model, stream.uniform(n * model.theta_draws).reshape(n, model.theta_draws))


def sample_pairs(model: ModelSpec, n: int, seed: int):
    """``(v, v*, w, w*, theta)``; half the (w, w*) are small perturbations of (v, v*)."""
    s = derive_stream(seed, 0, 0)
    v, vs = sample_states(model, n, s), sample_states(model, n, s)
    w, ws = sample_states(model, n, s), sample_states(model, n, s)
    near = s.uniform(n) < 0.5
    scale = 1e-3
    w[near] = project(model, v[near] + scale * s.normal(int(near.sum()) * model.d).reshape(-1, model.d))
    ws[near] = project(model, vs[near] + scale * s.normal(int(near.sum()) * model.d).reshape(-1, model.d))
    if model.id is ModelId.WEALTH:
        w, ws = np.abs(w), np.abs(ws)
    theta = sample_thetas(model, n, s)
    return v, vs, w, ws, theta


def _theta_norm(theta: np.ndarray) -> np.ndarray:
    return np.abs(theta) if theta.ndim == 1 else np.linalg.norm(theta, axis=1)


def lipschitz_ratios(model: ModelSpec, v, vs, w, ws, theta) -> np.ndarray:
    """|C(v,v*,t) - C(w,w*,t)| / ((1+|t|)(|v-w| + |v*-w*|)), pairs at distance 0 dropped."""
    a = _collide_raw(model, v, vs, theta, None)
    b = _collide_raw(model, w, ws, theta, None)
    dist = np.linalg.norm(v - w, axis=1) + np.linalg.norm(vs - ws, axis=1)
    keep = dist > 0
    num = np.linalg.norm(a - b, axis=1)[keep]
    return num / ((1.0 + _theta_norm(theta)[keep]) * dist[keep])


def growth_ratios(model: ModelSpec, v, vs, theta, form: str | None = None) -> np.ndarray:
    """|C(v,v*,t)| over the growth bound's right-hand side (without the constant)."""
    form = form or model.growth_form
    out = np.linalg.norm(_collide_raw(model, v, vs, theta, None), axis=1)
    size = np.linalg.norm(v, axis=1) + np.linalg.norm(vs, axis=1)
    if form == "affine":
        size = 1.0 + size
    rhs = (1.0 + _theta_norm(theta)) * size
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, out / rhs, np.where(out > 0, np.inf, 0.0))
    return ratio


def fit_lipschitz(model: ModelSpec, n: int, seed: int, safety: float = LIPSCHITZ_FIT_SAFETY) -> float:
    """Empirical Lipschitz constant: ``safety`` times the largest observed ratio."""
    return safety * float(lipschitz_ratios(model, *sample_pairs(model, n, seed)).max())


# -- suites -------------------------------------------------------------------


def domain_closure(model: ModelSpec, n: int, seed: int) -> SuiteResult:
    s = derive_stream(seed, 0, 1)
    v, vs = sample_states(model, n, s), sample_states(model, n, s)
    theta = sample_thetas(model, n, s)
    diag = CollisionDiagnostics()
    out = _collide_raw(model, v, vs, theta, diag)
    outside = int((~contains(model, out)).sum())
    if model.bounded:
        half = 1.0 if model.id is ModelId.OPINION else model.box
        margin = float(np.min(half - np.abs(out)))
    elif model.id is ModelId.WEALTH:
        margin = float(out.min())
    else:
        margin = math.inf
    passed = outside == 0 and diag.clamp_events == 0
    return SuiteResult("domain_closure", model.id.value, passed, margin, f"{n} samples, outside={outside}, clamp_events={diag.clamp_events}")


def lipschitz_suite(model: ModelSpec, n: int, seed: int) -> SuiteResult:
    cert = model.lipschitz_constant
    detail = ""
    if cert is None:
        cert = fit_lipschitz(model, n, seed + 1)
        detail = f"fitted (non-certified) L={cert:.6g} on a disjoint sample; "
    worst = float(lipschitz_ratios(model, *sample_pairs(model, n, seed)).max())
    passed = worst <= cert * (1 + _REL)
    return SuiteResult("lipschitz", model.id.value, passed, cert - worst, detail + f"L={cert:.6g}, max ratio={worst:.6g}")


def growth_suite(model: ModelSpec, n: int, seed: int, form: str | None = None) -> SuiteResult:
    form = form or model.growth_form
    v, vs, _, _, theta = sample_pairs(model, n, seed)
    worst = float(growth_ratios(model, v, vs, theta, form).max())
    c = model.growth_constant
    passed = worst <= c * (1 + _REL)
    return SuiteResult(f"growth_{form}", model.id.value, passed, c - worst, f"C={c:.6g}, max ratio={worst:.6g}")


def conservation_suite(model: ModelSpec, n: int, seed: int) -> SuiteResult | None:
    s = derive_stream(seed, 0, 2)
    v, vs = sample_states(model, n, s), sample_states(model, n, s)
    theta = sample_thetas(model, n, s)
    if model.id in (ModelId.KAC, ModelId.MORGENSTERN):
        a = _collide_raw(model, v, vs, theta, None)
        b = _partner(model, v, vs, theta)
        e0 = np.sum(v * v, axis=1) + np.sum(vs * vs, axis=1)
        e1 = np.sum(a * a, axis=1) + np.sum(b * b, axis=1)
        rel = np.abs(e1 - e0) / np.maximum(e0, 1e-300)
        worst = float(rel.max())
        detail = f"energy rel. error {worst:.3g}"
        if model.id is ModelId.MORGENSTERN:
            p0 = v + vs
            mom = float((np.linalg.norm(a + b - p0, axis=1) / np.maximum(np.sqrt(e0), 1e-300)).max())
            worst = max(worst, mom)
            detail += f", momentum rel. error {mom:.3g}"
        return SuiteResult("pairwise_conservation", model.id.value, worst <= 1e-10, 1e-10 - worst, detail)
    if model.id in (ModelId.WEALTH, ModelId.OPINION):
        theta_star = sample_thetas(model, n, s)
        a = _collide_raw(model, v, vs, theta, None)
        b = _collide_raw(model, vs, v, theta_star, None)
        delta = (a + b - v - vs)[:, 0]
        mean = float(delta.mean())
        se = float(delta.std(ddof=1) / math.sqrt(n))
        return SuiteResult("mean_conservation", model.id.value, abs(mean) <= 4 * se, 4 * se - abs(mean), f"mean change {mean:.3g} (4 SE = {4 * se:.3g})")
    return None


def _partner(model, v, vs, theta):
    if model.id is ModelId.KAC:
        return _collide_raw(model, vs, v, np.where(theta > 0, 2 * np.pi - theta, 0.0), None)
    return _collide_raw(model, vs, v, theta, None)


def metric_axioms(trials: int, seed: int) -> list[SuiteResult]:
    s = derive_stream(seed, 0, 3)
    sym = tri = ident = cons = lower = 0.0
    for _ in range(trials):
        x, y, z = (s.normal(16) for _ in range(3))
        dxy, dyx = w1_exact_1d(x, y), w1_exact_1d(y, x)
        sym = max(sym, abs(dxy - dyx))
        ident = max(ident, w1_exact_1d(x, x))
        tri = max(tri, dxy - w1_exact_1d(x, z) - w1_exact_1d(z, y))
        cons = max(cons, abs(w1_exact_matching(x, y) - dxy))
        X, Y, Z = (s.normal(16).reshape(8, 2) for _ in range(3))
        m = w1_exact_matching(X, Y)
        sym = max(sym, abs(m - w1_exact_matching(Y, X)))
        ident = max(ident, w1_exact_matching(X, X))
        tri = max(tri, m - w1_exact_matching(X, Z) - w1_exact_matching(Z, Y))
        lower = max(lower, w1_sliced(X, Y, 20, s) - m)
    return [
        SuiteResult("metric_symmetry", "metrics", sym <= 1e-12, 1e-12 - sym),
        SuiteResult("metric_identity", "metrics", ident == 0.0, -ident),
        SuiteResult("metric_triangle", "metrics", tri <= 1e-10, 1e-10 - tri),
        SuiteResult("metric_1d_consistency", "metrics", cons <= 1e-12, 1e-12 - cons),
        SuiteResult("sliced_lower_bound", "metrics", lower <= 1e-12, 1e-12 - lower),
    ]


def _default_ic(model: ModelSpec):
    if model.id is ModelId.WEALTH:
        return uniform_box([1.0], [1.0])
    if model.id is ModelId.OPINION:
        return uniform_box([0.0], [0.9])
    if model.id is ModelId.KINETIC_OPT:
        return uniform_box([0.0] * model.d, [model.box] * model.d)
    return uniform_box([0.5] * model.d, [1.0] * model.d)


def reproducibility(model: ModelSpec, seed: int) -> SuiteResult:
    schemes = [Scheme.NANBU] + ([Scheme.TRMC] if model.has_equilibrium else [])
    ok = True
    for scheme in schemes:
        params = SchemeParams(scheme, 0.2, 1.0, 500, epsilon=0.5 if scheme is Scheme.TRMC else None, seed=seed)
        ic = _default_ic(model)
        a = run(params, model, ic).final.states
        b = run(params, model, ic).final.states
        c = run(params, model, ic, workers=4).final.states
        ok &= np.array_equal(a, b) and np.array_equal(a, c)
    return SuiteResult("reproducibility", model.id.value, bool(ok), 0.0, f"schemes {[s.value for s in schemes]}, workers 1 vs 4")


def default_models() -> list[ModelSpec]:
    return [factory() for factory in MODEL_FACTORIES.values()]


def resolve_models(selector) -> list[ModelSpec]:
    if isinstance(selector, ModelSpec):
        return [selector]
    if selector in (None, "all", "All"):
        return default_models()
    return [MODEL_FACTORIES[ModelId(selector)]()]


def validate(selector="all", depth: str = "Quick", seed: int = 12345) -> ValidationReport:
    """Run every invariant suite for the selected model(s).

    ``selector`` is a :class:`ModelSpec`, a model name or ``"all"``.
    Failures are report entries, never exceptions.
    """
    if depth not in DEPTH_SAMPLES:
        raise ValueError(f"depth must be one of {sorted(DEPTH_SAMPLES)}")
    n = DEPTH_SAMPLES[depth]
    report = ValidationReport(depth)
    for model in resolve_models(selector):
        report.entries.append(domain_closure(model, n, seed))
        report.entries.append(lipschitz_suite(model, n, seed))
        report.entries.append(growth_suite(model, n, seed))
        cons = conservation_suite(model, n, seed)
        if cons is not None:
            report.entries.append(cons)
        report.entries.append(reproducibility(model, seed))
    report.entries.extend(metric_axioms(50 if depth == "Quick" else 200, seed))
    for e in report.failures():
        logger.warning("validation failure: %s/%s %s", e.suite, e.model, e.detail)
    return report
