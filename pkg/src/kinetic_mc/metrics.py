"""Wasserstein-1 distances between empirical measures, moments, rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import wasserstein_distance

from .core import ModelId, as_states
from .streams import RandomStream

MATCHING_MAX_N = 512
DEFAULT_SLICES = 200


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class W1Value:
    value: float
    estimator: str  # "Exact1D", "ExactMatching" or "Sliced(L)"


def _finite_1d(x, name):
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise MetricError(f"{name} contains non-finite entries")
    return arr


def w1_exact_1d(x, y) -> float:
    """Exact W1 between two equal-size empirical measures on the line."""
    a = _finite_1d(x, "x")
    b = _finite_1d(y, "y")
    if a.size != b.size:
        raise MetricError(f"sample sizes differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise MetricError("empty samples")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def w1_empirical_1d(x, y) -> float:
    """Exact W1 between empirical measures of possibly different sizes (d = 1)."""
    a = _finite_1d(x, "x")
    b = _finite_1d(y, "y")
    if a.size == b.size:
        return w1_exact_1d(a, b)
    return float(wasserstein_distance(a, b))


def w1_exact_matching(x, y, max_n: int = MATCHING_MAX_N) -> float:
    """Exact W1 by minimum-cost perfect matching under the Euclidean ground cost."""
    a, b = as_states(x), as_states(y)
    if a.shape != b.shape:
        raise MetricError(f"sample shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] > max_n:
        raise MetricError(
            f"N = {a.shape[0]} exceeds the exact matching limit {max_n}; use the sliced estimator"
        )
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise MetricError("samples contain non-finite entries")
    cost = cdist(a, b)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / a.shape[0])


def random_directions(d: int, count: int, stream: RandomStream) -> np.ndarray:
    """``count`` uniform unit vectors in R^d."""
    g = stream.normal(count * d).reshape(count, d)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def w1_sliced(x, y, n_slices: int, stream: RandomStream) -> float:
    """Average of exact 1-d W1 over ``n_slices`` random projections.

    Each projection is 1-Lipschitz, so the estimate never exceeds the exact
    W1.  Samples may differ in size.
    """
    if n_slices < 1:
        raise MetricError("need at least one slice")
    a, b = as_states(x), as_states(y)
    if a.shape[1] != b.shape[1]:
        raise MetricError("samples live in different dimensions")
    dirs = random_directions(a.shape[1], n_slices, stream)
    pa, pb = a @ dirs.T, b @ dirs.T
    values = np.array([w1_empirical_1d(pa[:, k], pb[:, k]) for k in range(n_slices)])
    return float(np.sum(values) / n_slices)


def w1_auto(x, y, stream: RandomStream | None = None, n_slices: int = DEFAULT_SLICES) -> W1Value:
    """Exact W1 in one dimension, sliced W1 otherwise, tagged with the estimator."""
    a, b = as_states(x), as_states(y)
    if a.shape[1] == 1:
        return W1Value(w1_empirical_1d(a[:, 0], b[:, 0]), "Exact1D")
    if stream is None:
        raise MetricError("the sliced estimator needs a random stream")
    return W1Value(w1_sliced(a, b, n_slices, stream), f"Sliced({n_slices})")


def empirical_moment(x, q: float) -> float:
    """``((1/N) sum |X_i|^q)^(1/q)`` with Euclidean norms."""
    if q < 1:
        raise MetricError(f"moment order must be >= 1, got {q}")
    x = as_states(x)
    scale = float(np.max(np.abs(x)))
    if scale == 0.0:
        return 0.0
    # work in units of the largest entry so that neither |x| nor |x|^q overflows
    norms = np.linalg.norm(x / scale, axis=1)
    return float(scale * np.mean(norms**q) ** (1.0 / q))


def epsilon_rate(n: int, d: int, q: float) -> float:
    """Monte Carlo rate of i.i.d. empirical measures in W1.

    ``N^-1/2`` for d = 1, ``N^-1/2 log(1+N)`` for d = 2 (both need q > 2) and
    ``N^-1/d`` for d > 2 (needs q > d/(d-1)).
    """
    if n < 1 or d < 1:
        raise MetricError("N and d must be positive")
    if d <= 2:
        if not q > 2:
            raise MetricError(f"d = {d} requires q > 2, got q = {q}")
        return n**-0.5 if d == 1 else n**-0.5 * math.log1p(n)
    if not q > d / (d - 1):
        raise MetricError(f"d = {d} requires q > d/(d-1) = {d / (d - 1):.6g}, got q = {q}")
    return n ** (-1.0 / d)


def rate_exponent(d: int) -> float:
    """Leading power of N in :func:`epsilon_rate` (log factor ignored)."""
    return -0.5 if d <= 2 else -1.0 / d


@dataclass
class MetricReport:
    step_index: int
    moments: dict[float, float]
    mean_vector: list[float]
    energy: float
    conserved: dict[str, float] = field(default_factory=dict)
    conserved_drift: dict[str, float] = field(default_factory=dict)
    w1_to_reference: W1Value | None = None

    def as_dict(self) -> dict:
        out = {
            "step_index": self.step_index,
            "moments": {str(q): v for q, v in self.moments.items()},
            "mean_vector": self.mean_vector,
            "energy": self.energy,
            "conserved_drift": self.conserved_drift,
        }
        if self.w1_to_reference is not None:
            out["w1_to_reference"] = {
                "value": self.w1_to_reference.value,
                "estimator": self.w1_to_reference.estimator,
            }
        return out


def conserved_quantities(x: np.ndarray, model_id: ModelId | None) -> dict[str, float]:
    """Quantities the model conserves (in expectation under Nanbu)."""
    if model_id is None:
        return {}
    model_id = ModelId(model_id)
    mean = x.mean(axis=0)
    energy = float(np.mean(np.sum(x * x, axis=1)))
    if model_id is ModelId.KAC:
        return {"energy": energy}
    if model_id is ModelId.WEALTH:
        return {"mean": float(mean[0])}
    if model_id is ModelId.MORGENSTERN:
        out = {f"momentum_{c}": float(m) for c, m in zip("xyz", mean)}
        out["energy"] = energy
        return out
    return {}


def metric_report(
    states,
    step_index: int,
    orders: Iterable[float] = (1.0, 2.0, 3.0),
    initial: MetricReport | None = None,
    model=None,
    reference=None,
    stream: RandomStream | None = None,
) -> MetricReport:
    x = as_states(states)
    model_id = getattr(model, "id", model)
    conserved = conserved_quantities(x, model_id)
    drift = {}
    if initial is not None:
        drift = {k: v - initial.conserved[k] for k, v in conserved.items() if k in initial.conserved}
    w1 = None if reference is None else w1_auto(x, reference, stream)
    return MetricReport(
        step_index=step_index,
        moments={float(q): empirical_moment(x, q) for q in orders},
        mean_vector=[float(m) for m in x.mean(axis=0)],
        energy=float(np.mean(np.sum(x * x, axis=1))),
        conserved=conserved,
        conserved_drift=drift,
        w1_to_reference=w1,
    )
