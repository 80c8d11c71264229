"""Closed-form moment references.

Testing the kinetic equation against ``phi(v) = v`` and ``phi(v) = |v|^2``
closes the moment hierarchy for a few models:

* Kac: the collision average of ``v' + v*'`` over a uniform angle vanishes, so
  ``m' = -m`` and the Euler chain gives ``m_{n+1} = (1 - dt) m_n``; the energy
  is conserved pairwise.
* Wealth: the noise has zero mean, so the mean is conserved.
* Morgenstern: momentum and energy are conserved pairwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ModelId


def kac_mean(t: float, m0: float) -> float:
    return m0 * math.exp(-t)


def kac_mean_discrete(n: int, dt: float, m0: float) -> float:
    return m0 * (1.0 - dt) ** n


def kac_energy(t: float, e0: float) -> float:
    return e0


def kac_energy_discrete(n: int, dt: float, e0: float) -> float:
    return e0


def wealth_mean(t: float, m0: float) -> float:
    return m0


def wealth_mean_discrete(n: int, dt: float, m0: float) -> float:
    return m0


def morgenstern_invariants(t: float, p0, e0: float):
    return np.asarray(p0, dtype=float).copy(), e0


def moment_envelope(q: float, c: float, n: int, dt: float, m0: float) -> float:
    """Upper envelope ``exp(C n dt) M0`` for ``M_q^{1/q}`` after n steps.

    ``c`` must be supplied: it is certified only for Kac with q = 2 (C = 0);
    elsewhere use :func:`fit_envelope_exponent`, which is empirical.
    """
    if c < 0:
        raise ValueError("envelope exponent must be nonnegative")
    return math.exp(c * n * dt) * m0


def fit_envelope_exponent(times, moments) -> float:
    """Smallest C >= 0 with ``moments[k] <= exp(C t_k) moments[0]`` (not a certificate)."""
    t = np.asarray(times, dtype=float)
    m = np.asarray(moments, dtype=float)
    mask = t > 0
    if not mask.any() or m[0] <= 0:
        return 0.0
    return float(max(0.0, np.max(np.log(m[mask] / m[0]) / t[mask])))


@dataclass(frozen=True)
class MomentOracle:
    model_id: ModelId
    quantity: str
    continuous_value: Callable[[float, float], float]
    discrete_value: Callable[[int, float, float], float]


ORACLES = {
    (ModelId.KAC, "mean"): MomentOracle(ModelId.KAC, "mean", kac_mean, kac_mean_discrete),
    (ModelId.KAC, "energy"): MomentOracle(ModelId.KAC, "energy", kac_energy, kac_energy_discrete),
    (ModelId.WEALTH, "mean"): MomentOracle(ModelId.WEALTH, "mean", wealth_mean, wealth_mean_discrete),
    (ModelId.MORGENSTERN, "energy"): MomentOracle(
        ModelId.MORGENSTERN, "energy", lambda t, e0: e0, lambda n, dt, e0: e0
    ),
    (ModelId.MORGENSTERN, "momentum"): MomentOracle(
        ModelId.MORGENSTERN, "momentum", lambda t, p0: p0, lambda n, dt, p0: p0
    ),
}


def oracle_for(model_id, quantity: str) -> MomentOracle:
    key = (ModelId(model_id), quantity)
    if key not in ORACLES:
        available = sorted(q for m, q in ORACLES if m is key[0])
        raise KeyError(f"no {quantity!r} oracle for {key[0].value}; available: {available}")
    return ORACLES[key]


def observed_quantity(states: np.ndarray, quantity: str) -> float:
    """The empirical counterpart of an oracle quantity (momentum: x component)."""
    x = np.asarray(states, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if quantity in ("mean", "momentum"):
        return float(x[:, 0].mean())
    if quantity == "energy":
        return float(np.mean(np.sum(x * x, axis=1)))
    raise KeyError(quantity)
