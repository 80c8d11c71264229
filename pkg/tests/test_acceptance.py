"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line (criterion 7 records one per sub-check);
the lines are repeated under "acceptance criteria" in the pytest summary.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from kinetic_mc.core import Scheme, SchemeParams
from kinetic_mc.harness.config import build, read_config
from kinetic_mc.harness.emit import sweep_csv
from kinetic_mc.harness.sweeps import Reference, SweepPlan, converge_in_dt, converge_in_n
from kinetic_mc.harness.validation import fit_lipschitz, growth_ratios, lipschitz_ratios, sample_pairs
from kinetic_mc.metrics import w1_exact_1d, w1_exact_matching, w1_sliced
from kinetic_mc.models import (
    equilibrium_for,
    gaussian,
    kac,
    kinetic_opt,
    morgenstern,
    opinion,
    sample_equilibrium,
    sample_initial,
    uniform_box,
    wealth,
)
from kinetic_mc.solvers import run, trmc_step
from kinetic_mc.streams import child_seed, derive_stream

pytestmark = [pytest.mark.acceptance]

EXAMPLES = Path(__file__).resolve().parents[1] / "docs" / "examples"
MASTER = 20240601


def _plan(name: str) -> SweepPlan:
    return build(read_config(EXAMPLES / name)).plan


def _n_rate(name, label, acceptance):
    start = time.perf_counter()
    result = converge_in_n(_plan(name), workers=1)
    elapsed = time.perf_counter() - start
    fit = result.fit
    ok = -0.62 <= fit.slope <= -0.38 and fit.r_squared >= 0.95
    acceptance(
        label,
        ok,
        f"slope={fit.slope:.4f} in [-0.62, -0.38], R^2={fit.r_squared:.4f} >= 0.95, {elapsed:.0f}s single-threaded",
    )
    assert ok
    assert elapsed < 300


@pytest.mark.slow
def test_criterion_1_nanbu_n_rate(acceptance):
    _n_rate("kac_converge_n.json", "criterion 1 (Nanbu N-rate)", acceptance)


@pytest.mark.slow
def test_criterion_2_trmc_n_rate(acceptance):
    _n_rate("kac_trmc_converge_n.json", "criterion 2 (TRMC N-rate)", acceptance)


def test_criterion_3_euler_dt_rate(acceptance):
    result = converge_in_dt(_plan("kac_converge_dt.json"))
    errs = [r.mean_error for r in result.rows]  # ascending dt
    ratios = [b / a for a, b in zip(errs, errs[1:])]
    ok = all(1.8 <= r <= 2.2 for r in ratios) and 0.9 <= result.fit.slope <= 1.1
    acceptance(
        "criterion 3 (forward-Euler dt-rate)",
        ok,
        f"ratios={[round(r, 4) for r in ratios]} in [1.8, 2.2], slope={result.fit.slope:.4f} in [0.9, 1.1]",
    )
    assert ok


def test_criterion_4_trmc_relaxation_limit(acceptance):
    n = 100_000
    model = kac()
    ens = sample_initial(model, gaussian([1.0], [1.0]), n, derive_stream(MASTER, 0, 0), dt=0.1)
    eq = equilibrium_for(model, ens)
    after = trmc_step(ens, model, 0.1, 1e-6, eq, seed=child_seed(MASTER, 4))
    fresh = sample_equilibrium(eq, derive_stream(child_seed(MASTER, 4, 0), 0, 0), n)[:, 0]
    distance = w1_exact_1d(after.states[:, 0], fresh)
    selfs = [
        w1_exact_1d(
            sample_equilibrium(eq, derive_stream(child_seed(MASTER, 4, 1, k), 0, 0), n)[:, 0],
            sample_equilibrium(eq, derive_stream(child_seed(MASTER, 4, 2, k), 0, 0), n)[:, 0],
        )
        for k in range(20)
    ]
    bound = 2.0 * float(np.mean(selfs))
    ok = distance <= bound
    acceptance("criterion 4 (TRMC eps->0 limit)", ok, f"W1={distance:.5f} <= 2 x self-distance = {bound:.5f}")
    assert ok


def _replicate(model, ic, reps=100, n=10_000, dt=0.1, horizon=1.0, record_every=0, tag=5):
    out = []
    for r in range(reps):
        params = SchemeParams(Scheme.NANBU, dt, horizon, n, seed=child_seed(MASTER, tag, r), record_every=record_every)
        out.append(run(params, model, ic, moment_orders=(2.0,)))
    return out


def _within(values, target=0.0, k=4.0):
    v = np.asarray(values, dtype=float)
    se = v.std(ddof=1) / math.sqrt(v.size)
    return abs(v.mean() - target) <= k * se, v.mean(), se


def test_criterion_5_expectation_conservation(acceptance):
    kac_runs = _replicate(kac(), gaussian([1.0], [1.0]), tag=51)
    checks = {}
    checks["Kac energy"] = _within([t.snapshots[-1].report.conserved_drift["energy"] for t in kac_runs])
    # E[mean_T | initial] = (1 - dt)^(T/dt) m0
    decay = 0.9**10
    checks["Kac mean"] = _within([t.snapshots[-1].report.mean_vector[0] - decay * t.snapshots[0].report.mean_vector[0] for t in kac_runs])
    m_runs = _replicate(morgenstern(), uniform_box([0.5, 0.0, 0.0], [1.0, 1.0, 1.0]), tag=52)
    for key in ("momentum_x", "momentum_y", "momentum_z", "energy"):
        checks[f"Morgenstern {key}"] = _within([t.snapshots[-1].report.conserved_drift[key] for t in m_runs])
    ok = all(c[0] for c in checks.values())
    detail = "; ".join(f"{k} {m:+.2e} (4SE {4 * s:.2e})" for k, (_, m, s) in checks.items())
    acceptance("criterion 5 (expectation-level conservation)", ok, detail)
    assert ok


def _perm_min_1d(x, y, perms):
    cost = np.abs(x[:, None] - y[None, :])
    return float(cost[np.arange(len(x)), perms].mean(axis=1).min())


def _perm_min_2d(x, y, perms):
    cost = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2)
    return float(cost[np.arange(len(x)), perms].mean(axis=1).min())


def test_criterion_6_metric_oracles(acceptance):
    rng = np.random.default_rng(MASTER)
    perms = {n: np.array(list(itertools.permutations(range(n)))) for n in range(1, 9)}
    worst_1d = max(
        abs(w1_exact_1d(x, y) - _perm_min_1d(x, y, perms[len(x)]))
        for x, y in (rng.normal(size=(2, n)) for n in rng.integers(1, 9, size=200))
    )
    worst_2d = max(
        abs(w1_exact_matching(x, y) - _perm_min_2d(x, y, perms[len(x)]))
        for x, y in (rng.normal(size=(2, n, 2)) for n in rng.integers(1, 7, size=100))
    )
    s = derive_stream(MASTER, 0, 6)
    excess = max(
        w1_sliced(x, y, 50, s) - w1_exact_matching(x, y)
        for x, y in (rng.normal(size=(2, n, 3)) for n in rng.integers(1, 65, size=100))
    )
    ok = worst_1d <= 1e-12 and worst_2d <= 1e-10 and excess <= 1e-12
    acceptance(
        "criterion 6 (metric oracle equivalence)",
        ok,
        f"1-d max gap {worst_1d:.1e} <= 1e-12, matching max gap {worst_2d:.1e} <= 1e-10, sliced - exact max {excess:.2e} <= 1e-12",
    )
    assert ok


SUITE_N = 10_000
SUITE_SEED = MASTER
CERTIFIED = [kac(), wealth(0.25), opinion(0.25, 0.2), morgenstern()]


@pytest.mark.parametrize("model", CERTIFIED, ids=lambda m: m.id.value)
def test_criterion_7_lipschitz_certified(model, acceptance):
    ratios = lipschitz_ratios(model, *sample_pairs(model, SUITE_N, SUITE_SEED))
    bound = model.lipschitz_constant
    violations = int(np.sum(ratios > bound * (1 + 1e-12)))
    ok = violations == 0
    acceptance(f"criterion 7 (Lipschitz, {model.id.value})", ok, f"L={bound:.4g}, max ratio {ratios.max():.4g}, violations={violations}/{SUITE_N}")
    assert ok


@pytest.mark.parametrize("model", CERTIFIED, ids=lambda m: m.id.value)
def test_criterion_7_growth_certified(model, acceptance):
    # the bound as printed: |C(v,v*,t)| <= C (1+|t|)(|v| + |v*|)
    v, vs, _, _, theta = sample_pairs(model, SUITE_N, SUITE_SEED)
    ratios = growth_ratios(model, v, vs, theta, form="linear")
    bound = model.growth_constant
    violations = int(np.sum(ratios > bound * (1 + 1e-12)))
    ok = violations == 0
    acceptance(f"criterion 7 (linear growth, {model.id.value})", ok, f"C={bound:.4g}, max ratio {ratios.max():.4g}, violations={violations}/{SUITE_N}")
    assert ok


def test_criterion_7_opinion_affine_growth(acceptance):
    # D(v,v*) eta does not vanish at v = v* = 0, so only |C| <= C (1+|t|)(1 + |v| + |v*|) can hold
    model = opinion(0.25, 0.2)
    v, vs, _, _, theta = sample_pairs(model, SUITE_N, SUITE_SEED)
    ratios = growth_ratios(model, v, vs, theta, form="affine")
    violations = int(np.sum(ratios > model.growth_constant * (1 + 1e-12)))
    ok = violations == 0
    acceptance("criterion 7 (affine growth, Opinion)", ok, f"C={model.growth_constant:.4g}, max ratio {ratios.max():.4g}, violations={violations}/{SUITE_N}")
    assert ok


def test_criterion_7_kinetic_opt_fitted(acceptance):
    model = kinetic_opt(d=2, objective="rastrigin", shift=[0.3, -0.2])
    fitted = fit_lipschitz(model, SUITE_N, SUITE_SEED + 1)
    ratios = lipschitz_ratios(model, *sample_pairs(model, SUITE_N, SUITE_SEED))
    violations = int(np.sum(ratios > fitted))
    v, vs, _, _, theta = sample_pairs(model, SUITE_N, SUITE_SEED)
    growth = growth_ratios(model, v, vs, theta, form="linear")
    g_viol = int(np.sum(growth > model.growth_constant * (1 + 1e-12)))
    ok = violations == 0 and g_viol == 0
    acceptance(
        "criterion 7 (KineticOpt, fitted)",
        ok,
        f"fitted L={fitted:.4g} on a disjoint sample, max ratio {ratios.max():.4g}, violations={violations}; "
        f"growth C={model.growth_constant:.4g}, violations={g_viol}",
    )
    assert ok


def test_criterion_8_moment_envelope(acceptance):
    runs = _replicate(kac(), gaussian([1.0], [1.0]), reps=40, horizon=2.0, record_every=1, tag=8)
    m = np.array([[s.report.moments[2.0] for s in t.snapshots] for t in runs])  # (R, snapshots)
    excess = m - m[:, :1]
    mean = excess.mean(axis=0)
    se = excess.std(axis=0, ddof=1) / math.sqrt(len(runs))
    ok = bool(np.all(mean <= 4 * se))
    later = slice(1, None)  # snapshot 0 has zero excess by construction
    worst = 1 + int(np.argmax(mean[later] - 4 * se[later]))
    acceptance(
        "criterion 8 (moment envelope, Kac q=2, C=0)",
        ok,
        f"{m.shape[1]} snapshots over T=2, R={len(runs)}; closest snapshot {worst}: excess {mean[worst]:+.2e} vs 4SE {4 * se[worst]:.2e}",
    )
    assert ok


def _sweeps():
    kac_n = _plan("kac_converge_n.json")
    trmc_n = _plan("kac_trmc_converge_n.json")
    morg = SweepPlan(
        "ParticleCount",
        (100, 200, 400),
        3,
        Reference("LargeNRun", 16),
        SchemeParams(Scheme.TRMC, 0.1, 0.3, 10, epsilon=0.5),
        morgenstern(),
        uniform_box([0.5, 0.0, 0.0], [1.0, 1.0, 1.0]),
        master_seed=MASTER,
        n_slices=50,
    )
    return {
        "Kac Nanbu": replace(kac_n, replications=3),
        "Kac TRMC": replace(trmc_n, replications=3),
        "Morgenstern TRMC (sliced)": morg,
    }


def test_criterion_9_reproducibility(acceptance):
    details = []
    ok = True
    for name, plan in _sweeps().items():
        outputs = []
        for workers in (1, 8, 1):
            result = converge_in_n(plan, workers=workers)
            outputs.append((sweep_csv(result.rows), sweep_csv(result.max_rows)))
        same = outputs[0] == outputs[1] == outputs[2]
        ok &= same
        details.append(f"{name}: {'identical' if same else 'DIFFERENT'}")
    dt = [sweep_csv(converge_in_dt(_plan("kac_converge_dt.json"), workers=w).rows) for w in (1, 8)]
    ok &= dt[0] == dt[1]
    details.append(f"Kac dt sweep: {'identical' if dt[0] == dt[1] else 'DIFFERENT'}")
    acceptance("criterion 9 (bitwise reproducibility, threads 1 and 8)", ok, "; ".join(details))
    assert ok
