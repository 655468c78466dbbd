"""Acceptance criteria 1 to 12 at their stated budgets and tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the
terminal summary.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import stats

from dynwalk.birth_death import BDParams, ld_lambda_star, simulate_bd_returns, tail_exponent_fit
from dynwalk.closed_forms import identity_table, two_point_A, v_asym, vbrw_regen_moments
from dynwalk.conductance_law import ConductanceLaw
from dynwalk.couplings import (asym_speed_gap, coupled_monotone_d1,
                               coupled_nvbrw_dominated_by_tasym, tasym_gap_cycles)
from dynwalk.environment import DynEnvironment, Lattice
from dynwalk.regeneration import estimate_speed, reweighting_terms, run_cycles
from dynwalk.rng import RandomStream
from dynwalk.verification import (cbrw_path_likelihood_ratio, cbrw_symmetry_test,
                                  detailed_balance_test)
from dynwalk.walkers import WalkerParams, tasym_run

SEED = 20240601
DELTA1 = ConductanceLaw.point_mass(1.0)
PERC = ConductanceLaw.two_point(0.0, 1.0, 0.5)
ALMOST = ConductanceLaw.two_point(0.1, 1.0, 0.5)

pytestmark = pytest.mark.acceptance


def _stream(k: int) -> RandomStream:
    return RandomStream.for_replica(SEED, k)


def _z(x: np.ndarray, target: float) -> float:
    return abs(float(x.mean()) - target) / (float(x.std(ddof=1)) / math.sqrt(len(x)))


def test_criterion_01_vbrw_regeneration_moments(report):
    start = time.perf_counter()
    batch = run_cycles(WalkerParams("vbrw", 0.0, 2.0, 1, DELTA1), 100_000, _stream(1))
    e_tau, e_n = vbrw_regen_moments(0.0, 2.0, 1.0, 1)
    zn, zt = _z(batch.N.astype(float), e_n), _z(batch.tau, e_tau)
    elapsed = time.perf_counter() - start
    ok = zn <= 3 and zt <= 3 and elapsed < 30
    assert report(1, ok, f"mean N={batch.N.mean():.5f} (|z|={zn:.2f}) vs {e_n:.5f}; "
                         f"mean tau={batch.tau.mean():.5f} (|z|={zt:.2f}) vs {e_tau:.5f}; "
                         f"{elapsed:.1f}s")


def test_criterion_02_nvbrw_regeneration_moments(report):
    start = time.perf_counter()
    batch = run_cycles(WalkerParams("nvbrw", 1.0, 2.0, 1, DELTA1), 100_000, _stream(2))
    _, e_n = vbrw_regen_moments(1.0, 2.0, 1.0, 1, normalized=True)
    zn = _z(batch.N.astype(float), e_n)
    elapsed = time.perf_counter() - start
    ok = zn <= 3 and elapsed < 30
    assert report(2, ok, f"mean N={batch.N.mean():.5f} (|z|={zn:.2f}) vs {e_n:.5f}; {elapsed:.1f}s")


def test_criterion_03_totally_asymmetric_speed(report):
    start = time.perf_counter()
    horizon, replicas = 50_000.0, 20
    speeds = []
    attempts = 0
    for r in range(replicas):
        gen = _stream(300 + r)
        traj = tasym_run(WalkerParams("tasym", 0.0, 1.0, 1, PERC),
                         DynEnvironment(PERC, 1.0, gen, Lattice(1)), horizon, gen, record=False)
        speeds.append(traj.x1 / horizon)
        attempts += traj.n_attempts
    speeds = np.array(speeds)
    target = v_asym(PERC, 1.0)
    z = _z(speeds, target)

    gen = _stream(320)
    full_t = 1e6
    traj = tasym_run(WalkerParams("tasym", 0.0, 1.0, 1, DELTA1),
                     DynEnvironment(DELTA1, 1.0, gen, Lattice(1)), full_t, gen, record=False)
    every_step = traj.x1 == traj.n_attempts
    poisson = abs(traj.x1 - full_t) / math.sqrt(full_t)
    elapsed = time.perf_counter() - start
    ok = z <= 3 and every_step and poisson <= 4 and elapsed < 60
    assert report(3, ok, f"percolation speed={speeds.mean():.5f} (|z|={z:.2f}) vs {target:.5f} "
                         f"over {attempts} attempts; constant law X_t/t={traj.x1 / full_t:.5f} "
                         f"(Poisson |z|={poisson:.2f}, every attempt moved={every_step}); "
                         f"{elapsed:.1f}s")


def test_criterion_04_exponential_convergence(report):
    start = time.perf_counter()
    budget = {1.0: 100_000, 2.0: 200_000, 3.0: 200_000}
    lams, gaps, ses = [], [], []
    for i, (lam, n) in enumerate(budget.items()):
        g = asym_speed_gap(tasym_gap_cycles(lam, 1.0, ALMOST, n, _stream(40 + i)))
        lams.append(lam)
        gaps.append(g.gap)
        ses.append(g.se)
    gaps_a, ses_a = np.array(gaps), np.array(ses)
    nonneg = bool(np.all(gaps_a >= -4 * ses_a))
    decreasing = bool(np.all(np.diff(gaps_a) < 0))
    slope = float(stats.linregress(lams, np.log(np.maximum(gaps_a, 1e-300))).slope) \
        if np.all(gaps_a > 0) else math.inf
    elapsed = time.perf_counter() - start
    ok = nonneg and decreasing and slope <= -1.0 and elapsed < 600
    detail = ", ".join(f"lambda={l:g}: {g:.5f}+-{s:.5f}" for l, g, s in zip(lams, gaps, ses))
    assert report(4, ok, f"v_A - v_hat {detail}; log-slope={slope:.3f}; {elapsed:.1f}s")


def test_criterion_05_coupling_dominance(report):
    start = time.perf_counter()
    mono = dom = 0
    for i in range(1000):
        mono += coupled_monotone_d1(1.0, 0.2, 1.0, ALMOST, 100.0, _stream(5000 + i),
                                    record=False).violations
        dom += coupled_nvbrw_dominated_by_tasym(1.0, 1.0, ALMOST, 100.0, _stream(7000 + i),
                                                record=False).violations
    elapsed = time.perf_counter() - start
    ok = mono == 0 and dom == 0 and elapsed < 60
    assert report(5, ok, f"monotone violations={mono}, dominance violations={dom} "
                         f"over 1000 paths each; {elapsed:.1f}s")


def test_criterion_06_detailed_balance_torus(report):
    start = time.perf_counter()
    rep = detailed_balance_test(2, 1, 0.5, 1.0, ALMOST, 1.0, 1_000_000, _stream(6))
    cell = rep.details["1"]
    z_crit = float(stats.norm.ppf(0.995))
    elapsed = time.perf_counter() - start
    ok = cell["tested"] and abs(cell["z"]) <= z_crit and elapsed < 300
    assert report(6, ok, f"p(0,1)/p(0,-1)={cell['ratio']:.5f} vs e={math.e:.5f} "
                         f"(|z|={abs(cell['z']):.2f} <= {z_crit:.3f}); "
                         f"all cells worst |z|={rep.statistic:.2f}; {elapsed:.1f}s")


def test_criterion_07_speed_positivity(report):
    start = time.perf_counter()
    v = estimate_speed(run_cycles(WalkerParams("vbrw", 1.0, 1.0, 1, ALMOST), 100_000, _stream(71)))
    c = estimate_speed(run_cycles(WalkerParams("cbrw", 1.0, 1.0, 1, ALMOST), 100_000, _stream(72)))
    elapsed = time.perf_counter() - start
    ok = v.ci_low > 0 and c.ci_low > 0 and elapsed < 300
    assert report(7, ok, f"VBRW speed {v.point:.4f} [{v.ci_low:.4f}, {v.ci_high:.4f}]; "
                         f"CBRW speed {c.point:.4f} [{c.ci_low:.4f}, {c.ci_high:.4f}]; "
                         f"{elapsed:.1f}s")


def _step_ratio(view, s, lam):
    def prob(l):
        w = {1: view[0] * math.exp(l), -1: view[1] * math.exp(-l)}
        return w[s] / (w[1] + w[-1])
    return prob(lam) / prob(-lam)


def test_criterion_08_cbrw_symmetry_and_likelihood_ratio(report):
    start = time.perf_counter()
    sym = cbrw_symmetry_test(50, 1.0, 1.0, ALMOST, 20_000, _stream(8))

    lam = 1.0
    frozen = {x: w for x, w in zip(range(-4, 4), [0.3, 1.7, 0.9, 2.4, 0.5, 1.1, 0.2, 3.0])}
    worst = 0.0
    n_paths = 0
    for steps in itertools.product((1, -1), repeat=3):
        path = [0]
        for s in steps:
            path.append(path[-1] + s)
        views = [[frozen[x], frozen[x - 1]] for x in path[:-1]]
        expected = math.prod(_step_ratio(v, s, lam) for v, s in zip(views, steps))
        got = cbrw_path_likelihood_ratio(path, views, lam)
        worst = max(worst, abs(got - expected) / expected)
        n_paths += 1
    elapsed = time.perf_counter() - start
    ok = sym.passed and worst <= 1e-12 and elapsed < 120
    assert report(8, ok, f"|E^+ + E^-| / SE = {sym.statistic:.2f} (<= 4), "
                         f"means {sym.details['mean_plus']:.4f}/{sym.details['mean_minus']:.4f}; "
                         f"likelihood ratio max rel. error {worst:.1e} over {n_paths} paths; "
                         f"{elapsed:.1f}s")


def test_criterion_09_closed_form_identities(report):
    start = time.perf_counter()
    rows = {r["identity"]: r for r in identity_table(seed=SEED % 2 ** 32, trials=100)}
    a = rows["first == (2d-2) * alt_first_order"]
    b = rows["alt_first_order(two-point) == two_point_A"]
    c = two_point_A(0.1, 0.1)
    elapsed = time.perf_counter() - start
    ok = (a["max_abs_dev"] <= 1e-12 and b["max_abs_dev"] <= 1e-12 and c > 0
          and abs(c - 0.19 / 2.6) <= 1e-15 and elapsed < 1)
    assert report(9, ok, f"(a) max dev {a['max_abs_dev']:.1e}; (b) max dev {b['max_abs_dev']:.1e}; "
                         f"(c) two_point_A(0.1, 0.1)={c:.7f}; {elapsed:.3f}s")


def test_criterion_10_first_order_agreement(report):
    start = time.perf_counter()
    parts = []
    ok = True
    for i, lam in enumerate((3.0, 4.0)):
        est = estimate_speed(run_cycles(WalkerParams("nvbrw", lam, 1.0, 2, DELTA1), 200_000,
                                        _stream(100 + i)))
        predicted = 1 - 2 * math.exp(-lam)
        tol = max(3 * est.se, 5 * math.exp(-2 * lam))
        dev = abs(est.point - predicted)
        ok = ok and dev <= tol
        parts.append(f"lambda={lam:g}: {est.point:.5f} vs {predicted:.5f} "
                     f"(|dev|={dev:.5f} <= {tol:.5f})")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 900
    assert report(10, ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_11_birth_death(report):
    start = time.perf_counter()
    parts = []
    ok = True
    mu = 1.0
    tail_input = None
    for i, ratio in enumerate((0.5, 1.0, 2.0)):
        taus, steps = simulate_bd_returns(BDParams(ratio * mu, mu), 50_000, _stream(110 + i))
        z = _z(steps.astype(float), 2 * math.exp(ratio))
        ok = ok and z <= 3
        parts.append(f"ratio {ratio:g}: mean T={steps.mean():.4f} (|z|={z:.2f})")
        if ratio == 1.0:
            tail_input = taus
    rate, r2 = tail_exponent_fit(tail_input)
    ok = ok and rate > 0 and r2 > 0.95

    gen = np.random.default_rng(SEED)
    positive = 0
    while positive < 100:
        p, L = float(gen.uniform(0.05, 0.99)), int(gen.integers(1, 6))
        drift = -p + L * (1 - p)
        if drift >= -1e-3:
            continue
        lam_star, rate_y = ld_lambda_star(p, L, drift * float(gen.uniform(0.05, 0.95)))
        ok = ok and rate_y > 0
        positive += 1
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 120
    assert report(11, ok, "; ".join(parts) + f"; tail rate={rate:.3f}, R^2={r2:.4f}; "
                                             f"I(y) > 0 on {positive} sets; {elapsed:.1f}s")


def test_criterion_12_reweighting(report):
    start = time.perf_counter()
    base = run_cycles(WalkerParams("nvbrw", 0.0, 2.0, 1, DELTA1), 100_000, _stream(121))
    direct = run_cycles(WalkerParams("nvbrw", 0.5, 2.0, 1, DELTA1), 100_000, _stream(122))
    terms = reweighting_terms(base, 0.5)
    dx = direct.dx1.astype(float)
    se = math.hypot(terms.std(ddof=1) / math.sqrt(len(terms)), dx.std(ddof=1) / math.sqrt(len(dx)))
    diff = abs(terms.mean() - dx.mean())
    elapsed = time.perf_counter() - start
    ok = diff <= 4 * se and elapsed < 300
    assert report(12, ok, f"reweighted {terms.mean():.5f} vs direct {dx.mean():.5f} "
                          f"(|diff|/SE={diff / se:.2f} <= 4); {elapsed:.1f}s")
