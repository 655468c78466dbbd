import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynwalk.closed_forms import v_asym
from dynwalk.conductance_law import ConductanceLaw
from dynwalk.couplings import (BAD, GOOD, VERY_BAD, asym_speed_gap, bias_thresholds,
                               classify_point, coupled_bias_pair_cycles, coupled_monotone_d1,
                               coupled_nvbrw_dominated_by_tasym, dim_reduction_gap, point_rates,
                               tasym_gap_cycles)
from dynwalk.errors import CapabilityError, DomainError, InsufficientSampleError
from dynwalk.regeneration import estimate_speed
from dynwalk.rng import RandomStream
from dynwalk.walkers import z_lambda

DELTA1 = ConductanceLaw.point_mass(1.0)


def test_point_rates_example():
    r = point_rates(1.0, 0.0, 1)
    assert r.r_g == pytest.approx(0.8807970779778824, abs=1e-12)
    assert r.r_b == pytest.approx(0.11920292202211756, abs=1e-12)
    assert r.r_v == pytest.approx(0.0, abs=1e-15)


@given(lam=st.floats(0, 6), eps=st.floats(0, 3), d=st.integers(1, 4), kappa=st.floats(0.1, 5))
def test_point_rates_sum_to_kappa(lam, eps, d, kappa):
    r = point_rates(lam, eps, d, kappa)
    assert r.r_g + r.r_b + r.r_v == pytest.approx(kappa)
    assert min(r.r_g, r.r_b, r.r_v) >= -1e-12


@given(lam=st.floats(0, 5), eps=st.floats(0, 2), d=st.integers(1, 4))
def test_interval_lengths_and_marginals(lam, eps, d):
    c1, c2, c3, c4 = bias_thresholds(lam, eps, d)
    tol = 1e-12
    assert 0 <= c1 <= c2 + tol and c2 <= c3 + tol and c3 <= c4 + tol and c4 <= 1 + tol
    r = point_rates(lam, eps, d)
    assert 1 - c4 == pytest.approx(r.r_g, abs=1e-12)
    assert c1 + (c3 - c2) == pytest.approx(r.r_b, abs=1e-12)
    assert (c2 - c1) + (c4 - c3) == pytest.approx(r.r_v, abs=1e-12)
    z0, z1 = z_lambda(lam, d), z_lambda(lam + eps, d)
    # x uses bias lam, y uses lam + eps
    assert c4 - c2 == pytest.approx(math.exp(-lam) / z0, abs=1e-12)
    assert (c2 - c1) + (1 - c3) == pytest.approx(math.exp(lam + eps) / z1, abs=1e-12)


def test_classification_grid_frequencies():
    lam, eps, d = 0.7, 0.4, 3
    grid = (np.arange(200_000) + 0.5) / 200_000
    pts = [classify_point(u, lam, eps, d) for u in grid[::7]]
    x_dirs = np.array([p.x_dir for p in pts])
    y_dirs = np.array([p.y_dir for p in pts])
    z0, z1 = z_lambda(lam, d), z_lambda(lam + eps, d)
    for s in (2, -2, 3, -3):
        assert np.mean(x_dirs == s) == pytest.approx(1 / z0, abs=1e-3)
    assert np.mean(y_dirs == -1) == pytest.approx(math.exp(-lam - eps) / z1, abs=1e-3)
    labels = {p.label for p in pts}
    assert labels == {GOOD, BAD, VERY_BAD}
    for p in pts:
        if p.label != VERY_BAD:
            assert p.x_dir == p.y_dir


def test_classify_point_domain():
    with pytest.raises(DomainError):
        classify_point(0.5, 1.0, -0.1, 2)
    with pytest.raises(DomainError):
        classify_point(1.5, 1.0, 0.1, 2)
    assert classify_point(1.0, 1.0, 0.1, 2).label == GOOD


def test_monotone_coupling_orders_paths(elliptic):
    gen = RandomStream(51)
    for _ in range(100):
        pair = coupled_monotone_d1(1.0, 0.3, 1.0, elliptic, 100.0, gen)
        assert pair.violations == 0
        a = [e[1][0] for e in pair.traj_a.events]
        assert pair.traj_a.final_position[0] <= pair.traj_b.final_position[0]
        assert all(t[3] in ("both_right", "b_right", "both_left", "a_left")
                   for t in pair.shared_event_log)
        assert len(a) == pair.traj_a.n_attempts


def test_monotone_coupling_marginal_attempt_rate():
    gen = RandomStream(52)
    lam, eps, horizon = 1.0, 0.5, 20_000.0
    pair = coupled_monotone_d1(lam, eps, 1.0, DELTA1, horizon, gen, record=False)
    for traj, z in ((pair.traj_a, z_lambda(lam, 1)), (pair.traj_b, z_lambda(lam + eps, 1))):
        assert abs(traj.n_attempts - z * horizon) <= 4 * math.sqrt(z * horizon)


def test_monotone_coupling_rejects_negative_eps(elliptic, rng):
    with pytest.raises(DomainError):
        coupled_monotone_d1(1.0, -0.1, 1.0, elliptic, 10.0, rng)


def test_tasym_dominates_nvbrw(percolation):
    gen = RandomStream(53)
    for _ in range(100):
        pair = coupled_nvbrw_dominated_by_tasym(1.0, 1.0, percolation, 100.0, gen)
        assert pair.violations == 0


def test_mismatch_fraction():
    gen = RandomStream(54)
    pair = coupled_nvbrw_dominated_by_tasym(2.0, 1.0, DELTA1, 100_000.0, gen)
    frac = np.mean([c == "mismatch" for *_, c in pair.shared_event_log])
    p = math.exp(-2) / (math.exp(2) + math.exp(-2))
    assert p == pytest.approx(0.01798620996209156, abs=1e-12)
    n = len(pair.shared_event_log)
    assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_full_conductance_gap_is_twice_left_successes(rng):
    pair = coupled_nvbrw_dominated_by_tasym(0.5, 1.0, DELTA1, 500.0, rng)
    a, y = pair.traj_a.x1, pair.traj_b.x1
    assert a - y == 2 * pair.traj_b.L


def test_bias_pair_identical_without_very_bad_points(elliptic):
    gen = RandomStream(55)
    cyc = coupled_bias_pair_cycles(1.0, 0.3, 1.0, elliptic, 2, 3000, gen)
    calm = ~cyc.saw_very_bad
    assert calm.any() and cyc.saw_very_bad.any()
    assert np.all(cyc.difference[calm] == 0)
    assert np.all(cyc.first_split[calm] == -1)
    assert np.all(cyc.first_split[cyc.saw_very_bad] >= 0)
    assert np.array_equal(cyc.x.tau, cyc.y.tau)


def test_bias_pair_monotone_for_large_mu(elliptic):
    gen = RandomStream(56)
    cyc = coupled_bias_pair_cycles(1.0, 0.5, 50.0, elliptic, 2, 20_000, gen)
    diff = cyc.difference.astype(float)
    assert diff.mean() + 4 * diff.std(ddof=1) / math.sqrt(len(diff)) >= 0


def test_bias_pair_rejects_zero_eps(elliptic, rng):
    with pytest.raises(DomainError):
        coupled_bias_pair_cycles(1.0, 0.0, 1.0, elliptic, 2, 10, rng)


def test_tasym_gap_marginals(elliptic):
    gen = RandomStream(57)
    cyc = tasym_gap_cycles(1.0, 1.0, elliptic, 20_000, gen)
    est = estimate_speed(cyc.x)
    target = v_asym(elliptic, 1.0)
    assert abs(est.point - target) <= 4 * est.se
    gap = asym_speed_gap(cyc)
    assert gap.gap > 0 and gap.ci[0] <= gap.gap <= gap.ci[1]


def test_tasym_gap_constant_conductance():
    # v_A = 1 and the d = 1 NVBRW moves at tanh(lambda)
    gen = RandomStream(58)
    gap = asym_speed_gap(tasym_gap_cycles(1.0, 1.0, DELTA1, 20_000, gen))
    assert abs(gap.gap - (1 - math.tanh(1.0))) <= 4 * gap.se


def test_gap_needs_samples(elliptic, rng):
    with pytest.raises(InsufficientSampleError):
        asym_speed_gap(tasym_gap_cycles(1.0, 1.0, elliptic, 10, rng))


def test_dim_reduction_gap_basic(rng):
    with pytest.raises(CapabilityError):
        dim_reduction_gap(2.0, 1.0, DELTA1, 1, 100, rng)
    g = dim_reduction_gap(2.0, 1.0, DELTA1, 2, 500, rng)
    assert g.gap >= 0 and g.se > 0 and g.ci[0] <= g.gap <= g.ci[1]
