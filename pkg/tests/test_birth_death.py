import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import stats

from dynwalk.birth_death import (BDParams, RWParams, ld_lambda_star, simulate_bd_return,
                                 simulate_bd_returns, simulate_rw_hitting, tail_exponent_fit)
from dynwalk.conductance_law import ConductanceLaw
from dynwalk.errors import (ConstructionError, DomainError, FitError, InsufficientSampleError,
                            StepOverflowError)
from dynwalk.regeneration import run_cycles
from dynwalk.rng import RandomStream
from dynwalk.walkers import WalkerParams


def _within(x, target, k=3.0):
    return abs(x.mean() - target) <= k * x.std(ddof=1) / math.sqrt(len(x))


def test_param_validation():
    with pytest.raises(ConstructionError):
        BDParams(0.0, 1.0)
    with pytest.raises(ConstructionError):
        BDParams(1.0, 1.0, L=0)
    with pytest.raises(DomainError):
        RWParams(0.5, 1)
    with pytest.raises(DomainError):
        RWParams(1.2, 1)
    assert RWParams(0.9, 1).drift == pytest.approx(-0.8)


def test_bd_return_means():
    taus, steps = simulate_bd_returns(BDParams(2.0, 2.0), 30_000, RandomStream(71))
    assert _within(taus, math.e / 2)
    assert _within(steps.astype(float), 2 * math.e)
    assert np.all(steps % 2 == 0)


@pytest.mark.parametrize("ratio", [0.5, 1.0, 2.0])
def test_discrete_return_mean_over_ratios(ratio):
    mu = 1.5
    _, steps = simulate_bd_returns(BDParams(ratio * mu, mu), 20_000, RandomStream(72))
    assert _within(steps.astype(float), 2 * math.exp(ratio))


def test_regeneration_infected_size_matches_bd_chain():
    lam, mu = 0.0, 2.0
    delta = ConductanceLaw.point_mass(1.0)
    batch = run_cycles(WalkerParams("vbrw", lam, mu, 1, delta), 10_000, RandomStream(73))
    taus, steps = simulate_bd_returns(BDParams(2.0, mu), 10_000, RandomStream(74))
    assert stats.ks_2samp(batch.tau, taus).pvalue > 0.01
    assert stats.ks_2samp(2 * batch.N, steps).pvalue > 0.01


def test_bd_tail_exponential_for_batch_births():
    taus, _ = simulate_bd_returns(BDParams(1.0, 1.0, L=2), 20_000, RandomStream(75))
    rate, r2 = tail_exponent_fit(taus)
    assert rate > 0 and r2 > 0.95


def test_bd_tail_single_births():
    taus, _ = simulate_bd_returns(BDParams(2.0, 2.0), 20_000, RandomStream(76))
    rate, r2 = tail_exponent_fit(taus)
    assert rate > 0 and r2 > 0.95


def test_bd_step_cap():
    with pytest.raises(StepOverflowError):
        for _ in range(100):
            simulate_bd_return(BDParams(50.0, 0.01), RandomStream(77), max_steps=20)


def test_tail_fit_on_exponential():
    x = np.random.default_rng(0).exponential(0.5, 50_000)
    rate, r2 = tail_exponent_fit(x)
    assert rate == pytest.approx(2.0, abs=0.1) and r2 > 0.99


def test_tail_fit_errors():
    with pytest.raises(FitError):
        tail_exponent_fit(np.ones(20_000))
    with pytest.raises(InsufficientSampleError):
        tail_exponent_fit(np.ones(100))


def test_ld_lambda_star_example():
    lam, rate = ld_lambda_star(0.9, 1, -0.4)
    assert lam == pytest.approx(0.5 * math.log(0.54 / 0.14), abs=1e-12)
    assert lam == pytest.approx(0.674963358474508, abs=1e-12)
    assert lam == pytest.approx(0.67497, abs=1e-4)
    assert rate == pytest.approx(0.1536635868037987, abs=1e-12)


def test_ld_lambda_star_rejects_bad_input():
    with pytest.raises(DomainError):
        ld_lambda_star(0.5, 1, -0.1)
    with pytest.raises(DomainError):
        ld_lambda_star(0.9, 1, 0.1)
    with pytest.raises(DomainError):
        ld_lambda_star(0.9, 1, -0.9)


@given(p=st.floats(0.05, 0.99), L=st.integers(1, 6), frac=st.floats(0.05, 0.95))
def test_rate_positive(p, L, frac):
    drift = -p + L * (1 - p)
    assume(drift < -1e-3)
    lam, rate = ld_lambda_star(p, L, frac * drift)
    assert lam > 0 and rate > 0


def test_hitting_time_tail_bound():
    params = RWParams(0.9, 1)
    y = params.drift / 2
    _, rate = ld_lambda_star(0.9, 1, y)
    gen = RandomStream(78)
    h = np.array([simulate_rw_hitting(params, gen) for _ in range(50_000)])
    for n in range(math.ceil(1 / abs(y)) + 1, 30):
        emp = np.mean(h >= n)
        bound = math.exp(-n * rate * 0.8)
        assert emp <= bound + 4 * math.sqrt(bound / len(h))
