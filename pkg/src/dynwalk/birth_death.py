"""Batch-birth / linear-death chains and the drifted walk bounding their excursions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConstructionError, DomainError, FitError, InsufficientSampleError, StepOverflowError
from .rng import RandomStream

MAX_STEPS = 10 ** 8
MIN_FIT_SAMPLES = 10_000


@dataclass(frozen=True)
class BDParams:
    """Chain on {0, 1, ...} jumping ``i -> i + L`` at rate ``alpha`` and ``i -> i - 1`` at rate ``mu * i``."""

    alpha: float
    mu: float
    L: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConstructionError(f"alpha must be positive, got {self.alpha}")
        if not self.mu > 0:
            raise ConstructionError(f"mu must be positive, got {self.mu}")
        if int(self.L) != self.L or self.L < 1:
            raise ConstructionError(f"L must be an integer >= 1, got {self.L}")


@dataclass(frozen=True)
class RWParams:
    """Walk with steps ``-1`` (probability ``p``) and ``+L`` otherwise; needs negative drift."""

    p: float
    L: int = 1

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if int(self.L) != self.L or self.L < 1:
            raise DomainError(f"L must be an integer >= 1, got {self.L}")
        if self.drift >= 0:
            raise DomainError(f"drift {self.drift} must be negative")

    @property
    def drift(self) -> float:
        return -self.p + self.L * (1 - self.p)


def simulate_bd_return(params: BDParams, rng: RandomStream,
                       max_steps: int = MAX_STEPS) -> tuple[float, int]:
    """First return to 0 after leaving it: ``(tau, T)``.

    ``tau`` includes the initial holding time at 0; ``T`` counts jumps of
    the embedded chain.
    """
    rand = rng.random
    alpha, mu, L = params.alpha, params.mu, params.L
    t = -math.log(1.0 - rand()) / alpha
    a = L
    steps = 1
    while a:
        total = alpha + mu * a
        t -= math.log(1.0 - rand()) / total
        if rand() * total < alpha:
            a += L
        else:
            a -= 1
        steps += 1
        if steps > max_steps:
            raise StepOverflowError(f"no return to 0 within {max_steps} steps "
                                    f"(alpha={alpha}, mu={mu}, L={L})")
    return t, steps


def simulate_bd_returns(params: BDParams, n: int, rng: RandomStream) -> tuple[np.ndarray, np.ndarray]:
    taus = np.empty(n)
    steps = np.empty(n, dtype=np.int64)
    for i in range(n):
        taus[i], steps[i] = simulate_bd_return(params, rng)
    return taus, steps


def tail_exponent_fit(samples) -> tuple[float, float]:
    """Exponential tail rate from the log empirical survival function.

    Least squares over the order statistics between the 50% and 99%
    quantiles; returns ``(rate, r_squared)`` with ``rate = -slope``.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < MIN_FIT_SAMPLES:
        raise InsufficientSampleError(f"tail fit needs >= {MIN_FIT_SAMPLES} samples, got {n}")
    if np.any(x <= 0):
        raise FitError("samples must be positive")
    surv = 1.0 - np.arange(1, n + 1) / (n + 1)
    sel = slice(int(0.5 * n), int(0.99 * n))
    xs, ys = x[sel], np.log(surv[sel])
    if np.ptp(xs) == 0:
        raise FitError("degenerate samples: no spread over the fitted quantile range")
    fit = stats.linregress(xs, ys)
    return float(-fit.slope), float(fit.rvalue ** 2)


def ld_lambda_star(p: float, L: int, y: float) -> tuple[float, float]:
    """Tilt ``lambda*`` and rate ``I(y) = lambda* y - log E[exp(lambda* xi)]``.

    ``lambda*`` maximises ``lambda y - log E[exp(lambda xi)]``, so ``I(y)``
    is the Cramer rate of the step law at ``y``.
    """
    rw = RWParams(p, L)
    if not rw.drift < y < 0:
        raise DomainError(f"y must lie strictly between the drift {rw.drift} and 0, got {y}")
    arg = p * (1 + y) / ((L - y) * (1 - p))
    if not arg > 0:
        raise DomainError(f"log argument {arg} is not positive")
    lam = math.log(arg) / (L + 1)
    rate = lam * y - math.log(p * math.exp(-lam) + (1 - p) * math.exp(L * lam))
    if not rate > 0:
        raise DomainError(f"rate I(y) = {rate} is not positive")
    return lam, rate


def simulate_rw_hitting(params: RWParams, rng: RandomStream, max_steps: int = MAX_STEPS) -> int:
    """``H = inf{n : X_n - X_0 = -L}`` for the drifted walk."""
    rand = rng.random
    p, L = params.p, params.L
    x = 0
    n = 0
    while x != -L:
        x += -1 if rand() < p else L
        n += 1
        if n > max_steps:
            raise StepOverflowError(f"walk did not reach -{L} within {max_steps} steps")
    return n
