"""Analytic speed and regeneration formulas used as simulation oracles.

Notation: ``a = E[1/(mu+w)]`` and ``b = E[w/(mu+w)]`` under the conductance
law, ``m = E[w]``. The totally asymmetric speed is ``v_A = b / a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conductance_law import ConductanceLaw, MomentFunctional as MF
from .errors import DomainError
from .walkers import z_lambda as _z


def z_lambda(lam: float, d: int) -> float:
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return _z(lam, d)


def vbrw_regen_moments(lam: float, mu: float, kappa: float, d: int,
                       normalized: bool = False) -> tuple[float, float]:
    """Expected cycle length and attempt count ``(E[tau], E[N])``.

    The infected-set size is a birth-death chain with birth rate equal to the
    attempt rate ``alpha`` (``kappa * Z_lambda``, or ``kappa`` for the
    normalized walk) and death rate ``mu * i``; then ``E[N] = exp(alpha/mu)``
    and ``E[tau] = E[N] / alpha``.
    """
    if not (mu > 0 and kappa > 0):
        raise DomainError("mu and kappa must be positive")
    alpha = kappa if normalized else kappa * z_lambda(lam, d)
    en = math.exp(alpha / mu)
    return en / alpha, en


def bd_discrete_return_mean(rate_ratio: float) -> float:
    """Mean return time to 0 of the jump chain of the infected-set size: ``2 exp(ratio)``."""
    if not rate_ratio > 0:
        raise DomainError(f"rate ratio must be positive, got {rate_ratio}")
    return 2.0 * math.exp(rate_ratio)


def _ab(law: ConductanceLaw, mu: float) -> tuple[float, float]:
    return law.moment(MF.INV1, mu), law.moment(MF.RATIO, mu)


def v_asym(law: ConductanceLaw, mu: float) -> float:
    """Speed of the totally asymmetric walk, ``E[w/(mu+w)] / E[1/(mu+w)]``."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    a, b = _ab(law, mu)
    return b / a


def _second_term(law: ConductanceLaw, mu: float) -> float:
    # [E[w(w-m)/(mu+w)^2] a - E[(w-m)/(mu+w)^2] b] / a^2
    a, b = _ab(law, mu)
    c1 = law.moment(MF.CENTERED_RATIO2, mu)
    c2 = law.moment(MF.CENTERED_INV2, mu)
    return (c1 * a - c2 * b) / (a * a)


@dataclass(frozen=True)
class AsymptoticCoefficients:
    """``v_hat(lambda) = zeroth + first * exp(-lambda) + O(exp(-2 lambda))``."""

    zeroth: float
    first: float
    delta: float | None = None  # (2d-2)/Z_lambda at the requested lambda

    def predict(self, lam: float) -> float:
        return self.zeroth + self.first * math.exp(-lam)


def nvbrw_expansion(law: ConductanceLaw, mu: float, d: int,
                    lam: float | None = None) -> AsymptoticCoefficients:
    """Large-bias expansion of the normalized walk's speed to first order in ``e^-lambda``."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    a, b = _ab(law, mu)
    first = (2 * d - 2) * (_second_term(law, mu) - b / a)
    delta = None if lam is None else (2 * d - 2) / z_lambda(lam, d)
    return AsymptoticCoefficients(b / a, first, delta)


def alt_first_order(law: ConductanceLaw, mu: float) -> float:
    """First-order coefficient per transverse direction, in the ``(m + mu)`` form.

    Equal to ``nvbrw_expansion(law, mu, d).first / (2d - 2)``.
    """
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    a, b = _ab(law, mu)
    m = law.mean()
    i2 = law.moment(MF.INV2, mu)
    r2 = law.moment(MF.RATIO2, mu)
    return (m + mu) * (i2 * b - r2 * a) / (a * a) - b / a


def two_point_A(mu: float, alpha: float) -> float:
    """``alt_first_order`` for the law ``(delta_alpha + delta_1)/2`` in closed form."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    return (alpha ** 2 - (2 * mu + 6) * alpha + 1 - 2 * mu) / (2 * (2 * mu + 1 + alpha))


def vbrw_expansion(law: ConductanceLaw, mu: float, d: int, lam: float) -> float:
    """Two leading terms of ``v(lambda, Z_lambda mu)``, dropping ``O(e^-lambda)``."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    return math.exp(lam) * v_asym(law, mu) + (2 * d - 2) * _second_term(law, mu)


def random_law(rng: np.random.Generator) -> ConductanceLaw:
    """Random finite law on (0, 1] with two or three atoms, for identity checks."""
    k = int(rng.integers(2, 4))
    values = rng.uniform(0.01, 1.0, size=k)
    probs = rng.dirichlet(np.ones(k))
    return ConductanceLaw.discrete(values.tolist(), probs.tolist(), kappa=1.0)


def identity_table(seed: int = 0, trials: int = 100, tol: float = 1e-12) -> list[dict]:
    """Maximum deviations of the algebraic identities tying the formulas together."""
    rng = np.random.default_rng(seed)
    rep, spec_, mom = 0.0, 0.0, 0.0
    for _ in range(trials):
        law = random_law(rng)
        mu = float(rng.uniform(0.01, 10.0))
        d = int(rng.integers(2, 5))
        first = nvbrw_expansion(law, mu, d).first
        rep = max(rep, abs(first - (2 * d - 2) * alt_first_order(law, mu)))

        alpha = float(rng.uniform(0.0, 1.0))
        mu2 = float(rng.uniform(0.01, 10.0))
        two = ConductanceLaw.two_point(alpha, 1.0, 0.5, kappa=1.0)
        spec_ = max(spec_, abs(alt_first_order(two, mu2) - two_point_A(mu2, alpha)))

        mom = max(mom, abs(law.moment(MF.RATIO, mu) + mu * law.moment(MF.INV1, mu) - 1.0))
    tau, en = vbrw_regen_moments(0.0, 2.0, 1.0, 1)
    rows = [
        ("first == (2d-2) * alt_first_order", rep, tol),
        ("alt_first_order(two-point) == two_point_A", spec_, tol),
        ("E[w/(mu+w)] + mu E[1/(mu+w)] == 1", mom, tol),
        ("E[tau] * kappa Z == E[N]", abs(tau * 2.0 - en), tol),
        ("bd_discrete_return_mean == 2 E[N]", abs(bd_discrete_return_mean(1.0) - 2 * en), tol),
    ]
    out = [{"identity": name, "max_abs_dev": dev, "tolerance": t, "passed": dev <= t}
           for name, dev, t in rows]
    a01 = two_point_A(0.1, 0.1)
    out.append({"identity": "two_point_A(0.1, 0.1) > 0", "max_abs_dev": a01,
                "tolerance": 0.0, "passed": a01 > 0})
    return out
