"""Statistical checks of structural properties of the walks.

Every check returns a :class:`TestReport`; significance is 99% throughout,
Bonferroni-corrected where several cells are tested at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .conductance_law import ConductanceLaw
from .environment import DynEnvironment, Lattice, Torus, Edge
from .errors import AssumptionViolation, DomainError, InsufficientSampleError
from .regeneration import estimate_speed, run_cycles
from .rng import RandomStream
from .walkers import CBRW, VBRW, WalkerParams, cbrw_position_after, vbrw_run

ALPHA = 0.01


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    name: str
    statistic: float
    threshold: float
    passed: bool
    n_samples: int
    notes: str = ""
    applicable: bool = True
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "statistic": self.statistic, "threshold": self.threshold,
                "passed": self.passed, "applicable": self.applicable,
                "n_samples": self.n_samples, "notes": self.notes, "details": self.details}


@dataclass(frozen=True)
class BiasMeasure:
    """Reversible measure ``x -> exp(2 lambda x_1)`` of the biased walk on a periodic environment."""

    lam: float

    def evaluation(self, x: Sequence[int] | int) -> float:
        x1 = x if isinstance(x, (int, np.integer)) else x[0]
        return math.exp(2 * self.lam * x1)

    __call__ = evaluation


def _db_cells(d: int, reach: int = 3) -> list[tuple[int, ...]]:
    """Displacements ``x`` with ``0 < |x|_1 <= reach``, one of each ``{x, -x}`` pair."""
    cells = []
    for x in itertools.product(range(-reach, reach + 1), repeat=d):
        l1 = sum(map(abs, x))
        if 0 < l1 <= reach and next(c for c in x if c != 0) > 0:
            cells.append(x)
    return cells


def detailed_balance_test(M: int, d: int, lam: float, mu: float, law: ConductanceLaw,
                          t: float, n_samples: int, rng: RandomStream) -> TestReport:
    """Check ``p_t(0, x) = exp(2 lambda x_1) p_t(0, -x)`` for a VBRW in a periodic environment.

    Each run starts at 0 in a fresh stationary environment on the torus of
    half-width ``M`` (read periodically on Z^d). For every tested cell the
    log count ratio is compared with ``2 lambda x_1``; its variance uses the
    multinomial delta method.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    params = WalkerParams(VBRW, lam, mu, d, law)
    env = DynEnvironment(law, mu, rng, Torus(d, M))
    counts: dict[tuple[int, ...], int] = {}
    for _ in range(n_samples):
        env.clear()
        x = vbrw_run(params, env, t, rng, record=False).final_position
        counts[x] = counts.get(x, 0) + 1

    cells = _db_cells(d)
    crit = float(stats.norm.ppf(1 - ALPHA / (2 * len(cells))))
    n = n_samples
    worst = 0.0
    rows = {}
    warnings = []
    for x in cells:
        neg = tuple(-c for c in x)
        cp, cm = counts.get(x, 0), counts.get(neg, 0)
        target = 2 * lam * x[0]
        key = ",".join(map(str, x))
        if min(cp, cm) < 20:
            warnings.append(key)
            rows[key] = {"count_x": cp, "count_minus_x": cm, "target_ratio": math.exp(target),
                         "tested": False}
            continue
        est = math.log(cp / cm)
        var = (1 - cp / n) / cp + (1 - cm / n) / cm + 2 / n
        z = (est - target) / math.sqrt(var)
        worst = max(worst, abs(z))
        rows[key] = {"count_x": cp, "count_minus_x": cm, "ratio": cp / cm,
                     "target_ratio": math.exp(target), "z": z, "tested": True}
    notes = f"low power (expected count < 20) for cells: {', '.join(warnings)}" if warnings else ""
    return TestReport("detailed_balance", worst, crit, worst <= crit, n_samples, notes,
                      details=rows)


def stationarity_test(mu: float, law: ConductanceLaw, t: float, n_replicas: int,
                      rng: RandomStream, n_edges: int = 3) -> TestReport:
    """Chi-square test that the joint law of ``n_edges`` edges at time ``t`` is the product of ``q``.

    Each replica realises the edges at time 0 and reads them again at ``t``.
    Continuous laws are binned into quartiles.
    """
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if law.is_discrete:
        values = [v for v, _ in law.atoms]
        probs = [p for _, p in law.atoms]
        classify = {v: i for i, v in enumerate(values)}.__getitem__
    else:
        probs = [0.25] * 4
        lo, w = law.lo, law.hi - law.lo
        classify = lambda v: min(int(4 * (v - lo) / w), 3)  # noqa: E731
    k = len(probs)
    edges = [Edge((i,), 1) for i in range(n_edges)]
    env = DynEnvironment(law, mu, rng, Lattice(1))
    table = np.zeros(k ** n_edges)
    for _ in range(n_replicas):
        env.clear()
        for e in edges:
            env.conductance_at(e, 0.0)
        idx = 0
        for e in edges:
            idx = idx * k + classify(env.conductance_at(e, t))
        table[idx] += 1
    expected = np.array([math.prod(c) for c in itertools.product(probs, repeat=n_edges)])
    expected *= n_replicas
    keep = expected > 0
    chi2 = float(((table[keep] - expected[keep]) ** 2 / expected[keep]).sum())
    df = int(keep.sum()) - 1
    crit = float(stats.chi2.ppf(1 - ALPHA, df)) if df > 0 else 0.0
    low = int((expected[keep] < 5).sum())
    notes = f"{low} cells with expected count < 5" if low else ""
    return TestReport("stationarity", chi2, crit, chi2 <= crit, n_replicas, notes,
                      details={"df": df, "cells": int(keep.sum())})


def cbrw_path_likelihood_ratio(path: Sequence, env_at_jumps: Sequence[Sequence[float]],
                               lam: float) -> float:
    """``dP^lam / dP^-lam`` of a CBRW jump path given the conductances seen at each jump.

    ``path`` lists the ``n + 1`` visited sites (ints in d = 1, or tuples);
    ``env_at_jumps[k]`` lists the 2d conductances around ``path[k]`` in the
    order +e_1, -e_1, +e_2, -e_2, ...
    """
    sites = [(p,) if isinstance(p, (int, np.integer)) else tuple(p) for p in path]
    if len(env_at_jumps) != len(sites) - 1:
        raise DomainError("need one conductance view per jump")
    for a, b in zip(sites, sites[1:]):
        if sum(abs(u - v) for u, v in zip(a, b)) != 1:
            raise DomainError(f"path step {a} -> {b} is not nearest-neighbour")
    el, eml = math.exp(lam), math.exp(-lam)
    log_ratio = 2 * lam * (sites[-1][0] - sites[0][0])
    for view in env_at_jumps:
        if any(w <= 0 for w in view):
            raise AssumptionViolation("zero conductance in a view: the ratio is undefined")
        rest = math.fsum(view[2:])
        w_minus = eml * view[0] + el * view[1] + rest
        w_plus = el * view[0] + eml * view[1] + rest
        log_ratio += math.log(w_minus) - math.log(w_plus)
    return math.exp(log_ratio)


def cbrw_displacements(lam: float, mu: float, law: ConductanceLaw, n_steps: int,
                       n_samples: int, rng: RandomStream, d: int = 1) -> np.ndarray:
    """``X_n . e_1`` over independent CBRW runs in fresh environments."""
    params = WalkerParams(CBRW, lam, mu, d, law)
    env = DynEnvironment(law, mu, rng, Lattice(d))
    out = np.empty(n_samples, dtype=np.int64)
    for i in range(n_samples):
        env.clear()
        out[i] = cbrw_position_after(params, env, n_steps, rng)[0]
    return out


def cbrw_symmetry_test(n_steps: int, lam: float, mu: float, law: ConductanceLaw,
                       n_samples: int, rng: RandomStream, d: int = 1) -> TestReport:
    """``E^lam[X_n . e_1] + E^-lam[X_n . e_1] = 0`` within 4 combined standard errors."""
    if n_samples < 30:
        raise InsufficientSampleError(f"symmetry test needs >= 30 samples, got {n_samples}")
    plus = cbrw_displacements(lam, mu, law, n_steps, n_samples, rng, d)
    minus = cbrw_displacements(-lam, mu, law, n_steps, n_samples, rng, d)
    mp, mm = float(plus.mean()), float(minus.mean())
    se = math.hypot(plus.std(ddof=1), minus.std(ddof=1)) / math.sqrt(n_samples)
    stat = abs(mp + mm) / se if se > 0 else (0.0 if mp + mm == 0 else math.inf)
    return TestReport("cbrw_symmetry", stat, 4.0, stat <= 4.0, n_samples,
                      details={"mean_plus": mp, "mean_minus": mm, "se_sum": se})


def speed_positivity_test(kind: str, lam: float, mu: float, law: ConductanceLaw,
                          n_cycles: int, rng: RandomStream, d: int = 1) -> TestReport:
    """Lower end of the 99% speed interval must be positive."""
    name = f"speed_positivity_{kind}"
    if lam == 0:
        return TestReport(name, 0.0, 0.0, True, 0, "not applicable at lambda = 0",
                          applicable=False)
    params = WalkerParams(kind, lam, mu, d, law)
    est = estimate_speed(run_cycles(params, n_cycles, rng))
    return TestReport(name, est.ci_low, 0.0, est.ci_low > 0, n_cycles,
                      details=est.as_dict())
