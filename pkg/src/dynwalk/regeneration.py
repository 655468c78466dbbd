"""Regeneration cycles built from the infected set, and speed estimators.

Every attempt adds one copy of the attempted edge to the infected set (a
CBRW jump adds one copy of each of the 2d incident edges). Copies die at
total rate ``mu * |I|``, a uniformly chosen one at a time. An edge holding
its first copy is frozen and is resampled exactly when that copy dies; all
other edges follow their own rate-``mu`` clocks. The instants at which the
infected set empties are regeneration times, so the cycles between them
are i.i.d.

Because each edge examined during a cycle has been refreshed by the time
the cycle closes, the environment is simply forgotten between cycles.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .environment import EVENT_DRIVEN, DynEnvironment, Edge, Lattice, edge_towards
from .errors import CycleOverflowError, InsufficientSampleError, MisuseError
from .rng import RandomStream
from .walkers import CBRW, NVBRW, TASYM, WalkerParams, _direction, cbrw_choose, incident_edges

MAX_INFECTED = 1_000_000
MAX_TAU = 1e9
MIN_CYCLES = 30
Z99 = float(stats.norm.ppf(0.995))


class RegenCycleRecord(NamedTuple):
    tau: float
    displacement: tuple[int, ...]
    N: int
    R: int
    L: int
    R_a: int
    L_a: int


class InfectedSet:
    """Multiset of edge copies tied to an event-driven environment.

    A new copy of ``e`` takes the smallest index not currently alive. When
    copy 1 is created the edge is pinned; when copy 1 dies it is refreshed.
    """

    __slots__ = ("env", "copies", "live")

    def __init__(self, env: DynEnvironment):
        self.env = env
        self.copies: list[tuple[Edge, int]] = []
        self.live: dict[Edge, set[int]] = {}

    def __len__(self) -> int:
        return len(self.copies)

    def add(self, e: Edge, t: float) -> int:
        s = self.live.get(e)
        if s is None:
            s = self.live[e] = set()
        j = 1
        while j in s:
            j += 1
        s.add(j)
        self.copies.append((e, j))
        if j == 1:
            self.env.pin(e, t)
        return j

    def remove_at(self, i: int, t: float) -> tuple[Edge, int]:
        copies = self.copies
        e, j = copies[i]
        copies[i] = copies[-1]
        copies.pop()
        s = self.live[e]
        s.discard(j)
        if not s:
            del self.live[e]
        if j == 1:
            self.env.force_refresh(e, t)
        return e, j

    def remove_uniform(self, u: float, t: float) -> tuple[Edge, int]:
        n = len(self.copies)
        i = int(u * n)
        return self.remove_at(i if i < n else n - 1, t)

    def clone(self, env: DynEnvironment) -> "InfectedSet":
        other = InfectedSet(env)
        other.copies = list(self.copies)
        other.live = {e: set(s) for e, s in self.live.items()}
        return other

    def clear(self) -> None:
        self.copies.clear()
        self.live.clear()


@dataclass
class CycleBatch(Sequence[RegenCycleRecord]):
    """Columnar store of regeneration cycles generated under ``params``."""

    params: WalkerParams
    tau: np.ndarray
    displacement: np.ndarray  # shape (n, d)
    N: np.ndarray
    R: np.ndarray
    L: np.ndarray
    R_a: np.ndarray
    L_a: np.ndarray

    def __len__(self) -> int:
        return len(self.tau)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return CycleBatch(self.params, self.tau[i], self.displacement[i], self.N[i],
                              self.R[i], self.L[i], self.R_a[i], self.L_a[i])
        return RegenCycleRecord(float(self.tau[i]), tuple(int(x) for x in self.displacement[i]),
                                int(self.N[i]), int(self.R[i]), int(self.L[i]),
                                int(self.R_a[i]), int(self.L_a[i]))

    @property
    def dx1(self) -> np.ndarray:
        return self.displacement[:, 0]

    @classmethod
    def from_records(cls, params: WalkerParams,
                     records: Iterable[RegenCycleRecord]) -> "CycleBatch":
        rows = list(records)
        d = params.d
        return cls(
            params,
            np.array([r.tau for r in rows], dtype=float),
            np.array([r.displacement for r in rows], dtype=np.int64).reshape(len(rows), d),
            *(np.array([getattr(r, k) for r in rows], dtype=np.int64)
              for k in ("N", "R", "L", "R_a", "L_a")),
        )

    @classmethod
    def concat(cls, batches: Sequence["CycleBatch"]) -> "CycleBatch":
        if not batches:
            raise InsufficientSampleError("nothing to concatenate")
        p = batches[0].params
        for b in batches[1:]:
            if b.params != p:
                raise MisuseError("cannot merge cycle batches generated under different parameters")
        return cls(p, *(np.concatenate([getattr(b, k) for b in batches])
                        for k in ("tau", "displacement", "N", "R", "L", "R_a", "L_a")))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.displacement.shape[1]
        w.writerow(["cycle", "tau", *(f"dx{i + 1}" for i in range(d)), "N", "R", "L", "Ra", "La"])
        for i in range(len(self)):
            w.writerow([i, repr(float(self.tau[i])), *self.displacement[i].tolist(),
                        int(self.N[i]), int(self.R[i]), int(self.L[i]),
                        int(self.R_a[i]), int(self.L_a[i])])
        return buf.getvalue()


def _overflow(params: WalkerParams, what: str) -> CycleOverflowError:
    return CycleOverflowError(
        f"regeneration cycle exceeded the {what} cap (kind={params.kind}, lambda={params.lam}, "
        f"mu={params.mu}, kappa={params.kappa}, d={params.d}); mu is likely too small "
        f"relative to the attempt rate")


def _attempt_cycle(params: WalkerParams, env: DynEnvironment, inf: InfectedSet,
                   rng: RandomStream, max_infected: int, max_tau: float) -> RegenCycleRecord:
    d = params.d
    rand = rng.random
    a = params.attempt_rate
    mu = params.mu
    kappa = params.kappa
    z = params.z
    e_lam = math.exp(params.lam)
    forward_only = params.kind == TASYM
    query = env.conductance_at
    copies = inf.copies
    pos = [0] * d
    t = 0.0
    N = R = L = Ra = La = 0
    while True:
        n_inf = len(copies)
        total = a + mu * n_inf
        t -= math.log(1.0 - rand()) / total
        if n_inf == 0 or rand() * total < a:
            s = 1 if forward_only else _direction(z * rand(), e_lam, d)
            e = edge_towards(tuple(pos), s)
            ok = kappa * rand() < query(e, t)
            inf.add(e, t)
            N += 1
            if s == 1:
                Ra += 1
            elif s == -1:
                La += 1
            if ok:
                if s > 0:
                    pos[s - 1] += 1
                    if s == 1:
                        R += 1
                else:
                    pos[-s - 1] -= 1
                    if s == -1:
                        L += 1
            if n_inf + 1 > max_infected:
                raise _overflow(params, f"|I| <= {max_infected}")
        else:
            inf.remove_uniform(rand(), t)
            if not copies:
                return RegenCycleRecord(t, tuple(pos), N, R, L, Ra, La)
        if t > max_tau:
            raise _overflow(params, f"tau <= {max_tau}")


def _cbrw_cycle(params: WalkerParams, env: DynEnvironment, inf: InfectedSet,
                rng: RandomStream, max_infected: int, max_tau: float) -> RegenCycleRecord:
    d = params.d
    rand = rng.random
    mu = params.mu
    lam = params.lam
    query = env.conductance_at
    copies = inf.copies
    pos = (0,) * d
    t = 0.0
    N = R = L = 0
    while True:
        n_inf = len(copies)
        total = 1.0 + mu * n_inf
        t -= math.log(1.0 - rand()) / total
        if n_inf == 0 or rand() * total < 1.0:
            edges = incident_edges(pos, d)
            view = [query(e, t) for e in edges]
            for e in edges:
                inf.add(e, t)
            s = cbrw_choose(view, lam, rand())
            N += 1
            if s == 1:
                R += 1
            elif s == -1:
                L += 1
            k = abs(s) - 1
            pos = pos[:k] + (pos[k] + (1 if s > 0 else -1),) + pos[k + 1:]
            if n_inf + 2 * d > max_infected:
                raise _overflow(params, f"|I| <= {max_infected}")
        else:
            inf.remove_uniform(rand(), t)
            if not copies:
                return RegenCycleRecord(t, pos, N, R, L, R, L)
        if t > max_tau:
            raise _overflow(params, f"tau <= {max_tau}")


def run_cycles(params: WalkerParams, n: int, rng: RandomStream,
               max_infected: int = MAX_INFECTED, max_tau: float = MAX_TAU) -> CycleBatch:
    """Simulate ``n`` consecutive regeneration cycles of the walker."""
    if n < 1:
        raise InsufficientSampleError(f"need at least one cycle, got {n}")
    env = DynEnvironment(params.law, params.mu, rng, Lattice(params.d), mode=EVENT_DRIVEN)
    inf = InfectedSet(env)
    step = _cbrw_cycle if params.kind == CBRW else _attempt_cycle
    rows = []
    for _ in range(n):
        env.clear()
        inf.clear()
        rows.append(step(params, env, inf, rng, max_infected, max_tau))
    return CycleBatch.from_records(params, rows)


def run_cycles_replicated(params: WalkerParams, n: int, seed: int, replicas: int = 1,
                          **caps) -> CycleBatch:
    """Split ``n`` cycles over ``replicas`` independent streams and merge."""
    replicas = max(1, int(replicas))
    sizes = [n // replicas + (1 if r < n % replicas else 0) for r in range(replicas)]
    batches = [run_cycles(params, k, RandomStream.for_replica(seed, r), **caps)
               for r, k in enumerate(sizes) if k > 0]
    return CycleBatch.concat(batches)


@dataclass(frozen=True)
class SpeedEstimate:
    """Ratio estimate ``sum dx1 / sum tau`` with 99% intervals.

    ``ci_low``/``ci_high`` come from the delta method unless the centred
    cycle residuals are strongly skewed, in which case the 20-batch
    interval is used; both are always reported.
    """

    point: float
    ci_low: float
    ci_high: float
    se: float
    n_cycles: int
    mean_tau: float
    mean_tau_ci: tuple[float, float]
    mean_N: float
    mean_N_ci: tuple[float, float]
    method: str
    delta_ci: tuple[float, float]
    batch_ci: tuple[float, float] | None
    skewness: float

    def as_dict(self) -> dict:
        return {
            "point": self.point, "ci_low": self.ci_low, "ci_high": self.ci_high,
            "se": self.se, "n_cycles": self.n_cycles,
            "mean_tau": self.mean_tau, "mean_tau_ci": list(self.mean_tau_ci),
            "mean_N": self.mean_N, "mean_N_ci": list(self.mean_N_ci),
            "method": self.method, "delta_ci": list(self.delta_ci),
            "batch_ci": None if self.batch_ci is None else list(self.batch_ci),
            "skewness": self.skewness,
        }


SKEW_LIMIT = 3.0
N_BATCHES = 20


def _mean_ci(x: np.ndarray) -> tuple[float, tuple[float, float]]:
    m = float(x.mean())
    h = float(Z99) * float(x.std(ddof=1)) / math.sqrt(len(x))
    return m, (m - h, m + h)


def ratio_estimate(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    """Ratio of means and its delta-method standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = len(num)
    r = float(num.sum() / den.sum())
    resid = num - r * den
    se = float(resid.std(ddof=1)) / (math.sqrt(n) * float(den.mean()))
    return r, se


def estimate_speed(records: CycleBatch) -> SpeedEstimate:
    n = len(records)
    if n < MIN_CYCLES:
        raise InsufficientSampleError(f"speed estimation needs >= {MIN_CYCLES} cycles, got {n}")
    dx = records.dx1.astype(float)
    tau = records.tau
    r, se = ratio_estimate(dx, tau)
    delta_ci = (r - Z99 * se, r + Z99 * se)
    resid = dx - r * tau
    sd = resid.std()
    skew = float(((resid - resid.mean()) ** 3).mean() / sd ** 3) if sd > 0 else 0.0

    batch_ci = None
    if n >= 2 * N_BATCHES:
        edges = np.linspace(0, n, N_BATCHES + 1).astype(int)
        ratios = np.array([dx[a:b].sum() / tau[a:b].sum() for a, b in zip(edges, edges[1:])])
        h = float(stats.t.ppf(0.995, N_BATCHES - 1) * ratios.std(ddof=1)) / math.sqrt(N_BATCHES)
        batch_ci = (r - h, r + h)

    method, (lo, hi) = "delta", delta_ci
    if abs(skew) > SKEW_LIMIT and batch_ci is not None:
        method, (lo, hi) = "batch", batch_ci
    mt, mt_ci = _mean_ci(tau)
    mn, mn_ci = _mean_ci(records.N.astype(float))
    return SpeedEstimate(r, min(lo, r), max(hi, r), se, n, mt, mt_ci, mn, mn_ci,
                         method, delta_ci, batch_ci, skew)


def reweighting_terms(records: CycleBatch, lambda_target: float) -> np.ndarray:
    """Per-cycle terms ``(R - L) exp(lambda (R_a - L_a)) (2d / Z_lambda)^N``.

    Their mean estimates the expected cycle displacement at bias
    ``lambda_target`` from NVBRW cycles simulated without bias.
    """
    p = records.params
    if p.kind != NVBRW or p.lam != 0:
        raise MisuseError(
            f"reweighting needs NVBRW records at lambda = 0, got {p.kind} at lambda = {p.lam}")
    d = p.d
    z = 2 * d - 2 + math.exp(lambda_target) + math.exp(-lambda_target)
    log_w = lambda_target * (records.R_a - records.L_a) + records.N * math.log(2 * d / z)
    return (records.R - records.L) * np.exp(log_w)


def reweighted_displacement(records_at_lambda0: CycleBatch, lambda_target: float) -> float:
    return float(reweighting_terms(records_at_lambda0, lambda_target).mean())


def lag1_autocorrelation(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    den = float(x @ x)
    return float(x[:-1] @ x[1:]) / den if den > 0 else 0.0


__all__ = [
    "RegenCycleRecord", "InfectedSet", "CycleBatch", "SpeedEstimate",
    "run_cycles", "run_cycles_replicated", "estimate_speed", "ratio_estimate",
    "reweighting_terms", "reweighted_displacement", "lag1_autocorrelation",
    "MAX_INFECTED", "MAX_TAU",
]
