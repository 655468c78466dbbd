"""Couplings of walkers that share clocks, direction draws and success draws.

* :func:`coupled_monotone_d1` -- two d = 1 VBRWs with biases ``lambda`` and
  ``lambda + eps`` ordered pathwise.
* :func:`coupled_nvbrw_dominated_by_tasym` -- an NVBRW below the totally
  asymmetric walk.
* :func:`coupled_bias_pair_cycles` and :func:`tasym_gap_cycles` -- coupled
  regeneration cycles: the two walkers share environment and infected set
  until their attempted directions first differ, then continue on cloned
  copies of both. Removals stay on a common clock so the two infected sets
  always have the same size and empty together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conductance_law import ConductanceLaw
from .environment import EVENT_DRIVEN, DynEnvironment, Lattice, edge_towards
from .errors import CapabilityError, CycleOverflowError, DomainError, InsufficientSampleError
from .regeneration import (MAX_INFECTED, MAX_TAU, CycleBatch, InfectedSet, RegenCycleRecord,
                           estimate_speed, ratio_estimate, run_cycles, Z99)
from .rng import RandomStream
from .walkers import NVBRW, TASYM, VBRW, Trajectory, WalkerParams, z_lambda

GOOD = "good"
BAD = "bad"
VERY_BAD = "very_bad"


@dataclass(frozen=True)
class PointRates:
    """Rates of good, bad and very bad points; they sum to ``kappa``."""

    r_g: float
    r_b: float
    r_v: float


def point_rates(lam: float, eps: float, d: int, kappa: float = 1.0) -> PointRates:
    z0, z1 = z_lambda(lam, d), z_lambda(lam + eps, d)
    return PointRates(
        kappa * math.exp(lam) / z0,
        kappa * (2 * d - 2 + math.exp(-(lam + eps))) / z1,
        kappa * (math.exp(lam + eps) / z1 - math.exp(lam) / z0),
    )


@dataclass(frozen=True)
class PointClass:
    """Classification of a shared attempt and the directions it assigns.

    ``x_dir`` belongs to the walker with bias ``lambda``, ``y_dir`` to the
    one with ``lambda + eps``.
    """

    label: str
    x_dir: int
    y_dir: int
    rates: PointRates


def bias_thresholds(lam: float, eps: float, d: int) -> tuple[float, float, float, float]:
    """Cut points of [0, 1] separating the five joint direction cases."""
    z0, z1 = z_lambda(lam, d), z_lambda(lam + eps, d)
    c1 = (2 * d - 2) / z1
    c2 = (2 * d - 2) / z0
    c3 = c2 + math.exp(-(lam + eps)) / z1
    c4 = 1.0 - math.exp(lam) / z0
    return c1, c2, c3, c4


def _transverse(frac: float, d: int) -> int:
    """Map ``frac`` in [0, 1) onto one of the 2d - 2 directions other than +-e_1."""
    k = min(int(frac * (2 * d - 2)), 2 * d - 3)
    return k + 2 if k < d - 1 else -(k - d + 3)


def _classify(u: float, cuts, d: int) -> tuple[str, int, int]:
    c1, c2, c3, c4 = cuts
    if u < c1:                       # both take the same transverse direction
        s = _transverse(u / c1, d)
        return BAD, s, s
    if u < c2:                       # x transverse, y forward
        return VERY_BAD, _transverse((u - c1) / (c2 - c1), d), 1
    if u < c3:                       # both backward
        return BAD, -1, -1
    if u < c4:                       # x backward, y forward
        return VERY_BAD, -1, 1
    return GOOD, 1, 1


def classify_point(u: float, lam: float, eps: float, d: int, kappa: float = 1.0) -> PointClass:
    if eps < 0:
        raise DomainError(f"epsilon must be >= 0, got {eps}")
    if not 0 <= u <= 1:
        raise DomainError(f"u must lie in [0, 1], got {u}")
    label, sx, sy = _classify(min(u, math.nextafter(1.0, 0.0)), bias_thresholds(lam, eps, d), d)
    return PointClass(label, sx, sy, point_rates(lam, eps, d, kappa))


@dataclass
class CoupledPair:
    traj_a: Trajectory
    traj_b: Trajectory
    shared_event_log: list[tuple[float, float, float, str]] = field(default_factory=list)
    decoupling_time: float | None = None
    violations: int = 0


def _step(pos: int, s: int, ok: bool) -> int:
    return pos + s if ok else pos


def coupled_monotone_d1(lam: float, eps: float, mu: float, law: ConductanceLaw,
                        horizon: float, rng: RandomStream, record: bool = True) -> CoupledPair:
    """Two d = 1 VBRWs with biases ``lam`` (a) and ``lam + eps`` (b), ``a <= b`` pathwise.

    One clock at rate ``kappa (e^(lam+eps) + e^-lam)`` and one ``U`` on
    ``[0, e^(lam+eps) + e^-lam)``: below ``e^lam`` both step right, up to
    ``e^(lam+eps)`` only b steps right, the next ``e^-(lam+eps)`` both step
    left, and the rest only a steps left. Success uses a shared ``V``.
    """
    if eps < 0:
        raise DomainError(f"epsilon must be >= 0, got {eps}")
    WalkerParams(VBRW, lam, mu, 1, law)
    WalkerParams(VBRW, lam + eps, mu, 1, law)
    kappa = law.kappa
    el, ele, emle = math.exp(lam), math.exp(lam + eps), math.exp(-(lam + eps))
    width = ele + math.exp(-lam)
    rate = kappa * width
    env = DynEnvironment(law, mu, rng, Lattice(1))
    query = env.conductance_at
    rand = rng.random
    ta, tb = Trajectory(1, horizon), Trajectory(1, horizon)
    pair = CoupledPair(ta, tb)
    xa = xb = 0
    t = 0.0
    if horizon > 0:
        while True:
            t -= math.log(1.0 - rand()) / rate
            if t > horizon:
                break
            u = width * rand()
            v = kappa * rand()
            if u < el:
                case, sa, sb = "both_right", 1, 1
            elif u < ele:
                case, sa, sb = "b_right", 0, 1
            elif u < ele + emle:
                case, sa, sb = "both_left", -1, -1
            else:
                case, sa, sb = "a_left", -1, 0
            if sa:
                ok = v < query(edge_towards((xa,), sa), t)
                xa = _step(xa, sa, ok)
                _count(ta, sa, ok)
                if record:
                    ta.events.append((t, (xa,), sa, ok))
            if sb:
                ok = v < query(edge_towards((xb,), sb), t)
                xb = _step(xb, sb, ok)
                _count(tb, sb, ok)
                if record:
                    tb.events.append((t, (xb,), sb, ok))
            if xa > xb:
                pair.violations += 1
            if record:
                pair.shared_event_log.append((t, u, v, case))
    ta.final_position, tb.final_position = (xa,), (xb,)
    return pair


def coupled_nvbrw_dominated_by_tasym(lam: float, mu: float, law: ConductanceLaw,
                                     horizon: float, rng: RandomStream,
                                     record: bool = True) -> CoupledPair:
    """Totally asymmetric walk (a) above an NVBRW (b) in d = 1.

    Shared rate-``kappa`` clock, shared ``V`` and environment; b reads its
    direction from ``U`` on ``[0, e^lam + e^-lam)`` while a always steps
    right.
    """
    WalkerParams(NVBRW, lam, mu, 1, law)
    kappa = law.kappa
    el = math.exp(lam)
    width = el + math.exp(-lam)
    env = DynEnvironment(law, mu, rng, Lattice(1))
    query = env.conductance_at
    rand = rng.random
    ta, tb = Trajectory(1, horizon), Trajectory(1, horizon)
    pair = CoupledPair(ta, tb)
    xa = xb = 0
    t = 0.0
    if horizon > 0:
        while True:
            t -= math.log(1.0 - rand()) / kappa
            if t > horizon:
                break
            u = width * rand()
            v = kappa * rand()
            sb = 1 if u < el else -1
            ok_a = v < query(edge_towards((xa,), 1), t)
            ok_b = v < query(edge_towards((xb,), sb), t)
            xa = _step(xa, 1, ok_a)
            xb = _step(xb, sb, ok_b)
            _count(ta, 1, ok_a)
            _count(tb, sb, ok_b)
            if record:
                ta.events.append((t, (xa,), 1, ok_a))
                tb.events.append((t, (xb,), sb, ok_b))
                pair.shared_event_log.append((t, u, v, "match" if sb == 1 else "mismatch"))
            if xa < xb:
                pair.violations += 1
    ta.final_position, tb.final_position = (xa,), (xb,)
    return pair


def _count(traj: Trajectory, s: int, ok: bool) -> None:
    traj.attempts[s] = traj.attempts.get(s, 0) + 1
    if ok:
        traj.successes[s] = traj.successes.get(s, 0) + 1


# -- coupled regeneration cycles ---------------------------------------------

class _Walker:
    __slots__ = ("pos", "N", "R", "L", "Ra", "La")

    def __init__(self, d: int):
        self.pos = [0] * d
        self.N = self.R = self.L = self.Ra = self.La = 0

    def attempt(self, env: DynEnvironment, inf: InfectedSet, s: int, v: float, t: float) -> None:
        e = edge_towards(tuple(self.pos), s)
        ok = v < env.conductance_at(e, t)
        inf.add(e, t)
        self.N += 1
        if s == 1:
            self.Ra += 1
        elif s == -1:
            self.La += 1
        if ok:
            self.pos[abs(s) - 1] += 1 if s > 0 else -1
            if s == 1:
                self.R += 1
            elif s == -1:
                self.L += 1

    def record(self, t: float) -> RegenCycleRecord:
        return RegenCycleRecord(t, tuple(self.pos), self.N, self.R, self.L, self.Ra, self.La)


Chooser = Callable[[float], tuple[str, int, int]]


def _coupled_cycle(law: ConductanceLaw, mu: float, d: int, rng: RandomStream, choose: Chooser,
                   env: DynEnvironment, inf: InfectedSet, max_infected: int, max_tau: float):
    kappa = law.kappa
    rand = rng.random
    x, y = _Walker(d), _Walker(d)
    env.clear()
    inf.clear()
    env_y = inf_y = None  # set once the walkers split
    first_split = -1
    saw_bad_before = False
    saw_very_bad = False
    t = 0.0
    while True:
        n_inf = len(inf)
        total = kappa + mu * n_inf
        t -= math.log(1.0 - rand()) / total
        if n_inf == 0 or rand() * total < kappa:
            label, sx, sy = choose(rand())
            if label == VERY_BAD:
                saw_very_bad = True
            elif label == BAD and first_split < 0:
                saw_bad_before = True
            v = kappa * rand()
            if env_y is None and sx != sy:
                first_split = x.N
                env_y = env.clone()
                inf_y = inf.clone(env_y)
            if env_y is None:
                x.attempt(env, inf, sx, v, t)
                y.N, y.R, y.L, y.Ra, y.La = x.N, x.R, x.L, x.Ra, x.La
                y.pos = list(x.pos)
            else:
                x.attempt(env, inf, sx, v, t)
                y.attempt(env_y, inf_y, sy, v, t)
            if n_inf + 1 > max_infected:
                raise CycleOverflowError(f"coupled cycle exceeded |I| <= {max_infected} (mu={mu}); mu too small")
        else:
            inf.remove_uniform(rand(), t)
            if inf_y is not None:
                inf_y.remove_uniform(rand(), t)
                if len(inf_y) != len(inf):
                    raise AssertionError("coupled infected sets lost size agreement")
            if not len(inf):
                return x.record(t), y.record(t), first_split, saw_bad_before, saw_very_bad
        if t > max_tau:
            raise CycleOverflowError(f"coupled cycle exceeded tau <= {max_tau} (mu={mu}); mu too small")


@dataclass
class CoupledCycles:
    """Paired cycle records sharing regeneration times.

    ``first_split`` is the attempt index (within the cycle) at which the
    walkers first attempted different directions, or -1.
    """

    x: CycleBatch
    y: CycleBatch
    saw_very_bad: np.ndarray
    saw_bad_before: np.ndarray
    first_split: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    @property
    def difference(self) -> np.ndarray:
        """Per-cycle ``y.dx1 - x.dx1``."""
        return self.y.dx1 - self.x.dx1


def _run_coupled(px: WalkerParams, py: WalkerParams, n: int, rng: RandomStream,
                 choose: Chooser, max_infected: int, max_tau: float) -> CoupledCycles:
    if n < 1:
        raise InsufficientSampleError(f"need at least one cycle, got {n}")
    env = DynEnvironment(px.law, px.mu, rng, Lattice(px.d), mode=EVENT_DRIVEN)
    inf = InfectedSet(env)
    rx, ry, vb, bb, fs = [], [], [], [], []
    for _ in range(n):
        a, b, split, bad, very = _coupled_cycle(px.law, px.mu, px.d, rng, choose, env, inf,
                                                max_infected, max_tau)
        rx.append(a)
        ry.append(b)
        fs.append(split)
        bb.append(bad)
        vb.append(very)
    return CoupledCycles(CycleBatch.from_records(px, rx), CycleBatch.from_records(py, ry),
                         np.array(vb), np.array(bb), np.array(fs, dtype=np.int64))


def coupled_bias_pair_cycles(lam: float, eps: float, mu: float, law: ConductanceLaw, d: int,
                             n_cycles: int, rng: RandomStream,
                             max_infected: int = MAX_INFECTED,
                             max_tau: float = MAX_TAU) -> CoupledCycles:
    """NVBRWs with biases ``lam`` (x) and ``lam + eps`` (y) coupled through good/bad/very bad points."""
    if not eps > 0:
        raise DomainError(f"epsilon must be > 0, got {eps}")
    px = WalkerParams(NVBRW, lam, mu, d, law)
    py = WalkerParams(NVBRW, lam + eps, mu, d, law)
    cuts = bias_thresholds(lam, eps, d)
    return _run_coupled(px, py, n_cycles, rng, lambda u: _classify(u, cuts, d),
                        max_infected, max_tau)


def tasym_gap_cycles(lam: float, mu: float, law: ConductanceLaw, n_cycles: int,
                     rng: RandomStream, max_infected: int = MAX_INFECTED,
                     max_tau: float = MAX_TAU) -> CoupledCycles:
    """Totally asymmetric walk (x) and d = 1 NVBRW (y) on coupled cycles."""
    px = WalkerParams(TASYM, lam, mu, 1, law)
    py = WalkerParams(NVBRW, lam, mu, 1, law)
    p_fwd = math.exp(lam) / z_lambda(lam, 1)

    def choose(u: float) -> tuple[str, int, int]:
        return (GOOD, 1, 1) if u < p_fwd else (VERY_BAD, 1, -1)

    return _run_coupled(px, py, n_cycles, rng, choose, max_infected, max_tau)


@dataclass(frozen=True)
class GapEstimate:
    gap: float
    se: float
    ci: tuple[float, float]
    n_cycles: int


def asym_speed_gap(cycles: CoupledCycles) -> GapEstimate:
    """Estimate ``v_A - v_hat`` as ``E[A_tau - Y_tau] / E[tau]`` from coupled cycles."""
    n = len(cycles)
    if n < 30:
        raise InsufficientSampleError(f"need >= 30 cycles, got {n}")
    g, se = ratio_estimate(-cycles.difference.astype(float), cycles.x.tau)
    return GapEstimate(g, se, (g - Z99 * se, g + Z99 * se), n)


def dim_reduction_gap(lam: float, mu: float, law: ConductanceLaw, d: int, n_cycles: int,
                      rng: RandomStream) -> GapEstimate:
    """``|v^1(lam, Z mu + m(2d-2)) - v(lam, Z mu)|`` from two independent VBRW runs.

    The first speed is that of a d = 1 walk, the second of the d-dimensional
    walk, with ``Z = Z_lambda`` in d dimensions.
    """
    if d < 2:
        raise CapabilityError("the dimension-reduction gap needs d >= 2")
    z = z_lambda(lam, d)
    m = law.mean()
    rx, ry = rng.spawn(2)
    one = estimate_speed(run_cycles(WalkerParams(VBRW, lam, z * mu + m * (2 * d - 2), 1, law),
                                    n_cycles, rx))
    full = estimate_speed(run_cycles(WalkerParams(VBRW, lam, z * mu, d, law), n_cycles, ry))
    gap = abs(one.point - full.point)
    se = math.hypot(one.se, full.se)
    return GapEstimate(gap, se, (max(0.0, gap - Z99 * se), gap + Z99 * se), n_cycles)
