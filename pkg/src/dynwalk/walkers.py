"""Biased random walks on dynamical conductances.

Four dynamics are provided, all as exact event-driven samplers:

* ``vbrw``  -- attempts at rate ``kappa * Z_lambda``; the direction is read
  off a uniform ``U`` on ``[0, Z_lambda]`` and the attempt succeeds iff an
  independent ``V`` uniform on ``[0, kappa]`` falls below the conductance.
* ``nvbrw`` -- the same, attempting at rate ``kappa``.
* ``cbrw``  -- jumps at rate 1 to a neighbour chosen proportionally to the
  tilted conductances ``exp(lambda * (y - x) . e_1) * w(x, y)``.
* ``totally_asymmetric`` -- d = 1, attempts +e_1 only, at rate ``kappa``.

Directions are signed 1-based axes: ``+1`` is e_1, ``-2`` is -e_2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping

from .conductance_law import ConductanceLaw
from .environment import DynEnvironment, Edge, edge_towards
from .errors import CapabilityError, DomainError
from .rng import RandomStream

VBRW = "vbrw"
NVBRW = "nvbrw"
CBRW = "cbrw"
TASYM = "totally_asymmetric"
KINDS = (VBRW, NVBRW, CBRW, TASYM)
_ALIASES = {"tasym": TASYM}


def z_lambda(lam: float, d: int) -> float:
    """Total direction weight ``2d - 2 + e^lam + e^-lam``."""
    return 2 * d - 2 + math.exp(lam) + math.exp(-lam)


@dataclass(frozen=True)
class WalkerParams:
    kind: str
    lam: float
    mu: float
    d: int
    law: ConductanceLaw

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise CapabilityError(f"unknown walker kind {self.kind!r}")
        if not self.mu > 0:
            raise CapabilityError(f"refresh rate mu must be positive, got {self.mu}")
        if self.d < 1:
            raise CapabilityError(f"dimension must be >= 1, got {self.d}")
        flags = self.law.validate()
        if kind in (VBRW, NVBRW):
            if not flags.bounded_support:
                raise CapabilityError(f"{kind.upper()} requires conductances bounded by kappa")
            if self.lam < 0:
                raise CapabilityError(f"{kind.upper()} is only defined for lambda >= 0")
        elif kind == CBRW:
            if not flags.zero_free:
                raise CapabilityError(
                    "CBRW requires q({0}) = 0: the walker must always be able to jump")
            if not flags.log_moment_finite:
                raise CapabilityError("CBRW requires E|log w| < infinity")
        elif kind == TASYM and self.d != 1:
            raise CapabilityError("the totally asymmetric walk is defined for d = 1 only")

    @property
    def kappa(self) -> float:
        return self.law.kappa

    @property
    def z(self) -> float:
        return z_lambda(self.lam, self.d)

    @property
    def attempt_rate(self) -> float:
        """Rate of the Poisson clock that drives the walker."""
        if self.kind == VBRW:
            return self.kappa * self.z
        if self.kind == CBRW:
            return 1.0
        return self.kappa


def attempt_direction(u: float, lam: float, d: int) -> int:
    """Signed axis attempted for a direction variable ``u`` in ``[0, Z_lambda]``.

    ``[i-2, i-1)`` gives +e_i and ``[d+i-3, d+i-2)`` gives -e_i for
    ``i = 2..d``; ``[2d-2, 2d-2+e^lam)`` gives +e_1 and the rest -e_1.
    """
    z = z_lambda(lam, d)
    if not 0 <= u <= z:
        raise DomainError(f"direction variable {u} outside [0, {z}]")
    return _direction(u, math.exp(lam), d)


def _direction(u: float, e_lam: float, d: int) -> int:
    side = 2 * d - 2
    if u < side:
        k = int(u)
        if k < d - 1:
            return k + 2
        return -(k - d + 3)
    if u < side + e_lam:
        return 1
    return -1


def total_jump_rate(view: Mapping[int, float], lam: float) -> float:
    """Sum of tilted conductances ``sum_y w^lam(x, y)`` over the 2d neighbours.

    ``view`` maps each signed axis to the conductance of the edge in that
    direction.
    """
    el, eml = math.exp(lam), math.exp(-lam)
    total = 0.0
    for s, w in view.items():
        total += w * (el if s == 1 else eml if s == -1 else 1.0)
    return total


@dataclass
class Trajectory:
    """Event-stamped path of a walker started at the origin at time 0."""

    d: int
    horizon: float
    events: list[tuple[float, tuple[int, ...], int, bool]] = field(default_factory=list)
    final_position: tuple[int, ...] = ()
    attempts: dict[int, int] = field(default_factory=dict)
    successes: dict[int, int] = field(default_factory=dict)

    @property
    def n_attempts(self) -> int:
        return sum(self.attempts.values())

    @property
    def R(self) -> int:
        return self.successes.get(1, 0)

    @property
    def L(self) -> int:
        return self.successes.get(-1, 0)

    @property
    def R_a(self) -> int:
        return self.attempts.get(1, 0)

    @property
    def L_a(self) -> int:
        return self.attempts.get(-1, 0)

    @property
    def x1(self) -> int:
        return self.final_position[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", *(f"x{i + 1}" for i in range(self.d)), "attempt_axis", "success"])
        for t, pos, s, ok in self.events:
            w.writerow([repr(t), *pos, s, int(ok)])
        return buf.getvalue()


def _empty(d: int, horizon: float) -> Trajectory:
    return Trajectory(d, horizon, final_position=(0,) * d)


def _attempt_walk(params: WalkerParams, env: DynEnvironment, horizon: float,
                  rng: RandomStream, rate: float, record: bool) -> Trajectory:
    d = params.d
    traj = _empty(d, horizon)
    if horizon <= 0:
        return traj
    rand = rng.random
    kappa = params.kappa
    z = params.z
    e_lam = math.exp(params.lam)
    query = env.conductance_at
    forward_only = params.kind == TASYM
    attempts: dict[int, int] = {}
    successes: dict[int, int] = {}
    events = traj.events
    pos = (0,) * d
    t = 0.0
    while True:
        t -= math.log(1.0 - rand()) / rate
        if t > horizon:
            break
        s = 1 if forward_only else _direction(z * rand(), e_lam, d)
        w = query(edge_towards(pos, s), t)
        ok = kappa * rand() < w
        attempts[s] = attempts.get(s, 0) + 1
        if ok:
            successes[s] = successes.get(s, 0) + 1
            k = abs(s) - 1
            pos = pos[:k] + (pos[k] + (1 if s > 0 else -1),) + pos[k + 1:]
        if record:
            events.append((t, pos, s, ok))
    traj.final_position = pos
    traj.attempts = attempts
    traj.successes = successes
    return traj


def vbrw_run(params: WalkerParams, env: DynEnvironment, horizon: float,
             rng: RandomStream, record: bool = True) -> Trajectory:
    _require(params, VBRW)
    return _attempt_walk(params, env, horizon, rng, params.kappa * params.z, record)


def nvbrw_run(params: WalkerParams, env: DynEnvironment, horizon: float,
              rng: RandomStream, record: bool = True) -> Trajectory:
    _require(params, NVBRW)
    return _attempt_walk(params, env, horizon, rng, params.kappa, record)


def tasym_run(params: WalkerParams, env: DynEnvironment, horizon: float,
              rng: RandomStream, record: bool = True) -> Trajectory:
    _require(params, TASYM)
    return _attempt_walk(params, env, horizon, rng, params.kappa, record)


def cbrw_choose(view: list[float], lam: float, u: float) -> int:
    """Pick the neighbour for a CBRW jump from a uniform ``u``.

    ``view`` lists the conductances in the order +e_1, -e_1, +e_2, -e_2, ...
    """
    el, eml = math.exp(lam), math.exp(-lam)
    weights = [view[0] * el, view[1] * eml, *view[2:]]
    target = u * sum(weights)
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if target < acc:
            return _index_to_dir(i)
    # u * W rounded up to W: take the last direction with positive weight
    for i in range(len(weights) - 1, -1, -1):
        if weights[i] > 0:
            return _index_to_dir(i)
    raise DomainError("all incident conductances are zero")


def _index_to_dir(i: int) -> int:
    axis = i // 2 + 1
    return axis if i % 2 == 0 else -axis


def incident_edges(pos: tuple[int, ...], d: int) -> list[Edge]:
    """Edges at ``pos`` in the order +e_1, -e_1, +e_2, -e_2, ..."""
    out = []
    for a in range(1, d + 1):
        out.append(edge_towards(pos, a))
        out.append(edge_towards(pos, -a))
    return out


def cbrw_run(params: WalkerParams, env: DynEnvironment, horizon: float,
             rng: RandomStream, record: bool = True) -> Trajectory:
    _require(params, CBRW)
    d = params.d
    traj = _empty(d, horizon)
    if horizon <= 0:
        return traj
    rand = rng.random
    query = env.conductance_at
    lam = params.lam
    attempts: dict[int, int] = {}
    pos = (0,) * d
    t = 0.0
    while True:
        t -= math.log(1.0 - rand())
        if t > horizon:
            break
        view = [query(e, t) for e in incident_edges(pos, d)]
        s = cbrw_choose(view, lam, rand())
        attempts[s] = attempts.get(s, 0) + 1
        k = abs(s) - 1
        pos = pos[:k] + (pos[k] + (1 if s > 0 else -1),) + pos[k + 1:]
        if record:
            traj.events.append((t, pos, s, True))
    traj.final_position = pos
    traj.attempts = attempts
    traj.successes = dict(attempts)
    return traj


def cbrw_position_after(params: WalkerParams, env: DynEnvironment, n_jumps: int,
                        rng: RandomStream) -> tuple[int, ...]:
    """Position of a CBRW after its ``n_jumps``-th jump (the discrete skeleton ``X_n``)."""
    _require(params, CBRW)
    d = params.d
    rand = rng.random
    query = env.conductance_at
    lam = params.lam
    pos = (0,) * d
    t = 0.0
    for _ in range(n_jumps):
        t -= math.log(1.0 - rand())
        s = cbrw_choose([query(e, t) for e in incident_edges(pos, d)], lam, rand())
        k = abs(s) - 1
        pos = pos[:k] + (pos[k] + (1 if s > 0 else -1),) + pos[k + 1:]
    return pos


_RUNNERS = {VBRW: vbrw_run, NVBRW: nvbrw_run, CBRW: cbrw_run, TASYM: tasym_run}


def run(params: WalkerParams, env: DynEnvironment, horizon: float,
        rng: RandomStream, record: bool = True) -> Trajectory:
    """Dispatch to the sampler matching ``params.kind``."""
    return _RUNNERS[params.kind](params, env, horizon, rng, record)


def _require(params: WalkerParams, kind: str) -> None:
    if params.kind != kind:
        raise CapabilityError(f"expected a {kind} walker, got {params.kind}")
