"""Lazily realised dynamical conductances on Z^d or on a periodic torus.

Only edges that a walker has looked at are stored. Between looks an edge
refreshes at the points of a rate-``mu`` Poisson process, so the value at a
later time is the old value with probability ``exp(-mu * dt)`` and a fresh
draw otherwise; that single keep/redraw decision replaces the skipped
refresh events.

In ``event_driven`` mode an edge can additionally be *pinned*: while its
first infected copy is alive it does not refresh on its own clock and is
resampled only through :meth:`DynEnvironment.force_refresh`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .conductance_law import ConductanceLaw
from .errors import ClockRegressionError, ConstructionError, ModeViolationError
from .rng import RandomStream

MEMORYLESS_LAZY = "memoryless_lazy"
EVENT_DRIVEN = "event_driven"


class Edge(NamedTuple):
    """Nearest-neighbour edge from ``site`` to ``site + e_axis`` (axis is 1-based)."""

    site: tuple[int, ...]
    axis: int


def edge_towards(site: tuple[int, ...], direction: int) -> Edge:
    """Edge crossed by a step from ``site`` in signed axis direction ``direction``."""
    if direction > 0:
        return Edge(site, direction)
    k = -direction - 1
    return Edge(site[:k] + (site[k] - 1,) + site[k + 1:], -direction)


@dataclass(frozen=True)
class Lattice:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ConstructionError(f"dimension must be >= 1, got {self.d}")

    @property
    def periodic(self) -> bool:
        return False

    def canonical(self, e: Edge) -> Edge:
        return e


@dataclass(frozen=True)
class Torus:
    """Torus ``[-M, M]^d`` seen as a periodic environment on Z^d (period 2M+1)."""

    d: int
    M: int

    def __post_init__(self):
        if self.d < 1:
            raise ConstructionError(f"dimension must be >= 1, got {self.d}")
        if self.M < 2:
            raise ConstructionError(f"torus half-width M must be >= 2, got {self.M}")

    @property
    def periodic(self) -> bool:
        return True

    @property
    def period(self) -> int:
        return 2 * self.M + 1

    def reduce(self, x: int) -> int:
        return (x + self.M) % (2 * self.M + 1) - self.M

    def canonical(self, e: Edge) -> Edge:
        return Edge(tuple(self.reduce(x) for x in e.site), e.axis)


Geometry = Lattice | Torus


def canonical_edge(geometry: Geometry, e: Edge) -> Edge:
    return geometry.canonical(e)


class DynEnvironment:
    """Time-evolving conductance field, realised on demand.

    ``realized`` maps canonical edges to ``[value, last_known_time]``.
    Query times for a given edge must be non-decreasing.
    """

    def __init__(self, law: ConductanceLaw, mu: float, rng: RandomStream,
                 geometry: Geometry | None = None, mode: str = MEMORYLESS_LAZY):
        if not mu > 0:
            raise ConstructionError(f"refresh rate mu must be positive, got {mu}")
        if mode not in (MEMORYLESS_LAZY, EVENT_DRIVEN):
            raise ConstructionError(f"unknown environment mode {mode!r}")
        self.law = law
        self.mu = float(mu)
        self.rng = rng
        self.geometry = geometry if geometry is not None else Lattice(1)
        self.mode = mode
        self.realized: dict[Edge, list[float]] = {}
        self.pinned: set[Edge] = set()
        self._draw = law.sampler(rng)
        self._canon = None if isinstance(self.geometry, Lattice) else self.geometry.canonical

    def __len__(self) -> int:
        return len(self.realized)

    def conductance_at(self, e: Edge, t: float) -> float:
        if self._canon is not None:
            e = self._canon(e)
        st = self.realized.get(e)
        if st is None:
            v = self._draw()
            self.realized[e] = [v, t]
            return v
        v, t0 = st
        if t < t0:
            raise ClockRegressionError(f"edge {e} queried at t={t} < last known time {t0}")
        if t > t0:
            if e not in self.pinned and self.rng.random() >= math.exp(-self.mu * (t - t0)):
                v = self._draw()
                st[0] = v
            st[1] = t
        return v

    def pin(self, e: Edge, t: float) -> float:
        """Bring ``e`` up to time ``t`` and freeze it until the next forced refresh."""
        if self.mode != EVENT_DRIVEN:
            raise ModeViolationError("pin() requires an event_driven environment")
        v = self.conductance_at(e, t)
        if self._canon is not None:
            e = self._canon(e)
        self.pinned.add(e)
        return v

    def force_refresh(self, e: Edge, t: float) -> float:
        """Resample ``e`` from the law at time ``t`` and release it to its own clock."""
        if self.mode != EVENT_DRIVEN:
            raise ModeViolationError("force_refresh() requires an event_driven environment")
        if self._canon is not None:
            e = self._canon(e)
        st = self.realized.get(e)
        if st is not None and t < st[1]:
            raise ClockRegressionError(f"edge {e} refreshed at t={t} < last known time {st[1]}")
        v = self._draw()
        self.realized[e] = [v, t]
        self.pinned.discard(e)
        return v

    def clear(self) -> None:
        """Forget every realised edge; later looks see fresh stationary draws."""
        self.realized.clear()
        self.pinned.clear()

    def clone(self) -> "DynEnvironment":
        """Independent copy of the current state, drawing from the same stream."""
        other = DynEnvironment(self.law, self.mu, self.rng, self.geometry, self.mode)
        other.realized = {e: list(st) for e, st in self.realized.items()}
        other.pinned = set(self.pinned)
        return other

    def sweep(self, center: tuple[int, ...], radius: int) -> int:
        """Drop unpinned edges farther than ``radius`` (sup norm) from ``center``.

        Only safe when the dropped edges are never queried again. Returns the
        number of edges removed.
        """
        stale = [e for e in self.realized
                 if e not in self.pinned
                 and max(abs(a - b) for a, b in zip(e.site, center)) > radius]
        for e in stale:
            del self.realized[e]
        return len(stale)


def conductance_at(env: DynEnvironment, e: Edge, t: float) -> float:
    return env.conductance_at(e, t)


def force_refresh(env: DynEnvironment, e: Edge, t: float) -> float:
    return env.force_refresh(e, t)
