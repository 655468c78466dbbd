"""Single-edge conductance distributions and their moment functionals."""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from scipy import integrate

from .errors import AssumptionViolation, ConstructionError
from .rng import RandomStream

FINITE_DISCRETE = "finite_discrete"
UNIFORM_INTERVAL = "uniform_interval"

_PROB_TOL = 1e-12


class MomentFunctional(str, enum.Enum):
    """Integrands ``f(omega; mu, m)`` whose expectation under the law is needed."""

    INV1 = "inv1"                        # 1/(mu+w)
    RATIO = "ratio"                      # w/(mu+w)
    INV2 = "inv2"                        # 1/(mu+w)^2
    RATIO2 = "ratio2"                    # w/(mu+w)^2
    CENTERED_RATIO2 = "centered_ratio2"  # w(w-m)/(mu+w)^2
    CENTERED_INV2 = "centered_inv2"      # (w-m)/(mu+w)^2
    MEAN = "mean"                        # w
    ABSLOG = "abslog"                    # |log w|


def _integrand(f: MomentFunctional, mu: float, m: float) -> Callable[[float], float]:
    if f is MomentFunctional.INV1:
        return lambda w: 1.0 / (mu + w)
    if f is MomentFunctional.RATIO:
        return lambda w: w / (mu + w)
    if f is MomentFunctional.INV2:
        return lambda w: 1.0 / (mu + w) ** 2
    if f is MomentFunctional.RATIO2:
        return lambda w: w / (mu + w) ** 2
    if f is MomentFunctional.CENTERED_RATIO2:
        return lambda w: w * (w - m) / (mu + w) ** 2
    if f is MomentFunctional.CENTERED_INV2:
        return lambda w: (w - m) / (mu + w) ** 2
    if f is MomentFunctional.MEAN:
        return lambda w: w
    if f is MomentFunctional.ABSLOG:
        return lambda w: abs(math.log(w))
    raise ValueError(f"unknown moment functional {f!r}")


@dataclass(frozen=True)
class CapabilityFlags:
    bounded_support: bool
    uniformly_elliptic: bool
    zero_free: bool
    log_moment_finite: bool

    def as_dict(self) -> dict:
        return {
            "bounded_support": self.bounded_support,
            "uniformly_elliptic": self.uniformly_elliptic,
            "zero_free": self.zero_free,
            "log_moment_finite": self.log_moment_finite,
        }


@dataclass(frozen=True)
class ConductanceLaw:
    """Law ``q`` of a single edge conductance, with declared support bound ``kappa``.

    Either a finite discrete law (``atoms`` is a tuple of ``(value, prob)``)
    or the uniform law on ``[lo, hi]``. Build instances through the
    classmethods rather than the raw constructor.
    """

    kind: str
    kappa: float
    atoms: tuple[tuple[float, float], ...] = ()
    lo: float = 0.0
    hi: float = 0.0
    _cum: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ConstructionError(f"kappa must be a positive finite number, got {self.kappa}")
        if self.kind == FINITE_DISCRETE:
            if not self.atoms:
                raise ConstructionError("a discrete law needs at least one atom")
            total = 0.0
            for v, p in self.atoms:
                if v < 0:
                    raise ConstructionError(f"negative conductance value {v}")
                if v > self.kappa:
                    raise ConstructionError(f"atom {v} exceeds the support bound kappa={self.kappa}")
                if not 0 < p <= 1:
                    raise ConstructionError(f"atom probability {p} not in (0, 1]")
                total += p
            if abs(total - 1.0) > _PROB_TOL:
                raise ConstructionError(f"atom probabilities sum to {total!r}, not 1")
            if all(v == 0 for v, _ in self.atoms):
                raise ConstructionError("the law must not be the point mass at 0")
            cum, acc = [], 0.0
            for _, p in self.atoms:
                acc += p
                cum.append(acc)
            object.__setattr__(self, "_cum", tuple(cum))
        elif self.kind == UNIFORM_INTERVAL:
            if self.lo < 0:
                raise ConstructionError(f"negative lower end {self.lo}")
            if not self.hi > self.lo:
                raise ConstructionError(f"need hi > lo, got [{self.lo}, {self.hi}]")
            if self.hi > self.kappa:
                raise ConstructionError(f"upper end {self.hi} exceeds kappa={self.kappa}")
        else:
            raise ConstructionError(f"unknown law kind {self.kind!r}")

    # -- constructors -------------------------------------------------------
    @classmethod
    def discrete(cls, values: Sequence[float], probs: Sequence[float],
                 kappa: float | None = None) -> "ConductanceLaw":
        if len(values) != len(probs):
            raise ConstructionError("values and probs differ in length")
        merged: dict[float, float] = {}
        for v, p in zip(values, probs):
            v, p = float(v), float(p)
            if p == 0:
                continue
            merged[v] = merged.get(v, 0.0) + p
        atoms = tuple(sorted(merged.items()))
        if kappa is None:
            kappa = max((v for v, _ in atoms), default=0.0)
        return cls(FINITE_DISCRETE, float(kappa), atoms=atoms)

    @classmethod
    def two_point(cls, a: float, b: float, p: float = 0.5,
                  kappa: float | None = None) -> "ConductanceLaw":
        """``p * delta_a + (1 - p) * delta_b``."""
        return cls.discrete([a, b], [p, 1.0 - p], kappa)

    @classmethod
    def point_mass(cls, value: float, kappa: float | None = None) -> "ConductanceLaw":
        return cls.discrete([value], [1.0], kappa)

    @classmethod
    def uniform(cls, lo: float, hi: float, kappa: float | None = None) -> "ConductanceLaw":
        return cls(UNIFORM_INTERVAL, float(hi if kappa is None else kappa),
                   lo=float(lo), hi=float(hi))

    # -- basic properties -----------------------------------------------------
    @property
    def is_discrete(self) -> bool:
        return self.kind == FINITE_DISCRETE

    @property
    def support_min(self) -> float:
        return self.atoms[0][0] if self.is_discrete else self.lo

    @property
    def support_max(self) -> float:
        return self.atoms[-1][0] if self.is_discrete else self.hi

    @property
    def prob_zero(self) -> float:
        if self.is_discrete:
            return sum(p for v, p in self.atoms if v == 0)
        return 0.0

    def mean(self) -> float:
        return self.moment(MomentFunctional.MEAN, 1.0)

    # -- sampling ---------------------------------------------------------------
    def from_uniform(self, u: float) -> float:
        """Inverse-CDF transform of a uniform draw ``u`` in [0, 1)."""
        if self.kind == UNIFORM_INTERVAL:
            return self.lo + (self.hi - self.lo) * u
        cum = self._cum
        i = bisect.bisect_right(cum, u)
        if i >= len(cum):
            i = len(cum) - 1
        return self.atoms[i][0]

    def sample(self, rng: RandomStream) -> float:
        return self.from_uniform(rng.random())

    def sampler(self, rng: RandomStream) -> Callable[[], float]:
        """Zero-argument draw function specialised for the law, for hot loops."""
        rand = rng.random
        if self.kind == UNIFORM_INTERVAL:
            lo, width = self.lo, self.hi - self.lo
            return lambda: lo + width * rand()
        if len(self.atoms) == 1:
            v = self.atoms[0][0]
            return lambda: v
        if len(self.atoms) == 2:
            (a, pa), (b, _) = self.atoms
            return lambda: a if rand() < pa else b
        return lambda: self.from_uniform(rand())

    # -- moments ----------------------------------------------------------------
    def moment(self, f: MomentFunctional | str, mu: float) -> float:
        f = MomentFunctional(f)
        if f is not MomentFunctional.MEAN and not mu > 0:
            raise ValueError(f"mu must be positive, got {mu}")
        if f is MomentFunctional.ABSLOG and self.prob_zero > 0:
            raise AssumptionViolation(
                "E|log w| is infinite: the law has an atom at 0 (CBRW needs q({0}) = 0)")
        m = 0.0
        if f in (MomentFunctional.CENTERED_RATIO2, MomentFunctional.CENTERED_INV2):
            m = self.moment(MomentFunctional.MEAN, mu)
        g = _integrand(f, mu, m)
        if self.is_discrete:
            return math.fsum(p * g(v) for v, p in self.atoms)
        width = self.hi - self.lo
        points = [1.0] if f is MomentFunctional.ABSLOG and self.lo < 1.0 < self.hi else None
        val, _ = integrate.quad(g, self.lo, self.hi, epsabs=1e-10 * width, epsrel=1e-12,
                                limit=200, points=points)
        return val / width

    def validate(self) -> CapabilityFlags:
        zero_free = self.prob_zero == 0
        return CapabilityFlags(
            bounded_support=self.support_max <= self.kappa,
            uniformly_elliptic=self.support_min > 0,
            zero_free=zero_free,
            # E|log w| < inf for every uniform law (int_0^1 |log x| dx = 1)
            log_moment_finite=zero_free,
        )

    def describe(self) -> dict:
        if self.is_discrete:
            return {"kind": self.kind, "values": [v for v, _ in self.atoms],
                    "probs": [p for _, p in self.atoms], "kappa": self.kappa}
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "kappa": self.kappa}


def sample(law: ConductanceLaw, rng: RandomStream) -> float:
    return law.sample(rng)


def moment(law: ConductanceLaw, f: MomentFunctional | str, mu: float) -> float:
    return law.moment(f, mu)


def validate(law: ConductanceLaw) -> CapabilityFlags:
    return law.validate()


def law_from_mapping(entries: dict) -> ConductanceLaw:
    """Build a law from a config table such as
    ``{kind = "two_point", a = 0.1, b = 1.0, p = 0.5, kappa = 1.0}``."""
    entries = dict(entries)
    kind = entries.pop("kind", None)
    kappa = entries.pop("kappa", None)
    try:
        if kind == "two_point":
            law = ConductanceLaw.two_point(entries.pop("a"), entries.pop("b"), entries.pop("p", 0.5), kappa)
        elif kind in ("point", "point_mass"):
            law = ConductanceLaw.point_mass(entries.pop("value"), kappa)
        elif kind in ("uniform", UNIFORM_INTERVAL):
            law = ConductanceLaw.uniform(entries.pop("lo"), entries.pop("hi"), kappa)
        elif kind in ("discrete", FINITE_DISCRETE):
            law = ConductanceLaw.discrete(entries.pop("values"), entries.pop("probs"), kappa)
        else:
            raise ConstructionError(f"unknown law kind {kind!r}")
    except KeyError as exc:
        raise ConstructionError(f"law of kind {kind!r} is missing key {exc.args[0]!r}") from None
    if entries:
        raise ConstructionError(f"unknown law key(s): {', '.join(sorted(entries))}")
    return law


def parse_law(text: str, kappa: float | None = None) -> ConductanceLaw:
    """Parse the compact command-line form of a law.

    ``two_point:0,1:0.5`` (values, probability of the first), ``point:1``,
    ``uniform:0.2,1`` and ``discrete:0.1,0.5,1:0.2,0.3,0.5``.
    """
    kind, _, rest = text.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "two_point":
            a, b = (float(x) for x in parts[0].split(","))
            p = float(parts[1]) if len(parts) > 1 else 0.5
            return ConductanceLaw.two_point(a, b, p, kappa)
        if kind == "point":
            return ConductanceLaw.point_mass(float(parts[0]), kappa)
        if kind == "uniform":
            lo, hi = (float(x) for x in parts[0].split(","))
            return ConductanceLaw.uniform(lo, hi, kappa)
        if kind == "discrete":
            values = [float(x) for x in parts[0].split(",")]
            probs = [float(x) for x in parts[1].split(",")]
            return ConductanceLaw.discrete(values, probs, kappa)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ConstructionError):
            raise
        raise ConstructionError(f"cannot parse law {text!r}: {exc}") from None
    raise ConstructionError(f"unknown law kind in {text!r}")
