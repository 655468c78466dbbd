"""Event-driven simulation and analytic formulas for biased random walks on dynamical conductances."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .closed_forms import v_asym
from .conductance_law import ConductanceLaw, MomentFunctional
from .environment import DynEnvironment, Edge, Lattice, Torus
from .regeneration import CycleBatch, SpeedEstimate, estimate_speed, run_cycles
from .rng import RandomStream
from .walkers import Trajectory, WalkerParams

__all__ = [
    "ConductanceLaw", "MomentFunctional", "DynEnvironment", "Edge", "Lattice", "Torus",
    "CycleBatch", "SpeedEstimate", "estimate_speed", "run_cycles", "RandomStream",
    "Trajectory", "WalkerParams", "v_asym", "__version__",
]
