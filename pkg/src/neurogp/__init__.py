"""Distributionally robust geometric programs with joint chance constraints.

Uncertain posynomial constraints under moment ambiguity are compiled into
smooth log-space programs and solved by integrating projection dynamics to
equilibrium. Biconvex compilations go through a two-network search guided
by particle swarm moves.
"""

from .bench import make_box3d, make_multishape, make_sinr
from .car import CarConfig, car_solve, gap
from .duplex import DuplexConfig, solve_duplex
from .gp_core import AmbiguityKind, AmbiguityParams, GPError, PosynomialBlock
from .neuro_ode import (
    DynamicsError,
    IntegratorConfig,
    SolveReport,
    Status,
    integrate_to_equilibrium,
    kkt_residual,
    solve_batch,
)
from .reformulate import Convexity, Coupling, RobustGP, SmoothProgram, build
from .robustness import Distribution, ScenarioConfig, count_violations, moment_match
from .solver import compare, solve

__version__ = "0.1.0"

__all__ = [
    "AmbiguityKind",
    "AmbiguityParams",
    "CarConfig",
    "Convexity",
    "Coupling",
    "Distribution",
    "DuplexConfig",
    "DynamicsError",
    "GPError",
    "IntegratorConfig",
    "PosynomialBlock",
    "RobustGP",
    "ScenarioConfig",
    "SmoothProgram",
    "SolveReport",
    "Status",
    "build",
    "car_solve",
    "compare",
    "count_violations",
    "gap",
    "integrate_to_equilibrium",
    "kkt_residual",
    "make_box3d",
    "make_multishape",
    "make_sinr",
    "moment_match",
    "solve",
    "solve_batch",
    "solve_duplex",
]
