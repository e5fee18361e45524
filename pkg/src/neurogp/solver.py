"""One entry point that picks the right method for a compiled program."""

from __future__ import annotations

from dataclasses import replace

from .car import CarConfig, car_solve, gap
from .duplex import DuplexConfig, solve_duplex
from .neuro_ode import IntegratorConfig, SolveReport, integrate_to_equilibrium
from .reformulate import Convexity, RobustGP, SmoothProgram, build

# first-moment programs approach equilibrium slowly; see the decision notes
NS_MAX_TIME = 1e6


def default_integrator(sp: SmoothProgram) -> IntegratorConfig:
    if sp.kind.startswith("ns"):
        return IntegratorConfig(max_time=NS_MAX_TIME)
    return IntegratorConfig()


def solve(
    p: RobustGP,
    seed: int = 0,
    integrator: IntegratorConfig | None = None,
    duplex: DuplexConfig | None = None,
) -> tuple[SmoothProgram, SolveReport, str]:
    """Compile ``p`` and solve it.

    Convex programs go to the single-timescale projection dynamics and
    biconvex ones to the duplex, whose PSO stream is seeded with ``seed``.

    Returns
    -------
    sp : SmoothProgram
    report : SolveReport
    solver : str
        ``"neuro_ode"`` or ``"duplex"``.
    """
    sp = build(p)
    if sp.convexity is Convexity.CONVEX:
        return sp, integrate_to_equilibrium(sp, None, integrator or default_integrator(sp)), "neuro_ode"
    cfg = duplex or DuplexConfig()
    return sp, solve_duplex(sp, replace(cfg, seed=seed)), "duplex"


def compare(p: RobustGP, seed: int = 0, duplex: DuplexConfig | None = None, car: CarConfig | None = None):
    """Duplex and CAR on the same biconvex instance.

    Returns ``(sp, duplex_report, car_report, gap)``.
    """
    sp = build(p)
    cfg = replace(duplex or DuplexConfig(), seed=seed)
    d = solve_duplex(sp, cfg)
    c = car_solve(sp, None, car or CarConfig())
    return sp, d, c, gap(c.objective, d.objective)
