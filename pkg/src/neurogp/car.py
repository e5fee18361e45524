"""Alternating convex search baseline for biconvex programs.

The objective does not depend on ``y``, so the ``y`` step instead minimizes
the largest ``y``-dependent constraint value (an LP, since those rows are
linear in ``y``). That widens the feasible region of the next ``z`` step and
can never lose feasibility of the current ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .duplex import Y_MARGIN
from .gp_core import GPError
from .neuro_ode import (
    DynamicsError,
    IntegratorConfig,
    NeuroState,
    SolveReport,
    Status,
    integrate_to_equilibrium,
    kkt_residual,
    project_plus,
)
from .reformulate import Convexity, Evaluation, SmoothProgram


@dataclass(frozen=True)
class CarConfig:
    """Settings of the alternation.

    ``row_scale`` multiplies the rows of every ``z`` subproblem. The
    subproblem keeps its feasible set and KKT points, but its multipliers
    shrink by the same factor, which shortens the slow multiplier transient
    of the projection dynamics considerably on the power-control instances.
    """

    max_rounds: int = 20
    round_tol: float = 1e-6
    inner: IntegratorConfig = IntegratorConfig(max_time=1e6, gauss_newton_jac=True)
    feas_tol: float = 1e-6
    row_scale: float = 100.0

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if not self.round_tol > 0:
            raise ValueError("round_tol must be positive")
        if not self.row_scale > 0:
            raise ValueError("row_scale must be positive")


class FixedY(SmoothProgram):
    """The convex ``z`` subproblem of a biconvex program with ``y`` frozen.

    Row order is that of the parent; rows that only involve ``y`` become
    constants. Rows are multiplied by ``row_scale``, so multipliers of the
    subproblem are ``1 / row_scale`` times those of the parent rows.
    """

    def __init__(self, parent: SmoothProgram, y: np.ndarray, row_scale: float = 1.0):
        self.parent = parent
        self.row_scale = float(row_scale)
        self.y = np.asarray(y, dtype=float).copy()
        self.problem = parent.problem
        self.row_labels = parent.row_labels
        self.theta = parent.theta
        self._zs = parent.z_slice
        self._n = self._zs.stop - self._zs.start

    @property
    def n(self) -> int:
        return self._n

    def full(self, z: np.ndarray) -> np.ndarray:
        x = np.empty(self.parent.n)
        x[self.parent.z_slice] = z
        x[self.parent.y_slice] = self.y
        return x

    def _evaluate(self, z):
        ev = self.parent.evaluate(self.full(z))
        zs = self._zs
        rho = self.row_scale
        return Evaluation(ev.f, ev.grad_f[zs], rho * ev.g, rho * ev.jac[:, zs])

    def default_start(self):
        return self.parent.default_start()[self._zs]


def y_step(sp: SmoothProgram, x: np.ndarray) -> np.ndarray:
    """Minimize the largest ``y``-dependent row over the ``y`` box.

    Rows are linear in ``y`` for the first-moment dependent program, so the
    linearization at ``x`` is exact and the problem is the LP
    ``min s  s.t.  g_i(x) + J_iy (y - y0) <= s``.
    """
    ev = sp.evaluate(x)
    ys = sp.y_slice
    y0 = x[ys]
    Jy = ev.jac[:, ys]
    rows = np.flatnonzero(np.abs(Jy).sum(axis=1) > 0)
    ny = y0.size
    # variables (y, s)
    c = np.zeros(ny + 1)
    c[-1] = 1.0
    A = np.hstack([Jy[rows], -np.ones((rows.size, 1))])
    b = Jy[rows] @ y0 - ev.g[rows]
    bounds = [(Y_MARGIN, 1.0 - Y_MARGIN)] * ny + [(None, None)]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise GPError(f"y step LP failed: {res.message}")
    return res.x[:ny]


def _z_solve(sp: SmoothProgram, y, z0, gamma0, cfg: CarConfig):
    sub = FixedY(sp, y, cfg.row_scale)
    return sub, integrate_to_equilibrium(sub, NeuroState(z0, gamma0), cfg.inner)


def car_solve(sp: SmoothProgram, y0=None, cfg: CarConfig = CarConfig()) -> SolveReport:
    """Alternate a ``z`` solve (projection dynamics, ``y`` fixed) and a ``y`` LP.

    ``y0`` defaults to every ``y_k`` at ``1 - eps / (2K)``. The first ``z``
    solve starts from the program's phase-1 interior point with zero
    multipliers; later ones are warm-started. If the first ``z`` step ends
    infeasible, ``y`` is reset once to the default before the solve is
    reported as failed. ``history['objective']`` holds the objective after
    every ``z`` step.
    """
    if sp.convexity is not Convexity.BICONVEX:
        raise GPError("CAR needs a biconvex program")
    default_y = sp._slack_y()
    y = default_y.copy() if y0 is None else np.asarray(y0, dtype=float).copy()
    if y.shape != default_y.shape or np.any(y < 0) or np.any(y > 1):
        raise GPError("y0 must lie in the unit box")
    z_start = sp.interior_point()[sp.z_slice]
    z, gamma = z_start, np.zeros(sp.n_g)
    objs = []
    best = None
    n_fev = 0
    reset = False
    for _ in range(cfg.max_rounds):
        try:
            sub, rep = _z_solve(sp, y, z, gamma, cfg)
        except DynamicsError:
            rep = None
        n_fev += 0 if rep is None else rep.n_fev
        feasible = False
        if rep is not None and rep.converged:
            x = sub.full(rep.z)
            viol = float(project_plus(sp.evaluate(x).g).max(initial=0.0))
            feasible = viol <= cfg.feas_tol
        if not feasible:
            if best is None and not reset:
                reset = True
                y, z, gamma = default_y.copy(), z_start, np.zeros(sp.n_g)
                continue
            break
        z, gamma = rep.z, rep.multipliers
        objs.append(rep.objective)
        if best is None or rep.objective < best[0]:
            best = (rep.objective, x.copy(), cfg.row_scale * gamma)
        if len(objs) > 1 and objs[-2] - objs[-1] < cfg.round_tol:
            break
        y = y_step(sp, x)

    if best is None:
        x = np.empty(sp.n)
        x[sp.z_slice] = z_start
        x[sp.y_slice] = y
        ev = sp.evaluate(x)
        return SolveReport(
            z=x,
            multipliers=np.zeros(sp.n_g),
            objective=math.inf,
            kkt_residual=math.inf,
            field_norm=math.inf,
            status=Status.NO_FEASIBLE_POINT,
            n_fev=n_fev,
            n_steps=len(objs),
            max_violation=float(project_plus(ev.g).max(initial=0.0)),
            history={"objective": objs},
        )
    f, x, gamma = best
    ev = sp.evaluate(x)
    return SolveReport(
        z=x,
        multipliers=gamma,
        objective=float(f),
        kkt_residual=kkt_residual(sp, NeuroState(x, gamma)),
        field_norm=math.nan,
        status=Status.CONVERGED,
        n_fev=n_fev,
        n_steps=len(objs),
        max_violation=float(project_plus(ev.g).max(initial=0.0)),
        history={"objective": objs},
    )


def gap(sol_car: float, sol_duplex: float) -> float:
    """``(sol_car - sol_duplex) / sol_car``; positive when the duplex is better."""
    if sol_car == 0:
        raise ZeroDivisionError("gap is undefined for a zero CAR objective")
    return (sol_car - sol_duplex) / sol_car
