"""Single-timescale projection dynamics for convex smooth programs.

The state ``zeta = (z, gamma)`` follows

    kappa dz/dt     = -(grad f(z) + J_g(z)^T (gamma + g(z))_+)
    kappa dgamma/dt = -gamma + (gamma + g(z))_+

whose equilibria are exactly the KKT pairs of ``min f s.t. g <= 0``.
Integration is adaptive (LSODA by default, or an explicit Dormand-Prince
5(4) pair) and stops once the unscaled field ``U(zeta)`` is below
``equilibrium_tol`` in the max norm.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import LSODA

from .gp_core import GPError
from .reformulate import Convexity, InstanceParameter, RobustGP, SmoothProgram
from .rk import DOPRI5, Rhs, StepSizeUnderflow

log = logging.getLogger(__name__)

MAX_TRAJECTORY_SAMPLES = 1000


class DynamicsError(RuntimeError):
    """Non-finite field or state; carries the offending state vector."""

    def __init__(self, msg: str, state: np.ndarray | None = None):
        super().__init__(msg)
        self.state = state


class Status(str, enum.Enum):
    CONVERGED = "converged"
    NOT_CONVERGED = "not_converged"
    NO_FEASIBLE_POINT = "no_feasible_point"


class Method(str, enum.Enum):
    """Time stepper for the dynamics.

    ``LSODA`` switches automatically between Adams and BDF formulas and copes
    with the transient stiffness near the log-odds singularity. ``DOPRI5`` is
    the explicit embedded Runge-Kutta pair; it rejects any stage that leaves
    the guarded domain, but it is slow whenever the dynamics turn stiff.
    """

    LSODA = "lsoda"
    DOPRI5 = "dopri5"


@dataclass(frozen=True)
class IntegratorConfig:
    kappa: float = 1.0
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    equilibrium_tol: float = 1e-6
    max_time: float | None = None
    max_steps: int = 200_000
    max_step_factor: float = 10.0
    method: Method = Method.LSODA
    gauss_newton_jac: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("kappa", "abs_tol", "rel_tol", "equilibrium_tol", "max_step_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.abs_tol > self.rel_tol:
            raise ValueError("abs_tol must not exceed rel_tol")
        if self.max_time is not None and not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def horizon(self) -> float:
        return self.max_time if self.max_time is not None else 1e4 * self.kappa

    @property
    def max_step(self) -> float:
        return self.max_step_factor * self.kappa


@dataclass
class NeuroState:
    z: np.ndarray
    gamma: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.z, self.gamma])

    @classmethod
    def split(cls, v: np.ndarray, n: int) -> "NeuroState":
        return cls(np.array(v[:n]), np.array(v[n:]))


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray

    def __len__(self):
        return len(self.t)


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``state`` is the final ODE state (``z`` then multipliers). ``history``
    holds solver-specific sequences, e.g. the duplex best-so-far fitness.
    """

    z: np.ndarray
    multipliers: np.ndarray
    objective: float
    kkt_residual: float
    field_norm: float
    status: Status
    n_fev: int = 0
    n_steps: int = 0
    t_final: float = 0.0
    max_violation: float = 0.0
    trajectory: Trajectory | None = None
    history: dict = field(default_factory=dict)
    clamped: bool = False

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.z, self.multipliers])

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "objective": float(self.objective),
            "kkt_residual": float(self.kkt_residual),
            "field_norm": float(self.field_norm),
            "max_violation": float(self.max_violation),
            "n_fev": int(self.n_fev),
            "n_steps": int(self.n_steps),
            "t_final": float(self.t_final),
        }


def project_plus(v) -> np.ndarray:
    """Componentwise positive part."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def field_unscaled(sp: SmoothProgram, z: np.ndarray, gamma: np.ndarray):
    """``U(zeta)`` split into its z and multiplier parts, plus the evaluation."""
    ev = sp.evaluate(z)
    active = project_plus(gamma + ev.g)
    uz = -(ev.grad_f + ev.jac.T @ active)
    ug = active - gamma
    return uz, ug, ev


def vector_field(sp: SmoothProgram, s: NeuroState, cfg: IntegratorConfig = IntegratorConfig()) -> NeuroState:
    """Time derivative of the state; both blocks are scaled by ``1 / kappa``."""
    uz, ug, _ = field_unscaled(sp, s.z, s.gamma)
    out = NeuroState(uz / cfg.kappa, ug / cfg.kappa)
    if not (np.all(np.isfinite(out.z)) and np.all(np.isfinite(out.gamma))):
        raise DynamicsError("non-finite vector field", s.vector)
    return out


def kkt_residual(sp: SmoothProgram, s: NeuroState) -> float:
    """Max of stationarity, dual sign, primal feasibility and complementarity errors."""
    ev = sp.evaluate(s.z)
    gamma = np.asarray(s.gamma, dtype=float)
    stat = np.abs(ev.grad_f + ev.jac.T @ gamma).max(initial=0.0)
    dual = np.abs(np.minimum(gamma, 0.0)).max(initial=0.0)
    primal = project_plus(ev.g).max(initial=0.0)
    comp = abs(float(gamma @ ev.g))
    return float(max(stat, dual, primal, comp))


def lyapunov_energy(sp: SmoothProgram, states: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """``||U(zeta)||^2 + 0.5 ||zeta - zeta_ref||^2`` along a sequence of states."""
    n = sp.n
    out = np.empty(len(states))
    for i, v in enumerate(states):
        uz, ug, _ = field_unscaled(sp, v[:n], v[n:])
        out[i] = uz @ uz + ug @ ug + 0.5 * np.sum((v - ref) ** 2)
    return out


def _downsample(ts: list, ys: list, limit: int = MAX_TRAJECTORY_SAMPLES) -> Trajectory:
    t = np.asarray(ts)
    Y = np.asarray(ys)
    if len(t) > limit:
        idx = np.unique(np.linspace(0, len(t) - 1, limit).round().astype(int))
        t, Y = t[idx], Y[idx]
    return Trajectory(t, Y)


@dataclass
class IntegrationResult:
    y: np.ndarray
    t: float
    field_norm: float
    converged: bool
    n_fev: int
    n_steps: int
    trajectory: Trajectory


class _Counted:
    """Wraps a right-hand side and counts its evaluations."""

    def __init__(self, rhs: Rhs):
        self.rhs = rhs
        self.n = 0

    def __call__(self, t, y):
        self.n += 1
        return self.rhs(t, y)

    def plain(self, t, y):
        return self(t, y)[0]


def _stepper(method: Method, rhs: _Counted, y0, cfg: IntegratorConfig, max_step: float, jac):
    if method is Method.DOPRI5:
        solver = DOPRI5(rhs, 0.0, y0, rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=max_step)
        return solver, lambda: solver.f
    kw = {"jac": jac} if jac is not None and cfg.gauss_newton_jac else {}
    solver = LSODA(
        rhs.plain, 0.0, y0, cfg.horizon, max_step=max_step, rtol=cfg.rel_tol, atol=cfg.abs_tol, **kw
    )
    return solver, lambda: rhs.plain(solver.t, solver.y)


def integrate(
    rhs: Rhs,
    y0: np.ndarray,
    unscale: np.ndarray | float,
    cfg: IntegratorConfig,
    max_step: float | None = None,
    jac: Callable | None = None,
) -> IntegrationResult:
    """Adaptive integration until the unscaled field is small.

    ``rhs(t, y)`` returns ``(dy/dt, ok)`` with ``ok`` False outside the
    guarded domain. ``unscale`` multiplies the time derivative back to the
    unscaled field (``kappa`` for one timescale, per-block constants for two).
    ``jac(t, y)``, if given, is an approximate Jacobian of ``dy/dt`` that
    LSODA uses for its Newton iteration matrix.
    """
    y0 = np.asarray(y0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise DynamicsError("non-finite initial state", y0)
    counted = _Counted(rhs)
    f0, ok = counted(0.0, y0)
    if not ok or not np.all(np.isfinite(f0)):
        raise DynamicsError("initial state outside the domain of the vector field", y0)
    fnorm = float(np.abs(f0 * unscale).max(initial=0.0))
    converged = fnorm <= cfg.equilibrium_tol
    horizon = cfg.horizon
    ts = [0.0]
    ys = [y0.copy()]
    steps = 0
    y, t = y0.copy(), 0.0
    if not converged:
        with np.errstate(over="ignore", invalid="ignore"):
            solver, current = _stepper(cfg.method, counted, y0, cfg, max_step or cfg.max_step, jac)
            while not converged and t < horizon and steps < cfg.max_steps:
                try:
                    msg = solver.step()
                except StepSizeUnderflow as exc:
                    raise DynamicsError(str(exc), solver.y) from exc
                if getattr(solver, "status", "running") == "failed":
                    raise DynamicsError(f"integrator failed: {msg}", solver.y)
                steps += 1
                t, y = float(solver.t), np.array(solver.y)
                if not np.all(np.isfinite(y)):
                    raise DynamicsError("non-finite state", y)
                ts.append(t)
                ys.append(y)
                fnorm = float(np.abs(current() * unscale).max(initial=0.0))
                converged = fnorm <= cfg.equilibrium_tol
    return IntegrationResult(
        y=y,
        t=t,
        field_norm=fnorm,
        converged=converged,
        n_fev=counted.n,
        n_steps=steps,
        trajectory=_downsample(ts, ys),
    )


def _rhs(sp: SmoothProgram, kappa: float) -> Rhs:
    n = sp.n

    def rhs(t, v):
        uz, ug, ev = field_unscaled(sp, v[:n], v[n:])
        return np.concatenate([uz, ug]) / kappa, not ev.clamped

    return rhs


def gauss_newton_jacobian(J: np.ndarray, active: np.ndarray, rho: float = 1.0) -> np.ndarray:
    """Jacobian of the projection field with the curvature of ``f`` and ``g`` dropped.

    ``J`` is the constraint Jacobian, ``active`` flags rows with
    ``(multiplier + rho g) > 0`` and the field is built on ``rho g``. The
    dropped terms are not stiff, so this is enough for an implicit stepper.
    """
    n_g, n = J.shape
    d = active.astype(float)
    out = np.zeros((n + n_g, n + n_g))
    out[:n, :n] = -(rho * rho) * (J.T * d) @ J
    out[:n, n:] = -rho * J.T * d
    out[n:, :n] = rho * d[:, None] * J
    out[n:, n:] = np.diag(d - 1.0)
    return out


def _jac(sp: SmoothProgram, kappa: float):
    n = sp.n

    def jac(t, v):
        ev = sp.evaluate(v[:n])
        return gauss_newton_jacobian(ev.jac, v[n:] + ev.g > 0) / kappa

    return jac


def initial_state(sp: SmoothProgram, z0=None, gamma0=None) -> NeuroState:
    z = sp.default_start() if z0 is None else np.asarray(z0, dtype=float)
    gamma = np.zeros(sp.n_g) if gamma0 is None else np.asarray(gamma0, dtype=float)
    return NeuroState(z, gamma)


def integrate_to_equilibrium(
    sp: SmoothProgram, s0: NeuroState | None = None, cfg: IntegratorConfig = IntegratorConfig()
) -> SolveReport:
    """Integrate the projection dynamics from ``s0`` to an equilibrium.

    Reaching the horizon or ``max_steps`` first yields a report with status
    ``NOT_CONVERGED``; this is not an error.
    """
    if sp.convexity is not Convexity.CONVEX:
        raise GPError("single-timescale dynamics need a convex program; use the duplex")
    s0 = initial_state(sp) if s0 is None else s0
    y0 = s0.vector
    res = integrate(_rhs(sp, cfg.kappa), y0, cfg.kappa, cfg, jac=_jac(sp, cfg.kappa))
    return _report(sp, res)


def _report(sp: SmoothProgram, res: IntegrationResult) -> SolveReport:
    s = NeuroState.split(res.y, sp.n)
    ev = sp.evaluate(s.z)
    return SolveReport(
        z=s.z,
        multipliers=s.gamma,
        objective=float(ev.f),
        kkt_residual=kkt_residual(sp, s),
        field_norm=res.field_norm,
        status=Status.CONVERGED if res.converged else Status.NOT_CONVERGED,
        n_fev=res.n_fev,
        n_steps=res.n_steps,
        t_final=res.t,
        max_violation=float(project_plus(ev.g).max(initial=0.0)),
        trajectory=res.trajectory,
        clamped=ev.clamped,
    )


def solve_batch(
    builder: Callable[[RobustGP], SmoothProgram],
    thetas: Sequence[InstanceParameter | RobustGP],
    cfg: IntegratorConfig = IntegratorConfig(),
    warm_start: bool = True,
) -> list[SolveReport]:
    """Solve a family of same-shaped instances with the parameterized dynamics.

    Each instance after the first starts from the final state of the nearest
    (Euclidean on the flattened data) instance solved so far. A failing
    instance is reported as ``NOT_CONVERGED`` and the batch carries on.
    """
    params = [t if isinstance(t, InstanceParameter) else InstanceParameter(t) for t in thetas]
    if params:
        sig = params[0].signature
        for p in params[1:]:
            if p.signature != sig:
                raise GPError("all instances in a batch must share their shapes")
    solved_vecs: list[np.ndarray] = []
    solved_states: list[NeuroState] = []
    reports = []
    for p in params:
        sp = builder(p.problem)
        vec = p.vector
        s0 = None
        if warm_start and solved_vecs:
            d = [np.linalg.norm(vec - v) for v in solved_vecs]
            s0 = solved_states[int(np.argmin(d))]
        try:
            rep = integrate_to_equilibrium(sp, s0, cfg)
        except DynamicsError as exc:
            log.warning("instance %s failed: %s", p.problem.name, exc)
            start = s0 if s0 is not None else initial_state(sp)
            rep = SolveReport(
                z=start.z,
                multipliers=start.gamma,
                objective=float("nan"),
                kkt_residual=float("inf"),
                field_norm=float("inf"),
                status=Status.NOT_CONVERGED,
            )
        reports.append(rep)
        if rep.converged:
            solved_vecs.append(vec)
            solved_states.append(NeuroState(rep.z.copy(), rep.multipliers.copy()))
    return reports


def write_trajectory_csv(path, sp: SmoothProgram, report: SolveReport) -> None:
    """Columns ``t, f, kkt_residual`` then the state components."""
    traj = report.trajectory
    if traj is None:
        raise ValueError("report carries no trajectory")
    n = sp.n
    names = [f"z{i}" for i in range(n)] + [f"m{i}" for i in range(traj.states.shape[1] - n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "f", "kkt_residual", *names])
        for t, v in zip(traj.t, traj.states):
            s = NeuroState.split(v, n)
            w.writerow([repr(float(t)), repr(sp.f(s.z)), repr(kkt_residual(sp, s)), *map(repr, map(float, v))])
