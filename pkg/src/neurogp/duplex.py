"""Two-timescale neurodynamic duplex for biconvex programs.

Two copies of the projection dynamics run with different ratios between the
time constants of the ``z`` block and the ``(y, omega)`` block. Their
equilibria are compared by objective value, and the initial states of the
next round are moved by a particle-swarm rule; a wavelet mutation restores
diversity once the swarm collapses onto its best point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .gp_core import GPError
from .neuro_ode import (
    DynamicsError,
    IntegratorConfig,
    SolveReport,
    Status,
    gauss_newton_jacobian,
    integrate,
    NeuroState,
    kkt_residual,
    project_plus,
)
from .reformulate import Convexity, SmoothProgram

R_BOUND = 10.0
DUAL_BOUND = 20.0
OMEGA_BOUND = 100.0
DUAL_MARGIN = 1.0
Y_MARGIN = 1e-6


@dataclass(frozen=True)
class PSOParams:
    """Inertia ``w`` and acceleration constants ``c1`` (personal) and ``c2`` (global)."""

    w: float = 0.7298
    c1: float = 1.49618
    c2: float = 1.49618

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError("w must lie in [0, 1]")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be >= 0")


@dataclass(frozen=True)
class DuplexConfig:
    """Settings of the outer loop.

    Attributes
    ----------
    ratio_1, ratio_2 : float
        ``kappa_1 / kappa_2`` of the two networks; ``kappa_2`` is
        ``inner.kappa``.
    zeta : float
        Diversity threshold for mutation and displacement threshold for the
        global best.
    T : int
        Maximum number of outer iterations.
    patience : int
        Number of consecutive iterations with global-best displacement below
        ``zeta`` needed to stop before ``T``.
    bounds : (lower, upper), optional
        Per-component box for ``(z, y, omega)``; see :func:`default_bounds`.
    row_scale : float
        The networks run on ``row_scale * g``, which has the same feasible
        set and KKT points. With the bilinear rows of the dependent
        first-moment program the unit-scaled KKT point can be an unstable
        equilibrium; a scale of 3 or more restores local stability there.
        ``omega`` in the state belongs to the scaled rows; reported
        multipliers are rescaled to ``g``.
    interior_start : bool
        Start the first particle from the program's phase-1 interior point
        with zero multipliers instead of a uniform draw.
    """

    ratio_1: float = 0.1
    ratio_2: float = 10.0
    pso: PSOParams = PSOParams()
    zeta: float = 1e-4
    T: int = 20
    patience: int = 3
    bounds: tuple[np.ndarray, np.ndarray] | None = None
    seed: int = 0
    feas_tol: float = 1e-6
    n_particles: int = 2
    row_scale: float = 30.0
    interior_start: bool = True
    inner: IntegratorConfig = IntegratorConfig(
        equilibrium_tol=1e-6, gauss_newton_jac=True, max_steps=10000
    )

    def __post_init__(self):
        if self.ratio_1 <= 0 or self.ratio_2 <= 0:
            raise ValueError("time-constant ratios must be positive")
        if self.ratio_1 == self.ratio_2:
            raise ValueError("the two networks need different time-constant ratios")
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")
        if not self.row_scale > 0:
            raise ValueError("row_scale must be positive")
        if self.T < 1 or self.patience < 1 or self.n_particles < 1:
            raise ValueError("T, patience and n_particles must be >= 1")

    @property
    def ratios(self) -> tuple[float, float]:
        return (self.ratio_1, self.ratio_2)


@dataclass
class DuplexState:
    z: np.ndarray
    y: np.ndarray
    omega: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.z, self.y, self.omega])

    @classmethod
    def split(cls, sp: SmoothProgram, v: np.ndarray) -> "DuplexState":
        nz = sp.z_slice.stop - sp.z_slice.start
        ny = sp.y_slice.stop - sp.y_slice.start
        v = np.asarray(v, dtype=float)
        return cls(v[:nz].copy(), v[nz : nz + ny].copy(), v[nz + ny :].copy())


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    personal_best: np.ndarray
    best_fitness: float = math.inf
    equilibrium: np.ndarray | None = None

    @classmethod
    def at(cls, position) -> "Particle":
        position = np.asarray(position, dtype=float).copy()
        return cls(position, np.zeros_like(position), position.copy())


def _decision(sp: SmoothProgram, s: DuplexState) -> np.ndarray:
    x = np.empty(sp.n)
    x[sp.z_slice] = s.z
    x[sp.y_slice] = s.y
    return x


def _check_biconvex(sp: SmoothProgram):
    if sp.convexity is not Convexity.BICONVEX:
        raise GPError("the duplex needs a biconvex program")


def _blocks(sp: SmoothProgram, k1: float, k2: float) -> np.ndarray:
    """Per-component time constants of the state ``(z, y, omega)``."""
    nz = sp.z_slice.stop - sp.z_slice.start
    return np.concatenate([np.full(nz, k1), np.full(sp.n - nz + sp.n_g, k2)])


def _unscaled(sp: SmoothProgram, v: np.ndarray, rho: float = 1.0):
    nz = sp.z_slice.stop - sp.z_slice.start
    n = sp.n
    s = DuplexState(v[:nz], v[nz:n], v[n:])
    ev = sp.evaluate(_decision(sp, s))
    active = project_plus(s.omega + rho * ev.g)
    pull = rho * (ev.jac.T @ active)
    uz = -(ev.grad_f[sp.z_slice] + pull[sp.z_slice])
    uy = -pull[sp.y_slice]
    uw = active - s.omega
    return np.concatenate([uz, uy, uw]), ev


def duplex_field(
    sp: SmoothProgram, s: DuplexState, k1: float, k2: float, row_scale: float = 1.0
) -> DuplexState:
    """Time derivative of ``(z, y, omega)``: the z block over ``k1``, the rest over ``k2``."""
    _check_biconvex(sp)
    v = s.vector
    u, _ = _unscaled(sp, v, row_scale)
    d = u / _blocks(sp, k1, k2)
    if not np.all(np.isfinite(d)):
        raise DynamicsError("non-finite duplex field", v)
    return DuplexState.split(sp, d)


def default_bounds(sp: SmoothProgram, row_scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Per-component box for initialization, PSO moves and mutation.

    ``r`` is confined to ``[-10, 10]`` and ``y`` to the open unit interval.
    The multipliers ``row_scale * omega`` are confined to ``[0, 100]``. For the first-moment dual blocks the box
    follows bounds the constraints imply at any feasible point:
    ``lam >= log(1 - eps)`` (from ``y exp(-lam) <= 1`` with ``y >= 1 - eps``)
    and ``beta_ik <= -log mu_ik`` (from ``exp(-lam + beta + log mu) <= 1``
    with ``lam <= 0``), each widened by ``DUAL_MARGIN``. Other dual
    components use ``[-20, 20]``.
    """
    lo = np.full(sp.n + sp.n_g, -DUAL_BOUND)
    hi = np.full(sp.n + sp.n_g, DUAL_BOUND)
    nz = sp.z_slice.stop - sp.z_slice.start
    p = sp.problem
    # the state is ordered (z, y, omega); z keeps the layout order of its slots
    for name, sl in sp.layout.slices.items():
        if sl.start >= nz:
            continue
        if name == "r":
            lo[sl], hi[sl] = -R_BOUND, R_BOUND
        elif name == "lam":
            lo[sl], hi[sl] = np.log(1.0 - p.epsilon) - DUAL_MARGIN, 0.0
        elif name == "beta":
            log_mu = np.concatenate([b.log_mu for b in p.constraints])
            hi[sl] = -log_mu + DUAL_MARGIN
    ys = slice(nz, sp.n)
    lo[ys], hi[ys] = Y_MARGIN, 1.0 - Y_MARGIN
    lo[sp.n :], hi[sp.n :] = 0.0, OMEGA_BOUND / row_scale
    return lo, hi


def fitness(sp: SmoothProgram, v: np.ndarray, feas_tol: float) -> float:
    """``f`` at the decision part of ``v``; ``+inf`` unless every row is within ``feas_tol``."""
    ev = sp.evaluate(_decision(sp, DuplexState.split(sp, v)))
    if not np.all(np.isfinite(ev.g)) or ev.g.max(initial=-np.inf) > feas_tol:
        return math.inf
    return float(ev.f)


def duplex_kkt(sp: SmoothProgram, v: np.ndarray, row_scale: float = 1.0) -> float:
    """KKT residual of ``(z, y)`` with multipliers ``row_scale * omega`` for ``g``."""
    s = DuplexState.split(sp, v)
    return kkt_residual(sp, NeuroState(_decision(sp, s), row_scale * s.omega))


@dataclass
class LocalResult:
    state: np.ndarray
    converged: bool
    n_fev: int
    field_norm: float


def integrate_duplex(
    sp: SmoothProgram, v0: np.ndarray, ratio: float, inner: IntegratorConfig, row_scale: float = 1.0
) -> LocalResult:
    """Run one network from ``v0`` until its field vanishes.

    ``kappa_2 = inner.kappa`` and ``kappa_1 = ratio * kappa_2``; the horizon
    and step bound scale with the slower of the two.
    """
    k2 = inner.kappa
    k1 = ratio * k2
    scale = _blocks(sp, k1, k2)
    slow = max(k1, k2) / inner.kappa
    cfg = replace(inner, max_time=inner.horizon * slow)

    def rhs(t, v):
        u, ev = _unscaled(sp, v, row_scale)
        return u / scale, not ev.clamped

    def jac(t, v):
        ev = sp.evaluate(v[: sp.n])
        J = gauss_newton_jacobian(ev.jac, v[sp.n :] + row_scale * ev.g > 0, row_scale)
        return J / scale[:, None]

    # the state is ordered (z, y, omega) and z, y follow the decision layout
    res = integrate(rhs, v0, scale, cfg, max_step=cfg.max_step * slow, jac=jac)
    return LocalResult(res.y, res.converged, res.n_fev, res.field_norm)


def run_rnn_pair(sp: SmoothProgram, particles, cfg: DuplexConfig):
    """Integrate every particle's network to equilibrium.

    Particle ``i`` uses ``cfg.ratios[i % 2]``. Returns the equilibria, their
    fitnesses and the total number of field evaluations; a network that fails
    or does not converge scores ``+inf``.
    """
    _check_biconvex(sp)
    equilibria, fits, nfev = [], [], 0
    for i, p in enumerate(particles):
        try:
            res = integrate_duplex(sp, p.position, cfg.ratios[i % 2], cfg.inner, cfg.row_scale)
        except (DynamicsError, GPError):
            equilibria.append(p.position.copy())
            fits.append(math.inf)
            continue
        nfev += res.n_fev
        equilibria.append(res.state)
        fits.append(fitness(sp, res.state, cfg.feas_tol) if res.converged else math.inf)
    return equilibria, fits, nfev


def pso_update(particles, global_best: np.ndarray, pso: PSOParams, rng, r=None):
    """Velocity and position update; ``r = (r1, r2)`` overrides the uniform draws."""
    for p in particles:
        r1, r2 = rng.uniform(size=2) if r is None else r
        p.velocity = (
            pso.w * p.velocity
            + pso.c1 * r1 * (p.personal_best - p.position)
            + pso.c2 * r2 * (global_best - p.position)
        )
        p.position = p.position + p.velocity
    return particles


def diversity(positions, global_best: np.ndarray) -> float:
    """Mean Euclidean distance of the positions from the global best."""
    positions = [np.asarray(p, dtype=float) for p in positions]
    return float(np.mean([np.linalg.norm(p - global_best) for p in positions]))


def dilation(j: int, T: int) -> float:
    return math.exp(10.0 * j / T)


def wavelet_mu(phi: float, a: float) -> float:
    return a**-0.5 * math.exp(-phi / (2.0 * a)) * math.cos(5.0 * phi / a)


def wavelet_mutate(position: np.ndarray, bounds, j: int, T: int, rng) -> tuple[np.ndarray, float]:
    """Move every component toward its upper (``mu > 0``) or lower bound.

    The same ``mu`` is used for all components and the result is clipped
    into the box, since ``mu`` is unbounded for negative ``phi``.
    """
    lo, hi = bounds
    a = dilation(j, T)
    phi = rng.uniform(-2.5 * a, 2.5 * a)
    mu = wavelet_mu(phi, a)
    x = np.asarray(position, dtype=float)
    if mu > 0:
        out = x + mu * (hi - x)
    else:
        out = x + mu * (x - lo)
    return np.clip(out, lo, hi), mu


def solve_duplex(sp: SmoothProgram, cfg: DuplexConfig = DuplexConfig(), starts=None) -> SolveReport:
    """Outer loop of the duplex.

    Each round integrates every particle, updates personal and global bests
    by strict improvement of fitness, moves the initial states with the PSO
    rule and mutates them when the swarm's diversity falls below ``zeta``.
    ``history`` holds the best-so-far fitness, diversity and a mutation flag
    per round.
    """
    _check_biconvex(sp)
    bounds = cfg.bounds if cfg.bounds is not None else default_bounds(sp, cfg.row_scale)
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if lo.shape != (sp.n + sp.n_g,) or hi.shape != lo.shape or np.any(lo > hi):
        raise ValueError("bounds must be two vectors of the state size with lower <= upper")
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_particles + 1)
    rng_outer = np.random.default_rng(seeds[0])
    rngs = [np.random.default_rng(s) for s in seeds[1:]]

    if starts is None:
        particles = [Particle.at(r.uniform(lo, hi)) for r in rngs]
        if cfg.interior_start:
            v0 = np.concatenate([sp.interior_point(), np.zeros(sp.n_g)])
            particles[0] = Particle.at(np.clip(v0, lo, hi))
    else:
        particles = [Particle.at(np.clip(s, lo, hi)) for s in starts]
    gbest = None
    gbest_fit = math.inf
    best_hist, div_hist, mut_hist = [], [], []
    nfev = 0
    calm = 0
    for j in range(1, cfg.T + 1):
        eq, fits, n = run_rnn_pair(sp, particles, cfg)
        nfev += n
        prev = None if gbest is None else gbest.copy()
        for p, e, fv in zip(particles, eq, fits):
            p.equilibrium = e
            if fv < p.best_fitness:
                p.best_fitness = fv
                p.personal_best = e.copy()
            if fv < gbest_fit:
                gbest_fit = fv
                gbest = e.copy()
        best_hist.append(gbest_fit)
        if gbest is None:
            # nothing feasible yet: restart from fresh uniform draws
            for p, r in zip(particles, rngs):
                p.position = r.uniform(lo, hi)
            div_hist.append(math.nan)
            mut_hist.append(False)
            continue
        for p in particles:
            if not np.isfinite(p.best_fitness):
                p.personal_best = gbest.copy()
        pso_update(particles, gbest, cfg.pso, rng_outer)
        for p in particles:
            p.position = np.clip(p.position, lo, hi)
        d = diversity([p.position for p in particles], gbest)
        div_hist.append(d)
        mutated = d < cfg.zeta
        if mutated:
            for p, r in zip(particles, rngs):
                p.position, _ = wavelet_mutate(p.position, (lo, hi), j, cfg.T, r)
        mut_hist.append(bool(mutated))
        if prev is not None and np.linalg.norm(gbest - prev) < cfg.zeta:
            calm += 1
            if calm >= cfg.patience:
                break
        else:
            calm = 0

    history = {"best_fitness": best_hist, "diversity": div_hist, "mutated": mut_hist}
    if gbest is None:
        v = particles[0].position
        s = DuplexState.split(sp, v)
        ev = sp.evaluate(_decision(sp, s))
        return SolveReport(
            z=_decision(sp, s),
            multipliers=cfg.row_scale * s.omega,
            objective=math.inf,
            kkt_residual=duplex_kkt(sp, v, cfg.row_scale),
            field_norm=math.inf,
            status=Status.NO_FEASIBLE_POINT,
            n_fev=nfev,
            n_steps=len(best_hist),
            max_violation=float(project_plus(ev.g).max(initial=0.0)),
            history=history,
        )
    s = DuplexState.split(sp, gbest)
    x = _decision(sp, s)
    ev = sp.evaluate(x)
    u, _ = _unscaled(sp, gbest, cfg.row_scale)
    return SolveReport(
        z=x,
        multipliers=cfg.row_scale * s.omega,
        objective=float(gbest_fit),
        kkt_residual=duplex_kkt(sp, gbest, cfg.row_scale),
        field_norm=float(np.abs(u).max()),
        status=Status.CONVERGED,
        n_fev=nfev,
        n_steps=len(best_hist),
        max_violation=float(project_plus(ev.g).max(initial=0.0)),
        history=history,
    )


def write_iteration_log(path, report: SolveReport) -> None:
    """CSV with columns ``j, best_fitness, diversity, mutated``."""
    h = report.history
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "best_fitness", "diversity", "mutated"])
        for j, (b, d, m) in enumerate(zip(h["best_fitness"], h["diversity"], h["mutated"]), start=1):
            w.writerow([j, repr(float(b)), repr(float(d)), int(m)])
