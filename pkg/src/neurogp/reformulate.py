"""Deterministic smooth programs for distributionally robust joint chance constraints.

Four compilations are provided, one per (ambiguity kind, row coupling):

==================  ===========  ==========================================
builder             variables    rows (in order)
==================  ===========  ==========================================
two-moment, ind     r, x         K robust, coupling, x_k
two-moment, dep     r, y         K robust, coupling, y_k - 1
first-moment, ind   r, x, lam,   coupling, x_k, dual feasibility, lam_k,
                    beta, pi     lam_k - pi_k, pi_k + a_ik.r - beta_ik
first-moment, dep   r, lam,      coupling, -y_k, y_k - 1, dual feasibility,
                    beta, pi, y  lam_k, lam_k - pi_k, pi_k + a_ik.r - beta_ik
==================  ===========  ==========================================

Rows of certain (deterministic) posynomials are appended last in every
program as ``log(sum_i c_i exp(a_i . r)) <= 0``.

``Coupling.INDIVIDUAL`` replaces the single joint coupling row with one row
per block (``x_k >= log(1 - eps)``, or ``y_k >= 1 - eps``), which is how
separate chance constraints are expressed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .gp_core import (
    AmbiguityKind,
    AmbiguityParams,
    BlockStack,
    GPError,
    PosynomialBlock,
    eval_logsum,
    eval_sqrt_quad,
    grad_logsum,
    grad_sqrt_quad,
)

X_GUARD = -1e-9
Y_GUARD = 1.0 - 1e-9
Y_LOWER_SLACK = 1e-6


class Coupling(str, enum.Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"
    INDIVIDUAL = "individual"


class Convexity(str, enum.Enum):
    CONVEX = "convex"
    BICONVEX = "biconvex"


@dataclass(frozen=True)
class RobustGP:
    """A geometric program with uncertain constraint coefficients.

    ``constraints`` are the K uncertain blocks joined in one chance
    constraint. ``certain`` blocks are ordinary GP constraints
    ``sum_i c_i prod_j t_j^a_ij <= 1`` with known coefficients.
    """

    objective: PosynomialBlock
    constraints: tuple[PosynomialBlock, ...]
    ambiguity: AmbiguityParams = AmbiguityParams()
    epsilon: float = 0.1
    coupling: Coupling = Coupling.INDEPENDENT
    certain: tuple[PosynomialBlock, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "certain", tuple(self.certain))
        object.__setattr__(self, "coupling", Coupling(self.coupling))
        if not 0.0 < self.epsilon <= 0.5:
            raise GPError(f"epsilon must lie in (0, 0.5], got {self.epsilon}")
        if len(self.constraints) < 1:
            raise GPError("at least one uncertain constraint block is required")
        M = self.objective.n_vars
        for b in (*self.constraints, *self.certain):
            if b.n_vars != M:
                raise GPError(f"block {b.label} has {b.n_vars} variables, objective has {M}")
        self.ambiguity.per_block(len(self.constraints))

    @property
    def n_vars(self) -> int:
        return self.objective.n_vars

    @property
    def K(self) -> int:
        return len(self.constraints)

    @property
    def term_counts(self) -> tuple[int, ...]:
        return tuple(b.n_terms for b in self.constraints)

    def replace(self, **changes) -> "RobustGP":
        kw = dict(
            objective=self.objective,
            constraints=self.constraints,
            ambiguity=self.ambiguity,
            epsilon=self.epsilon,
            coupling=self.coupling,
            certain=self.certain,
            name=self.name,
        )
        kw.update(changes)
        return RobustGP(**kw)


@dataclass(frozen=True)
class InstanceParameter:
    """The numeric data bundle identifying one instance.

    ``vector`` flattens every coefficient mean, exponent, covariance entry,
    ambiguity radius and epsilon; ``signature`` records the shapes so that
    vectors are only compared between same-shaped instances.
    """

    problem: RobustGP

    @property
    def signature(self) -> tuple:
        p = self.problem
        return (
            p.n_vars,
            p.objective.n_terms,
            p.term_counts,
            tuple(b.n_terms for b in p.certain),
            p.ambiguity.kind.value,
            p.coupling.value,
        )

    @property
    def vector(self) -> np.ndarray:
        p = self.problem
        parts = []
        for b in (p.objective, *p.constraints, *p.certain):
            parts.append(b.mean_coeffs)
            parts.append(b.exponents.ravel())
            parts.append(np.zeros(b.n_terms**2) if b.cov is None else b.cov.ravel())
        g1, g2 = p.ambiguity.per_block(p.K)
        parts += [g1, g2, [p.ambiguity.gamma1_obj, p.epsilon]]
        return np.concatenate([np.asarray(x, dtype=float).ravel() for x in parts])


@dataclass(frozen=True)
class VariableLayout:
    """Named contiguous slices of the decision vector."""

    slices: dict

    @classmethod
    def from_sizes(cls, sizes: Sequence[tuple[str, int]]) -> "VariableLayout":
        out = {}
        start = 0
        for name, n in sizes:
            out[name] = slice(start, start + n)
            start += n
        return cls(out)

    @property
    def n(self) -> int:
        return max((s.stop for s in self.slices.values()), default=0)

    def __getitem__(self, name: str) -> slice:
        return self.slices[name]

    def __contains__(self, name: str) -> bool:
        return name in self.slices

    def names(self) -> list[str]:
        return list(self.slices)


@dataclass
class Evaluation:
    f: float
    grad_f: np.ndarray
    g: np.ndarray
    jac: np.ndarray
    clamped: bool = False


class SmoothProgram:
    """``min f(z) s.t. g(z) <= 0`` with first derivatives.

    Subclasses implement :meth:`_evaluate` on a point already inside the
    guarded domain; :meth:`evaluate` applies the guard and reports whether it
    had to clamp. Outside the guard the values are extended to first order
    from the clamped point, with the Jacobian frozen there.
    """

    convexity = Convexity.CONVEX
    kind = ""

    def __init__(self, problem: RobustGP, layout: VariableLayout, row_labels: list[str]):
        self.problem = problem
        self.layout = layout
        self.row_labels = tuple(row_labels)
        self.theta = InstanceParameter(problem)
        self._certain = BlockStack(problem.certain) if problem.certain else None

    @property
    def n(self) -> int:
        return self.layout.n

    @property
    def n_g(self) -> int:
        return len(self.row_labels)

    @property
    def z_slice(self) -> slice:
        return slice(0, self.n)

    @property
    def y_slice(self) -> slice | None:
        return None

    def clamp(self, z: np.ndarray) -> tuple[np.ndarray, bool]:
        return z, False

    def evaluate(self, z) -> Evaluation:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n,):
            raise GPError(f"point has shape {z.shape}, program expects ({self.n},)")
        if not np.all(np.isfinite(z)):
            raise GPError("non-finite evaluation point")
        zc, flagged = self.clamp(z)
        ev = self._evaluate(zc)
        if flagged:
            # first-order extension from the guard keeps the field continuous
            # and still dependent on the clamped coordinates
            dz = z - zc
            ev.f = ev.f + float(ev.grad_f @ dz)
            ev.g = ev.g + ev.jac @ dz
            ev.clamped = True
        return ev

    def _evaluate(self, z: np.ndarray) -> Evaluation:
        raise NotImplementedError

    def f(self, z) -> float:
        return self.evaluate(z).f

    def grad_f(self, z) -> np.ndarray:
        return self.evaluate(z).grad_f

    def g(self, z) -> np.ndarray:
        return self.evaluate(z).g

    def jac_g(self, z) -> np.ndarray:
        return self.evaluate(z).jac

    def r(self, z) -> np.ndarray:
        return np.asarray(z)[self.layout["r"]]

    def t_solution(self, z) -> np.ndarray:
        return np.exp(self.r(z))

    def default_start(self) -> np.ndarray:
        raise NotImplementedError

    def interior_point(self) -> np.ndarray:
        raise NotImplementedError

    def random_point(self, rng: np.random.Generator, r_scale: float = 1.0) -> np.ndarray:
        """A random point inside the guarded domain (for derivative checks)."""
        raise NotImplementedError

    # helpers shared by builders

    def _certain_rows(self, r: np.ndarray):
        if self._certain is None:
            return np.zeros(0), np.zeros((0, r.size))
        return self._certain.log_values(r)

    def _objective_two_moment(self, r: np.ndarray):
        obj = self.problem.objective
        f = eval_logsum(obj, r)
        gf = grad_logsum(obj, r)
        g0 = self.problem.ambiguity.gamma1_obj
        if obj.cov is not None and g0 > 0:
            f += np.sqrt(g0) * eval_sqrt_quad(obj, r)
            gf = gf + np.sqrt(g0) * grad_sqrt_quad(obj, r)[0]
        return f, gf

    def _objective_mean(self, r: np.ndarray):
        obj = self.problem.objective
        return eval_logsum(obj, r), grad_logsum(obj, r)


def _check(p: RobustGP, kind: AmbiguityKind, couplings: tuple[Coupling, ...]):
    if p.ambiguity.kind is not kind:
        raise GPError(f"builder needs ambiguity {kind.value}, problem has {p.ambiguity.kind.value}")
    if p.coupling not in couplings:
        raise GPError(
            f"builder needs coupling in {[c.value for c in couplings]}, problem has {p.coupling.value}"
        )
    if kind is AmbiguityKind.TWO_MOMENT:
        for b in p.constraints:
            if b.cov is None:
                raise GPError(f"block {b.label}: two-moment ambiguity needs a covariance")


def _smooth_max_phase1(
    rows: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]], M: int, margin: float
) -> np.ndarray:
    """Find ``r`` with every row value ``<= -margin`` by minimizing a soft max."""
    tau = 20.0

    def fun(r):
        v, J = rows(r)
        m = v.max()
        w = np.exp(tau * (v - m))
        s = w.sum()
        return m + np.log(s) / tau, (w / s) @ J

    r = np.zeros(M)
    v, _ = rows(r)
    if v.max() <= -margin:
        return r
    found = []

    def stop(intermediate_result):
        if rows(intermediate_result.x)[0].max() <= -margin:
            found.append(intermediate_result.x.copy())
            raise StopIteration

    res = minimize(
        fun, r, jac=True, method="BFGS", callback=stop, options={"maxiter": 500, "gtol": 1e-10}
    )
    r = found[0] if found else res.x
    v, _ = rows(r)
    if v.max() > -margin:
        raise GPError(f"could not find a strictly feasible point (max row {v.max():.3e})")
    return r


class TwoMomentIndependent(SmoothProgram):
    kind = "two_moment_ind"

    def __init__(self, p: RobustGP):
        _check(p, AmbiguityKind.TWO_MOMENT, (Coupling.INDEPENDENT, Coupling.INDIVIDUAL))
        K, M = p.K, p.n_vars
        layout = VariableLayout.from_sizes([("r", M), ("x", K)])
        labels = [f"robust[{k}]" for k in range(K)]
        if p.coupling is Coupling.INDIVIDUAL:
            labels += [f"individual[{k}]" for k in range(K)]
        else:
            labels += ["coupling"]
        labels += [f"x[{k}]<=0" for k in range(K)]
        labels += [f"certain[{b.label}]" for b in p.certain]
        super().__init__(p, layout, labels)
        self._stack = BlockStack(p.constraints)
        g1, g2 = p.ambiguity.per_block(K)
        self._sg1 = np.sqrt(g1)
        self._sg2 = np.sqrt(g2)

    def clamp(self, z):
        xs = self.layout["x"]
        x = z[xs]
        if np.any(x > X_GUARD):
            z = z.copy()
            z[xs] = np.minimum(x, X_GUARD)
            return z, True
        return z, False

    def _robust(self, r, odds_sqrt, d_odds_sqrt):
        """Robust row values and their derivatives in r and in the odds variable."""
        p = self.problem
        L, JL = self._stack.values(r)
        K = p.K
        vals = L - 1.0
        Jr = JL.copy()
        Jo = np.zeros(K)
        for k, b in enumerate(p.constraints):
            q = eval_sqrt_quad(b, r)
            gq = grad_sqrt_quad(b, r)[0]
            c = self._sg1[k] + self._sg2[k] * odds_sqrt[k]
            vals[k] += c * q
            Jr[k] += c * gq
            Jo[k] = self._sg2[k] * q * d_odds_sqrt[k]
        return vals, Jr, Jo

    def _evaluate(self, z):
        p = self.problem
        K, M = p.K, p.n_vars
        r = z[self.layout["r"]]
        x = z[self.layout["x"]]
        ex = np.exp(x)
        odds_sqrt = np.sqrt(ex / (1.0 - ex))
        d_odds_sqrt = 0.5 * odds_sqrt / (1.0 - ex)
        rob, Jr, Jo = self._robust(r, odds_sqrt, d_odds_sqrt)
        f, gf_r = self._objective_two_moment(r)
        cert, Jc = self._certain_rows(r)

        n = self.n
        rs, xs = self.layout["r"], self.layout["x"]
        g = np.empty(self.n_g)
        J = np.zeros((self.n_g, n))
        g[:K] = rob
        J[:K, rs] = Jr
        J[np.arange(K), xs.start + np.arange(K)] = Jo
        row = K
        log1e = np.log(1.0 - p.epsilon)
        if p.coupling is Coupling.INDIVIDUAL:
            g[row : row + K] = log1e - x
            J[row + np.arange(K), xs.start + np.arange(K)] = -1.0
            row += K
        else:
            g[row] = log1e - x.sum()
            J[row, xs] = -1.0
            row += 1
        g[row : row + K] = x
        J[row + np.arange(K), xs.start + np.arange(K)] = 1.0
        row += K
        g[row:] = cert
        J[row:, rs] = Jc
        grad_f = np.zeros(n)
        grad_f[rs] = gf_r
        return Evaluation(f, grad_f, g, J)

    def _slack_x(self) -> np.ndarray:
        p = self.problem
        return np.full(p.K, np.log(1.0 - p.epsilon / (2 * p.K)))

    def default_start(self):
        z = np.zeros(self.n)
        z[self.layout["x"]] = self._slack_x()
        return z

    def interior_point(self):
        """``x`` at half the epsilon budget; ``r`` from a soft-max phase one."""
        x = self._slack_x()
        ex = np.exp(x)
        odds_sqrt = np.sqrt(ex / (1 - ex))

        def rows(r):
            v, Jr, _ = self._robust(r, odds_sqrt, np.zeros_like(x))
            c, Jc = self._certain_rows(r)
            return np.concatenate([v, c]), np.vstack([Jr, Jc])

        z = np.zeros(self.n)
        z[self.layout["r"]] = _smooth_max_phase1(rows, self.problem.n_vars, 1e-3)
        z[self.layout["x"]] = x
        return z

    def random_point(self, rng, r_scale=1.0):
        p = self.problem
        z = np.zeros(self.n)
        z[self.layout["r"]] = rng.normal(scale=r_scale, size=p.n_vars)
        z[self.layout["x"]] = np.log(rng.uniform(0.5, 0.99, size=p.K))
        return z


class TwoMomentDependent(SmoothProgram):
    kind = "two_moment_dep"

    def __init__(self, p: RobustGP):
        _check(p, AmbiguityKind.TWO_MOMENT, (Coupling.DEPENDENT,))
        K, M = p.K, p.n_vars
        layout = VariableLayout.from_sizes([("r", M), ("y", K)])
        labels = [f"robust[{k}]" for k in range(K)] + ["coupling"]
        labels += [f"y[{k}]<=1" for k in range(K)]
        labels += [f"certain[{b.label}]" for b in p.certain]
        super().__init__(p, layout, labels)
        self._stack = BlockStack(p.constraints)
        g1, g2 = p.ambiguity.per_block(K)
        self._sg1 = np.sqrt(g1)
        self._sg2 = np.sqrt(g2)
        self._y_lo = 1.0 - p.epsilon - Y_LOWER_SLACK

    def clamp(self, z):
        ys = self.layout["y"]
        y = z[ys]
        if np.any(y > Y_GUARD) or np.any(y < self._y_lo):
            z = z.copy()
            z[ys] = np.clip(y, self._y_lo, Y_GUARD)
            return z, True
        return z, False

    _robust = TwoMomentIndependent._robust

    def _evaluate(self, z):
        p = self.problem
        K = p.K
        rs, ys = self.layout["r"], self.layout["y"]
        r = z[rs]
        y = z[ys]
        odds_sqrt = np.sqrt(y / (1.0 - y))
        d_odds_sqrt = 0.5 / (np.sqrt(y) * (1.0 - y) ** 1.5)
        rob, Jr, Jo = self._robust(r, odds_sqrt, d_odds_sqrt)
        f, gf_r = self._objective_two_moment(r)
        cert, Jc = self._certain_rows(r)

        g = np.empty(self.n_g)
        J = np.zeros((self.n_g, self.n))
        idx = np.arange(K)
        g[:K] = rob
        J[:K, rs] = Jr
        J[idx, ys.start + idx] = Jo
        g[K] = (K - p.epsilon) - y.sum()
        J[K, ys] = -1.0
        g[K + 1 : 2 * K + 1] = y - 1.0
        J[K + 1 + idx, ys.start + idx] = 1.0
        g[2 * K + 1 :] = cert
        J[2 * K + 1 :, rs] = Jc
        grad_f = np.zeros(self.n)
        grad_f[rs] = gf_r
        return Evaluation(f, grad_f, g, J)

    def _slack_y(self):
        p = self.problem
        return np.full(p.K, 1.0 - p.epsilon / (2 * p.K))

    def default_start(self):
        z = np.zeros(self.n)
        z[self.layout["y"]] = self._slack_y()
        return z

    def interior_point(self):
        y = self._slack_y()
        odds_sqrt = np.sqrt(y / (1 - y))

        def rows(r):
            v, Jr, _ = self._robust(r, odds_sqrt, np.zeros_like(y))
            c, Jc = self._certain_rows(r)
            return np.concatenate([v, c]), np.vstack([Jr, Jc])

        z = np.zeros(self.n)
        z[self.layout["r"]] = _smooth_max_phase1(rows, self.problem.n_vars, 1e-3)
        z[self.layout["y"]] = y
        return z

    def random_point(self, rng, r_scale=1.0):
        p = self.problem
        z = np.zeros(self.n)
        z[self.layout["r"]] = rng.normal(scale=r_scale, size=p.n_vars)
        z[self.layout["y"]] = rng.uniform(max(self._y_lo, 0.5) + 1e-3, 0.99, size=p.K)
        return z


class _NonnegSupport(SmoothProgram):
    """Shared pieces of the two first-moment/nonnegative-support programs."""

    def _dual_blocks(self, z):
        """Dual-feasibility sums and linking rows (values and Jacobian blocks)."""
        p = self.problem
        lay = self.layout
        r = z[lay["r"]]
        lam = z[lay["lam"]]
        beta = z[lay["beta"]]
        pi = z[lay["pi"]]
        row_of_term = self._row_of_term
        # exp(-lam_k + beta_ik + log mu_ik), summed per block
        e = np.exp(-lam[row_of_term] + beta + self._log_mu)
        S = np.bincount(row_of_term, weights=e, minlength=p.K)
        link = pi[row_of_term] + self._A @ r - beta
        return r, lam, beta, pi, e, S, link

    def _fill_common(self, g, J, row, z, e, S, link, lam, pi):
        """Rows lam_k, lam_k - pi_k and the linking rows, starting at ``row``."""
        p = self.problem
        K = p.K
        lay = self.layout
        idx = np.arange(K)
        ls, bs, ps, rs = lay["lam"], lay["beta"], lay["pi"], lay["r"]
        g[row : row + K] = lam
        J[row + idx, ls.start + idx] = 1.0
        row += K
        g[row : row + K] = lam - pi
        J[row + idx, ls.start + idx] = 1.0
        J[row + idx, ps.start + idx] = -1.0
        row += K
        T = self._A.shape[0]
        tidx = np.arange(T)
        g[row : row + T] = link
        J[row : row + T, rs] = self._A
        J[row + tidx, ps.start + self._row_of_term] = 1.0
        J[row + tidx, bs.start + tidx] = -1.0
        row += T
        return row

    def _setup_terms(self):
        p = self.problem
        self._A = np.vstack([b.exponents for b in p.constraints])
        self._log_mu = np.concatenate([b.log_mu for b in p.constraints])
        self._row_of_term = np.repeat(np.arange(p.K), p.term_counts)

    def _duals_for(self, r, y):
        """Dual variables making the dual-feasibility rows strictly slack.

        With ``ell = (1 + y) / 2`` and offset ``delta`` the k-th dual row
        equals ``y / ell + exp(2 delta) P_k(r) - 1`` where ``P_k`` is the mean
        posynomial, so it is negative whenever ``P_k`` is small enough.
        """
        delta = 1e-2
        lam = np.log((1.0 + y) / 2.0)
        pi = lam + delta
        beta = pi[self._row_of_term] + self._A @ r + delta
        return lam, beta, pi, delta

    def _phase1_r(self, y):
        p = self.problem
        ell = (1.0 + y) / 2.0
        delta = 1e-2
        # need exp(2 delta) P_k(r) < 1 - y / ell
        log_target = np.log(1.0 - y / ell) - 2 * delta
        stack = BlockStack(p.constraints)

        def rows(r):
            v, J = stack.log_values(r)
            c, Jc = self._certain_rows(r)
            return np.concatenate([v - log_target, c]), np.vstack([J, Jc])

        return _smooth_max_phase1(rows, p.n_vars, 1e-3)


class NonnegIndependent(_NonnegSupport):
    kind = "ns_ind"

    def __init__(self, p: RobustGP):
        _check(p, AmbiguityKind.FIRST_MOMENT_NONNEG, (Coupling.INDEPENDENT, Coupling.INDIVIDUAL))
        K, M = p.K, p.n_vars
        T = sum(p.term_counts)
        layout = VariableLayout.from_sizes(
            [("r", M), ("x", K), ("lam", K), ("beta", T), ("pi", K)]
        )
        if p.coupling is Coupling.INDIVIDUAL:
            labels = [f"individual[{k}]" for k in range(K)]
        else:
            labels = ["coupling"]
        labels += [f"x[{k}]<=0" for k in range(K)]
        labels += [f"dual[{k}]" for k in range(K)]
        labels += [f"lam[{k}]<=0" for k in range(K)]
        labels += [f"lam[{k}]<=pi[{k}]" for k in range(K)]
        labels += [f"link[{k},{i}]" for k, b in enumerate(p.constraints) for i in range(b.n_terms)]
        labels += [f"certain[{b.label}]" for b in p.certain]
        super().__init__(p, layout, labels)
        self._setup_terms()

    def _evaluate(self, z):
        p = self.problem
        K = p.K
        lay = self.layout
        xs, ls, bs = lay["x"], lay["lam"], lay["beta"]
        r, lam, beta, pi, e, S, link = self._dual_blocks(z)
        x = z[xs]
        idx = np.arange(K)
        g = np.empty(self.n_g)
        J = np.zeros((self.n_g, self.n))
        row = 0
        log1e = np.log(1.0 - p.epsilon)
        if p.coupling is Coupling.INDIVIDUAL:
            g[:K] = log1e - x
            J[idx, xs.start + idx] = -1.0
            row = K
        else:
            g[0] = log1e - x.sum()
            J[0, xs] = -1.0
            row = 1
        g[row : row + K] = x
        J[row + idx, xs.start + idx] = 1.0
        row += K
        ex = np.exp(x - lam)
        g[row : row + K] = ex + S - 1.0
        J[row + idx, xs.start + idx] = ex
        J[row + idx, ls.start + idx] = -ex - S
        J[row + self._row_of_term, bs.start + np.arange(e.size)] = e
        row += K
        row = self._fill_common(g, J, row, z, e, S, link, lam, pi)
        cert, Jc = self._certain_rows(r)
        g[row:] = cert
        J[row:, lay["r"]] = Jc
        f, gf_r = self._objective_mean(r)
        grad_f = np.zeros(self.n)
        grad_f[lay["r"]] = gf_r
        return Evaluation(f, grad_f, g, J)

    def _slack_x(self):
        p = self.problem
        return np.full(p.K, np.log(1.0 - p.epsilon / (2 * p.K)))

    def _assemble(self, r, x):
        lam, beta, pi, _ = self._duals_for(r, np.exp(x))
        z = np.zeros(self.n)
        lay = self.layout
        z[lay["r"]] = r
        z[lay["x"]] = x
        z[lay["lam"]] = lam
        z[lay["beta"]] = beta
        z[lay["pi"]] = pi
        return z

    def default_start(self):
        return self._assemble(np.zeros(self.problem.n_vars), self._slack_x())

    def interior_point(self):
        x = self._slack_x()
        return self._assemble(self._phase1_r(np.exp(x)), x)

    def random_point(self, rng, r_scale=1.0):
        p = self.problem
        z = np.zeros(self.n)
        lay = self.layout
        z[lay["r"]] = rng.normal(scale=r_scale, size=p.n_vars)
        z[lay["x"]] = np.log(rng.uniform(0.5, 0.99, size=p.K))
        z[lay["lam"]] = rng.normal(scale=0.5, size=p.K) - 0.5
        z[lay["beta"]] = rng.normal(scale=1.0, size=lay["beta"].stop - lay["beta"].start) - 2
        z[lay["pi"]] = rng.normal(scale=0.5, size=p.K)
        return z


class NonnegDependent(_NonnegSupport):
    """Biconvex program: convex in ``z = (r, lam, beta, pi)`` and linear in ``y``."""

    kind = "ns_dep"
    convexity = Convexity.BICONVEX

    def __init__(self, p: RobustGP):
        _check(p, AmbiguityKind.FIRST_MOMENT_NONNEG, (Coupling.DEPENDENT,))
        K, M = p.K, p.n_vars
        T = sum(p.term_counts)
        layout = VariableLayout.from_sizes(
            [("r", M), ("lam", K), ("beta", T), ("pi", K), ("y", K)]
        )
        labels = ["coupling"]
        labels += [f"y[{k}]>=0" for k in range(K)]
        labels += [f"y[{k}]<=1" for k in range(K)]
        labels += [f"dual[{k}]" for k in range(K)]
        labels += [f"lam[{k}]<=0" for k in range(K)]
        labels += [f"lam[{k}]<=pi[{k}]" for k in range(K)]
        labels += [f"link[{k},{i}]" for k, b in enumerate(p.constraints) for i in range(b.n_terms)]
        labels += [f"certain[{b.label}]" for b in p.certain]
        super().__init__(p, layout, labels)
        self._setup_terms()

    @property
    def z_slice(self):
        return slice(0, self.layout["y"].start)

    @property
    def y_slice(self):
        return self.layout["y"]

    def _evaluate(self, z):
        p = self.problem
        K = p.K
        lay = self.layout
        ys, ls, bs = lay["y"], lay["lam"], lay["beta"]
        r, lam, beta, pi, e, S, link = self._dual_blocks(z)
        y = z[ys]
        idx = np.arange(K)
        g = np.empty(self.n_g)
        J = np.zeros((self.n_g, self.n))
        g[0] = (K - p.epsilon) - y.sum()
        J[0, ys] = -1.0
        g[1 : K + 1] = -y
        J[1 + idx, ys.start + idx] = -1.0
        g[K + 1 : 2 * K + 1] = y - 1.0
        J[K + 1 + idx, ys.start + idx] = 1.0
        row = 2 * K + 1
        el = np.exp(-lam)
        g[row : row + K] = y * el + S - 1.0
        J[row + idx, ys.start + idx] = el
        J[row + idx, ls.start + idx] = -y * el - S
        J[row + self._row_of_term, bs.start + np.arange(e.size)] = e
        row += K
        row = self._fill_common(g, J, row, z, e, S, link, lam, pi)
        cert, Jc = self._certain_rows(r)
        g[row:] = cert
        J[row:, lay["r"]] = Jc
        f, gf_r = self._objective_mean(r)
        grad_f = np.zeros(self.n)
        grad_f[lay["r"]] = gf_r
        return Evaluation(f, grad_f, g, J)

    def _slack_y(self):
        p = self.problem
        return np.full(p.K, 1.0 - p.epsilon / (2 * p.K))

    def _assemble(self, r, y):
        lam, beta, pi, _ = self._duals_for(r, y)
        z = np.zeros(self.n)
        lay = self.layout
        z[lay["r"]] = r
        z[lay["y"]] = y
        z[lay["lam"]] = lam
        z[lay["beta"]] = beta
        z[lay["pi"]] = pi
        return z

    def default_start(self):
        return self._assemble(np.zeros(self.problem.n_vars), self._slack_y())

    def interior_point(self):
        y = self._slack_y()
        return self._assemble(self._phase1_r(y), y)

    def random_point(self, rng, r_scale=1.0):
        p = self.problem
        z = np.zeros(self.n)
        lay = self.layout
        z[lay["r"]] = rng.normal(scale=r_scale, size=p.n_vars)
        z[lay["y"]] = rng.uniform(0.0, 1.0, size=p.K)
        z[lay["lam"]] = rng.normal(scale=0.5, size=p.K) - 0.5
        z[lay["beta"]] = rng.normal(scale=1.0, size=lay["beta"].stop - lay["beta"].start) - 2
        z[lay["pi"]] = rng.normal(scale=0.5, size=p.K)
        return z


def build_two_moment_ind(p: RobustGP) -> TwoMomentIndependent:
    return TwoMomentIndependent(p)


def build_two_moment_dep(p: RobustGP) -> TwoMomentDependent:
    return TwoMomentDependent(p)


def build_ns_ind(p: RobustGP) -> NonnegIndependent:
    return NonnegIndependent(p)


def build_ns_dep(p: RobustGP) -> NonnegDependent:
    return NonnegDependent(p)


def build(p: RobustGP) -> SmoothProgram:
    """Pick the compilation matching the problem's ambiguity kind and coupling."""
    if p.ambiguity.kind is AmbiguityKind.TWO_MOMENT:
        if p.coupling is Coupling.DEPENDENT:
            return TwoMomentDependent(p)
        return TwoMomentIndependent(p)
    if p.coupling is Coupling.DEPENDENT:
        return NonnegDependent(p)
    return NonnegIndependent(p)


def eval_g(sp: SmoothProgram, point) -> tuple[np.ndarray, bool]:
    ev = sp.evaluate(point)
    return ev.g, ev.clamped


def jac_g(sp: SmoothProgram, point) -> tuple[np.ndarray, bool]:
    ev = sp.evaluate(point)
    return ev.jac, ev.clamped
