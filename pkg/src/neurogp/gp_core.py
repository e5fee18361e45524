"""Posynomial kernels in log-space.

Every robust constraint the solvers touch is assembled from two scalar
fields over ``r = log t``:

* the mean posynomial ``sum_i mu_i exp(a_i . r)``
* the spread term ``sqrt(sum_il sigma_il exp((a_i + a_l) . r + shift))``

Both are evaluated with a max-shift so that transient ODE states with large
``|r|`` do not overflow.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

RADICAND_CLAMP = -1e-12
SINGULAR_RADICAND = 1e-8


class GPError(ValueError):
    """Raised on malformed posynomial data or invalid evaluation points."""


class AmbiguityKind(str, enum.Enum):
    TWO_MOMENT = "two_moment"
    FIRST_MOMENT_NONNEG = "first_moment_nonneg"


@dataclass(frozen=True)
class PosynomialBlock:
    """Exponents and coefficient moments of one posynomial.

    Attributes
    ----------
    exponents : ndarray, shape (I, M)
        Row ``i`` holds the exponents of term ``i`` over the ``M`` variables.
    mean_coeffs : ndarray, shape (I,)
        Strictly positive coefficient means.
    cov : ndarray, shape (I, I), optional
        Coefficient covariance. Entries must be nonnegative and the matrix PSD.
    label : int
        Constraint index (0 is the objective).
    """

    exponents: np.ndarray
    mean_coeffs: np.ndarray
    cov: np.ndarray | None = None
    label: int = 0
    _log_mu: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.exponents, dtype=float))
        mu = np.atleast_1d(np.asarray(self.mean_coeffs, dtype=float))
        if a.shape[0] != mu.shape[0]:
            raise GPError(
                f"block {self.label}: {a.shape[0]} exponent rows but {mu.shape[0]} coefficients"
            )
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(mu)):
            raise GPError(f"block {self.label}: non-finite data")
        if np.any(mu <= 0):
            raise GPError(f"block {self.label}: coefficient means must be > 0")
        cov = self.cov
        if cov is not None:
            cov = np.atleast_2d(np.asarray(cov, dtype=float))
            if cov.shape != (mu.shape[0], mu.shape[0]):
                raise GPError(f"block {self.label}: covariance shape {cov.shape} != {(mu.size, mu.size)}")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise GPError(f"block {self.label}: covariance not symmetric")
            if np.any(cov < 0):
                raise GPError(f"block {self.label}: covariance entries must be >= 0")
            if np.linalg.eigvalsh(cov).min() < -1e-10 * max(1.0, np.abs(cov).max()):
                raise GPError(f"block {self.label}: covariance not positive semidefinite")
            cov.setflags(write=False)
        a.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "exponents", a)
        object.__setattr__(self, "mean_coeffs", mu)
        object.__setattr__(self, "cov", cov)
        log_mu = np.log(mu)
        log_mu.setflags(write=False)
        object.__setattr__(self, "_log_mu", log_mu)

    @property
    def n_terms(self) -> int:
        return self.exponents.shape[0]

    @property
    def n_vars(self) -> int:
        return self.exponents.shape[1]

    @property
    def log_mu(self) -> np.ndarray:
        return self._log_mu

    def with_means(self, mean_coeffs) -> "PosynomialBlock":
        return PosynomialBlock(self.exponents, mean_coeffs, self.cov, self.label)


@dataclass(frozen=True)
class AmbiguityParams:
    """Ambiguity-set data shared by all constraint blocks.

    ``gamma1``/``gamma2`` are broadcast to one value per constraint block and
    are ignored for :attr:`AmbiguityKind.FIRST_MOMENT_NONNEG`.
    ``gamma1_obj`` scales the objective's spread term when the objective
    carries a covariance.
    """

    kind: AmbiguityKind = AmbiguityKind.TWO_MOMENT
    gamma1: float | Sequence[float] = 2.0
    gamma2: float | Sequence[float] = 2.0
    gamma1_obj: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", AmbiguityKind(self.kind))
        for name in ("gamma1", "gamma2"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise GPError(f"{name} must be finite and >= 0")
        if self.gamma1_obj < 0:
            raise GPError("gamma1_obj must be >= 0")

    def per_block(self, n_blocks: int) -> tuple[np.ndarray, np.ndarray]:
        out = []
        for name in ("gamma1", "gamma2"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if v.size == 1:
                v = np.full(n_blocks, v[0])
            elif v.size != n_blocks:
                raise GPError(f"{name} has {v.size} entries for {n_blocks} blocks")
            out.append(v)
        return out[0], out[1]


def _check_point(block: PosynomialBlock, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.shape[0] != block.n_vars:
        raise GPError(f"point has shape {r.shape}, block expects ({block.n_vars},)")
    if not np.all(np.isfinite(r)):
        raise GPError("non-finite evaluation point")
    return r


def _shifted_terms(block: PosynomialBlock, r: np.ndarray) -> tuple[np.ndarray, float]:
    s = block.exponents @ r
    m = float(s.max())
    return np.exp(s - m), m


def eval_logsum(block: PosynomialBlock, r) -> float:
    """Mean posynomial ``sum_i mu_i exp(a_i . r)``."""
    r = _check_point(block, r)
    s = block.exponents @ r + block.log_mu
    m = s.max()
    return float(np.exp(m) * np.exp(s - m).sum())


def grad_logsum(block: PosynomialBlock, r) -> np.ndarray:
    r = _check_point(block, r)
    s = block.exponents @ r + block.log_mu
    m = s.max()
    return np.exp(m) * (block.exponents.T @ np.exp(s - m))


def _radicand(block: PosynomialBlock, r: np.ndarray, shift: float):
    if block.cov is None:
        raise GPError(f"block {block.label} has no covariance")
    if not np.isfinite(shift):
        raise GPError("non-finite shift")
    e, m = _shifted_terms(block, r)
    se = block.cov @ e
    core = float(e @ se)
    if core < RADICAND_CLAMP * max(1.0, float(np.abs(block.cov).sum())):
        raise GPError(f"block {block.label}: negative radicand {core:.3e}")
    return max(core, 0.0), e, se, m


def eval_sqrt_quad(block: PosynomialBlock, r, shift: float = 0.0) -> float:
    """Spread term ``sqrt(sum_il sigma_il exp((a_i + a_l) . r + shift))``."""
    r = _check_point(block, r)
    core, _, _, m = _radicand(block, r, shift)
    if core == 0.0:
        return 0.0
    return float(np.exp(m + 0.5 * shift) * np.sqrt(core))


def grad_sqrt_quad(block: PosynomialBlock, r, shift: float = 0.0) -> tuple[np.ndarray, float]:
    """Gradient of :func:`eval_sqrt_quad` in ``r`` and its derivative in ``shift``.

    At a zero radicand the term is not differentiable; a zero gradient is
    returned there.
    """
    r = _check_point(block, r)
    core, e, se, m = _radicand(block, r, shift)
    if core == 0.0:
        return np.zeros(block.n_vars), 0.0
    root = np.sqrt(core)
    scale = np.exp(m + 0.5 * shift)
    grad_r = scale * (block.exponents.T @ (e * se)) / root
    return grad_r, 0.5 * scale * root


def radicand(block: PosynomialBlock, r, shift: float = 0.0) -> float:
    """Unshifted-scale radicand value, used to flag singular probe points."""
    r = _check_point(block, r)
    core, _, _, m = _radicand(block, r, shift)
    return float(core * np.exp(2 * m + shift))


@dataclass
class FDCheck:
    max_rel_error: float
    n_checked: int
    skipped: list = field(default_factory=list)


def central_difference(fn: Callable[[np.ndarray], float], x, rel_step: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2 * h)
    return g


def finite_diff_check(
    fn: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    points: Iterable,
    rel_step: float = 1e-6,
    singular: Callable[[np.ndarray], bool] | None = None,
) -> FDCheck:
    """Compare an analytic gradient with central differences.

    Returns the max over probe points of
    ``||grad - fd|| / max(1, ||fd||)``. Points for which ``singular`` returns
    True are skipped and recorded.
    """
    worst = 0.0
    checked = 0
    skipped = []
    for p in points:
        p = np.asarray(p, dtype=float)
        if singular is not None and singular(p):
            skipped.append(p)
            continue
        fd = central_difference(fn, p, rel_step)
        an = np.asarray(grad(p), dtype=float)
        err = np.linalg.norm(an - fd) / max(1.0, np.linalg.norm(fd))
        worst = max(worst, float(err))
        checked += 1
    return FDCheck(worst, checked, skipped)


class BlockStack:
    """Vectorized evaluation of ``sum_i mu_i exp(a_i . r)`` for many blocks.

    Terms of all blocks are stacked so one matrix product serves every row.
    Values are computed with a per-row max-shift.
    """

    def __init__(self, blocks: Sequence[PosynomialBlock]):
        if not blocks:
            raise GPError("empty block stack")
        self.blocks = tuple(blocks)
        self.A = np.vstack([b.exponents for b in blocks])
        self.log_mu = np.concatenate([b.log_mu for b in blocks])
        sizes = np.array([b.n_terms for b in blocks])
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        self.row_of_term = np.repeat(np.arange(len(blocks)), sizes)
        self.n_rows = len(blocks)

    def terms(self, r: np.ndarray, extra: np.ndarray | None = None):
        """Per-term log-values, per-row max and shifted exponentials."""
        s = self.A @ r + self.log_mu
        if extra is not None:
            s = s + extra
        m = np.maximum.reduceat(s, self.starts)
        w = np.exp(s - m[self.row_of_term])
        return s, m, w

    def values(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Row values and their Jacobian w.r.t. ``r`` (rows x M)."""
        _, m, w = self.terms(r)
        em = np.exp(m)
        vals = em * np.add.reduceat(w, self.starts)
        weighted = (w * em[self.row_of_term])[:, None] * self.A
        jac = np.add.reduceat(weighted, self.starts, axis=0)
        return vals, jac

    def log_values(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``log`` of the row values and the Jacobian of those logs."""
        _, m, w = self.terms(r)
        tot = np.add.reduceat(w, self.starts)
        vals = m + np.log(tot)
        p = w / tot[self.row_of_term]
        jac = np.add.reduceat(p[:, None] * self.A, self.starts, axis=0)
        return vals, jac
