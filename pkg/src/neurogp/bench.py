"""Benchmark instance generators.

Three families: the open 3D box (volume maximisation under random wall and
floor areas), the m-dimensional box with ratio constraints, and max-min SINR
power allocation.
"""

from __future__ import annotations

import itertools

import numpy as np

from .gp_core import AmbiguityKind, AmbiguityParams, PosynomialBlock
from .reformulate import Coupling, RobustGP

BOX_WALL_MEAN = 0.05
BOX_WALL_SD = 0.01
BOX_FLOOR_MEAN = 0.5
BOX_FLOOR_SD = 0.1
BOX_EPS_SWEEP = (0.05, 0.10, 0.15, 0.20)

SHAPE_MU_RANGE = (1.0 / 40.0, 1.0 / 20.0)
SHAPE_COV_RANGE = (0.001, 0.01)
SHAPE_RATIO = 0.5

SINR_P_MIN = 0.1
SINR_P_MAX = 10.0
SINR_A_RANGE = (0.01, 0.1)
SINR_B_RANGE = (0.05, 0.2)

NS_DEFAULT_SD_FRACTION = 0.2


def _ambiguity(kind, gamma1, gamma2):
    return AmbiguityParams(kind=AmbiguityKind(kind), gamma1=gamma1, gamma2=gamma2)


def make_box3d(
    eps: float,
    coupling: Coupling | str = Coupling.INDEPENDENT,
    gamma1: float = 2.0,
    gamma2: float = 2.0,
) -> RobustGP:
    """Open box of maximal volume under random inverse wall and floor areas.

    Each wall term ``t2 t3`` and ``t1 t3`` carries a coefficient with mean
    ``BOX_WALL_MEAN``; the floor term ``t1 t2`` has mean ``BOX_FLOOR_MEAN``.
    The given spreads are standard deviations, so the covariance diagonals
    hold their squares.
    """
    objective = PosynomialBlock(np.array([[-1.0, -1.0, -1.0]]), np.array([1.0]), label=0)
    wall = PosynomialBlock(
        np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0]]),
        np.array([BOX_WALL_MEAN, BOX_WALL_MEAN]),
        np.diag([BOX_WALL_SD**2] * 2),
        label=1,
    )
    floor = PosynomialBlock(
        np.array([[1.0, 1.0, 0.0]]),
        np.array([BOX_FLOOR_MEAN]),
        np.array([[BOX_FLOOR_SD**2]]),
        label=2,
    )
    return RobustGP(
        objective,
        (wall, floor),
        _ambiguity(AmbiguityKind.TWO_MOMENT, gamma1, gamma2),
        eps,
        Coupling(coupling),
        name=f"box3d-eps{eps:g}-{Coupling(coupling).value}",
    )


def _psd_nonneg(S: np.ndarray) -> np.ndarray:
    """Symmetrize and lift the diagonal until PSD; entries stay nonnegative."""
    S = 0.5 * (S + S.T)
    lo = np.linalg.eigvalsh(S).min()
    if lo < 0:
        S = S + (-lo + 1e-12) * np.eye(S.shape[0])
    return S


def make_multishape(
    m: int,
    eps: float,
    seed: int = 0,
    kind: AmbiguityKind | str = AmbiguityKind.TWO_MOMENT,
    coupling: Coupling | str = Coupling.INDEPENDENT,
    gamma1: float = 2.0,
    gamma2: float = 2.0,
) -> RobustGP:
    """m-dimensional box with one wall row, one floor row and ratio limits.

    ``x_1`` is the height. The wall row sums ``(m - 1) c_j x_1 prod_{i != 1, j} x_i``
    over ``j = 2..m``; the floor row is ``c_floor prod_{j >= 2} x_j``. The
    certain rows bound every ratio ``x_i / x_j`` by ``1 / SHAPE_RATIO``.
    """
    if m < 3:
        raise ValueError("m must be >= 3")
    kind = AmbiguityKind(kind)
    rng = np.random.default_rng(seed)
    mu = rng.uniform(*SHAPE_MU_RANGE, size=m)

    wall_rows = []
    for j in range(1, m):
        a = np.ones(m)
        a[j] = 0.0
        wall_rows.append(a)
    wall_exp = np.array(wall_rows)
    floor_exp = np.ones((1, m))
    floor_exp[0, 0] = 0.0

    wall_cov = floor_cov = None
    if kind is AmbiguityKind.TWO_MOMENT:
        wall_cov = _psd_nonneg(rng.uniform(*SHAPE_COV_RANGE, size=(m - 1, m - 1)))
        floor_cov = np.array([[rng.uniform(*SHAPE_COV_RANGE)]])

    wall = PosynomialBlock(wall_exp, (m - 1) * mu[: m - 1], wall_cov, label=1)
    floor = PosynomialBlock(floor_exp, mu[m - 1 :], floor_cov, label=2)
    objective = PosynomialBlock(-np.ones((1, m)), np.array([1.0]), label=0)

    certain = []
    for lab, (i, j) in enumerate(itertools.permutations(range(m), 2), start=3):
        a = np.zeros((1, m))
        a[0, i] = 1.0
        a[0, j] = -1.0
        certain.append(PosynomialBlock(a, np.array([SHAPE_RATIO]), label=lab))

    return RobustGP(
        objective,
        (wall, floor),
        _ambiguity(kind, gamma1, gamma2),
        eps,
        Coupling(coupling),
        tuple(certain),
        name=f"shape-m{m}-{kind.value}-{Coupling(coupling).value}-s{seed}",
    )


def make_sinr(
    K: int,
    joint: bool = True,
    eps: float = 0.2,
    seed: int = 0,
    p_min: float = SINR_P_MIN,
    p_max: float = SINR_P_MAX,
) -> RobustGP:
    """Max-min SINR power allocation as a GP in ``(p_1..p_K, w)``.

    Row ``i``: ``sum_{j != i} a_ij p_j p_i^-1 w + b_i p_i^-1 w <= 1`` with
    first-moment/nonnegative-support ambiguity on ``(a_ij, b_i)``. The joint
    variant uses dependent coupling; the individual variant imposes each row
    at level ``1 - eps`` on its own.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    rng = np.random.default_rng(seed)
    a_mean = rng.uniform(*SINR_A_RANGE, size=(K, K))
    b_mean = rng.uniform(*SINR_B_RANGE, size=K)
    M = K + 1
    blocks = []
    for i in range(K):
        rows, coeffs = [], []
        for j in range(K):
            if j == i:
                continue
            a = np.zeros(M)
            a[j] += 1.0
            a[i] -= 1.0
            a[K] = 1.0
            rows.append(a)
            coeffs.append(a_mean[i, j])
        a = np.zeros(M)
        a[i] = -1.0
        a[K] = 1.0
        rows.append(a)
        coeffs.append(b_mean[i])
        blocks.append(PosynomialBlock(np.array(rows), np.array(coeffs), label=i + 1))

    objective = np.zeros((1, M))
    objective[0, K] = -1.0
    certain = []
    lab = K + 1
    for i in range(K):
        lo = np.zeros((1, M))
        lo[0, i] = -1.0
        certain.append(PosynomialBlock(lo, np.array([p_min]), label=lab))
        hi = np.zeros((1, M))
        hi[0, i] = 1.0
        certain.append(PosynomialBlock(hi, np.array([1.0 / p_max]), label=lab + 1))
        lab += 2

    coupling = Coupling.DEPENDENT if joint else Coupling.INDIVIDUAL
    return RobustGP(
        PosynomialBlock(objective, np.array([1.0]), label=0),
        tuple(blocks),
        _ambiguity(AmbiguityKind.FIRST_MOMENT_NONNEG, 0.0, 0.0),
        eps,
        coupling,
        tuple(certain),
        name=f"sinr-K{K}-{'joint' if joint else 'individual'}-s{seed}",
    )
