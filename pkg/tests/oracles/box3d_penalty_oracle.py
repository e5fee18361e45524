"""Exact-penalty subgradient oracle for the independent open-box program.

Written from the closed-form model only (no package imports) so it can
check the solver independently. Variables: r = log t (3 entries) and
x_k = log(1 - eps_k) for the two rows. The program is

    min  exp(-r1 - r2 - r3)
    s.t. sum_i mu_i e^{a_i.r} + (sqrt(g1) + sqrt(g2) sqrt(e^x/(1-e^x))) sqrt(v' S v) <= 1
         x_1 + x_2 >= log(1 - eps),  x_k <= 0

and the oracle minimizes f + M * sum(max(0, g)) by projected, normalized
subgradient steps of length STEP0 / sqrt(k + 1), keeping the best penalized
value. M = 5 exceeds every multiplier of this instance (the largest is
about 2.3), so the penalty is exact.

Run ``python3 tests/oracles/box3d_penalty_oracle.py`` to regenerate
``tests/data/box3d_oracle.json``.
"""

import json
import math
import sys
import time
from pathlib import Path

import numpy as np

EPS = 0.05
GAMMA1 = GAMMA2 = 2.0
WALL_MU, WALL_SD = 0.05, 0.01
FLOOR_MU, FLOOR_SD = 0.5, 0.1
PENALTY = 5.0
ITERATIONS = 1_000_000
STEP0 = 0.2
X_MAX = -1e-9

ROWS = [
    (np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0]]), np.array([WALL_MU, WALL_MU]), np.array([WALL_SD**2] * 2)),
    (np.array([[1.0, 1.0, 0.0]]), np.array([FLOOR_MU]), np.array([FLOOR_SD**2])),
]


def pieces(r, x):
    """Objective, constraint values and their gradients in (r, x)."""
    f = math.exp(-r.sum())
    gf = np.concatenate([-f * np.ones(3), np.zeros(2)])
    gs, Gs = [], []
    for k, (A, mu, var) in enumerate(ROWS):
        v = np.exp(A @ r)
        mean = mu @ v
        q = math.sqrt(var @ (v * v))
        ex = math.exp(x[k])
        s = math.sqrt(ex / (1.0 - ex))
        c = math.sqrt(GAMMA1) + math.sqrt(GAMMA2) * s
        g = mean + c * q - 1.0
        dmean = A.T @ (mu * v)
        dq = A.T @ (var * v * v) / q
        grad = np.zeros(5)
        grad[:3] = dmean + c * dq
        grad[3 + k] = math.sqrt(GAMMA2) * q * 0.5 * s / (1.0 - ex)
        gs.append(g)
        Gs.append(grad)
    coup = math.log(1.0 - EPS) - x.sum()
    gs.append(coup)
    Gs.append(np.array([0, 0, 0, -1.0, -1.0]))
    return f, gf, np.array(gs), np.array(Gs)


def penalized(z):
    f, gf, g, G = pieces(z[:3], z[3:])
    viol = np.maximum(g, 0.0)
    sub = gf + PENALTY * G[g > 0].sum(axis=0)
    return f + PENALTY * viol.sum(), f, viol.max(), sub


def run(iterations=ITERATIONS, step0=STEP0):
    z = np.array([0.0, 0.0, 0.0, math.log(1 - EPS / 2), math.log(1 - EPS / 2)])
    best = (math.inf, None, None, None)
    for k in range(iterations):
        F, f, vmax, sub = penalized(z)
        if F < best[0]:
            best = (F, f, vmax, z.copy())
        norm = np.linalg.norm(sub)
        if norm == 0:
            break
        z = z - step0 / math.sqrt(k + 1.0) * sub / norm
        z[3:] = np.minimum(z[3:], X_MAX)
    return best


if __name__ == "__main__":
    t0 = time.time()
    F, f, vmax, z = run(int(sys.argv[1]) if len(sys.argv) > 1 else ITERATIONS)
    out = {
        "epsilon": EPS,
        "iterations": ITERATIONS,
        "step0": STEP0,
        "penalty": PENALTY,
        "penalized_objective": F,
        "objective": f,
        "max_violation": vmax,
        "z": z.tolist(),
        "seconds": round(time.time() - t0, 1),
    }
    print(json.dumps(out, indent=2))
    if len(sys.argv) == 1:
        Path(__file__).resolve().parents[1].joinpath("data", "box3d_oracle.json").write_text(json.dumps(out, indent=2))
