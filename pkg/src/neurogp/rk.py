"""Dormand-Prince 5(4) stepper with domain-aware step rejection.

A stage that leaves the guarded domain of the right-hand side, or produces a
non-finite derivative, rejects the step and shrinks it; the projection
dynamics are singular at the boundary of that domain, so the true solution
never reaches it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
B = A[6]
# fifth-order weights minus the embedded fourth-order weights
E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
REJECT_FACTOR = 0.25


class StepSizeUnderflow(RuntimeError):
    pass


# rhs(t, y) -> (dy/dt, ok); ok False marks a state outside the guarded domain
Rhs = Callable[[float, np.ndarray], tuple[np.ndarray, bool]]


@dataclass
class DOPRI5:
    rhs: Rhs
    t: float
    y: np.ndarray
    rtol: float
    atol: float
    max_step: float = np.inf
    h: float | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).copy()
        f, ok = self.rhs(self.t, self.y)
        if not ok or not np.all(np.isfinite(f)):
            raise ValueError("initial state outside the domain of the vector field")
        self.f = f
        self.nfev = 1
        self.n_rejected = 0
        if self.h is None:
            self.h = self._initial_step()

    def _scale(self, y0, y1):
        return self.atol + self.rtol * np.maximum(np.abs(y0), np.abs(y1))

    def _initial_step(self) -> float:
        sc = self._scale(self.y, self.y)
        d0 = np.sqrt(np.mean((self.y / sc) ** 2))
        d1 = np.sqrt(np.mean((self.f / sc) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        return min(h0, self.max_step)

    def step(self) -> None:
        """Advance by one accepted step."""
        n = self.y.size
        K = np.empty((7, n))
        K[0] = self.f
        h = min(self.h, self.max_step)
        while True:
            if h < 1e-14 * max(1.0, abs(self.t)):
                raise StepSizeUnderflow(f"step size underflow at t={self.t:.6g}")
            ok = True
            for s in range(1, 7):
                ys = self.y + h * (A[s] @ K[:s])
                fs, good = self.rhs(self.t + C[s] * h, ys)
                self.nfev += 1
                if not good or not np.all(np.isfinite(fs)):
                    ok = False
                    break
                K[s] = fs
            if not ok:
                self.n_rejected += 1
                h *= REJECT_FACTOR
                continue
            y_new = self.y + h * (B @ K[:6])
            err = h * (E @ K)
            err_norm = np.sqrt(np.mean((err / self._scale(self.y, y_new)) ** 2))
            if err_norm <= 1.0:
                factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm**-0.2)
                self.t += h
                self.y = y_new
                self.f = K[6]
                self.h = min(h * factor, self.max_step)
                return
            self.n_rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err_norm**-0.2)
