"""Drivers that regenerate the benchmark tables as CSV rows.

Each row is one solve: instance size, coupling, objective, violated
scenarios under normally distributed coefficients, solver effort and wall
time. Rows come out in a fixed order so a fixed seed gives the same file,
apart from the wall-time column.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .bench import BOX_EPS_SWEEP, make_box3d, make_multishape, make_sinr
from .gp_core import AmbiguityKind
from .io import SCHEMA_VERSION
from .reformulate import Coupling, RobustGP
from .robustness import Distribution, ScenarioConfig, count_violations
from .solver import solve

COLUMNS = [
    "schema_version",
    "instance",
    "size",
    "epsilon",
    "ambiguity",
    "coupling",
    "solver",
    "status",
    "objective",
    "vs",
    "n_scenarios",
    "kkt_residual",
    "n_fev",
    "iterations",
    "wall_time_s",
]


@dataclass
class ReportTable:
    rows: list[dict] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: r.get(k, "") for k in COLUMNS})

    def find(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]


@dataclass(frozen=True)
class Job:
    problem: RobustGP
    size: int
    seed: int
    scenarios: ScenarioConfig


def run_job(job: Job) -> dict:
    """Solve one instance and count its violated scenarios."""
    p = job.problem
    t0 = time.perf_counter()
    sp, rep, solver = solve(p, seed=job.seed)
    wall = time.perf_counter() - t0
    vs = ""
    if math.isfinite(rep.objective):
        vs = count_violations(p, sp.t_solution(rep.z), job.scenarios).violated[
            job.scenarios.distributions[0].value
        ]
    iters = len(rep.history.get("best_fitness", [])) or rep.n_steps
    return {
        "schema_version": SCHEMA_VERSION,
        "instance": p.name,
        "size": job.size,
        "epsilon": p.epsilon,
        "ambiguity": p.ambiguity.kind.value,
        "coupling": p.coupling.value,
        "solver": solver,
        "status": rep.status.value,
        "objective": rep.objective,
        "vs": vs,
        "n_scenarios": job.scenarios.n_scenarios,
        "kkt_residual": rep.kkt_residual,
        "n_fev": rep.n_fev,
        "iterations": iters,
        "wall_time_s": round(wall, 3),
    }


def run_jobs(jobs: list[Job], threads: int = 1) -> ReportTable:
    """Run jobs in order, on a process pool when ``threads > 1``."""
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_job, jobs))
    else:
        rows = [run_job(j) for j in jobs]
    return ReportTable(rows)


def _normal(n: int, seed: int) -> ScenarioConfig:
    return ScenarioConfig(n_scenarios=n, distributions=(Distribution.NORMAL,), seed=seed)


def box3d_jobs(eps_values=BOX_EPS_SWEEP, n_scenarios: int = 100, seed: int = 0) -> list[Job]:
    return [
        Job(make_box3d(eps, c), 3, seed, _normal(n_scenarios, seed))
        for eps in eps_values
        for c in (Coupling.INDEPENDENT, Coupling.DEPENDENT)
    ]


def shape_jobs(
    m: int,
    kind: AmbiguityKind | str = AmbiguityKind.TWO_MOMENT,
    eps: float | None = None,
    seed: int = 0,
    n_scenarios: int = 100,
) -> list[Job]:
    """Both couplings of one seeded shape instance.

    ``eps`` defaults to 0.15 for two-moment and 0.2 for first-moment data.
    """
    kind = AmbiguityKind(kind)
    if eps is None:
        eps = 0.15 if kind is AmbiguityKind.TWO_MOMENT else 0.2
    return [
        Job(make_multishape(m, eps, seed, kind, c), m, seed, _normal(n_scenarios, seed))
        for c in (Coupling.INDEPENDENT, Coupling.DEPENDENT)
    ]


def sinr_jobs(K: int, eps: float = 0.2, seed: int = 0, n_scenarios: int = 100) -> list[Job]:
    """Individual and joint variants of one seeded power-control instance."""
    return [
        Job(make_sinr(K, joint, eps, seed), K, seed, _normal(n_scenarios, seed))
        for joint in (False, True)
    ]
