"""Out-of-sample scenario testing of a candidate solution.

Coefficients of the uncertain blocks are redrawn from a family of candidate
"true" distributions whose first two moments match the ambiguity data, and a
scenario counts as violated when any uncertain constraint of the joint block
exceeds one at the candidate point.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gp_core import AmbiguityKind, GPError
from .reformulate import RobustGP

SQRT3 = math.sqrt(3.0)
NS_SD_FRACTION = 0.2


class Distribution(str, enum.Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"
    LOGNORMAL = "lognormal"
    LOGISTIC = "logistic"
    GAMMA = "gamma"
    POINT = "point"


ALL_DISTRIBUTIONS = (
    Distribution.NORMAL,
    Distribution.UNIFORM,
    Distribution.LOGNORMAL,
    Distribution.LOGISTIC,
    Distribution.GAMMA,
)


@dataclass(frozen=True)
class Matched:
    """A distribution family with parameters matching a target mean and sd.

    Parameters are arrays so one object describes every coefficient of an
    instance at once. ``truncated`` is set when a uniform support had to be
    cut at zero.
    """

    dist: Distribution
    params: dict
    truncated: bool = False

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        p = self.params
        match self.dist:
            case Distribution.NORMAL:
                return rng.normal(p["loc"], p["scale"], size)
            case Distribution.UNIFORM:
                return rng.uniform(p["low"], p["high"], size)
            case Distribution.LOGNORMAL:
                return rng.lognormal(p["mean"], p["sigma"], size)
            case Distribution.LOGISTIC:
                return rng.logistic(p["loc"], p["scale"], size)
            case Distribution.GAMMA:
                return rng.gamma(p["shape"], p["scale"], size)
            case Distribution.POINT:
                return np.broadcast_to(np.asarray(p["value"], dtype=float), size or ()).copy()
        raise AssertionError(self.dist)


def moment_match(dist: Distribution | str, mean, sd) -> Matched:
    """Parameters of ``dist`` with the given mean and standard deviation.

    Parameters
    ----------
    dist : Distribution or str
    mean, sd : float or array_like
        Strictly positive. A zero ``sd`` is accepted and yields a point mass
        at the mean for every family.

    Returns
    -------
    Matched
        The uniform family is truncated at zero (and flagged) when
        ``mean - sqrt(3) sd < 0``; after truncation its moments no longer
        match exactly.
    """
    dist = Distribution(dist)
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(mean <= 0) or np.any(sd < 0):
        raise GPError("moment matching needs mean > 0 and sd >= 0")
    if dist is Distribution.POINT or not np.any(sd > 0):
        return Matched(Distribution.POINT, {"value": mean})
    if np.any(sd == 0):
        raise GPError("sd must be positive for every coefficient, or zero for all")
    match dist:
        case Distribution.NORMAL:
            return Matched(dist, {"loc": mean, "scale": sd})
        case Distribution.UNIFORM:
            low = mean - SQRT3 * sd
            truncated = bool(np.any(low < 0))
            return Matched(dist, {"low": np.maximum(low, 0.0), "high": mean + SQRT3 * sd}, truncated)
        case Distribution.LOGNORMAL:
            s2 = np.log1p((sd / mean) ** 2)
            return Matched(dist, {"mean": np.log(mean) - s2 / 2, "sigma": np.sqrt(s2)})
        case Distribution.LOGISTIC:
            return Matched(dist, {"loc": mean, "scale": sd * SQRT3 / math.pi})
        case Distribution.GAMMA:
            return Matched(dist, {"shape": (mean / sd) ** 2, "scale": sd**2 / mean})
    raise AssertionError(dist)


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario generation settings.

    ``ns_sd_fraction`` sets the spread used for first-moment instances,
    which carry no second moment: ``sd = ns_sd_fraction * mean``.
    """

    n_scenarios: int = 100
    distributions: tuple[Distribution, ...] = ALL_DISTRIBUTIONS
    seed: int = 0
    ns_sd_fraction: float = NS_SD_FRACTION
    tol: float = 1e-9

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise ValueError("n_scenarios must be >= 1")
        if not self.ns_sd_fraction >= 0:
            raise ValueError("ns_sd_fraction must be >= 0")
        object.__setattr__(
            self, "distributions", tuple(Distribution(d) for d in self.distributions)
        )


def coefficient_moments(p: RobustGP, ns_sd_fraction: float = NS_SD_FRACTION):
    """Concatenated ``(mean, sd)`` of all uncertain coefficients.

    Two-moment blocks take ``sd`` from the covariance diagonal (zero when a
    block has no covariance); first-moment blocks use a fixed fraction of
    the mean.
    """
    means, sds = [], []
    for b in p.constraints:
        means.append(b.mean_coeffs)
        if p.ambiguity.kind is AmbiguityKind.FIRST_MOMENT_NONNEG:
            sds.append(ns_sd_fraction * b.mean_coeffs)
        elif b.cov is None:
            sds.append(np.zeros(b.n_terms))
        else:
            sds.append(np.sqrt(np.diag(b.cov)))
    return np.concatenate(means), np.concatenate(sds)


@dataclass
class RobustnessReport:
    violated: dict[str, int]
    n_scenarios: int
    seed: int
    t_solution: np.ndarray
    truncated: dict[str, bool] = field(default_factory=dict)
    label: str = ""

    def rate(self, dist: Distribution | str) -> float:
        return self.violated[Distribution(dist).value] / self.n_scenarios

    def rows(self) -> list[dict]:
        return [
            {
                "solution": self.label,
                "distribution": d,
                "vs": vs,
                "rate": vs / self.n_scenarios,
                "n_scenarios": self.n_scenarios,
                "seed": self.seed,
                "truncated": self.truncated.get(d, False),
            }
            for d, vs in self.violated.items()
        ]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_scenarios": self.n_scenarios,
            "seed": self.seed,
            "t_solution": [float(v) for v in self.t_solution],
            "violated": dict(self.violated),
            "truncated": dict(self.truncated),
        }


def _monomials(p: RobustGP, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Monomial values of every uncertain term and each term's block index."""
    logt = np.log(t)
    mono = np.concatenate([np.exp(b.exponents @ logt) for b in p.constraints])
    owner = np.repeat(np.arange(p.K), p.term_counts)
    return mono, owner


def scenario_rng(seed: int, dist: Distribution, index: int) -> np.random.Generator:
    """Generator for one scenario; independent of how scenarios are scheduled."""
    code = list(Distribution).index(Distribution(dist))
    return np.random.default_rng([seed, code, index])


def count_violations(
    p: RobustGP, t_solution, cfg: ScenarioConfig = ScenarioConfig(), label: str = ""
) -> RobustnessReport:
    """Count scenarios in which the joint uncertain constraint fails at ``t``.

    All coefficients of a scenario are drawn independently from the matched
    marginals, and the scenario is violated when any uncertain row exceeds
    ``1 + cfg.tol``. Negative normal or logistic draws are kept.
    """
    t = np.asarray(t_solution, dtype=float)
    if t.shape != (p.n_vars,) or np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise GPError("t_solution must be a positive finite vector of the variable size")
    mono, owner = _monomials(p, t)
    mean, sd = coefficient_moments(p, cfg.ns_sd_fraction)
    violated, truncated = {}, {}
    for d in cfg.distributions:
        matched = moment_match(d, mean, sd)
        draws = np.stack(
            [matched.sample(scenario_rng(cfg.seed, d, s), mean.shape) for s in range(cfg.n_scenarios)]
        )
        rows = np.zeros((cfg.n_scenarios, p.K))
        np.add.at(rows.T, owner, (draws * mono).T)
        violated[d.value] = int(np.any(rows > 1.0 + cfg.tol, axis=1).sum())
        truncated[d.value] = matched.truncated
    return RobustnessReport(violated, cfg.n_scenarios, cfg.seed, t, truncated, label)


def write_reports_csv(path, reports: list[RobustnessReport]) -> None:
    """One row per (solution, distribution)."""
    fields = ["solution", "distribution", "vs", "rate", "n_scenarios", "seed", "truncated"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for rep in reports:
            w.writerows(rep.rows())


def write_reports_json(path, reports: list[RobustnessReport], schema_version: str) -> None:
    doc = {"schema_version": schema_version, "reports": [r.to_dict() for r in reports]}
    Path(path).write_text(json.dumps(doc, indent=2))
