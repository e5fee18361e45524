"""JSON problem and solution files.

Every document carries ``schema_version``; readers accept the same major
version and reject anything else. The problem layout mirrors
:class:`~neurogp.reformulate.RobustGP` field by field, see
``schemas/problem.schema.json`` for the full description.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .gp_core import AmbiguityParams, GPError, PosynomialBlock
from .neuro_ode import SolveReport
from .reformulate import RobustGP, SmoothProgram

SCHEMA_VERSION = "1.0"


class InputError(GPError):
    """A file that cannot be read as a valid document."""


def _check_version(doc: dict, what: str) -> None:
    v = doc.get("schema_version")
    if not isinstance(v, str):
        raise InputError(f"{what}: missing schema_version")
    if v.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise InputError(f"{what}: unsupported schema_version {v!r} (expected {SCHEMA_VERSION})")


def block_to_dict(b: PosynomialBlock) -> dict:
    return {
        "label": b.label,
        "exponents": b.exponents.tolist(),
        "mean_coeffs": b.mean_coeffs.tolist(),
        "cov": None if b.cov is None else b.cov.tolist(),
    }


def block_from_dict(d: dict, default_label: int) -> PosynomialBlock:
    try:
        return PosynomialBlock(
            np.asarray(d["exponents"], dtype=float),
            np.asarray(d["mean_coeffs"], dtype=float),
            None if d.get("cov") is None else np.asarray(d["cov"], dtype=float),
            int(d.get("label", default_label)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed block {default_label}: {exc}") from exc


def _floats(v):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    return float(a[0]) if a.size == 1 else a.tolist()


def problem_to_dict(p: RobustGP) -> dict:
    a = p.ambiguity
    return {
        "schema_version": SCHEMA_VERSION,
        "name": p.name,
        "epsilon": p.epsilon,
        "coupling": p.coupling.value,
        "ambiguity": {
            "kind": a.kind.value,
            "gamma1": _floats(a.gamma1),
            "gamma2": _floats(a.gamma2),
            "gamma1_obj": a.gamma1_obj,
        },
        "objective": block_to_dict(p.objective),
        "constraints": [block_to_dict(b) for b in p.constraints],
        "certain": [block_to_dict(b) for b in p.certain],
    }


def problem_from_dict(doc: dict) -> RobustGP:
    if not isinstance(doc, dict):
        raise InputError("problem document must be a JSON object")
    _check_version(doc, "problem")
    try:
        amb = doc.get("ambiguity", {})
        ambiguity = AmbiguityParams(
            kind=amb.get("kind", "two_moment"),
            gamma1=amb.get("gamma1", 2.0),
            gamma2=amb.get("gamma2", 2.0),
            gamma1_obj=amb.get("gamma1_obj", 0.0),
        )
        return RobustGP(
            objective=block_from_dict(doc["objective"], 0),
            constraints=tuple(
                block_from_dict(b, k + 1) for k, b in enumerate(doc["constraints"])
            ),
            ambiguity=ambiguity,
            epsilon=float(doc["epsilon"]),
            coupling=doc.get("coupling", "independent"),
            certain=tuple(
                block_from_dict(b, 1000 + k) for k, b in enumerate(doc.get("certain", []))
            ),
            name=str(doc.get("name", "")),
        )
    except InputError:
        raise
    except KeyError as exc:
        raise InputError(f"problem: missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"problem: {exc}") from exc


def _read_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def load_problem(path) -> RobustGP:
    return problem_from_dict(_read_json(path))


def save_problem(path, p: RobustGP) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(p), indent=2))


def load_problem_list(path) -> list[RobustGP]:
    """A batch file: ``{"schema_version", "problems": [problem, ...]}``."""
    doc = _read_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("problems"), list):
        raise InputError("batch document needs a 'problems' list")
    _check_version(doc, "batch")
    out = []
    for i, d in enumerate(doc["problems"]):
        d = dict(d)
        d.setdefault("schema_version", doc["schema_version"])
        try:
            out.append(problem_from_dict(d))
        except InputError as exc:
            raise InputError(f"problem {i}: {exc}") from exc
    return out


def save_problem_list(path, problems) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "problems": [problem_to_dict(p) for p in problems]}
    Path(path).write_text(json.dumps(doc, indent=2))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        # JSON has no inf/nan; strings keep the document standard
        return v if math.isfinite(v) else repr(v)
    return v


def solution_to_dict(sp: SmoothProgram, rep: SolveReport, solver: str, seed: int | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "problem": sp.problem.name,
        "program": sp.kind,
        "solver": solver,
        "seed": seed,
        "report": _jsonable(rep.summary()),
        "t": _jsonable(sp.t_solution(rep.z)),
        "z": _jsonable(rep.z),
        "multipliers": _jsonable(rep.multipliers),
        "row_labels": list(sp.row_labels),
        "history": _jsonable(rep.history),
    }


def save_solution(path, sp: SmoothProgram, rep: SolveReport, solver: str, seed: int | None = None) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sp, rep, solver, seed), indent=2))


def load_solution_t(path) -> np.ndarray:
    """The original-space point ``t`` stored in a solution file."""
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise InputError("solution document must be a JSON object")
    _check_version(doc, "solution")
    try:
        t = np.asarray(doc["t"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"solution: no usable 't' vector ({exc})") from exc
    if t.ndim != 1 or np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise InputError("solution: 't' must be a positive finite vector")
    return t
