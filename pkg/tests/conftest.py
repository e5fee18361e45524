import math
import warnings

import numpy as np
import pytest

import neurogp.duplex
import neurogp.solver

# every duplex run made anywhere in the session, as (label, best-so-far list)
DUPLEX_RUNS: list[tuple[str, list[float]]] = []


def is_non_increasing(seq) -> bool:
    vals = [v for v in seq if not math.isnan(v)]
    return all(b <= a for a, b in zip(vals, vals[1:]))


@pytest.fixture(autouse=True)
def record_duplex_runs(monkeypatch, request):
    """Wrap the duplex so each run's best-so-far sequence is kept and checked."""
    original = neurogp.duplex.solve_duplex

    def wrapped(sp, cfg=neurogp.duplex.DuplexConfig(), starts=None):
        rep = original(sp, cfg, starts)
        seq = list(rep.history.get("best_fitness", []))
        DUPLEX_RUNS.append((f"{request.node.name}:{sp.problem.name}", seq))
        assert is_non_increasing(seq), f"best-so-far increased: {seq}"
        return rep

    monkeypatch.setattr(neurogp.duplex, "solve_duplex", wrapped)
    monkeypatch.setattr(neurogp.solver, "solve_duplex", wrapped)


@pytest.fixture(autouse=True)
def _quiet_integrator():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line straight to the terminal, then assert."""

    def _verdict(criterion: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {criterion:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return _verdict
