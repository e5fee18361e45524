import csv
import math

import numpy as np
import pytest

from neurogp import AmbiguityKind, Coupling, DuplexConfig, GPError, Status, build, solve_duplex
from neurogp.bench import make_box3d, make_multishape
from neurogp.duplex import (
    DuplexState,
    PSOParams,
    Particle,
    default_bounds,
    diversity,
    dilation,
    duplex_field,
    fitness,
    pso_update,
    wavelet_mu,
    wavelet_mutate,
    write_iteration_log,
)

from .conftest import is_non_increasing


@pytest.fixture(scope="module")
def ns_dep_m3():
    return build(make_multishape(3, 0.2, 0, AmbiguityKind.FIRST_MOMENT_NONNEG, Coupling.DEPENDENT))


@pytest.fixture(scope="module")
def solved(ns_dep_m3):
    return solve_duplex(ns_dep_m3, DuplexConfig(seed=0))


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [dict(ratio_1=0.0), dict(ratio_1=1.0, ratio_2=1.0), dict(zeta=0.0), dict(T=0),
         dict(row_scale=-1.0), dict(patience=0)],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            DuplexConfig(**kw)

    @pytest.mark.parametrize("kw", [dict(w=1.5), dict(c1=-0.1)])
    def test_pso_params(self, kw):
        with pytest.raises(ValueError):
            PSOParams(**kw)


class TestPieces:
    def test_bounds(self, ns_dep_m3):
        lo, hi = default_bounds(ns_dep_m3, 30.0)
        assert lo.shape == hi.shape == (ns_dep_m3.n + ns_dep_m3.n_g,)
        assert np.all(lo <= hi)
        assert hi[-1] == pytest.approx(100.0 / 30.0) and lo[-1] == 0.0
        ys = ns_dep_m3.y_slice
        assert np.all(lo[ys] > 0) and np.all(hi[ys] < 1)

    def test_state_split_roundtrip(self, ns_dep_m3, rng):
        v = rng.normal(size=ns_dep_m3.n + ns_dep_m3.n_g)
        s = DuplexState.split(ns_dep_m3, v)
        np.testing.assert_array_equal(s.vector, v)
        assert s.y.size == ns_dep_m3.problem.K and s.omega.size == ns_dep_m3.n_g

    def test_field_blocks_scale_with_time_constants(self, ns_dep_m3):
        v = np.concatenate([ns_dep_m3.interior_point(), np.zeros(ns_dep_m3.n_g)])
        s = DuplexState.split(ns_dep_m3, v)
        a = duplex_field(ns_dep_m3, s, 1.0, 1.0).vector
        b = duplex_field(ns_dep_m3, s, 2.0, 1.0).vector
        nz = ns_dep_m3.z_slice.stop
        np.testing.assert_allclose(b[:nz], a[:nz] / 2)
        np.testing.assert_allclose(b[nz:], a[nz:])

    def test_fitness(self, ns_dep_m3):
        v = np.concatenate([ns_dep_m3.interior_point(), np.zeros(ns_dep_m3.n_g)])
        assert math.isfinite(fitness(ns_dep_m3, v, 1e-6))
        v[ns_dep_m3.y_slice] = 0.0  # breaks the coupling row
        assert fitness(ns_dep_m3, v, 1e-6) == math.inf

    def test_convex_program_is_refused(self):
        with pytest.raises(GPError):
            solve_duplex(build(make_box3d(0.05)))

    def test_wavelet(self):
        assert wavelet_mu(0.0, 1.0) == 1.0
        # the cosine peaks again at phi = -2 pi / 5, where the envelope exceeds one
        assert wavelet_mu(-2 * math.pi / 5, 1.0) == pytest.approx(math.exp(math.pi / 5))
        assert dilation(0, 20) == 1.0

    def test_mutation_direction(self, rng):
        lo, hi = np.zeros(3), np.ones(3)
        x = np.full(3, 0.5)
        for j in range(1, 21):
            out, mu = wavelet_mutate(x, (lo, hi), j, 20, rng)
            assert np.all(np.sign(out - x) == np.sign(mu)) or mu == 0

    def test_pso_moves_towards_bests(self):
        p = Particle.at(np.zeros(2))
        p.personal_best = np.array([1.0, 0.0])
        pso_update([p], np.array([0.0, 1.0]), PSOParams(w=0.0, c1=1.0, c2=1.0), None, r=(1.0, 1.0))
        np.testing.assert_array_equal(p.position, [1.0, 1.0])

    def test_diversity(self):
        assert diversity([np.zeros(2), np.array([3.0, 4.0])], np.zeros(2)) == 2.5


class TestSolve:
    def test_matches_reference_solution(self, solved):
        # reference from SLSQP on the same program, see the decision notes
        assert solved.status is Status.CONVERGED
        assert solved.objective == pytest.approx(0.6929667, abs=1e-3)
        assert solved.max_violation <= 1e-6

    def test_best_so_far_is_monotone(self, solved):
        h = solved.history
        assert is_non_increasing(h["best_fitness"])
        assert len(h["best_fitness"]) == len(h["diversity"]) == len(h["mutated"]) == solved.n_steps

    def test_iteration_log(self, solved, tmp_path):
        path = tmp_path / "log.csv"
        write_iteration_log(path, solved)
        rows = list(csv.DictReader(path.open()))
        assert len(rows) == solved.n_steps
        assert float(rows[-1]["best_fitness"]) == solved.objective

    def test_seeded_runs_repeat(self, ns_dep_m3, solved):
        again = solve_duplex(ns_dep_m3, DuplexConfig(seed=0))
        assert again.objective == solved.objective
        np.testing.assert_array_equal(again.z, solved.z)

    def test_bad_bounds(self, ns_dep_m3):
        with pytest.raises(ValueError, match="bounds"):
            solve_duplex(ns_dep_m3, DuplexConfig(bounds=(np.zeros(2), np.ones(2))))
