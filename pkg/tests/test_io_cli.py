import csv
import json

import numpy as np
import pytest

from neurogp import io as gpio
from neurogp import make_box3d, make_multishape, make_sinr, solve
from neurogp.cli import EXIT_INPUT, EXIT_INTERNAL, EXIT_OK, main


class TestProblemFiles:
    @pytest.mark.parametrize(
        "p", [make_box3d(0.1, "dependent"), make_multishape(3, 0.2, 1, "first_moment_nonneg"), make_sinr(3, False)]
    )
    def test_roundtrip(self, tmp_path, p):
        path = tmp_path / "p.json"
        gpio.save_problem(path, p)
        q = gpio.load_problem(path)
        assert q.name == p.name and q.coupling == p.coupling and q.epsilon == p.epsilon
        assert q.ambiguity.kind == p.ambiguity.kind
        for a, b in zip((p.objective, *p.constraints, *p.certain), (q.objective, *q.constraints, *q.certain)):
            np.testing.assert_array_equal(a.exponents, b.exponents)
            np.testing.assert_array_equal(a.mean_coeffs, b.mean_coeffs)
            assert (a.cov is None) == (b.cov is None)
            assert a.label == b.label

    def test_batch_roundtrip(self, tmp_path):
        ps = [make_box3d(0.05), make_box3d(0.1)]
        gpio.save_problem_list(tmp_path / "b.json", ps)
        assert [p.epsilon for p in gpio.load_problem_list(tmp_path / "b.json")] == [0.05, 0.1]

    @pytest.mark.parametrize(
        "mutate, match",
        [
            (lambda d: d.pop("schema_version"), "schema_version"),
            (lambda d: d.update(schema_version="2.0"), "unsupported"),
            (lambda d: d.pop("objective"), "missing"),
            (lambda d: d.update(epsilon=0.9), "epsilon"),
            (lambda d: d["constraints"][0].update(mean_coeffs=[-1.0, 1.0]), "> 0"),
        ],
    )
    def test_invalid_documents(self, mutate, match):
        doc = gpio.problem_to_dict(make_box3d(0.05))
        mutate(doc)
        with pytest.raises(gpio.InputError, match=match):
            gpio.problem_from_dict(doc)

    def test_unreadable(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(gpio.InputError):
            gpio.load_problem(tmp_path / "bad.json")
        with pytest.raises(gpio.InputError):
            gpio.load_problem(tmp_path / "missing.json")

    def test_non_finite_values_become_strings(self):
        assert gpio._jsonable({"a": [np.inf, np.float64(1.5), np.int64(2)]}) == {"a": ["inf", 1.5, 2]}


def test_solution_file(tmp_path):
    sp, rep, solver = solve(make_box3d(0.05))
    gpio.save_solution(tmp_path / "s.json", sp, rep, solver, 0)
    t = gpio.load_solution_t(tmp_path / "s.json")
    np.testing.assert_allclose(t, sp.t_solution(rep.z))
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["solver"] == "neuro_ode" and doc["report"]["status"] == "converged"


@pytest.fixture
def box_file(tmp_path):
    path = tmp_path / "box.json"
    assert main(["generate", "box3d", "--eps", "0.05", "--out", str(path)]) == EXIT_OK
    return path


class TestCli:
    def test_solve_is_deterministic(self, tmp_path, box_file):
        outs = []
        for k in range(2):
            out = tmp_path / f"sol{k}.json"
            assert main(["solve", str(box_file), "--seed", "3", "--out", str(out)]) == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_solve_overrides_and_trajectory(self, tmp_path, box_file, capsys):
        traj = tmp_path / "traj.csv"
        code = main(["solve", str(box_file), "--eps", "0.1", "--coupling", "dependent", "--trajectory", str(traj)])
        assert code == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["solver"] == "neuro_ode" and out["objective"] == pytest.approx(0.2300, abs=1e-3)
        header = next(csv.reader(traj.open()))
        assert header[:3] == ["t", "f", "kkt_residual"]

    def test_robustness(self, tmp_path, box_file):
        sol = tmp_path / "sol.json"
        assert main(["solve", str(box_file), "--out", str(sol)]) == EXIT_OK
        rep = tmp_path / "vs.csv"
        assert main(["robustness", str(sol), str(box_file), "--n", "50", "--out", str(rep)]) == EXIT_OK
        rows = list(csv.DictReader(rep.open()))
        assert len(rows) == 5 and all(r["vs"] == "0" for r in rows)

    def test_robustness_bad_distribution(self, tmp_path, box_file):
        sol = tmp_path / "sol.json"
        main(["solve", str(box_file), "--out", str(sol)])
        assert main(["robustness", str(sol), str(box_file), "--dists", "cauchy"]) == EXIT_INPUT

    def test_bench_box(self, tmp_path):
        out = tmp_path / "box.csv"
        assert main(["bench", "box3d", "--eps", "0.05", "--n", "20", "--out", str(out)]) == EXIT_OK
        rows = list(csv.DictReader(out.open()))
        assert [r["coupling"] for r in rows] == ["independent", "dependent"]
        assert rows[0]["schema_version"] == gpio.SCHEMA_VERSION

    def test_batch(self, tmp_path):
        path = tmp_path / "batch.json"
        gpio.save_problem_list(path, [make_box3d(0.05), make_box3d(0.06), make_box3d(0.05)])
        out = tmp_path / "batch.csv"
        assert main(["batch", str(path), "--out", str(out)]) == EXIT_OK
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 3 and rows[0]["objective"] == rows[2]["objective"]

    def test_compare_needs_biconvex(self, box_file):
        assert main(["compare", str(box_file)]) == EXIT_INPUT

    @pytest.mark.parametrize(
        "argv",
        [["solve", "/nonexistent.json"], ["frobnicate"], ["bench", "shape"], ["solve"]],
    )
    def test_input_errors(self, argv):
        assert main(argv) == EXIT_INPUT

    def test_malformed_problem(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schema_version": "1.0", "epsilon": 0.1}))
        assert main(["solve", str(bad)]) == EXIT_INPUT

    def test_internal_error(self, box_file, monkeypatch):
        import neurogp.cli as cli

        def boom(*a, **k):
            raise RuntimeError("unexpected")

        monkeypatch.setattr(cli, "run_solve", boom)
        assert main(["solve", str(box_file)]) == EXIT_INTERNAL

    @pytest.mark.slow
    def test_compare_power_control(self, tmp_path, capsys):
        path = tmp_path / "sinr_k5.json"
        assert main(["generate", "sinr", "--k", "5", "--out", str(path)]) == EXIT_OK
        capsys.readouterr()
        assert main(["compare", str(path), "--seed", "1"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert 0.0 <= doc["gap"] <= 0.10


@pytest.mark.parametrize(
    "p", [make_box3d(0.05), make_multishape(4, 0.2, 0, "first_moment_nonneg", "dependent"), make_sinr(3, False)]
)
def test_documents_follow_the_published_schema(p):
    jsonschema = pytest.importorskip("jsonschema")
    from pathlib import Path

    schema = json.loads((Path(__file__).parents[1] / "schemas" / "problem.schema.json").read_text())
    jsonschema.validate(gpio.problem_to_dict(p), schema)
