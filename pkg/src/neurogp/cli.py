"""Command-line interface.

Exit codes: 0 on success (including a solve that stopped short of an
equilibrium, which is flagged in the report), 1 for unusable input and 2 for
internal failures.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
import warnings

import click

from . import io as gpio
from .bench import BOX_EPS_SWEEP, make_box3d, make_multishape, make_sinr
from .duplex import write_iteration_log
from .gp_core import AmbiguityParams, GPError
from .neuro_ode import IntegratorConfig, solve_batch, write_trajectory_csv
from .reformulate import Coupling, build
from .robustness import (
    ALL_DISTRIBUTIONS,
    ScenarioConfig,
    count_violations,
    write_reports_csv,
    write_reports_json,
)
from .solver import compare as run_compare
from .solver import solve as run_solve
from .tables import box3d_jobs, run_jobs, shape_jobs, sinr_jobs

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2

log = logging.getLogger("neurogp")


def _emit(obj) -> None:
    click.echo(json.dumps(gpio._jsonable(obj), indent=2))


@click.group()
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker processes for independent solves.")
@click.option("-v", "--verbose", count=True, help="More logging.")
@click.pass_context
def cli(ctx, threads, verbose):
    """Distributionally robust geometric programs solved by neurodynamics."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(message)s")
    if verbose == 0:
        warnings.simplefilter("ignore", UserWarning)
    ctx.obj = {"threads": threads}


def _override(p, eps, gamma1, gamma2, coupling, ambiguity):
    changes = {}
    if eps is not None:
        changes["epsilon"] = eps
    if coupling is not None:
        changes["coupling"] = Coupling(coupling)
    if gamma1 is not None or gamma2 is not None or ambiguity is not None:
        a = p.ambiguity
        changes["ambiguity"] = AmbiguityParams(
            kind=ambiguity or a.kind,
            gamma1=a.gamma1 if gamma1 is None else gamma1,
            gamma2=a.gamma2 if gamma2 is None else gamma2,
            gamma1_obj=a.gamma1_obj,
        )
    return p.replace(**changes) if changes else p


@cli.command()
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--eps", type=float, help="Override the violation level.")
@click.option("--gamma1", type=float)
@click.option("--gamma2", type=float)
@click.option("--coupling", type=click.Choice([c.value for c in Coupling]))
@click.option("--ambiguity", type=click.Choice(["two_moment", "first_moment_nonneg"]))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Solution JSON file.")
@click.option("--trajectory", type=click.Path(dir_okay=False),
              help="Write the state trajectory (single network) or iteration log (duplex) as CSV.")
def solve(problem, eps, gamma1, gamma2, coupling, ambiguity, seed, out, trajectory):
    """Solve PROBLEM, choosing the method from its convexity."""
    p = _override(gpio.load_problem(problem), eps, gamma1, gamma2, coupling, ambiguity)
    sp, rep, solver = run_solve(p, seed=seed)
    doc = gpio.solution_to_dict(sp, rep, solver, seed)
    if out:
        gpio.save_solution(out, sp, rep, solver, seed)
    if trajectory:
        if solver == "duplex":
            write_iteration_log(trajectory, rep)
        else:
            write_trajectory_csv(trajectory, sp, rep)
    _emit({"solver": solver, **doc["report"], "t": doc["t"]})


@cli.group()
def bench():
    """Regenerate a benchmark table as CSV."""


def _bench_out(ctx, jobs, out):
    table = run_jobs(jobs, ctx.obj["threads"])
    if out:
        table.write_csv(out)
    _emit(table.rows)


@bench.command("box3d")
@click.option("--eps", type=float, multiple=True, help="Repeatable; default is the full sweep.")
@click.option("--n", "n_scenarios", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def bench_box3d(ctx, eps, n_scenarios, seed, out):
    """Open box, both couplings, for each violation level."""
    _bench_out(ctx, box3d_jobs(eps or BOX_EPS_SWEEP, n_scenarios, seed), out)


@bench.command("shape")
@click.option("--m", type=click.IntRange(min=3), required=True)
@click.option("--ambiguity", type=click.Choice(["two_moment", "first_moment_nonneg"]), default="two_moment")
@click.option("--eps", type=float)
@click.option("--n", "n_scenarios", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def bench_shape(ctx, m, ambiguity, eps, n_scenarios, seed, out):
    """m-dimensional box, both couplings."""
    _bench_out(ctx, shape_jobs(m, ambiguity, eps, seed, n_scenarios), out)


@bench.command("sinr")
@click.option("--k", "K", type=click.IntRange(min=2), required=True)
@click.option("--eps", type=float, default=0.2, show_default=True)
@click.option("--n", "n_scenarios", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def bench_sinr(ctx, K, eps, n_scenarios, seed, out):
    """Power control, individual and joint variants."""
    _bench_out(ctx, sinr_jobs(K, eps, seed, n_scenarios), out)


@cli.command()
@click.argument("kind", type=click.Choice(["box3d", "shape", "sinr"]))
@click.option("--eps", type=float)
@click.option("--m", type=click.IntRange(min=3), default=5, show_default=True)
@click.option("--k", "K", type=click.IntRange(min=2), default=5, show_default=True)
@click.option("--individual", is_flag=True, help="sinr: individual instead of joint constraints.")
@click.option("--ambiguity", type=click.Choice(["two_moment", "first_moment_nonneg"]), default="two_moment")
@click.option("--coupling", type=click.Choice([c.value for c in Coupling]), default="independent")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def generate(kind, eps, m, K, individual, ambiguity, coupling, seed, out):
    """Write a benchmark instance as a problem file."""
    if kind == "box3d":
        p = make_box3d(0.05 if eps is None else eps, coupling)
    elif kind == "shape":
        p = make_multishape(m, 0.15 if eps is None else eps, seed, ambiguity, coupling)
    else:
        p = make_sinr(K, not individual, 0.2 if eps is None else eps, seed)
    gpio.save_problem(out, p)
    click.echo(out)


@cli.command()
@click.argument("solution", type=click.Path(dir_okay=False))
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--dists", default=",".join(d.value for d in ALL_DISTRIBUTIONS), show_default=True,
              help="Comma-separated distribution names.")
@click.option("--n", "n_scenarios", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sd-fraction", type=float, default=0.2, show_default=True,
              help="Coefficient spread for first-moment data, as a fraction of the mean.")
@click.option("--out", type=click.Path(dir_okay=False), help="CSV (.csv) or JSON output.")
def robustness(solution, problem, dists, n_scenarios, seed, sd_fraction, out):
    """Count violated out-of-sample scenarios for a stored SOLUTION."""
    p = gpio.load_problem(problem)
    t = gpio.load_solution_t(solution)
    if t.size != p.n_vars:
        raise gpio.InputError(f"solution has {t.size} variables, problem has {p.n_vars}")
    try:
        cfg = ScenarioConfig(n_scenarios, tuple(d.strip() for d in dists.split(",") if d.strip()),
                             seed, sd_fraction)
    except ValueError as exc:
        raise gpio.InputError(str(exc)) from exc
    rep = count_violations(p, t, cfg, label=solution)
    if out:
        if out.endswith(".csv"):
            write_reports_csv(out, [rep])
        else:
            write_reports_json(out, [rep], gpio.SCHEMA_VERSION)
    _emit(rep.to_dict())


@cli.command()
@click.argument("problem", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="JSON with both reports.")
def compare(problem, seed, out):
    """Duplex against alternating convex search; prints the relative gap."""
    p = gpio.load_problem(problem)
    sp = build(p)
    if sp.kind != "ns_dep":
        raise gpio.InputError("compare needs a biconvex (first-moment, dependent) problem")
    sp, d, c, g = run_compare(p, seed=seed)
    doc = {
        "schema_version": gpio.SCHEMA_VERSION,
        "problem": p.name,
        "seed": seed,
        "duplex": d.summary(),
        "car": c.summary(),
        "gap": g,
    }
    if out:
        with open(out, "w") as fh:
            json.dump(gpio._jsonable(doc), fh, indent=2)
    _emit(doc)


@cli.command()
@click.argument("problems", type=click.Path(dir_okay=False))
@click.option("--cold", is_flag=True, help="Disable warm starts.")
@click.option("--out", type=click.Path(dir_okay=False), help="CSV, one row per instance.")
def batch(problems, cold, out):
    """Solve a list of same-shaped convex instances with warm starts."""
    ps = gpio.load_problem_list(problems)
    if not ps:
        raise gpio.InputError("empty batch")
    sp0 = build(ps[0])
    cfg = IntegratorConfig(max_time=1e6) if sp0.kind.startswith("ns") else IntegratorConfig()
    reports = solve_batch(build, ps, cfg, warm_start=not cold)
    rows = [
        {"index": i, "instance": p.name, **r.summary()} for i, (p, r) in enumerate(zip(ps, reports))
    ]
    if out:
        with open(out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["schema_version", *rows[0].keys()])
            w.writeheader()
            for r in rows:
                w.writerow({"schema_version": gpio.SCHEMA_VERSION, **r})
    _emit(rows)


def main(argv=None) -> int:
    """Run the CLI and map failures onto exit codes."""
    try:
        rv = cli.main(args=argv, prog_name="neurogp", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.ClickException, click.exceptions.Abort) as exc:
        if isinstance(exc, click.ClickException):
            exc.show()
        return EXIT_INPUT
    except (GPError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the documented code
        log.debug("internal failure", exc_info=True)
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INTERNAL
    return rv if isinstance(rv, int) else EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
