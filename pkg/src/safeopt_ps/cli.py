"""Command-line driver for the benchmark experiments.

Usage::

    safeopt-ps quad    [--config FILE] [--out DIR] [--seed N]
    safeopt-ps pid     [--config FILE] [--out DIR] [--seed N]
    safeopt-ps compare [--config FILE] [--out DIR] [--seed N] [--benchmark quad|pid]
    safeopt-ps sweep   [--config FILE] [--out DIR] [--seed N] [--jobs K]
    safeopt-ps gp-check [--config FILE] [--out DIR] [--seed N]

Exit status is 0 on success, 1 when ``gp-check`` finds a mismatch, 2 for a
malformed configuration (nothing is written) and 3 when the algorithm fails
at run time (the trace recorded so far is still written).  File schemas are
described in the README.
"""

import argparse
import copy
import csv
import itertools
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import _accel
from .benchmarks import pid as pid_bench
from .benchmarks import quadratic as quad_bench
from .config import parse_config, resolve
from .errors import ConfigError, SafeOptError
from .gp import GpData, fit, virtual_lower_bounds
from .grid import Grid, run_grid
from .reform import Box
from .reform import run as run_reform
from .trace import RunTrace, fmt, write_json

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULT_SWEEP = {"mesh_tolerance": [1e-6, 1e-4, 1e-2]}

_QUAD_PROBLEM_KEYS = {"noise_std", "initial_jitter"}
_PID_PROBLEM_KEYS = {"noise_std", "plant", "tuning"}


@dataclass
class SummaryRow:
    """One line of a ``compare``/``sweep`` table."""

    label: str
    algorithm: str
    eps_x: float
    eps_f: float
    mesh_tolerance: float
    initial_mesh: float
    # number of grid points for the grid algorithm, 0 otherwise
    grid_points: int
    solution: tuple
    objective: float
    iterations: int
    total_ms: float
    mean_ms_p1: float
    mean_ms_p2: float
    violations: int

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("a summary row needs at least one iteration")
        for name in ("total_ms", "mean_ms_p1", "mean_ms_p2"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        self.solution = tuple(float(v) for v in self.solution)

    @staticmethod
    def header(dim):
        return (
            ["label", "algorithm", "eps_x", "eps_f", "mesh_tolerance", "initial_mesh",
             "grid_points"]
            + [f"x{i}" for i in range(dim)]
            + ["objective", "iterations", "total_ms", "mean_ms_p1", "mean_ms_p2",
               "violations"]
        )

    def row(self):
        return [
            self.label, self.algorithm, self.eps_x, self.eps_f, self.mesh_tolerance,
            self.initial_mesh, self.grid_points, *self.solution, self.objective,
            self.iterations, self.total_ms, self.mean_ms_p1, self.mean_ms_p2,
            self.violations,
        ]


def write_rows(path, rows, dim):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SummaryRow.header(dim))
        for r in rows:
            w.writerow([fmt(v) for v in r.row()])


# ---------------------------------------------------------------- problems


@dataclass
class Setup:
    """Everything a run needs besides the algorithm settings."""

    name: str
    oracle: object
    X0: np.ndarray
    Y0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    # noise-free per-point [f, g...] evaluation used for auditing
    truth: object


def _check_problem_keys(problem, allowed):
    extra = set(problem) - allowed
    if extra:
        raise ConfigError(f"problem.{sorted(extra)[0]}", "unknown key")


def make_setup(cfg):
    """Oracle, initial safe data and search box for ``cfg``; seeded by ``cfg.seed``."""
    prob = cfg.problem
    noise = float(prob.get("noise_std", 0.0))
    if cfg.benchmark == "quad":
        _check_problem_keys(prob, _QUAD_PROBLEM_KEYS)
        jitter = float(prob.get("initial_jitter", 0.0))
        if jitter < 0:
            raise ConfigError("problem.initial_jitter", "must be nonnegative")
        X0 = (quad_bench.initial_safe_set(cfg.seed, jitter) if jitter > 0
              else quad_bench.initial_safe_set())
        oracle = quad_bench.QuadraticProblem(noise, cfg.seed)
        truth = quad_bench.QuadraticProblem()
        lower, upper = quad_bench.LOWER, quad_bench.UPPER
    else:
        _check_problem_keys(prob, _PID_PROBLEM_KEYS)
        try:
            plant = pid_bench.PlantModel(**prob.get("plant", {}))
            spec = pid_bench.TuningSpec(**prob.get("tuning", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError("problem", str(exc)) from None
        X0 = pid_bench.initial_safe_set("pid")
        oracle = pid_bench.PidProblem(plant, spec, noise, cfg.seed)
        truth = pid_bench.PidProblem(plant, spec)
        lower, upper = pid_bench.LOWER, pid_bench.UPPER
    Y0 = np.array([oracle(x) for x in X0])
    return Setup(cfg.benchmark, oracle, X0, Y0, lower, upper, truth)


def _audit(setup, points):
    P = np.asarray(points, dtype=float).reshape(-1, len(setup.lower))
    if len(P) == 0:
        return 0, float("inf")
    vals = np.array([setup.truth(p) for p in P])
    margin = vals[:, 1:].min(axis=1)
    return int((margin < 0).sum()), float(margin.min())


# ---------------------------------------------------------------- one run


@dataclass
class Outcome:
    algorithm: str
    best_point: np.ndarray
    best_lower: float
    trace: RunTrace
    stopped_by: str
    total_ms: float
    grid_points: int = 0


def execute(cfg, setup, algorithm=None, trace=None):
    """Run one algorithm; records land in ``trace`` even if it raises."""
    algorithm = algorithm or cfg.algorithm
    trace = trace if trace is not None else RunTrace(len(setup.lower), setup.Y0.shape[1])
    t0 = time.perf_counter()
    if algorithm == "reform":
        res = run_reform(setup.oracle, setup.X0, cfg.model, Box(setup.lower, setup.upper),
                         cfg.reform, Y0=setup.Y0, trace=trace)
        n_grid, stopped = 0, res.stopped_by
    else:
        grid = Grid.from_box(setup.lower, setup.upper, cfg.grid_counts)
        res = run_grid(setup.oracle, setup.X0, cfg.model, grid, cfg.grid_iterations,
                       Y0=setup.Y0, trace=trace)
        n_grid, stopped = len(grid), "max_iterations"
    ms = 1e3 * (time.perf_counter() - t0)
    return Outcome(algorithm, res.best_point, res.best_lower, trace, stopped, ms, n_grid)


def summarize(cfg, setup, out):
    """The ``summary.json`` document for a finished run."""
    truth = setup.truth(out.best_point)
    violations, worst = _audit(setup, out.trace.points)
    init = np.array([setup.truth(x)[0] for x in setup.X0])
    return {
        "benchmark": cfg.benchmark,
        "algorithm": out.algorithm,
        "backend": _accel.backend_name(),
        "beta": cfg.model.beta,
        "j_min": cfg.model.j_min,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "best_point": out.best_point,
        "best_lower_bound": out.best_lower,
        "objective": float(truth[0]),
        "constraints": truth[1:],
        "initial_best_objective": float(init.max()),
        "iterations": len(out.trace),
        "stopped_by": out.stopped_by,
        "violations": violations,
        "violation_rate": violations / max(len(out.trace), 1),
        "worst_margin": worst,
        "grid_points": out.grid_points,
        "total_ms": out.total_ms,
        "mean_ms_select": out.trace.mean_ms("ms_select"),
        "mean_ms_lstar": out.trace.mean_ms("ms_lstar"),
        "mean_ms_p1": out.trace.mean_ms("ms_p1"),
        "mean_ms_p2": out.trace.mean_ms("ms_p2"),
    }


def summary_row(label, cfg, setup, out):
    truth = setup.truth(out.best_point)
    sub = cfg.reform.subproblem
    violations, _ = _audit(setup, out.trace.points)
    return SummaryRow(
        label, out.algorithm, cfg.reform.eps_x, cfg.reform.eps_f, sub.mesh_tolerance,
        sub.initial_mesh, out.grid_points, tuple(out.best_point), float(truth[0]),
        max(len(out.trace), 1), out.total_ms, out.trace.mean_ms("ms_p1"),
        out.trace.mean_ms("ms_p2"), violations,
    )


def write_trajectories(out_dir, setup, out):
    """``trajectory_<name>.csv`` files for a finished run.

    Every benchmark gets ``trajectory_iterates.csv`` (the recommended points
    with their noise-free outputs).  The PID benchmark also gets the
    closed-loop signals at the best initial gains (``initial``) and at the
    final answer (``final``).
    """
    pts = out.trace.points
    vals = np.array([setup.truth(p) for p in pts]).reshape(len(pts), -1)
    names = [f"x{i}" for i in range(len(setup.lower))]
    outs = ["f"] + [f"g{j}" for j in range(1, setup.Y0.shape[1])]
    with open(os.path.join(out_dir, "trajectory_iterates.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", *names, *outs, "feasible"])
        for r, p, v in zip(out.trace.records, pts, vals):
            w.writerow([fmt(x) for x in (r.n, *p, *v, bool(v[1:].min() >= 0))])
    if setup.name != "pid":
        return
    init = setup.X0[int(np.argmax([setup.truth(x)[0] for x in setup.X0]))]
    for name, gains in (("initial", init), ("final", out.best_point)):
        sim = setup.truth.run(gains)
        with open(os.path.join(out_dir, f"trajectory_{name}.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "speed", "position", "speed_setpoint", "position_setpoint"])
            for row in zip(sim.time, sim.speed, sim.position, sim.speed_setpoint,
                           sim.position_setpoint):
                w.writerow([fmt(x) for x in row])


# ---------------------------------------------------------------- commands


def _fail(msg, code):
    print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_run(cfg, out_dir):
    setup = make_setup(cfg)
    os.makedirs(out_dir, exist_ok=True)
    trace = RunTrace(len(setup.lower), setup.Y0.shape[1])
    try:
        out = execute(cfg, setup, trace=trace)
    except SafeOptError as exc:
        trace.to_csv(os.path.join(out_dir, "trace.csv"))
        write_json(os.path.join(out_dir, "summary.json"), {
            "benchmark": cfg.benchmark, "algorithm": cfg.algorithm, "config": cfg.echo(),
            "error": f"{type(exc).__name__}: {exc}", "iterations": len(trace),
        })
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)
    trace.to_csv(os.path.join(out_dir, "trace.csv"))
    summary = summarize(cfg, setup, out)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    write_trajectories(out_dir, setup, out)
    print(f"{cfg.benchmark}/{out.algorithm}: {summary['iterations']} iterations, "
          f"objective {summary['objective']:.6g}, violations {summary['violations']}")
    return EXIT_OK


def cmd_compare(cfg, out_dir):
    # both algorithms start from the same initial data and the same GP settings
    setup = make_setup(cfg)
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for algo in ("grid", "reform"):
        trace = RunTrace(len(setup.lower), setup.Y0.shape[1])
        try:
            out = execute(cfg, setup, algo, trace)
        except SafeOptError as exc:
            trace.to_csv(os.path.join(out_dir, f"trace_{algo}.csv"))
            return _fail(f"{algo}: {type(exc).__name__}: {exc}", EXIT_RUNTIME)
        trace.to_csv(os.path.join(out_dir, f"trace_{algo}.csv"))
        rows.append(summary_row(algo, cfg, setup, out))
    write_rows(os.path.join(out_dir, "compare.csv"), rows, len(setup.lower))
    write_json(os.path.join(out_dir, "summary.json"),
               {"config": cfg.echo(), "rows": [asdict(r) for r in rows]})
    for r in rows:
        print(f"{r.algorithm}: objective {r.objective:.6g} in {r.iterations} iterations, "
              f"{r.total_ms:.0f} ms")
    return EXIT_OK


def sweep_cells(cfg):
    """``(label, raw config)`` for every cell of the Cartesian sweep."""
    axes = cfg.sweep or DEFAULT_SWEEP
    keys = sorted(axes)
    cells = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        raw = copy.deepcopy(cfg.raw)
        raw.pop("sweep", None)
        raw["algorithm"] = "reform"
        reform = raw.setdefault("reform", {})
        sub = reform.setdefault("subproblem", {})
        parts = []
        for k, v in zip(keys, combo):
            if k == "eps":
                reform["eps_x"] = reform["eps_f"] = v
            else:
                sub[k] = v
            parts.append(f"{k}={v:g}")
        cells.append((",".join(parts), raw))
    return cells


def _sweep_cell(item):
    label, raw = item
    cfg = parse_config(raw, require=False)
    setup = make_setup(cfg)
    out = execute(cfg, setup)
    return summary_row(label, cfg, setup, out)


def cmd_sweep(cfg, out_dir, jobs=1):
    cells = sweep_cells(cfg)
    # validate every cell up front so a bad axis value writes nothing
    for label, raw in cells:
        try:
            parse_config(raw, require=False)
        except ConfigError as exc:
            raise ConfigError(f"sweep[{label}]", str(exc)) from None
    os.makedirs(out_dir, exist_ok=True)
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(_sweep_cell, cells))
        else:
            rows = [_sweep_cell(c) for c in cells]
    except SafeOptError as exc:
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)
    dim = 2 if cfg.benchmark == "quad" else 3
    write_rows(os.path.join(out_dir, "sweep.csv"), rows, dim)
    write_json(os.path.join(out_dir, "summary.json"),
               {"config": cfg.echo(), "jobs": jobs, "rows": [asdict(r) for r in rows]})
    for r in rows:
        print(f"{r.label}: mean p1 {r.mean_ms_p1:.1f} ms, mean p2 {r.mean_ms_p2:.1f} ms")
    return EXIT_OK


def gp_check(cfg, instances=25, tol=1e-8):
    """Compare every configured GP against a dense direct-inversion posterior.

    Inputs are drawn uniformly in the benchmark box, outputs from the true
    oracle.  Also checks the fast virtual-observation update against a refit.
    """
    setup = make_setup(cfg)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = setup.lower, setup.upper
    worst_mean = worst_var = worst_virtual = 0.0
    for _ in range(instances):
        R = int(rng.integers(1, 21))
        X = rng.uniform(lo, hi, size=(R, len(lo)))
        Y = np.array([setup.truth(x) for x in X])
        Xq = rng.uniform(lo, hi, size=(10, len(lo)))
        for i, g in enumerate(cfg.model.gps):
            post = fit(g.kernel, GpData(X, Y[:, i], g.noise_variance, g.prior_mean))
            mean, var, _ = post.predict_full(Xq)
            K = g.kernel.matrix(X, X) + (g.noise_variance + post.jitter) * np.eye(R)
            Ks = g.kernel.matrix(Xq, X)
            Kinv = np.linalg.inv(K)
            m_ref = g.prior_mean + Ks @ Kinv @ (Y[:, i] - g.prior_mean)
            v_ref = np.maximum(g.kernel.signal_variance - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks), 0)
            scale = g.kernel.signal_variance
            worst_mean = max(worst_mean, float(np.max(np.abs(mean - m_ref)) / (np.sqrt(scale) + np.max(np.abs(m_ref)))))
            worst_var = max(worst_var, float(np.max(np.abs(var - v_ref)) / scale))
            # sequential conditioning on a virtual datum vs. a plain refit
            xv = Xq[:1]
            yv = float(mean[0] + cfg.model.beta * np.sqrt(var[0]))
            fast = virtual_lower_bounds(post, cfg.model.beta, np.repeat(xv, len(Xq), 0), Xq,
                                        np.full(len(Xq), yv))
            full = fit(g.kernel, GpData(np.vstack([X, xv]), np.append(Y[:, i], yv),
                                        g.noise_variance + post.jitter, g.prior_mean))
            ref = full.bounds(Xq, cfg.model.beta)[0]
            err = np.max(np.abs(fast - ref)) / (np.sqrt(scale) + np.max(np.abs(ref)))
            worst_virtual = max(worst_virtual, float(err))
    ok = max(worst_mean, worst_var, worst_virtual) <= tol
    return {
        "instances": instances, "tolerance": tol, "max_mean_error": worst_mean,
        "max_var_error": worst_var, "max_virtual_error": worst_virtual, "passed": ok,
        "backend": _accel.backend_name(),
    }


def cmd_gp_check(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    report = gp_check(cfg)
    write_json(os.path.join(out_dir, "gp_check.json"), report)
    print(f"gp-check: mean {report['max_mean_error']:.2e}, var {report['max_var_error']:.2e}, "
          f"virtual {report['max_virtual_error']:.2e} -> "
          f"{'PASS' if report['passed'] else 'FAIL'}")
    return EXIT_OK if report["passed"] else EXIT_CHECK


# ---------------------------------------------------------------- entry point


def build_parser():
    p = argparse.ArgumentParser(prog="safeopt-ps", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["quad", "pid", "compare", "sweep", "gp-check"])
    p.add_argument("--config", help="JSON run configuration (defaults built in)")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    p.add_argument("--benchmark", choices=["quad", "pid"],
                   help="benchmark for compare/sweep/gp-check without --config")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        return _fail("--seed must be an unsigned 64-bit integer", EXIT_CONFIG)
    if args.jobs < 1:
        return _fail("--jobs must be at least 1", EXIT_CONFIG)
    if args.command in ("quad", "pid"):
        bench = args.command
    else:
        bench = args.benchmark if args.config is None else None
        if bench is None and args.config is None:
            bench = "pid" if args.command == "sweep" else "quad"
    try:
        cfg = resolve(args.config, bench, args.seed)
        if args.command in ("quad", "pid"):
            return cmd_run(cfg, args.out)
        if args.command == "compare":
            return cmd_compare(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.jobs)
        return cmd_gp_check(cfg, args.out)
    except ConfigError as exc:
        return _fail(f"config: {exc}", EXIT_CONFIG)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
