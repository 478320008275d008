"""
Command line interface.

    ctcdisc [-v] run CONFIG [--override KEY=VALUE]... [--out DIR]
    ctcdisc [-v] validate CONFIG [--override KEY=VALUE]...
    ctcdisc builtins

Exit status: 0 success, 1 other failure (e.g. numerical), 2 config error,
3 validation error, 4 resource guard.
"""

from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
import dataclasses as dc
import logging
import math
import os
import sys
from typing import Any, NamedTuple, Optional

from . import config as cfgmod
from . import markov, simulate
from .exceptions import (
    CtcdiscConfigError, CtcdiscConvergenceError, CtcdiscError, CtcdiscResourceError,
    CtcdiscValidationError)
from .quantum import (
    build_interaction_unitary, DensityMatrix, iterate_to_fixed_point, trace_distance)
from .synthesis import BUILTIN_PROBLEMS, DiscriminationProblem, validate_unitary_set
from .utils import complex_str, write_table

__all__ = [
    'EXIT_OK', 'EXIT_FAILURE', 'EXIT_CONFIG', 'EXIT_VALIDATION', 'EXIT_RESOURCE',
    'DECAY_COLUMNS', 'EXPONENT_COLUMNS', 'FIXEDPOINT_COLUMNS', 'ORACLE_COLUMN',
    'emit_decay_table', 'emit_exponent_table', 'emit_fixedpoint_table',
    'prepare_problem', 'run_experiment', 'run', 'main',
    ]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_RESOURCE = 4

DECAY_COLUMNS = ('n', 'p_e_exact', 'p_s_exact', 'neg_log_pe_over_n', 'p_e_mc', 'mc_stderr')
EXPONENT_COLUMNS = (
    'tau', 'xi_lower', 'gersh_col', 'gersh_row', 'chernoff',
    'xi_hat_regression', 'ci_lo', 'ci_hi')
FIXEDPOINT_COLUMNS = ('iter', 'residual', 'trace_distance_to_target')
ORACLE_COLUMN = 'p_e_oracle'

_logger = logging.getLogger(__package__)

Row = list[Any]


class Table(NamedTuple):
    header: Sequence[str]
    rows: list[Row]
    summary: str


def emit_decay_table(
        problem: DiscriminationProblem,
        n_grid: Sequence[int],
        sim: Optional[simulate.SimConfig] = None,
        oracle: bool = False,
        ) -> Table:
    """
    Tabulate p_e^(n), p_s^(n) and -ln p_e^(n) / n.

    With sim, every n >= 1 gets a Monte Carlo estimate (sim.n_copies is
    replaced by n, the seed is derived from sim.seed and n). Otherwise
    the Monte Carlo columns are empty. With oracle, a p_e_oracle column
    computed by markov.brute_force_error() is appended.
    """
    p_e, p_s = markov.decay_curve(problem, n_grid)
    log_pe = markov.log_error_probabilities(problem, n_grid)
    rows = []
    for n, pe_n, ps_n, log_n in zip(n_grid, p_e, p_s, log_pe):
        rate = -log_n / n if n > 0 else None
        mc_pe = mc_err = None
        if sim is not None and n > 0:
            result = simulate.run_adaptive(
                problem, dc.replace(sim, n_copies=n, seed=simulate.derive_seed(sim.seed, n)))
            mc_pe, mc_err = result.empirical_p_e, result.std_error
        row = [n, pe_n, ps_n, rate, mc_pe, mc_err]
        if oracle:
            row.append(markov.brute_force_error(problem, n))
        rows.append(row)
    last = rows[-1]
    summary = f"n={last[0]} p_e={last[1]:.6g} p_s={last[2]:.6g}"
    if last[4] is not None:
        summary += f" p_e_mc={last[4]:.6g}+-{last[5]:.2g}"
    header = (*DECAY_COLUMNS, ORACLE_COLUMN) if oracle else DECAY_COLUMNS
    return Table(header, rows, summary)


def emit_exponent_table(
        problem: DiscriminationProblem, window: tuple[int, int] = markov.DEFAULT_WINDOW
        ) -> Table:
    """One row with the exponent bounds and the regression estimate."""
    report = markov.exponent_report(problem)
    fit = markov.regression_exponent(problem, window)
    row = [
        report.tau, report.xi_lower, report.gersh_col, report.gersh_row, report.chernoff,
        fit.xi_hat, fit.ci[0], fit.ci[1]]
    summary = (
        f"tau={report.tau:.6g} xi_lower={report.xi_lower:.6g} "
        + f"chernoff={report.chernoff:.6g} xi_hat={fit.xi_hat:.6g}")
    return Table(EXPONENT_COLUMNS, [row], summary)


def emit_fixedpoint_table(
        problem: DiscriminationProblem,
        state: int,
        target: Optional[int] = None,
        max_iters: int = 10_000,
        tol: float = 1e-10,
        ) -> Table:
    """
    Iterate the channel for rho = |psi_state><psi_state| starting from omega.

    Each row holds the self-consistency residual and the trace distance
    of the iterate to |target><target| (default target = state).
    """
    if not 0 <= state < problem.n:
        raise IndexError(f"State index {state} out of range 0..{problem.n - 1}")
    if target is None:
        target = state
    goal = DensityMatrix.basis(target, problem.n)
    rows: list[Row] = []

    def on_step(iteration: int, sigma: DensityMatrix, residual: float) -> None:
        rows.append([iteration, residual, trace_distance(sigma, goal)])

    assert problem.omega is not None
    result = iterate_to_fixed_point(
        build_interaction_unitary(problem.unitaries),
        problem.embedded_states[state].density(),
        problem.omega,
        max_iters=max_iters, tol=tol, on_step=on_step)
    status = 'converged' if result.converged else 'NOT converged'
    summary = (
        f"{status} after {result.iters} iteration(s), residual={result.residual:.3g}, "
        + f"trace distance to |{target}><{target}|={rows[-1][2]:.3g}")
    return Table(FIXEDPOINT_COLUMNS, rows, summary)


def prepare_problem(cfg: cfgmod.ExperimentConfig) -> DiscriminationProblem:
    """Build the problem and set omega, resolving omega.best for the run."""
    problem = cfgmod.build_problem(cfg.problem)
    omega = cfgmod.build_omega(cfg.omega, problem.n)
    if omega is None:
        if cfg.mode == 'exponent':
            n_best = cfg.run.window[1]
        elif cfg.mode == 'fixedpoint':
            n_best = cfg.run.max_iters
        else:
            n_best = max(cfg.run.grid())
        index, p_s = markov.best_initial_state(problem, n_best)
        _logger.info("Best initial basis state for n=%d: %d (p_s=%.6g)", n_best, index, p_s)
        omega = DensityMatrix.basis(index, problem.n)
    return problem.with_omega(omega)


def _sim_config(run_cfg: cfgmod.RunConfig) -> simulate.SimConfig:
    policy: simulate.InitialPolicy
    policy = simulate.SampleFromOmega() if run_cfg.policy == 'omega' else simulate.FixedIndex(0)
    return simulate.SimConfig(
        n_copies=1,
        n_trials=run_cfg.trials,
        seed=run_cfg.seed,
        policy=policy,
        workers=run_cfg.workers,
        chunk_size=run_cfg.chunk_size)


def run_experiment(cfg: cfgmod.ExperimentConfig, out_dir: Optional[str] = None) -> str:
    """Run the experiment, write the CSV file and return a one-line summary."""
    problem = prepare_problem(cfg)
    run_cfg = cfg.run
    if cfg.mode in ('exact', 'montecarlo'):
        sim = None
        if cfg.mode == 'montecarlo' or run_cfg.montecarlo:
            sim = _sim_config(run_cfg)
            if isinstance(sim.policy, simulate.FixedIndex):
                # the fixed initial outcome follows a basis state omega
                diag = problem.initial_distribution
                if math.isclose(max(diag), 1.0):
                    sim = dc.replace(sim, policy=simulate.FixedIndex(int(diag.argmax())))
                else:
                    sim = dc.replace(sim, policy=simulate.SampleFromOmega())
        table = emit_decay_table(problem, run_cfg.grid(), sim, run_cfg.oracle)
    elif cfg.mode == 'exponent':
        table = emit_exponent_table(problem, run_cfg.window)
    else:
        for key, index in (('run.state', run_cfg.state), ('run.target', run_cfg.target)):
            if index is not None and not 0 <= index < problem.n:
                raise CtcdiscConfigError(
                    f"{key}: index {index} out of range 0..{problem.n - 1}")
        table = emit_fixedpoint_table(
            problem, run_cfg.state, run_cfg.target, run_cfg.max_iters, run_cfg.tol)
    path = write_table(cfg.output, table.header, table.rows, directory=out_dir)
    return f"{cfg.mode}: {table.summary} -> {path}"


def _diagnostic(kind: str, err: BaseException) -> None:
    print(f"ctcdisc: {kind}: {err}", file=sys.stderr)
    for note in getattr(err, '__notes__', ()):
        print(f"    {note}", file=sys.stderr)


def _guarded(func: Callable[..., None], *args: Any) -> int:
    """Call func(*args), map exceptions to the exit status."""
    try:
        func(*args)
    except CtcdiscConfigError as err:
        _diagnostic('config error', err)
        return EXIT_CONFIG
    except CtcdiscValidationError as err:
        _diagnostic('validation error', err)
        return EXIT_VALIDATION
    except CtcdiscResourceError as err:
        _diagnostic('resource limit', err)
        return EXIT_RESOURCE
    except CtcdiscConvergenceError as err:
        _diagnostic('numerical failure', err)
        return EXIT_FAILURE
    except (CtcdiscError, ValueError, IndexError, TypeError) as err:
        _diagnostic('error', err)
        return EXIT_FAILURE
    return EXIT_OK


def run(
        config_path: str | os.PathLike[str],
        overrides: Sequence[str] = (),
        out_dir: Optional[str] = None,
        ) -> int:
    """Load the config, run the experiment, print the summary. Return the exit status."""
    def _run() -> None:
        cfg = cfgmod.load_config(config_path, overrides)
        print(run_experiment(cfg, out_dir))
    return _guarded(_run)


def _validate(config_path: str, overrides: Sequence[str]) -> None:
    cfg = cfgmod.load_config(config_path, overrides)
    problem = cfgmod.build_problem(cfg.problem)
    report = validate_unitary_set(problem.states, problem.unitaries, problem.layout)
    print(f"{problem.name}: N={problem.n}, priors={list(problem.states.priors)}")
    for i, psi in enumerate(problem.states):
        print(f"psi_{i} = [{', '.join(complex_str(a, 6) for a in psi.amplitudes)}]")
    for line in report.summary():
        print(line)
    print("OK" if report.ok else "FAILED")


def _builtins() -> None:
    for name, description in BUILTIN_PROBLEMS.items():
        print(f"{name:<24}{description}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ctcdisc',
        description="Multi-copy state discrimination with D-CTC assisted measurements.")
    parser.add_argument(
        '-v', '--verbose', action='count', default=0,
        help="increase the log level (-v info, -vv debug)")
    commands = parser.add_subparsers(dest='command', required=True)
    cmd = commands.add_parser('run', help="run an experiment and write a CSV table")
    cmd.add_argument('config', help="TOML experiment config")
    cmd.add_argument(
        '--override', action='append', default=[], metavar='KEY=VALUE',
        help="override a config item, e.g. run.n_max=50 (repeatable)")
    cmd.add_argument('--out', metavar='DIR', help="output directory")
    cmd = commands.add_parser('validate', help="check the problem of an experiment config")
    cmd.add_argument('config', help="TOML experiment config")
    cmd.add_argument('--override', action='append', default=[], metavar='KEY=VALUE')
    commands.add_parser('builtins', help="list the builtin problems")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s: %(message)s')
    if args.command == 'run':
        return run(args.config, args.override, args.out)
    if args.command == 'validate':
        return _guarded(_validate, args.config, args.override)
    return _guarded(_builtins)
