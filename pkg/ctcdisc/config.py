"""
Experiment configuration files.

A config is a TOML document:

    mode = "exponent"           # exact | montecarlo | exponent | fixedpoint
    output = "bb84.csv"         # optional, default <mode>.csv

    [problem]
    builtin = "bb84"            # or two_state, qubit_set, geometrically_uniform
    priors = [0.25, 0.25, 0.25, 0.25]

    [omega]
    basis = 0                   # or diagonal = [...], mixed = true, best = true

    [run]
    window = [50, 200]

Complex amplitudes are numbers or strings like "0.5-0.5i".
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
import copy
import dataclasses as dc
import math
import os
import sys
from typing import Any, Literal, Optional, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import add_note, CtcdiscConfigError, CtcdiscValidationError
from .quantum import DensityMatrix, PureState
from . import synthesis
from .synthesis import DiscriminationProblem
from .utils import amplitudes

__all__ = [
    'MODES', 'ProblemConfig', 'OmegaConfig', 'RunConfig', 'ExperimentConfig',
    'load_config', 'parse_config', 'apply_override', 'build_problem', 'build_omega',
    ]

MODES = ('exact', 'montecarlo', 'exponent', 'fixedpoint')
Mode = Literal['exact', 'montecarlo', 'exponent', 'fixedpoint']


@dc.dataclass(frozen=True)
class ProblemConfig:
    builtin: Optional[str] = None
    states: Optional[list[list[Any]]] = None
    bloch: Optional[list[list[float]]] = None
    unitaries: Optional[list[list[list[Any]]]] = None
    phases: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    priors: tuple[float, ...] = ()
    rotation: Optional[list[list[Any]]] = None
    layout: Literal['pad', 'ancilla'] = 'pad'


@dc.dataclass(frozen=True)
class OmegaConfig:
    basis: Optional[int] = None
    diagonal: Optional[tuple[float, ...]] = None
    mixed: bool = False
    best: bool = False


@dc.dataclass(frozen=True)
class RunConfig:
    """[run] table, only the items relevant to the selected mode are used."""

    n: Optional[int] = None
    n_min: int = 0
    n_max: int = 20
    n_grid: Optional[tuple[int, ...]] = None
    montecarlo: bool = False
    oracle: bool = False
    trials: int = 100_000
    seed: int = 0
    workers: int = 1
    chunk_size: int = 100_000
    policy: Literal['fixed', 'omega'] = 'fixed'
    window: tuple[int, int] = (50, 200)
    state: int = 0
    target: Optional[int] = None
    max_iters: int = 10_000
    tol: float = 1e-10

    def grid(self) -> list[int]:
        """Return the list of n values for the decay table."""
        if self.n_grid is not None:
            return list(self.n_grid)
        if self.n is not None:
            return [self.n]
        return list(range(self.n_min, self.n_max + 1))


@dc.dataclass(frozen=True)
class ExperimentConfig:
    mode: Mode
    output: str
    problem: ProblemConfig
    omega: OmegaConfig
    run: RunConfig
    source: Optional[str] = None


def _typed(value: Any, kind: Union[type, tuple[type, ...]], key: str) -> Any:
    # bool is an int subclass, reject it where a number is expected
    if isinstance(value, bool) and bool not in (kind if isinstance(kind, tuple) else (kind,)):
        raise CtcdiscConfigError(f"{key}: expected {_kind_name(kind)}, got {value!r}")
    if not isinstance(value, kind):
        raise CtcdiscConfigError(f"{key}: expected {_kind_name(kind)}, got {value!r}")
    return value


def _kind_name(kind: Union[type, tuple[type, ...]]) -> str:
    if isinstance(kind, tuple):
        return ' or '.join(k.__name__ for k in kind)
    return kind.__name__


def _number(value: Any, key: str) -> float:
    return float(_typed(value, (int, float), key))


def _number_list(value: Any, key: str) -> tuple[float, ...]:
    return tuple(_number(v, f"{key}[{i}]") for i, v in enumerate(_typed(value, list, key)))


def _int_list(value: Any, key: str) -> tuple[int, ...]:
    return tuple(_typed(v, int, f"{key}[{i}]") for i, v in enumerate(_typed(value, list, key)))


def _check_keys(table: Mapping[str, Any], allowed: Sequence[str], name: str) -> None:
    if unknown := sorted(set(table) - set(allowed)):
        raise CtcdiscConfigError(f"[{name}]: unknown key(s): {', '.join(unknown)}")


def _parse_problem(table: Mapping[str, Any]) -> ProblemConfig:
    _check_keys(table, [f.name for f in dc.fields(ProblemConfig)], 'problem')
    kwargs: dict[str, Any] = {}
    if 'builtin' in table:
        builtin = _typed(table['builtin'], str, 'problem.builtin')
        if builtin not in synthesis.BUILTIN_PROBLEMS:
            raise CtcdiscConfigError(
                f"problem.builtin: unknown problem {builtin!r}, "
                + f"choose from: {', '.join(synthesis.BUILTIN_PROBLEMS)}")
        kwargs['builtin'] = builtin
    for key in ('states', 'bloch', 'unitaries', 'rotation'):
        if key in table:
            kwargs[key] = _typed(table[key], list, f"problem.{key}")
    if 'phases' in table:
        kwargs['phases'] = _number_list(table['phases'], 'problem.phases')
    if 'priors' in table:
        kwargs['priors'] = _number_list(table['priors'], 'problem.priors')
    if 'layout' in table:
        if (layout := table['layout']) not in ('pad', 'ancilla'):
            raise CtcdiscConfigError(
                f"problem.layout: expected 'pad' or 'ancilla', got {layout!r}")
        kwargs['layout'] = layout
    cfg = ProblemConfig(**kwargs)
    if (cfg.builtin is None) == (cfg.unitaries is None):
        raise CtcdiscConfigError(
            "[problem]: define exactly one problem source, "
            + "either 'builtin' or explicit 'states' with 'unitaries'")
    if cfg.unitaries is not None and cfg.states is None:
        raise CtcdiscConfigError("[problem]: explicit 'unitaries' require 'states'")
    if cfg.states is not None and cfg.bloch is not None:
        raise CtcdiscConfigError("[problem]: 'states' and 'bloch' are mutually exclusive")
    return cfg


def _parse_omega(table: Mapping[str, Any]) -> OmegaConfig:
    _check_keys(table, [f.name for f in dc.fields(OmegaConfig)], 'omega')
    kwargs: dict[str, Any] = {}
    if 'basis' in table:
        kwargs['basis'] = _typed(table['basis'], int, 'omega.basis')
    if 'diagonal' in table:
        kwargs['diagonal'] = _number_list(table['diagonal'], 'omega.diagonal')
    for key in ('mixed', 'best'):
        if key in table:
            kwargs[key] = _typed(table[key], bool, f"omega.{key}")
    cfg = OmegaConfig(**kwargs)
    selected = [cfg.basis is not None, cfg.diagonal is not None, cfg.mixed, cfg.best]
    if sum(selected) > 1:
        raise CtcdiscConfigError(
            "[omega]: basis, diagonal, mixed and best are mutually exclusive")
    return cfg


def _parse_run(table: Mapping[str, Any]) -> RunConfig:
    _check_keys(table, [f.name for f in dc.fields(RunConfig)], 'run')
    kwargs: dict[str, Any] = {}
    for key in (
            'n', 'n_min', 'n_max', 'trials', 'seed', 'workers', 'chunk_size',
            'state', 'target', 'max_iters'):
        if key in table:
            kwargs[key] = _typed(table[key], int, f"run.{key}")
    if 'tol' in table:
        kwargs['tol'] = _number(table['tol'], 'run.tol')
    for key in ('montecarlo', 'oracle'):
        if key in table:
            kwargs[key] = _typed(table[key], bool, f"run.{key}")
    if 'policy' in table:
        if (policy := table['policy']) not in ('fixed', 'omega'):
            raise CtcdiscConfigError(f"run.policy: expected 'fixed' or 'omega', got {policy!r}")
        kwargs['policy'] = policy
    if 'n_grid' in table:
        kwargs['n_grid'] = _int_list(table['n_grid'], 'run.n_grid')
    if 'window' in table:
        window = _int_list(table['window'], 'run.window')
        if len(window) != 2:
            raise CtcdiscConfigError("run.window: expected [n_min, n_max]")
        kwargs['window'] = window
    cfg = RunConfig(**kwargs)
    grid = cfg.grid()
    if not grid or min(grid) < 0:
        raise CtcdiscConfigError("[run]: the n values must be non-negative and not empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise CtcdiscConfigError("[run]: the n values must be strictly increasing")
    if not 0 <= cfg.window[0] < cfg.window[1]:
        raise CtcdiscConfigError(f"run.window: invalid window {list(cfg.window)}")
    if cfg.trials < 1 or cfg.workers < 1 or cfg.chunk_size < 1 or cfg.max_iters < 0:
        raise CtcdiscConfigError(
            "[run]: trials, workers and chunk_size must be positive, max_iters non-negative")
    if not 0 <= cfg.seed < 2**64:
        raise CtcdiscConfigError("run.seed: expected a 64-bit unsigned integer")
    if not (cfg.tol > 0.0 and math.isfinite(cfg.tol)):
        raise CtcdiscConfigError("run.tol: expected a positive number")
    return cfg


def parse_config(data: Mapping[str, Any], source: Optional[str] = None) -> ExperimentConfig:
    """Check a parsed TOML document and convert it to an ExperimentConfig."""
    _check_keys(data, ['mode', 'output', 'problem', 'omega', 'run'], 'top level')
    mode = data.get('mode')
    if mode not in MODES:
        raise CtcdiscConfigError(f"mode: expected one of {', '.join(MODES)}, got {mode!r}")
    if 'problem' not in data:
        raise CtcdiscConfigError("The [problem] table is missing")
    output = _typed(data.get('output', f"{mode}.csv"), str, 'output')
    return ExperimentConfig(
        mode=mode,
        output=output,
        problem=_parse_problem(_typed(data['problem'], dict, 'problem')),
        omega=_parse_omega(_typed(data.get('omega', {}), dict, 'omega')),
        run=_parse_run(_typed(data.get('run', {}), dict, 'run')),
        source=source,
        )


def _scalar(text: str) -> Any:
    """Parse a TOML value, fall back to a bare string."""
    try:
        return tomllib.loads(f"value = {text}")['value']
    except tomllib.TOMLDecodeError:
        return text


def apply_override(data: dict[str, Any], override: str) -> None:
    """Apply "dotted.key=value" to a parsed TOML document in place."""
    key, sep, text = override.partition('=')
    key = key.strip()
    if not sep or not key:
        raise CtcdiscConfigError(f"Invalid override {override!r}, expected key=value")
    *path, last = key.split('.')
    table = data
    for name in path:
        table = table.setdefault(name, {})
        if not isinstance(table, dict):
            raise CtcdiscConfigError(f"Override {override!r}: {name!r} is not a table")
    table[last] = _scalar(text.strip())


def load_config(
        path: str | os.PathLike[str], overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Read and check a config file. Raise CtcdiscConfigError on any problem."""
    try:
        with open(path, 'rb') as cfg_file:
            data = tomllib.load(cfg_file)
    except OSError as err:
        raise CtcdiscConfigError(f"Cannot read config file: {err}") from None
    except tomllib.TOMLDecodeError as err:
        raise CtcdiscConfigError(f"{os.fspath(path)}: {err}") from None
    data = copy.deepcopy(data)
    for override in overrides:
        apply_override(data, override)
    try:
        return parse_config(data, source=os.fspath(path))
    except CtcdiscConfigError as err:
        add_note(err, f"config file: {os.fspath(path)}")
        raise


def _state(values: Any, key: str) -> PureState:
    try:
        return PureState(amplitudes.amplitude_vector(_typed(values, list, key)))
    except (TypeError, ValueError) as err:
        raise CtcdiscConfigError(f"{key}: {err}") from None


def _matrix(rows: Any, key: str) -> np.ndarray:
    try:
        return np.array(
            [[amplitudes.amplitude(x) for x in _typed(row, list, key)]
             for row in _typed(rows, list, key)],
            dtype=np.complex128)
    except (TypeError, ValueError) as err:
        raise CtcdiscConfigError(f"{key}: {err}") from None


def _states(cfg: ProblemConfig) -> list[PureState]:
    if cfg.bloch is not None:
        states = []
        for i, pair in enumerate(cfg.bloch):
            angles = _number_list(pair, f"problem.bloch[{i}]")
            if len(angles) != 2:
                raise CtcdiscConfigError(f"problem.bloch[{i}]: expected [theta, phi]")
            states.append(synthesis.bloch_state(*angles))
        return states
    if cfg.states is None:
        raise CtcdiscConfigError("[problem]: 'states' or 'bloch' is required")
    return [_state(values, f"problem.states[{i}]") for i, values in enumerate(cfg.states)]


def build_problem(cfg: ProblemConfig) -> DiscriminationProblem:
    """
    Build the problem described by the [problem] table.

    Config errors raise CtcdiscConfigError, invalid quantum data
    (e.g. degenerate states) CtcdiscValidationError. Argument errors
    of the problem builders (wrong shapes, bad priors) are config errors.
    """
    try:
        return _build_problem(cfg)
    except (ValueError, IndexError, TypeError) as err:
        raise CtcdiscConfigError(f"[problem]: {err}") from None


def _build_problem(cfg: ProblemConfig) -> DiscriminationProblem:
    priors = cfg.priors
    if cfg.builtin == 'bb84':
        return synthesis.bb84_problem(priors)
    if cfg.builtin == 'two_state':
        states = _states(cfg)
        if len(states) != 2:
            raise CtcdiscConfigError(f"two_state: expected 2 states, got {len(states)}")
        if len(cfg.phases) != 4:
            raise CtcdiscConfigError("two_state: expected 4 phases")
        return synthesis.two_state_problem(states[0], states[1], priors, cfg.phases)
    if cfg.builtin == 'qubit_set':
        states = _states(cfg)
        if len(states) < 2:
            raise CtcdiscConfigError("qubit_set: at least 2 states are required")
        if any(psi.dim != 2 for psi in states):
            raise CtcdiscConfigError("qubit_set: all states must be qubits")
        return synthesis.qubit_set_problem(states, priors, layout=cfg.layout)
    if cfg.builtin == 'geometrically_uniform':
        if cfg.rotation is None:
            raise CtcdiscConfigError("geometrically_uniform: 'rotation' is required")
        return synthesis.geometrically_uniform_problem(
            _matrix(cfg.rotation, 'problem.rotation'), priors)
    assert cfg.unitaries is not None
    states = _states(cfg)
    unitaries = synthesis.UnitarySet(tuple(
        _matrix(rows, f"problem.unitaries[{i}]") for i, rows in enumerate(cfg.unitaries)))
    return DiscriminationProblem(
        synthesis.StateSet(tuple(states), priors), unitaries,
        layout=cfg.layout, name='explicit')


def build_omega(cfg: OmegaConfig, dim: int) -> Optional[DensityMatrix]:
    """
    Return the initial C register state or None if cfg.best is set.

    The best basis state depends on the run and is chosen by the caller.
    """
    if cfg.best:
        return None
    if cfg.diagonal is not None:
        if len(cfg.diagonal) != dim:
            raise CtcdiscConfigError(f"omega.diagonal: expected {dim} entries")
        try:
            return DensityMatrix.from_diagonal(cfg.diagonal)
        except CtcdiscValidationError as err:
            raise CtcdiscConfigError(f"omega.diagonal: {err}") from None
    if cfg.mixed:
        return DensityMatrix.maximally_mixed(dim)
    index = 0 if cfg.basis is None else cfg.basis
    if not 0 <= index < dim:
        raise CtcdiscConfigError(f"omega.basis: index {index} out of range 0..{dim - 1}")
    return DensityMatrix.basis(index, dim)
