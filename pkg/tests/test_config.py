"""
Test the experiment configuration.
"""

import math
import pathlib

import numpy as np
import pytest

import ctcdisc
from ctcdisc import config
from ctcdisc.config import build_omega, build_problem, parse_config


def minimal(**items):
    data = {'mode': 'exact', 'problem': {'builtin': 'bb84'}}
    data.update(items)
    return data


def test_defaults():
    cfg = parse_config(minimal())
    assert cfg.mode == 'exact'
    assert cfg.output == 'exact.csv'
    assert cfg.problem.builtin == 'bb84'
    assert cfg.omega == config.OmegaConfig()
    assert cfg.run.grid() == list(range(21))
    assert cfg.run.window == (50, 200)
    assert cfg.source is None


def test_grid():
    assert parse_config(minimal(run={'n': 7})).run.grid() == [7]
    assert parse_config(minimal(run={'n_min': 3, 'n_max': 5})).run.grid() == [3, 4, 5]
    cfg = parse_config(minimal(run={'n': 7, 'n_grid': [1, 10, 100]}))
    assert cfg.run.grid() == [1, 10, 100]


@pytest.mark.parametrize('data, match', [
    (minimal(extra=1), "unknown key"),
    (minimal(mode='simulate'), "mode"),
    ({'mode': 'exact'}, "problem"),
    (minimal(output=5), "output"),
    (minimal(problem={'builtin': 'bb85'}), "unknown problem"),
    (minimal(problem={'builtin': 'bb84', 'size': 4}), "unknown key"),
    (minimal(problem={'builtin': 'bb84', 'layout': 'tensor'}), "layout"),
    (minimal(problem={'builtin': 'bb84', 'priors': [0.5, True]}), "priors"),
    (minimal(problem={}), "exactly one problem source"),
    (minimal(problem={'builtin': 'bb84', 'unitaries': [], 'states': []}),
     "exactly one problem source"),
    (minimal(problem={'unitaries': [[[1]]]}), "require 'states'"),
    (minimal(problem={'builtin': 'qubit_set', 'states': [], 'bloch': []}),
     "mutually exclusive"),
    (minimal(omega={'basis': 1, 'mixed': True}), "mutually exclusive"),
    (minimal(omega={'basis': 1.0}), "omega.basis"),
    (minimal(omega={'best': 1}), "omega.best"),
    (minimal(run={'n_max': True}), "run.n_max"),
    (minimal(run={'n_max': 2.5}), "run.n_max"),
    (minimal(run={'n_grid': [3, 2]}), "strictly increasing"),
    (minimal(run={'n_grid': []}), "not empty"),
    (minimal(run={'n': -1}), "non-negative"),
    (minimal(run={'window': [10]}), "run.window"),
    (minimal(run={'window': [10, 5]}), "invalid window"),
    (minimal(run={'trials': 0}), "positive"),
    (minimal(run={'seed': -1}), "run.seed"),
    (minimal(run={'tol': 0}), "run.tol"),
    (minimal(run={'policy': 'random'}), "run.policy"),
    (minimal(run={'oracle': 'yes'}), "run.oracle"),
    ])
def test_invalid(data, match):
    with pytest.raises(ctcdisc.CtcdiscConfigError, match=match):
        parse_config(data)


def test_apply_override():
    data = minimal()
    config.apply_override(data, 'run.n_max=50')
    config.apply_override(data, 'output = out.csv')
    config.apply_override(data, 'problem.priors=[0.1, 0.2, 0.3, 0.4]')
    config.apply_override(data, 'omega.best=true')
    config.apply_override(data, 'run.tol=1e-8')
    assert data['run'] == {'n_max': 50, 'tol': 1e-8}
    assert data['output'] == 'out.csv'
    assert data['problem']['priors'] == [0.1, 0.2, 0.3, 0.4]
    assert data['omega'] == {'best': True}
    cfg = parse_config(data)
    assert cfg.run.n_max == 50
    assert cfg.problem.priors == (0.1, 0.2, 0.3, 0.4)
    with pytest.raises(ctcdisc.CtcdiscConfigError, match="key=value"):
        config.apply_override(data, 'run.n_max')
    with pytest.raises(ctcdisc.CtcdiscConfigError, match="key=value"):
        config.apply_override(data, '=5')
    with pytest.raises(ctcdisc.CtcdiscConfigError, match="not a table"):
        config.apply_override(data, 'run.n_max.x=1')


def test_load_config(tmp_path):
    path = tmp_path / 'exp.toml'
    path.write_text("""
        mode = "exponent"
        output = "bb84_exponent.csv"

        [problem]
        builtin = "bb84"

        [run]
        window = [20, 80]
        """)
    cfg = config.load_config(path)
    assert cfg.mode == 'exponent'
    assert cfg.output == 'bb84_exponent.csv'
    assert cfg.run.window == (20, 80)
    assert cfg.source == str(path)
    cfg = config.load_config(path, ['run.window=[10, 30]', 'mode="exact"'])
    assert cfg.run.window == (10, 30)
    assert cfg.mode == 'exact'
    with pytest.raises(ctcdisc.CtcdiscConfigError, match="unknown key"):
        config.load_config(path, ['run.windows=[1, 2]'])


def test_load_config_errors(tmp_path):
    with pytest.raises(ctcdisc.CtcdiscConfigError, match="Cannot read"):
        config.load_config(tmp_path / 'missing.toml')
    path = tmp_path / 'broken.toml'
    path.write_text('mode = "exact\n')
    with pytest.raises(ctcdisc.CtcdiscConfigError):
        config.load_config(path)


EYE3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]


def problem_cfg(**items):
    return parse_config(minimal(problem=items)).problem


def test_build_builtins():
    problem = build_problem(problem_cfg(builtin='bb84', priors=[0.1, 0.2, 0.3, 0.4]))
    assert problem.n == 4
    np.testing.assert_allclose(problem.priors, [0.1, 0.2, 0.3, 0.4])
    problem = build_problem(problem_cfg(builtin='two_state', states=[[1, 0], [0.6, 0.8]]))
    assert problem.n == 2
    assert problem.states.max_overlap() == pytest.approx(0.36)
    problem = build_problem(problem_cfg(
        builtin='qubit_set', bloch=[[0, 0], [math.pi / 2, 0], [math.pi / 2, math.pi / 2]]))
    assert problem.n == 3
    assert problem.states.max_overlap() == pytest.approx(0.5)
    problem = build_problem(problem_cfg(
        builtin='qubit_set', states=[[1, 0], [0, 1], ['0.6', '0.8i']], layout='pad'))
    assert problem.states[2].amplitudes[1] == pytest.approx(0.8j)
    problem = build_problem(problem_cfg(
        builtin='geometrically_uniform', rotation=[[1, 0], [0, 'i']]))
    assert problem.n == 4


def test_build_explicit():
    problem = build_problem(problem_cfg(
        states=[[1, 0], [0, 1]], unitaries=[[[1, 0], [0, 1]], [[1, 0], [0, 1]]]))
    assert problem.name == 'explicit'
    assert problem.n == 2
    with pytest.raises(ctcdisc.CtcdiscValidationError):
        build_problem(problem_cfg(
            states=[[1, 0], [0, 1]], unitaries=[[[0, 1], [1, 0]], [[1, 0], [0, 1]]]))


def test_build_errors():
    with pytest.raises(ctcdisc.CtcdiscValidationError, match="degenerate state set"):
        build_problem(problem_cfg(builtin='qubit_set', states=[[1, 0], [0, 1], ['i', 0]]))
    for items, match in [
            ({'builtin': 'two_state', 'states': [[1, 0], [0, 1], [1, 0]]}, "expected 2 states"),
            ({'builtin': 'two_state', 'states': [[1, 0], [1, 1]]}, r"states\[1\]"),
            ({'builtin': 'two_state', 'states': [[1, 0], ['x', 1]]}, r"states\[1\]"),
            ({'builtin': 'two_state', 'states': [[1, 0], [0, 1]], 'phases': [0.0]}, "phases"),
            ({'builtin': 'qubit_set'}, "'states' or 'bloch'"),
            ({'builtin': 'qubit_set', 'states': [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}, "qubits"),
            ({'builtin': 'qubit_set', 'bloch': [[0.0], [1.0, 0.0]]}, "theta, phi"),
            ({'builtin': 'geometrically_uniform'}, "rotation"),
            ({'builtin': 'geometrically_uniform', 'rotation': [[1, 0], [0, 'z']]}, "rotation"),
            ({'states': [[1, 0], [0, 1]], 'unitaries': [EYE3, EYE3, EYE3]}, "do not match"),
            ]:
        with pytest.raises(ctcdisc.CtcdiscConfigError, match=match):
            build_problem(problem_cfg(**items))


def test_build_omega():
    assert build_omega(config.OmegaConfig(best=True), 4) is None
    assert build_omega(config.OmegaConfig(), 3).diagonal.tolist() == [1, 0, 0]
    assert build_omega(config.OmegaConfig(basis=2), 3).diagonal.tolist() == [0, 0, 1]
    np.testing.assert_allclose(build_omega(config.OmegaConfig(mixed=True), 4).diagonal, 0.25)
    omega = build_omega(config.OmegaConfig(diagonal=(0.5, 0.5)), 2)
    np.testing.assert_allclose(omega.diagonal, [0.5, 0.5])
    with pytest.raises(ctcdisc.CtcdiscConfigError, match="out of range"):
        build_omega(config.OmegaConfig(basis=3), 3)
    with pytest.raises(ctcdisc.CtcdiscConfigError, match="expected 3 entries"):
        build_omega(config.OmegaConfig(diagonal=(0.5, 0.5)), 3)
    with pytest.raises(ctcdisc.CtcdiscConfigError, match="omega.diagonal"):
        build_omega(config.OmegaConfig(diagonal=(1.5, -0.5)), 2)


def test_shipped_configs():
    """The sample configs are valid and describe valid problems."""
    paths = sorted((pathlib.Path(__file__).parent.parent / 'configs').glob('*.toml'))
    assert paths
    for path in paths:
        cfg = config.load_config(path)
        problem = build_problem(cfg.problem)
        omega = build_omega(cfg.omega, problem.n)
        assert omega is None or omega.dim == problem.n
