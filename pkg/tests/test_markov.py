"""
Test the Markov chain analysis of the adaptive protocol.
"""

import math

import numpy as np
import pytest

import ctcdisc
from ctcdisc import markov, quantum
from ctcdisc.quantum import DensityMatrix, PureState

# pylint: disable-next=unused-import
from .utils import fixture_rng
from .utils import gapped_qubit_problems, overlap_pair, random_problems, random_qubit_problem


def bb84_error(n):
    """p_e^(n) of the BB84 problem, n >= 1"""
    return (3 * n + 1) / 4 * 0.5 ** n


def test_two_state_matrices():
    c = 0.3
    problem = ctcdisc.two_state_problem(*overlap_pair(c))
    np.testing.assert_allclose(
        markov.transition_matrix(problem, 0).p, [[1, 1 - c], [0, c]], atol=1e-12)
    np.testing.assert_allclose(
        markov.transition_matrix(problem, 1).p, [[c, 0], [1 - c, 1]], atol=1e-12)
    for pmat in markov.transition_matrices(problem):
        red = markov.reduced_matrix(pmat)
        np.testing.assert_allclose(red.q, [[c]], atol=1e-12)
        assert red.spectral_radius() == pytest.approx(c)


def test_transition_matrix_invariants(bb84):
    for k, pmat in enumerate(markov.transition_matrices(bb84)):
        assert pmat.k == k
        assert pmat.n == 4
        np.testing.assert_allclose(pmat.p.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(pmat.p[:, k], np.eye(4)[k], atol=1e-12)
        assert markov.reduced_matrix(pmat).q.shape == (3, 3)
        with pytest.raises(ValueError):
            pmat.p[0, 0] = 0.5


def test_transition_matrix_errors():
    with pytest.raises(ValueError, match="square"):
        markov.TransitionMatrix(np.ones((2, 3)) / 2, 0)
    with pytest.raises(ValueError, match="sum to 1"):
        markov.TransitionMatrix(np.array([[1.0, 0.5], [0.0, 0.4]]), 0)
    with pytest.raises(ValueError, match="absorbing"):
        markov.TransitionMatrix(np.array([[0.5, 0.0], [0.5, 1.0]]), 0)
    with pytest.raises(IndexError):
        markov.TransitionMatrix(np.eye(2), 2)
    with pytest.raises(ValueError):
        markov.ReducedMatrix(np.array([[0.7, 0.0], [0.6, 0.1]]), 0)
    with pytest.raises(ValueError):
        markov.OutcomeDistribution([0.5, 0.4])
    markov.OutcomeDistribution([0.5, 0.4], reduced=True)


def test_two_state_error():
    """p_e^(n) = c^n / 2 for uniform priors and omega = |0><0|"""
    for c in (0.1, 0.5, 0.9):
        problem = ctcdisc.two_state_problem(*overlap_pair(c))
        for n in range(1, 30):
            assert markov.exact_probabilities(problem, n).p_e == pytest.approx(c ** n / 2)


def test_bb84_closed_form(bb84):
    assert markov.exact_probabilities(bb84, 0).p_e == pytest.approx(0.75)
    for n in range(1, 60):
        result = markov.exact_probabilities(bb84, n)
        assert result.p_e == pytest.approx(bb84_error(n), rel=1e-10)
        assert result.p_e + result.p_s == pytest.approx(1.0)
        assert len(result.per_state) == 4


def test_bb84_decay_curve(bb84):
    ns = [0, 1, 2, 5, 10, 40]
    p_e, p_s = markov.decay_curve(bb84, ns)
    assert p_e[0] == pytest.approx(0.75)
    for n, pe_n in zip(ns[1:], p_e[1:]):
        assert pe_n == pytest.approx(bb84_error(n), rel=1e-10)
    np.testing.assert_allclose(p_e + p_s, 1.0, atol=1e-12)
    empty, _ = markov.decay_curve(bb84, [])
    assert empty.size == 0
    with pytest.raises(ValueError):
        markov.decay_curve(bb84, [3, -1])


def test_bb84_log_domain(bb84):
    """The log domain recursion reaches error probabilities below the smallest float."""
    ns = [1, 10, 100, 1500, 3000]
    log_pe = markov.log_error_probabilities(bb84, ns)
    for n, value in zip(ns, log_pe):
        expected = math.log((3 * n + 1) / 4) - n * math.log(2)
        assert value == pytest.approx(expected, rel=1e-9)
    assert markov.decay_curve(bb84, [3000])[0][0] == 0.0


def test_absorbing_column_is_exact(bb84, rng):
    for problem in (bb84, *random_problems(rng, 5)):
        for pmat in markov.transition_matrices(problem):
            expected = np.zeros(problem.n)
            expected[pmat.k] = 1.0
            assert np.array_equal(pmat.p[:, pmat.k], expected)


def test_no_error_floor(bb84, rng):
    """Error probabilities keep decaying far below the double precision epsilon."""
    for n in (100, 200):
        closed_form = (3 * n + 1) / 4 * 2.0 ** -n
        assert markov.exact_probabilities(bb84, n).p_e == pytest.approx(closed_form, rel=1e-9)
        assert markov.exact_error_reduced(bb84, n) == pytest.approx(closed_form, rel=1e-9)
    p_e, _ = markov.decay_curve(bb84, [150, 200])
    assert p_e[1] == pytest.approx(601 / 4 * 2.0 ** -200, rel=1e-9)
    assert p_e[1] < p_e[0]
    problem = random_qubit_problem(rng, 4)
    ns = [100, 400]
    p_e, _ = markov.decay_curve(problem, ns)
    log_pe = markov.log_error_probabilities(problem, ns)
    np.testing.assert_allclose(np.log(p_e), log_pe, rtol=1e-9)
    assert markov.exact_probabilities(problem, 400).p_e == pytest.approx(p_e[1], rel=1e-9)


def test_exact_methods_agree(rng):
    """Full matrices, reduced matrices, step by step propagation and enumeration agree."""
    problems = [
        ctcdisc.bb84_problem(),
        ctcdisc.two_state_problem(*overlap_pair(0.3)),
        *random_problems(rng, 20),
        ]
    for problem in problems:
        ns = list(range(9))
        p_e, p_s = markov.decay_curve(problem, ns)
        log_pe = markov.log_error_probabilities(problem, ns)
        for n in ns:
            full = markov.exact_probabilities(problem, n)
            assert full.p_e == pytest.approx(p_e[n], rel=1e-10, abs=1e-15)
            assert full.p_s == pytest.approx(p_s[n], rel=1e-10)
            assert markov.exact_error_reduced(problem, n) == pytest.approx(
                full.p_e, rel=1e-10, abs=1e-15)
            assert markov.brute_force_error(problem, n) == pytest.approx(full.p_e, abs=1e-12)
            assert math.exp(log_pe[n]) == pytest.approx(full.p_e, rel=1e-9, abs=1e-15)


def test_brute_force_two_state():
    problem = ctcdisc.two_state_problem(*overlap_pair(0.5))
    assert markov.brute_force_error(problem, 8) == pytest.approx(0.001953125, rel=1e-12)
    assert markov.brute_force_error(problem, 0) == pytest.approx(0.5)


def test_brute_force_limit(bb84):
    assert markov.brute_force_error(bb84, 10) == pytest.approx(bb84_error(10))
    with pytest.raises(ctcdisc.CtcdiscResourceError):
        markov.brute_force_error(bb84, 12)
    with pytest.raises(ctcdisc.CtcdiscResourceError):
        markov.brute_force_error(bb84, 5, limit=1000)
    with pytest.raises(ValueError):
        markov.brute_force_error(bb84, -1)


def test_monotone(rng, bb84):
    assert markov.error_is_monotone(bb84, 200)
    for problem in random_problems(rng, 12):
        assert markov.error_is_monotone(problem, 100)
        p_e, _ = markov.decay_curve(problem, range(101))
        assert np.all(np.diff(p_e) <= 1e-15)


def test_orthogonal_states():
    """Orthogonal states are discriminated after one copy."""
    problem = ctcdisc.two_state_problem(PureState.basis(0, 2), PureState.basis(1, 2))
    assert markov.exact_probabilities(problem, 1).p_e == 0.0
    log_pe = markov.log_error_probabilities(problem, [0, 1, 5])
    assert log_pe[0] == pytest.approx(math.log(0.5))
    assert log_pe[1] == log_pe[2] == -math.inf
    report = markov.exponent_report(problem)
    assert report.tau == 0.0
    assert report.xi_lower == report.chernoff == math.inf
    assert report.saturated
    fit = markov.regression_exponent(problem, (1, 10))
    assert fit.xi_hat == math.inf
    assert fit.dropped == tuple(range(1, 11))


def test_success_by_basis(rng):
    for problem in random_problems(rng, 6):
        n = 5
        by_basis = markov.success_probability_by_basis(problem, n)
        for j in range(problem.n):
            omega = DensityMatrix.basis(j, problem.n)
            expected = markov.exact_probabilities(problem.with_omega(omega), n).p_s
            assert by_basis[j] == pytest.approx(expected, rel=1e-12)


def test_success_linearity(rng):
    for problem in random_problems(rng, 50):
        n = int(rng.integers(21))
        omega = quantum.random_density_matrix(problem.n, rng)
        lhs, rhs = markov.success_linearity_check(problem, n, omega)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_best_initial_state(rng):
    problem = ctcdisc.two_state_problem(*overlap_pair(0.5))
    # symmetric problem: a tie, the smaller index wins
    assert markov.best_initial_state(problem, 3) == (0, pytest.approx(1 - 0.125 / 2))
    skewed = ctcdisc.two_state_problem(*overlap_pair(0.5), priors=(0.3, 0.7))
    index, p_s = markov.best_initial_state(skewed, 3)
    assert index == 1
    assert p_s == pytest.approx(1 - 0.3 * 0.125)
    for problem in random_problems(rng, 6):
        index, p_s = markov.best_initial_state(problem, 6)
        omega = quantum.random_density_matrix(problem.n, rng)
        assert markov.exact_probabilities(problem.with_omega(omega), 6).p_s <= p_s + 1e-12


def test_bb84_exponents(bb84):
    report = markov.exponent_report(bb84)
    assert report.tau == pytest.approx(0.5)
    assert report.xi_lower == pytest.approx(math.log(2))
    assert report.chernoff == pytest.approx(math.log(2))
    assert report.saturated
    assert not report.degenerate
    assert report.gersh_col <= report.xi_lower + 1e-12
    assert report.gersh_row <= report.xi_lower + 1e-12


def test_two_state_exponents():
    report = markov.exponent_report(ctcdisc.two_state_problem(*overlap_pair(0.25)))
    assert report.tau == pytest.approx(0.25)
    for value in (report.xi_lower, report.gersh_col, report.gersh_row, report.chernoff):
        assert value == pytest.approx(math.log(4))
    assert report.saturated


def test_degenerate_exponents(caplog):
    """Two identical states are reported, not rejected."""
    zero = PureState.basis(0, 2)
    states = ctcdisc.StateSet((zero, zero), allow_degenerate=True)
    gate_x = np.array([[0, 1], [1, 0]])
    problem = ctcdisc.DiscriminationProblem(
        states, ctcdisc.UnitarySet((np.eye(2), gate_x)))
    report = markov.exponent_report(problem)
    assert report.degenerate
    assert report.tau == 1.0
    assert report.xi_lower == report.chernoff == 0.0
    assert report.saturated
    assert "Degenerate state set" in caplog.text


def test_gerschgorin_bounds(rng):
    for problem in random_problems(rng, 50):
        report = markov.exponent_report(problem)
        assert report.gersh_col <= report.xi_lower + 1e-10
        assert report.gersh_row <= report.xi_lower + 1e-10


def test_qubit_sets_saturate(rng):
    """The spectrum of Q_k consists of the overlaps with psi_k."""
    for problem in random_problems(rng, 20):
        report = markov.exponent_report(problem)
        assert report.tau == pytest.approx(problem.states.max_overlap(), rel=1e-9)
        assert report.saturated


def test_fit_exponent():
    ns = np.arange(10)
    noise = 0.1 * (-1) ** ns
    fit = markov.fit_exponent(ns, -(2.0 * ns + 1.0 + noise))
    assert fit.n_points == 10
    assert fit.ci[0] < 2.0 < fit.ci[1]
    assert fit.ci[0] < fit.xi_hat < fit.ci[1]
    exact = markov.fit_exponent(ns, -(0.5 * ns + 3.0))
    assert exact.xi_hat == pytest.approx(0.5)
    assert exact.intercept == pytest.approx(3.0)
    assert exact.ci == (pytest.approx(0.5), pytest.approx(0.5))
    two = markov.fit_exponent([1, 2], [-1.0, -3.0])
    assert two.xi_hat == pytest.approx(2.0)
    assert all(math.isnan(x) for x in two.ci)


def test_fit_exponent_weights():
    """A point with a negligible weight is ignored."""
    ns = [1, 2, 3, 4]
    log_pe = [-1.0, -2.0, -3.0, -10.0]
    fit = markov.fit_exponent(ns, log_pe, weights=[1.0, 1.0, 1.0, 1e-12])
    assert fit.xi_hat == pytest.approx(1.0, rel=1e-6)


def test_fit_exponent_errors():
    with pytest.raises(ValueError):
        markov.fit_exponent([1], [-1.0])
    with pytest.raises(ValueError):
        markov.fit_exponent([1, 1], [-1.0, -2.0])
    with pytest.raises(ValueError):
        markov.fit_exponent([1, 2], [-1.0, -math.inf])
    with pytest.raises(ValueError):
        markov.fit_exponent([1, 2], [-1.0, -2.0], weights=[1.0, 0.0])
    with pytest.raises(ValueError):
        markov.fit_exponent([1, 2, 3], [-1.0, -2.0])


def test_bb84_regression(bb84):
    """The polynomial prefactor biases the estimate slightly below ln 2."""
    fit = markov.regression_exponent(bb84)
    assert fit.n_points == 151
    assert fit.xi_hat == pytest.approx(math.log(2), rel=0.02)
    assert fit.xi_hat < math.log(2)
    assert fit.xi_hat == pytest.approx(0.6846, abs=1e-3)


def test_regression_gapped(rng):
    for problem in gapped_qubit_problems(rng, 10):
        report = markov.exponent_report(problem)
        fit = markov.regression_exponent(problem)
        assert fit.xi_hat == pytest.approx(report.chernoff, rel=0.02)


def test_auto_window(bb84):
    # p_e^(13) = 10 / 2^13 is still above 1e-3
    assert markov.auto_window(bb84) == (14, 164)
    fit = markov.regression_exponent(bb84, None)
    assert fit.n_points == 151
    with pytest.raises(ValueError):
        markov.auto_window(bb84, limit=5)
    with pytest.raises(ValueError):
        markov.regression_exponent(bb84, (10, 10))


def test_negative_steps(bb84):
    for func in (
            markov.exact_probabilities, markov.exact_error_reduced,
            markov.success_probability_by_basis):
        with pytest.raises(ValueError):
            func(bb84, -1)


def test_random_pairs(rng):
    for _ in range(20):
        psi0, psi1 = ctcdisc.random_qubit_states(2, rng)
        c = psi0.overlap(psi1)
        problem = ctcdisc.two_state_problem(psi0, psi1)
        for pmat in markov.transition_matrices(problem):
            assert markov.reduced_matrix(pmat).q[0, 0] == pytest.approx(c, abs=1e-12)
        assert markov.exponent_report(problem).xi_lower == \
            pytest.approx(-math.log(c), abs=1e-10)


def test_random_qubit_sets(rng):
    """The spectral radius of every Q_k is its largest diagonal entry."""
    for i in range(20):
        problem = ctcdisc.qubit_set_problem(ctcdisc.random_qubit_states(3 + i % 3, rng))
        for pmat in markov.transition_matrices(problem):
            red = markov.reduced_matrix(pmat)
            assert red.spectral_radius() == pytest.approx(np.max(np.diag(red.q)), abs=1e-9)
        report = markov.exponent_report(problem)
        assert report.xi_lower == pytest.approx(report.chernoff, abs=1e-9)
