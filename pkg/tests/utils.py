"""
Helpers for unit tests.
"""

import math

import numpy as np
import pytest

import ctcdisc


SEED = 20261017


@pytest.fixture(name='rng')
def fixture_rng():
    """A fresh generator with a fixed seed for every test."""
    return np.random.default_rng(SEED)


def qubit(theta, phi=0.0):
    """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>"""
    return ctcdisc.bloch_state(theta, phi)


def overlap_pair(c):
    """Return |0> and a real qubit state with |<0|psi>|^2 = c."""
    return ctcdisc.PureState.basis(0, 2), qubit(2 * math.acos(math.sqrt(c)))


def random_priors(rng, n):
    return tuple(rng.dirichlet(np.ones(n)))


def random_qubit_problem(rng, n, max_overlap=0.97, priors=True):
    """A qubit set problem (two_state for n == 2) with random states and priors."""
    states = ctcdisc.random_qubit_states(n, rng, max_overlap=max_overlap)
    return ctcdisc.qubit_set_problem(states, random_priors(rng, n) if priors else ())


def random_problems(rng, count, n_values=(2, 3, 4)):
    """Random problems, N cycles through n_values."""
    return [random_qubit_problem(rng, n_values[i % len(n_values)]) for i in range(count)]


def gapped_qubit_problems(
        rng, count, n_values=(3, 4), ratio=0.7, max_overlap=0.97, max_tries=5000):
    """
    Random qubit set problems whose largest pairwise overlap is well separated
    from the second largest one (second <= ratio * largest).
    """
    problems = []
    for i in range(max_tries):
        if len(problems) == count:
            break
        n = n_values[i % len(n_values)]
        states = ctcdisc.random_qubit_states(n, rng, max_overlap=max_overlap)
        overlaps = sorted(
            (states[a].overlap(states[b]) for a in range(n) for b in range(a + 1, n)),
            reverse=True)
        if overlaps[1] <= ratio * overlaps[0]:
            problems.append(ctcdisc.qubit_set_problem(states))
    assert len(problems) == count
    return problems
