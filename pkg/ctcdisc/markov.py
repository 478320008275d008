"""
Exact analysis of the adaptive protocol as a Markov chain.

Given the true state k, the outcome of the next measurement depends
only on the previous outcome j:

    P_k[i, j] = |<i|U_j|psi_k>|^2

P_k is column stochastic and its column k is the basis vector e_k
(outcome k is absorbing). Deleting row and column k gives the reduced
matrix Q_k whose spectral radius governs the decay of the error
probability.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
import dataclasses as dc
import itertools
import logging
import math
from typing import NamedTuple, Optional

import numpy as np
import numpy.typing as npt
from scipy import special, stats

from . import qmath
from .exceptions import CtcdiscResourceError
from .qmath import RMatrix
from .quantum import DensityMatrix
from .synthesis import DiscriminationProblem

__all__ = [
    'TransitionMatrix', 'ReducedMatrix', 'OutcomeDistribution', 'ExponentReport',
    'ErrorProbabilities', 'ExponentFit',
    'transition_matrix', 'transition_matrices', 'reduced_matrix', 'reduced_initial',
    'exact_probabilities', 'exact_error_reduced', 'success_probability_by_basis',
    'success_linearity_check', 'best_initial_state', 'exponent_report',
    'brute_force_error', 'decay_curve', 'log_error_probabilities', 'fit_exponent',
    'regression_exponent', 'auto_window', 'error_is_monotone',
    'BRUTE_FORCE_LIMIT', 'DEFAULT_WINDOW',
    ]

STOCHASTIC_TOL = 1e-10
# below this value the reduced recursion rescales its vector
RENORM_THRESHOLD = 1e-280
BRUTE_FORCE_LIMIT = 10**7
DEFAULT_WINDOW = (50, 200)
# ties in best_initial_state()
TIE_TOL = 1e-12

_logger = logging.getLogger(__package__)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _neg_log(x: float) -> float:
    return math.inf if x <= 0.0 else -math.log(x)


@dc.dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Column stochastic matrix P_k, k is the index of the true state."""

    p: RMatrix
    k: int

    def __post_init__(self) -> None:
        p = np.array(self.p, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"Expected a square matrix, got shape {p.shape}")
        n = p.shape[0]
        if not 0 <= self.k < n:
            raise IndexError(f"State index {self.k} out of range 0..{n - 1}")
        if np.min(p) < -STOCHASTIC_TOL or np.max(p) > 1.0 + STOCHASTIC_TOL:
            raise ValueError("Transition probabilities must be in [0, 1]")
        if np.max(np.abs(p.sum(axis=0) - 1.0)) > STOCHASTIC_TOL:
            raise ValueError("Transition matrix columns must sum to 1")
        if np.max(np.abs(p[:, self.k] - qmath.ket(self.k, n).real)) > STOCHASTIC_TOL:
            raise ValueError(f"Column {self.k} of P_{self.k} is not absorbing")
        object.__setattr__(self, 'p', _readonly(p))

    @property
    def n(self) -> int:
        return self.p.shape[0]


@dc.dataclass(frozen=True, eq=False)
class ReducedMatrix:
    """Q_k, i.e. P_k without row and column k."""

    q: RMatrix
    k: int

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"Expected a square matrix, got shape {q.shape}")
        if q.size:
            if np.min(q) < -STOCHASTIC_TOL or np.max(q) > 1.0 + STOCHASTIC_TOL:
                raise ValueError("Reduced matrix entries must be in [0, 1]")
            if np.max(q.sum(axis=0)) > 1.0 + STOCHASTIC_TOL:
                raise ValueError("Reduced matrix column sums must not exceed 1")
        object.__setattr__(self, 'q', _readonly(q))

    def spectral_radius(self) -> float:
        return qmath.spectral_radius(self.q) if self.q.size else 0.0


@dc.dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """
    Outcome probabilities u_k^(n), or v_k^(n) if reduced.

    A reduced vector lacks the entry of the absorbing outcome, so its sum
    is the error probability, not 1.
    """

    probs: npt.NDArray[np.float64]
    reduced: bool = False

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 1:
            raise ValueError("Expected a vector of probabilities")
        if probs.size and np.min(probs) < -STOCHASTIC_TOL:
            raise ValueError("Probabilities must not be negative")
        if not self.reduced and abs(probs.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError(f"Probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, 'probs', _readonly(probs))

    def __getitem__(self, index: int) -> float:
        return float(self.probs[index])

    def __len__(self) -> int:
        return self.probs.size


@dc.dataclass(frozen=True)
class ExponentReport:
    """
    Error exponent bounds of a problem.

    tau -- max_k spectral radius of Q_k
    xi_lower -- -ln tau, a lower bound of the error exponent
    gersh_col -- -ln of the largest column sum of the Q_k matrices
    gersh_row -- -ln of the largest row sum of the Q_k matrices
    chernoff -- -ln max_{i != j} |<psi_i|psi_j>|^2, the optimal exponent

    Infinite values mean the error vanishes after finitely many steps.
    """

    tau: float
    xi_lower: float
    gersh_col: float
    gersh_row: float
    chernoff: float
    degenerate: bool = False

    @property
    def saturated(self) -> bool:
        """True if -ln tau reaches the Chernoff exponent."""
        if math.isinf(self.chernoff):
            return math.isinf(self.xi_lower)
        return abs(self.xi_lower - self.chernoff) <= 1e-9


class ErrorProbabilities(NamedTuple):
    p_e: float
    p_s: float
    per_state: tuple[OutcomeDistribution, ...]


@dc.dataclass(frozen=True)
class ExponentFit:
    """Weighted least squares fit of -ln p_e^(n) = xi * n + b."""

    xi_hat: float
    intercept: float
    ci: tuple[float, float]
    n_points: int
    dropped: tuple[int, ...] = ()


def transition_matrix(problem: DiscriminationProblem, k: int) -> TransitionMatrix:
    """Return P_k with entries |<i|U_j|psi_k>|^2."""
    return TransitionMatrix(problem.transition_probabilities(k), k)


def transition_matrices(problem: DiscriminationProblem) -> list[TransitionMatrix]:
    return [transition_matrix(problem, k) for k in range(problem.n)]


def reduced_matrix(p: TransitionMatrix) -> ReducedMatrix:
    """Delete row k and column k of P_k."""
    return ReducedMatrix(np.delete(np.delete(p.p, p.k, axis=0), p.k, axis=1), p.k)


def reduced_initial(problem: DiscriminationProblem, k: int) -> OutcomeDistribution:
    """Return v^(0), the initial distribution without the entry k."""
    return OutcomeDistribution(np.delete(problem.initial_distribution, k), reduced=True)


def _check_steps(n: int) -> None:
    if n < 0:
        raise ValueError("The number of copies must not be negative")


def exact_probabilities(problem: DiscriminationProblem, n: int) -> ErrorProbabilities:
    """
    Return the error and success probabilities after n copies.

    per_state[k] is P_k^n u^(0). The error probability is summed over the
    wrong outcomes directly, it is not computed as 1 - p_s.
    """
    _check_steps(n)
    u0 = problem.initial_distribution
    priors = problem.priors
    per_state = []
    p_e = p_s = 0.0
    for k in range(problem.n):
        dist = qmath.mat_power(transition_matrix(problem, k).p, n) @ u0
        per_state.append(OutcomeDistribution(dist))
        p_s += priors[k] * dist[k]
        p_e += priors[k] * math.fsum(np.delete(dist, k))
    return ErrorProbabilities(float(p_e), float(p_s), tuple(per_state))


def exact_error_reduced(problem: DiscriminationProblem, n: int) -> float:
    """Return p_e^(n) = sum_k p_k 1^T Q_k^n v^(0)."""
    _check_steps(n)
    total = 0.0
    for k, prior in enumerate(problem.priors):
        q = reduced_matrix(transition_matrix(problem, k)).q
        v0 = reduced_initial(problem, k).probs
        total += prior * float(np.sum(qmath.mat_power(q, n) @ v0))
    return total


def success_probability_by_basis(
        problem: DiscriminationProblem, n: int) -> npt.NDArray[np.float64]:
    """
    Return the vector p_{s,j}^(n), the success probability for omega = |j><j|.

    p_{s,j}^(n) = sum_k p_k (P_k^n)[k, j]
    """
    _check_steps(n)
    result = np.zeros(problem.n)
    for k, prior in enumerate(problem.priors):
        result += prior * qmath.mat_power(transition_matrix(problem, k).p, n)[k]
    return result


def success_linearity_check(
        problem: DiscriminationProblem, n: int, omega: DensityMatrix) -> tuple[float, float]:
    """
    Compare p_s^(n) for omega with the mixture of basis state results.

    Return (lhs, rhs): lhs is computed with omega, rhs is
    sum_i <i|omega|i> p_{s,i}^(n) where each p_{s,i}^(n) is computed
    with omega = |i><i|. Both must agree.
    """
    lhs = exact_probabilities(problem.with_omega(omega), n).p_s
    rhs = math.fsum(
        weight * exact_probabilities(
            problem.with_omega(DensityMatrix.basis(i, problem.n)), n).p_s
        for i, weight in enumerate(omega.diagonal))
    return lhs, rhs


def best_initial_state(problem: DiscriminationProblem, n: int) -> tuple[int, float]:
    """
    Return the basis state index j maximizing p_{s,j}^(n) and the maximum.

    No omega can do better since p_s is linear in the diagonal of omega.
    Values within 1e-12 of the maximum count as ties, the smallest index wins.
    """
    by_basis = success_probability_by_basis(problem, n)
    best = float(np.max(by_basis))
    index = int(np.flatnonzero(by_basis >= best - TIE_TOL)[0])
    return index, float(by_basis[index])


def exponent_report(problem: DiscriminationProblem) -> ExponentReport:
    """Compute tau, the bounds derived from it and the Chernoff exponent."""
    if problem.states.degenerate_pairs():
        _logger.warning("Degenerate state set, all exponents are zero")
        return ExponentReport(1.0, 0.0, 0.0, 0.0, 0.0, degenerate=True)
    tau = col_sum = row_sum = 0.0
    for pmat in transition_matrices(problem):
        red = reduced_matrix(pmat)
        tau = max(tau, red.spectral_radius())
        col_sum = max(col_sum, float(np.max(red.q.sum(axis=0))))
        row_sum = max(row_sum, float(np.max(red.q.sum(axis=1))))
    return ExponentReport(
        tau=tau,
        xi_lower=_neg_log(tau),
        gersh_col=_neg_log(col_sum),
        gersh_row=_neg_log(row_sum),
        chernoff=_neg_log(problem.states.max_overlap()),
        )


def brute_force_error(
        problem: DiscriminationProblem, n: int, limit: int = BRUTE_FORCE_LIMIT) -> float:
    """
    Return p_e^(n) by summing over all N^n outcome sequences.

    This is an independent check of exact_probabilities(). The size guard
    raises CtcdiscResourceError if N^n exceeds the limit.
    """
    _check_steps(n)
    if problem.n ** n > limit:
        raise CtcdiscResourceError(
            f"Enumeration of {problem.n}^{n} outcome sequences exceeds the limit of {limit}")
    u0 = problem.initial_distribution
    if n == 0:
        return float(sum(prior * (1.0 - u0[k]) for k, prior in enumerate(problem.priors)))
    total = 0.0
    for k, prior in enumerate(problem.priors):
        step = transition_matrix(problem, k).p.T    # step[previous, next]
        # weights[i_1, ..., i_t] = probability of the outcome sequence i_1 .. i_t
        weights = u0 @ step
        for _ in range(n - 1):
            weights = weights[..., np.newaxis] * step
        wrong = [j for j in range(problem.n) if j != k]
        total += prior * float(np.sum(weights[..., wrong]))
    return total


def decay_curve(
        problem: DiscriminationProblem, ns: Iterable[int]
        ) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Return arrays p_e^(n) and p_s^(n) for all n in ns.

    The distributions are propagated step by step up to max(ns).
    """
    ns = list(ns)
    if not ns:
        return np.zeros(0), np.zeros(0)
    if min(ns) < 0:
        raise ValueError("The number of copies must not be negative")
    n_max = max(ns)
    mats = [transition_matrix(problem, k).p for k in range(problem.n)]
    priors = problem.priors
    dists = [problem.initial_distribution.copy() for _ in mats]
    p_e_at: dict[int, float] = {}
    p_s_at: dict[int, float] = {}
    wanted = set(ns)
    for step in range(n_max + 1):
        if step > 0:
            dists = [pmat @ dist for pmat, dist in zip(mats, dists)]
        if step in wanted:
            p_s_at[step] = math.fsum(priors[k] * dist[k] for k, dist in enumerate(dists))
            p_e_at[step] = math.fsum(
                priors[k] * math.fsum(np.delete(dist, k)) for k, dist in enumerate(dists))
    return np.array([p_e_at[n] for n in ns]), np.array([p_s_at[n] for n in ns])


def log_error_probabilities(
        problem: DiscriminationProblem, ns: Iterable[int]) -> npt.NDArray[np.float64]:
    """
    Return ln p_e^(n) for all n in ns.

    The reduced recursion v <- Q_k v runs in the log domain: whenever the
    sum of v drops below 1e-280, v is rescaled and the scale is
    accumulated as a logarithm. Error probabilities far below the
    smallest float are therefore still represented. A vanishing error
    probability gives -inf.
    """
    ns = list(ns)
    if not ns:
        return np.zeros(0)
    if min(ns) < 0:
        raise ValueError("The number of copies must not be negative")
    n_max = max(ns)
    reduced = [reduced_matrix(transition_matrix(problem, k)).q for k in range(problem.n)]
    vecs = [reduced_initial(problem, k).probs.copy() for k in range(problem.n)]
    log_scale = [math.log(p) if p > 0.0 else -math.inf for p in problem.priors]
    wanted = set(ns)
    result: dict[int, float] = {}
    for step in range(n_max + 1):
        if step > 0:
            for k, q in enumerate(reduced):
                vec = q @ vecs[k]
                total = float(vec.sum())
                if 0.0 < total < RENORM_THRESHOLD:
                    log_scale[k] += math.log(total)
                    vec = vec / total
                vecs[k] = vec
        if step in wanted:
            terms = [
                scale + math.log(s)
                for scale, vec in zip(log_scale, vecs)
                if (s := float(vec.sum())) > 0.0 and scale > -math.inf]
            result[step] = float(special.logsumexp(terms)) if terms else -math.inf
    return np.array([result[n] for n in ns])


def fit_exponent(
        ns: Sequence[int],
        log_pe: Sequence[float],
        weights: Optional[Sequence[float]] = None,
        confidence: float = 0.95,
        ) -> ExponentFit:
    """
    Fit -ln p_e^(n) = xi * n + b by weighted least squares.

    The confidence interval of xi uses the Student t distribution with
    m - 2 degrees of freedom. With only two points the interval is
    undefined (nan, nan).
    """
    x = np.asarray(ns, dtype=np.float64)
    y = -np.asarray(log_pe, dtype=np.float64)
    if x.ndim != 1 or x.size != y.size:
        raise ValueError("ns and log_pe must be vectors of equal length")
    if x.size < 2:
        raise ValueError("At least two points are required for a regression")
    if np.any(np.diff(x) <= 0):
        raise ValueError("The grid of n values must be strictly increasing")
    if not np.all(np.isfinite(y)):
        raise ValueError("All log probabilities must be finite")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != x.shape or np.any(w <= 0):
        raise ValueError("Weights must be positive, one per point")
    design = np.column_stack([np.ones_like(x), x])
    normal = design.T @ (w[:, np.newaxis] * design)
    intercept, slope = np.linalg.solve(normal, design.T @ (w * y))
    dof = x.size - 2
    if dof == 0:
        ci = (math.nan, math.nan)
    else:
        resid = y - design @ np.array([intercept, slope])
        sigma2 = float(np.sum(w * resid ** 2)) / dof
        stderr = math.sqrt(sigma2 * np.linalg.inv(normal)[1, 1])
        half = float(stats.t.ppf(0.5 + confidence / 2, dof)) * stderr
        ci = (float(slope) - half, float(slope) + half)
    return ExponentFit(float(slope), float(intercept), ci, int(x.size))


def auto_window(
        problem: DiscriminationProblem,
        span: int = 150,
        threshold: float = 1e-3,
        limit: int = 10_000,
        ) -> tuple[int, int]:
    """Return (n_min, n_min + span) with n_min the first n where p_e^(n) < threshold."""
    log_pe = log_error_probabilities(problem, range(limit + 1))
    below = np.flatnonzero(log_pe < math.log(threshold))
    if below.size == 0:
        raise ValueError(
            f"The error probability does not drop below {threshold} up to n={limit}")
    n_min = int(below[0])
    return n_min, n_min + span


def regression_exponent(
        problem: DiscriminationProblem,
        window: Optional[tuple[int, int]] = DEFAULT_WINDOW,
        ) -> ExponentFit:
    """
    Estimate the error exponent from the exact curve p_e^(n), n in window.

    window=None selects the window with auto_window(). Points with a
    vanishing error probability are dropped; if fewer than two remain,
    the error vanishes and the exponent is infinite.
    """
    if window is None:
        window = auto_window(problem)
    n_min, n_max = window
    if not 0 <= n_min < n_max:
        raise ValueError(f"Invalid regression window {window}")
    _logger.debug("Regression window [%d, %d]", n_min, n_max)
    ns = np.arange(n_min, n_max + 1)
    log_pe = log_error_probabilities(problem, ns)
    finite = np.isfinite(log_pe)
    dropped = tuple(int(n) for n in ns[~finite])
    if dropped:
        _logger.warning("%d point(s) with zero error probability dropped", len(dropped))
    if np.count_nonzero(finite) < 2:
        return ExponentFit(math.inf, math.nan, (math.inf, math.inf), 0, dropped)
    fit = fit_exponent(ns[finite], log_pe[finite])
    return dc.replace(fit, dropped=dropped)


def error_is_monotone(problem: DiscriminationProblem, n_max: int, rtol: float = 1e-12) -> bool:
    """
    Check that p_e^(n) does not increase for n = 0 .. n_max.

    This is an empirical property, a violation is logged, not raised.
    """
    log_pe = log_error_probabilities(problem, range(n_max + 1))
    # log domain, rtol is a relative tolerance of p_e
    for n, (prev, cur) in enumerate(itertools.pairwise(log_pe), start=1):
        if cur > prev + rtol:
            _logger.warning("Error probability increases at n=%d", n)
            return False
    return True
