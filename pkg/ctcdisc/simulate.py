"""
Monte Carlo simulation of the local adaptive protocol.

One trial: a true state k is drawn from the priors and an initial
outcome from the initial policy. For each copy, the unitary selected
by the previous outcome i is applied and the copy is measured; the
outcome j occurs with probability |<j|U_i|psi_k>|^2. The last outcome
is the guess.

Trials are simulated in fixed-size chunks, each chunk with its own
random stream spawned from the seed. The result depends on the seed
and on the chunk size only, not on the number of workers.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent import futures
import dataclasses as dc
import logging
import math
from typing import Optional, Union

import numpy as np
import numpy.typing as npt
from scipy import stats

from . import markov
from .exceptions import CtcdiscResourceError
from .quantum import build_interaction_unitary, channel_diagonals
from .synthesis import DiscriminationProblem

__all__ = [
    'FixedIndex', 'SampleFromOmega', 'InitialPolicy', 'SimConfig', 'Trajectory', 'SimResult',
    'sample_outcome', 'simulate_trajectory', 'run_adaptive', 'estimate_exponent',
    'chi_square_statistic', 'channel_diagonal_trajectory', 'derive_seed',
    ]

DEFAULT_CHUNK_SIZE = 100_000
_SEED_MASK = (1 << 64) - 1

_logger = logging.getLogger(__package__)


@dc.dataclass(frozen=True)
class FixedIndex:
    """Start every trial with the given outcome."""
    index: int = 0


@dc.dataclass(frozen=True)
class SampleFromOmega:
    """Draw the initial outcome from the diagonal of omega."""


InitialPolicy = Union[FixedIndex, SampleFromOmega]


@dc.dataclass(frozen=True)
class SimConfig:
    """
    Monte Carlo parameters.

    keep_trajectories -- number of complete trajectories to return
        with the result (the first trials of the run)
    workers -- size of the thread pool, 1 = no pool
    """

    n_copies: int
    n_trials: int
    seed: int = 0
    policy: InitialPolicy = FixedIndex(0)
    keep_trajectories: int = 0
    workers: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self) -> None:
        if self.n_copies < 1:
            raise ValueError("n_copies must be at least 1")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if not 0 <= self.seed <= _SEED_MASK:
            raise ValueError("The seed must be a 64-bit unsigned integer")
        if not isinstance(self.policy, (FixedIndex, SampleFromOmega)):
            raise TypeError(f"Unknown initial outcome policy: {self.policy!r}")
        if self.keep_trajectories < 0:
            raise ValueError("keep_trajectories must not be negative")
        if self.keep_trajectories > self.n_trials:
            raise CtcdiscResourceError(
                f"Cannot keep {self.keep_trajectories} trajectories of {self.n_trials} trials")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be at least 1")


@dc.dataclass(frozen=True)
class Trajectory:
    """Outcomes of one trial, the guess is the last outcome."""

    true_state: int
    outcomes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.outcomes:
            raise ValueError("A trajectory needs at least one outcome")

    @property
    def final_guess(self) -> int:
        return self.outcomes[-1]

    @property
    def correct(self) -> bool:
        return self.final_guess == self.true_state


@dc.dataclass(frozen=True, eq=False)
class SimResult:
    """
    Monte Carlo estimate of the error probability.

    confusion[k, l] counts trials with true state k and guess l.
    """

    confusion: npt.NDArray[np.int64]
    trajectories: tuple[Trajectory, ...] = ()

    @property
    def n_trials(self) -> int:
        return int(self.confusion.sum())

    @property
    def errors(self) -> int:
        return self.n_trials - int(np.trace(self.confusion))

    @property
    def empirical_p_e(self) -> float:
        return self.errors / self.n_trials

    @property
    def std_error(self) -> float:
        """Binomial standard error sqrt(p (1 - p) / n_trials)."""
        p_e = self.empirical_p_e
        return math.sqrt(p_e * (1.0 - p_e) / self.n_trials)

    @property
    def trials_per_state(self) -> npt.NDArray[np.int64]:
        return self.confusion.sum(axis=1)


def _cumulative(probs: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Normalized cumulative sums along the last axis, the last entry is exactly 1."""
    cdf = np.cumsum(np.clip(probs, 0.0, None), axis=-1)
    return cdf / cdf[..., -1:]


def _draw(
        cdf: npt.NDArray[np.float64], uniform: npt.NDArray[np.float64]
        ) -> npt.NDArray[np.intp]:
    """Vectorized inverse CDF, cdf has one row per draw."""
    return np.minimum(
        np.sum(cdf <= uniform[:, np.newaxis], axis=1), cdf.shape[1] - 1)


def sample_outcome(distribution: npt.ArrayLike, rng: np.random.Generator) -> int:
    """
    Draw an index from a discrete distribution by inverse CDF sampling.

    The cumulative sums are taken in index order. One uniform number
    is consumed per call. run_adaptive() uses the same inverse CDF,
    vectorized over trials.
    """
    probs = np.asarray(distribution, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("Expected a non-empty probability vector")
    if np.min(probs) < -1e-12:
        raise ValueError("Probabilities must not be negative")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"Probabilities sum to {probs.sum()!r}, not 1")
    return int(_draw(_cumulative(probs)[np.newaxis], np.array([rng.random()]))[0])


def simulate_trajectory(
        problem: DiscriminationProblem,
        k: int,
        n_copies: int,
        rng: Union[None, int, np.random.Generator] = None,
        initial: Optional[int] = None,
        ) -> Trajectory:
    """
    Simulate one trial with the true state k, copy by copy.

    initial is the outcome before the first copy, by default it is drawn
    from the diagonal of omega.
    """
    rng = np.random.default_rng(rng)
    pmat = markov.transition_matrix(problem, k).p
    state = sample_outcome(problem.initial_distribution, rng) if initial is None else initial
    outcomes = []
    for _ in range(n_copies):
        state = sample_outcome(pmat[:, state], rng)
        outcomes.append(state)
    return Trajectory(k, tuple(outcomes))


def _cdf_table(problem: DiscriminationProblem) -> npt.NDArray[np.float64]:
    """cdf[k, j, i] = sum_{l <= i} P_k[l, j], the last entry is exactly 1."""
    return _cumulative(
        np.stack([markov.transition_matrix(problem, k).p.T for k in range(problem.n)]))


def _run_chunk(
        problem: DiscriminationProblem,
        cfg: SimConfig,
        cdf: npt.NDArray[np.float64],
        seed: np.random.SeedSequence,
        size: int,
        record: int,
        ) -> tuple[npt.NDArray[np.int64], list[Trajectory]]:
    rng = np.random.default_rng(seed)
    n = problem.n
    prior_cdf = _cumulative(problem.priors)
    true = _draw(np.broadcast_to(prior_cdf, (size, n)), rng.random(size))
    if isinstance(cfg.policy, FixedIndex):
        state = np.full(size, cfg.policy.index, dtype=np.intp)
    else:
        omega_cdf = _cumulative(problem.initial_distribution)
        state = _draw(np.broadcast_to(omega_cdf, (size, n)), rng.random(size))
    history = np.empty((record, cfg.n_copies), dtype=np.intp) if record else None
    for step in range(cfg.n_copies):
        state = _draw(cdf[true, state], rng.random(size))
        if history is not None:
            history[:, step] = state[:record]
    confusion = np.zeros((n, n), dtype=np.int64)
    np.add.at(confusion, (true, state), 1)
    kept = [] if history is None else [
        Trajectory(int(true[t]), tuple(int(x) for x in history[t])) for t in range(record)]
    return confusion, kept


def run_adaptive(problem: DiscriminationProblem, cfg: SimConfig) -> SimResult:
    """Simulate cfg.n_trials independent trials of the adaptive protocol."""
    if isinstance(cfg.policy, FixedIndex) and not 0 <= cfg.policy.index < problem.n:
        raise IndexError(f"Initial outcome {cfg.policy.index} out of range 0..{problem.n - 1}")
    cdf = _cdf_table(problem)
    n_chunks = -(-cfg.n_trials // cfg.chunk_size)
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_chunks)
    sizes = [min(cfg.chunk_size, cfg.n_trials - i * cfg.chunk_size) for i in range(n_chunks)]
    records = [
        max(0, min(size, cfg.keep_trajectories - i * cfg.chunk_size))
        for i, size in enumerate(sizes)]
    _logger.debug(
        "Monte Carlo: %d trial(s) in %d chunk(s), %d worker(s)",
        cfg.n_trials, n_chunks, min(cfg.workers, n_chunks))
    jobs = list(zip(seeds, sizes, records))
    if cfg.workers == 1 or n_chunks == 1:
        results = [_run_chunk(problem, cfg, cdf, *job) for job in jobs]
    else:
        with futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda job: _run_chunk(problem, cfg, cdf, *job), jobs))
    confusion = np.zeros((problem.n, problem.n), dtype=np.int64)
    kept: list[Trajectory] = []
    for chunk_confusion, chunk_kept in results:
        confusion += chunk_confusion
        kept.extend(chunk_kept)
    return SimResult(confusion, tuple(kept))


def derive_seed(seed: int, n: int) -> int:
    """Return a 64-bit seed for the grid point n derived from seed."""
    return int(np.random.SeedSequence([seed, n]).generate_state(1, np.uint64)[0])


def estimate_exponent(
        problem: DiscriminationProblem,
        n_grid: Sequence[int],
        cfg: Optional[SimConfig] = None,
        ) -> markov.ExponentFit:
    """
    Estimate the error exponent as the slope of -ln p_e^(n) over n_grid.

    Without cfg the exact error probabilities are used with equal weights.
    With cfg, p_e^(n) is estimated by run_adaptive() for each n (n_copies
    is replaced, each n gets its own seed derived from cfg.seed) and the
    points are weighted by the inverse variance of ln p_e. Points without
    any error are dropped and reported in the result.
    """
    ns = [int(n) for n in n_grid]
    if len(ns) < 2:
        raise ValueError("At least two grid points are required")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("The grid must be strictly increasing")
    if cfg is None:
        log_pe = markov.log_error_probabilities(problem, ns)
        keep = [i for i, x in enumerate(log_pe) if math.isfinite(x)]
        weights = None
    else:
        estimates = [
            run_adaptive(problem, dc.replace(cfg, n_copies=n, seed=derive_seed(cfg.seed, n)))
            for n in ns]
        keep = [i for i, res in enumerate(estimates) if res.errors > 0]
        log_pe = np.array([
            math.log(res.empirical_p_e) if res.errors else -math.inf for res in estimates])
        weights = []
        for i in keep:
            res = estimates[i]
            failures = max(res.n_trials - res.errors, 1)
            # var(ln p) ~ (1 - p) / (n_trials p)
            weights.append(res.errors / (failures / res.n_trials))
    dropped = tuple(ns[i] for i in range(len(ns)) if i not in keep)
    if dropped:
        _logger.warning("No errors observed at n = %s, point(s) dropped", list(dropped))
    fit = markov.fit_exponent([ns[i] for i in keep], [log_pe[i] for i in keep], weights)
    return dc.replace(fit, dropped=dropped)


def chi_square_statistic(
        observed: npt.ArrayLike, expected_probs: npt.ArrayLike) -> tuple[float, float]:
    """
    Goodness of fit of outcome counts to a distribution.

    Return (statistic, p_value). Bins with zero expected probability are
    excluded; an observation in such a bin gives (inf, 0.0).
    """
    obs = np.asarray(observed, dtype=np.float64)
    probs = np.asarray(expected_probs, dtype=np.float64)
    if obs.shape != probs.shape or obs.ndim != 1:
        raise ValueError("observed and expected_probs must be vectors of equal length")
    support = probs > 1e-15
    if np.any(obs[~support] > 0):
        return math.inf, 0.0
    obs, probs = obs[support], probs[support]
    if obs.size < 2:
        return 0.0, 1.0
    expected = probs / probs.sum() * obs.sum()
    result = stats.chisquare(obs, expected)
    return float(result.statistic), float(result.pvalue)


def channel_diagonal_trajectory(
        problem: DiscriminationProblem, k: int, n: int) -> npt.NDArray[np.float64]:
    """
    Return the diagonals of sigma_{0,k} .. sigma_{n,k} obtained by applying
    the D-CTC channel with rho = |psi_k><psi_k| to omega.

    Row m equals P_k^m u^(0).
    """
    v = build_interaction_unitary(problem.unitaries)
    rho = problem.embedded_states[k].density()
    assert problem.omega is not None
    return channel_diagonals(v, rho, problem.omega, n)
