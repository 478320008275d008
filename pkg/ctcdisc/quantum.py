"""
Pure states, density matrices and the D-CTC channel.

The interaction between the chronology-respecting system S and
the chronology-violating system C is

    V_SC = (sum_i |i><i|_S (x) (U_i)_C) . SWAP

and the state of C evolves by the channel

    N_{V,rho}: sigma -> Tr_S { V_SC (rho (x) sigma) V_SC^dagger }.

A D-CTC requires sigma to be a fixed point of that channel. The fixed
point is approximated by iterating the channel, which is exactly what
a chain of fresh copies of rho does in the adaptive protocol.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
import dataclasses as dc
import logging
import math
from typing import Literal, Optional

import numpy as np
import numpy.typing as npt

from . import qmath
from .exceptions import CtcdiscValidationError
from .qmath import ATOL, CMatrix, CVector, Keep

__all__ = [
    'PureState', 'DensityMatrix', 'InteractionUnitary', 'FixedPointResult',
    'embed_state', 'build_interaction_unitary', 'ctc_channel', 'channel_sum_form',
    'ctc_output_state', 'iterate_to_fixed_point', 'self_consistent_output',
    'channel_diagonals', 'trace_norm', 'trace_distance', 'random_density_matrix', 'mix',
    ]

DEFAULT_MAX_ITERS = 10_000
DEFAULT_TOL = 1e-10

_logger = logging.getLogger(__package__)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dc.dataclass(frozen=True, eq=False)
class PureState:
    """
    A unit-norm ket.

    Use PureState.from_amplitudes(..., normalize=True) to accept
    slightly denormalized input.
    """

    amplitudes: CVector

    def __post_init__(self) -> None:
        amps = _readonly(qmath.as_cvector(self.amplitudes))
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > ATOL:
            raise CtcdiscValidationError(f"State is not normalized (norm = {norm!r})")
        object.__setattr__(self, 'amplitudes', amps)

    @classmethod
    def from_amplitudes(cls, data: npt.ArrayLike, normalize: bool = False) -> PureState:
        amps = qmath.as_cvector(data)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0.0:
                raise CtcdiscValidationError("Cannot normalize a zero vector")
            amps = amps / norm
        return cls(amps)

    @classmethod
    def basis(cls, index: int, dim: int) -> PureState:
        """Return |index>."""
        return cls(qmath.ket(index, dim))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: PureState) -> complex:
        """Return <self|other>."""
        if other.dim != self.dim:
            raise ValueError(f"Dimension mismatch: {self.dim} != {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def overlap(self, other: PureState) -> float:
        """Return |<self|other>|^2."""
        return abs(self.inner(other)) ** 2

    def same_ray(self, other: PureState, atol: float = ATOL) -> bool:
        """Return True if the states are equal up to a global phase."""
        return self.dim == other.dim and self.overlap(other) >= 1.0 - atol

    def density(self) -> DensityMatrix:
        return DensityMatrix(qmath.projector(self.amplitudes))

    def __repr__(self) -> str:
        amps = ', '.join(f"{a:.6g}" for a in self.amplitudes)
        return f"<{type(self).__name__} [{amps}]>"


@dc.dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    A Hermitian, positive semidefinite operator with unit trace.

    The invariants are checked with the absolute tolerance atol.
    """

    matrix: CMatrix
    atol: dc.InitVar[float] = ATOL

    def __post_init__(self, atol: float) -> None:
        mat = _readonly(qmath.as_cmatrix(self.matrix, square=True))
        if np.max(np.abs(mat - mat.conj().T)) > atol:
            raise CtcdiscValidationError("Density matrix is not Hermitian")
        trace = complex(np.trace(mat))
        if abs(trace - 1.0) > atol:
            raise CtcdiscValidationError(f"Density matrix trace is {trace.real!r}, not 1")
        min_eig = float(np.min(np.linalg.eigvalsh(mat)))
        if min_eig < -atol:
            raise CtcdiscValidationError(
                f"Density matrix is not positive semidefinite (eigenvalue {min_eig!r})")
        object.__setattr__(self, 'matrix', mat)

    @classmethod
    def basis(cls, index: int, dim: int) -> DensityMatrix:
        """Return |index><index|."""
        return cls(qmath.projector(qmath.ket(index, dim)))

    @classmethod
    def from_diagonal(cls, probs: npt.ArrayLike) -> DensityMatrix:
        """Return a state diagonal in the measurement basis."""
        diag = np.asarray(probs, dtype=np.float64)
        if diag.ndim != 1:
            raise ValueError("Expected a vector of probabilities")
        return cls(np.diag(diag).astype(np.complex128))

    @classmethod
    def maximally_mixed(cls, dim: int) -> DensityMatrix:
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def diagonal(self) -> npt.NDArray[np.float64]:
        """Populations in the measurement basis, <i|rho|i>."""
        return np.real(np.diag(self.matrix)).copy()

    def __repr__(self) -> str:
        return f"<{type(self).__name__} dim={self.dim}>"


@dc.dataclass(frozen=True, eq=False)
class InteractionUnitary:
    """
    The N^2 x N^2 unitary V_SC coupling the S and C registers.

    blocks are the unitaries U_i if V_SC has the controlled form
    (sum_i |i><i| (x) U_i) . SWAP, otherwise None.
    """

    matrix: CMatrix
    n_outcomes: int
    blocks: Optional[tuple[CMatrix, ...]] = None

    def __post_init__(self) -> None:
        mat = _readonly(qmath.as_cmatrix(self.matrix, square=True))
        if mat.shape[0] != self.n_outcomes ** 2:
            raise ValueError(
                f"Interaction unitary of shape {mat.shape} "
                + f"does not act on two {self.n_outcomes}-dimensional registers")
        if not qmath.is_unitary(mat):
            raise CtcdiscValidationError("Interaction matrix is not unitary")
        if self.blocks is not None and len(self.blocks) != self.n_outcomes:
            raise ValueError(f"Expected {self.n_outcomes} blocks, got {len(self.blocks)}")
        object.__setattr__(self, 'matrix', mat)


@dc.dataclass(frozen=True)
class FixedPointResult:
    """Outcome of iterate_to_fixed_point()."""

    state: DensityMatrix
    iters: int
    residual: float
    converged: bool


def embed_state(
        psi: PureState, dim: int, layout: Literal['pad', 'ancilla'] = 'pad') -> PureState:
    """
    Embed a state into a larger Hilbert space.

    layout:
        'pad' -- append zero amplitudes
        'ancilla' -- |psi>|0>...|0>, psi must be a qubit and dim a power of two
    """
    if dim < psi.dim:
        raise ValueError(f"Cannot embed a {psi.dim}-dimensional state into dimension {dim}")
    if dim == psi.dim:
        return psi
    if layout == 'pad':
        amps = np.zeros(dim, dtype=np.complex128)
        amps[:psi.dim] = psi.amplitudes
        return PureState(amps)
    if layout == 'ancilla':
        if psi.dim != 2 or dim & (dim - 1):
            raise ValueError("Ancilla embedding needs a qubit and a power of two dimension")
        return PureState(np.kron(psi.amplitudes, qmath.ket(0, dim // 2)))
    raise ValueError(f"Unknown embedding layout {layout!r}")


def build_interaction_unitary(unitaries: Sequence[npt.ArrayLike]) -> InteractionUnitary:
    """
    Return V_SC = (sum_i |i><i| (x) U_i) . SWAP.

    unitaries is a UnitarySet or any sequence of N x N unitary matrices.
    """
    mats = [qmath.as_cmatrix(u, square=True) for u in unitaries]
    if not mats:
        raise ValueError("At least one unitary is required")
    n = len(mats)
    for i, mat in enumerate(mats):
        if mat.shape != (n, n):
            raise ValueError(f"U_{i} has shape {mat.shape}, expected {(n, n)}")
        if not qmath.is_unitary(mat):
            raise CtcdiscValidationError(f"U_{i} is not unitary")
    controlled = sum(
        qmath.kron(qmath.projector(qmath.ket(i, n)), mat) for i, mat in enumerate(mats))
    blocks = tuple(_readonly(mat.copy()) for mat in mats)
    return InteractionUnitary(controlled @ qmath.swap_operator(n), n, blocks=blocks)


def _check_dims(v: InteractionUnitary, *states: DensityMatrix) -> None:
    for state in states:
        if state.dim != v.n_outcomes:
            raise ValueError(
                f"State of dimension {state.dim} does not fit "
                + f"a {v.n_outcomes}-dimensional register")


def _evolve(v: InteractionUnitary, rho: DensityMatrix, sigma: DensityMatrix) -> CMatrix:
    joint = qmath.kron(rho.matrix, sigma.matrix)
    return v.matrix @ joint @ v.matrix.conj().T


def ctc_channel(
        v: InteractionUnitary, rho: DensityMatrix, sigma: DensityMatrix) -> DensityMatrix:
    """Apply N_{V,rho} to sigma: Tr_S{V (rho (x) sigma) V^dagger}."""
    _check_dims(v, rho, sigma)
    n = v.n_outcomes
    return DensityMatrix(qmath.partial_trace(_evolve(v, rho, sigma), (n, n), Keep.SECOND))


def ctc_output_state(
        v: InteractionUnitary, rho: DensityMatrix, sigma: DensityMatrix) -> DensityMatrix:
    """Return the S register after the interaction: Tr_C{V (rho (x) sigma) V^dagger}."""
    _check_dims(v, rho, sigma)
    n = v.n_outcomes
    return DensityMatrix(qmath.partial_trace(_evolve(v, rho, sigma), (n, n), Keep.FIRST))


def channel_sum_form(
        unitaries: Sequence[npt.ArrayLike], rho: DensityMatrix, sigma: DensityMatrix
        ) -> DensityMatrix:
    """
    Evaluate the channel as sum_l <l|sigma|l> U_l rho U_l^dagger.

    This is the same map as ctc_channel() written out for the
    controlled-unitary form of V_SC.
    """
    mats = [qmath.as_cmatrix(u, square=True) for u in unitaries]
    if rho.dim != sigma.dim or len(mats) != sigma.dim:
        raise ValueError("Dimension mismatch between unitaries and states")
    out = np.zeros_like(rho.matrix)
    for weight, mat in zip(sigma.diagonal, mats):
        out += weight * (mat @ rho.matrix @ mat.conj().T)
    return DensityMatrix(out)


def _channel_step(
        v: InteractionUnitary, rho: DensityMatrix, sigma: DensityMatrix) -> DensityMatrix:
    """N_{V,rho}(sigma), through the O(N^3) sum form when V has one."""
    if v.blocks is None:
        return ctc_channel(v, rho, sigma)
    return channel_sum_form(v.blocks, rho, sigma)


def trace_norm(m: npt.ArrayLike) -> float:
    """Schatten 1-norm of a Hermitian matrix."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(qmath.as_cmatrix(m, square=True)))))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Return (1/2) ||a - b||_1."""
    if a.dim != b.dim:
        raise ValueError(f"Dimension mismatch: {a.dim} != {b.dim}")
    return min(1.0, max(0.0, 0.5 * trace_norm(a.matrix - b.matrix)))


def iterate_to_fixed_point(
        v: InteractionUnitary,
        rho: DensityMatrix,
        omega: DensityMatrix,
        max_iters: int = DEFAULT_MAX_ITERS,
        tol: float = DEFAULT_TOL,
        on_step: Optional[Callable[[int, DensityMatrix, float], None]] = None,
        ) -> FixedPointResult:
    """
    Iterate sigma_{n+1} = N_{V,rho}(sigma_n) starting with sigma_0 = omega.

    Stop as soon as the self-consistency residual
    ||N(sigma_n) - sigma_n||_1 drops to tol or below, or after max_iters
    channel applications. The returned state is sigma_n, i.e. the
    residual belongs to the returned state.

    on_step(n, sigma_n, residual) is called for every examined iterate.
    An interaction unitary from build_interaction_unitary() is applied
    in the sum form, see channel_sum_form().
    """
    if tol <= 0.0:
        raise ValueError("Tolerance must be positive")
    if max_iters < 0:
        raise ValueError("Iteration limit must not be negative")
    _check_dims(v, rho, omega)
    sigma = omega
    residual = math.inf
    for n in range(max_iters + 1):
        nxt = _channel_step(v, rho, sigma)
        residual = trace_norm(nxt.matrix - sigma.matrix)
        if on_step is not None:
            on_step(n, sigma, residual)
        if residual <= tol:
            _logger.debug(
                "Fixed point reached after %d iteration(s), residual %.3g", n, residual)
            return FixedPointResult(sigma, n, residual, True)
        if n < max_iters:
            sigma = nxt
    _logger.warning(
        "No fixed point within %d iterations (residual %.3g > %.3g)", max_iters, residual, tol)
    return FixedPointResult(sigma, max_iters, residual, False)


def self_consistent_output(
        v: InteractionUnitary,
        rho: DensityMatrix,
        omega: Optional[DensityMatrix] = None,
        **kwargs) -> tuple[DensityMatrix, FixedPointResult]:
    """
    Evaluate the nonlinear D-CTC map rho -> Tr_C{V (rho (x) sigma*) V^dagger}.

    sigma* is the fixed point found from omega (default |0><0|).
    Keyword arguments are passed to iterate_to_fixed_point().
    """
    if omega is None:
        omega = DensityMatrix.basis(0, v.n_outcomes)
    fixed = iterate_to_fixed_point(v, rho, omega, **kwargs)
    return ctc_output_state(v, rho, fixed.state), fixed


def channel_diagonals(
        v: InteractionUnitary, rho: DensityMatrix, omega: DensityMatrix, n: int
        ) -> npt.NDArray[np.float64]:
    """
    Return the diagonals of sigma_0 .. sigma_n as rows of an (n+1) x N array.

    sigma_0 = omega and sigma_{m+1} = N_{V,rho}(sigma_m).
    """
    _check_dims(v, rho, omega)
    rows = [omega.diagonal]
    sigma = omega
    for _ in range(n):
        sigma = _channel_step(v, rho, sigma)
        rows.append(sigma.diagonal)
    return np.array(rows)


def random_density_matrix(
        dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    """Return a random density matrix G G^dagger / Tr(G G^dagger), G Ginibre."""
    cols = dim if rank is None else rank
    ginibre = rng.normal(size=(dim, cols)) + 1j * rng.normal(size=(dim, cols))
    mat = ginibre @ ginibre.conj().T
    mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix(mat / np.trace(mat).real)


def mix(states: Iterable[tuple[float, DensityMatrix]]) -> DensityMatrix:
    """Return the convex combination sum_i w_i rho_i."""
    total = None
    for weight, state in states:
        term = weight * state.matrix
        total = term if total is None else total + term
    if total is None:
        raise ValueError("Nothing to mix")
    return DensityMatrix(total)
