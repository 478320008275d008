"""
Discrimination unitaries and problem definitions.

A set of unitaries {U_i} fits a set of states {psi_i} if U_i|psi_i> = |i>
(up to a global phase). Three constructions are provided:

    - two_state_unitaries(): any pair of qubit states
    - qubit_set_unitaries(): any N >= 3 qubit states, each U_i is a unitary
      extension of the isometry |i><psi_i| + |i+1 mod N><psi_i^perp|
    - bb84_unitaries(): the BB84 states built from X, H and SWAP gates

A DiscriminationProblem bundles states, priors, unitaries and the
initial state omega of the C register.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
import dataclasses as dc
import itertools
import logging
import math
from typing import Literal, Optional

import numpy as np
import numpy.typing as npt

from . import qmath
from .exceptions import add_note, CtcdiscValidationError
from .qmath import ATOL, CMatrix
from .quantum import DensityMatrix, embed_state, PureState

__all__ = [
    'StateSet', 'UnitarySet', 'ValidationReport', 'DiscriminationProblem',
    'orthogonal_complement', 'two_state_unitaries', 'qubit_set_unitaries',
    'complete_isometry', 'bb84_unitaries', 'validate_unitary_set',
    'bloch_state', 'random_qubit_states',
    'bb84_problem', 'two_state_problem', 'qubit_set_problem',
    'geometrically_uniform_problem', 'BUILTIN_PROBLEMS',
    ]

# residual norm below which a Gram-Schmidt candidate is discarded
_GS_SKIP = 1e-8
# |<j|U_i|psi_j>| below this value is reported as a vanishing cross element
WEAK_THRESHOLD = 1e-8
# transition probabilities below this value are roundoff
ROUNDOFF = 1e-15

_logger = logging.getLogger(__package__)

# standard gates
GATE_I = np.eye(2, dtype=np.complex128)
GATE_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
GATE_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
GATE_SWAP = qmath.swap_operator(2)


@dc.dataclass(frozen=True, eq=False)
class StateSet:
    """
    States {psi_i} with prior probabilities {p_i}.

    priors default to the uniform distribution. All states must have
    the same dimension. States equal up to a global phase make the set
    degenerate; such a set is rejected unless allow_degenerate is set.
    """

    states: tuple[PureState, ...]
    priors: tuple[float, ...] = ()
    allow_degenerate: dc.InitVar[bool] = False

    def __post_init__(self, allow_degenerate: bool) -> None:
        states = tuple(self.states)
        if not states:
            raise ValueError("A state set must not be empty")
        for i, psi in enumerate(states):
            if not isinstance(psi, PureState):
                raise TypeError(f"State {i} is not a PureState: {psi!r}")
        dims = {psi.dim for psi in states}
        if len(dims) != 1:
            raise ValueError(f"All states must have the same dimension, got {sorted(dims)}")
        n = len(states)
        if self.priors:
            priors = tuple(float(p) for p in self.priors)
        else:
            priors = (1.0 / n,) * n
        if len(priors) != n:
            raise ValueError(f"Expected {n} prior probabilities, got {len(priors)}")
        if any(p < 0.0 for p in priors):
            raise CtcdiscValidationError("Prior probabilities must not be negative")
        if abs(math.fsum(priors) - 1.0) > 1e-12:
            raise CtcdiscValidationError(
                f"Prior probabilities sum to {math.fsum(priors)!r}, not 1")
        object.__setattr__(self, 'states', states)
        object.__setattr__(self, 'priors', priors)
        if not allow_degenerate and (pairs := self.degenerate_pairs()):
            i, j = pairs[0]
            raise CtcdiscValidationError(
                f"degenerate state set: states {i} and {j} are equal up to a global phase")

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[PureState]:
        return iter(self.states)

    def __getitem__(self, index: int) -> PureState:
        return self.states[index]

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def degenerate_pairs(self, atol: float = ATOL) -> list[tuple[int, int]]:
        """Return index pairs i < j of states equal up to a global phase."""
        return [
            (i, j) for i, j in itertools.combinations(range(self.n), 2)
            if self.states[i].same_ray(self.states[j], atol)]

    def max_overlap(self) -> float:
        """Return max_{i != j} |<psi_i|psi_j>|^2 (0.0 for a single state)."""
        return max(
            (self.states[i].overlap(self.states[j])
             for i, j in itertools.combinations(range(self.n), 2)),
            default=0.0)


@dc.dataclass(frozen=True, eq=False)
class UnitarySet:
    """N unitaries acting on an N-dimensional space."""

    unitaries: tuple[CMatrix, ...]

    def __post_init__(self) -> None:
        mats = tuple(qmath.as_cmatrix(u, square=True) for u in self.unitaries)
        if not mats:
            raise ValueError("A unitary set must not be empty")
        n = len(mats)
        for i, mat in enumerate(mats):
            if mat.shape != (n, n):
                raise ValueError(f"U_{i} has shape {mat.shape}, expected {(n, n)}")
            if (dev := qmath.unitarity_deviation(mat)) > ATOL:
                raise CtcdiscValidationError(f"U_{i} is not unitary (deviation {dev:.3g})")
            mat.setflags(write=False)
        object.__setattr__(self, 'unitaries', mats)

    def __len__(self) -> int:
        return len(self.unitaries)

    def __iter__(self) -> Iterator[CMatrix]:
        return iter(self.unitaries)

    def __getitem__(self, index: int) -> CMatrix:
        return self.unitaries[index]

    @property
    def n(self) -> int:
        return len(self.unitaries)


@dc.dataclass(frozen=True)
class ValidationReport:
    """
    Diagnostics of a (StateSet, UnitarySet) pair.

    mapping_deviation[i] -- distance of U_i|psi_i> from the ray of |i>
    unitarity_deviation[i] -- max |(U_i^dagger U_i - I)_jk|
    weak_pairs -- pairs (i, j), i != j, with |<j|U_i|psi_j>| < threshold;
        informational only, the qubit set construction produces them
        legitimately
    """

    mapping_deviation: tuple[float, ...]
    unitarity_deviation: tuple[float, ...]
    weak_pairs: tuple[tuple[int, int], ...]
    atol: float = ATOL

    @property
    def mapping_ok(self) -> bool:
        return all(dev <= self.atol for dev in self.mapping_deviation)

    @property
    def unitary_ok(self) -> bool:
        return all(dev <= self.atol for dev in self.unitarity_deviation)

    @property
    def ok(self) -> bool:
        """True if U_i|psi_i> = |i> and all U_i are unitary. Weak pairs do not matter."""
        return self.mapping_ok and self.unitary_ok

    def summary(self) -> list[str]:
        """Return a human readable description, one line per item."""
        lines = []
        for i, (mdev, udev) in enumerate(zip(self.mapping_deviation, self.unitarity_deviation)):
            status = 'ok' if mdev <= self.atol and udev <= self.atol else 'FAILED'
            lines.append(
                f"U_{i}: mapping deviation {mdev:.3g}, "
                + f"unitarity deviation {udev:.3g} [{status}]")
        if self.weak_pairs:
            pairs = ', '.join(f"({i},{j})" for i, j in self.weak_pairs)
            lines.append(f"vanishing cross elements <j|U_i|psi_j>: {pairs}")
        return lines


def orthogonal_complement(psi: PureState) -> PureState:
    """
    Return the qubit state orthogonal to psi.

    (a, b) -> (-conj(b), conj(a)) with the global phase fixed so that the
    first non-negligible amplitude is real and positive.
    """
    if psi.dim != 2:
        raise ValueError(f"Orthogonal complement is defined for qubits only, got dim {psi.dim}")
    a, b = psi.amplitudes
    perp = np.array([-np.conj(b), np.conj(a)], dtype=np.complex128)
    lead = next(x for x in perp if abs(x) > _GS_SKIP)
    return PureState(perp * (abs(lead) / lead))


def _check_qubits(states: Sequence[PureState]) -> None:
    for i, psi in enumerate(states):
        if psi.dim != 2:
            raise ValueError(f"State {i} is not a qubit (dim {psi.dim})")


def two_state_unitaries(
        psi0: PureState, psi1: PureState, phases: Sequence[float] = (0.0, 0.0, 0.0, 0.0)
        ) -> UnitarySet:
    """
    Return U_0, U_1 with U_0|psi0> = e^{i phi_0}|0>, U_1|psi1> = e^{i phi_2}|1>.

    U_0 = e^{i phi_0}|0><psi0| + e^{i phi_1}|1><psi0^perp|
    U_1 = e^{i phi_2}|1><psi1| + e^{i phi_3}|0><psi1^perp|
    """
    _check_qubits((psi0, psi1))
    if len(phases) != 4:
        raise ValueError(f"Expected 4 phases, got {len(phases)}")
    if psi0.same_ray(psi1):
        raise CtcdiscValidationError(
            "degenerate state set: the two states are equal up to phase")
    ph = [complex(math.cos(x), math.sin(x)) for x in phases]
    ket0, ket1 = qmath.ket(0, 2), qmath.ket(1, 2)

    def term(phase: complex, out: npt.NDArray, psi: PureState) -> CMatrix:
        return phase * np.outer(out, psi.amplitudes.conj())

    u0 = (term(ph[0], ket0, psi0)
          + term(ph[1], ket1, orthogonal_complement(psi0)))
    u1 = (term(ph[2], ket1, psi1)
          + term(ph[3], ket0, orthogonal_complement(psi1)))
    return UnitarySet((u0, u1))


def complete_isometry(
        iso_columns: Sequence[npt.ArrayLike],
        dim: int,
        domain: Optional[Sequence[int]] = None,
        ) -> CMatrix:
    """
    Extend orthonormal columns to a dim x dim unitary.

    The given columns are placed at the column indices listed in domain
    (default 0, 1, 2, ...). The remaining columns are obtained by
    Gram-Schmidt orthogonalization of the standard basis vectors
    |0>, |1>, ... in this order; candidates with a residual norm below
    1e-8 are skipped.
    """
    cols = [qmath.as_cvector(c) for c in iso_columns]
    if not cols:
        raise ValueError("At least one column is required")
    if any(c.size != dim for c in cols):
        raise ValueError(f"All columns must have dimension {dim}")
    if len(cols) > dim:
        raise ValueError(f"Too many columns ({len(cols)}) for dimension {dim}")
    if domain is None:
        domain = range(len(cols))
    domain = list(domain)
    if len(domain) != len(cols) or len(set(domain)) != len(domain) \
            or not all(0 <= d < dim for d in domain):
        raise ValueError(f"Invalid domain column indices {domain}")
    given = np.column_stack(cols)
    gram = given.conj().T @ given
    if np.max(np.abs(gram - np.eye(len(cols)))) > ATOL:
        raise CtcdiscValidationError("Isometry columns are not orthonormal")

    basis = list(cols)
    for j in range(dim):
        if len(basis) == dim:
            break
        cand = qmath.ket(j, dim)
        # two passes of classical Gram-Schmidt
        for _ in range(2):
            for vec in basis:
                cand = cand - np.vdot(vec, cand) * vec
        norm = np.linalg.norm(cand)
        if norm < _GS_SKIP:
            continue
        basis.append(cand / norm)
    assert len(basis) == dim

    result = np.zeros((dim, dim), dtype=np.complex128)
    for idx, col in zip(domain, cols):
        result[:, idx] = col
    free = [idx for idx in range(dim) if idx not in set(domain)]
    for idx, col in zip(free, basis[len(cols):]):
        result[:, idx] = col
    return result


def _domain_indices(dim: int, layout: Literal['pad', 'ancilla']) -> list[int]:
    """Column indices of the embedded images of |0> and |1>."""
    return [
        int(np.argmax(np.abs(embed_state(PureState.basis(b, 2), dim, layout).amplitudes)))
        for b in (0, 1)]


def qubit_set_unitaries(
        states: StateSet, layout: Literal['pad', 'ancilla'] = 'pad') -> UnitarySet:
    """
    Return unitary extensions of V_i = |i><psi_i| + |i+1 mod N><psi_i^perp|.

    The qubits are embedded into the N-dimensional space according
    to the layout, see quantum.embed_state().
    """
    n = states.n
    if n < 3:
        raise ValueError("Use two_state_unitaries() for less than three states")
    _check_qubits(states.states)
    domain = _domain_indices(n, layout)
    unitaries = []
    for i, psi in enumerate(states):
        perp = orthogonal_complement(psi)
        # V_i as an N x 2 matrix
        iso = (np.outer(qmath.ket(i, n), psi.amplitudes.conj())
               + np.outer(qmath.ket((i + 1) % n, n), perp.amplitudes.conj()))
        try:
            unitaries.append(complete_isometry([iso[:, 0], iso[:, 1]], n, domain))
        except CtcdiscValidationError as err:
            add_note(err, f"isometry V_{i}")
            raise
    return UnitarySet(tuple(unitaries))


def bb84_unitaries() -> tuple[StateSet, UnitarySet]:
    """
    Return the BB84 states |0>, |1>, |+>, |-> and their discrimination unitaries.

    The states carry an ancilla qubit: |00>, |10>, |+0>, |-0>. Outcomes are
    encoded as |0> = |00>, |1> = |01>, |2> = |10>, |3> = |11>.
    """
    zero, one = qmath.ket(0, 2), qmath.ket(1, 2)
    plus, minus = (zero + one) / math.sqrt(2), (zero - one) / math.sqrt(2)
    states = StateSet(tuple(PureState(np.kron(q, zero)) for q in (zero, one, plus, minus)))
    unitaries = UnitarySet((
        GATE_SWAP,
        np.kron(GATE_X, GATE_X),
        np.kron(GATE_X, GATE_I) @ np.kron(GATE_H, GATE_I),
        np.kron(GATE_X, GATE_H) @ GATE_SWAP,
        ))
    return states, unitaries


def validate_unitary_set(
        states: StateSet,
        us: UnitarySet,
        layout: Literal['pad', 'ancilla'] = 'pad',
        threshold: float = WEAK_THRESHOLD,
        atol: float = ATOL,
        ) -> ValidationReport:
    """Check U_i|psi_i> = |i>, unitarity and the cross elements <j|U_i|psi_j>."""
    n = us.n
    if states.n != n:
        raise ValueError(f"{states.n} states do not match {n} unitaries")
    if states.dim > n:
        raise ValueError(f"States of dimension {states.dim} do not fit dimension {n}")
    embedded = [embed_state(psi, n, layout).amplitudes for psi in states]
    mapping = []
    for i, (mat, psi) in enumerate(zip(us, embedded)):
        out = mat @ psi
        rest = out.copy()
        rest[i] = 0.0
        mapping.append(float(np.linalg.norm(rest) + abs(abs(out[i]) - 1.0)))
    weak = tuple(
        (i, j) for i in range(n) for j in range(n)
        if i != j and abs((us[i] @ embedded[j])[j]) < threshold)
    return ValidationReport(
        mapping_deviation=tuple(mapping),
        unitarity_deviation=tuple(qmath.unitarity_deviation(u) for u in us),
        weak_pairs=weak,
        atol=atol)


@dc.dataclass(frozen=True, eq=False)
class DiscriminationProblem:
    """
    One discrimination experiment.

    states -- the states to discriminate with their priors
    unitaries -- N unitaries with U_i|psi_i> = |i>
    omega -- initial state of the C register (default |0><0|)
    layout -- how states of dimension < N are embedded
    """

    states: StateSet
    unitaries: UnitarySet
    omega: Optional[DensityMatrix] = None
    layout: Literal['pad', 'ancilla'] = 'pad'
    name: str = ''

    def __post_init__(self) -> None:
        n = self.unitaries.n
        if n < 2:
            raise ValueError("At least two states are required")
        if self.omega is None:
            object.__setattr__(self, 'omega', DensityMatrix.basis(0, n))
        elif self.omega.dim != n:
            raise ValueError(f"omega has dimension {self.omega.dim}, expected {n}")
        report = validate_unitary_set(self.states, self.unitaries, self.layout)
        if not report.ok:
            err = CtcdiscValidationError("The unitaries do not discriminate the states")
            for line in report.summary():
                add_note(err, line)
            raise err
        if report.weak_pairs:
            _logger.debug(
                "%s: %d vanishing cross element(s)",
                self.name or 'problem', len(report.weak_pairs))
        embedded = tuple(embed_state(psi, n, self.layout) for psi in self.states)
        object.__setattr__(self, '_embedded', embedded)
        amps = np.array([[u @ psi.amplitudes for u in self.unitaries] for psi in embedded])
        # amps[k, j, i] = <i|U_j|psi_k>
        amps.setflags(write=False)
        object.__setattr__(self, '_amplitudes', amps)

    @property
    def n(self) -> int:
        """Number of states = number of measurement outcomes."""
        return self.unitaries.n

    @property
    def priors(self) -> npt.NDArray[np.float64]:
        return np.array(self.states.priors)

    @property
    def embedded_states(self) -> tuple[PureState, ...]:
        return self._embedded   # type: ignore[attr-defined]

    @property
    def initial_distribution(self) -> npt.NDArray[np.float64]:
        """u^(0), the diagonal of omega."""
        assert self.omega is not None
        return self.omega.diagonal

    def amplitude(self, i: int, j: int, k: int) -> complex:
        """Return <i|U_j|psi_k>."""
        return complex(self._amplitudes[k, j, i])   # type: ignore[attr-defined]

    def transition_probabilities(self, k: int) -> npt.NDArray[np.float64]:
        """
        Return the array |<i|U_j|psi_k>|^2 indexed [i, j].

        Column k is exactly the basis vector e_k and entries below
        ROUNDOFF are zero, so the absorbing outcome leaks nothing back
        into the wrong outcomes.
        """
        if not 0 <= k < self.n:
            raise IndexError(f"State index {k} out of range 0..{self.n - 1}")
        probs = np.abs(self._amplitudes[k].T) ** 2  # type: ignore[attr-defined]
        probs[probs < ROUNDOFF] = 0.0
        probs[:, k] = 0.0
        probs[k, k] = 1.0
        return probs

    def with_omega(self, omega: DensityMatrix) -> DiscriminationProblem:
        return dc.replace(self, omega=omega)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ''
        return f"<{type(self).__name__}{label} N={self.n}>"


def bloch_state(theta: float, phi: float) -> PureState:
    """Return cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
    return PureState(np.array(
        [math.cos(theta / 2), complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2)],
        dtype=np.complex128))


def random_qubit_states(
        n: int,
        rng: np.random.Generator,
        max_overlap: float = 1.0 - 1e-6,
        max_tries: int = 10_000,
        ) -> list[PureState]:
    """
    Return n Haar random qubit states with pairwise overlaps <= max_overlap.

    Candidates violating the overlap limit are redrawn.
    """
    states: list[PureState] = []
    for _ in range(max_tries):
        if len(states) == n:
            return states
        vec = rng.normal(size=2) + 1j * rng.normal(size=2)
        cand = PureState.from_amplitudes(vec, normalize=True)
        if all(cand.overlap(psi) <= max_overlap for psi in states):
            states.append(cand)
    if len(states) == n:
        return states
    raise ValueError(f"Could not draw {n} states with overlaps <= {max_overlap}")


def bb84_problem(
        priors: Sequence[float] = (), omega: Optional[DensityMatrix] = None
        ) -> DiscriminationProblem:
    states, unitaries = bb84_unitaries()
    if priors:
        states = StateSet(states.states, tuple(priors))
    return DiscriminationProblem(states, unitaries, omega, name='bb84')


def two_state_problem(
        psi0: PureState,
        psi1: PureState,
        priors: Sequence[float] = (),
        phases: Sequence[float] = (0.0, 0.0, 0.0, 0.0),
        omega: Optional[DensityMatrix] = None,
        ) -> DiscriminationProblem:
    states = StateSet((psi0, psi1), tuple(priors))
    return DiscriminationProblem(
        states, two_state_unitaries(psi0, psi1, phases), omega, name='two_state')


def qubit_set_problem(
        states: Sequence[PureState],
        priors: Sequence[float] = (),
        omega: Optional[DensityMatrix] = None,
        layout: Literal['pad', 'ancilla'] = 'pad',
        ) -> DiscriminationProblem:
    """Build a problem for N >= 3 qubit states (N = 2 is delegated to two_state_problem)."""
    if len(states) == 2:
        return two_state_problem(states[0], states[1], priors, omega=omega)
    stateset = StateSet(tuple(states), tuple(priors))
    return DiscriminationProblem(
        stateset, qubit_set_unitaries(stateset, layout), omega, layout, name='qubit_set')


def geometrically_uniform_problem(
        rotation: npt.ArrayLike,
        priors: Sequence[float] = (),
        omega: Optional[DensityMatrix] = None,
        ) -> DiscriminationProblem:
    """
    Return the BB84 problem rotated by a single-qubit unitary R.

    The states become (R (x) I)|psi_i> and the unitaries U_i (R^dagger (x) I),
    so the transition probabilities are those of the BB84 problem.
    """
    rot = qmath.as_cmatrix(rotation, square=True)
    if rot.shape != (2, 2):
        raise ValueError("The rotation must be a 2 x 2 matrix")
    if not qmath.is_unitary(rot):
        raise CtcdiscValidationError("The rotation is not unitary")
    states, unitaries = bb84_unitaries()
    lift = np.kron(rot, GATE_I)
    rotated = StateSet(
        tuple(PureState(lift @ psi.amplitudes) for psi in states), tuple(priors))
    return DiscriminationProblem(
        rotated, UnitarySet(tuple(u @ lift.conj().T for u in unitaries)), omega,
        name='geometrically_uniform')


BUILTIN_PROBLEMS = {
    'bb84': "the four BB84 states with X/H/SWAP unitaries",
    'two_state': "two qubit states (config: states, optional phases)",
    'qubit_set': "N >= 3 qubit states (config: states or bloch)",
    'geometrically_uniform': "BB84 states rotated by a qubit unitary (config: rotation)",
    }
