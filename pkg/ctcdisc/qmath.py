"""
Dense complex linear algebra for small quantum systems.

Vectors and matrices are plain numpy arrays:
    - CVector -> 1-D complex128 array
    - CMatrix -> 2-D complex128 array
    - RMatrix -> 2-D float64 array (transition matrices)

All functions are pure, they never modify their arguments.
"""

from __future__ import annotations

from collections.abc import Sequence
import enum

import numpy as np
import numpy.typing as npt

from .exceptions import CtcdiscConvergenceError

__all__ = [
    'CVector', 'CMatrix', 'RMatrix', 'Keep', 'ATOL',
    'as_cvector', 'as_cmatrix', 'ket', 'projector', 'dagger', 'kron',
    'swap_operator', 'partial_trace', 'mat_power', 'spectrum', 'spectral_radius',
    'unitarity_deviation', 'is_unitary',
    ]

CVector = npt.NDArray[np.complex128]
CMatrix = npt.NDArray[np.complex128]
RMatrix = npt.NDArray[np.float64]

# default absolute tolerance, all entries we deal with are O(1)
ATOL = 1e-10


class Keep(enum.Enum):
    """Which factor of a bipartite system survives a partial trace."""
    FIRST = 0
    SECOND = 1


def as_cvector(data: npt.ArrayLike) -> CVector:
    """Convert to a 1-D complex array. Raise ValueError on wrong shape."""
    vec = np.array(data, dtype=np.complex128)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"Expected a non-empty vector, got an array of shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("Vector entries must be finite")
    return vec


def as_cmatrix(data: npt.ArrayLike, square: bool = False) -> CMatrix:
    """Convert to a 2-D complex array. Raise ValueError on wrong shape."""
    mat = np.array(data, dtype=np.complex128)
    if mat.ndim != 2 or mat.size == 0:
        raise ValueError(f"Expected a non-empty matrix, got an array of shape {mat.shape}")
    if square and mat.shape[0] != mat.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {mat.shape}")
    return mat


def ket(index: int, dim: int) -> CVector:
    """Return the standard basis vector |index> of dimension dim."""
    if not 0 <= index < dim:
        raise IndexError(f"Basis index {index} out of range for dimension {dim}")
    vec = np.zeros(dim, dtype=np.complex128)
    vec[index] = 1.0
    return vec


def projector(vec: npt.ArrayLike) -> CMatrix:
    """Return |v><v|."""
    v = as_cvector(vec)
    return np.outer(v, v.conj())


def dagger(m: npt.ArrayLike) -> CMatrix:
    """Conjugate transpose."""
    return as_cmatrix(m).conj().T


def kron(a: npt.ArrayLike, b: npt.ArrayLike) -> CMatrix:
    """Kronecker product, entry (i*rb + k, j*cb + l) = a[i,j] * b[k,l]."""
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def swap_operator(dim_a: int, dim_b: int | None = None) -> CMatrix:
    """
    Return the operator exchanging two tensor factors.

    SWAP |i>|j> = |j>|i> where |i> is dim_a dimensional and |j> is
    dim_b dimensional.
    """
    if dim_b is None:
        dim_b = dim_a
    size = dim_a * dim_b
    swap = np.zeros((size, size), dtype=np.complex128)
    for i in range(dim_a):
        for j in range(dim_b):
            swap[j*dim_a + i, i*dim_b + j] = 1.0
    return swap


def partial_trace(m: npt.ArrayLike, dims: Sequence[int], keep: Keep) -> CMatrix:
    """
    Trace out one factor of a bipartite operator.

    m is a (dA*dB) x (dA*dB) matrix acting on H_A (x) H_B,
    dims is (dA, dB), keep selects the surviving factor.
    """
    mat = as_cmatrix(m, square=True)
    dim_a, dim_b = dims
    if dim_a < 1 or dim_b < 1:
        raise ValueError(f"Invalid factor dimensions {tuple(dims)}")
    if mat.shape[0] != dim_a * dim_b:
        raise ValueError(
            f"Matrix of shape {mat.shape} does not match factor dimensions {tuple(dims)}")
    tensor = mat.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep is Keep.SECOND:
        return np.einsum('ijik->jk', tensor)
    if keep is Keep.FIRST:
        return np.einsum('ijkj->ik', tensor)
    raise TypeError(f"keep must be a Keep member, got {keep!r}")


def mat_power(m: npt.ArrayLike, n: int) -> npt.NDArray:
    """
    Return m**n computed by repeated squaring.

    Real input stays real. mat_power(m, 0) is the identity.
    """
    if n < 0:
        raise ValueError("Matrix power exponent must be non-negative")
    mat = np.asarray(m)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {mat.shape}")
    return np.linalg.matrix_power(mat, n)


def spectrum(m: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """
    Return all eigenvalues of a real square matrix with multiplicity.

    The eigenvalues are sorted by decreasing modulus, ties by the real
    part and then by the imaginary part, both decreasing.

    LAPACK's geev does the work: balancing, reduction to Hessenberg form
    and the shifted QR iteration. Symmetry is not assumed.
    """
    mat = np.asarray(m)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.size == 0:
        raise ValueError(f"Expected a non-empty square matrix, got shape {mat.shape}")
    if np.iscomplexobj(mat):
        if np.max(np.abs(mat.imag), initial=0.0) > ATOL:
            raise ValueError("Expected a real matrix")
        mat = mat.real
    mat = mat.astype(np.float64)
    try:
        eigs = np.linalg.eigvals(mat)
    except np.linalg.LinAlgError as err:
        raise CtcdiscConvergenceError(f"Eigenvalue iteration failed: {err}") from None
    eigs = eigs.astype(np.complex128)
    order = np.lexsort((-eigs.imag, -eigs.real, -np.round(np.abs(eigs), 12)))
    return eigs[order]


def spectral_radius(m: npt.ArrayLike) -> float:
    """Return the largest eigenvalue modulus."""
    return float(np.max(np.abs(spectrum(m))))


def unitarity_deviation(u: npt.ArrayLike) -> float:
    """Return max |(U^dagger U - I)_ij|."""
    mat = as_cmatrix(u, square=True)
    return float(np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0]))))


def is_unitary(u: npt.ArrayLike, atol: float = ATOL) -> bool:
    """Check U^dagger U = I within atol."""
    return unitarity_deviation(u) <= atol
