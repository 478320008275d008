"""
Conversion routines for complex amplitudes written as text.

Examples: "0.5-0.5i" = 0.5 - 0.5j, "i" = 1j, "-0.7071" = -0.7071
"""

from __future__ import annotations

from collections.abc import Iterable
from typing import Union
import math
import re

import numpy as np
import numpy.typing as npt

__all__ = ['convert', 'amplitude', 'amplitude_vector', 'complex_str']

# amplitude vectors closer to unit norm are re-normalized
NORM_TOL = 1e-6

Amplitude = Union[int, float, complex, str]

_NUM = r'(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?'    # unsigned number, optional exponent
_RE_COMPLEX = re.compile(rf"""
        \s*
        ([+-]?{_NUM})
        \s*
        (?: ([+-]) \s* ({_NUM})? \s* [ij] )?
        \s*
        """,
    flags = re.ASCII | re.VERBOSE)
_RE_IMAGINARY = re.compile(rf"""
        \s*
        ([+-])? \s* ({_NUM})? \s* [ij]
        \s*
        """,
    flags = re.ASCII | re.VERBOSE)


def _convert(cstr: str) -> complex:
    """
    Convert "re+imi" to a complex number.

    Accepted forms: "re", "re+imi", "re-imi", "imi", "i", "-i". The imaginary
    unit may be written as i or j.
    """
    if match := _RE_COMPLEX.fullmatch(cstr):
        real, isign, imag = match.groups()
        if isign is None:
            return complex(float(real), 0.0)
        value = float(imag) if imag is not None else 1.0
        return complex(float(real), -value if isign == '-' else value)
    if match := _RE_IMAGINARY.fullmatch(cstr):
        isign, imag = match.groups()
        value = float(imag) if imag is not None else 1.0
        return complex(0.0, -value if isign == '-' else value)
    raise ValueError("Invalid complex number representation")


def convert(cstr: str) -> complex:
    try:
        return _convert(cstr)
    except ValueError as err:
        raise ValueError(f"{cstr!r}: {err}") from None


def amplitude(value: Amplitude) -> complex:
    """Convenience wrapper for convert() accepting also numbers."""
    if isinstance(value, bool):
        raise TypeError(f"Invalid type for an amplitude: {value!r}")
    if isinstance(value, (int, float, complex)):
        result = complex(value)
    elif isinstance(value, str):
        result = convert(value)
    else:
        raise TypeError(f"Invalid type for an amplitude: {value!r}")
    if not (math.isfinite(result.real) and math.isfinite(result.imag)):
        raise ValueError(f"Amplitude {value!r} is not finite")
    return result


def amplitude_vector(
        values: Iterable[Amplitude], tol: float = NORM_TOL) -> npt.NDArray[np.complex128]:
    """
    Convert a list of amplitudes to a unit vector.

    The norm must be within tol of 1, the vector is then normalized exactly.
    """
    vec = np.array([amplitude(v) for v in values], dtype=np.complex128)
    if vec.size == 0:
        raise ValueError("An amplitude vector must not be empty")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > tol:
        raise ValueError(f"Amplitude vector is not normalized (norm = {norm!r})")
    return vec / norm


def complex_str(value: complex, prec: int = 17) -> str:
    """Return the number in the "re+imi" format accepted by convert()."""
    value = complex(value)
    real = f"{value.real:.{prec}g}"
    if value.imag == 0.0:
        return real
    imag = f"{abs(value.imag):.{prec}g}"
    return f"{real}{'-' if value.imag < 0 else '+'}{imag}i"
