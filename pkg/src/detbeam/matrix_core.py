"""Dense complex Hermitian linear-algebra kernel.

Every routine operates on plain ``numpy`` arrays.  "Hermitian matrix" in
this package means a square complex array that passes
:func:`assert_hermitian`; builders that accept outside data should run
their input through :func:`hermitianize` once so that downstream code can
assume exact symmetry.

The kernel sticks to factorizations that are safe for the matrices the
rest of the package produces: covariance matrices (nonnegative definite,
possibly rank deficient) and resolvents shifted by a positive multiple of
the identity (positive definite by construction).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from numpy.linalg import LinAlgError

from .errors import DimensionMismatchError, NotPDError, NotPSDError

#: Relative asymmetry tolerated by :func:`assert_hermitian`.
HERMITIAN_RTOL = 1e-10

#: Eigenvalues above ``-PSD_RTOL * spectral_scale`` count as nonnegative.
PSD_RTOL = 1e-9


def _as_square_complex(a, name="matrix"):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def assert_hermitian(a, rtol=HERMITIAN_RTOL, name="matrix"):
    """Validate that ``a`` is square, finite and Hermitian to tolerance.

    The asymmetry bound is ``rtol * (1 + max|a_ij|)`` on
    ``max |a_ij - conj(a_ji)|``.  Returns the validated array.
    """
    a = _as_square_complex(a, name)
    scale = 1.0 + (np.abs(a).max() if a.size else 0.0)
    asym = np.abs(a - a.conj().T).max() if a.size else 0.0
    if asym > rtol * scale:
        raise ValueError(
            f"{name} is not Hermitian: max asymmetry {asym:.3e} exceeds "
            f"{rtol:.1e} * (1 + max|entry|) = {rtol * scale:.3e}"
        )
    return a


def hermitianize(a, rtol=HERMITIAN_RTOL, name="matrix"):
    """Return the Hermitian part ``(a + a^H) / 2`` of a near-Hermitian input.

    Raises if the input deviates from symmetry by more than the tolerance;
    small factorization noise is folded away so that later code can rely on
    ``a == a^H`` exactly.
    """
    a = assert_hermitian(a, rtol=rtol, name=name)
    return (a + a.conj().T) / 2.0


def psd_sqrt(a):
    """Hermitian positive-semidefinite square root via eigendecomposition.

    Eigenvalues in ``[-PSD_RTOL * scale, 0)`` are clamped to zero; anything
    more negative raises :class:`NotPSDError`.  The result ``b`` satisfies
    ``b @ b ~= a`` to machine-level accuracy relative to ``max|a|``.
    """
    a = _as_square_complex(a)
    w, v = np.linalg.eigh((a + a.conj().T) / 2.0)
    scale = max(abs(w[0]), abs(w[-1]), 0.0)
    if w[0] < -PSD_RTOL * scale:
        raise NotPSDError(
            f"eigenvalue {w[0]:.6e} below -{PSD_RTOL:.1e} * spectral scale {scale:.6e}"
        )
    w = np.maximum(w, 0.0)
    b = (v * np.sqrt(w)) @ v.conj().T
    return (b + b.conj().T) / 2.0


def psd_eigvals(a):
    """Eigenvalues of a Hermitian nonnegative-definite matrix, clamped at 0.

    Same acceptance rule as :func:`psd_sqrt`; used when only the spectrum is
    needed (e.g. diagonalizing a transmit correlation matrix).
    """
    a = _as_square_complex(a)
    w = np.linalg.eigvalsh((a + a.conj().T) / 2.0)
    scale = max(abs(w[0]), abs(w[-1]), 0.0)
    if w[0] < -PSD_RTOL * scale:
        raise NotPSDError(
            f"eigenvalue {w[0]:.6e} below -{PSD_RTOL:.1e} * spectral scale {scale:.6e}"
        )
    return np.maximum(w, 0.0)


def _cho(a):
    try:
        return cho_factor(a, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NotPDError(f"Cholesky factorization failed: {exc}") from exc


def logdet_hpd(a):
    """Log-determinant of a Hermitian positive-definite matrix.

    Computed from the Cholesky factor, ``2 * sum(log diag(L))``; raises
    :class:`NotPDError` on a non-positive pivot.
    """
    a = _as_square_complex(a)
    c, _ = _cho(a)
    return 2.0 * float(np.sum(np.log(np.real(np.diag(c)))))


def solve_hpd(a, b):
    """Solve ``a x = b`` for Hermitian positive-definite ``a``."""
    a = _as_square_complex(a)
    b = np.asarray(b, dtype=np.complex128)
    rows = b.shape[0] if b.ndim >= 1 else None
    if rows != a.shape[0]:
        raise DimensionMismatchError(
            f"solve_hpd: A is {a.shape[0]}x{a.shape[0]} but B has {rows} rows"
        )
    return cho_solve(_cho(a), b, check_finite=False)


def inv_hpd(a):
    """Inverse of a Hermitian positive-definite matrix, symmetrized."""
    a = _as_square_complex(a)
    x = cho_solve(_cho(a), np.eye(a.shape[0], dtype=np.complex128), check_finite=False)
    return (x + x.conj().T) / 2.0


def trace_product(a, b):
    """``tr(a @ b)`` without forming the product matrix.

    Returns the complex value ``sum_ij a_ij * b_ji``; for a pair of
    Hermitian PSD factors the imaginary part is numerical noise and callers
    typically take ``.real``.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0] or a.shape[0] != b.shape[1]:
        raise DimensionMismatchError(
            f"trace_product: incompatible shapes {a.shape} and {b.shape}"
        )
    return complex(np.einsum("ij,ji->", a, b))


def stacked_trace_products(stack, b):
    """Real traces ``tr(stack[j] @ b)`` for a stack of Hermitian matrices.

    ``stack`` has shape ``(m, n, n)`` and ``b`` is ``(n, n)``; returns a
    length-``m`` float vector.  Summation order is fixed, so repeated calls
    are bit-identical.
    """
    return np.einsum("jab,ba->j", stack, b).real
