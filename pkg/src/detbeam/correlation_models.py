"""Antenna correlation models.

Two builders live here: the generalized Jake's model, which fills a
correlation matrix by averaging plane-wave phase shifts over a solid
angle, and the reduction of a separable (Kronecker) transmit/receive
correlation structure to one covariance matrix per transmit antenna.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .matrix_core import hermitianize, psd_eigvals

#: Per-entry quadrature target for :func:`jakes_correlation`.
QUADRATURE_TOL = 1e-10

_MAX_QUAD_NODES = 1 << 15


@dataclass(frozen=True)
class JakesParams:
    """Parameters of the generalized Jake's correlation model.

    Entry ``(i, j)`` of the resulting matrix is the average of
    ``exp(1j * 2*pi * spacing * (i - j) * cos(theta))`` over
    ``theta in [theta_min, theta_max]``.  ``spacing`` is the antenna
    separation per index step in wavelengths.
    """

    theta_min: float
    theta_max: float
    spacing: float
    dim: int

    def __post_init__(self):
        if self.theta_max < self.theta_min:
            raise ValueError("theta_max must be >= theta_min")
        if self.spacing < 0:
            raise ValueError("spacing must be nonnegative")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    @property
    def degenerate(self) -> bool:
        """True when the angular interval collapses to a single point."""
        return self.theta_max == self.theta_min


@dataclass(frozen=True)
class JakesCorrelation:
    """Result of :func:`jakes_correlation`.

    ``degenerate`` flags the point-evaluation fallback used when the
    angular interval has zero width; ``quadrature_nodes`` records the
    Gauss-Legendre rule size at which the entries stabilized.
    """

    matrix: np.ndarray
    degenerate: bool
    quadrature_nodes: int


def _first_row(params: JakesParams, nodes: int) -> np.ndarray:
    """Entries for offsets m = 0 .. dim-1 with an ``nodes``-point rule."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = params.theta_min, params.theta_max
    theta = 0.5 * (b - a) * x + 0.5 * (b + a)
    # interval scaling (b-a)/2 cancels against the 1/(b-a) normalization
    weights = 0.5 * w
    m = np.arange(params.dim)
    phases = np.exp(1j * 2.0 * np.pi * params.spacing * np.outer(m, np.cos(theta)))
    return phases @ weights


def jakes_correlation(params: JakesParams) -> JakesCorrelation:
    """Correlation matrix of the generalized Jake's model.

    The integrand depends only on the index offset ``i - j``, so one row of
    offsets is integrated and the matrix assembled as a Hermitian Toeplitz
    matrix.  The Gauss-Legendre node count starts at 64 and doubles until
    two successive rules agree to ``QUADRATURE_TOL`` per entry.  The
    diagonal is pinned to exactly 1.

    For a degenerate interval (``theta_max == theta_min``) the integrand is
    evaluated at the single angle instead, and the result is flagged.
    """
    if params.degenerate:
        m = np.arange(params.dim)
        row = np.exp(
            1j * 2.0 * np.pi * params.spacing * m * np.cos(params.theta_min)
        )
        mat = toeplitz(row, row.conj())
        np.fill_diagonal(mat, 1.0)
        return JakesCorrelation(matrix=mat, degenerate=True, quadrature_nodes=0)

    nodes = 64
    row = _first_row(params, nodes)
    while True:
        nodes *= 2
        refined = _first_row(params, nodes)
        if np.abs(refined - row).max() < QUADRATURE_TOL:
            row = refined
            break
        row = refined
        if nodes > _MAX_QUAD_NODES:
            raise RuntimeError(
                f"Jake's quadrature did not stabilize below {QUADRATURE_TOL} "
                f"within {_MAX_QUAD_NODES} nodes"
            )
    mat = toeplitz(row, row.conj())
    np.fill_diagonal(mat, 1.0)
    return JakesCorrelation(matrix=mat, degenerate=False, quadrature_nodes=nodes)


@dataclass(frozen=True)
class KroneckerSpec:
    """Separable correlation structure for one transmitter.

    ``transmit_diag`` holds the nonnegative transmit-correlation
    coefficients (one per transmit antenna), ``receive_corr`` the common
    N x N receive correlation, and ``path_loss`` a nonnegative link gain
    that multiplies every per-antenna covariance.
    """

    receive_corr: np.ndarray
    transmit_diag: np.ndarray
    path_loss: float = 1.0

    def __post_init__(self):
        object.__setattr__(
            self, "receive_corr", hermitianize(self.receive_corr, name="receive_corr")
        )
        diag = np.asarray(self.transmit_diag, dtype=np.float64)
        if diag.ndim != 1 or diag.size == 0:
            raise ValueError("transmit_diag must be a nonempty 1-d sequence")
        if np.any(diag < 0):
            raise ValueError("transmit_diag entries must be nonnegative")
        object.__setattr__(self, "transmit_diag", diag)
        if not self.path_loss >= 0:
            raise ValueError("path_loss must be nonnegative")

    @classmethod
    def from_transmit_matrix(cls, transmit_corr, receive_corr, path_loss=1.0):
        """Build a spec from a general Hermitian transmit correlation.

        The transmit matrix is diagonalized and its (clamped nonnegative)
        eigenvalues, sorted descending, serve as the per-antenna
        coefficients; this leaves the channel statistics unchanged because
        the isotropic precoder absorbs the eigenbasis rotation.
        """
        t = psd_eigvals(hermitianize(transmit_corr, name="transmit_corr"))[::-1]
        return cls(receive_corr=receive_corr, transmit_diag=t, path_loss=path_loss)


def kronecker_to_columns(spec: KroneckerSpec) -> list[np.ndarray]:
    """Per-transmit-antenna covariance matrices of a Kronecker structure.

    Antenna ``j`` gets ``path_loss * t_j * receive_corr``.
    """
    return [spec.path_loss * t * spec.receive_corr for t in spec.transmit_diag]
