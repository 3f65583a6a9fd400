"""Solver for the coupled fixed-point system of the large-system analysis.

For each transmitter ``k`` (with ``n_k`` streams, ``N_k`` transmit
antennas, power diagonal ``p_kj`` and per-antenna covariances ``R_kj``)
and a noise power ``rho > 0``, the unknowns ``(g_k, gbar_k, delta_kj)``
satisfy::

    gbar_k  = (1/N) tr P_k (g_k P_k + [cbar_k - g_k gbar_k] I)^-1
    g_k     = (1/N) sum_j delta_kj / (1 + gbar_k delta_kj)
    delta_kj = (1/N) tr R_kj T,   T = ((1/N) sum_kj gbar_k R_kj /
                                       (1 + gbar_k delta_kj) + rho I)^-1

with ``c_k = n_k / N_k`` and ``cbar_k = N_k / N``.  The system has a
unique solution with ``delta_kj >= 0``, ``g_k >= 0`` and
``0 <= gbar_k < c_k cbar_k / g_k``; :func:`solve_fundamental` computes it
by the nested fixed-point scheme that is known to converge for this
system: the scalar ``gbar`` equations and the joint ``delta`` system are
each iterated to convergence inside every outer ``g`` update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BracketViolationError, NoConvergenceError, NotPSDError
from .matrix_core import (
    PSD_RTOL,
    hermitianize,
    inv_hpd,
    stacked_trace_products,
)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_OUTER = 10_000
DEFAULT_MAX_INNER = 100_000


@dataclass(frozen=True)
class TransmitterConfig:
    """Static description of one transmitter.

    ``power`` is the diagonal of the stream power matrix (length = number
    of streams); ``covariances`` stacks one N x N Hermitian nonnegative-
    definite matrix per transmit antenna, shape ``(N_k, N, N)``.
    """

    power: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.power, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("power must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("power entries must be finite and nonnegative")
        covs = np.asarray(self.covariances, dtype=np.complex128)
        if covs.ndim == 2:
            covs = covs[None, :, :]
        if covs.ndim != 3 or covs.shape[1] != covs.shape[2]:
            raise ValueError("covariances must stack square matrices, shape (N_k, N, N)")
        covs = np.stack([hermitianize(c, name="covariance") for c in covs])
        w = np.linalg.eigvalsh(covs)
        scale = np.abs(w).max(axis=1)
        if np.any(w[:, 0] < -PSD_RTOL * np.maximum(scale, 1e-300)):
            raise NotPSDError("a transmit-antenna covariance is not nonnegative definite")
        if p.size > covs.shape[0]:
            raise ValueError(
                f"{p.size} streams exceed {covs.shape[0]} transmit antennas"
            )
        object.__setattr__(self, "power", p)
        object.__setattr__(self, "covariances", covs)

    @property
    def n_streams(self) -> int:
        return self.power.size

    @property
    def n_antennas(self) -> int:
        return self.covariances.shape[0]


@dataclass(frozen=True)
class ScenarioConfig:
    """A full multiple-access scenario: receive dimension plus per-
    transmitter stream powers and channel covariances."""

    N: int
    transmitters: tuple[TransmitterConfig, ...]

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        txs = tuple(self.transmitters)
        if not txs:
            raise ValueError("at least one transmitter is required")
        for tx in txs:
            if tx.covariances.shape[1] != self.N:
                raise ValueError(
                    f"covariance dimension {tx.covariances.shape[1]} != N = {self.N}"
                )
        object.__setattr__(self, "transmitters", txs)

    @property
    def K(self) -> int:
        return len(self.transmitters)

    @property
    def n_streams(self) -> tuple[int, ...]:
        return tuple(tx.n_streams for tx in self.transmitters)

    @property
    def n_antennas(self) -> tuple[int, ...]:
        return tuple(tx.n_antennas for tx in self.transmitters)

    @cached_property
    def c(self) -> np.ndarray:
        """Stream-to-antenna ratios n_k / N_k."""
        return np.array([tx.n_streams / tx.n_antennas for tx in self.transmitters])

    @cached_property
    def cbar(self) -> np.ndarray:
        """Antenna-dimension ratios N_k / N."""
        return np.array([tx.n_antennas / self.N for tx in self.transmitters])

    @property
    def powers(self) -> list[np.ndarray]:
        return [tx.power for tx in self.transmitters]

    def with_powers(self, powers) -> "ScenarioConfig":
        """Copy of the scenario with new stream power diagonals."""
        if len(powers) != self.K:
            raise ValueError(f"expected {self.K} power vectors, got {len(powers)}")
        txs = tuple(
            TransmitterConfig(power=p, covariances=tx.covariances)
            for p, tx in zip(powers, self.transmitters)
        )
        return ScenarioConfig(N=self.N, transmitters=txs)

    # Flattened covariance layout used by the delta iteration: all (k, j)
    # pairs concatenated in transmitter order, fixed once per config.
    @cached_property
    def _cov_flat(self) -> np.ndarray:
        return np.concatenate([tx.covariances for tx in self.transmitters], axis=0)

    @cached_property
    def _k_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.K), self.n_antennas)

    @cached_property
    def _slices(self) -> list[slice]:
        ends = np.cumsum(self.n_antennas)
        starts = ends - np.asarray(self.n_antennas)
        return [slice(int(a), int(b)) for a, b in zip(starts, ends)]

    def split_delta(self, flat: np.ndarray) -> list[np.ndarray]:
        return [flat[s].copy() for s in self._slices]

    def flatten_delta(self, delta) -> np.ndarray:
        if len(delta) != self.K:
            raise ValueError(f"expected {self.K} delta vectors, got {len(delta)}")
        parts = []
        for d, nk in zip(delta, self.n_antennas):
            d = np.asarray(d, dtype=np.float64)
            if d.shape != (nk,):
                raise ValueError(f"delta vector of length {d.size}, expected {nk}")
            parts.append(d)
        return np.concatenate(parts)


@dataclass
class FundamentalSolution:
    """Converged unknowns of the fixed-point system plus diagnostics.

    ``residual`` is the largest violation of the three defining equations
    at the returned point; ``residual_trace`` records it per outer
    iteration and ``step_trace`` the sup-norm change of the unknowns.
    """

    g: np.ndarray
    gbar: np.ndarray
    delta: list[np.ndarray]
    rho: float
    outer_iterations: int
    residual: float
    residual_trace: list[float] = field(default_factory=list)
    step_trace: list[float] = field(default_factory=list)


def _shifted_gram(config: ScenarioConfig, gbar_by_k: np.ndarray, delta_flat: np.ndarray,
                  rho: float) -> np.ndarray:
    """``(1/N) sum_kj gbar_k R_kj / (1 + gbar_k delta_kj) + rho I``."""
    w = gbar_by_k[config._k_index]
    coef = w / (1.0 + w * delta_flat)
    m = np.tensordot(coef, config._cov_flat, axes=1) / config.N
    m[np.diag_indices_from(m)] += rho
    return m


def interference_matrix(config: ScenarioConfig, gbar, delta) -> np.ndarray:
    """Weighted covariance mixture ``(1/N) sum_kj gbar_k R_kj / (1 + gbar_k delta_kj)``."""
    gbar = np.asarray(gbar, dtype=np.float64)
    flat = config.flatten_delta(delta)
    m = _shifted_gram(config, gbar, flat, 0.0)
    return m


def build_t_matrix(config: ScenarioConfig, gbar, delta, rho: float) -> np.ndarray:
    """Resolvent-equivalent matrix ``T`` for given weights.

    Always Hermitian positive definite for ``rho > 0``; its spectral norm
    is at most ``1/rho``.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    gbar = np.asarray(gbar, dtype=np.float64)
    flat = config.flatten_delta(delta)
    return inv_hpd(_shifted_gram(config, gbar, flat, rho))


def _delta_flat_iteration(config, gbar_by_k, rho, tol, max_iter, delta0_flat):
    delta = delta0_flat
    for it in range(1, max_iter + 1):
        t = inv_hpd(_shifted_gram(config, gbar_by_k, delta, rho))
        nxt = stacked_trace_products(config._cov_flat, t) / config.N
        diff = float(np.abs(nxt - delta).max())
        delta = nxt
        if diff <= tol:
            return delta, it
    raise NoConvergenceError(
        f"delta fixed point: residual {diff:.3e} > tol {tol:.3e} after {max_iter} iterations",
        iterations=max_iter,
        residual=diff,
    )


def solve_delta(config: ScenarioConfig, gbar, rho: float, tol: float = 1e-10,
                max_iter: int = DEFAULT_MAX_INNER, delta0=None) -> list[np.ndarray]:
    """Solve the ``delta`` subsystem for fixed weights ``gbar``.

    Standard fixed-point iteration started from ``delta_kj = 1/rho``
    (or ``delta0`` when given); stops when successive iterates agree to
    ``tol`` in sup norm over all ``(k, j)``.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    gbar = np.asarray(gbar, dtype=np.float64)
    if gbar.shape != (config.K,) or np.any(gbar < 0):
        raise ValueError("gbar must be K nonnegative reals")
    if delta0 is None:
        flat0 = np.full(config._cov_flat.shape[0], 1.0 / rho)
    else:
        flat0 = config.flatten_delta(delta0)
    flat, _ = _delta_flat_iteration(config, gbar, rho, tol, max_iter, flat0)
    return config.split_delta(flat)


def solve_gbar_inner(power_diag, g_k: float, c_k: float, cbar_k: float,
                     tol: float = 1e-10, max_iter: int = DEFAULT_MAX_INNER,
                     initial: float = 0.0) -> float:
    """Solve the scalar ``gbar`` equation for one transmitter at fixed ``g_k``.

    The map ``gbar -> (1/N) sum_j p_j / (g p_j + cbar - g gbar)`` keeps the
    bracket ``[0, c cbar / g)`` invariant and is monotone on it, so plain
    iteration from any admissible starting point converges to the unique
    root.  ``g_k = 0`` has the closed form ``sum_j p_j / (N cbar)``.
    """
    p = np.asarray(power_diag, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0):
        raise ValueError("power_diag must be 1-d and nonnegative")
    if g_k < 0:
        raise ValueError("g_k must be nonnegative")
    n_k = p.size
    n_recv = n_k / (c_k * cbar_k)  # N recovered from the ratios
    p = p[p > 0]
    if p.size == 0:
        return 0.0
    if g_k == 0.0:
        return float(p.sum() / (n_recv * cbar_k))

    bracket = c_k * cbar_k / g_k
    cur = float(initial)
    if not 0.0 <= cur < bracket:
        raise ValueError(f"initial value {cur} outside [0, {bracket})")
    for _ in range(max_iter):
        nxt = float(np.sum(p / (g_k * p + cbar_k - g_k * cur)) / n_recv)
        if not 0.0 <= nxt < bracket:
            raise BracketViolationError(
                f"gbar iterate {nxt} left [0, {bracket})"
            )
        diff = abs(nxt - cur)
        cur = nxt
        if diff <= tol:
            return cur
    raise NoConvergenceError(
        f"gbar fixed point: residual {diff:.3e} > tol {tol:.3e} after {max_iter} iterations",
        iterations=max_iter,
        residual=diff,
    )


def equation_residuals(config: ScenarioConfig, g, gbar, delta_flat, rho):
    """Sup-norm violations of the three defining equations at a point.

    Returns ``(r_gbar, r_g, r_delta)``.
    """
    g = np.asarray(g, dtype=np.float64)
    gbar = np.asarray(gbar, dtype=np.float64)
    c, cbar = config.c, config.cbar
    r_gbar = 0.0
    r_g = 0.0
    for k, tx in enumerate(config.transmitters):
        p = tx.power
        den = g[k] * p + (cbar[k] - g[k] * gbar[k])
        rhs_gbar = float(np.sum(np.where(p > 0, p / np.where(den > 0, den, 1.0), 0.0))
                         / config.N)
        r_gbar = max(r_gbar, abs(gbar[k] - rhs_gbar))
        d = delta_flat[config._slices[k]]
        rhs_g = float(np.sum(d / (1.0 + gbar[k] * d)) / config.N)
        r_g = max(r_g, abs(g[k] - rhs_g))
    t = inv_hpd(_shifted_gram(config, gbar, delta_flat, rho))
    rhs_delta = stacked_trace_products(config._cov_flat, t) / config.N
    r_delta = float(np.abs(delta_flat - rhs_delta).max())
    return r_gbar, r_g, r_delta


def solve_fundamental(config: ScenarioConfig, rho: float, tol: float = DEFAULT_TOL,
                      max_iter_outer: int = DEFAULT_MAX_OUTER,
                      max_iter_inner: int = DEFAULT_MAX_INNER,
                      damping: float = 1.0,
                      gbar_init_fraction: float = 0.0) -> FundamentalSolution:
    """Solve the full coupled system at noise power ``rho``.

    Outer sweep ``t``: the ``gbar`` equations are solved to convergence at
    the previous ``g``, the ``delta`` system is solved to convergence with
    the weights held at the previous ``gbar``, then ``g`` is refreshed from
    the new ``delta`` and previous ``gbar``.  Inner solves run at
    ``tol / 10``.  Iteration stops when all three equations are satisfied
    to ``tol`` in sup norm.

    ``damping`` in (0, 1] blends each outer update with the previous state
    (1 = undamped, the default).  ``gbar_init_fraction`` places the inner
    ``gbar`` starting point at that fraction of its admissible bracket;
    the converged solution is insensitive to it.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if not 0.0 <= gbar_init_fraction < 1.0:
        raise ValueError("gbar_init_fraction must lie in [0, 1)")

    inner_tol = tol / 10.0
    c, cbar = config.c, config.cbar
    n_flat = config._cov_flat.shape[0]
    g = np.zeros(config.K)
    gbar = np.zeros(config.K)
    delta = np.full(n_flat, 1.0 / rho)

    residual_trace: list[float] = []
    step_trace: list[float] = []

    for t in range(1, max_iter_outer + 1):
        gbar_new = np.empty(config.K)
        for k, tx in enumerate(config.transmitters):
            init = gbar_init_fraction * (c[k] * cbar[k] / g[k]) if g[k] > 0 else 0.0
            gbar_new[k] = solve_gbar_inner(
                tx.power, g[k], c[k], cbar[k],
                tol=inner_tol, max_iter=max_iter_inner, initial=init,
            )
        # Weights held at the previous gbar for the whole inner delta solve.
        # Warm-started from the previous outer delta; the subsystem has a
        # unique fixed point, so the limit does not depend on the start.
        delta_new, _ = _delta_flat_iteration(
            config, gbar, rho, inner_tol, max_iter_inner, delta.copy()
        )
        w = gbar[config._k_index]
        ratios = delta_new / (1.0 + w * delta_new)
        g_new = np.array(
            [float(ratios[s].sum()) / config.N for s in config._slices]
        )

        if damping < 1.0:
            g_new = (1.0 - damping) * g + damping * g_new
            gbar_new = (1.0 - damping) * gbar + damping * gbar_new
            delta_new = (1.0 - damping) * delta + damping * delta_new

        step = max(
            float(np.abs(g_new - g).max()),
            float(np.abs(gbar_new - gbar).max()),
            float(np.abs(delta_new - delta).max()),
        )
        g, gbar, delta = g_new, gbar_new, delta_new

        residual = max(equation_residuals(config, g, gbar, delta, rho))
        residual_trace.append(residual)
        step_trace.append(step)
        if residual <= tol:
            return FundamentalSolution(
                g=g,
                gbar=gbar,
                delta=config.split_delta(delta),
                rho=rho,
                outer_iterations=t,
                residual=residual,
                residual_trace=residual_trace,
                step_trace=step_trace,
            )

    r_gbar, r_g, r_delta = equation_residuals(config, g, gbar, delta, rho)
    raise NoConvergenceError(
        "fixed-point solver did not converge: residuals "
        f"gbar-eq {r_gbar:.3e}, g-eq {r_g:.3e}, delta-eq {r_delta:.3e} "
        f"after {max_iter_outer} outer iterations (tol {tol:.1e})",
        iterations=max_iter_outer,
        residual=max(r_gbar, r_g, r_delta),
        trace=residual_trace,
    )


def iid_square_config(N: int, power: float = 1.0) -> ScenarioConfig:
    """Single-transmitter scenario with ``N_1 = n_1 = N``, identity
    covariances and uniform stream power; its solution has a closed form."""
    covs = np.broadcast_to(np.eye(N, dtype=np.complex128), (N, N, N)).copy()
    tx = TransmitterConfig(power=np.full(N, float(power)), covariances=covs)
    return ScenarioConfig(N=N, transmitters=(tx,))
