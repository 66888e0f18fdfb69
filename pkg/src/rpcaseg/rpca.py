"""Principal component pursuit solvers.

Decomposes a data matrix M into a low-rank part L plus a sparse part S by
minimizing ``||L||_* + lambda * ||S||_1`` subject to ``L + S = M``. Four
solvers share one entry point: exact and inexact augmented Lagrange
multiplier methods (Lin, Chen & Ma, arXiv:1009.5055) and an accelerated
proximal gradient method with either full or randomized partial SVD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (
    NegativeTauError,
    NonFiniteInputError,
    RankOutOfBoundsError,
    SvdFailureError,
    TooFewFramesError,
    ZeroDimensionError,
)

# IALM penalty schedule (Lin-Chen-Ma defaults). The penalty only grows when
# the sparse iterate has settled, per Algorithm 5 of arXiv:1009.5055;
# unconditional growth can stall short of the optimum.
IALM_MU_FACTOR = 1.25
IALM_RHO = 1.5
IALM_MU_CAP = 1e7
IALM_GROWTH_TOL = 1e-6

# EALM penalty schedule and inner-loop tolerance.
EALM_MU_FACTOR = 0.5
EALM_RHO = 6.0
EALM_INNER_TOL = 1e-6

# APG continuation schedule: relaxation weight decays geometrically from
# APG_MU_FACTOR * ||M||_2 down to APG_MU_FLOOR times that.
APG_MU_FACTOR = 0.99
APG_ETA = 0.9
APG_MU_FLOOR = 1e-9
APG_RANK_GROWTH = 5

PARTIAL_SVD_OVERSAMPLE = 10
PARTIAL_SVD_POWER_ITERATIONS = 2


class Algorithm(Enum):
    EALM = "ealm"
    IALM = "ialm"
    APG = "apg"
    APG_PARTIAL = "apg-partial"


@dataclass(frozen=True)
class SolverConfig:
    """Solver selection plus the knobs shared by all algorithms.

    ``lam=None`` selects the standard default ``1/sqrt(max(p, n))``.
    ``seed`` feeds the randomized partial SVD; full-SVD solvers ignore it.
    """

    algorithm: Algorithm = Algorithm.IALM
    lam: Optional[float] = None
    tolerance: float = 1e-7
    max_iterations: int = 1000
    partial_rank_guess: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lam is not None and self.lam <= 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.partial_rank_guess < 1:
            raise ValueError(
                f"partial_rank_guess must be >= 1, got {self.partial_rank_guess}"
            )


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    residual: float
    rank_estimate: int
    nnz_sparse: int


@dataclass
class Decomposition:
    """Result of a solve: M ~ low_rank + sparse, plus the convergence trace."""

    low_rank: np.ndarray
    sparse: np.ndarray
    iterations_used: int
    final_residual: float
    converged: bool
    trace: list[TraceRow] = field(default_factory=list)


def default_lambda(rows: int, cols: int) -> float:
    """Standard sparsity weight ``1 / sqrt(max(rows, cols))``."""
    if rows < 1 or cols < 1:
        raise ZeroDimensionError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    return 1.0 / math.sqrt(max(rows, cols))


def soft_threshold(x, tau):
    """Shrink toward zero: ``sign(x) * max(|x| - tau, 0)``, elementwise."""
    if tau < 0:
        raise NegativeTauError(f"tau must be >= 0, got {tau}")
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    return out if out.ndim else float(out)


def _svd(M: np.ndarray):
    """Full thin SVD with a LAPACK-driver fallback."""
    try:
        return np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
        except Exception as exc:
            raise SvdFailureError("SVD did not converge") from exc


def _svt(M: np.ndarray, tau: float):
    """Singular value shrinkage; also returns the surviving rank."""
    U, s, Vt = _svd(M)
    shrunk = np.maximum(s - tau, 0.0)
    rank = int(np.count_nonzero(shrunk))
    L = (U[:, :rank] * shrunk[:rank]) @ Vt[:rank]
    return L, rank


def svt(M: np.ndarray, tau: float) -> np.ndarray:
    """Proximal operator of the nuclear norm: soft-threshold singular values."""
    if tau < 0:
        raise NegativeTauError(f"tau must be >= 0, got {tau}")
    M = np.asarray(M, dtype=np.float64)
    L, _ = _svt(M, tau)
    return L


def partial_svd(
    M: np.ndarray,
    k: int,
    *,
    oversample: int = PARTIAL_SVD_OVERSAMPLE,
    n_power: int = PARTIAL_SVD_POWER_ITERATIONS,
    rng: Optional[np.random.Generator] = None,
):
    """Top-k singular triplets via randomized range finding.

    Uses a Gaussian sketch with ``oversample`` extra columns and ``n_power``
    power iterations (QR-stabilized). Returns ``(U, s, V)`` with ``s``
    sorted descending, ``U`` p-by-k and ``V`` n-by-k. Exact (to float
    precision) whenever rank(M) <= k + oversample.
    """
    M = np.asarray(M, dtype=np.float64)
    p, n = M.shape
    if not 1 <= k <= min(p, n):
        raise RankOutOfBoundsError(f"k must be in [1, {min(p, n)}], got {k}")
    if rng is None:
        rng = np.random.default_rng(0)
    sketch = min(k + oversample, n)
    omega = rng.standard_normal((n, sketch))
    try:
        Q, _ = np.linalg.qr(M @ omega)
        for _ in range(n_power):
            W, _ = np.linalg.qr(M.T @ Q)
            Q, _ = np.linalg.qr(M @ W)
        B = Q.T @ M
        Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailureError("partial SVD did not converge") from exc
    U = Q @ Ub
    return U[:, :k], s[:k], Vt[:k].T


def _frobenius(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, "fro"))


def _spectral_norm(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False)[0])


def _trace_row(it: int, residual: float, rank: int, S: np.ndarray) -> TraceRow:
    return TraceRow(it, residual, rank, int(np.count_nonzero(S)))


def _solve_ialm(M, lam, tol, max_iter):
    m_fro = _frobenius(M)
    m_two = _spectral_norm(M)
    # Dual init from the reference implementation: M scaled by its dual norm.
    Y = M / max(m_two, np.abs(M).max() / lam)
    mu = IALM_MU_FACTOR / m_two
    mu_cap = mu * IALM_MU_CAP
    L = np.zeros_like(M)
    S = np.zeros_like(M)
    trace = []
    best = None
    for it in range(1, max_iter + 1):
        S_prev = S
        L, rank = _svt(M - S + Y / mu, 1.0 / mu)
        S = soft_threshold(M - L + Y / mu, lam / mu)
        Z = M - L - S
        Y = Y + mu * Z
        if mu * _frobenius(S - S_prev) / m_fro < IALM_GROWTH_TOL:
            mu = min(mu * IALM_RHO, mu_cap)
        residual = _frobenius(Z) / m_fro
        trace.append(_trace_row(it, residual, rank, S))
        if best is None or residual < best[0]:
            best = (residual, L, S, it)
        if residual < tol:
            return Decomposition(L, S, it, residual, True, trace)
    residual, L, S, it = best
    return Decomposition(L, S, max_iter, residual, False, trace)


def _solve_ealm(M, lam, tol, max_iter):
    m_fro = _frobenius(M)
    sgn = np.sign(M)
    sgn_two = _spectral_norm(sgn)
    Y = sgn / max(sgn_two, np.abs(sgn).max() / lam)
    mu = EALM_MU_FACTOR / sgn_two
    L = np.zeros_like(M)
    S = np.zeros_like(M)
    trace = []
    best = None
    it = 0
    while it < max_iter:
        # Solve the inner subproblem to its own tolerance before the dual
        # update; each pass counts toward the shared iteration budget.
        while it < max_iter:
            it += 1
            L_prev, S_prev = L, S
            L, rank = _svt(M - S + Y / mu, 1.0 / mu)
            S = soft_threshold(M - L + Y / mu, lam / mu)
            residual = _frobenius(M - L - S) / m_fro
            trace.append(_trace_row(it, residual, rank, S))
            if (
                _frobenius(L - L_prev) / m_fro < EALM_INNER_TOL
                and _frobenius(S - S_prev) / m_fro < EALM_INNER_TOL
            ):
                break
        Z = M - L - S
        Y = Y + mu * Z
        mu *= EALM_RHO
        residual = _frobenius(Z) / m_fro
        if best is None or residual < best[0]:
            best = (residual, L, S)
        if residual < tol:
            return Decomposition(L, S, it, residual, True, trace)
    residual, L, S = best
    return Decomposition(L, S, max_iter, residual, False, trace)


def _solve_apg(M, lam, tol, max_iter, partial=False, rank_guess=5, seed=0):
    p, n = M.shape
    m_fro = _frobenius(M)
    m_two = _spectral_norm(M)
    mu = APG_MU_FACTOR * m_two
    mu_floor = mu * APG_MU_FLOOR
    rng = np.random.default_rng(seed)
    sv = min(rank_guess, min(p, n))

    L = L_prev = np.zeros_like(M)
    S = S_prev = np.zeros_like(M)
    t = t_prev = 1.0
    trace = []
    best = None
    for it in range(1, max_iter + 1):
        w = (t_prev - 1.0) / t
        YL = L + w * (L - L_prev)
        YS = S + w * (S - S_prev)
        R = YL + YS - M
        GL = YL - 0.5 * R
        GS = YS - 0.5 * R
        thresh = mu / 2.0
        if partial:
            U, s, V = partial_svd(GL, sv, rng=rng)
            shrunk = np.maximum(s - thresh, 0.0)
            rank = int(np.count_nonzero(shrunk))
            L_new = (U[:, :rank] * shrunk[:rank]) @ V[:, :rank].T
            # All retained values survived the shrink: the truncation may be
            # cutting live spectrum, so grow the estimate for next time.
            if rank >= sv:
                sv = min(sv + APG_RANK_GROWTH, min(p, n))
        else:
            L_new, rank = _svt(GL, thresh)
        S_new = soft_threshold(GS, lam * thresh)

        # Stationarity of the proximal step, normalized by the iterate size.
        stat_L = 2.0 * (YL - L_new) + (L_new + S_new - YL - YS)
        stat_S = 2.0 * (YS - S_new) + (L_new + S_new - YL - YS)
        stationarity = math.hypot(_frobenius(stat_L), _frobenius(stat_S)) / (
            2.0 * max(1.0, math.hypot(_frobenius(L_new), _frobenius(S_new)))
        )

        L_prev, S_prev = L, S
        L, S = L_new, S_new
        t_prev, t = t, (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        mu = max(mu * APG_ETA, mu_floor)

        residual = _frobenius(M - L - S) / m_fro
        trace.append(_trace_row(it, residual, rank, S))
        if best is None or residual < best[0]:
            best = (residual, L, S, it)
        if stationarity < tol and residual < tol:
            return Decomposition(L, S, it, residual, True, trace)
    residual, L, S, it = best
    return Decomposition(L, S, max_iter, residual, False, trace)


def solve(M, cfg: SolverConfig = SolverConfig()) -> Decomposition:
    """Decompose M into low-rank plus sparse parts per the configured solver.

    Accepts a plain 2-D array or a :class:`~rpcaseg.features.FeatureMatrix`.
    When the solver hits ``max_iterations`` the best iterate seen is
    returned with ``converged=False`` rather than raising.
    """
    data = getattr(M, "data", M)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {data.shape}")
    if data.shape[1] < 2:
        raise TooFewFramesError(f"need at least 2 columns, got {data.shape[1]}")
    if not np.isfinite(data).all():
        raise NonFiniteInputError("input matrix contains non-finite entries")

    lam = cfg.lam if cfg.lam is not None else default_lambda(*data.shape)
    if not np.any(data):
        zero = np.zeros_like(data)
        return Decomposition(zero, zero.copy(), 0, 0.0, True, [])

    if cfg.algorithm is Algorithm.IALM:
        return _solve_ialm(data, lam, cfg.tolerance, cfg.max_iterations)
    if cfg.algorithm is Algorithm.EALM:
        return _solve_ealm(data, lam, cfg.tolerance, cfg.max_iterations)
    if cfg.algorithm is Algorithm.APG:
        return _solve_apg(data, lam, cfg.tolerance, cfg.max_iterations)
    if cfg.algorithm is Algorithm.APG_PARTIAL:
        return _solve_apg(
            data,
            lam,
            cfg.tolerance,
            cfg.max_iterations,
            partial=True,
            rank_guess=cfg.partial_rank_guess,
            seed=cfg.seed,
        )
    raise ValueError(f"unknown algorithm: {cfg.algorithm!r}")
