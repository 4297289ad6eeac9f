"""Stagewise orthogonal matching pursuit on implicit operators.

Each stage correlates the residual with all columns of A, keeps the
columns whose correlation clears a noise-scaled threshold, and refits
the samples by least squares on the union of everything kept so far.
A never materializes; only the active column block does.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

__all__ = ["StompConfig", "StompResult", "stomp_solve", "least_squares_on_support"]

# relative gap in the R diagonal that counts as rank deficiency
_DEFICIENCY_RTOL = 1e-10
_ADJOINT_RTOL = 1e-10


@dataclass(frozen=True)
class StompConfig:
    """Stage threshold and stopping rules.

    ``threshold`` multiplies the formal noise level sigma_n =
    ||r||_2 / sqrt(M); 2.5 sits mid-range of the usual 2..3 band.
    ``initial_guess`` warm-starts both the residual and the active set.
    """

    threshold: float = 2.5
    max_stages: int = 10
    residual_tol: float = 1e-6
    ridge: float = 1e-12
    initial_guess: np.ndarray | None = None

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.max_stages < 1:
            raise ValueError(f"max_stages must be >= 1, got {self.max_stages}")
        if self.residual_tol < 0:
            raise ValueError(f"residual_tol must be >= 0, got {self.residual_tol}")
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")


@dataclass(frozen=True)
class StompResult:
    """Recovered coefficients plus per-stage bookkeeping."""

    s: np.ndarray
    active_set: np.ndarray
    residual_history: np.ndarray
    stages_used: int
    converged: bool


def least_squares_on_support(a_block: np.ndarray, y: np.ndarray, ridge: float = 1e-12) -> np.ndarray:
    """Minimize ||A_I x - y|| over the explicit column block A_I.

    Solves through an economic QR; only when the R diagonal signals rank
    deficiency does it fall back to ridge-stabilized normal equations.
    """
    a_block = np.asarray(a_block, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m, k = a_block.shape
    if k == 0:
        return np.zeros(0)
    if k > m:
        raise ValueError(f"support exceeds sample count: {k} > {m}")
    q_mat, r_mat = scipy.linalg.qr(a_block, mode="economic")
    rdiag = np.abs(np.diag(r_mat))
    if rdiag.max() > 0.0 and rdiag.min() > _DEFICIENCY_RTOL * rdiag.max():
        return scipy.linalg.solve_triangular(r_mat, q_mat.T @ y)
    gram = a_block.T @ a_block
    gram[np.diag_indices_from(gram)] += ridge
    rhs = a_block.T @ y
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), rhs)
    except scipy.linalg.LinAlgError:
        return np.linalg.lstsq(a_block, y, rcond=None)[0]


def _spot_check_adjoint(apply_a, apply_at, m: int) -> int:
    """Probe <Av, u> = <v, A^T u> on one seeded random pair; returns N."""
    rng = np.random.default_rng(0x5707)
    u = rng.standard_normal(m)
    w = apply_at(u)
    n = int(np.asarray(w).shape[0])
    v = rng.standard_normal(n)
    lhs = float(np.dot(apply_a(v), u))
    rhs = float(np.dot(v, w))
    scale = max(abs(lhs), abs(rhs), 1e-300)
    if abs(lhs - rhs) > _ADJOINT_RTOL * scale:
        raise ValueError(f"inconsistent operators: <Av,u>={lhs!r} vs <v,Atu>={rhs!r}")
    return n


def stomp_solve(
    apply_a: Callable[[np.ndarray], np.ndarray],
    apply_at: Callable[[np.ndarray], np.ndarray],
    y: np.ndarray,
    config: StompConfig | None = None,
    *,
    columns: Callable[[np.ndarray], np.ndarray] | None = None,
) -> StompResult:
    """Recover sparse coefficients s with A s ~ y.

    ``columns(indices)`` should return the dense (M, len(indices)) block
    of A columns; without it the block is assembled by applying A to
    unit vectors, which is correct but slow for large supports.

    Stops when thresholding selects nothing new, when the residual
    drops below residual_tol * ||y||, or after max_stages; only the
    first two count as converged.  If the support would exceed M the
    previous estimate is returned with converged False.
    """
    config = config or StompConfig()
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError(f"y must be a vector, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    m = y.shape[0]
    n = _spot_check_adjoint(apply_a, apply_at, m)

    if columns is None:
        def columns(indices: np.ndarray) -> np.ndarray:
            block = np.empty((m, indices.shape[0]))
            unit = np.zeros(n)
            for out, idx in zip(block.T, indices):
                unit[idx] = 1.0
                out[:] = apply_a(unit)
                unit[idx] = 0.0
            return block

    if config.initial_guess is not None:
        s = np.asarray(config.initial_guess, dtype=np.float64).copy()
        if s.shape != (n,):
            raise ValueError(f"initial_guess length {s.shape} does not match N={n}")
    else:
        s = np.zeros(n)

    support = np.flatnonzero(s)  # warm start seeds the active set
    a_block = columns(support) if support.size else np.zeros((m, 0))
    r = y - (a_block @ s[support] if support.size else 0.0)
    norm_y = float(np.linalg.norm(y))
    history = [float(np.linalg.norm(r))]

    def result(stages: int, converged: bool) -> StompResult:
        active = np.sort(support)
        return StompResult(s=s, active_set=active,
                           residual_history=np.array(history),
                           stages_used=stages, converged=converged)

    if history[0] <= config.residual_tol * norm_y:
        return result(0, True)

    stages_used = 0
    converged = False
    for stage in range(1, config.max_stages + 1):
        corr = np.asarray(apply_at(r))
        sigma = history[-1] / np.sqrt(m)
        selected = np.flatnonzero(np.abs(corr) > config.threshold * sigma)
        fresh = np.setdiff1d(selected, support, assume_unique=False)
        if fresh.size == 0:
            converged = True  # thresholding found nothing new; natural stop
            break
        if support.size + fresh.size > m:
            return result(stages_used, False)
        a_block = np.hstack([a_block, columns(fresh)]) if support.size else columns(fresh)
        support = np.concatenate([support, fresh])
        x = least_squares_on_support(a_block, y, config.ridge)
        s = np.zeros(n)
        s[support] = x
        r = y - a_block @ x
        history.append(float(np.linalg.norm(r)))
        stages_used = stage
        if history[-1] <= config.residual_tol * norm_y:
            converged = True
            break
    return result(stages_used, converged)
