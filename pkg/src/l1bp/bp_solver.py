"""Belief propagation for l1 recovery with quadratic messages.

Every edge (mu, i) of the sparse matrix carries four numbers:

* ``a_msg``, ``b_msg`` -- variable-to-check message, the cavity objective
  ``0.5*A*x**2 - B*x + |x|`` of x_i with check mu removed;
* ``c_msg``, ``d_msg`` -- check-to-variable message, the cavity objective
  ``-0.5*C*lam**2 + (D - y_mu)*lam`` of the multiplier lam_mu with x_i removed.

A sweep recomputes (A, B) from the incoming (C, D) of the other checks of
each variable, then (C, D) from the incoming (A, B) of the other variables of
each check.  The estimate is ``x_i = f(B_i; A_i)`` where (A_i, B_i) use all
checks of i.  Leave-one-out sums are prefix+suffix sums over the padded
neighbourhood tables of the matrix, so no total-minus-term cancellation
occurs and one sweep costs O(E) operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance_gen import SparseMeasurementMatrix, _values
from .kernel import _st
from .result import SUCCESS_TOL, RecoveryResult, score

__all__ = ["BpConfig", "BpState", "init_state", "update_variable_to_check",
           "update_check_to_variable", "finalize", "run_bp", "cavity_sums"]


@dataclass(frozen=True)
class BpConfig:
    max_iters: int = 1000
    convergence_tol: float = 1e-10
    damping: float = 0.0
    epsilon_c: float = 1e-12
    init_c: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.convergence_tol <= 0 or self.epsilon_c <= 0 or self.init_c <= 0:
            raise ValueError("tolerances and init_c must be positive")


@dataclass
class BpState:
    """Edge messages indexed like ``F.rows``/``F.cols``, plus bookkeeping.

    ``ops`` counts elementwise arithmetic operations since construction.
    """

    a_msg: np.ndarray
    b_msg: np.ndarray
    c_msg: np.ndarray
    d_msg: np.ndarray
    x_hat: np.ndarray
    iteration: int = 0
    ops: int = 0


def init_state(F: SparseMeasurementMatrix, cfg: BpConfig = BpConfig()) -> BpState:
    """C = init_c and D = 0 on every edge; A, B and the estimate start at 0."""
    e = F.n_edges
    return BpState(a_msg=np.zeros(e), b_msg=np.zeros(e),
                   c_msg=np.full(e, float(cfg.init_c)), d_msg=np.zeros(e),
                   x_hat=np.zeros(F.n))


def cavity_sums(terms: np.ndarray, table: np.ndarray):
    """Group totals and leave-one-out sums of per-edge ``terms``.

    ``table`` is a padded neighbourhood table (pad index == E).  Returns
    ``(totals, loo)`` where ``totals[g]`` sums the edges of group g and
    ``loo[e]`` sums every other edge of e's group.
    """
    n_edges = terms.size
    identity = table.size == n_edges and bool(np.all(table.ravel() == np.arange(n_edges)))
    if identity:
        padded = terms.reshape(table.shape)
    else:
        padded = np.append(terms, 0.0)[table]
    width = padded.shape[1]
    if width == 0:
        return np.zeros(len(table)), np.zeros_like(terms)
    prefix = np.cumsum(padded, axis=1)
    suffix = np.cumsum(padded[:, ::-1], axis=1)[:, ::-1]
    loo_padded = np.empty_like(padded)
    loo_padded[:, 0] = suffix[:, 1] if width > 1 else 0.0
    if width > 1:
        loo_padded[:, -1] = prefix[:, -2]
        loo_padded[:, 1:-1] = prefix[:, :-2] + suffix[:, 2:]
    if identity:
        return prefix[:, -1], loo_padded.ravel()
    loo = np.empty(n_edges + 1)
    loo[table] = loo_padded
    return prefix[:, -1], loo[:-1]


def _check_dims(F, y):
    if not isinstance(F, SparseMeasurementMatrix):
        raise TypeError("BP needs a SparseMeasurementMatrix")
    if y.shape != (F.m,):
        raise ValueError(f"measurements have shape {y.shape}, matrix expects ({F.m},)")


def update_variable_to_check(state: BpState, F: SparseMeasurementMatrix, y,
                             cfg: BpConfig = BpConfig()) -> BpState:
    """A_{i->mu} = sum_{nu != mu} F^2/C,  B_{i->mu} = sum_{nu != mu} F (y - D)/C."""
    y = _values(y)
    _check_dims(F, y)
    if F.min_col_degree < 2:
        raise ValueError("a column with fewer than two entries has an empty cavity")
    inv_c = 1.0 / state.c_msg
    _, a_new = cavity_sums(F.vals ** 2 * inv_c, F.col_table)
    _, b_new = cavity_sums(F.vals * inv_c * (y[F.rows] - state.d_msg), F.col_table)
    if cfg.damping:
        b_new = (1.0 - cfg.damping) * b_new + cfg.damping * state.b_msg
        state.ops += 3 * F.n_edges
    state.a_msg, state.b_msg = a_new, b_new
    state.ops += 6 * F.n_edges + 2 * 4 * F.col_table.size
    return state


def update_check_to_variable(state: BpState, F: SparseMeasurementMatrix,
                             cfg: BpConfig = BpConfig()) -> BpState:
    """C_{mu->i} = sum_{l != i} F^2 f'(B;A),  D_{mu->i} = sum_{l != i} F f(B;A)."""
    a, b = state.a_msg, state.b_msg
    active = np.abs(b) > 1.0
    inv_a = np.where(active, 1.0 / np.where(active, a, 1.0), 0.0)
    _, c_new = cavity_sums(F.vals ** 2 * inv_a, F.row_table)
    _, d_new = cavity_sums(F.vals * (b - np.sign(b)) * inv_a, F.row_table)
    if cfg.damping:
        d_new = (1.0 - cfg.damping) * d_new + cfg.damping * state.d_msg
        state.ops += 3 * F.n_edges
    state.c_msg = np.maximum(c_new, cfg.epsilon_c)
    state.d_msg = d_new
    state.ops += 9 * F.n_edges + 2 * 4 * F.row_table.size
    return state


def _site_fields(state: BpState, F: SparseMeasurementMatrix, y):
    inv_c = 1.0 / state.c_msg
    a_site = np.bincount(F.cols, weights=F.vals ** 2 * inv_c, minlength=F.n)
    b_site = np.bincount(F.cols, weights=F.vals * inv_c * (y[F.rows] - state.d_msg),
                         minlength=F.n)
    state.ops += 8 * F.n_edges + 3 * F.n
    return a_site, b_site


def finalize(state: BpState, F: SparseMeasurementMatrix, y, truth=None,
             success_tol: float = SUCCESS_TOL, converged: bool = False) -> RecoveryResult:
    """Estimate from the full (non-cavity) fields A_i, B_i."""
    y = _values(y)
    _check_dims(F, y)
    a_site, b_site = _site_fields(state, F, y)
    state.x_hat = _st(b_site, a_site)
    resid = np.max(np.abs(y - F.matvec(state.x_hat)), initial=0.0)
    return score(state.x_hat, resid, state.iteration, converged, truth, success_tol)


def _is_converged(x_new, x_old, y, tol):
    if np.max(np.abs(x_new - x_old), initial=0.0) >= tol:
        return False
    # the all-zero estimate is infeasible unless y vanishes
    return bool(np.any(x_new) or not np.any(y))


def sweep(state: BpState, F: SparseMeasurementMatrix, y, cfg: BpConfig) -> np.ndarray:
    """One synchronous sweep; returns the refreshed estimate."""
    update_variable_to_check(state, F, y, cfg)
    update_check_to_variable(state, F, cfg)
    a_site, b_site = _site_fields(state, F, y)
    state.x_hat = _st(b_site, a_site)
    state.iteration += 1
    return state.x_hat


def run_bp(F: SparseMeasurementMatrix, y, cfg: BpConfig | None = None, truth=None,
           success_tol: float = SUCCESS_TOL, state: BpState | None = None,
           track_mse: bool = False) -> RecoveryResult:
    """Iterate sweeps until the estimate stops moving or ``max_iters`` is hit.

    Non-convergence is reported through ``RecoveryResult.converged``.
    """
    cfg = cfg or BpConfig()
    y = _values(y)
    _check_dims(F, y)
    state = state or init_state(F, cfg)
    x0 = None if truth is None else _values(truth)
    history = []
    converged = False
    x_old = state.x_hat.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        while state.iteration < cfg.max_iters:
            x_new = sweep(state, F, y, cfg)
            if not np.all(np.isfinite(x_new)):
                break  # diverged; reported as not converged
            if track_mse and x0 is not None:
                history.append(float(np.mean((x_new - x0) ** 2)))
            if _is_converged(x_new, x_old, y, cfg.convergence_tol):
                converged = True
                break
            x_old = x_new
    with np.errstate(over="ignore", invalid="ignore"):
        resid = np.max(np.abs(y - F.matvec(state.x_hat)), initial=0.0)
        return score(state.x_hat, resid, state.iteration, converged, truth, success_tol,
                     history)
