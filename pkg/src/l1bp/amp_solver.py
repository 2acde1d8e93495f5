"""Dense-matrix limit of the message-passing solver (an AMP-type iteration).

With dense F of variance 1/N all cavity quantities collapse onto two scalars,
``C = mean_i f'(B_i; A)`` and ``A = alpha / C``, and the messages onto a
residual ``z`` with a memory (Onsager) term:

    z   <- y - F x + (deriv_avg / c_used) * z
    B   <- (F^T z) / C + (alpha / C) * x
    x   <- f(B; A)
    C   <- max(mean_i f'(B_i; A), c_floor);  A <- alpha / C

``deriv_avg`` and ``c_used`` are the derivative average of the previous sweep
and the C that produced the A it was evaluated with, so their ratio is the
fraction of active coordinates over alpha.  The threshold 1/A is never set by
hand: it follows from C.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance_gen import DenseMeasurementMatrix, _values
from .kernel import _st
from .result import SUCCESS_TOL, RecoveryResult, score

__all__ = ["AmpConfig", "AmpState", "init_amp_state", "amp_sweep", "run_amp"]


@dataclass(frozen=True)
class AmpConfig:
    max_iters: int = 10000
    convergence_tol: float = 1e-10
    c_floor: float = 1e-12
    c_init: float = 1.0
    damping: float = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.convergence_tol <= 0 or self.c_floor <= 0 or self.c_init <= 0:
            raise ValueError("tolerances and c_init must be positive")


@dataclass
class AmpState:
    x_hat: np.ndarray
    z: np.ndarray
    b_field: np.ndarray
    c_scalar: float
    a_scalar: float
    alpha: float
    deriv_avg: float = 0.0
    c_used: float = 1.0
    iter: int = 0
    ops: int = 0

    @property
    def onsager(self) -> float:
        """Coefficient of the memory term in the next residual update."""
        return self.deriv_avg / self.c_used


def init_amp_state(F: DenseMeasurementMatrix, y, cfg: AmpConfig = AmpConfig()) -> AmpState:
    """x = 0, z = y, C = c_init and no memory term for the first sweep."""
    y = _values(y)
    alpha = F.m / F.n
    c = float(cfg.c_init)
    return AmpState(x_hat=np.zeros(F.n), z=y.copy(), b_field=np.zeros(F.n),
                    c_scalar=c, a_scalar=alpha / c, alpha=alpha,
                    deriv_avg=0.0, c_used=c)


def amp_sweep(state: AmpState, F: DenseMeasurementMatrix, y,
              cfg: AmpConfig = AmpConfig()) -> AmpState:
    y = _values(y)
    Fv = F.values
    c, a = state.c_scalar, state.a_scalar
    z = y - Fv @ state.x_hat + state.onsager * state.z
    b = (Fv.T @ z) / c + (state.alpha / c) * state.x_hat
    x = _st(b, a)
    deriv_avg = np.count_nonzero(np.abs(b) > 1.0) / (a * F.n)
    c_new = max(deriv_avg, cfg.c_floor)
    if cfg.damping:
        c_new = (1.0 - cfg.damping) * c_new + cfg.damping * c
    state.z, state.b_field, state.x_hat = z, b, x
    state.deriv_avg, state.c_used = deriv_avg, c
    state.c_scalar, state.a_scalar = c_new, state.alpha / c_new
    state.iter += 1
    state.ops += 4 * F.m * F.n + 3 * F.m + 8 * F.n
    return state


def run_amp(F: DenseMeasurementMatrix, y, cfg: AmpConfig | None = None, truth=None,
            success_tol: float = SUCCESS_TOL, state: AmpState | None = None,
            track_mse: bool = False) -> RecoveryResult:
    """Iterate `amp_sweep` until max |dx| < convergence_tol or max_iters."""
    cfg = cfg or AmpConfig()
    if not isinstance(F, DenseMeasurementMatrix):
        raise TypeError("AMP needs a DenseMeasurementMatrix")
    y = _values(y)
    if y.shape != (F.m,):
        raise ValueError(f"measurements have shape {y.shape}, matrix expects ({F.m},)")
    state = state or init_amp_state(F, y, cfg)
    x0 = None if truth is None else _values(truth)
    history = []
    converged = False
    y_nonzero = bool(np.any(y))
    with np.errstate(over="ignore", invalid="ignore"):
        while state.iter < cfg.max_iters:
            x_old = state.x_hat
            amp_sweep(state, F, y, cfg)
            if not np.all(np.isfinite(state.x_hat)):
                break  # diverged; reported as not converged
            if track_mse and x0 is not None:
                history.append(float(np.mean((state.x_hat - x0) ** 2)))
            if np.max(np.abs(state.x_hat - x_old), initial=0.0) < cfg.convergence_tol:
                # the all-zero estimate is infeasible unless y vanishes
                if np.any(state.x_hat) or not y_nonzero:
                    converged = True
                    break
    with np.errstate(over="ignore", invalid="ignore"):
        resid = np.max(np.abs(y - F.matvec(state.x_hat)), initial=0.0)
        return score(state.x_hat, resid, state.iter, converged, truth, success_tol, history)
