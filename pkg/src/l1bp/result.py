from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

SUCCESS_TOL = 1e-8


@dataclass
class RecoveryResult:
    """Outcome of one solver run.

    ``success`` is only set when the true signal was supplied, and is true
    exactly when ``mse_vs_truth < success_tol``.
    """

    x_hat: np.ndarray
    iterations: int
    converged: bool
    residual_inf: float
    mse_vs_truth: Optional[float] = None
    success: Optional[bool] = None
    success_tol: float = SUCCESS_TOL
    mse_history: list = field(default_factory=list, repr=False)


def score(x_hat, residual_inf, iterations, converged, truth=None,
          success_tol=SUCCESS_TOL, mse_history=None) -> RecoveryResult:
    res = RecoveryResult(np.asarray(x_hat), iterations, converged, float(residual_inf),
                         success_tol=success_tol, mse_history=mse_history or [])
    if truth is not None:
        x0 = np.asarray(getattr(truth, "values", truth), dtype=float)
        res.mse_vs_truth = float(np.mean((res.x_hat - x0) ** 2))
        res.success = res.mse_vs_truth < success_tol
    return res
