"""Exact l1 minimisation for tiny instances, plus an optimality certificate.

``min ||x||_1  s.t.  F x = y`` is a linear program, so when F (m x n) has
full row rank a minimiser exists among the basic solutions: x supported on
m linearly independent columns.  `brute_force_l1` enumerates every column
basis (feasible for n <= 16).  `certify_l1_optimality` checks the KKT
conditions of the Lagrangian ``lam^T (F x - y) + ||x||_1``:

    F x = y,   (F^T lam)_i = -sign(x_i) on the support,   |(F^T lam)_i| <= 1 off it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

__all__ = ["OracleResult", "brute_force_l1", "certify_l1_optimality", "certificate_details",
           "CONSISTENCY_TOL", "UNIQUENESS_GAP", "MAX_ORACLE_N"]

CONSISTENCY_TOL = 1e-9
UNIQUENESS_GAP = 1e-9
MAX_ORACLE_N = 16


@dataclass
class OracleResult:
    x_star: np.ndarray
    l1_value: float
    unique: bool
    certificate_ok: bool


def _dense(F):
    return np.asarray(getattr(F, "to_dense", lambda: F)(), dtype=float)


def brute_force_l1(F, y) -> OracleResult:
    """Minimum-l1 basic solution of ``F x = y`` by exhaustive enumeration.

    ``unique`` is False when another, distinct basic solution attains the
    same l1 value to within UNIQUENESS_GAP.
    """
    A = _dense(F)
    y = np.asarray(getattr(y, "values", y), dtype=float)
    m, n = A.shape
    if n > MAX_ORACLE_N:
        raise ValueError(f"brute force is limited to n <= {MAX_ORACLE_N}, got {n}")
    if y.shape != (m,):
        raise ValueError(f"measurements have shape {y.shape}, matrix expects ({m},)")
    if np.linalg.matrix_rank(A) < m:
        raise ValueError("F must have full row rank")

    subsets = np.array(list(itertools.combinations(range(n), m)), dtype=np.intp)
    blocks = A[:, subsets].transpose(1, 0, 2)  # (n_subsets, m, m)
    # singular bases are skipped; every vertex has at least one regular basis
    sv = np.linalg.svd(blocks, compute_uv=False)
    regular = sv[:, -1] > 1e-10 * np.maximum(sv[:, 0], 1.0)
    subsets, blocks = subsets[regular], blocks[regular]
    coeffs = np.linalg.solve(blocks, np.broadcast_to(y, (len(blocks), m))[..., None])[..., 0]
    cands = np.zeros((len(subsets), n))
    np.put_along_axis(cands, subsets, coeffs, axis=1)
    resid = np.max(np.abs(cands @ A.T - y), axis=1)
    cands = cands[resid <= CONSISTENCY_TOL * max(1.0, np.max(np.abs(y), initial=0.0))]
    if not len(cands):
        raise ValueError("no consistent basic solution; is y in the range of F?")

    l1 = np.sum(np.abs(cands), axis=1)
    best = int(np.argmin(l1))
    x_star = cands[best]
    rivals = cands[l1 <= l1[best] + UNIQUENESS_GAP]
    unique = bool(np.all(np.max(np.abs(rivals - x_star), axis=1) <= UNIQUENESS_GAP))
    ok = certify_l1_optimality(A, y, x_star)
    return OracleResult(x_star, float(l1[best]), unique, ok)


def certificate_details(F, y, x_hat, tol: float = 1e-6) -> dict:
    """Run the KKT checks and report each one.

    The multiplier is first taken as the least-squares solution of the
    support equations.  If that violates the off-support bound and the
    support is smaller than m, the remaining freedom is used to minimise the
    off-support maximum (a small LP).
    """
    A = _dense(F)
    y = np.asarray(getattr(y, "values", y), dtype=float)
    x = np.asarray(getattr(x_hat, "values", x_hat), dtype=float)
    support = np.abs(x) > tol
    out = {"support": np.flatnonzero(support)}
    out["primal_residual"] = float(np.max(np.abs(A @ x - y), initial=0.0))
    out["primal_ok"] = out["primal_residual"] <= tol * (1.0 + np.max(np.abs(y), initial=0.0))
    if not support.any():
        if np.any(y):
            out.update(ok=False, reason="empty support with nonzero measurements",
                       stationarity=np.inf, dual_max=np.inf, lam=None)
            return out
        out.update(ok=out["primal_ok"], reason="zero solution", stationarity=0.0,
                   dual_max=0.0, lam=np.zeros(A.shape[0]))
        return out

    signs = np.sign(x[support])
    As, Ao = A[:, support], A[:, ~support]
    lam = np.linalg.lstsq(As.T, -signs, rcond=None)[0]
    stat = float(np.max(np.abs(As.T @ lam + signs)))
    dual = float(np.max(np.abs(Ao.T @ lam), initial=0.0))
    if stat <= tol and dual > 1.0 + tol and support.sum() < A.shape[0]:
        lam, stat, dual = _minimax_multiplier(As, Ao, signs, lam, stat, dual)
    out.update(lam=lam, stationarity=stat, dual_max=dual)
    out["ok"] = bool(out["primal_ok"] and stat <= tol and dual <= 1.0 + tol)
    if not out["ok"]:
        reasons = []
        if not out["primal_ok"]:
            reasons.append("F x != y")
        if stat > tol:
            reasons.append("support stationarity violated")
        if dual > 1.0 + tol:
            reasons.append("off-support dual value exceeds 1")
        out["reason"] = "; ".join(reasons)
    return out


def _minimax_multiplier(As, Ao, signs, lam, stat, dual):
    m = As.shape[0]
    k = Ao.shape[1]
    # variables (lam, t): minimise t, As^T lam = -signs, |Ao^T lam| <= t
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_ub = np.block([[Ao.T, -np.ones((k, 1))], [-Ao.T, -np.ones((k, 1))]])
    A_eq = np.hstack([As.T, np.zeros((As.shape[1], 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(2 * k), A_eq=A_eq, b_eq=-signs,
                  bounds=[(None, None)] * (m + 1), method="highs")
    if res.status != 0:
        return lam, stat, dual
    lam2 = res.x[:m]
    stat2 = float(np.max(np.abs(As.T @ lam2 + signs)))
    dual2 = float(np.max(np.abs(Ao.T @ lam2), initial=0.0))
    if dual2 < dual:
        return lam2, stat2, dual2
    return lam, stat, dual


def certify_l1_optimality(F, y, x_hat, tol: float = 1e-6) -> bool:
    return certificate_details(F, y, x_hat, tol)["ok"]
