"""Macroscopic (state-evolution) description of the dense-limit solver.

For N, M -> infinity at fixed alpha = M/N the estimate behaves like a soft
threshold of a Gaussian-corrupted copy of the signal,

    x_hat = eta(x0 + sigma * z; theta),   sigma**2 = E / alpha,  theta = C / alpha,

where E = Q - 2m + Q0 is the mean squared error and C solves

    P(|alpha * x0 + sqrt(alpha * E) * z| > C) = alpha.

Iterating E -> E' tracks the solver's MSE.  Perfect recovery means E flows
to 0; :func:`find_threshold` bisects on rho for the edge of that basin.

Signals are Bernoulli-Gaussian (zero with probability 1 - rho, standard
normal otherwise), so Q0 = rho.  The zero component is integrated over z in
closed form.  The Gaussian component is integrated over x0 by Gauss-Legendre
quadrature (or in closed form with ``method="closed"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

__all__ = [
    "QuadratureSpec", "MacroState", "initial_state", "active_probability", "solve_c",
    "se_update", "se_update_empirical", "se_trajectory", "recovers", "find_threshold",
    "soft_threshold_gaussian_moments", "soft_threshold_gaussian_moments_quad",
    "RECOVERED_MSE", "STALLED_MSE",
]

RECOVERED_MSE = 1e-10
STALLED_MSE = 1e-6
_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureSpec:
    nodes: int = 201
    cutoff: float = 10.0
    tol: float = 1e-12
    max_iters: int = 10_000
    method: str = "quadrature"
    lagged: bool = False

    def __post_init__(self):
        if self.nodes < 3 or self.cutoff <= 0 or self.tol <= 0 or self.max_iters < 1:
            raise ValueError("invalid quadrature settings")
        if self.method not in ("quadrature", "closed"):
            raise ValueError("method must be 'quadrature' or 'closed'")


@dataclass(frozen=True)
class MacroState:
    """Overlaps m = <x0 x_hat>, q = <x_hat^2> and the scalar C.

    ``mse`` equals ``q - 2m + q0`` but is accumulated directly so that it keeps
    full relative precision when it is tiny.  In lagged mode ``c`` is the value
    the next update will use; otherwise it is the root used by the last one.
    ``q0`` defaults to ``rho`` (the standard-normal prior).
    """

    m: float
    q: float
    c: float
    rho: float
    alpha: float
    mse: float
    q0: float = None

    def __post_init__(self):
        if self.q0 is None:
            object.__setattr__(self, "q0", self.rho)


def initial_state(rho: float, alpha: float, c: float = 1.0, signal=None) -> MacroState:
    """Zero estimate: m = q = 0, so mse = q0 (= rho for the Gaussian prior).

    With ``signal`` given, rho and q0 are taken from its empirical values.
    """
    if signal is not None:
        x0 = np.asarray(getattr(signal, "values", signal), dtype=float)
        rho, q0 = float(np.mean(x0 != 0)), float(np.mean(x0 ** 2))
        _check_params(rho, alpha)
        return MacroState(0.0, 0.0, c, rho, alpha, q0, q0)
    _check_params(rho, alpha)
    return MacroState(0.0, 0.0, c, rho, alpha, rho)


def _check_params(rho, alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")


def _tail(x):
    return 0.5 * math.erfc(x / _SQRT2)


def active_probability(c: float, mse: float, rho: float, alpha: float) -> float:
    """P(|alpha*x0 + sqrt(alpha*mse)*z| > c) under the Bernoulli-Gaussian prior."""
    p = 0.0
    if rho > 0:
        p += rho * 2.0 * _tail(c / math.sqrt(alpha * alpha + alpha * mse))
    if mse > 0:
        p += (1.0 - rho) * 2.0 * _tail(c / math.sqrt(alpha * mse))
    return p


def solve_c(mse: float, rho: float, alpha: float) -> float:
    """Root C > 0 of ``active_probability(C, mse, rho, alpha) == alpha``.

    Returns ``inf`` when mse == 0 and rho == 0 (nothing is ever active), and
    0.0 when mse == 0 and rho < alpha (the active fraction cannot reach alpha
    for any C > 0, so C collapses onto 0).
    """
    _check_params(rho, alpha)
    if mse < 0:
        raise ValueError("mse must be non-negative")
    if mse == 0.0:
        if rho == 0.0:
            return math.inf
        if rho <= alpha:
            return 0.0

    def resid(c):
        return active_probability(c, mse, rho, alpha) - alpha

    hi = math.sqrt(alpha * alpha + alpha * mse)
    while resid(hi) > 0:
        hi *= 2.0
    return brentq(resid, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


# -- soft-threshold moments under Gaussian input ------------------------------

def _phi(x):
    return np.exp(-0.5 * np.square(x)) * _INV_SQRT2PI


def soft_threshold_gaussian_moments(mu, sigma, theta):
    """Closed-form moments of eta(X; theta) for X ~ N(mu, sigma**2).

    Returns ``(E[eta], E[eta**2], E[(eta - mu)**2])``; broadcasts over ``mu``.
    ``eta`` is the unit-slope soft threshold sign(x) * max(|x| - theta, 0).
    """
    mu = np.asarray(mu, dtype=float)
    if sigma == 0:
        eta = np.sign(mu) * np.maximum(np.abs(mu) - theta, 0.0)
        return eta, eta ** 2, (eta - mu) ** 2
    hi = (theta - mu) / sigma  # z above hi -> upper branch
    lo = (-theta - mu) / sigma  # z below lo -> lower branch
    up_p, lo_p = ndtr(-hi), ndtr(lo)
    up_f, lo_f = _phi(hi), _phi(lo)
    # E[(X - theta)_+] and E[(-X - theta)_+]
    e_up = (mu - theta) * up_p + sigma * up_f
    e_lo = (-mu - theta) * lo_p + sigma * lo_f
    d_up, d_lo = mu - theta, -mu - theta
    s2 = sigma * sigma
    sq_up = (d_up ** 2 + s2) * up_p + d_up * sigma * up_f
    sq_lo = (d_lo ** 2 + s2) * lo_p + d_lo * sigma * lo_f
    mid = np.clip(ndtr(hi) - lo_p, 0.0, 1.0)
    err = (s2 * (hi * up_f + up_p) - 2 * sigma * theta * up_f + theta ** 2 * up_p
           + s2 * (lo_p - lo * lo_f) - 2 * sigma * theta * lo_f + theta ** 2 * lo_p
           + mu ** 2 * mid)
    return e_up - e_lo, sq_up + sq_lo, err


@lru_cache(maxsize=16)
def _leggauss(nodes):
    return np.polynomial.legendre.leggauss(nodes)


def _gl_panels(breaks, nodes):
    """Gauss-Legendre nodes/weights on consecutive panels between ``breaks``."""
    t, w = _leggauss(nodes)
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        xs.append(0.5 * (b - a) * t + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _gauss_nodes(cutoff, kinks, nodes):
    """Nodes/weights for E[g(u)], u ~ N(0,1), split at ``kinks`` inside the cutoff."""
    inner = sorted(k for k in kinks if -cutoff < k < cutoff)
    breaks = [-cutoff] + inner + [cutoff]
    per_panel = max(nodes // (len(breaks) - 1), 3)
    u, w = _gl_panels(breaks, per_panel)
    return u, w * _phi(u)


def soft_threshold_gaussian_moments_quad(mu, sigma, theta, quad: QuadratureSpec = QuadratureSpec()):
    """Quadrature over z of the same moments as `soft_threshold_gaussian_moments`."""
    mu = float(mu)
    kinks = [(-theta - mu) / sigma, (theta - mu) / sigma]
    z, w = _gauss_nodes(quad.cutoff, kinks, quad.nodes)
    x = mu + sigma * z
    eta = np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)
    return w @ eta, w @ eta ** 2, w @ (eta - mu) ** 2


def _zero_component(sigma, theta):
    """E[eta(sigma*z; theta)**2], the squared error when x0 = 0."""
    k = theta / sigma
    return 2.0 * ((sigma * sigma + theta * theta) * _tail(k)
                  - theta * sigma * _INV_SQRT2PI * math.exp(-0.5 * k * k))


def _gaussian_component(sigma, theta, quad):
    """(m, q, err) averaged over x0 ~ N(0, 1)."""
    if quad.method == "closed":
        s = math.sqrt(1.0 + sigma * sigma)
        k = theta / s
        m = 2.0 * _tail(k)
        q = 2.0 * ((s * s + theta * theta) * _tail(k) - theta * s * _INV_SQRT2PI * math.exp(-0.5 * k * k))
        return m, q, max(q - 2.0 * m + 1.0, 0.0)
    u, w = _gauss_nodes(quad.cutoff, [-theta, theta], quad.nodes)
    mean, sq, err = soft_threshold_gaussian_moments(u, sigma, theta)
    return float(w @ (u * mean)), float(w @ sq), float(w @ err)


def se_update(s: MacroState, quad: QuadratureSpec = QuadratureSpec()) -> MacroState:
    """One step E -> E' of the macroscopic recursion."""
    rho, alpha = s.rho, s.alpha
    if s.mse <= 0.0:
        # perfect recovery is absorbing
        return replace(s, m=rho, q=rho, mse=0.0, c=solve_c(0.0, rho, alpha))
    c = s.c if quad.lagged else solve_c(s.mse, rho, alpha)
    sigma = math.sqrt(s.mse / alpha)
    theta = c / alpha
    q_zero = _zero_component(sigma, theta)
    if rho > 0:
        m_g, q_g, err_g = _gaussian_component(sigma, theta, quad)
    else:
        m_g = q_g = err_g = 0.0
    m = rho * m_g
    q = (1.0 - rho) * q_zero + rho * q_g
    mse = max((1.0 - rho) * q_zero + rho * err_g, 0.0)
    if quad.lagged:
        c = max(c / alpha * active_probability(c, s.mse, rho, alpha), 1e-12)
    return MacroState(m, q, c, rho, alpha, mse)


def se_update_empirical(s: MacroState, signal, lagged: bool = True) -> MacroState:
    """`se_update` with the prior replaced by the empirical law of ``signal``.

    Averages over the actual entries of one instance's signal instead of the
    Bernoulli-Gaussian prior, which removes signal-to-signal fluctuations when
    the recursion is compared with a single finite-N run.
    """
    x0 = np.asarray(getattr(signal, "values", signal), dtype=float)
    alpha = s.alpha
    if s.mse <= 0.0:
        return replace(s, m=s.q0, q=s.q0, mse=0.0)

    def p_active(c):
        scale = math.sqrt(alpha * s.mse)
        return float(np.mean(ndtr((-c - alpha * x0) / scale) + ndtr((alpha * x0 - c) / scale)))

    if lagged:
        c = s.c
    else:
        hi = alpha * (np.max(np.abs(x0)) + 10 * math.sqrt(s.mse / alpha)) + 1.0
        c = brentq(lambda v: p_active(v) - alpha, 0.0, hi, xtol=1e-15)
    sigma = math.sqrt(s.mse / alpha)
    mean, sq, err = soft_threshold_gaussian_moments(x0, sigma, c / alpha)
    m, q, mse = float(np.mean(x0 * mean)), float(np.mean(sq)), float(np.mean(err))
    if lagged:
        c = max(c / alpha * p_active(c), 1e-12)
    return MacroState(m, q, c, s.rho, alpha, mse, s.q0)


def se_trajectory(rho: float, alpha: float, iters: int,
                  quad: QuadratureSpec = QuadratureSpec(), c_init: float = 1.0,
                  signal=None):
    """States after 1..iters updates from the zero estimate.

    Passing ``signal`` runs `se_update_empirical` (lagged or not per ``quad``).
    """
    s = initial_state(rho, alpha, c_init, signal)
    out = []
    for _ in range(iters):
        if signal is None:
            s = se_update(s, quad)
        else:
            s = se_update_empirical(s, signal, quad.lagged)
        out.append(s)
    return out


def recovers(rho: float, alpha: float, quad: QuadratureSpec = QuadratureSpec()) -> bool:
    """True if the recursion started at mse = rho reaches mse < RECOVERED_MSE.

    Runs that stall above STALLED_MSE, or are still above RECOVERED_MSE at
    ``quad.max_iters``, count as failures.
    """
    s = initial_state(rho, alpha)
    for _ in range(quad.max_iters):
        if s.mse < RECOVERED_MSE:
            return True
        new = se_update(s, quad)
        if new.mse > STALLED_MSE and abs(new.mse - s.mse) <= quad.tol * s.mse:
            return False
        s = new
    return s.mse < RECOVERED_MSE


def find_threshold(alpha: float, quad: QuadratureSpec = QuadratureSpec(),
                   bisect_tol: float = 1e-4) -> float:
    """Largest recoverable signal density rho_c(alpha), by bisection on rho."""
    _check_params(0.0, alpha)
    lo, hi = 0.0, alpha
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if recovers(mid, alpha, quad):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
