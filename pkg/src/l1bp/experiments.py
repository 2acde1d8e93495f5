"""Seeded Monte-Carlo sweeps over (n, rho) and their CSV / chart output.

Every trial derives its own random stream from a hash of
``(base_seed, n, rho, trial)`` so results do not depend on execution order,
worker count, or which other grid points are in the sweep.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .amp_solver import AmpConfig, run_amp
from .bp_solver import (BpConfig, init_state, run_bp, update_check_to_variable,
                        update_variable_to_check)
from .instance_gen import (EnsembleSpec, RngSeed, SparseMeasurementMatrix, make_instance,
                           pair_regular_sockets)
from .kernel import _st
from .result import SUCCESS_TOL
from .state_evolution import QuadratureSpec, find_threshold, se_trajectory

__all__ = ["SweepConfig", "SweepRecord", "AggregateRow", "SweepTable", "rho_grid",
           "trial_seed", "run_trial", "run_sweep", "run_density_evolution",
           "density_evolution_trial", "run_se", "emit_csv", "emit_chart",
           "load_aggregate_csv", "load_records_csv", "RECORD_HEADER", "AGGREGATE_HEADER"]

SOLVERS = ("bp", "amp", "de")
DEFAULT_MAX_ITERS = {"bp": 1000, "de": 1000, "amp": 10000}
RECORD_HEADER = ("solver,n,m,alpha,rho,j,k,trial,seed,iterations,converged,mse,"
                 "success,wall_ms").split(",")
AGGREGATE_HEADER = "solver,n,alpha,rho,trials,successes,p_success,stderr".split(",")


def rho_grid(rho_min: float, rho_max: float, step: float) -> tuple:
    """Inclusive arithmetic grid, rounded to 12 decimals to kill drift."""
    if step <= 0:
        raise ValueError("rho step must be positive")
    if rho_max < rho_min:
        raise ValueError("rho_max must be >= rho_min")
    count = int(math.floor((rho_max - rho_min) / step + 1e-9)) + 1
    return tuple(round(rho_min + i * step, 12) for i in range(count))


@dataclass(frozen=True)
class SweepConfig:
    """One Monte-Carlo experiment.

    For the sparse solvers (``bp``, ``de``) the ratio M/N is fixed by the
    degrees, ``alpha == j / k``; ``alpha`` must agree with it.
    """

    solver: str
    n_list: tuple
    rhos: tuple
    alpha: float = 0.5
    j: int = 10
    k: int = 20
    trials: int = 100
    base_seed: int = 0
    max_iters: int | None = None
    success_tol: float = SUCCESS_TOL
    tol: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "rhos", tuple(float(r) for r in self.rhos))
        if not self.n_list or not self.rhos:
            raise ValueError("the (n, rho) grid is empty")
        if any(not 0.0 <= r <= 1.0 for r in self.rhos):
            raise ValueError("rho values must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.success_tol <= 0 or self.tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.sparse and abs(self.alpha - self.j / self.k) > 1e-12:
            raise ValueError(f"alpha={self.alpha} disagrees with j/k={self.j}/{self.k}")
        for n in self.n_list:
            self.spec(n)  # raises on bad dimensions

    @property
    def sparse(self) -> bool:
        return self.solver in ("bp", "de")

    @property
    def iters(self) -> int:
        return self.max_iters or DEFAULT_MAX_ITERS[self.solver]

    def spec(self, n: int) -> EnsembleSpec:
        if self.sparse:
            return EnsembleSpec.regular(n, self.j, self.k)
        return EnsembleSpec.dense(n, self.alpha)


@dataclass(frozen=True)
class SweepRecord:
    """One trial.  ``wall_ms`` is excluded from equality (timing is not reproducible)."""

    solver: str
    n: int
    m: int
    alpha: float
    rho: float
    j: int
    k: int
    trial: int
    seed: str
    iterations: int
    converged: bool
    mse: float
    success: bool
    wall_ms: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class AggregateRow:
    solver: str
    n: int
    alpha: float
    rho: float
    trials: int
    successes: int
    p_success: float
    stderr: float


@dataclass
class SweepTable:
    records: list
    aggregates: list

    @classmethod
    def from_records(cls, records) -> "SweepTable":
        records = sorted(records, key=lambda r: (r.solver, r.n, r.rho, r.trial))
        return cls(records, aggregate(records))


def aggregate(records) -> list:
    """Success counts per (solver, n, rho); independent of record order."""
    groups: dict = {}
    for r in records:
        key = (r.solver, r.n, r.rho)
        alpha, total, hits = groups.get(key, (r.alpha, 0, 0))
        groups[key] = (alpha, total + 1, hits + int(r.success))
    out = []
    for (solver, n, rho), (alpha, total, hits) in sorted(groups.items()):
        p = hits / total
        out.append(AggregateRow(solver, n, alpha, rho, total, hits, p,
                                math.sqrt(p * (1.0 - p) / total)))
    return out


def trial_seed(base_seed: int, n: int, rho: float, trial: int) -> RngSeed:
    """(seed, stream) from BLAKE2b-128 of the little-endian packed
    ``(base_seed: u64, n: u64, rho: f64 bits, trial: u64)``."""
    payload = struct.pack("<QQdQ", base_seed % 2**64, n, float(rho), trial)
    digest = hashlib.blake2b(payload, digest_size=16).digest()
    return RngSeed(int.from_bytes(digest[:8], "little"), int.from_bytes(digest[8:], "little"))


def density_evolution_trial(spec: EnsembleSpec, rho: float, seed: RngSeed,
                            cfg: BpConfig = BpConfig()):
    """BP with the graph re-drawn before every sweep.

    Each sweep re-pairs the sockets (degrees preserved), draws fresh edge
    values, recomputes y = F x0, then updates check-to-variable messages from
    the carried variable-to-check messages and refreshes the latter.  Edge
    messages stay attached to their variable socket.  Returns
    ``(iterations, converged, mse)``.
    """
    F, x0, y = make_instance(spec, rho, seed)
    x0 = x0.values
    j, k, n, m = spec.kind.j, spec.kind.k, spec.n, spec.m
    rng = seed.generator(1)
    state = init_state(F, cfg)
    update_variable_to_check(state, F, y.values, cfg)
    cols = F.cols
    x_old = np.zeros(n)
    x = x_old
    converged = False
    it = 0
    y_nonzero = bool(np.any(y.values))
    with np.errstate(over="ignore", invalid="ignore"):
        while it < cfg.max_iters:
            rows = pair_regular_sockets(n, m, j, k, rng)
            F = SparseMeasurementMatrix._trusted(n, m, rows, cols,
                                                 rng.standard_normal(rows.size))
            yv = F.matvec(x0)
            update_check_to_variable(state, F, cfg)
            update_variable_to_check(state, F, yv, cfg)
            inv_c = 1.0 / state.c_msg
            a_site = np.bincount(cols, weights=F.vals ** 2 * inv_c, minlength=n)
            b_site = np.bincount(cols, weights=F.vals * inv_c * (yv[rows] - state.d_msg),
                                 minlength=n)
            x = _st(b_site, a_site)
            it += 1
            if not np.all(np.isfinite(x)):
                break
            if np.max(np.abs(x - x_old), initial=0.0) < cfg.convergence_tol and (
                    np.any(x) or not y_nonzero):
                converged = True
                break
            x_old = x
        mse = float(np.mean((x - x0) ** 2))
    if not math.isfinite(mse):
        mse = math.inf
    return it, converged, mse


def run_trial(cfg: SweepConfig, n: int, rho: float, trial: int) -> SweepRecord:
    """Generate one instance, solve it, and record the outcome.

    Non-convergence and divergence are recorded, never raised.
    """
    spec = cfg.spec(n)
    seed = trial_seed(cfg.base_seed, n, rho, trial)
    t0 = time.perf_counter()
    if cfg.solver == "de":
        iters, converged, mse = density_evolution_trial(
            spec, rho, seed, BpConfig(max_iters=cfg.iters, convergence_tol=cfg.tol))
    else:
        F, x0, y = make_instance(spec, rho, seed)
        if cfg.solver == "bp":
            res = run_bp(F, y, BpConfig(max_iters=cfg.iters, convergence_tol=cfg.tol),
                         truth=x0, success_tol=cfg.success_tol)
        else:
            res = run_amp(F, y, AmpConfig(max_iters=cfg.iters, convergence_tol=cfg.tol),
                          truth=x0, success_tol=cfg.success_tol)
        iters, converged = res.iterations, res.converged
        mse = res.mse_vs_truth if math.isfinite(res.mse_vs_truth) else math.inf
    wall = 1e3 * (time.perf_counter() - t0)
    j, k = (cfg.j, cfg.k) if cfg.sparse else (0, 0)
    return SweepRecord(cfg.solver, n, spec.m, spec.alpha, rho, j, k, trial,
                       f"{seed.seed}:{seed.stream}", iters, converged, mse,
                       mse < cfg.success_tol, wall)


def _run_task(args):
    return run_trial(*args)


def run_sweep(cfg: SweepConfig, progress=None) -> SweepTable:
    """All trials of the (n, rho) grid, optionally on a process pool.

    ``progress``, if given, is called with each finished record.
    """
    tasks = [(cfg, n, rho, t) for n in cfg.n_list for rho in cfg.rhos
             for t in range(cfg.trials)]
    records = []
    if cfg.threads == 1:
        for task in tasks:
            records.append(_run_task(task))
            if progress:
                progress(records[-1])
    else:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            for rec in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * cfg.threads))):
                records.append(rec)
                if progress:
                    progress(rec)
    return SweepTable.from_records(records)


def run_density_evolution(cfg: SweepConfig, progress=None) -> SweepTable:
    if not cfg.sparse:
        raise ValueError("density evolution needs a sparse (j, k) ensemble")
    if cfg.solver != "de":
        cfg = replace(cfg, solver="de")
    return run_sweep(cfg, progress)


def run_se(alpha: float, quad: QuadratureSpec = QuadratureSpec(), bisect_tol: float = 1e-4,
           trajectory_rho: float | None = None, iters: int = 50, c_init: float = 1.0):
    """Threshold rho_c(alpha) and, if ``trajectory_rho`` is given, the MSE
    trajectory there as a list of ``(t, mse, c)`` rows."""
    rho_c = find_threshold(alpha, quad, bisect_tol)
    traj = None
    if trajectory_rho is not None:
        states = se_trajectory(trajectory_rho, alpha, iters, quad, c_init)
        traj = [(t + 1, s.mse, s.c) for t, s in enumerate(states)]
    return rho_c, traj


# -- output --------------------------------------------------------------------

def _cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path, header, rows):
    rows = list(rows)
    if not rows:
        raise ValueError("refusing to write an empty table")
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    os.replace(tmp, path)


def emit_csv(table: SweepTable, path, which: str = "aggregate"):
    """Write the aggregate (default) or per-trial (``which="records"``) CSV."""
    if which == "aggregate":
        _write_rows(path, AGGREGATE_HEADER,
                    ([getattr(a, h) for h in AGGREGATE_HEADER] for a in table.aggregates))
    elif which == "records":
        _write_rows(path, RECORD_HEADER,
                    ([getattr(r, h) for h in RECORD_HEADER] for r in table.records))
    else:
        raise ValueError("which must be 'aggregate' or 'records'")


def write_trajectory_csv(rows, path):
    _write_rows(path, ["t", "mse", "c"], rows)


def _bool(s):
    return s in ("1", "True", "true")


def load_aggregate_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != AGGREGATE_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [AggregateRow(r["solver"], int(r["n"]), float(r["alpha"]), float(r["rho"]),
                             int(r["trials"]), int(r["successes"]), float(r["p_success"]),
                             float(r["stderr"])) for r in reader]


def load_records_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [SweepRecord(r["solver"], int(r["n"]), int(r["m"]), float(r["alpha"]),
                            float(r["rho"]), int(r["j"]), int(r["k"]), int(r["trial"]),
                            r["seed"], int(r["iterations"]), _bool(r["converged"]),
                            float(r["mse"]), _bool(r["success"]), float(r["wall_ms"]))
                for r in reader]


def emit_chart(table: SweepTable, path):
    """SVG of success probability against rho, one line per n."""
    if not table.aggregates:
        raise ValueError("refusing to plot an empty table")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for solver, n in sorted({(a.solver, a.n) for a in table.aggregates}):
        pts = [a for a in table.aggregates if a.solver == solver and a.n == n]
        ax.errorbar([a.rho for a in pts], [a.p_success for a in pts],
                    yerr=[a.stderr for a in pts], marker="o", ms=3, capsize=2,
                    label=f"{solver} N={n}")
    ax.set_xlabel("rho")
    ax.set_ylabel("success probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)
