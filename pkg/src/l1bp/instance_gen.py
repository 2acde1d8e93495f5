"""Random problem instances: measurement matrices, sparse signals, measurements.

Two matrix ensembles are supported:

* ``RegularSparse(j, k)`` -- exactly ``j`` nonzeros in every column and ``k``
  in every row, positions drawn from the configuration model, values i.i.d.
  N(0, 1);
* ``DenseGaussian()`` -- every entry i.i.d. N(0, 1/N).

Signals are Bernoulli-Gaussian: each entry is zero with probability
``1 - rho`` and standard normal otherwise.  Everything is a pure function of
an :class:`RngSeed`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

__all__ = [
    "RegularSparse", "DenseGaussian", "EnsembleSpec", "RngSeed",
    "SparseMeasurementMatrix", "DenseMeasurementMatrix", "SignalVector",
    "MeasurementVector", "Instance", "InstanceFormatError", "GraphConstructionError",
    "gen_regular_sparse_matrix", "gen_dense_matrix", "gen_signal", "measure",
    "make_instance", "save_instance", "load_instance", "pair_regular_sockets",
]

MAX_PAIRING_ATTEMPTS = 100


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed."""


class GraphConstructionError(RuntimeError):
    """Raised when no simple regular bipartite graph was found in budget."""


@dataclass(frozen=True)
class RegularSparse:
    j: int
    k: int


@dataclass(frozen=True)
class DenseGaussian:
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    """Problem dimensions plus the matrix ensemble."""

    n: int
    m: int
    kind: Union[RegularSparse, DenseGaussian] = field(default_factory=DenseGaussian)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.m >= self.n:
            raise ValueError(f"need m < n, got m={self.m}, n={self.n}")
        if isinstance(self.kind, RegularSparse):
            j, k = self.kind.j, self.kind.k
            if j < 2 or k < 2:
                raise ValueError("column and row degrees must be >= 2")
            if j > self.m or k > self.n:
                raise ValueError("degrees exceed the matrix dimensions")
            if self.n * j != self.m * k:
                raise ValueError(
                    f"inconsistent edge count: n*j={self.n * j} != m*k={self.m * k}")

    @property
    def alpha(self) -> float:
        return self.m / self.n

    @classmethod
    def regular(cls, n: int, j: int, k: int) -> "EnsembleSpec":
        """Sparse spec with ``m`` fixed by ``n*j == m*k``."""
        if (n * j) % k:
            raise ValueError(f"n*j={n * j} is not divisible by k={k}")
        return cls(n, n * j // k, RegularSparse(j, k))

    @classmethod
    def dense(cls, n: int, alpha: float) -> "EnsembleSpec":
        return cls(n, int(round(alpha * n)), DenseGaussian())


@dataclass(frozen=True)
class RngSeed:
    """A (seed, stream) pair naming an independent random stream.

    Streams are derived through :class:`numpy.random.SeedSequence` spawn keys,
    so different ``stream`` values (and sub-keys) give independent PCG64
    generators.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        for v in (self.seed, self.stream):
            if not 0 <= int(v) < 2**64:
                raise ValueError("seed and stream must be unsigned 64-bit integers")

    def generator(self, *subkey: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),) + subkey)
        return np.random.default_rng(ss)


def _as_seed(seed) -> RngSeed:
    return seed if isinstance(seed, RngSeed) else RngSeed(int(seed))


def _padded_table(groups: np.ndarray, ngroups: int, pad: int) -> np.ndarray:
    """Table whose row g lists the edge indices belonging to group g.

    Short rows are padded with ``pad``; edge order inside a group is ascending.
    """
    order = np.argsort(groups, kind="stable")
    counts = np.bincount(groups, minlength=ngroups)
    width = int(counts.max()) if counts.size and len(groups) else 0
    table = np.full((ngroups, width), pad, dtype=np.intp)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    slot = np.arange(len(groups)) - np.repeat(starts, counts)
    table[groups[order], slot] = order
    return table


@dataclass(frozen=True, eq=False)
class SparseMeasurementMatrix:
    """Sparse ``m x n`` matrix stored as an edge list.

    Edge ``e`` joins row ``rows[e]`` to column ``cols[e]`` with value
    ``vals[e]``.  ``col_table`` / ``row_table`` give padded per-column and
    per-row edge indices (pad value ``n_edges``) for neighbourhood sweeps.
    """

    n: int
    m: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        cols = np.asarray(self.cols, dtype=np.intp)
        vals = np.asarray(self.vals, dtype=float)
        if not rows.shape == cols.shape == vals.shape or rows.ndim != 1:
            raise ValueError("rows, cols and vals must be 1-d arrays of equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.m
                          or cols.min() < 0 or cols.max() >= self.n):
            raise ValueError("edge index out of range")
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix entries must be finite")
        keys = rows * self.n + cols
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate (row, column) pair in edge list")
        for name, arr in (("rows", rows), ("cols", cols), ("vals", vals)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def _trusted(cls, n, m, rows, cols, vals):
        """Skip validation; for hot loops whose edge lists are simple by construction."""
        obj = object.__new__(cls)
        for name, v in (("n", n), ("m", m), ("rows", rows), ("cols", cols), ("vals", vals)):
            object.__setattr__(obj, name, v)
        return obj

    @property
    def n_edges(self) -> int:
        return self.rows.size

    @cached_property
    def min_col_degree(self) -> int:
        return int(self.col_degrees().min()) if self.n else 0

    @property
    def shape(self):
        return (self.m, self.n)

    @cached_property
    def col_table(self) -> np.ndarray:
        return _padded_table(self.cols, self.n, self.n_edges)

    @cached_property
    def row_table(self) -> np.ndarray:
        return _padded_table(self.rows, self.m, self.n_edges)

    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n)

    def row_degrees(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.m)

    def matvec(self, x) -> np.ndarray:
        return np.bincount(self.rows, weights=self.vals * np.asarray(x)[self.cols],
                           minlength=self.m)

    def rmatvec(self, z) -> np.ndarray:
        return np.bincount(self.cols, weights=self.vals * np.asarray(z)[self.rows],
                           minlength=self.n)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        out[self.rows, self.cols] = self.vals
        return out

    @classmethod
    def from_dense(cls, values) -> "SparseMeasurementMatrix":
        """Edge list of the nonzero pattern, column-major edge order."""
        values = np.asarray(values, dtype=float)
        cols, rows = np.nonzero(values.T)
        return cls(values.shape[1], values.shape[0], rows, cols, values[rows, cols])


@dataclass(frozen=True, eq=False)
class DenseMeasurementMatrix:
    n: int
    m: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.m, self.n):
            raise ValueError(f"values have shape {values.shape}, expected {(self.m, self.n)}")
        if not np.all(np.isfinite(values)):
            raise ValueError("matrix entries must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return (self.m, self.n)

    def matvec(self, x) -> np.ndarray:
        return self.values @ np.asarray(x)

    def rmatvec(self, z) -> np.ndarray:
        return self.values.T @ np.asarray(z)

    def to_dense(self) -> np.ndarray:
        return self.values


@dataclass(frozen=True, eq=False)
class SignalVector:
    values: np.ndarray
    rho: float

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    values: np.ndarray

    @property
    def m(self) -> int:
        return len(self.values)


Matrix = Union[SparseMeasurementMatrix, DenseMeasurementMatrix]


@dataclass(frozen=True, eq=False)
class Instance:
    matrix: Matrix
    signal: SignalVector
    measurements: MeasurementVector

    def __iter__(self):
        return iter((self.matrix, self.signal, self.measurements))


def _values(v) -> np.ndarray:
    return np.asarray(getattr(v, "values", v), dtype=float)


def pair_regular_sockets(n, m, j, k, rng, max_attempts=MAX_PAIRING_ATTEMPTS):
    """Row index for each of the ``n*j`` column sockets of a simple (j,k) graph.

    Column socket ``s`` belongs to column ``s // j``.  Row sockets are paired
    uniformly at random; any multi-edges are then removed by degree-preserving
    swaps with randomly chosen edges.  If the swap budget runs out the whole
    pairing is redrawn, up to ``max_attempts`` times.
    """
    if n * j != m * k:
        raise ValueError(f"inconsistent edge count: n*j={n * j} != m*k={m * k}")
    if j > m or k > n:
        raise ValueError("degrees exceed the matrix dimensions")
    for _ in range(max_attempts):
        rows = rng.permutation(np.repeat(np.arange(m), k))
        if _repair_multi_edges(rows.reshape(n, j), rng):
            return rows
    raise GraphConstructionError(
        f"no simple ({j},{k}) bipartite graph found in {max_attempts} attempts")


def _repair_multi_edges(R, rng, max_tries=2000):
    """Swap away repeated rows inside each column of ``R`` (n x j), in place."""
    n, j = R.shape
    n_edges = n * j
    while True:
        srt = np.sort(R, axis=1)
        bad = np.flatnonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))
        if not bad.size:
            return True
        for c in bad.tolist():
            seen = set()
            for s, r in enumerate(R[c].tolist()):
                if r not in seen:
                    seen.add(r)
                    continue
                for tries in range(0, max_tries, 32):
                    if _try_swap(R, c, s, r, rng.integers(n_edges, size=32).tolist(), j):
                        break
                else:
                    return False


def _try_swap(R, c, s, r, candidates, j):
    col = R[c].tolist()
    for f in candidates:
        c2, s2 = divmod(f, j)
        col2 = R[c2].tolist()
        r2 = col2[s2]
        if c2 == c or r2 == r or r2 in col or r in col2:
            continue
        R[c, s], R[c2, s2] = r2, r
        return True
    return False


def gen_regular_sparse_matrix(spec: EnsembleSpec, seed, value_std: float = 1.0
                              ) -> SparseMeasurementMatrix:
    """Random (j, k)-regular sparse matrix with i.i.d. N(0, value_std**2) values.

    Edges are stored in column-major order, ``j`` consecutive edges per column.
    """
    if not isinstance(spec.kind, RegularSparse):
        raise ValueError("spec must describe a RegularSparse ensemble")
    rng = _as_seed(seed).generator()
    j, k = spec.kind.j, spec.kind.k
    rows = pair_regular_sockets(spec.n, spec.m, j, k, rng)
    cols = np.repeat(np.arange(spec.n), j)
    vals = value_std * rng.standard_normal(rows.size)
    return SparseMeasurementMatrix(spec.n, spec.m, rows, cols, vals)


def gen_dense_matrix(spec: EnsembleSpec, seed, variance: float | None = None
                     ) -> DenseMeasurementMatrix:
    """Dense matrix with i.i.d. N(0, variance) entries; variance defaults to 1/N."""
    if not isinstance(spec.kind, DenseGaussian):
        raise ValueError("spec must describe a DenseGaussian ensemble")
    var = 1.0 / spec.n if variance is None else variance
    rng = _as_seed(seed).generator()
    values = np.sqrt(var) * rng.standard_normal((spec.m, spec.n))
    return DenseMeasurementMatrix(spec.n, spec.m, values)


def gen_signal(n: int, rho: float, seed) -> SignalVector:
    """Bernoulli-Gaussian signal: zero w.p. 1-rho, else standard normal."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    rng = _as_seed(seed).generator()
    support = rng.random(n) < rho
    values = np.where(support, rng.standard_normal(n), 0.0)
    return SignalVector(values, float(rho))


def measure(F: Matrix, x) -> MeasurementVector:
    x = _values(x)
    if x.shape != (F.n,):
        raise ValueError(f"signal has shape {x.shape}, matrix expects ({F.n},)")
    return MeasurementVector(F.matvec(x))


def make_instance(spec: EnsembleSpec, rho: float, seed) -> Instance:
    """Matrix, signal and measurements from independent substreams of ``seed``."""
    seed = _as_seed(seed)
    matrix_seed = RngSeed(seed.seed, seed.stream)
    signal_seed = RngSeed(seed.seed, (seed.stream + 0x9E3779B97F4A7C15) % 2**64)
    if isinstance(spec.kind, RegularSparse):
        F = gen_regular_sparse_matrix(spec, matrix_seed)
    else:
        F = gen_dense_matrix(spec, matrix_seed)
    x0 = gen_signal(spec.n, rho, signal_seed)
    return Instance(F, x0, measure(F, x0))


# -- text serialisation -------------------------------------------------------

def _fmt(v: float) -> str:
    return "%.17g" % v


def save_instance(path, F: Matrix, x, y) -> None:
    x_vals, y_vals = _values(x), _values(y)
    rho = getattr(x, "rho", float(np.mean(x_vals != 0)))
    lines = []
    if isinstance(F, SparseMeasurementMatrix):
        lines.append(f"sparse {F.n} {F.m} {F.n_edges}")
        lines.extend(f"{r} {c} {_fmt(v)}" for r, c, v in zip(F.rows, F.cols, F.vals))
    else:
        lines.append(f"dense {F.n} {F.m}")
        lines.extend(" ".join(_fmt(v) for v in row) for row in F.values)
    lines.append(f"signal {len(x_vals)} {_fmt(rho)}")
    lines.extend(_fmt(v) for v in x_vals)
    lines.append(f"measurements {len(y_vals)}")
    lines.extend(_fmt(v) for v in y_vals)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class _Lines:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, what):
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1
        if self.pos >= len(self.lines):
            raise InstanceFormatError(
                f"line {self.pos + 1}: unexpected end of file, expected {what}")
        self.pos += 1
        return self.pos, self.lines[self.pos - 1].split()

    def fail(self, lineno, msg):
        raise InstanceFormatError(f"line {lineno}: {msg}")


def _parse_numbers(src, lineno, tokens, conv, count, what):
    if len(tokens) != count:
        src.fail(lineno, f"expected {count} field(s) for {what}, got {len(tokens)}")
    try:
        return [conv(t) for t in tokens]
    except ValueError:
        src.fail(lineno, f"malformed number in {what}: {' '.join(tokens)!r}")


def load_instance(path) -> Instance:
    with open(path) as fh:
        src = _Lines(fh.read())
    lineno, tok = src.next("matrix header")
    if tok[:1] == ["sparse"]:
        n, m, ne = _parse_numbers(src, lineno, tok[1:], int, 3, "sparse header")
        rows, cols, vals = [], [], []
        for _ in range(ne):
            ln, t = src.next("edge line")
            if len(t) != 3:
                src.fail(ln, f"expected 'mu i value', got {' '.join(t)!r}")
            r, c = _parse_numbers(src, ln, t[:2], int, 2, "edge indices")
            (v,) = _parse_numbers(src, ln, t[2:], float, 1, "edge value")
            if not (0 <= r < m and 0 <= c < n):
                src.fail(ln, f"edge ({r}, {c}) outside a {m}x{n} matrix")
            rows.append(r), cols.append(c), vals.append(v)
        try:
            F = SparseMeasurementMatrix(n, m, np.array(rows, dtype=np.intp),
                                        np.array(cols, dtype=np.intp), np.array(vals))
        except ValueError as exc:
            raise InstanceFormatError(f"line {lineno}: {exc}") from None
    elif tok[:1] == ["dense"]:
        n, m = _parse_numbers(src, lineno, tok[1:], int, 2, "dense header")
        grid = []
        for _ in range(m):
            ln, t = src.next("matrix row")
            grid.append(_parse_numbers(src, ln, t, float, n, "matrix row"))
        F = DenseMeasurementMatrix(n, m, np.array(grid).reshape(m, n))
    else:
        src.fail(lineno, f"expected 'sparse' or 'dense' header, got {' '.join(tok)!r}")

    lineno, tok = src.next("'signal' header")
    if tok[:1] != ["signal"]:
        src.fail(lineno, f"expected 'signal' header, got {' '.join(tok)!r}")
    (nx,) = _parse_numbers(src, lineno, tok[1:2], int, 1, "signal length")
    (rho,) = _parse_numbers(src, lineno, tok[2:], float, 1, "signal density")
    if nx != F.n:
        src.fail(lineno, f"signal length {nx} does not match matrix width {F.n}")
    x = [_parse_numbers(src, *src.next("signal value"), float, 1, "signal value")[0]
         for _ in range(nx)]

    lineno, tok = src.next("'measurements' header")
    if tok[:1] != ["measurements"]:
        src.fail(lineno, f"expected 'measurements' header, got {' '.join(tok)!r}")
    (ny,) = _parse_numbers(src, lineno, tok[1:], int, 1, "measurement count")
    if ny != F.m:
        src.fail(lineno, f"measurement count {ny} does not match matrix height {F.m}")
    y = [_parse_numbers(src, *src.next("measurement value"), float, 1, "measurement")[0]
         for _ in range(ny)]
    return Instance(F, SignalVector(np.array(x), rho), MeasurementVector(np.array(y)))
