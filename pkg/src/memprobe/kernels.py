"""Reference kernels: dense matrix multiply and sparse matrix-vector multiply.

mod2am multiplies two dense row-major matrices, either with exact
triple-loop semantics (naive) or with square cache blocks (default edge
32). mod2as is the three-array CSR y = A*x. Both kernels expose canonical
flop totals (2*m*n*k and 2*nnz), wall-clock runs, and memory-access traces
over a unified element layout so the virtual machine can characterise them
exactly like the synthetic probes: matrices occupy one contiguous element
arena in declared argument order, and index arrays are traced as 8-byte
elements like the data they address.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .probes import (
    DEFAULT_TRACE_CAP,
    PER_ELEMENT_BYTES,
    AccessTrace,
    TraceLengthError,
    _opaque_sink,
)

DEFAULT_BLOCK_EDGE = 32


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Three-array compressed sparse row storage."""

    rows: int
    cols: int
    values: np.ndarray
    col_idx: np.ndarray
    row_ptr: np.ndarray

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")
        if len(self.row_ptr) != self.rows + 1:
            raise ValueError("row_ptr must have rows + 1 entries")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != len(self.values):
            raise ValueError("row_ptr must span exactly the stored entries")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if len(self.values) != len(self.col_idx):
            raise ValueError("values and col_idx must have equal length")
        if len(self.col_idx) and (self.col_idx.min() < 0
                                  or self.col_idx.max() >= self.cols):
            raise ValueError("column indices out of range")

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.rows, self.cols), dtype=np.float64)
        for i in range(self.rows):
            s, e = int(self.row_ptr[i]), int(self.row_ptr[i + 1])
            dense[i, self.col_idx[s:e]] = self.values[s:e]
        return dense


def mod2am_flops(m: int, n: int, k: int) -> int:
    return 2 * m * n * k


def mod2as_flops(nnz: int) -> int:
    return 2 * nnz


def mod2am_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """C = A*B with literal triple-loop semantics, one dot per element."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError("incompatible operand shapes")
    m, k = a.shape
    n = b.shape[1]
    c = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        row = a[i, :]
        for j in range(n):
            c[i, j] = float(np.dot(row, b[:, j]))
    return c


def mod2am(a: np.ndarray, b: np.ndarray,
           block_edge: int = DEFAULT_BLOCK_EDGE) -> np.ndarray:
    """Cache-blocked C = A*B over square tiles of the given edge."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError("incompatible operand shapes")
    if block_edge < 1:
        raise ValueError("block_edge must be >= 1")
    m, k = a.shape
    n = b.shape[1]
    c = np.zeros((m, n), dtype=np.float64)
    for ib in range(0, m, block_edge):
        it = slice(ib, min(ib + block_edge, m))
        for jb in range(0, n, block_edge):
            jt = slice(jb, min(jb + block_edge, n))
            acc = c[it, jt]
            for lb in range(0, k, block_edge):
                lt = slice(lb, min(lb + block_edge, k))
                acc += a[it, lt] @ b[lt, jt]
    return c


def mod2as(matrix: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """y[i] = sum over stored j of values[j] * x[col_idx[j]]."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (matrix.cols,):
        raise ValueError("x must have one entry per matrix column")
    y = np.zeros(matrix.rows, dtype=np.float64)
    rp = matrix.row_ptr
    for i in range(matrix.rows):
        s, e = int(rp[i]), int(rp[i + 1])
        if e > s:
            y[i] = float(np.dot(matrix.values[s:e], x[matrix.col_idx[s:e]]))
    return y


def generate_dense(rows: int, cols: int, seed: int) -> np.ndarray:
    """Deterministic dense operand with entries uniform in (0, 1]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return 1.0 - rng.random((rows, cols))


def generate_sparse(rows: int, cols: int, fill_ratio: float,
                    seed: int) -> CsrMatrix:
    """Random CSR matrix; each position holds a value with fill_ratio odds.

    Per-row positions are distinct and sorted by construction; values are
    uniform in (0, 1]; expected nnz is rows * cols * fill_ratio. The same
    seed always reproduces the same matrix bit for bit.
    """
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be positive")
    if not (0.0 < fill_ratio <= 1.0):
        raise ValueError("fill_ratio must lie in (0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    chunk = max(1, min(rows, (1 << 24) // cols))  # bound scratch to ~128 MB
    counts = np.zeros(rows, dtype=np.int64)
    col_parts: list[np.ndarray] = []
    for start in range(0, rows, chunk):
        stop = min(start + chunk, rows)
        mask = rng.random((stop - start, cols)) < fill_ratio
        r, c = np.nonzero(mask)
        counts[start:stop] = np.bincount(r, minlength=stop - start)
        col_parts.append(c.astype(np.int64))
    col_idx = np.concatenate(col_parts) if col_parts else np.empty(0, np.int64)
    row_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    values = 1.0 - rng.random(len(col_idx))
    return CsrMatrix(rows, cols, values, col_idx, row_ptr)


# ----------------------------------------------------------------- traces


def trace_mod2am(m: int, n: int, k: int,
                 block_edge: int | None = DEFAULT_BLOCK_EDGE,
                 max_accesses: int = DEFAULT_TRACE_CAP) -> AccessTrace:
    """Element-access stream of the blocked multiply.

    Arena layout in declared order: A [0, m*k), B [m*k, m*k+k*n),
    C [m*k+k*n, m*k+k*n+m*n). Per block triple and per (i, j) the k-loop
    emits a(i, l), b(l, j) pairs and then one c(i, j) accumulate touch.
    block_edge None traces the naive ordering (a single full-extent block).
    """
    if m < 1 or n < 1 or k < 1:
        raise ValueError("matrix dimensions must be positive")
    edge = block_edge if block_edge is not None else max(m, n, k)
    if edge < 1:
        raise ValueError("block_edge must be >= 1")
    n_ltiles = -(-k // edge)
    total = 2 * m * n * k + m * n * n_ltiles
    if total > max_accesses:
        raise TraceLengthError(f"trace of {total} accesses exceeds cap")
    a_base, b_base, c_base = 0, m * k, m * k + k * n
    if c_base + m * n > np.iinfo(np.int32).max:
        raise TraceLengthError("arena exceeds 2**31 - 1 elements")
    chunks: list[np.ndarray] = []
    for ib in range(0, m, edge):
        ti = np.arange(ib, min(ib + edge, m), dtype=np.int32)
        for jb in range(0, n, edge):
            tj = np.arange(jb, min(jb + edge, n), dtype=np.int32)
            c_tile = c_base + ti[:, None] * n + tj[None, :]
            for lb in range(0, k, edge):
                tl = np.arange(lb, min(lb + edge, k), dtype=np.int32)
                bl = len(tl)
                a_tile = a_base + ti[:, None] * k + tl[None, :]
                b_tile = b_base + tl[:, None] * n + tj[None, :]
                chunk = np.empty((len(ti), len(tj), 2 * bl + 1), dtype=np.int32)
                chunk[:, :, 0:2 * bl:2] = a_tile[:, None, :]
                chunk[:, :, 1:2 * bl:2] = b_tile.T[None, :, :]
                chunk[:, :, 2 * bl] = c_tile
                chunks.append(chunk.reshape(-1))
    idx = np.concatenate(chunks)
    return AccessTrace(idx, mod2am_flops(m, n, k), PER_ELEMENT_BYTES * total)


def trace_mod2as(matrix: CsrMatrix,
                 max_accesses: int = DEFAULT_TRACE_CAP) -> AccessTrace:
    """Element-access stream of the CSR multiply.

    Arena layout in declared order: values [0, nnz), col_idx [nnz, 2*nnz),
    row_ptr [2*nnz, 2*nnz+rows+1), x, then y; index arrays are traced as
    8-byte elements. Per row: row_ptr[i], row_ptr[i+1], then per stored
    entry col_idx[j], values[j], x[col_idx[j]], and finally the y[i] store.
    """
    nnz, rows, cols = matrix.nnz, matrix.rows, matrix.cols
    total = 3 * rows + 3 * nnz
    if total > max_accesses:
        raise TraceLengthError(f"trace of {total} accesses exceeds cap")
    v_base = 0
    c_base = nnz
    r_base = 2 * nnz
    x_base = r_base + rows + 1
    y_base = x_base + cols
    if y_base + rows > np.iinfo(np.int32).max:
        raise TraceLengthError("arena exceeds 2**31 - 1 elements")
    row_nnz = np.diff(matrix.row_ptr).astype(np.int64)
    lengths = 3 * row_nnz + 3
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    out = np.empty(total, dtype=np.int32)
    rows_arange = np.arange(rows, dtype=np.int64)
    out[offsets[:-1]] = r_base + rows_arange
    out[offsets[:-1] + 1] = r_base + rows_arange + 1
    out[offsets[1:] - 1] = y_base + rows_arange
    if nnz:
        row_id = np.repeat(rows_arange, row_nnz)
        rank = np.arange(nnz, dtype=np.int64) - np.repeat(
            matrix.row_ptr[:-1].astype(np.int64), row_nnz)
        base = offsets[row_id] + 2 + 3 * rank
        out[base] = c_base + np.arange(nnz, dtype=np.int64)
        out[base + 1] = v_base + np.arange(nnz, dtype=np.int64)
        out[base + 2] = x_base + matrix.col_idx.astype(np.int64)
    return AccessTrace(out, mod2as_flops(nnz), PER_ELEMENT_BYTES * total)


# ------------------------------------------------------------ timed runs


@dataclass(frozen=True)
class KernelRun:
    """Wall-time result of one kernel run (same shape as ProbeMeasurement)."""

    kernel: str
    label: str
    wall_seconds: float
    flops_total: int
    mflops: float


def _timed(kernel: str, label: str, flops: int, repetitions: int,
           pass_fn) -> KernelRun:
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    pass_fn()  # untimed warm-up
    t0 = time.perf_counter()
    result = None
    for _ in range(repetitions):
        result = pass_fn()
    t1 = time.perf_counter()
    _opaque_sink(result)
    wall = max((t1 - t0) / repetitions, 1e-9)
    return KernelRun(kernel, label, wall, flops, flops / wall / 1e6)


def run_mod2am(a: np.ndarray, b: np.ndarray,
               block_edge: int = DEFAULT_BLOCK_EDGE,
               repetitions: int = 1) -> KernelRun:
    m, k = a.shape
    n = b.shape[1]
    return _timed("mod2am", f"m{m}n{n}k{k}", mod2am_flops(m, n, k),
                  repetitions, lambda: mod2am(a, b, block_edge))


def run_mod2as(matrix: CsrMatrix, x: np.ndarray,
               repetitions: int = 1) -> KernelRun:
    label = f"r{matrix.rows}c{matrix.cols}nnz{matrix.nnz}"
    return _timed("mod2as", label, mod2as_flops(matrix.nnz),
                  repetitions, lambda: mod2as(matrix, x))
