"""Synthetic memory-access probe kernels.

A probe touches a flat block of ``mem_elements`` 8-byte elements in one of
two modes and interleaves a tunable compute routine between accesses:

* strided: every ``stride``-th element of the block, in address order;
* random:  ``index_count`` sub-vectors of ``vector_length`` contiguous
  elements whose block-aligned start indices follow a power distribution
  controlled by ``alpha`` (0 = a single hot block, 1 = uniform).

Each access contributes a fixed number of floating-point operations plus
``128 * intensity + 7`` operations from the compute routine, so arithmetic
intensity is a free knob. Flop accounting is a single canonical formula
shared by the timing path, the trace path, and the virtual machine.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

PER_ELEMENT_BYTES = 8

# Canonical per-access accounting: multiply and accumulate on the data
# element (2), accumulate of the compute result (1), 128 flops per compute
# iteration, 7 for the final reduction of the eight partial sums.
ACCESS_FLOPS = 3
COMPUTE_LOOP_FLOPS = 128
COMPUTE_REDUCE_FLOPS = 7

DEFAULT_TRACE_CAP = 1 << 28

_MAX_SEED = (1 << 64) - 1


class AccessMode(Enum):
    STRIDED = "strided"
    RANDOM = "random"


class AllocationError(RuntimeError):
    """Raised when the data block for a probe cannot be allocated."""


class TraceLengthError(ValueError):
    """Raised when a requested trace would exceed the configured cap."""


@dataclass(frozen=True)
class ProbeParams:
    """One probe configuration. Sizes are in 8-byte elements, not bytes."""

    mode: AccessMode
    mem_elements: int
    vector_length: int = 1
    alpha: float = 0.0
    stride: int = 1
    intensity: int = 0
    index_count: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.mem_elements, int) or self.mem_elements < 1:
            raise ValueError("mem_elements must be a positive integer")
        if not (0.0 <= float(self.alpha) <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if not isinstance(self.intensity, int) or self.intensity < 0:
            raise ValueError("intensity must be a non-negative integer")
        if not isinstance(self.seed, int) or not (0 <= self.seed <= _MAX_SEED):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.mode is AccessMode.STRIDED:
            if not isinstance(self.stride, int) or self.stride < 1:
                raise ValueError("stride must be >= 1")
            if self.stride > self.mem_elements:
                raise ValueError("stride must not exceed mem_elements")
        elif self.mode is AccessMode.RANDOM:
            if not isinstance(self.vector_length, int) or self.vector_length < 1:
                raise ValueError("vector_length must be >= 1")
            if self.vector_length > self.mem_elements:
                raise ValueError("vector_length must not exceed mem_elements")
            if self.mem_elements % self.vector_length != 0:
                raise ValueError("mem_elements must be a multiple of vector_length")
            if not isinstance(self.index_count, int) or self.index_count < 1:
                raise ValueError("index_count must be >= 1")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")


def params_digest(params: ProbeParams) -> str:
    """Stable 16-hex-digit identity for a parameter combination."""
    canon = ",".join(
        (
            params.mode.value,
            str(params.mem_elements),
            str(params.vector_length),
            repr(float(params.alpha)),
            str(params.stride),
            str(params.intensity),
            str(params.index_count),
            str(params.seed),
        )
    )
    return hashlib.sha256(canon.encode("ascii")).hexdigest()[:16]


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / float(1 << 53)


class SplitMix64:
    """splitmix64 in counter form: output i is mix64(seed + (i+1)*golden).

    The integer stream is platform independent; doubles are the top 53 bits
    scaled into [0, 1).
    """

    def __init__(self, seed: int) -> None:
        if not (0 <= seed <= _MAX_SEED):
            raise ValueError("seed must be an unsigned 64-bit integer")
        self._seed = np.uint64(seed)
        self._counter = 0

    def next_u64(self, count: int) -> np.ndarray:
        lo = self._counter + 1
        self._counter += count
        ctr = np.arange(lo, lo + count, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = self._seed + ctr * _GOLDEN
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
        return z

    def next_unit(self, count: int) -> np.ndarray:
        """``count`` doubles uniform on [0, 1)."""
        return (self.next_u64(count) >> np.uint64(11)).astype(np.float64) * _INV_2_53


@dataclass(frozen=True)
class IndexSequence:
    """Start indices for the random kernel plus a degenerate-support flag.

    degenerate_support is set when the block holds a single sub-vector
    (mem_elements == vector_length) while alpha > 0 requests a nontrivial
    distribution; every draw is then forced to block zero.
    """

    starts: np.ndarray
    degenerate_support: bool = False


def generate_indices(params: ProbeParams, rng: SplitMix64 | None = None) -> IndexSequence:
    """Draw ``index_count`` block-aligned start indices.

    Block index k is hit with cumulative probability ((k+1) * L / M) ** alpha,
    i.e. floor(u ** (1/alpha) * M/L) for uniform u; alpha = 0 is the defined
    limit where every draw lands in block zero. Start index = block * L, so
    results lie in [0, M - L] and are multiples of L.
    """
    if params.mode is not AccessMode.RANDOM:
        raise ValueError("index generation applies to random mode only")
    if rng is None:
        rng = SplitMix64(params.seed)
    n_blocks = params.mem_elements // params.vector_length
    count = params.index_count
    degenerate = n_blocks < 2 and params.alpha > 0.0
    if params.alpha == 0.0 or n_blocks < 2:
        rng.next_u64(count)  # consume the stream either way
        starts = np.zeros(count, dtype=np.int64)
        return IndexSequence(starts, degenerate)
    u = rng.next_unit(count)
    blocks = (u ** (1.0 / params.alpha) * n_blocks).astype(np.int64)
    np.clip(blocks, 0, n_blocks - 1, out=blocks)  # guard float rounding at u -> 1
    return IndexSequence(blocks * params.vector_length, False)


_COMPUTE_X = np.arange(1, 9, dtype=np.float64) * 0.125
_COMPUTE_Y = np.arange(1, 9, dtype=np.float64) * 0.0625


def _opaque_sink(*_values) -> None:
    """Call boundary the optimizer cannot see through; keeps work live."""
    return None


def compute_kernel(intensity: int) -> float:
    """Compute routine interleaved with every access.

    ``intensity`` passes over two fixed 8-element operand arrays (together
    one 128-byte line), accumulating eight partial sums of eight products
    each (128 flops per pass); returns the sum of the partials.
    """
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    partials = np.zeros(8, dtype=np.float64)
    for _ in range(intensity):
        _opaque_sink(partials)
        partials += (_COMPUTE_X[:, None] * _COMPUTE_Y[None, :]).sum(axis=1)
    return float(partials.sum())


def per_access_flops(intensity: int) -> int:
    return ACCESS_FLOPS + COMPUTE_LOOP_FLOPS * intensity + COMPUTE_REDUCE_FLOPS


def access_count(params: ProbeParams) -> int:
    if params.mode is AccessMode.STRIDED:
        return params.mem_elements // params.stride
    return params.index_count * params.vector_length


def flop_count(params: ProbeParams) -> int:
    """Canonical flop total for one pass of the configured kernel."""
    return access_count(params) * per_access_flops(params.intensity)


@dataclass(frozen=True, eq=False)
class AccessTrace:
    """Ordered element indices the kernel dereferences in one timed pass.

    Compute-routine operands are excluded; they model register/L1-resident
    state. bytes_touched counts 8 bytes per access.
    """

    element_indices: np.ndarray
    flops_total: int
    bytes_touched: int

    def __post_init__(self) -> None:
        if self.bytes_touched != PER_ELEMENT_BYTES * len(self.element_indices):
            raise ValueError("bytes_touched must equal 8 * access count")

    def __len__(self) -> int:
        return len(self.element_indices)


def emit_trace(params: ProbeParams, max_accesses: int = DEFAULT_TRACE_CAP) -> AccessTrace:
    """Replay the access pattern of one timed pass as element indices."""
    n = access_count(params)
    if n > max_accesses:
        raise TraceLengthError(
            f"trace of {n} accesses exceeds cap of {max_accesses}"
        )
    if params.mem_elements > np.iinfo(np.int32).max:
        raise TraceLengthError("traces support mem_elements up to 2**31 - 1")
    if params.mode is AccessMode.STRIDED:
        idx = np.arange(n, dtype=np.int64) * params.stride
        idx = idx.astype(np.int32)
    else:
        starts = generate_indices(params).starts.astype(np.int32)
        length = params.vector_length
        idx = np.repeat(starts, length) + np.tile(
            np.arange(length, dtype=np.int32), params.index_count
        )
    return AccessTrace(idx, flop_count(params), PER_ELEMENT_BYTES * n)


@dataclass(frozen=True)
class ProbeMeasurement:
    """Wall-time result of one probe run (per-pass figures)."""

    params: ProbeParams
    wall_seconds: float
    flops_total: int
    mflops: float


_DATA_COEFF = 0.5  # c0 multiplier applied to every data element


def _allocate_block(mem_elements: int) -> np.ndarray:
    try:
        return np.full(mem_elements, 1.0, dtype=np.float64)
    except MemoryError as exc:
        raise AllocationError(
            f"cannot allocate {mem_elements} elements "
            f"({mem_elements * PER_ELEMENT_BYTES} bytes)"
        ) from exc


def _measure(params: ProbeParams, repetitions: int, pass_fn) -> ProbeMeasurement:
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    pass_fn()  # one untimed warm-up pass
    t0 = time.perf_counter()
    live = 0.0
    for _ in range(repetitions):
        live = pass_fn()
    t1 = time.perf_counter()
    _opaque_sink(live)
    wall = (t1 - t0) / repetitions
    total = flop_count(params)
    # Timer granularity floor keeps mflops finite on degenerate tiny runs.
    wall = max(wall, 1e-9)
    return ProbeMeasurement(params, wall, total, total / wall / 1e6)


def run_strided(params: ProbeParams, repetitions: int = 1) -> ProbeMeasurement:
    """Timed strided pass: every stride-th element plus compute per access."""
    if params.mode is not AccessMode.STRIDED:
        raise ValueError("run_strided requires strided-mode params")
    data = _allocate_block(params.mem_elements)
    n = access_count(params)
    view = data[:: params.stride][:n]
    intensity = params.intensity

    def one_pass() -> float:
        contrib = compute_kernel(intensity)
        return _DATA_COEFF * float(view.sum()) + n * contrib

    return _measure(params, repetitions, one_pass)


def run_random(params: ProbeParams, repetitions: int = 1) -> ProbeMeasurement:
    """Timed random pass: index_count power-distributed contiguous sub-vectors."""
    if params.mode is not AccessMode.RANDOM:
        raise ValueError("run_random requires random-mode params")
    data = _allocate_block(params.mem_elements)
    seq = generate_indices(params)  # one buffer, reused by every pass
    starts = [int(s) for s in seq.starts]
    length = params.vector_length
    intensity = params.intensity
    n = access_count(params)

    def one_pass() -> float:
        contrib = compute_kernel(intensity)
        acc = 0.0
        for s in starts:
            acc += float(data[s : s + length].sum())
        return _DATA_COEFF * acc + n * contrib

    return _measure(params, repetitions, one_pass)
