"""Deterministic virtual machine: set-associative LRU cache, additive cycles.

The machine replays an AccessTrace through a single-level cache model and
charges cycles additively: ceil(fp_ops / peak_flops_per_cycle) for the
arithmetic plus a fixed penalty per miss and a fixed cost per hit. The same
trace on the same machine always yields the same counters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Mapping

import numpy as np
from numba import njit

from .counters import MetricPoint, PointSource
from .probes import PER_ELEMENT_BYTES, AccessTrace

DEFAULT_CLOCK_HZ = 1.6e9


@dataclass(frozen=True)
class MachineModel:
    """Cache and cycle-cost parameters for the virtual machine.

    associativity None means fully associative. clock_hz only converts
    cycles to seconds and MFlops; it never changes counter values.
    """

    line_bytes: int = 128
    cache_bytes: int = 8 * (1 << 20)
    associativity: int | None = None
    peak_flops_per_cycle: float = 4.0
    miss_penalty_cycles: int = 64
    hit_cycles: int = 1
    clock_hz: float = DEFAULT_CLOCK_HZ

    def __post_init__(self) -> None:
        lb = self.line_bytes
        if not isinstance(lb, int) or lb < PER_ELEMENT_BYTES or lb & (lb - 1):
            raise ValueError("line_bytes must be a power of two >= 8")
        if self.cache_bytes < lb or self.cache_bytes % lb:
            raise ValueError("cache_bytes must be a positive multiple of line_bytes")
        if self.associativity is not None:
            if not isinstance(self.associativity, int) or self.associativity < 1:
                raise ValueError("associativity must be a positive integer or None")
            if self.cache_bytes % (lb * self.associativity):
                raise ValueError(
                    "cache_bytes must be divisible by line_bytes * associativity"
                )
        if self.peak_flops_per_cycle <= 0:
            raise ValueError("peak_flops_per_cycle must be positive")
        if self.hit_cycles < 0 or self.miss_penalty_cycles < self.hit_cycles:
            raise ValueError("need miss_penalty_cycles >= hit_cycles >= 0")
        if self.clock_hz <= 0:
            raise ValueError("clock_hz must be positive")

    @property
    def cache_lines(self) -> int:
        return self.cache_bytes // self.line_bytes

    @property
    def ways(self) -> int:
        return self.cache_lines if self.associativity is None else self.associativity

    @property
    def n_sets(self) -> int:
        return self.cache_lines // self.ways

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "MachineModel":
        """Build from a key-value mapping; keys are exactly the field names."""
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown machine keys: {sorted(unknown)}")
        kwargs: dict[str, object] = {}
        for name, raw in mapping.items():
            if name == "associativity":
                if isinstance(raw, str) and raw.strip().lower() == "full":
                    kwargs[name] = None
                else:
                    kwargs[name] = int(raw)  # type: ignore[call-overload]
            elif name in ("peak_flops_per_cycle", "clock_hz"):
                kwargs[name] = float(raw)  # type: ignore[arg-type]
            else:
                kwargs[name] = int(raw)  # type: ignore[call-overload]
        return cls(**kwargs)  # type: ignore[arg-type]


@dataclass(frozen=True)
class VirtualCounters:
    """What a counter sampler would have seen for one simulated run."""

    fp_ops: int
    cycles: int
    l3_misses: int
    l3_hits: int


@njit(cache=False)
def _replay_lru(idx, line_shift, n_sets, ways, n_lines):  # pragma: no cover
    # slot_of[line] = global slot holding that line, -1 if absent.
    # Slots of set s are [s*ways, (s+1)*ways); each set keeps a doubly
    # linked recency list over its occupied slots (head = MRU, tail = LRU).
    slot_of = np.full(n_lines, -1, np.int32)
    resident = np.full(n_sets * ways, -1, np.int64)
    nxt = np.full(n_sets * ways, -1, np.int32)
    prv = np.full(n_sets * ways, -1, np.int32)
    head = np.full(n_sets, -1, np.int32)
    tail = np.full(n_sets, -1, np.int32)
    fill = np.zeros(n_sets, np.int32)
    misses = 0
    for i in range(idx.size):
        line = np.int64(idx[i]) >> line_shift
        g = slot_of[line]
        if g >= 0:
            s = np.int32(line % n_sets)
            if head[s] != g:
                p = prv[g]
                nx = nxt[g]
                nxt[p] = nx
                if nx >= 0:
                    prv[nx] = p
                else:
                    tail[s] = p
                prv[g] = -1
                nxt[g] = head[s]
                prv[head[s]] = g
                head[s] = g
        else:
            misses += 1
            s = np.int32(line % n_sets)
            if fill[s] < ways:
                g = s * ways + fill[s]
                fill[s] += 1
            else:
                g = tail[s]
                slot_of[resident[g]] = -1
                p = prv[g]
                if p >= 0:
                    nxt[p] = -1
                tail[s] = p
                if head[s] == g:
                    head[s] = -1
                prv[g] = -1
                nxt[g] = -1
            resident[g] = line
            slot_of[line] = g
            nxt[g] = head[s]
            if head[s] >= 0:
                prv[head[s]] = g
            head[s] = g
            if tail[s] < 0:
                tail[s] = g
    return misses


def count_misses(element_indices: np.ndarray, machine: MachineModel) -> int:
    """Misses for an element-index stream on the given cache geometry."""
    if len(element_indices) == 0:
        return 0
    idx = np.ascontiguousarray(element_indices, dtype=np.int32)
    shift = machine.line_bytes.bit_length() - 1 - 3  # line = elem*8 / line_bytes
    n_lines = (int(idx.max()) >> shift) + 1
    return int(_replay_lru(idx, shift, machine.n_sets, machine.ways, n_lines))


def simulate(trace: AccessTrace, machine: MachineModel) -> VirtualCounters:
    """Replay a trace; empty traces yield all-zero counters."""
    n = len(trace)
    if n == 0:
        return VirtualCounters(0, 0, 0, 0)
    misses = count_misses(trace.element_indices, machine)
    hits = n - misses
    cycles = (
        math.ceil(trace.flops_total / machine.peak_flops_per_cycle)
        + misses * machine.miss_penalty_cycles
        + hits * machine.hit_cycles
    )
    return VirtualCounters(trace.flops_total, int(cycles), misses, hits)


def derive_metrics(counters: VirtualCounters, machine: MachineModel,
                   source: PointSource = PointSource.VIRTUAL_PROBE,
                   label: str | None = None) -> MetricPoint:
    """Counters to metric point; zero-cycle counters are refused."""
    if counters.cycles <= 0:
        raise ValueError("cannot derive metrics from zero cycles")
    return MetricPoint(
        flops_per_cycle=counters.fp_ops / counters.cycles,
        miss_bytes_per_cycle=counters.l3_misses * machine.line_bytes / counters.cycles,
        source=source,
        label=label,
    )


def virtual_seconds(counters: VirtualCounters, machine: MachineModel) -> float:
    return counters.cycles / machine.clock_hz


def virtual_mflops(counters: VirtualCounters, machine: MachineModel) -> float:
    """MFlops the run would report at the machine's clock."""
    if counters.cycles == 0:
        return 0.0
    return counters.fp_ops / virtual_seconds(counters, machine) / 1e6


def scaled_machine(machine: MachineModel, **overrides) -> MachineModel:
    """Convenience for tests and validation configs."""
    return replace(machine, **overrides)
