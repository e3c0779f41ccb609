"""Parameter sweeps: expand a config into probe runs, collect a catalog.

Two backends. ``virtual`` replays the access trace through the cache
simulator and reports simulator-derived rates. ``wallclock`` times the
probe loops on the host for the MFlops figure, while the coordinate pair
for binning still comes from the simulator so that points stay on the
same scale as everything downstream.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

from .counters import MetricPoint, PointSource
from .mixmodel import (
    CATALOG_COLUMNS,
    CATALOG_MAGIC,
    CatalogEntry,
    ProbeCatalog,
    catalog_row,
    entry_for_params,
    load_catalog,
)
from .probes import (
    AccessMode,
    DEFAULT_TRACE_CAP,
    ProbeParams,
    emit_trace,
    params_digest,
    run_random,
    run_strided,
)
from .vcache import MachineModel, VirtualCounters, derive_metrics, simulate, virtual_mflops, virtual_seconds

BACKENDS = ("virtual", "wallclock")


@dataclass(frozen=True)
class SweepConfig:
    """A cross product of probe parameters.

    Strided combos are strides x intensities; random combos are
    alphas x vector_lengths x random_intensities x index_counts (the
    intensity list falls back to ``intensities`` when unset). All share
    one memory size and seed.
    """

    mem_elements: int
    modes: tuple[AccessMode, ...] = (AccessMode.STRIDED, AccessMode.RANDOM)
    strides: tuple[int, ...] = (1,)
    intensities: tuple[int, ...] = (0,)
    alphas: tuple[float, ...] = (0.0,)
    vector_lengths: tuple[int, ...] = (1,)
    random_intensities: tuple[int, ...] | None = None
    index_counts: tuple[int, ...] = (50,)
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        if not self.modes:
            raise ValueError("modes must not be empty")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("duplicate mode")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def expand_combos(config: SweepConfig) -> list[ProbeParams]:
    """Deterministic expansion order: modes as listed, inner grids sorted
    by position. Invalid combinations raise rather than being skipped."""
    combos: list[ProbeParams] = []
    for mode in config.modes:
        if mode is AccessMode.STRIDED:
            for stride, intensity in itertools.product(config.strides, config.intensities):
                combos.append(
                    ProbeParams(
                        mode=mode,
                        mem_elements=config.mem_elements,
                        stride=stride,
                        intensity=intensity,
                        seed=config.seed,
                    )
                )
        else:
            c_values = config.random_intensities
            if c_values is None:
                c_values = config.intensities
            for alpha, length, intensity, count in itertools.product(
                config.alphas, config.vector_lengths, c_values, config.index_counts
            ):
                combos.append(
                    ProbeParams(
                        mode=mode,
                        mem_elements=config.mem_elements,
                        vector_length=length,
                        alpha=alpha,
                        intensity=intensity,
                        index_count=count,
                        seed=config.seed,
                    )
                )
    return combos


@dataclass(frozen=True)
class ProbeRunRecord:
    """One measured probe: simulator counters plus the reported rate."""

    params: ProbeParams
    counters: VirtualCounters
    point: MetricPoint
    mflops: float
    wall_seconds: float
    backend: str


def run_probe(
    params: ProbeParams,
    machine: MachineModel,
    backend: str = "virtual",
    repetitions: int = 1,
    trace_cap: int = DEFAULT_TRACE_CAP,
) -> ProbeRunRecord:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    trace = emit_trace(params, max_accesses=trace_cap)
    counters = simulate(trace, machine)
    point = derive_metrics(counters, machine, source=PointSource.VIRTUAL_PROBE)
    if backend == "virtual":
        mflops = virtual_mflops(counters, machine)
        wall = virtual_seconds(counters, machine)
    else:
        if params.mode is AccessMode.STRIDED:
            measured = run_strided(params, repetitions=repetitions)
        else:
            measured = run_random(params, repetitions=repetitions)
        mflops = measured.mflops
        wall = measured.wall_seconds
    return ProbeRunRecord(
        params=params,
        counters=counters,
        point=point,
        mflops=mflops,
        wall_seconds=wall,
        backend=backend,
    )


def record_entry(record: ProbeRunRecord) -> CatalogEntry:
    return entry_for_params(record.params, record.point, record.mflops)


def _sweep_task(
    params: ProbeParams, machine: MachineModel, backend: str, repetitions: int, trace_cap: int
) -> CatalogEntry:
    return record_entry(run_probe(params, machine, backend, repetitions, trace_cap))


def run_sweep(
    combos: list[ProbeParams],
    machine: MachineModel,
    backend: str = "virtual",
    out_path: str | Path | None = None,
    jobs: int = 1,
    resume: bool = False,
    repetitions: int = 1,
    trace_cap: int = DEFAULT_TRACE_CAP,
) -> ProbeCatalog:
    """Measure every combo, appending catalog rows as they complete.

    Rows land in combo order regardless of worker scheduling, one flushed
    line per finished probe, so an interrupted sweep leaves a loadable
    file and ``resume=True`` skips digests already present in it.
    """
    catalog = ProbeCatalog()
    if resume and out_path is not None and Path(out_path).exists():
        for entry in load_catalog(out_path).entries:
            catalog.add(entry)

    pending = [p for p in combos if params_digest(p) not in catalog.digests()]

    if out_path is None:
        for params in pending:
            catalog.add(_sweep_task(params, machine, backend, repetitions, trace_cap))
        return catalog

    out_path = Path(out_path)
    fresh = not (resume and out_path.exists())
    with open(out_path, "w" if fresh else "a", newline="") as handle:
        writer = csv.writer(handle)
        if fresh:
            handle.write(CATALOG_MAGIC + "\n")
            writer.writerow(CATALOG_COLUMNS)
            handle.flush()

        def emit(entry: CatalogEntry) -> None:
            if catalog.add(entry):
                writer.writerow(catalog_row(entry))
                handle.flush()

        if jobs <= 1 or len(pending) <= 1:
            for params in pending:
                emit(_sweep_task(params, machine, backend, repetitions, trace_cap))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {
                    pool.submit(_sweep_task, p, machine, backend, repetitions, trace_cap): i
                    for i, p in enumerate(pending)
                }
                done_entries: dict[int, CatalogEntry] = {}
                next_write = 0
                remaining = set(futures)
                while remaining:
                    finished, remaining = wait(remaining, return_when=FIRST_COMPLETED)
                    for fut in finished:
                        done_entries[futures[fut]] = fut.result()
                    while next_write in done_entries:
                        emit(done_entries.pop(next_write))
                        next_write += 1
    return catalog
