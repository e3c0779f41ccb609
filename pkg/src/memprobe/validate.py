"""Cross-machine validation of the application-mix model.

The protocol, per reference kernel:

1. measure the kernel's rate on the original machine,
2. collect its counter points there,
3. turn those points into a weight grid,
4. measure the kernel's rate on the target machine,
5. sweep a probe catalog on the original machine, select one probe per
   weighted cell, and form weighted predictions; the target-side
   prediction re-runs the selected probe parameters on the target,
6. report the relative deviation between prediction and measurement on
   both machines.

Self-check mode replaces the probe catalog with the kernel's own points
(same machine on both sides), which must reproduce the measurement
exactly; it guards the bookkeeping rather than the model.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .counters import MetricPoint, PointSource
from .kernels import DEFAULT_BLOCK_EDGE, generate_sparse, trace_mod2am, trace_mod2as
from .mixmodel import (
    CatalogEntry,
    GridConfig,
    MixSelection,
    ProbeCatalog,
    SelectedCell,
    SCHEMA_VERSION,
    bin_points,
    predict,
    select_probe_points,
)
from .probes import AccessMode, AccessTrace, DEFAULT_TRACE_CAP
from .sweep import SweepConfig, expand_combos, run_probe, record_entry
from .vcache import MachineModel, derive_metrics, simulate, virtual_mflops

KERNEL_NAMES = ("mod2am", "mod2as")


@dataclass(frozen=True)
class SparseShape:
    rows: int
    cols: int
    fill: float


@dataclass(frozen=True)
class ValidationConfig:
    mod2am_sizes: tuple[int, ...]
    mod2as_shapes: tuple[SparseShape, ...]
    grid: GridConfig
    sweep: SweepConfig
    min_weight: float = 0.005
    block_edge: int = DEFAULT_BLOCK_EDGE
    seed: int = 0
    trace_cap: int = DEFAULT_TRACE_CAP

    def __post_init__(self):
        if not self.mod2am_sizes or not self.mod2as_shapes:
            raise ValueError("each kernel needs at least one instance")


def _dense_alphas() -> tuple[float, ...]:
    """Fine where the reuse curve is steep, coarser along the tail."""
    low = np.linspace(0.0, 0.2, 41)
    high = np.linspace(0.21, 1.0, 80)
    return tuple(round(float(a), 6) for a in np.concatenate([low, high]))


def default_validation_config(seed: int = 1) -> ValidationConfig:
    """Desk-scale ladders; instances sized so the matrices fit the caches
    of interest for mod2am and stream far past them for mod2as."""
    sweep = SweepConfig(
        mem_elements=1 << 21,
        modes=(AccessMode.STRIDED, AccessMode.RANDOM),
        strides=(2, 3, 4, 6, 8, 16, 64),
        intensities=(0, 1, 2, 4),
        alphas=_dense_alphas(),
        vector_lengths=(1, 2),
        random_intensities=(0,),
        index_counts=(50, 100, 200),
        seed=seed,
    )
    return ValidationConfig(
        mod2am_sizes=(96, 128, 160, 192),
        mod2as_shapes=(
            SparseShape(10000, 2000, 0.05),
            SparseShape(12000, 2000, 0.05),
            SparseShape(15000, 2000, 0.04),
        ),
        grid=GridConfig(cell_width=4.0, cell_height=0.025,
                        extent_x=4.0, extent_y=4.0),
        sweep=sweep,
        seed=seed,
    )


@dataclass(frozen=True)
class KernelInstance:
    kernel: str
    label: str
    trace: AccessTrace


def build_instances(config: ValidationConfig) -> list[KernelInstance]:
    """Traces are machine independent, so they are built once and replayed
    on every machine under test."""
    instances: list[KernelInstance] = []
    for n in config.mod2am_sizes:
        trace = trace_mod2am(n, n, n, block_edge=config.block_edge,
                             max_accesses=config.trace_cap)
        instances.append(KernelInstance("mod2am", f"m{n}n{n}k{n}", trace))
    for i, shape in enumerate(config.mod2as_shapes):
        matrix = generate_sparse(shape.rows, shape.cols, shape.fill,
                                 seed=config.seed + i)
        trace = trace_mod2as(matrix, max_accesses=config.trace_cap)
        label = f"r{shape.rows}c{shape.cols}nnz{matrix.nnz}"
        instances.append(KernelInstance("mod2as", label, trace))
    return instances


@dataclass(frozen=True)
class InstanceResult:
    instance: KernelInstance
    point: MetricPoint
    mflops: float
    cycles: int


def measure_instance(instance: KernelInstance, machine: MachineModel) -> InstanceResult:
    counters = simulate(instance.trace, machine)
    point = derive_metrics(counters, machine, source=PointSource.VIRTUAL_KERNEL,
                           label=f"{instance.kernel}:{instance.label}")
    return InstanceResult(instance, point, virtual_mflops(counters, machine),
                          counters.cycles)


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return sum(values) / len(values)


def _machine_payload(machine: MachineModel) -> dict:
    payload = dataclasses.asdict(machine)
    payload["associativity"] = "full" if machine.associativity is None else machine.associativity
    return payload


def _kernel_pseudo_entries(results: list[InstanceResult]) -> list[CatalogEntry]:
    return [
        CatalogEntry(digest=f"kernel:{r.instance.kernel}:{r.instance.label}",
                     point=r.point, mflops=r.mflops, params=None)
        for r in results
    ]


def _selection_on_target(selection: MixSelection, machine: MachineModel,
                         trace_cap: int) -> MixSelection:
    """Re-run each selected probe on the target machine, keeping the cell
    structure and weights from the original-machine selection."""
    moved: dict[tuple[int, int], SelectedCell] = {}
    for key, cell in selection.selected.items():
        entry = cell.entry
        if entry.params is not None:
            record = run_probe(entry.params, machine, trace_cap=trace_cap)
            entry = record_entry(record)
        moved[key] = SelectedCell(cell.col, cell.row, cell.weight, entry,
                                  cell.distance)
    return MixSelection(selection.grid, selection.min_weight, moved,
                        selection.uncovered, selection.coverage)


def run_validation(config: ValidationConfig, machine_a: MachineModel,
                   machine_b: MachineModel, self_check: bool = False) -> dict:
    """Execute the six-step protocol and return the report payload."""
    if self_check and machine_a != machine_b:
        raise ValueError("self-check requires identical machines")

    steps: list[dict] = []
    instances = build_instances(config)
    if self_check:
        # One instance per kernel: the per-cell representation then
        # reproduces the measurement exactly, so any nonzero deviation
        # is a bookkeeping bug rather than model error.
        first: dict[str, KernelInstance] = {}
        for inst in instances:
            first.setdefault(inst.kernel, inst)
        instances = list(first.values())

    results_a = [measure_instance(inst, machine_a) for inst in instances]
    steps.append({"step": 1, "title": "kernel rates on original machine",
                  "instances": len(results_a)})

    points_a = {name: [r.point for r in results_a if r.instance.kernel == name]
                for name in KERNEL_NAMES}
    steps.append({"step": 2, "title": "kernel counter points on original machine",
                  "points": sum(len(v) for v in points_a.values())})

    grids = {name: bin_points(pts, config.grid)
             for name, pts in points_a.items()}
    steps.append({"step": 3, "title": "application weight grids",
                  "cells": {name: len(g.cells) for name, g in grids.items()}})

    results_b = [measure_instance(inst, machine_b) for inst in instances]
    steps.append({"step": 4, "title": "kernel rates on target machine",
                  "instances": len(results_b)})

    if self_check:
        catalog = ProbeCatalog()
        for entry in _kernel_pseudo_entries(results_a):
            catalog.add(entry)
    else:
        combos = expand_combos(config.sweep)
        catalog = ProbeCatalog()
        for params in combos:
            catalog.add(record_entry(run_probe(params, machine_a,
                                               trace_cap=config.trace_cap)))
    steps.append({"step": 5, "title": "probe catalog and per-cell selection",
                  "catalog_entries": len(catalog.entries),
                  "self_check": self_check})

    kernels: dict[str, dict] = {}
    for name in KERNEL_NAMES:
        actual_a = _mean(r.mflops for r in results_a if r.instance.kernel == name)
        actual_b = _mean(r.mflops for r in results_b if r.instance.kernel == name)

        selection_a = select_probe_points(grids[name], catalog,
                                          min_weight=config.min_weight)
        prediction_a = predict(selection_a)
        selection_b = _selection_on_target(selection_a, machine_b,
                                           config.trace_cap)
        prediction_b = predict(selection_b)

        dev_a = 100.0 * abs(prediction_a.predicted_mflops - actual_a) / actual_a
        dev_b = 100.0 * abs(prediction_b.predicted_mflops - actual_b) / actual_b

        kernels[name] = {
            "instances": [
                {
                    "label": r.instance.label,
                    "mflops_original": r.mflops,
                    "mflops_target": rb.mflops,
                    "flops_per_cycle_original": r.point.flops_per_cycle,
                    "miss_bytes_per_cycle_original": r.point.miss_bytes_per_cycle,
                }
                for r, rb in zip(results_a, results_b)
                if r.instance.kernel == name
            ],
            "coverage": selection_a.coverage,
            "selected": [
                {
                    "col": cell.col,
                    "row": cell.row,
                    "weight": cell.weight,
                    "digest": cell.entry.digest,
                    "mflops_original": cell.entry.mflops,
                    "mflops_target": selection_b.selected[key].entry.mflops,
                }
                for key, cell in sorted(selection_a.selected.items())
            ],
            "actual_mflops": {"original": actual_a, "target": actual_b},
            "predicted_mflops": {"original": prediction_a.predicted_mflops,
                                 "target": prediction_b.predicted_mflops},
            "deviation_pct": {"original": dev_a, "target": dev_b},
        }
    steps.append({"step": 6, "title": "prediction deviations",
                  "deviation_pct": {name: kernels[name]["deviation_pct"]
                                    for name in KERNEL_NAMES}})

    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "validation_report",
        "self_check": self_check,
        "machines": {"original": _machine_payload(machine_a),
                     "target": _machine_payload(machine_b)},
        "steps": steps,
        "kernels": kernels,
    }


def write_report(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_report(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text())
    version = str(payload.get("schema_version", ""))
    if version.split(".", 1)[0] != SCHEMA_VERSION.split(".", 1)[0]:
        raise ValueError(f"unsupported schema_version {version!r}")
    if payload.get("kind") != "validation_report":
        raise ValueError("not a validation report")
    return payload
