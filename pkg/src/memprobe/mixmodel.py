"""Application-mix model over the metric plane.

Metric points (miss bytes per cycle on x, flops per cycle on y) are binned
into a fixed grid of half-open cells. Cell weights are sample fractions.
For every cell carrying at least min_weight of the mix, the probe whose
metric point lies in that cell and sits nearest the cell centroid is
selected as the cell's representative; the mix MFlops prediction is the
weighted aggregate of the representatives' MFlops.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .counters import MetricPoint, PointSource
from .probes import AccessMode, ProbeParams, params_digest

SCHEMA_VERSION = "1.0"
DEFAULT_MIN_WEIGHT = 0.005
WEIGHT_TOLERANCE = 1e-9


class SchemaVersionError(ValueError):
    """Input file written by an incompatible major schema version."""


class PredictionError(RuntimeError):
    """No covered cells: a prediction would be meaningless."""


def _check_schema(payload: Mapping, kind: str) -> None:
    version = str(payload.get("schema_version", ""))
    major = version.split(".", 1)[0]
    if major != SCHEMA_VERSION.split(".", 1)[0]:
        raise SchemaVersionError(f"unsupported schema_version {version!r}")
    if payload.get("kind") != kind:
        raise SchemaVersionError(
            f"expected kind={kind!r}, found {payload.get('kind')!r}"
        )


@dataclass(frozen=True)
class GridConfig:
    """Half-open cells [col*w, (col+1)*w) x [row*h, (row+1)*h)."""

    cell_width: float = 0.5
    cell_height: float = 0.5
    extent_x: float = 4.0
    extent_y: float = 4.0

    def __post_init__(self) -> None:
        if self.cell_width <= 0 or self.cell_height <= 0:
            raise ValueError("cell dimensions must be positive")
        if self.extent_x < self.cell_width or self.extent_y < self.cell_height:
            raise ValueError("extent must cover at least one cell")

    @property
    def n_cols(self) -> int:
        return int(math.ceil(self.extent_x / self.cell_width - 1e-12))

    @property
    def n_rows(self) -> int:
        return int(math.ceil(self.extent_y / self.cell_height - 1e-12))

    def cell_of(self, x: float, y: float) -> tuple[int, int, bool]:
        """(col, row, spilled); out-of-extent points clamp to edge cells."""
        col = int(math.floor(x / self.cell_width))
        row = int(math.floor(y / self.cell_height))
        spilled = False
        if col < 0:
            col, spilled = 0, True
        elif col >= self.n_cols:
            col, spilled = self.n_cols - 1, True
        if row < 0:
            row, spilled = 0, True
        elif row >= self.n_rows:
            row, spilled = self.n_rows - 1, True
        return col, row, spilled

    def centroid(self, col: int, row: int) -> tuple[float, float]:
        return ((col + 0.5) * self.cell_width, (row + 0.5) * self.cell_height)


@dataclass(frozen=True)
class CellStats:
    count: int
    weight: float


@dataclass
class WeightGrid:
    config: GridConfig
    cells: dict[tuple[int, int], CellStats]
    total_samples: int
    spillover: int

    def weight_sum(self) -> float:
        return sum(c.weight for c in self.cells.values())


def _points_to_xy(points) -> np.ndarray:
    """Accepts MetricPoint sequences or an (N, 2) array of (x, y)."""
    if isinstance(points, np.ndarray):
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError("point array must have shape (N, 2)")
        return points.astype(np.float64, copy=False)
    pts = list(points)
    out = np.empty((len(pts), 2), dtype=np.float64)
    for i, p in enumerate(pts):
        out[i, 0] = p.miss_bytes_per_cycle
        out[i, 1] = p.flops_per_cycle
    return out


def bin_points(points, config: GridConfig | None = None) -> WeightGrid:
    """Count points per cell and normalise counts into weights."""
    config = config or GridConfig()
    xy = _points_to_xy(points)
    total = len(xy)
    if total == 0:
        return WeightGrid(config, {}, 0, 0)
    cols = np.floor(xy[:, 0] / config.cell_width).astype(np.int64)
    rows = np.floor(xy[:, 1] / config.cell_height).astype(np.int64)
    spill = ((cols < 0) | (cols >= config.n_cols)
             | (rows < 0) | (rows >= config.n_rows))
    np.clip(cols, 0, config.n_cols - 1, out=cols)
    np.clip(rows, 0, config.n_rows - 1, out=rows)
    flat = cols * config.n_rows + rows
    counts = np.bincount(flat, minlength=config.n_cols * config.n_rows)
    cells: dict[tuple[int, int], CellStats] = {}
    for key in np.flatnonzero(counts):
        col, row = divmod(int(key), config.n_rows)
        n = int(counts[key])
        cells[(col, row)] = CellStats(n, n / total)
    return WeightGrid(config, cells, total, int(spill.sum()))


def kernel_weights(points: Sequence[MetricPoint],
                   config: GridConfig | None = None) -> WeightGrid:
    """Per-cell weights of a reference kernel's counter points."""
    return bin_points(points, config)


# ------------------------------------------------------------- catalog


@dataclass(frozen=True)
class CatalogEntry:
    """One measured combination: identity, metric point, achieved MFlops."""

    digest: str
    point: MetricPoint
    mflops: float
    params: ProbeParams | None = None


@dataclass
class ProbeCatalog:
    entries: list[CatalogEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: dict[str, CatalogEntry] = {}
        for e in self.entries:
            seen.setdefault(e.digest, e)
        self.entries = list(seen.values())

    def add(self, entry: CatalogEntry) -> bool:
        """Insert unless the digest is already present; True if inserted."""
        if any(e.digest == entry.digest for e in self.entries):
            return False
        self.entries.append(entry)
        return True

    def digests(self) -> set[str]:
        return {e.digest for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


def entry_for_params(params: ProbeParams, point: MetricPoint,
                     mflops: float) -> CatalogEntry:
    return CatalogEntry(params_digest(params), point, mflops, params)


# ------------------------------------------------------------ selection


@dataclass(frozen=True)
class SelectedCell:
    col: int
    row: int
    weight: float
    entry: CatalogEntry
    distance: float


@dataclass
class MixSelection:
    grid: WeightGrid
    min_weight: float
    selected: dict[tuple[int, int], SelectedCell]
    uncovered: dict[tuple[int, int], float]
    coverage: float


def select_probe_points(grid: WeightGrid, catalog: ProbeCatalog,
                        min_weight: float = DEFAULT_MIN_WEIGHT) -> MixSelection:
    """Pick one in-cell representative per sufficiently weighted cell.

    Distance is Euclidean in cell-normalised coordinates; ties break on the
    lexicographically smaller digest, so the choice is independent of
    catalog order.
    """
    config = grid.config
    by_cell: dict[tuple[int, int], list[CatalogEntry]] = {}
    for entry in catalog.entries:
        col, row, _ = config.cell_of(entry.point.miss_bytes_per_cycle,
                                     entry.point.flops_per_cycle)
        by_cell.setdefault((col, row), []).append(entry)

    selected: dict[tuple[int, int], SelectedCell] = {}
    uncovered: dict[tuple[int, int], float] = {}
    for (col, row), stats in sorted(grid.cells.items()):
        if stats.weight < min_weight:
            uncovered[(col, row)] = stats.weight
            continue
        candidates = by_cell.get((col, row))
        if not candidates:
            uncovered[(col, row)] = stats.weight
            continue
        cx, cy = config.centroid(col, row)
        best: tuple[float, str] | None = None
        best_entry: CatalogEntry | None = None
        for entry in candidates:
            dx = (entry.point.miss_bytes_per_cycle - cx) / config.cell_width
            dy = (entry.point.flops_per_cycle - cy) / config.cell_height
            key = (math.hypot(dx, dy), entry.digest)
            if best is None or key < best:
                best, best_entry = key, entry
        assert best_entry is not None
        selected[(col, row)] = SelectedCell(col, row, stats.weight,
                                            best_entry, best[0])
    coverage = sum(c.weight for c in selected.values())
    return MixSelection(grid, min_weight, selected, uncovered, coverage)


@dataclass
class MixPrediction:
    coverage: float
    predicted_mflops: float
    renormalized: bool
    selected: dict[tuple[int, int], SelectedCell]
    uncovered: dict[tuple[int, int], float]


def predict(selection: MixSelection, renormalize: bool = True) -> MixPrediction:
    """Weighted aggregate MFlops over the covered cells.

    renormalize=True rescales weights over the covered region (the default);
    renormalize=False counts uncovered weight as zero contribution.
    """
    covered = sum(c.weight for c in selection.selected.values())
    if covered <= 0.0:
        raise PredictionError("no covered cells")
    weighted = sum(c.weight * c.entry.mflops for c in selection.selected.values())
    value = weighted / covered if renormalize else weighted
    return MixPrediction(selection.coverage, value, renormalize,
                         dict(selection.selected), dict(selection.uncovered))


# -------------------------------------------------------- serialization


def grid_to_payload(grid: WeightGrid) -> dict:
    cfg = grid.config
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "weight_grid",
        "cell_width": cfg.cell_width,
        "cell_height": cfg.cell_height,
        "extent_x": cfg.extent_x,
        "extent_y": cfg.extent_y,
        "total_samples": grid.total_samples,
        "spillover": grid.spillover,
        "cells": [
            {"col": col, "row": row, "count": st.count, "weight": st.weight}
            for (col, row), st in sorted(grid.cells.items())
        ],
    }


def grid_from_payload(payload: Mapping) -> WeightGrid:
    _check_schema(payload, "weight_grid")
    config = GridConfig(payload["cell_width"], payload["cell_height"],
                        payload["extent_x"], payload["extent_y"])
    cells = {
        (int(c["col"]), int(c["row"])): CellStats(int(c["count"]),
                                                  float(c["weight"]))
        for c in payload["cells"]
    }
    return WeightGrid(config, cells, int(payload["total_samples"]),
                      int(payload["spillover"]))


def write_grid(grid: WeightGrid, path: str | Path) -> None:
    Path(path).write_text(json.dumps(grid_to_payload(grid), sort_keys=True,
                                     indent=2) + "\n")


def load_grid(path: str | Path) -> WeightGrid:
    return grid_from_payload(json.loads(Path(path).read_text()))


def selection_to_payload(selection: MixSelection) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "mix_selection",
        "min_weight": selection.min_weight,
        "coverage": selection.coverage,
        "selected": [
            {
                "col": c.col,
                "row": c.row,
                "weight": c.weight,
                "digest": c.entry.digest,
                "mflops": c.entry.mflops,
                "flops_per_cycle": c.entry.point.flops_per_cycle,
                "miss_bytes_per_cycle": c.entry.point.miss_bytes_per_cycle,
                "distance": c.distance,
            }
            for _, c in sorted(selection.selected.items())
        ],
        "uncovered": [
            {"col": col, "row": row, "weight": w}
            for (col, row), w in sorted(selection.uncovered.items())
        ],
    }


def write_selection(selection: MixSelection, path: str | Path) -> None:
    Path(path).write_text(json.dumps(selection_to_payload(selection),
                                     sort_keys=True, indent=2) + "\n")


def load_selection_payload(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text())
    _check_schema(payload, "mix_selection")
    return payload


def prediction_to_payload(pred: MixPrediction) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "mix_prediction",
        "coverage": pred.coverage,
        "predicted_mflops": pred.predicted_mflops,
        "renormalized": pred.renormalized,
        "selected": [
            {
                "col": c.col,
                "row": c.row,
                "weight": c.weight,
                "digest": c.entry.digest,
                "mflops": c.entry.mflops,
                "flops_per_cycle": c.entry.point.flops_per_cycle,
                "miss_bytes_per_cycle": c.entry.point.miss_bytes_per_cycle,
                "distance": c.distance,
            }
            for _, c in sorted(pred.selected.items())
        ],
        "uncovered": [
            {"col": col, "row": row, "weight": w}
            for (col, row), w in sorted(pred.uncovered.items())
        ],
    }


def write_prediction(pred: MixPrediction, path: str | Path) -> None:
    Path(path).write_text(json.dumps(prediction_to_payload(pred),
                                     sort_keys=True, indent=2) + "\n")


def load_prediction_payload(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text())
    _check_schema(payload, "mix_prediction")
    return payload


CATALOG_COLUMNS = [
    "digest", "source", "label", "mode", "mem_elements", "vector_length",
    "alpha", "stride", "intensity", "index_count", "seed",
    "flops_per_cycle", "miss_bytes_per_cycle", "mflops",
]
CATALOG_MAGIC = f"# schema_version={SCHEMA_VERSION} kind=probe_catalog"
_CATALOG_MAGIC = CATALOG_MAGIC


def catalog_row(entry: CatalogEntry) -> list[str]:
    p = entry.params
    return [
        entry.digest,
        entry.point.source.value,
        entry.point.label or "",
        p.mode.value if p else "",
        str(p.mem_elements) if p else "",
        str(p.vector_length) if p else "",
        repr(float(p.alpha)) if p else "",
        str(p.stride) if p else "",
        str(p.intensity) if p else "",
        str(p.index_count) if p else "",
        str(p.seed) if p else "",
        repr(entry.point.flops_per_cycle),
        repr(entry.point.miss_bytes_per_cycle),
        repr(entry.mflops),
    ]


def parse_catalog_row(row: Sequence[str]) -> CatalogEntry:
    if len(row) != len(CATALOG_COLUMNS):
        raise ValueError(f"catalog row needs {len(CATALOG_COLUMNS)} fields")
    vals = dict(zip(CATALOG_COLUMNS, row))
    params = None
    if vals["mode"]:
        params = ProbeParams(
            mode=AccessMode(vals["mode"]),
            mem_elements=int(vals["mem_elements"]),
            vector_length=int(vals["vector_length"]),
            alpha=float(vals["alpha"]),
            stride=int(vals["stride"]),
            intensity=int(vals["intensity"]),
            index_count=int(vals["index_count"]),
            seed=int(vals["seed"]),
        )
    point = MetricPoint(
        flops_per_cycle=float(vals["flops_per_cycle"]),
        miss_bytes_per_cycle=float(vals["miss_bytes_per_cycle"]),
        source=PointSource(vals["source"]),
        label=vals["label"] or None,
    )
    return CatalogEntry(vals["digest"], point, float(vals["mflops"]), params)


def write_catalog(catalog: ProbeCatalog, path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        fh.write(_CATALOG_MAGIC + "\n")
        writer = csv.writer(fh)
        writer.writerow(CATALOG_COLUMNS)
        for entry in catalog.entries:
            writer.writerow(catalog_row(entry))


def load_catalog(path: str | Path) -> ProbeCatalog:
    import csv

    with open(path, "r", newline="") as fh:
        magic = fh.readline().strip()
        if not magic.startswith("# schema_version="):
            raise SchemaVersionError("catalog file lacks a schema_version line")
        version = magic.split("=", 1)[1].split()[0]
        if version.split(".", 1)[0] != SCHEMA_VERSION.split(".", 1)[0]:
            raise SchemaVersionError(f"unsupported schema_version {version!r}")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CATALOG_COLUMNS:
            raise SchemaVersionError("catalog header does not match schema")
        return ProbeCatalog([parse_catalog_row(row) for row in reader if row])
