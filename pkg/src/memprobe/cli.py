"""Command line front end.

Exit codes: 0 success, 2 usage errors, 3 bad input data, 4 unexpected
failures. Every artifact written is reported as a ``wrote <path>`` line.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from . import config as cfg
from . import counters, mixmodel, sweep as sweepmod, validate as validatemod
from .probes import DEFAULT_TRACE_CAP
from .vcache import MachineModel

USAGE_EXIT = 2
DATA_EXIT = 3
INTERNAL_EXIT = 4


class UsageError(Exception):
    """Command line contradiction that argparse cannot express."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memprobe",
        description="Synthetic memory probes, a virtual cache machine, and "
                    "an application-mix performance model.",
    )
    parser.add_argument("--machine", type=Path, default=None,
                        help="machine model key-value file (defaults built in)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the seed of sweep and validation configs")
    parser.add_argument("--backend", choices=sweepmod.BACKENDS, default="virtual",
                        help="probe measurement backend")
    parser.add_argument("--out", type=Path, default=Path("."),
                        help="directory for output artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a probe parameter sweep into a catalog")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--resume", action="store_true",
                   help="skip combos whose digest is already in the catalog")
    p.add_argument("--trace-cap", type=int, default=DEFAULT_TRACE_CAP)

    p = sub.add_parser("ingest", help="counter samples CSV to metric points")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--line-bytes", type=int, default=counters.DEFAULT_LINE_BYTES)

    p = sub.add_parser("model", help="counter samples CSV to a weight grid")
    p.add_argument("--samples", type=Path, required=True)
    p.add_argument("--line-bytes", type=int, default=counters.DEFAULT_LINE_BYTES)
    p.add_argument("--cell-width", type=float, default=None)
    p.add_argument("--cell-height", type=float, default=None)
    p.add_argument("--extent-x", type=float, default=None)
    p.add_argument("--extent-y", type=float, default=None)

    p = sub.add_parser("select", help="pick probe representatives per grid cell")
    p.add_argument("--grid", type=Path, required=True)
    p.add_argument("--catalog", type=Path, required=True)
    p.add_argument("--min-weight", type=float, default=mixmodel.DEFAULT_MIN_WEIGHT)

    p = sub.add_parser("predict", help="weighted MFlops prediction for a grid")
    p.add_argument("--grid", type=Path, required=True)
    p.add_argument("--catalog", type=Path, required=True)
    p.add_argument("--min-weight", type=float, default=mixmodel.DEFAULT_MIN_WEIGHT)
    p.add_argument("--uncovered-as-zero", action="store_true",
                   help="count uncovered weight as zero instead of renormalizing")

    p = sub.add_parser("validate", help="six-step cross-machine validation")
    p.add_argument("--machine-b", type=Path, default=None,
                   help="target machine model file")
    p.add_argument("--config", type=Path, default=None,
                   help="validation config file (defaults built in)")
    p.add_argument("--self-check", action="store_true",
                   help="kernel points as their own catalog; must deviate by 0")

    p = sub.add_parser("plotdata", help="turn artifacts into plot-ready CSV")
    p.add_argument("--input", type=Path, action="append", required=True,
                   help="artifact file; may be given multiple times")

    return parser


def _load_machine(args) -> MachineModel:
    if args.machine is None:
        return MachineModel()
    return cfg.load_machine(args.machine)


def _outdir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _wrote(path: Path) -> None:
    print(f"wrote {path}")


def cmd_sweep(args) -> int:
    machine = _load_machine(args)
    sweep_config = cfg.load_sweep_config(args.config)
    if args.seed is not None:
        sweep_config = dataclasses.replace(sweep_config, seed=args.seed)
    combos = sweepmod.expand_combos(sweep_config)
    out = _outdir(args) / "catalog.csv"
    catalog = sweepmod.run_sweep(
        combos, machine,
        backend=args.backend,
        out_path=out,
        jobs=args.jobs,
        resume=args.resume,
        repetitions=sweep_config.repetitions,
        trace_cap=args.trace_cap,
    )
    print(f"swept {len(combos)} combos, catalog holds {len(catalog.entries)} entries")
    _wrote(out)
    return 0


def cmd_ingest(args) -> int:
    result = counters.parse_samples(args.samples)
    points = [counters.to_metric(s, line_bytes=args.line_bytes)
              for s in result.samples]
    out_dir = _outdir(args)
    points_path = out_dir / "points.csv"
    counters.write_points(points, points_path)
    rejects_path = out_dir / "rejects.csv"
    counters.write_rejects(result.rejects, rejects_path)
    print(f"ingested {len(points)} samples, rejected {len(result.rejects)}")
    _wrote(points_path)
    _wrote(rejects_path)
    return 0


def cmd_model(args) -> int:
    grid_kwargs = {}
    for name in ("cell_width", "cell_height", "extent_x", "extent_y"):
        value = getattr(args, name)
        if value is not None:
            grid_kwargs[name] = value
    grid_config = mixmodel.GridConfig(**grid_kwargs)

    result = counters.parse_samples(args.samples)
    xy = counters.metric_array(result.samples, line_bytes=args.line_bytes)
    grid = mixmodel.bin_points(xy, grid_config)

    out_dir = _outdir(args)
    grid_path = out_dir / "grid.json"
    mixmodel.write_grid(grid, grid_path)
    print(f"binned {grid.total_samples} points into {len(grid.cells)} cells "
          f"({len(result.rejects)} rejected rows, {grid.spillover} clamped)")
    _wrote(grid_path)
    if result.rejects:
        rejects_path = out_dir / "rejects.csv"
        counters.write_rejects(result.rejects, rejects_path)
        _wrote(rejects_path)
    return 0


def cmd_select(args) -> int:
    grid = mixmodel.load_grid(args.grid)
    catalog = mixmodel.load_catalog(args.catalog)
    selection = mixmodel.select_probe_points(grid, catalog,
                                             min_weight=args.min_weight)
    out = _outdir(args) / "selection.json"
    mixmodel.write_selection(selection, out)
    print(f"selected {len(selection.selected)} cells, coverage "
          f"{selection.coverage:.4f}")
    _wrote(out)
    return 0


def cmd_predict(args) -> int:
    grid = mixmodel.load_grid(args.grid)
    catalog = mixmodel.load_catalog(args.catalog)
    selection = mixmodel.select_probe_points(grid, catalog,
                                             min_weight=args.min_weight)
    prediction = mixmodel.predict(selection,
                                  renormalize=not args.uncovered_as_zero)
    out = _outdir(args) / "prediction.json"
    mixmodel.write_prediction(prediction, out)
    print(f"predicted {prediction.predicted_mflops:.2f} MFlops at coverage "
          f"{prediction.coverage:.4f}")
    _wrote(out)
    return 0


def cmd_validate(args) -> int:
    machine_a = _load_machine(args)
    if args.config is not None:
        validation_config = cfg.load_validation_config(args.config)
    else:
        validation_config = validatemod.default_validation_config()
    if args.seed is not None:
        validation_config = dataclasses.replace(
            validation_config,
            seed=args.seed,
            sweep=dataclasses.replace(validation_config.sweep, seed=args.seed),
        )

    if args.self_check:
        machine_b = machine_a if args.machine_b is None else cfg.load_machine(args.machine_b)
    elif args.machine_b is None:
        raise UsageError("validate needs --machine-b (or --self-check)")
    else:
        machine_b = cfg.load_machine(args.machine_b)

    payload = validatemod.run_validation(validation_config, machine_a,
                                         machine_b, self_check=args.self_check)
    out = _outdir(args) / "validation.json"
    validatemod.write_report(payload, out)
    for name, block in payload["kernels"].items():
        dev = block["deviation_pct"]
        print(f"{name}: actual {block['actual_mflops']['original']:.1f} / "
              f"{block['actual_mflops']['target']:.1f} MFlops, predicted "
              f"{block['predicted_mflops']['original']:.1f} / "
              f"{block['predicted_mflops']['target']:.1f}, deviation "
              f"{dev['original']:.2f}% / {dev['target']:.2f}%")
    _wrote(out)
    return 0


def _sniff_kind(path: Path) -> tuple[str, object]:
    """Return (kind, payload). CSV artifacts carry a magic comment line,
    JSON artifacts a 'kind' field."""
    with open(path, "r") as fh:
        first = fh.readline().strip()
    if first.startswith("# schema_version="):
        parts = dict(p.split("=", 1) for p in first[2:].split() if "=" in p)
        return parts.get("kind", ""), path
    payload = json.loads(Path(path).read_text())
    if not isinstance(payload, dict) or "kind" not in payload:
        raise ValueError(f"{path}: unrecognized artifact")
    version = str(payload.get("schema_version", ""))
    if version.split(".", 1)[0] != mixmodel.SCHEMA_VERSION.split(".", 1)[0]:
        raise ValueError(f"{path}: unsupported schema_version {version!r}")
    return payload["kind"], payload


def _plot_grid(payload: dict, out_dir: Path, stem: str) -> Path:
    grid = mixmodel.grid_from_payload(payload)
    n_cols, n_rows = grid.config.n_cols, grid.config.n_rows
    matrix = [[0.0] * n_cols for _ in range(n_rows)]
    for (col, row), stats in grid.cells.items():
        matrix[row][col] = 100.0 * stats.weight
    path = out_dir / f"{stem}_heatmap.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={mixmodel.SCHEMA_VERSION} kind=grid_heatmap\n")
        writer = csv.writer(fh)
        for row in range(n_rows - 1, -1, -1):
            writer.writerow([f"{v:.6f}" for v in matrix[row]])
    return path


def _plot_catalog(path_in: Path, out_dir: Path, stem: str) -> Path:
    catalog = mixmodel.load_catalog(path_in)
    path = out_dir / f"{stem}_points.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={mixmodel.SCHEMA_VERSION} kind=catalog_points\n")
        writer = csv.writer(fh)
        writer.writerow(["mode", "stride", "alpha", "vector_length",
                         "intensity", "index_count",
                         "miss_bytes_per_cycle", "flops_per_cycle", "mflops"])
        for e in catalog.entries:
            p = e.params
            writer.writerow([
                p.mode.value if p else "",
                p.stride if p else "",
                p.alpha if p else "",
                p.vector_length if p else "",
                p.intensity if p else "",
                p.index_count if p else "",
                repr(e.point.miss_bytes_per_cycle),
                repr(e.point.flops_per_cycle),
                repr(e.mflops),
            ])
    return path


def _plot_selection(payload: dict, out_dir: Path, stem: str) -> Path:
    path = out_dir / f"{stem}_selected.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={mixmodel.SCHEMA_VERSION} kind=selected_cells\n")
        writer = csv.writer(fh)
        writer.writerow(["col", "row", "weight", "miss_bytes_per_cycle",
                         "flops_per_cycle", "mflops", "digest"])
        for c in payload["selected"]:
            writer.writerow([c["col"], c["row"], repr(c["weight"]),
                             repr(c["miss_bytes_per_cycle"]),
                             repr(c["flops_per_cycle"]),
                             repr(c["mflops"]), c["digest"]])
    return path


def _plot_points(path_in: Path, out_dir: Path, stem: str) -> Path:
    points = counters.load_points(path_in)
    path = out_dir / f"{stem}_scatter.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={mixmodel.SCHEMA_VERSION} kind=point_scatter\n")
        writer = csv.writer(fh)
        writer.writerow(["miss_bytes_per_cycle", "flops_per_cycle"])
        for p in points:
            writer.writerow([repr(p.miss_bytes_per_cycle),
                             repr(p.flops_per_cycle)])
    return path


def _plot_validation(payload: dict, out_dir: Path, stem: str) -> Path:
    path = out_dir / f"{stem}_summary.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={mixmodel.SCHEMA_VERSION} kind=validation_summary\n")
        writer = csv.writer(fh)
        writer.writerow(["kernel", "machine", "actual_mflops",
                         "predicted_mflops", "deviation_pct", "coverage"])
        for name, block in sorted(payload["kernels"].items()):
            for side in ("original", "target"):
                writer.writerow([
                    name, side,
                    repr(block["actual_mflops"][side]),
                    repr(block["predicted_mflops"][side]),
                    repr(block["deviation_pct"][side]),
                    repr(block["coverage"]),
                ])
    return path


def cmd_plotdata(args) -> int:
    out_dir = _outdir(args)
    for path_in in args.input:
        kind, payload = _sniff_kind(path_in)
        stem = path_in.stem
        if kind == "weight_grid":
            written = _plot_grid(payload, out_dir, stem)
        elif kind == "probe_catalog":
            written = _plot_catalog(path_in, out_dir, stem)
        elif kind in ("mix_selection", "mix_prediction"):
            written = _plot_selection(payload, out_dir, stem)
        elif kind == "metric_points":
            written = _plot_points(path_in, out_dir, stem)
        elif kind == "validation_report":
            written = _plot_validation(payload, out_dir, stem)
        else:
            raise ValueError(f"{path_in}: no plot mapping for kind {kind!r}")
        _wrote(written)
    return 0


_COMMANDS = {
    "sweep": cmd_sweep,
    "ingest": cmd_ingest,
    "model": cmd_model,
    "select": cmd_select,
    "predict": cmd_predict,
    "validate": cmd_validate,
    "plotdata": cmd_plotdata,
}

_DATA_ERRORS = (
    cfg.ConfigError,
    counters.CsvSchemaError,
    mixmodel.SchemaVersionError,
    mixmodel.PredictionError,
    ValueError,
    OSError,
    json.JSONDecodeError,
)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
