"""memprobe: synthetic memory-access probes and application-mix prediction.

The package characterises machines with a family of tunable memory
probes, replays access traces through a deterministic cache model,
ingests hardware counter samples into a two-dimensional metric plane
(miss bytes per cycle, flops per cycle), and predicts application-mix
throughput from weighted per-cell probe representatives. Two reference
kernels (dense matrix multiply, sparse matrix-vector multiply) anchor
the model against known access patterns.
"""

from .counters import (
    CounterSample,
    CsvSchemaError,
    MetricPoint,
    PointSource,
    parse_samples,
    summed_metric,
    to_metric,
)
from .kernels import CsrMatrix, generate_dense, generate_sparse, mod2am, mod2as
from .mixmodel import (
    CatalogEntry,
    GridConfig,
    MixPrediction,
    MixSelection,
    PredictionError,
    ProbeCatalog,
    WeightGrid,
    bin_points,
    predict,
    select_probe_points,
)
from .probes import (
    AccessMode,
    AccessTrace,
    ProbeParams,
    compute_kernel,
    emit_trace,
    flop_count,
    generate_indices,
    run_random,
    run_strided,
)
from .sweep import SweepConfig, expand_combos, run_probe, run_sweep
from .validate import ValidationConfig, default_validation_config, run_validation
from .vcache import MachineModel, VirtualCounters, count_misses, simulate

__version__ = "0.1.0"

__all__ = [
    "AccessMode",
    "AccessTrace",
    "CatalogEntry",
    "CounterSample",
    "CsrMatrix",
    "CsvSchemaError",
    "GridConfig",
    "MachineModel",
    "MetricPoint",
    "MixPrediction",
    "MixSelection",
    "PointSource",
    "PredictionError",
    "ProbeCatalog",
    "ProbeParams",
    "SweepConfig",
    "ValidationConfig",
    "VirtualCounters",
    "WeightGrid",
    "bin_points",
    "compute_kernel",
    "count_misses",
    "default_validation_config",
    "emit_trace",
    "expand_combos",
    "flop_count",
    "generate_dense",
    "generate_indices",
    "generate_sparse",
    "mod2am",
    "mod2as",
    "parse_samples",
    "predict",
    "run_probe",
    "run_random",
    "run_strided",
    "run_sweep",
    "run_validation",
    "select_probe_points",
    "simulate",
    "summed_metric",
    "to_metric",
    "__version__",
]
