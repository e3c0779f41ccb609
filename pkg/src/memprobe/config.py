"""Plain key-value config files: ``key = value``, ``#`` comments.

All documented keys map one to one onto dataclass field names. Sizes accept
byte suffixes (B, KB, MB, GB, powers of 1024); memory-block sizes convert
to the internal 8-byte-element unit.
"""

from __future__ import annotations

from pathlib import Path

from .mixmodel import GridConfig
from .probes import AccessMode, PER_ELEMENT_BYTES
from .vcache import MachineModel


class ConfigError(ValueError):
    """Bad key-value file contents."""


_SUFFIXES = {"b": 1, "kb": 1 << 10, "mb": 1 << 20, "gb": 1 << 30}


def read_kv(path: str | Path) -> dict[str, str]:
    """Parse a key = value file; later duplicate keys win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        out[key] = value
    return out


def parse_byte_count(text: str) -> int:
    """'8388608', '8MB', '64kb' and so on, to bytes."""
    s = text.strip().lower()
    for suffix in ("gb", "mb", "kb", "b"):
        if s.endswith(suffix):
            num = s[: -len(suffix)].strip()
            try:
                scale = _SUFFIXES[suffix]
                if "." in num:
                    value = float(num) * scale
                    if value != int(value):
                        raise ValueError
                    return int(value)
                return int(num) * scale
            except ValueError:
                raise ConfigError(f"bad size {text!r}") from None
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"bad size {text!r}") from None


def parse_element_count(text: str) -> int:
    """Size in 8-byte elements; byte suffixes convert (must divide by 8)."""
    s = text.strip().lower()
    if s[-1:].isdigit():
        try:
            return int(s)
        except ValueError:
            raise ConfigError(f"bad element count {text!r}") from None
    nbytes = parse_byte_count(s)
    if nbytes % PER_ELEMENT_BYTES:
        raise ConfigError(f"{text!r} is not a multiple of 8 bytes")
    return nbytes // PER_ELEMENT_BYTES


def _split_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in _split_list(value))
    except ValueError:
        raise ConfigError(f"bad integer list {value!r}") from None


def parse_float_list(value: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in _split_list(value))
    except ValueError:
        raise ConfigError(f"bad float list {value!r}") from None


_MACHINE_SIZE_KEYS = ("line_bytes", "cache_bytes")


def machine_from_kv(kv: dict[str, str]) -> MachineModel:
    mapping: dict[str, object] = {}
    for key, value in kv.items():
        if key in _MACHINE_SIZE_KEYS:
            mapping[key] = parse_byte_count(value)
        else:
            mapping[key] = value
    try:
        return MachineModel.from_mapping(mapping)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_machine(path: str | Path) -> MachineModel:
    return machine_from_kv(read_kv(path))


def grid_from_kv(kv: dict[str, str], prefix: str = "") -> GridConfig:
    """Grid keys (cell_width, cell_height, extent_x, extent_y), all optional."""
    kwargs = {}
    for name in ("cell_width", "cell_height", "extent_x", "extent_y"):
        raw = kv.get(prefix + name)
        if raw is not None:
            try:
                kwargs[name] = float(raw)
            except ValueError:
                raise ConfigError(f"bad value for {prefix + name}: {raw!r}") from None
    try:
        return GridConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_modes(value: str):
    modes = []
    for item in _split_list(value):
        try:
            modes.append(AccessMode(item))
        except ValueError:
            raise ConfigError(f"unknown mode {item!r}") from None
    return tuple(modes)


def sweep_from_kv(kv: dict[str, str], prefix: str = ""):
    """Build a SweepConfig from key-value pairs; unknown keys are errors."""
    from .sweep import SweepConfig

    known = {
        "mem_elements", "modes", "strides", "intensities", "alphas",
        "vector_lengths", "random_intensities", "index_counts", "seed",
        "repetitions",
    }
    scoped = {k[len(prefix):]: v for k, v in kv.items() if k.startswith(prefix)}
    unknown = set(scoped) - known
    if prefix == "" and unknown:
        raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
    if "mem_elements" not in scoped:
        raise ConfigError(f"missing required key {prefix}mem_elements")

    kwargs: dict[str, object] = {
        "mem_elements": parse_element_count(scoped["mem_elements"]),
    }
    if "modes" in scoped:
        kwargs["modes"] = _parse_modes(scoped["modes"])
    for key in ("strides", "intensities", "index_counts"):
        if key in scoped:
            kwargs[key] = parse_int_list(scoped[key])
    if "random_intensities" in scoped:
        kwargs["random_intensities"] = parse_int_list(scoped["random_intensities"])
    if "vector_lengths" in scoped:
        kwargs["vector_lengths"] = parse_int_list(scoped["vector_lengths"])
    if "alphas" in scoped:
        kwargs["alphas"] = parse_float_list(scoped["alphas"])
    for key in ("seed", "repetitions"):
        if key in scoped:
            try:
                kwargs[key] = int(scoped[key])
            except ValueError:
                raise ConfigError(f"bad value for {prefix}{key}") from None
    try:
        return SweepConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_sweep_config(path: str | Path):
    return sweep_from_kv(read_kv(path))


def load_validation_config(path: str | Path):
    """Validation files override the built-in defaults key by key.

    Kernel ladders come from mod2am_sizes and the aligned lists
    mod2as_rows / mod2as_cols / mod2as_fill (single entries broadcast).
    Grid keys use a grid_ prefix, embedded sweep keys a sweep_ prefix.
    """
    from .validate import SparseShape, ValidationConfig, default_validation_config

    kv = read_kv(path)
    base = default_validation_config()

    seed = base.seed
    if "seed" in kv:
        try:
            seed = int(kv["seed"])
        except ValueError:
            raise ConfigError("bad value for seed") from None

    mod2am_sizes = base.mod2am_sizes
    if "mod2am_sizes" in kv:
        mod2am_sizes = parse_int_list(kv["mod2am_sizes"])

    mod2as_shapes = base.mod2as_shapes
    if "mod2as_rows" in kv:
        rows = parse_int_list(kv["mod2as_rows"])
        cols = parse_int_list(kv.get("mod2as_cols", "0"))
        fills = parse_float_list(kv.get("mod2as_fill", "0"))
        if "mod2as_cols" not in kv or "mod2as_fill" not in kv:
            raise ConfigError("mod2as_rows needs mod2as_cols and mod2as_fill")
        if len(cols) == 1:
            cols = cols * len(rows)
        if len(fills) == 1:
            fills = fills * len(rows)
        if not (len(rows) == len(cols) == len(fills)):
            raise ConfigError("mod2as_rows/cols/fill lengths differ")
        mod2as_shapes = tuple(SparseShape(r, c, f)
                              for r, c, f in zip(rows, cols, fills))

    grid = base.grid
    if any(k.startswith("grid_") for k in kv):
        grid = grid_from_kv(kv, prefix="grid_")

    sweep = base.sweep
    if any(k.startswith("sweep_") for k in kv):
        sweep = sweep_from_kv(kv, prefix="sweep_")

    kwargs: dict[str, object] = {}
    if "min_weight" in kv:
        try:
            kwargs["min_weight"] = float(kv["min_weight"])
        except ValueError:
            raise ConfigError("bad value for min_weight") from None
    if "block_edge" in kv:
        try:
            kwargs["block_edge"] = int(kv["block_edge"])
        except ValueError:
            raise ConfigError("bad value for block_edge") from None

    try:
        return ValidationConfig(
            mod2am_sizes=mod2am_sizes,
            mod2as_shapes=mod2as_shapes,
            grid=grid,
            sweep=sweep,
            seed=seed,
            **kwargs,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
