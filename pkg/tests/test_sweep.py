"""Sweep expansion, probe measurement records, and resumable catalogs."""

import pytest

from memprobe.mixmodel import load_catalog
from memprobe.probes import AccessMode, ProbeParams, flop_count, params_digest
from memprobe.sweep import (
    ProbeRunRecord,
    SweepConfig,
    expand_combos,
    record_entry,
    run_probe,
    run_sweep,
)
from memprobe.vcache import MachineModel

MACHINE = MachineModel()
SMALL = MachineModel(line_bytes=64, cache_bytes=4096, associativity=None)


def tiny_config(**overrides):
    base = dict(
        mem_elements=4096,
        modes=(AccessMode.STRIDED, AccessMode.RANDOM),
        strides=(1, 16),
        intensities=(0, 2),
        alphas=(0.0, 1.0),
        vector_lengths=(16,),
        seed=3,
    )
    base.update(overrides)
    return SweepConfig(**base)


def test_expand_counts_and_order():
    combos = expand_combos(tiny_config())
    # 2 strides x 2 intensities, then 2 alphas x 1 length x 2 intensities
    assert len(combos) == 8
    assert [p.mode for p in combos[:4]] == [AccessMode.STRIDED] * 4
    assert [p.mode for p in combos[4:]] == [AccessMode.RANDOM] * 4
    assert [(p.stride, p.intensity) for p in combos[:4]] == [
        (1, 0), (1, 2), (16, 0), (16, 2)]
    assert [(p.alpha, p.intensity) for p in combos[4:]] == [
        (0.0, 0), (0.0, 2), (1.0, 0), (1.0, 2)]


def test_expand_is_deterministic():
    a = expand_combos(tiny_config())
    b = expand_combos(tiny_config())
    assert a == b


def test_random_intensities_override():
    combos = expand_combos(tiny_config(random_intensities=(7,)))
    randoms = [p for p in combos if p.mode is AccessMode.RANDOM]
    assert {p.intensity for p in randoms} == {7}
    strided = [p for p in combos if p.mode is AccessMode.STRIDED]
    assert {p.intensity for p in strided} == {0, 2}


def test_index_counts_multiply_random_combos():
    combos = expand_combos(tiny_config(index_counts=(50, 100)))
    randoms = [p for p in combos if p.mode is AccessMode.RANDOM]
    assert len(randoms) == 2 * 1 * 2 * 2
    assert {p.index_count for p in randoms} == {50, 100}


def test_expand_rejects_invalid_combo():
    with pytest.raises(ValueError):
        expand_combos(tiny_config(strides=(8192,)))  # stride > mem_elements


def test_config_rejects_duplicate_mode():
    with pytest.raises(ValueError):
        tiny_config(modes=(AccessMode.STRIDED, AccessMode.STRIDED))


def test_run_probe_virtual_consistency():
    params = ProbeParams(mode=AccessMode.STRIDED, mem_elements=4096, stride=4)
    record = run_probe(params, MACHINE)
    assert isinstance(record, ProbeRunRecord)
    assert record.backend == "virtual"
    assert record.counters.fp_ops == flop_count(params)
    assert record.point.flops_per_cycle == pytest.approx(
        record.counters.fp_ops / record.counters.cycles)
    assert record.mflops == pytest.approx(
        record.point.flops_per_cycle * MACHINE.clock_hz / 1e6)
    assert record.wall_seconds == pytest.approx(
        record.counters.cycles / MACHINE.clock_hz)


def test_run_probe_wallclock_keeps_virtual_point():
    params = ProbeParams(mode=AccessMode.RANDOM, mem_elements=4096,
                         vector_length=16, alpha=0.5, index_count=8, seed=1)
    virtual = run_probe(params, MACHINE, backend="virtual")
    walled = run_probe(params, MACHINE, backend="wallclock")
    assert walled.point == virtual.point
    assert walled.counters == virtual.counters
    assert walled.mflops > 0.0
    assert walled.wall_seconds > 0.0


def test_run_probe_rejects_unknown_backend():
    params = ProbeParams(mode=AccessMode.STRIDED, mem_elements=64)
    with pytest.raises(ValueError, match="backend"):
        run_probe(params, MACHINE, backend="hardware")


def test_record_entry_digest():
    params = ProbeParams(mode=AccessMode.STRIDED, mem_elements=64, stride=2)
    entry = record_entry(run_probe(params, SMALL))
    assert entry.digest == params_digest(params)
    assert entry.params == params


def test_run_sweep_writes_loadable_catalog(tmp_path):
    combos = expand_combos(tiny_config())
    out = tmp_path / "catalog.csv"
    catalog = run_sweep(combos, SMALL, out_path=out)
    assert len(catalog.entries) == 8
    loaded = load_catalog(out)
    assert [e.digest for e in loaded.entries] == [e.digest for e in catalog.entries]
    assert loaded.entries[0].params == combos[0]


def test_run_sweep_without_file():
    combos = expand_combos(tiny_config())
    catalog = run_sweep(combos, SMALL)
    assert len(catalog.entries) == 8


def test_run_sweep_resume_skips_existing(tmp_path):
    combos = expand_combos(tiny_config())
    out = tmp_path / "catalog.csv"
    run_sweep(combos[:3], SMALL, out_path=out)
    before = out.read_text()
    catalog = run_sweep(combos, SMALL, out_path=out, resume=True)
    after = out.read_text()
    assert after.startswith(before)
    assert len(catalog.entries) == 8
    digests = [e.digest for e in load_catalog(out).entries]
    assert len(digests) == len(set(digests))


def test_run_sweep_overwrites_without_resume(tmp_path):
    combos = expand_combos(tiny_config())
    out = tmp_path / "catalog.csv"
    run_sweep(combos, SMALL, out_path=out)
    first = out.read_text()
    run_sweep(combos, SMALL, out_path=out)
    assert out.read_text() == first


def test_run_sweep_parallel_matches_serial(tmp_path):
    combos = expand_combos(tiny_config())
    serial = tmp_path / "serial.csv"
    parallel = tmp_path / "parallel.csv"
    run_sweep(combos, SMALL, out_path=serial)
    run_sweep(combos, SMALL, out_path=parallel, jobs=2)
    assert parallel.read_text() == serial.read_text()
