"""Six-step protocol: structure, self-check identity, cross-machine runs."""

import dataclasses

import pytest

from memprobe.mixmodel import GridConfig
from memprobe.probes import AccessMode
from memprobe.sweep import SweepConfig
from memprobe.validate import (
    KERNEL_NAMES,
    SparseShape,
    ValidationConfig,
    build_instances,
    default_validation_config,
    load_report,
    measure_instance,
    run_validation,
    write_report,
)
from memprobe.vcache import MachineModel

MACHINE_A = MachineModel()
MACHINE_B = MachineModel(cache_bytes=2 << 20, associativity=8, clock_hz=2.4e9)


def small_config() -> ValidationConfig:
    # The strided ladder alone covers every rate band a small kernel can
    # land in (per-access miss ratio S/16 below the line size), so cell
    # coverage does not hinge on the random-draw family.
    sweep = SweepConfig(
        mem_elements=1 << 15,
        modes=(AccessMode.STRIDED, AccessMode.RANDOM),
        strides=(2, 3, 4, 5, 6, 8, 12, 16),
        intensities=(0, 1),
        alphas=tuple(i / 16 for i in range(17)),
        vector_lengths=(1, 2),
        random_intensities=(0,),
        index_counts=(50, 100),
        seed=5,
    )
    return ValidationConfig(
        mod2am_sizes=(24, 32),
        mod2as_shapes=(SparseShape(400, 300, 0.05),),
        grid=GridConfig(cell_width=4.0, cell_height=0.2),
        sweep=sweep,
        seed=5,
    )


def test_default_config_shape():
    config = default_validation_config()
    assert len(config.mod2am_sizes) >= 2
    assert len(config.mod2as_shapes) >= 2
    assert config.grid.n_cols == 1
    assert config.min_weight == 0.005


def test_build_instances_covers_both_kernels():
    instances = build_instances(small_config())
    assert [i.kernel for i in instances] == ["mod2am", "mod2am", "mod2as"]
    assert all(len(i.trace) > 0 for i in instances)
    assert instances[0].label == "m24n24k24"


def test_instances_are_machine_independent():
    config = small_config()
    first = build_instances(config)
    second = build_instances(config)
    for a, b in zip(first, second):
        assert (a.trace.element_indices == b.trace.element_indices).all()


def test_measure_instance_rate_scales_with_clock():
    instance = build_instances(small_config())[0]
    base = measure_instance(instance, MACHINE_A)
    doubled = measure_instance(
        instance, dataclasses.replace(MACHINE_A, clock_hz=3.2e9))
    assert doubled.mflops == pytest.approx(2 * base.mflops)
    assert doubled.point == base.point


def test_self_check_is_exact():
    report = run_validation(small_config(), MACHINE_A, MACHINE_A,
                            self_check=True)
    assert report["self_check"] is True
    for name in KERNEL_NAMES:
        block = report["kernels"][name]
        assert block["deviation_pct"] == {"original": 0.0, "target": 0.0}
        assert block["coverage"] == 1.0
        assert block["predicted_mflops"]["original"] == \
            block["actual_mflops"]["original"]


def test_self_check_requires_identical_machines():
    with pytest.raises(ValueError, match="identical machines"):
        run_validation(small_config(), MACHINE_A, MACHINE_B, self_check=True)


def test_two_machine_report_structure():
    report = run_validation(small_config(), MACHINE_A, MACHINE_B)
    assert report["kind"] == "validation_report"
    assert [s["step"] for s in report["steps"]] == [1, 2, 3, 4, 5, 6]
    assert report["machines"]["original"]["cache_bytes"] == 8 << 20
    assert report["machines"]["original"]["associativity"] == "full"
    assert report["machines"]["target"]["associativity"] == 8
    for name in KERNEL_NAMES:
        block = report["kernels"][name]
        assert set(block["deviation_pct"]) == {"original", "target"}
        assert block["actual_mflops"]["original"] > 0
        assert block["actual_mflops"]["target"] > 0
        assert len(block["selected"]) >= 1
        for cell in block["selected"]:
            assert cell["mflops_original"] > 0
            assert cell["mflops_target"] > 0


def test_report_round_trip(tmp_path):
    report = run_validation(small_config(), MACHINE_A, MACHINE_A,
                            self_check=True)
    path = tmp_path / "validation.json"
    write_report(report, path)
    assert load_report(path) == report


def test_load_report_rejects_wrong_kind(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema_version": "1.0", "kind": "weight_grid"}')
    with pytest.raises(ValueError, match="not a validation report"):
        load_report(path)


def test_load_report_rejects_wrong_version(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema_version": "2.0", "kind": "validation_report"}')
    with pytest.raises(ValueError, match="schema_version"):
        load_report(path)


def test_config_requires_instances():
    config = small_config()
    with pytest.raises(ValueError, match="at least one instance"):
        dataclasses.replace(config, mod2am_sizes=())
