import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memprobe.counters import (
    CSV_HEADER,
    CounterSample,
    CsvSchemaError,
    PointSource,
    metric_array,
    parse_samples,
    serialize_samples,
    summed_metric,
    to_metric,
    write_rejects,
)

GOOD_CSV = """timestamp,host_id,cpu_id,fp_ops,cycles,l3_misses
1000.5,n01,0,480,1000,2
1010.5,n01,1,960,2000,4
1020.5,n02,0,100,500,0
"""


def test_parse_valid_rows_in_order():
    res = parse_samples(io.StringIO(GOOD_CSV))
    assert not res.rejects
    assert [s.cpu_id for s in res.samples] == [0, 1, 0]
    assert res.samples[0] == CounterSample(1000.5, "n01", 0, 480, 1000, 2)


def test_header_is_a_hard_error():
    bad = GOOD_CSV.replace("l3_misses", "l3_miss")
    with pytest.raises(CsvSchemaError):
        parse_samples(io.StringIO(bad))
    with pytest.raises(CsvSchemaError):
        parse_samples(io.StringIO("timestamp,host_id\n1,2\n"))
    with pytest.raises(CsvSchemaError):
        parse_samples(io.StringIO(""))


def test_zero_cycles_rejected_with_reason():
    csv_text = GOOD_CSV + "1030.5,n02,1,50,0,1\n"
    res = parse_samples(io.StringIO(csv_text))
    assert len(res.samples) == 3
    assert len(res.rejects) == 1
    assert res.rejects[0].reason == "zero cycles"
    assert res.rejects[0].line_number == 5


def test_malformed_rows_rejected_not_fatal():
    csv_text = GOOD_CSV + (
        "1040,n03,x,1,2,3\n"          # bad cpu_id
        "1050,n03,0,1,2\n"            # short row
        "1060,n03,0,1,2,3,4\n"        # long row
        "1070,n03,0,-5,10,0\n"        # negative fp_ops
    )
    res = parse_samples(io.StringIO(csv_text))
    assert len(res.samples) == 3
    reasons = [r.reason for r in res.rejects]
    assert reasons == ["malformed cpu_id", "wrong field count",
                       "wrong field count", "negative fp_ops"]


def test_roundtrip_identity(tmp_path):
    res = parse_samples(io.StringIO(GOOD_CSV))
    out = tmp_path / "again.csv"
    serialize_samples(res.samples, out)
    res2 = parse_samples(out)
    assert res2.samples == res.samples
    assert not res2.rejects


def test_rejects_report_format(tmp_path):
    csv_text = GOOD_CSV + "1030.5,n02,1,50,0,1\n"
    res = parse_samples(io.StringIO(csv_text))
    path = tmp_path / "rejects.csv"
    write_rejects(res.rejects, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema_version=1.0")
    assert lines[1] == "line_number," + ",".join(CSV_HEADER) + ",reason"
    assert lines[2].endswith("zero cycles")


def test_to_metric_pinned_values():
    pt = to_metric(CounterSample(0, "h", 0, 480, 1000, 0))
    assert (pt.flops_per_cycle, pt.miss_bytes_per_cycle) == (0.48, 0.0)
    assert pt.source is PointSource.HARDWARE_SAMPLE
    pt2 = to_metric(CounterSample(0, "h", 0, 0, 640_000, 1000), line_bytes=128)
    assert pt2.miss_bytes_per_cycle == pytest.approx(0.2)


def test_to_metric_rejects_zero_cycles():
    with pytest.raises(ValueError):
        to_metric(CounterSample(0, "h", 0, 1, 0, 0))


@given(
    fp=st.integers(0, 10**12),
    cyc=st.integers(1, 10**12),
    miss=st.integers(0, 10**9),
    k=st.integers(1, 1000),
)
@settings(max_examples=60, deadline=None)
def test_to_metric_scale_invariant(fp, cyc, miss, k):
    a = to_metric(CounterSample(0, "h", 0, fp, cyc, miss))
    b = to_metric(CounterSample(0, "h", 0, fp * k, cyc * k, miss * k))
    assert b.flops_per_cycle == pytest.approx(a.flops_per_cycle, rel=1e-12)
    assert b.miss_bytes_per_cycle == pytest.approx(a.miss_bytes_per_cycle, rel=1e-12)


def test_summed_metric_is_ratio_of_sums():
    samples = [
        CounterSample(0, "h", 0, 100, 1000, 10),
        CounterSample(1, "h", 0, 900, 1000, 0),
        CounterSample(2, "h", 1, 0, 2000, 40),
    ]
    pt = summed_metric(samples)
    assert pt.flops_per_cycle == (100 + 900 + 0) / 4000
    assert pt.miss_bytes_per_cycle == (50 * 128) / 4000
    # merging is associative: same result from any split
    pt_merge = summed_metric([samples[0]] + samples[1:])
    assert pt_merge == pt


def test_summed_metric_empty_rejected():
    with pytest.raises(ValueError):
        summed_metric([])


def test_metric_array_matches_scalar_path():
    res = parse_samples(io.StringIO(GOOD_CSV))
    arr = metric_array(res.samples)
    assert arr.shape == (3, 2)
    for row, s in zip(arr, res.samples):
        pt = to_metric(s)
        assert row[0] == pytest.approx(pt.miss_bytes_per_cycle)
        assert row[1] == pytest.approx(pt.flops_per_cycle)
