"""Test gate, CSV ingestion, metrics and comparison."""

from __future__ import annotations

import math
import random
import sys
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sysopt.errors import CommandNotFound, EmptyBenchmarkFile, NoSuccessfulSamples, UnrecognizedHeader
from sysopt.evaluation import (
    METRIC_KEYS,
    BenchmarkMetrics,
    BenchmarkSample,
    compare,
    compute_metrics,
    evaluate_files,
    format_percent,
    load_comparison,
    nearest_rank,
    parse_samples,
    render_comparison,
    run_test_gate,
    save_comparison,
)

HEADER = "timeStamp,elapsed,label,success\n"


# -- gate ----------------------------------------------------------------------

def test_gate_pass_and_fail(tmp_path):
    ok = run_test_gate("true", tmp_path)
    assert ok.passed and ok.exit_code == 0 and not ok.timed_out
    bad = run_test_gate(f"{sys.executable} -c 'import sys; print(\"boom\"); sys.exit(3)'", tmp_path,
                        output_path=tmp_path / "out.txt")
    assert not bad.passed and bad.exit_code == 3
    assert (tmp_path / "out.txt").read_text().strip() == "boom"
    assert bad.captured_output_path == str(tmp_path / "out.txt")


def test_gate_runs_in_the_workspace(tmp_path):
    (tmp_path / "marker").write_text("x")
    assert run_test_gate("test -f marker", tmp_path).passed
    assert not run_test_gate("test -f marker", tmp_path / "..").passed


def test_gate_timeout_is_a_failure(tmp_path):
    outcome = run_test_gate("sleep 30", tmp_path, timeout_s=0.3)
    assert outcome.timed_out and not outcome.passed and outcome.exit_code == -1
    assert outcome.duration_s < 5


def test_gate_missing_command(tmp_path):
    with pytest.raises(CommandNotFound):
        run_test_gate("definitely-not-a-command-xyz --all", tmp_path)
    with pytest.raises(CommandNotFound):
        run_test_gate("./missing.sh", tmp_path)
    with pytest.raises(CommandNotFound):
        run_test_gate("   ", tmp_path)


def test_gate_relative_script(tmp_path):
    script = tmp_path / "check.sh"
    script.write_text("#!/bin/sh\nexit 0\n")
    script.chmod(0o755)
    assert run_test_gate("./check.sh", tmp_path).passed


# -- parsing -------------------------------------------------------------------

def test_malformed_rows_are_counted(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text(HEADER + "1000,5,home,true\n1010,7,home,TRUE\nbad,1,x,true\n1020,9,cart,false\n")
    samples = parse_samples(p)
    assert [(s.timestamp_ms, s.elapsed_ms, s.success) for s in samples] == [
        (1000, 5, True), (1010, 7, True), (1020, 9, False)]
    assert samples.skipped_rows == 1


@pytest.mark.parametrize("row", ["1,-3,a,true", "1,2,a,yes", "1,2,a", "1,2.5,a,true", "1,2,a,true,extra"])
def test_each_kind_of_bad_row_is_skipped(tmp_path, row):
    p = tmp_path / "s.csv"
    p.write_text(HEADER + "1,2,a,true\n" + row + "\n")
    assert parse_samples(p).skipped_rows == 1


def test_jmeter_style_extra_columns_and_bom(tmp_path):
    p = tmp_path / "s.csv"
    p.write_bytes(b"\xef\xbb\xbftimeStamp,elapsed,label,responseCode,success,threadName\n"
                  b"5,10,\"a, b\",200,true,t1\n")
    (s,) = parse_samples(p)
    assert s == BenchmarkSample(5, 10, "a, b", True)


def test_header_only_and_empty_files(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text(HEADER)
    with pytest.raises(EmptyBenchmarkFile):
        parse_samples(p)
    p.write_text("")
    with pytest.raises(EmptyBenchmarkFile):
        parse_samples(p)
    p.write_text(HEADER + "x,y,z,w\n")
    with pytest.raises(EmptyBenchmarkFile, match="1 malformed"):
        parse_samples(p)


def test_unrecognized_header(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("time,ms,label,ok\n1,2,a,true\n")
    with pytest.raises(UnrecognizedHeader, match="timeStamp"):
        parse_samples(p)


def test_large_file(tmp_path):
    n = 800_000
    p = tmp_path / "big.csv"
    with open(p, "w") as fh:
        fh.write(HEADER)
        fh.writelines(f"{1_700_000_000_000 + i},{i % 50},req,true\n" for i in range(n))
    samples = parse_samples(p)
    assert len(samples) == n and samples.skipped_rows == 0


# -- metrics -------------------------------------------------------------------

def _uniform_hundred():
    return [BenchmarkSample(i * 100, i + 1, "r", True) for i in range(100)]


def test_hundred_samples_over_ten_seconds():
    m = compute_metrics(_uniform_hundred())
    assert m.throughput_rps == pytest.approx(10.0)
    assert (m.p50_ms, m.p90_ms, m.p99_ms) == (50, 90, 99)
    assert m.avg_rt_ms == pytest.approx(50.5)
    assert (m.total_requests, m.success_count) == (100, 100)


def test_single_sample():
    m = compute_metrics([BenchmarkSample(0, 7, "r", True)])
    assert m.avg_rt_ms == 7 and m.p50_ms == m.p90_ms == m.p99_ms == 7
    assert m.throughput_rps == pytest.approx(1000 / 7)


def test_failures_count_toward_span_not_latency():
    samples = _uniform_hundred() + [BenchmarkSample(20_000, 5000, "r", False)]
    m = compute_metrics(samples)
    assert m.success_count == 100 and m.total_requests == 101
    assert m.throughput_rps == pytest.approx(100 / 25.0)
    assert m.p99_ms == 99


def test_all_failures():
    with pytest.raises(NoSuccessfulSamples):
        compute_metrics([BenchmarkSample(0, 1, "r", False)])


@pytest.mark.parametrize("n", [1, 2, 3, 7, 10, 99, 100, 101, 1000])
def test_nearest_rank_matches_inverted_cdf(n):
    values = sorted(random.Random(n).randint(0, 500) for _ in range(n))
    for p in (50, 90, 99):
        assert nearest_rank(values, p) == np.percentile(values, p, method="inverted_cdf")


# -- comparison ----------------------------------------------------------------

TABLE2 = {
    "throughput_rps": (1197.79, 1635.89, Decimal("36.58")),
    "avg_rt_ms": (12.84, 9.27, Decimal("-27.81")),
    "p50_ms": (13.0, 9.0, Decimal("-30.77")),
    "p90_ms": (23.0, 18.0, Decimal("-21.74")),
    "p99_ms": (26.0, 23.0, Decimal("-11.54")),
}


def _metrics(which):
    vals = {k: v[which] for k, v in TABLE2.items()}
    return BenchmarkMetrics(1000, 1000, **vals)


def test_published_improvements_are_reproduced():
    report = compare(_metrics(0), _metrics(1))
    for key, (_, _, published) in TABLE2.items():
        assert abs(Decimal(repr(report.improvement[key])) - published) <= Decimal("0.01"), key
    assert report.display["throughput_rps"] == "+36.58%"
    assert report.display["p50_ms"] == "-30.77%"
    # raw values keep full precision; only the display is rounded
    assert report.improvement["avg_rt_ms"] == pytest.approx((9.27 - 12.84) / 12.84 * 100)
    assert report.display["avg_rt_ms"] == "-27.80%"


def test_identical_inputs_show_zero():
    m = _metrics(0)
    report = compare(m, m)
    assert set(report.display.values()) == {"0.00%"}


def test_half_up_display_and_zero_baseline():
    assert format_percent(0.125) == "+0.13%"
    assert format_percent(-0.125) == "-0.13%"
    assert format_percent(-0.001) == "0.00%"
    assert format_percent(None) == "n/a"
    zero = BenchmarkMetrics(1, 1, 0.0, 1.0, 1.0, 1.0, 1.0)
    assert compare(zero, _metrics(1)).display["throughput_rps"] == "n/a"


def test_comparison_round_trip_and_render(tmp_path):
    report = compare(_metrics(0), _metrics(1))
    again = load_comparison(save_comparison(report, tmp_path / "c.json"))
    assert again == report and again.consistent()
    again.improvement["p50_ms"] += 1
    assert not again.consistent()
    text = render_comparison(report)
    assert "Throughput (req/s)" in text and "+36.58%" in text


def test_evaluate_files(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text(HEADER + "".join(f"{i * 100},{i + 1},r,true\n" for i in range(100)))
    b.write_text(HEADER + "".join(f"{i * 50},{(i + 1) // 2 or 1},r,true\n" for i in range(100)))
    report = evaluate_files(a, b)
    assert report.original.throughput_rps == pytest.approx(10.0)
    assert report.improvement["throughput_rps"] > 0 > report.improvement["p50_ms"]


# -- properties ----------------------------------------------------------------

_samples = st.lists(
    st.builds(BenchmarkSample, st.integers(0, 10**6), st.integers(0, 5000), st.just("r"),
              st.booleans()),
    min_size=1, max_size=60,
).filter(lambda xs: any(s.success for s in xs))


@settings(max_examples=1000, deadline=None)
@given(_samples, st.randoms(use_true_random=False), st.integers(1, 20))
def test_metric_properties(samples, rnd, k):
    m = compute_metrics(samples)
    assert m.p50_ms <= m.p90_ms <= m.p99_ms
    assert m.success_count <= m.total_requests

    shuffled = list(samples)
    rnd.shuffle(shuffled)
    assert compute_metrics(shuffled) == m

    scaled = compute_metrics([BenchmarkSample(s.timestamp_ms, s.elapsed_ms * k, s.label, s.success)
                              for s in samples])
    assert (scaled.p50_ms, scaled.p90_ms, scaled.p99_ms) == (m.p50_ms * k, m.p90_ms * k, m.p99_ms * k)
    assert math.isclose(scaled.avg_rt_ms, m.avg_rt_ms * k, rel_tol=1e-12, abs_tol=1e-9)
    # a zero baseline (all-zero latencies) has no defined percentage
    assert all(v in (0, None) for v in compare(scaled, scaled).improvement.values())

    ok = sorted(s.elapsed_ms for s in samples if s.success)
    for key, p in (("p50_ms", 50), ("p90_ms", 90), ("p99_ms", 99)):
        assert getattr(m, key) == ok[math.ceil(p * len(ok) / 100) - 1]
    assert set(METRIC_KEYS) <= set(vars(m))
