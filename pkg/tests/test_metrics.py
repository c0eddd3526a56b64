from __future__ import annotations

import random

import pytest

from wsplane.errors import NotFoundError, PlaneError, ValidationError
from wsplane.metrics import (
    LatencyCondition,
    LatencyRecord,
    MetricsStore,
    Targets,
    UtilSample,
    export_samples,
    idle_intervals,
    read_sample_trace,
    reproducibility_rate,
    summary_report,
    utilisation,
)
from wsplane.workspace import WorkspaceState

from .conftest import gpu_node, make_plane
from .oracles import brute_idle_intervals, brute_mean_utilisation


def trace_store(values, node_id="n1", t0=60.0) -> MetricsStore:
    store = MetricsStore()
    for i, pct in enumerate(values):
        store.add_sample(UtilSample(node_id, t0 + 60.0 * i, pct))
    return store


# ---- deployment latency


def test_warm_latency_is_twenty_seconds(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(400)
    plane.stop(ws.workspace_id)
    plane.restart(ws.workspace_id)
    plane.advance_clock(60)
    records = [r for r in plane.store.latencies if r.workspace_id == ws.workspace_id]
    warm = [r for r in records if r.condition is LatencyCondition.WARM]
    assert len(warm) == 1
    assert warm[0].duration == pytest.approx(20.0)


def test_cold_latency_is_three_hundred_seconds(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(400)
    record = plane.deployment_latency(ws.workspace_id)
    assert record.condition is LatencyCondition.COLD
    assert record.duration == pytest.approx(300.0)


def test_latency_is_plain_subtraction(plane):
    # queue the workspace behind a full node: duration = wait + start
    first = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(400)
    second = plane.create_workspace("bob", "pytorch-a5000")
    plane.advance_clock(123)  # waits in queue
    plane.stop(first.workspace_id)
    plane.advance_clock(400)
    record = plane.deployment_latency(second.workspace_id)
    running_at = second.first_running_at()
    assert record.duration == pytest.approx(running_at - second.created_at)


def test_latency_requires_a_run(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    with pytest.raises(PlaneError) as err:
        plane.deployment_latency(ws.workspace_id)
    assert err.value.code == "never_ran"


# ---- reproducibility rate


def test_rate_all_pass():
    store = MetricsStore()
    for i in range(100):
        store.health.append((float(i), True))
    assert reproducibility_rate(store, 0, 100) == 1.0


def test_rate_99_of_100_meets_target():
    store = MetricsStore()
    for i in range(99):
        store.health.append((float(i), True))
    store.health.append((99.0, False))
    rate = reproducibility_rate(store, 0, 100)
    assert rate == pytest.approx(0.99)
    assert rate >= Targets().reproducibility_rate


def test_rate_empty_window_is_an_error_not_zero():
    store = MetricsStore()
    store.health.append((500.0, True))
    with pytest.raises(ValidationError):
        reproducibility_rate(store, 0, 100)


def test_rate_monotone_under_new_reports():
    store = MetricsStore()
    store.health.append((1.0, True))
    store.health.append((2.0, False))
    before = reproducibility_rate(store, 0, 10)
    store.health.append((3.0, True))
    assert reproducibility_rate(store, 0, 10) >= before
    store.health.append((4.0, False))
    after = reproducibility_rate(store, 0, 10)
    assert after <= reproducibility_rate(store, 0, 3.5)


# ---- utilisation


def test_utilisation_idle_cluster_is_zero():
    store = trace_store([0.0] * 50)
    assert utilisation(store, 0, 1e9) == 0.0


def test_utilisation_half_and_half():
    store = trace_store([100.0] * 30 + [0.0] * 30)
    assert utilisation(store, 0, 1e9) == pytest.approx(0.5)


def test_utilisation_matches_brute_mean_on_bursty_trace():
    rng = random.Random(5)
    values = [rng.choice([0.0, 0.0, 35.0, 80.0, 100.0]) for _ in range(500)]
    store = trace_store(values)
    expected = brute_mean_utilisation([(s.timestamp, s.gpu_util_percent) for s in store.samples["n1"]], 0, 1e9)
    assert utilisation(store, 0, 1e9) == pytest.approx(expected)


def test_utilisation_requires_samples():
    with pytest.raises(ValidationError):
        utilisation(MetricsStore(), 0, 100)


# ---- idle intervals


def test_thirty_zero_samples_is_one_half_hour_interval():
    store = trace_store([0.0] * 30)
    intervals = idle_intervals(store, "n1", 0, 1e9)
    assert len(intervals) == 1
    interval = intervals[0]
    assert interval.duration == pytest.approx(30 * 60.0)
    assert interval.start == 60.0 and interval.end == 60.0 + 30 * 60.0


def test_29_samples_then_spike_is_no_interval():
    store = trace_store([0.0] * 29 + [50.0])
    assert idle_intervals(store, "n1", 0, 1e9) == []


def test_interval_maximality_not_extendable():
    values = [80.0] + [1.0] * 45 + [80.0] + [2.0] * 30
    store = trace_store(values)
    intervals = idle_intervals(store, "n1", 0, 1e9)
    assert len(intervals) == 2
    assert intervals[0].start == 60.0 + 60.0  # right after the busy sample
    assert intervals[0].duration == pytest.approx(45 * 60.0)
    assert intervals[1].duration == pytest.approx(30 * 60.0)


def test_unknown_node_idle_query():
    with pytest.raises(NotFoundError):
        idle_intervals(MetricsStore(), "ghost", 0, 1)


@pytest.mark.parametrize("seed", range(6))
def test_idle_intervals_match_window_scan_oracle(seed):
    rng = random.Random(seed)
    values = []
    while len(values) < 1200:
        if rng.random() < 0.35:  # idle stretch
            values.extend([rng.uniform(0, 4.9) for _ in range(rng.randint(5, 70))])
        else:
            values.extend([rng.uniform(5.0, 100.0) for _ in range(rng.randint(1, 30))])
    store = trace_store(values)
    got = [(i.start, i.end) for i in idle_intervals(store, "n1", 0, 1e12)]
    samples = store.samples["n1"]
    expected = brute_idle_intervals(
        [s.timestamp for s in samples], [s.gpu_util_percent for s in samples]
    )
    assert got == expected


def test_intervals_disjoint_and_ordered():
    rng = random.Random(42)
    values = [rng.choice([0.0, 1.0, 4.9, 5.0, 60.0]) for _ in range(800)]
    store = trace_store(values)
    intervals = idle_intervals(store, "n1", 0, 1e12)
    for a, b in zip(intervals, intervals[1:]):
        assert a.end <= b.start


# ---- onboarding


def test_onboarding_two_hours(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(400)
    plane.run_job(ws.workspace_id, duration=2 * 3600 - 400, util_percent=80, exit_code=0)
    plane.advance_clock(2 * 3600)
    record = plane.onboarding_time("alice")
    assert record.duration == pytest.approx(2 * 3600.0)
    assert record.assisted is False


def test_failed_jobs_never_stop_the_clock(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(400)
    for _ in range(3):
        plane.run_job(ws.workspace_id, 60, 50, exit_code=1)
        plane.advance_clock(120)
    record = plane.onboarding_time("alice")
    assert record.first_success_at is None  # still pending


def test_assisted_flag_set_via_api(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(400)
    plane.set_assisted("alice", True)
    plane.run_job(ws.workspace_id, 60, 50, exit_code=0)
    plane.advance_clock(120)
    record = plane.onboarding_time("alice")
    assert record.assisted is True
    assert record.duration is not None  # duration still computed


def test_unknown_researcher(plane):
    with pytest.raises(NotFoundError):
        plane.onboarding_time("ghost")


# ---- summary report


def test_summary_clean_warm_run_meets_latency_target():
    store = MetricsStore()
    for i in range(5):
        store.latencies.append(LatencyRecord(f"w{i}", LatencyCondition.WARM, 20.0, float(i)))
    summary = summary_report(store, 0, 10, Targets())
    assert summary["deployment_latency"]["warm"]["met"] is True
    assert summary["deployment_latency"]["cold"] is None


def test_summary_empty_history_all_unavailable():
    summary = summary_report(MetricsStore(), 0, 10, Targets())
    assert summary["deployment_latency"]["available"] is False
    assert summary["reproducibility"]["available"] is False
    assert summary["reproducibility"]["met"] is None  # target not evaluated
    assert summary["onboarding"]["available"] is False
    assert summary["utilisation"]["available"] is False


def test_summary_flags_utilisation_below_baseline():
    store = trace_store([10.0] * 100)
    summary = summary_report(store, 0, 1e9, Targets())
    assert summary["utilisation"]["value"] == pytest.approx(0.10)
    assert summary["utilisation"]["below_baseline"] is True


def test_all_rates_bounded():
    store = trace_store([100.0] * 10)
    store.health.append((60.0, True))
    summary = summary_report(store, 0, 1e9, Targets())
    assert 0.0 <= summary["utilisation"]["value"] <= 1.0
    assert 0.0 <= summary["reproducibility"]["rate"] <= 1.0


# ---- trace round-trip


def test_sample_trace_round_trip(tmp_path, plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(400)
    plane.run_job(ws.workspace_id, 600, 75, 0)
    plane.advance_clock(900)
    path = tmp_path / "trace.csv"
    count = export_samples(plane.store, str(path))
    assert count == sum(len(t) for t in plane.store.samples.values())

    fresh = make_plane(nodes=[gpu_node("gpu-01")])
    fresh.import_samples(read_sample_trace(str(path)))
    assert fresh.store.samples["gpu-01"] == plane.store.samples["gpu-01"]
    assert fresh.utilisation(0, 1e9) == plane.utilisation(0, 1e9)


def test_import_rejects_off_cadence(plane):
    with pytest.raises(ValidationError):
        plane.import_samples([UtilSample("gpu-01", 60.0, 0.0), UtilSample("gpu-01", 150.0, 0.0)])
