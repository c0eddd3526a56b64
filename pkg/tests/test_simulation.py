from __future__ import annotations

import pytest

from wsplane.config import default_pipeline_configs
from wsplane.errors import PlaneError, ValidationError
from wsplane.plane import ControlPlane
from wsplane.simulation import (
    CacheState,
    ClockMode,
    PipelineConfig,
    WorkloadProfile,
    draw_stage_durations,
    generate_workload,
)
from wsplane.workspace import WorkspaceState

from .conftest import gpu_node, make_plane

PROFILE = WorkloadProfile(
    burst_duration_mean=3600.0,
    gap_duration_mean=7200.0,
    burst_util_mean=70.0,
    jobs_per_burst=3,
    failure_probability=0.1,
    seed=7,
)


def register_default_pipelines(plane):
    for config in default_pipeline_configs():
        plane.register_pipeline_config(config)


# ---- clock


def test_advance_emits_one_sample_per_gpu_node_per_minute(plane):
    plane.advance_clock(120)
    assert len(plane.store.samples["gpu-01"]) == 2


def test_advance_fires_job_completion(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(400)
    plane.run_job(ws.workspace_id, duration=50, util_percent=60, exit_code=0)
    assert ws.active_jobs
    plane.advance_clock(60)  # past the job's end
    assert not ws.active_jobs


def test_clock_monotone_and_positive_delta(plane):
    with pytest.raises(ValidationError):
        plane.advance_clock(0)
    with pytest.raises(ValidationError):
        plane.advance_clock(-5)


def test_realtime_mode_rejects_advance():
    plane = ControlPlane(clock_mode=ClockMode.REAL_TIME)
    with pytest.raises(PlaneError):
        plane.advance_clock(10)


def test_split_advance_equals_single_advance():
    def run(splits):
        plane = make_plane()
        ws = plane.create_workspace("alice", "pytorch-a5000")
        for delta in splits:
            plane.advance_clock(delta)
        return plane, ws

    one, _ = run([360])
    two, _ = run([60, 60, 120, 120])
    domain = lambda p: [
        (e.timestamp, e.kind, e.payload) for e in p.log.events if e.kind != "clock_advanced"
    ]
    assert domain(one) == domain(two)
    assert one.state_digest() == two.state_digest()


# ---- job utilisation sampling


def test_hour_long_job_gives_sixty_samples_at_80(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(300)  # Running exactly at t=300
    plane.run_job(ws.workspace_id, duration=3600, util_percent=80, exit_code=0)
    plane.advance_clock(3600)
    samples = plane.store.samples["gpu-01"]
    during = [s for s in samples if 300 < s.timestamp <= 3900]
    assert len(during) == 60
    assert all(s.gpu_util_percent == pytest.approx(80.0) for s in during)


def test_overlapping_jobs_cap_at_100(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(300)
    plane.run_job(ws.workspace_id, duration=600, util_percent=60, exit_code=0)
    plane.run_job(ws.workspace_id, duration=600, util_percent=60, exit_code=0)
    plane.advance_clock(600)
    during = [s for s in plane.store.samples["gpu-01"] if 300 < s.timestamp <= 900]
    assert all(s.gpu_util_percent == pytest.approx(100.0) for s in during)


def test_idle_node_samples_zero(plane):
    plane.advance_clock(600)
    assert all(s.gpu_util_percent == 0.0 for s in plane.store.samples["gpu-01"])


def test_partial_minute_integration(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    plane.advance_clock(300)
    plane.run_job(ws.workspace_id, duration=30, util_percent=100, exit_code=0)
    plane.advance_clock(60)
    sample = [s for s in plane.store.samples["gpu-01"] if s.timestamp == 360][0]
    assert sample.gpu_util_percent == pytest.approx(50.0)  # 30 s of 100% in the minute


def test_job_requires_running_workspace(plane):
    ws = plane.create_workspace("alice", "pytorch-a5000")
    with pytest.raises(PlaneError):
        plane.run_job(ws.workspace_id, 60, 50, 0)


# ---- workload generation


def test_zero_jobs_per_burst_empty_schedule():
    profile = WorkloadProfile(3600, 7200, 70, 0, 0.1, seed=1)
    plan = generate_workload(profile, ["a", "b"], 86400, "t")
    assert plan.jobs == []


def test_empty_researchers_empty_schedule():
    assert generate_workload(PROFILE, [], 86400, "t").jobs == []


def test_workload_deterministic_per_seed():
    one = generate_workload(PROFILE, ["a", "b"], 86400, "t")
    two = generate_workload(PROFILE, ["a", "b"], 86400, "t")
    assert [j.to_dict() for j in one.jobs] == [j.to_dict() for j in two.jobs]
    assert [a.to_dict() for a in one.actions] == [a.to_dict() for a in two.actions]
    other = generate_workload(
        WorkloadProfile(3600, 7200, 70, 3, 0.1, seed=8), ["a", "b"], 86400, "t"
    )
    assert [j.to_dict() for j in other.jobs] != [j.to_dict() for j in one.jobs]


def test_workload_exit_codes_follow_failure_probability():
    profile = WorkloadProfile(3600, 3600, 70, 4, 0.5, seed=3)
    plan = generate_workload(profile, [f"r{i}" for i in range(20)], 7 * 86400, "t")
    failures = sum(1 for j in plan.jobs if j.exit_code == 1)
    assert 0.4 < failures / len(plan.jobs) < 0.6


# ---- pipelines


def test_project_a_total_in_measured_range(plane):
    register_default_pipelines(plane)
    for seed in range(12):
        run = plane.run_pipeline_to_completion("project-a", seed=seed)
        assert run.succeeded
        assert 201.0 <= run.total <= 220.0


def test_project_c_under_five_minutes(plane):
    register_default_pipelines(plane)
    for seed in range(12):
        run = plane.run_pipeline_to_completion("project-c", seed=seed)
        assert 240.0 <= run.total <= 300.0
        assert run.total < 300.0


def test_validate_failure_fails_fast(plane):
    register_default_pipelines(plane)
    run = plane.run_pipeline_to_completion("project-a", seed=0, fail_at="lint")
    assert run.status == "FailedAtStage(lint)"
    stages = [s for s, _ in run.stage_durations]
    assert stages == ["lint"]  # no build, push or deploy records
    assert run.finished and not run.succeeded


def test_pipeline_total_is_sum_of_executed_stages(plane):
    register_default_pipelines(plane)
    run = plane.run_pipeline_to_completion("project-b", seed=4)
    assert run.total == pytest.approx(sum(d for _, d in run.stage_durations))


def test_pipeline_latency_record_created(plane):
    register_default_pipelines(plane)
    run = plane.run_pipeline_to_completion("project-a", seed=1)
    records = [r for r in plane.store.latencies if r.workspace_id == run.run_id]
    assert len(records) == 1
    assert records[0].duration == pytest.approx(run.total)


def test_failed_pipeline_has_no_latency_record(plane):
    register_default_pipelines(plane)
    run = plane.run_pipeline_to_completion("project-b", seed=2, fail_at="quality")
    assert all(r.workspace_id != run.run_id for r in plane.store.latencies)


def test_stage_order_validation():
    with pytest.raises(ValidationError):
        PipelineConfig("bad", ("lint", "push", "build", "deploy-helm"))  # push before build
    with pytest.raises(ValidationError):
        PipelineConfig("bad", ("lint", "build", "push"))  # no deploy
    with pytest.raises(ValidationError):
        PipelineConfig("bad", ("deploy-helm", "lint", "build", "push", "deploy-crd"))
    with pytest.raises(ValidationError):
        PipelineConfig("bad", ("lint", "mystery", "build", "push", "deploy-crd"))


def test_draws_respect_configured_ranges_and_seed():
    config = default_pipeline_configs()[0]
    durations = draw_stage_durations(config, 5)
    assert durations == draw_stage_durations(config, 5)
    assert durations != draw_stage_durations(config, 6)
    for stage, duration in zip(config.stages, durations):
        lo, hi = config.range_for(stage)
        assert lo <= duration < hi


def test_cache_miss_penalty_applies_to_build():
    base = default_pipeline_configs()[0]
    miss = PipelineConfig(
        project_name="project-a-miss",
        stages=base.stages,
        stage_duration_ranges=base.stage_duration_ranges,
        cache=CacheState.MISS,
    )
    lo_hit, hi_hit = base.range_for("build")
    lo_miss, hi_miss = miss.range_for("build")
    assert (lo_miss, hi_miss) == (lo_hit + 120.0, hi_hit + 120.0)
    assert miss.range_for("lint") == base.range_for("lint")


def test_stage_boundaries_fire_on_clock(plane):
    register_default_pipelines(plane)
    run_id = plane.run_pipeline("project-a", seed=0)
    run = plane.pipeline_run(run_id)
    assert run.stage_durations == []
    plane.advance_clock(75)  # past lint only
    assert [s for s, _ in run.stage_durations] == ["lint"]
    plane.advance_clock(400)
    assert run.succeeded
