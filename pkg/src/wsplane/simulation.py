"""Virtual clock, bursty workload generation and the staged CI/CD model."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from enum import Enum

from .errors import ValidationError

VALIDATE_STAGES = ("lint", "quality", "test")
BUILD_STAGE = "build"
PUSH_STAGE = "push"
DEPLOY_STAGES = ("deploy-helm", "deploy-crd")
ALL_STAGES = VALIDATE_STAGES + (BUILD_STAGE, PUSH_STAGE) + DEPLOY_STAGES

# Generic per-stage-family duration ranges, in seconds. Per-project
# configs usually override these with values calibrated against measured
# end-to-end runs.
DEFAULT_STAGE_RANGES: dict[str, tuple[float, float]] = {
    "lint": (60.0, 90.0),
    "quality": (60.0, 90.0),
    "test": (60.0, 90.0),
    "build": (45.0, 90.0),
    "push": (15.0, 30.0),
    "deploy-helm": (60.0, 90.0),
    "deploy-crd": (60.0, 90.0),
}
DEFAULT_CACHE_MISS_PENALTY = 120.0  # added to the build stage on a cache miss


class ClockMode(str, Enum):
    VIRTUAL = "Virtual"
    REAL_TIME = "RealTime"


class SimClock:
    """Monotonic simulation clock.

    Virtual time moves only through explicit advances. RealTime mode
    simply tracks the wall clock and rejects advances; it exists so a
    served instance can be run against real elapsed time, but none of
    the shipped scenarios use it.
    """

    def __init__(self, mode: ClockMode = ClockMode.VIRTUAL):
        self.mode = mode
        self._now = 0.0
        self._wall0 = time.monotonic() if mode is ClockMode.REAL_TIME else 0.0

    @property
    def now(self) -> float:
        if self.mode is ClockMode.REAL_TIME:
            return self._now + (time.monotonic() - self._wall0)
        return self._now

    def catch_up(self, ts: float) -> None:
        if ts > self._now:
            self._now = ts


class CacheState(str, Enum):
    HIT = "Hit"
    MISS = "Miss"


@dataclass(frozen=True)
class PipelineConfig:
    project_name: str
    stages: tuple[str, ...]
    stage_duration_ranges: dict[str, tuple[float, float]] = field(default_factory=dict)
    cache: CacheState = CacheState.HIT
    cache_miss_penalty: float = DEFAULT_CACHE_MISS_PENALTY

    def __post_init__(self):
        if not self.stages:
            raise ValidationError("invalid_pipeline", "stage list is empty", "stages")
        unknown = [s for s in self.stages if s not in ALL_STAGES]
        if unknown:
            raise ValidationError("invalid_pipeline", f"unknown stages {unknown}", "stages")
        if len(set(self.stages)) != len(self.stages):
            raise ValidationError("invalid_pipeline", "duplicate stages", "stages")
        deploys = [s for s in self.stages if s in DEPLOY_STAGES]
        if len(deploys) != 1 or self.stages[-1] not in DEPLOY_STAGES:
            raise ValidationError("invalid_pipeline", "exactly one deploy stage, and it must be last", "stages")
        order = {s: i for i, s in enumerate(self.stages)}
        build, push, deploy = order.get(BUILD_STAGE), order.get(PUSH_STAGE), order[self.stages[-1]]
        if build is None or push is None or not build < push < deploy:
            raise ValidationError("invalid_pipeline", "build must precede push must precede deploy", "stages")

    def range_for(self, stage: str) -> tuple[float, float]:
        lo, hi = self.stage_duration_ranges.get(stage, DEFAULT_STAGE_RANGES[stage])
        if stage == BUILD_STAGE and self.cache is CacheState.MISS:
            lo, hi = lo + self.cache_miss_penalty, hi + self.cache_miss_penalty
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "project_name": self.project_name,
            "stages": list(self.stages),
            "stage_duration_ranges": {k: list(v) for k, v in self.stage_duration_ranges.items()},
            "cache": self.cache.value,
            "cache_miss_penalty": self.cache_miss_penalty,
        }


@dataclass
class PipelineRun:
    run_id: str
    project_name: str
    started_at: float
    stage_durations: list[tuple[str, float]] = field(default_factory=list)
    failed_stage: str | None = None
    finished: bool = False

    @property
    def total(self) -> float:
        return sum(d for _, d in self.stage_durations)

    @property
    def succeeded(self) -> bool:
        return self.finished and self.failed_stage is None

    @property
    def status(self) -> str:
        if not self.finished:
            return "InProgress"
        return "Succeeded" if self.failed_stage is None else f"FailedAtStage({self.failed_stage})"

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "project_name": self.project_name,
            "started_at": self.started_at,
            "stage_durations": [[s, d] for s, d in self.stage_durations],
            "total": self.total,
            "status": self.status,
        }


def draw_stage_durations(config: PipelineConfig, seed) -> list[float]:
    """Draw one duration per configured stage, uniform over [lo, hi).

    The half-open interval keeps a run whose published bound is exactly
    the sum of stage maxima strictly under that bound.
    """
    rng = random.Random(f"pipeline:{config.project_name}:{seed}")
    durations = []
    for stage in config.stages:
        lo, hi = config.range_for(stage)
        durations.append(lo + (hi - lo) * rng.random())
    return durations


@dataclass(frozen=True)
class WorkloadProfile:
    """Bursty per-researcher activity: busy bursts separated by long gaps."""

    burst_duration_mean: float
    gap_duration_mean: float
    burst_util_mean: float
    jobs_per_burst: int
    failure_probability: float
    seed: int

    def __post_init__(self):
        if self.burst_duration_mean <= 0 or self.gap_duration_mean <= 0:
            raise ValidationError("invalid_profile", "duration means must be positive")
        if not 0.0 <= self.failure_probability <= 1.0:
            raise ValidationError("invalid_profile", "failure_probability outside [0, 1]")
        if self.jobs_per_burst < 0:
            raise ValidationError("invalid_profile", "jobs_per_burst must be non-negative")
        if not 0.0 <= self.burst_util_mean <= 100.0:
            raise ValidationError("invalid_profile", "burst_util_mean outside [0, 100]")

    def to_dict(self) -> dict:
        return {
            "burst_duration_mean": self.burst_duration_mean,
            "gap_duration_mean": self.gap_duration_mean,
            "burst_util_mean": self.burst_util_mean,
            "jobs_per_burst": self.jobs_per_burst,
            "failure_probability": self.failure_probability,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class JobSubmission:
    job_id: str
    researcher: str
    submit_at: float
    duration: float
    util_percent: float
    exit_code: int

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "researcher": self.researcher,
            "submit_at": self.submit_at,
            "duration": self.duration,
            "util_percent": self.util_percent,
            "exit_code": self.exit_code,
        }


@dataclass(frozen=True)
class TimedAction:
    """A scripted operation fired at a simulated timestamp."""

    action_id: str
    at: float
    op: str
    args: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"action_id": self.action_id, "at": self.at, "op": self.op, "args": dict(self.args)}


@dataclass
class WorkloadPlan:
    jobs: list[JobSubmission] = field(default_factory=list)
    actions: list[TimedAction] = field(default_factory=list)


# Workspaces are stopped this long after a burst's nominal end so jobs
# delayed by a cold start or queueing can still finish; the stop action
# additionally skips itself while work is in flight.
STOP_GRACE = 420.0


def generate_workload(
    profile: WorkloadProfile,
    researchers: list[str],
    horizon: float,
    template: str,
) -> WorkloadPlan:
    """Produce the full submission and lifecycle-action schedule.

    Each researcher alternates exponentially-distributed gaps and bursts,
    starting inside a gap so the cohort is desynchronised. A burst opens
    with an ensure-running action (create on first use, restart after),
    runs `jobs_per_burst` back-to-back jobs, and closes with a
    stop-if-idle action shortly after the last job.
    """
    if horizon <= 0:
        raise ValidationError("invalid_horizon", "horizon must be positive", "horizon")
    plan = WorkloadPlan()
    if not researchers:
        return plan
    job_n = 0
    action_n = 0
    for researcher in researchers:
        rng = random.Random(f"workload:{profile.seed}:{researcher}")
        t = rng.expovariate(1.0 / profile.gap_duration_mean)
        while t < horizon:
            burst_len = rng.expovariate(1.0 / profile.burst_duration_mean)
            plan.actions.append(
                TimedAction(
                    f"act-{action_n:06d}",
                    t,
                    "ensure_running",
                    {"researcher": researcher, "template": template},
                )
            )
            action_n += 1
            if profile.jobs_per_burst > 0:
                job_len = burst_len / profile.jobs_per_burst
                for k in range(profile.jobs_per_burst):
                    util = profile.burst_util_mean * (0.8 + 0.4 * rng.random())
                    util = min(100.0, max(0.0, util))
                    exit_code = 1 if rng.random() < profile.failure_probability else 0
                    plan.jobs.append(
                        JobSubmission(
                            f"job-{job_n:06d}",
                            researcher,
                            t + k * job_len,
                            job_len,
                            util,
                            exit_code,
                        )
                    )
                    job_n += 1
            plan.actions.append(
                TimedAction(
                    f"act-{action_n:06d}",
                    t + burst_len + STOP_GRACE,
                    "stop_if_idle",
                    {"researcher": researcher},
                )
            )
            action_n += 1
            t += burst_len + rng.expovariate(1.0 / profile.gap_duration_mean)
    plan.jobs.sort(key=lambda j: (j.submit_at, j.job_id))
    plan.actions.sort(key=lambda a: (a.at, a.action_id))
    return plan
