"""The four-metric evaluation framework computed over recorded history.

Everything here is a pure function of the stores, which are themselves
populated exclusively by the event fold, so any metric recomputed from a
replayed log comes out identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from statistics import mean, median

from .errors import NotFoundError, ValidationError

SAMPLE_INTERVAL = 60.0  # seconds between utilisation samples
IDLE_THRESHOLD_PCT = 5.0
IDLE_MIN_SAMPLES = 30  # consecutive sub-threshold samples = sustained idle
DEFAULT_WINDOW = 7 * 24 * 3600.0


class LatencyCondition(str, Enum):
    COLD = "Cold"
    WARM = "Warm"
    PIPELINE = "Pipeline"


@dataclass(frozen=True)
class UtilSample:
    node_id: str
    timestamp: float
    gpu_util_percent: float

    def __post_init__(self):
        if not 0.0 <= self.gpu_util_percent <= 100.0:
            raise ValidationError("invalid_sample", f"utilisation {self.gpu_util_percent} outside [0, 100]")


@dataclass(frozen=True)
class LatencyRecord:
    workspace_id: str
    condition: LatencyCondition
    duration: float
    recorded_at: float

    def to_dict(self) -> dict:
        return {
            "workspace_id": self.workspace_id,
            "condition": self.condition.value,
            "duration": self.duration,
            "recorded_at": self.recorded_at,
        }


@dataclass
class OnboardingRecord:
    researcher: str
    first_workspace_at: float | None = None
    first_success_at: float | None = None
    assisted: bool = False

    @property
    def duration(self) -> float | None:
        if self.first_workspace_at is None or self.first_success_at is None:
            return None
        return self.first_success_at - self.first_workspace_at

    def to_dict(self) -> dict:
        return {
            "researcher": self.researcher,
            "first_workspace_at": self.first_workspace_at,
            "first_success_at": self.first_success_at,
            "assisted": self.assisted,
            "duration": self.duration,
        }


@dataclass(frozen=True)
class IdleInterval:
    node_id: str
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "start": self.start, "end": self.end}


@dataclass(frozen=True)
class Targets:
    """Configured baselines and targets for the summary report."""

    warm_latency_s: float = 20.0
    pipeline_latency_s: float = 300.0
    reproducibility_rate: float = 0.99
    utilisation_baseline: float = 0.30
    onboarding_baseline: str = "1-3 business days"
    latency_baseline: str = "10-20 min VM provisioning"


@dataclass
class MetricsStore:
    samples: dict[str, list[UtilSample]] = field(default_factory=dict)
    latencies: list[LatencyRecord] = field(default_factory=list)
    health: list[tuple[float, bool]] = field(default_factory=list)  # (ts, reproducible)
    onboarding: dict[str, OnboardingRecord] = field(default_factory=dict)

    def add_sample(self, sample: UtilSample) -> None:
        per_node = self.samples.setdefault(sample.node_id, [])
        if per_node and sample.timestamp <= per_node[-1].timestamp:
            raise ValidationError(
                "invalid_sample", f"non-increasing sample timestamp for {sample.node_id}"
            )
        per_node.append(sample)


def reproducibility_rate(store: MetricsStore, start: float, end: float) -> float:
    """Passing reports over total reports within [start, end]."""
    in_window = [ok for ts, ok in store.health if start <= ts <= end]
    if not in_window:
        raise ValidationError("undefined_rate", "no health reports in window")
    return sum(in_window) / len(in_window)


def utilisation(store: MetricsStore, start: float, end: float) -> float:
    """Unweighted mean of all GPU samples in [start, end], as a fraction."""
    values = [
        s.gpu_util_percent
        for per_node in store.samples.values()
        for s in per_node
        if start <= s.timestamp <= end
    ]
    if not values:
        raise ValidationError("undefined_rate", "no utilisation samples in window")
    return mean(values) / 100.0


def idle_intervals(store: MetricsStore, node_id: str, start: float, end: float) -> list[IdleInterval]:
    """Maximal runs of >= 30 consecutive sub-5% samples on one node.

    An interval spans [first sample, last sample + 60 s) and cannot be
    extended on either side within the window.
    """
    if node_id not in store.samples:
        raise NotFoundError("unknown_node", f"no samples for node {node_id}", "node_id")
    picked = [s for s in store.samples[node_id] if start <= s.timestamp <= end]
    intervals: list[IdleInterval] = []
    run: list[UtilSample] = []

    def close_run():
        if len(run) >= IDLE_MIN_SAMPLES:
            intervals.append(IdleInterval(node_id, run[0].timestamp, run[-1].timestamp + SAMPLE_INTERVAL))
        run.clear()

    for sample in picked:
        if run and sample.timestamp - run[-1].timestamp != SAMPLE_INTERVAL:
            close_run()  # a gap in the trace breaks consecutiveness
        if sample.gpu_util_percent < IDLE_THRESHOLD_PCT:
            run.append(sample)
        else:
            close_run()
    close_run()
    return intervals


def onboarding_time(store: MetricsStore, researcher: str) -> OnboardingRecord:
    record = store.onboarding.get(researcher)
    if record is None:
        raise NotFoundError("unknown_researcher", f"unknown researcher {researcher}", "researcher")
    if record.first_workspace_at is None:
        raise ValidationError("no_workspaces", f"researcher {researcher} has not created a workspace")
    return record


def _latency_stats(records: list[LatencyRecord], condition: LatencyCondition) -> dict | None:
    durations = [r.duration for r in records if r.condition is condition]
    if not durations:
        return None
    return {"count": len(durations), "mean_s": mean(durations), "max_s": max(durations)}


def summary_report(store: MetricsStore, start: float, end: float, targets: Targets) -> dict:
    """Four-metric summary with configured baselines/targets and met flags.

    Metrics without recorded data are reported as unavailable and their
    targets are left unevaluated. Onboarding and utilisation carry no
    target flag (targets not yet established); utilisation instead flags
    whether it sits below the dedicated-VM baseline.
    """
    in_window = [r for r in store.latencies if start <= r.recorded_at <= end]
    warm = _latency_stats(in_window, LatencyCondition.WARM)
    cold = _latency_stats(in_window, LatencyCondition.COLD)
    pipeline = _latency_stats(in_window, LatencyCondition.PIPELINE)

    latency = {
        "baseline": targets.latency_baseline,
        "warm": warm and {**warm, "target_s": targets.warm_latency_s, "met": warm["mean_s"] <= targets.warm_latency_s},
        "cold": cold,
        "pipeline": pipeline
        and {**pipeline, "target_s": targets.pipeline_latency_s, "met": pipeline["mean_s"] < targets.pipeline_latency_s},
        "available": bool(warm or cold or pipeline),
    }

    try:
        rate = reproducibility_rate(store, start, end)
        repro = {
            "rate": rate,
            "target": targets.reproducibility_rate,
            "met": rate >= targets.reproducibility_rate,
            "available": True,
        }
    except ValidationError:
        repro = {"rate": None, "target": targets.reproducibility_rate, "met": None, "available": False}

    durations = [r.duration for r in store.onboarding.values() if r.duration is not None]
    onboarding = {
        "baseline": targets.onboarding_baseline,
        "completed": len(durations),
        "pending": sum(1 for r in store.onboarding.values() if r.duration is None),
        "assisted": sum(1 for r in store.onboarding.values() if r.assisted),
        "median_s": median(durations) if durations else None,
        "available": bool(store.onboarding),
    }

    try:
        util = utilisation(store, start, end)
        util_block = {
            "value": util,
            "baseline": targets.utilisation_baseline,
            "below_baseline": util < targets.utilisation_baseline,
            "available": True,
        }
    except ValidationError:
        util_block = {
            "value": None,
            "baseline": targets.utilisation_baseline,
            "below_baseline": None,
            "available": False,
        }

    return {
        "window": {"start": start, "end": end},
        "deployment_latency": latency,
        "reproducibility": repro,
        "onboarding": onboarding,
        "utilisation": util_block,
    }


def format_summary(summary: dict) -> str:
    """Human-readable rendering of `summary_report` output."""

    def fmt_s(v):
        return "n/a" if v is None else f"{v:.1f} s"

    lines = [
        f"== metrics summary (window {summary['window']['start']:.0f}..{summary['window']['end']:.0f} s) =="
    ]
    lat = summary["deployment_latency"]
    if lat["available"]:
        parts = []
        if lat["warm"]:
            parts.append(
                f"warm mean {fmt_s(lat['warm']['mean_s'])} (target <= {lat['warm']['target_s']:.0f} s: "
                f"{'met' if lat['warm']['met'] else 'not met'})"
            )
        if lat["cold"]:
            parts.append(f"cold mean {fmt_s(lat['cold']['mean_s'])}")
        if lat["pipeline"]:
            parts.append(
                f"pipeline mean {fmt_s(lat['pipeline']['mean_s'])} (target < {lat['pipeline']['target_s']:.0f} s: "
                f"{'met' if lat['pipeline']['met'] else 'not met'})"
            )
        lines.append("deployment latency: " + "; ".join(parts))
    else:
        lines.append("deployment latency: unavailable")
    rep = summary["reproducibility"]
    if rep["available"]:
        lines.append(
            f"reproducibility: {rep['rate']:.4f} (target >= {rep['target']:.2f}: "
            f"{'met' if rep['met'] else 'not met'})"
        )
    else:
        lines.append("reproducibility: unavailable")
    onb = summary["onboarding"]
    if onb["available"]:
        med = "n/a" if onb["median_s"] is None else f"{onb['median_s'] / 3600.0:.2f} h"
        lines.append(
            f"onboarding: median {med} ({onb['completed']} completed, {onb['pending']} pending, "
            f"{onb['assisted']} assisted; baseline {onb['baseline']})"
        )
    else:
        lines.append("onboarding: unavailable")
    util = summary["utilisation"]
    if util["available"]:
        flag = "below" if util["below_baseline"] else "at or above"
        lines.append(
            f"gpu utilisation: {util['value'] * 100.0:.1f}% ({flag} the {util['baseline'] * 100.0:.0f}% baseline)"
        )
    else:
        lines.append("gpu utilisation: unavailable")
    return "\n".join(lines)


def export_samples(store: MetricsStore, path: str, epoch: float = 0.0) -> int:
    """Write all samples as node_id,unix_seconds,util_percent CSV rows."""
    rows = sorted(
        (s for per_node in store.samples.values() for s in per_node),
        key=lambda s: (s.timestamp, s.node_id),
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "unix_seconds", "util_percent"])
        for s in rows:
            writer.writerow([s.node_id, epoch + s.timestamp, s.gpu_util_percent])
    return len(rows)


def read_sample_trace(path: str, epoch: float = 0.0) -> list[UtilSample]:
    """Parse a CSV trace (with or without header) into samples."""
    out: list[UtilSample] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "node_id":
                continue
            out.append(UtilSample(row[0], float(row[1]) - epoch, float(row[2])))
    return out
