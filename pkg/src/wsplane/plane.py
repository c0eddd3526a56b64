"""The control plane: one writer, an event log, and a timer wheel.

Every command follows the same discipline: validate against current
state, emit one or more events, and let the apply step perform all
mutation. Replaying a log therefore reconstructs the exact state,
including pending timers, because timers are only ever created and
removed inside apply handlers. Live operation differs from replay in a
single respect: live code *generates* events (commands and due-timer
firing); replay only applies recorded ones.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
import threading
from dataclasses import dataclass, field

from .compat import CompatReport, DriverUpdateResult, ImageSpec, image_compatible, revalidate_node
from .errors import (
    AuthorizationError,
    ConflictError,
    NotFoundError,
    PlaneError,
    TransitionError,
    ValidationError,
)
from .events import Event, EventLog
from .health import FaultKind, FaultSpec, FaultState, HealthReport
from .metrics import (
    DEFAULT_WINDOW,
    SAMPLE_INTERVAL,
    IdleInterval,
    LatencyCondition,
    LatencyRecord,
    MetricsStore,
    OnboardingRecord,
    Targets,
    UtilSample,
    idle_intervals,
    onboarding_time,
    reproducibility_rate,
    summary_report,
    utilisation,
)
from .model import CudaVersion, Node, ResourceSpec
from .scheduler import AllocationMode, ScheduleDecision, decide
from .simulation import (
    CacheState,
    ClockMode,
    PipelineConfig,
    PipelineRun,
    SimClock,
    TimedAction,
    WorkloadPlan,
    draw_stage_durations,
)
from .workspace import (
    NODE_BOUND_STATES,
    PendingJob,
    StartCondition,
    Template,
    Workspace,
    WorkspaceState,
    validate_transition,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlaneConfig:
    """Tunable durations and report targets. All values are configuration,
    chosen to land near the nominal figures, not measurements."""

    pull_duration: float = 280.0
    init_duration: float = 20.0
    max_workspace_cpu: int = 8_000
    max_workspace_mem: int = 32 * 1024**3
    max_workspace_gpu: int = 1
    fail_on_health_failure: bool = False
    epoch: float = 0.0
    targets: Targets = field(default_factory=Targets)

    def to_dict(self) -> dict:
        return {
            "pull_duration": self.pull_duration,
            "init_duration": self.init_duration,
            "max_workspace_cpu": self.max_workspace_cpu,
            "max_workspace_mem": self.max_workspace_mem,
            "max_workspace_gpu": self.max_workspace_gpu,
            "fail_on_health_failure": self.fail_on_health_failure,
            "epoch": self.epoch,
            "targets": vars(self.targets),
        }

    @classmethod
    def from_dict(cls, d: dict) -> PlaneConfig:
        d = dict(d)
        targets = Targets(**d.pop("targets"))
        return cls(targets=targets, **d)


@dataclass(frozen=True)
class Timer:
    key: str
    ts: float
    order: int
    kind: str
    data: dict


@dataclass
class _PipelineState:
    run: PipelineRun
    stages: list[str]
    durations: list[float]
    fail_at: str | None


@dataclass
class _JobInterval:
    job_id: str
    workspace_id: str
    node_id: str
    util_percent: float
    start: float
    end: float


class ControlPlane:
    """Single-writer cluster state machine with event-sourced persistence."""

    def __init__(
        self,
        config: PlaneConfig | None = None,
        clock_mode: ClockMode = ClockMode.VIRTUAL,
        log_path: str | None = None,
        _replay: bool = False,
    ):
        self._lock = threading.RLock()
        self.clock = SimClock(clock_mode)
        self.log = EventLog()
        self.config = config or PlaneConfig()
        self._seq = 0

        self.nodes: dict[str, Node] = {}
        self.images: dict[str, ImageSpec] = {}
        self.templates: dict[str, Template] = {}
        self.workspaces: dict[str, Workspace] = {}
        self.reservations: dict[str, tuple[str, ResourceSpec]] = {}
        self.pins: dict[str, str] = {}
        self.allocation_mode = AllocationMode.SHARED
        self.faults: dict[str, FaultState] = {}
        self.pipeline_configs: dict[str, PipelineConfig] = {}
        self.pipelines: dict[str, _PipelineState] = {}
        self.store = MetricsStore()
        self.latest_health: dict[str, HealthReport] = {}
        self.last_decision: dict[str, dict] = {}

        self._pending_queue: list[str] = []
        self._researcher_ws: dict[str, str] = {}
        self._orphan_jobs: dict[str, list[PendingJob]] = {}
        self._job_intervals: list[_JobInterval] = []
        self._ws_count = 0
        self._pipeline_counts: dict[str, int] = {}

        self._timers: dict[str, Timer] = {}
        self._heap: list[tuple[float, int, str]] = []
        self._timer_order = 0
        self._push_timer("sample", SAMPLE_INTERVAL, "sample", {})

        if not _replay:
            if log_path:
                self.log.attach_sink(log_path)
            self._emit("configured", self.config.to_dict())

    # ------------------------------------------------------------------
    # event machinery

    def _emit(self, kind: str, payload: dict) -> Event:
        self._seq += 1
        event = Event(self._seq, self.clock.now, kind, payload)
        self.log.append(event)
        self._apply(event)
        return event

    @classmethod
    def replay(cls, events) -> ControlPlane:
        """Fold a recorded event sequence into a fresh plane."""
        plane = cls(_replay=True)
        for event in events:
            if event.sequence != plane._seq + 1:
                raise ValidationError("log_gap", f"sequence gap at {event.sequence}")
            plane._seq = event.sequence
            plane.clock.catch_up(event.timestamp)
            plane.log.append(event)
            plane._apply(event)
        return plane

    def _apply(self, ev: Event) -> None:
        handler = getattr(self, f"_apply_{ev.kind}", None)
        if handler is None:
            raise ValidationError("unknown_event", f"no apply handler for kind {ev.kind!r}")
        handler(ev)

    # ------------------------------------------------------------------
    # timers

    def _push_timer(self, key: str, ts: float, kind: str, data: dict) -> None:
        assert key not in self._timers, f"timer {key} already pending"
        self._timer_order += 1
        timer = Timer(key, ts, self._timer_order, kind, data)
        self._timers[key] = timer
        heapq.heappush(self._heap, (ts, timer.order, key))

    def _remove_timer(self, key: str) -> None:
        self._timers.pop(key, None)

    def _peek_due(self, limit: float) -> Timer | None:
        while self._heap:
            ts, order, key = self._heap[0]
            timer = self._timers.get(key)
            if timer is None or timer.order != order:
                heapq.heappop(self._heap)
                continue
            if ts > limit:
                return None
            return timer
        return None

    # ------------------------------------------------------------------
    # core-model commands

    def register_node(self, node: Node) -> Node:
        with self._lock:
            if node.node_id in self.nodes:
                raise ConflictError("duplicate_node", f"node {node.node_id} already registered", "node_id")
            self._emit("node_registered", node.to_dict())
            self._retry_pending()
            return self.nodes[node.node_id]

    def deregister_node(self, node_id: str) -> None:
        """Remove a node; workspaces caught on it move to Failed."""
        with self._lock:
            if node_id not in self.nodes:
                raise NotFoundError("unknown_node", f"unknown node {node_id}", "node_id")
            affected = [
                ws
                for ws in self.workspaces.values()
                if ws.node_id == node_id and ws.state in NODE_BOUND_STATES
            ]
            for ws in affected:
                self._emit(
                    "workspace_transition",
                    {
                        "workspace_id": ws.workspace_id,
                        "from": ws.state.value,
                        "to": WorkspaceState.FAILED.value,
                        "reason": "node deregistered",
                    },
                )
                self._release_if_held(ws.workspace_id)
            self._emit("node_deregistered", {"node_id": node_id})

    # ------------------------------------------------------------------
    # compat commands

    def register_image(self, spec: ImageSpec) -> ImageSpec:
        with self._lock:
            if spec.tag in self.images:
                raise ConflictError("duplicate_image", f"image tag {spec.tag} is immutable once published", "tag")
            self._emit("image_registered", spec.to_dict())
            return spec

    def check_compatibility(self, image_tag: str, node_id: str) -> CompatReport:
        with self._lock:
            if image_tag not in self.images:
                raise NotFoundError("unknown_image", f"unknown image tag {image_tag}", "image_tag")
            if node_id not in self.nodes:
                raise NotFoundError("unknown_node", f"unknown node {node_id}", "node_id")
            return image_compatible(self.images[image_tag], self.nodes[node_id])

    def update_host_driver(
        self, node_id: str, driver_version: str, max_cuda: CudaVersion | str
    ) -> DriverUpdateResult:
        with self._lock:
            node = self.nodes.get(node_id)
            if node is None:
                raise NotFoundError("unknown_node", f"unknown node {node_id}", "node_id")
            max_cuda = CudaVersion.parse(max_cuda)
            before = {tag: image_compatible(img, node).compatible for tag, img in self.images.items()}
            self._emit(
                "driver_updated",
                {"node_id": node_id, "driver_version": driver_version, "max_cuda": str(max_cuda)},
            )
            result = revalidate_node(self.images, node, before)
            self._emit(
                "driver_revalidated",
                {"node_id": node_id, "newly_incompatible": list(result.newly_incompatible)},
            )
            self._retry_pending()
            return result

    # ------------------------------------------------------------------
    # workspace commands

    def save_template(
        self, name: str, image_tag: str, resources: ResourceSpec, mounts: list[str] | None = None
    ) -> Template:
        with self._lock:
            if image_tag not in self.images:
                raise NotFoundError("unknown_image", f"template references unknown image {image_tag}", "image_tag")
            cfg = self.config
            if (
                resources.cpu_millicores > cfg.max_workspace_cpu
                or resources.mem_bytes > cfg.max_workspace_mem
                or resources.gpu_count > cfg.max_workspace_gpu
            ):
                raise ValidationError("resources_exceed_maxima", "requested resources exceed per-workspace maxima", "resources")
            version = self.templates[name].version + 1 if name in self.templates else 1
            self._emit(
                "template_saved",
                {
                    "name": name,
                    "image_tag": image_tag,
                    "resources": resources.to_dict(),
                    "mounts": list(mounts or []),
                    "version": version,
                },
            )
            return self.templates[name]

    def register_researcher(self, researcher: str) -> None:
        with self._lock:
            if researcher not in self.store.onboarding:
                self._emit("researcher_registered", {"researcher": researcher})

    def create_workspace(self, owner: str, template_name: str, actor: str | None = None) -> Workspace:
        with self._lock:
            self._authorize(owner, actor)
            template = self.templates.get(template_name)
            if template is None:
                raise NotFoundError("unknown_template", f"unknown template {template_name}", "template_name")
            image = self.images[template.image_tag]
            if not any(image_compatible(image, n).compatible for n in self.nodes.values()):
                raise PlaneError(
                    "incompatible_image",
                    f"image {image.tag} is incompatible with every registered node; "
                    "workspace creation blocked",
                    "template_name",
                )
            if owner not in self.store.onboarding:
                self._emit("researcher_registered", {"researcher": owner})
            workspace_id = f"ws-{self._ws_count:04d}"
            self._emit(
                "workspace_created",
                {
                    "workspace_id": workspace_id,
                    "owner": owner,
                    "template_name": template_name,
                    "template_version": template.version,
                    "image_tag": template.image_tag,
                    "resources": template.resources.to_dict(),
                },
            )
            self._try_schedule(workspace_id, initial=True)
            return self.workspaces[workspace_id]

    def stop(self, workspace_id: str, actor: str | None = None) -> Workspace:
        with self._lock:
            ws = self._get_workspace(workspace_id)
            self._authorize(ws.owner, actor)
            self._require_transition(ws, WorkspaceState.STOPPED)
            self._emit(
                "workspace_transition",
                {"workspace_id": workspace_id, "from": ws.state.value, "to": WorkspaceState.STOPPED.value},
            )
            self._release_if_held(workspace_id)
            self._retry_pending()
            return ws

    def restart(self, workspace_id: str, actor: str | None = None) -> Workspace:
        with self._lock:
            ws = self._get_workspace(workspace_id)
            self._authorize(ws.owner, actor)
            if ws.state is not WorkspaceState.STOPPED:
                raise TransitionError(f"restart requires Stopped, workspace is {ws.state.value}")
            self._emit(
                "workspace_transition",
                {
                    "workspace_id": workspace_id,
                    "from": ws.state.value,
                    "to": WorkspaceState.PENDING.value,
                    "reason": "restart",
                },
            )
            self._try_schedule(workspace_id, initial=True)
            return ws

    def rebuild(self, workspace_id: str, actor: str | None = None) -> Workspace:
        """Re-enter Pending from Failed, picking up the latest template version."""
        with self._lock:
            ws = self._get_workspace(workspace_id)
            self._authorize(ws.owner, actor)
            if ws.state is not WorkspaceState.FAILED:
                raise TransitionError(f"rebuild requires Failed, workspace is {ws.state.value}")
            template = self.templates[ws.template_name]
            self._emit(
                "workspace_transition",
                {
                    "workspace_id": workspace_id,
                    "from": ws.state.value,
                    "to": WorkspaceState.PENDING.value,
                    "reason": "rebuild",
                    "template_version": template.version,
                    "image_tag": template.image_tag,
                    "resources": template.resources.to_dict(),
                },
            )
            self._try_schedule(workspace_id, initial=True)
            return ws

    def delete(self, workspace_id: str, actor: str | None = None) -> Workspace:
        with self._lock:
            ws = self._get_workspace(workspace_id)
            self._authorize(ws.owner, actor)
            self._require_transition(ws, WorkspaceState.DELETED)
            self._emit(
                "workspace_transition",
                {"workspace_id": workspace_id, "from": ws.state.value, "to": WorkspaceState.DELETED.value},
            )
            return ws

    def fail_workspace(self, workspace_id: str, reason: str) -> Workspace:
        """Administrative transition to Failed (used by tests and operators)."""
        with self._lock:
            ws = self._get_workspace(workspace_id)
            self._require_transition(ws, WorkspaceState.FAILED)
            self._emit(
                "workspace_transition",
                {
                    "workspace_id": workspace_id,
                    "from": ws.state.value,
                    "to": WorkspaceState.FAILED.value,
                    "reason": reason,
                },
            )
            self._release_if_held(workspace_id)
            self._retry_pending()
            return ws

    # ------------------------------------------------------------------
    # scheduler commands

    def schedule(self, workspace_id: str) -> ScheduleDecision:
        """Explicitly (re)attempt placement of a Pending workspace."""
        with self._lock:
            ws = self._get_workspace(workspace_id)
            if ws.state is not WorkspaceState.PENDING:
                raise TransitionError(f"schedule requires Pending, workspace is {ws.state.value}")
            return self._try_schedule(workspace_id, initial=True)

    def release(self, workspace_id: str) -> bool:
        """Return a workspace's reservation; harmless no-op if none is held."""
        with self._lock:
            self._get_workspace(workspace_id)
            if workspace_id not in self.reservations:
                self._emit(
                    "warning",
                    {"message": f"release of {workspace_id} without a reservation", "workspace_id": workspace_id},
                )
                return False
            self._release_if_held(workspace_id)
            self._retry_pending()
            return True

    def set_allocation_mode(self, mode: AllocationMode | str) -> AllocationMode:
        with self._lock:
            try:
                mode = AllocationMode(mode)
            except ValueError:
                raise ValidationError("invalid_mode", f"unknown allocation mode {mode!r}", "mode")
            busy = [w.workspace_id for w in self.workspaces.values() if w.state in NODE_BOUND_STATES]
            if busy:
                raise ConflictError(
                    "mode_change_busy",
                    f"cannot change allocation mode while workspaces run: {busy[:3]}",
                )
            self._emit("allocation_mode_set", {"mode": mode.value})
            return mode

    def _try_schedule(self, workspace_id: str, initial: bool) -> ScheduleDecision:
        ws = self.workspaces[workspace_id]
        image = self.images[ws.image_tag]
        decision = decide(
            workspace_id,
            ws.owner,
            ws.resources,
            image,
            list(self.nodes.values()),
            self.allocation_mode,
            self.pins,
        )
        if decision.assigned or initial:
            payload = decision.to_dict()
            if (
                decision.assigned
                and self.allocation_mode is AllocationMode.DEDICATED_VM
                and ws.owner not in self.pins
            ):
                payload["pin"] = ws.owner
            self._emit("schedule_decided", payload)
        if decision.assigned:
            now = self.clock.now
            if decision.cache_hit:
                self._emit(
                    "workspace_transition",
                    {
                        "workspace_id": workspace_id,
                        "from": WorkspaceState.PENDING.value,
                        "to": WorkspaceState.INITIALIZING.value,
                        "node_id": decision.node_id,
                        "start_condition": StartCondition.WARM.value,
                        "init_ends": now + self.config.init_duration,
                    },
                )
            else:
                self._emit(
                    "workspace_transition",
                    {
                        "workspace_id": workspace_id,
                        "from": WorkspaceState.PENDING.value,
                        "to": WorkspaceState.PULLING.value,
                        "node_id": decision.node_id,
                        "start_condition": StartCondition.COLD.value,
                        "pull_ends": now + self.config.pull_duration,
                    },
                )
        return decision

    def _retry_pending(self) -> None:
        for workspace_id in list(self._pending_queue):
            ws = self.workspaces.get(workspace_id)
            if ws is not None and ws.state is WorkspaceState.PENDING:
                self._try_schedule(workspace_id, initial=False)

    def _release_if_held(self, workspace_id: str) -> None:
        if workspace_id in self.reservations:
            node_id, resources = self.reservations[workspace_id]
            self._emit(
                "resources_released",
                {"workspace_id": workspace_id, "node_id": node_id, "resources": resources.to_dict()},
            )

    # ------------------------------------------------------------------
    # health commands

    def inject_fault(self, spec: FaultSpec) -> str:
        with self._lock:
            if spec.target not in self.nodes and spec.target not in self.images:
                raise NotFoundError("unknown_target", f"fault target {spec.target} is neither a node nor an image", "target")
            fault_id = f"fault-{len(self.faults)}"
            self._emit("fault_injected", {"fault_id": fault_id, **spec.to_dict()})
            return fault_id

    def run_health_check(self, workspace_id: str) -> HealthReport:
        with self._lock:
            ws = self._get_workspace(workspace_id)
            if ws.state is not WorkspaceState.RUNNING:
                raise PlaneError(
                    "workspace_not_running",
                    f"health check requires Running, workspace is {ws.state.value}",
                )
            self._emit_health_check(ws)
            return self.latest_health[workspace_id]

    def _emit_health_check(self, ws: Workspace) -> None:
        node = self.nodes[ws.node_id]
        image = self.images[ws.image_tag]
        draws: list[list] = []
        tripped = {kind: False for kind in FaultKind}
        for fault_id, fault in self.faults.items():
            if not fault.applies_to(ws.node_id, ws.image_tag):
                continue
            state = fault.rng.getstate()
            value = fault.rng.random()
            fault.rng.setstate(state)
            draws.append([fault_id, value])
            if value < fault.spec.probability:
                tripped[fault.spec.kind] = True
        host_ok = image.cuda_runtime <= node.max_cuda
        self._emit(
            "health_checked",
            {
                "workspace_id": ws.workspace_id,
                "driver_ok": not tripped[FaultKind.DRIVER_DRIFT],
                "cuda_ok": host_ok and not tripped[FaultKind.RUNTIME_MISMATCH],
                "framework_ok": not tripped[FaultKind.FRAMEWORK_IMPORT_ERROR],
                "draws": draws,
            },
        )

    # ------------------------------------------------------------------
    # simulation commands

    def run_job(
        self, workspace_id: str, duration: float, util_percent: float, exit_code: int
    ) -> str:
        with self._lock:
            ws = self._get_workspace(workspace_id)
            if ws.state is not WorkspaceState.RUNNING:
                raise PlaneError(
                    "workspace_not_running",
                    f"jobs require Running, workspace is {ws.state.value}",
                )
            if duration <= 0:
                raise ValidationError("invalid_job", "duration must be positive", "duration")
            if not 0.0 <= util_percent <= 100.0:
                raise ValidationError("invalid_job", "util_percent outside [0, 100]", "util_percent")
            job_id = f"job-api-{self._seq + 1:06d}"
            now = self.clock.now
            self._emit(
                "job_started",
                {
                    "job_id": job_id,
                    "workspace_id": workspace_id,
                    "node_id": ws.node_id,
                    "util_percent": util_percent,
                    "start": now,
                    "end": now + duration,
                    "exit_code": int(exit_code),
                },
            )
            return job_id

    def load_workload(self, plan: WorkloadPlan) -> int:
        """Install a generated submission/action schedule as future timers."""
        with self._lock:
            payload = {
                "actions": [a.to_dict() for a in plan.actions],
                "jobs": [j.to_dict() for j in plan.jobs],
            }
            self._emit("workload_loaded", payload)
            return len(plan.actions) + len(plan.jobs)

    def register_pipeline_config(self, config: PipelineConfig) -> None:
        with self._lock:
            self._emit("pipeline_config_registered", config.to_dict())

    def run_pipeline(self, project: str, seed: int | None = None, fail_at: str | None = None) -> str:
        """Kick off a staged run; stage boundaries fire as the clock advances."""
        with self._lock:
            config = self.pipeline_configs.get(project)
            if config is None:
                raise NotFoundError("unknown_project", f"no pipeline config for project {project}", "project")
            if fail_at is not None and fail_at not in config.stages:
                raise ValidationError("invalid_pipeline", f"fail_at stage {fail_at} not in pipeline", "fail_at")
            count = self._pipeline_counts.get(project, 0)
            run_seed = count if seed is None else seed
            run_id = f"{project}#{count}"
            durations = draw_stage_durations(config, run_seed)
            self._emit(
                "pipeline_started",
                {
                    "run_id": run_id,
                    "project": project,
                    "stages": list(config.stages),
                    "durations": durations,
                    "fail_at": fail_at,
                    "seed": run_seed,
                },
            )
            return run_id

    def run_pipeline_to_completion(
        self, project: str, seed: int | None = None, fail_at: str | None = None
    ) -> PipelineRun:
        """Convenience wrapper: start a run and advance the clock past its end."""
        with self._lock:
            run_id = self.run_pipeline(project, seed, fail_at)
            state = self.pipelines[run_id]
            self.advance_clock(sum(state.durations) + 1.0)
            return state.run

    def advance_clock(self, delta: float) -> float:
        """Advance virtual time, firing every due timer in timestamp order."""
        with self._lock:
            if self.clock.mode is not ClockMode.VIRTUAL:
                raise PlaneError("clock_mode", "advance_clock requires Virtual clock mode")
            if delta <= 0:
                raise ValidationError("invalid_delta", "delta must be positive", "delta")
            target = self.clock.now + delta
            while True:
                timer = self._peek_due(target)
                if timer is None:
                    break
                self.clock.catch_up(timer.ts)
                self._fire(timer)
                survivor = self._timers.get(timer.key)
                if survivor is not None and survivor.order == timer.order:
                    raise RuntimeError(f"timer {timer.key} was not consumed by its handler")
            self.clock.catch_up(target)
            self._emit("clock_advanced", {"to": target})
            return target

    def set_assisted(self, researcher: str, assisted: bool) -> OnboardingRecord:
        with self._lock:
            if researcher not in self.store.onboarding:
                raise NotFoundError("unknown_researcher", f"unknown researcher {researcher}", "researcher")
            self._emit("assisted_flag_set", {"researcher": researcher, "assisted": bool(assisted)})
            return self.store.onboarding[researcher]

    def import_samples(self, samples: list[UtilSample]) -> int:
        with self._lock:
            by_node: dict[str, list[UtilSample]] = {}
            for s in samples:
                by_node.setdefault(s.node_id, []).append(s)
            for node_id, trace in by_node.items():
                existing = self.store.samples.get(node_id)
                last = existing[-1].timestamp if existing else None
                for prev, cur in zip(trace, trace[1:]):
                    if cur.timestamp - prev.timestamp != SAMPLE_INTERVAL:
                        raise ValidationError(
                            "invalid_sample", f"imported trace for {node_id} is not at {SAMPLE_INTERVAL:.0f} s cadence"
                        )
                if last is not None and trace and trace[0].timestamp <= last:
                    raise ValidationError(
                        "invalid_sample", f"imported trace for {node_id} overlaps recorded samples"
                    )
            self._emit(
                "samples_imported",
                {"records": [[s.node_id, s.timestamp, s.gpu_util_percent] for s in samples]},
            )
            return len(samples)

    # ------------------------------------------------------------------
    # timer firing (live side only)

    def _fire(self, timer: Timer) -> None:
        handler = getattr(self, f"_fire_{timer.kind}")
        handler(timer)

    def _fire_sample(self, timer: Timer) -> None:
        at = timer.ts
        samples = [
            [node_id, self._window_util(node_id, at)]
            for node_id, node in sorted(self.nodes.items())
            if node.is_gpu
        ]
        self._emit("util_sampled", {"at": at, "samples": samples})

    def _window_util(self, node_id: str, at: float) -> float:
        """Mean utilisation over the minute ending at `at`, capped at 100
        wherever jobs overlap."""
        lo = at - SAMPLE_INTERVAL
        entries = [
            e for e in self._job_intervals if e.node_id == node_id and e.end > lo and e.start < at
        ]
        if not entries:
            return 0.0
        points = {lo, at}
        for e in entries:
            points.add(max(lo, e.start))
            points.add(min(at, e.end))
        ordered = sorted(points)
        total = 0.0
        for a, b in zip(ordered, ordered[1:]):
            if b <= a:
                continue
            mid = (a + b) / 2.0
            load = sum(e.util_percent for e in entries if e.start <= mid < e.end)
            total += min(100.0, load) * (b - a)
        return total / SAMPLE_INTERVAL

    def _fire_pull(self, timer: Timer) -> None:
        workspace_id = timer.data["workspace_id"]
        ws = self.workspaces[workspace_id]
        self._emit("image_cached", {"node_id": ws.node_id, "tag": ws.image_tag})
        self._emit(
            "workspace_transition",
            {
                "workspace_id": workspace_id,
                "from": WorkspaceState.PULLING.value,
                "to": WorkspaceState.INITIALIZING.value,
                "init_ends": timer.ts + self.config.init_duration,
            },
        )

    def _fire_init(self, timer: Timer) -> None:
        workspace_id = timer.data["workspace_id"]
        ws = self.workspaces[workspace_id]
        self._emit(
            "workspace_transition",
            {
                "workspace_id": workspace_id,
                "from": WorkspaceState.INITIALIZING.value,
                "to": WorkspaceState.RUNNING.value,
            },
        )
        self._emit_health_check(ws)
        report = self.latest_health[workspace_id]
        if not report.reproducible and self.config.fail_on_health_failure:
            self._emit(
                "workspace_transition",
                {
                    "workspace_id": workspace_id,
                    "from": WorkspaceState.RUNNING.value,
                    "to": WorkspaceState.FAILED.value,
                    "reason": "health check failed",
                },
            )
            self._release_if_held(workspace_id)
            self._retry_pending()
            return
        for job in list(ws.pending_jobs):
            now = self.clock.now
            self._emit(
                "job_started",
                {
                    "job_id": job.job_id,
                    "workspace_id": workspace_id,
                    "node_id": ws.node_id,
                    "util_percent": job.util_percent,
                    "start": now,
                    "end": now + job.duration,
                    "exit_code": job.exit_code,
                },
            )

    def _fire_submit(self, timer: Timer) -> None:
        data = timer.data
        researcher = data["researcher"]
        workspace_id = self._researcher_ws.get(researcher)
        ws = self.workspaces.get(workspace_id) if workspace_id else None
        if ws is not None and ws.state is WorkspaceState.RUNNING:
            self._emit(
                "job_started",
                {
                    "job_id": data["job_id"],
                    "workspace_id": ws.workspace_id,
                    "node_id": ws.node_id,
                    "util_percent": data["util_percent"],
                    "start": timer.ts,
                    "end": timer.ts + data["duration"],
                    "exit_code": data["exit_code"],
                },
            )
        else:
            self._emit(
                "job_deferred",
                {
                    "job_id": data["job_id"],
                    "researcher": researcher,
                    "workspace_id": ws.workspace_id if ws else None,
                    "duration": data["duration"],
                    "util_percent": data["util_percent"],
                    "exit_code": data["exit_code"],
                },
            )

    def _fire_jobend(self, timer: Timer) -> None:
        self._emit(
            "job_completed",
            {
                "job_id": timer.data["job_id"],
                "workspace_id": timer.data["workspace_id"],
                "exit_code": timer.data["exit_code"],
            },
        )

    def _fire_stage(self, timer: Timer) -> None:
        state = self.pipelines[timer.data["run_id"]]
        index = len(state.run.stage_durations)
        stage = state.stages[index]
        ok = state.fail_at != stage
        self._emit(
            "pipeline_stage_completed",
            {"run_id": state.run.run_id, "stage": stage, "duration": state.durations[index], "ok": ok},
        )

    def _fire_action(self, timer: Timer) -> None:
        action = timer.data
        op = action["op"]
        args = action.get("args", {})
        performed = True
        error = None
        try:
            performed = self._perform_action(op, args)
        except PlaneError as exc:
            performed = False
            error = exc.code
        self._emit(
            "action_fired",
            {"action_id": action["action_id"], "op": op, "performed": performed, "error": error},
        )

    def _perform_action(self, op: str, args: dict) -> bool:
        if op == "ensure_running":
            researcher = args["researcher"]
            workspace_id = self._researcher_ws.get(researcher)
            ws = self.workspaces.get(workspace_id) if workspace_id else None
            if ws is None or ws.state is WorkspaceState.DELETED:
                self.create_workspace(researcher, args["template"])
                return True
            if ws.state is WorkspaceState.STOPPED:
                self.restart(ws.workspace_id)
                return True
            if ws.state is WorkspaceState.FAILED:
                self.rebuild(ws.workspace_id)
                return True
            return False
        if op == "stop_if_idle":
            researcher = args["researcher"]
            workspace_id = self._researcher_ws.get(researcher)
            ws = self.workspaces.get(workspace_id) if workspace_id else None
            if (
                ws is not None
                and ws.state is WorkspaceState.RUNNING
                and not ws.active_jobs
                and not ws.pending_jobs
            ):
                self.stop(ws.workspace_id)
                return True
            return False
        if op == "create":
            self.create_workspace(args["researcher"], args["template"])
            return True
        if op == "stop":
            self.stop(args["workspace_id"])
            return True
        if op == "restart":
            self.restart(args["workspace_id"])
            return True
        if op == "delete":
            self.delete(args["workspace_id"])
            return True
        if op == "pipeline":
            self.run_pipeline(args["project"], args.get("seed"), args.get("fail_at"))
            return True
        if op == "fault":
            self.inject_fault(
                FaultSpec(
                    target=args["target"],
                    kind=FaultKind(args["kind"]),
                    probability=float(args["probability"]),
                    seed=int(args["seed"]),
                )
            )
            return True
        if op == "driver_update":
            self.update_host_driver(args["node_id"], args["driver_version"], args["max_cuda"])
            return True
        if op == "assisted":
            self.set_assisted(args["researcher"], bool(args.get("assisted", True)))
            return True
        raise ValidationError("unknown_action", f"unsupported scripted action {op!r}", "op")

    # ------------------------------------------------------------------
    # apply handlers (the only state mutation)

    def _apply_configured(self, ev: Event) -> None:
        self.config = PlaneConfig.from_dict(ev.payload)

    def _apply_clock_advanced(self, ev: Event) -> None:
        self.clock.catch_up(ev.payload["to"])

    def _apply_warning(self, ev: Event) -> None:
        logger.warning("event warning: %s", ev.payload.get("message"))

    def _apply_node_registered(self, ev: Event) -> None:
        p = ev.payload
        node = Node(
            node_id=p["node_id"],
            gpu_count=p["gpu_count"],
            gpu_model=p["gpu_model"],
            driver_version=p["driver_version"],
            max_cuda=CudaVersion.parse(p["max_cuda"]),
            labels=dict(p.get("labels", {})),
            cpu_capacity=p["cpu_capacity"],
            mem_capacity=p["mem_capacity"],
            cache_capacity=p.get("cache_capacity"),
        )
        for tag in p.get("image_cache", []):
            node.cache_image(tag)
        self.nodes[node.node_id] = node

    def _apply_node_deregistered(self, ev: Event) -> None:
        node_id = ev.payload["node_id"]
        self.nodes.pop(node_id, None)
        self.pins = {owner: nid for owner, nid in self.pins.items() if nid != node_id}

    def _apply_image_registered(self, ev: Event) -> None:
        spec = ImageSpec.from_dict(ev.payload)
        self.images[spec.tag] = spec

    def _apply_driver_updated(self, ev: Event) -> None:
        node = self.nodes[ev.payload["node_id"]]
        node.driver_version = ev.payload["driver_version"]
        node.max_cuda = CudaVersion.parse(ev.payload["max_cuda"])

    def _apply_driver_revalidated(self, ev: Event) -> None:
        pass  # informational record of newly incompatible tags

    def _apply_template_saved(self, ev: Event) -> None:
        p = ev.payload
        self.templates[p["name"]] = Template(
            name=p["name"],
            image_tag=p["image_tag"],
            resources=ResourceSpec.from_dict(p["resources"]),
            mounts=list(p["mounts"]),
            version=p["version"],
        )

    def _apply_researcher_registered(self, ev: Event) -> None:
        researcher = ev.payload["researcher"]
        self.store.onboarding[researcher] = OnboardingRecord(researcher)
        self._orphan_jobs.setdefault(researcher, [])

    def _apply_workspace_created(self, ev: Event) -> None:
        p = ev.payload
        ws = Workspace(
            workspace_id=p["workspace_id"],
            owner=p["owner"],
            template_name=p["template_name"],
            template_version=p["template_version"],
            image_tag=p["image_tag"],
            resources=ResourceSpec.from_dict(p["resources"]),
            created_at=ev.timestamp,
        )
        ws.record(WorkspaceState.PENDING, ev.timestamp)
        self.workspaces[ws.workspace_id] = ws
        self._pending_queue.append(ws.workspace_id)
        self._ws_count += 1
        self._researcher_ws[ws.owner] = ws.workspace_id
        record = self.store.onboarding[ws.owner]
        if record.first_workspace_at is None:
            record.first_workspace_at = ev.timestamp
        orphans = self._orphan_jobs.get(ws.owner)
        if orphans:
            ws.pending_jobs.extend(orphans)
            orphans.clear()

    def _apply_schedule_decided(self, ev: Event) -> None:
        p = ev.payload
        ws = self.workspaces[p["workspace_id"]]
        self.last_decision[ws.workspace_id] = p
        ws.unschedulable_reason = None if p["assigned"] else p["reason"]
        if not p["assigned"]:
            return
        node = self.nodes[p["node_id"]]
        node.reserve(ws.resources)
        self.reservations[ws.workspace_id] = (node.node_id, ws.resources)
        if ws.workspace_id in self._pending_queue:
            self._pending_queue.remove(ws.workspace_id)
        if p.get("pin"):
            self.pins[p["pin"]] = p["node_id"]

    def _apply_workspace_transition(self, ev: Event) -> None:
        p = ev.payload
        ws = self.workspaces[p["workspace_id"]]
        source = WorkspaceState(p["from"])
        target = WorkspaceState(p["to"])
        if ws.state is not source:
            raise ValidationError(
                "replay_mismatch",
                f"transition of {ws.workspace_id} expects {source.value}, state is {ws.state.value}",
            )
        condition = StartCondition(p["start_condition"]) if p.get("start_condition") else None
        validate_transition(source, target, condition or ws.start_condition)

        if target is WorkspaceState.PULLING:
            ws.node_id = p["node_id"]
            ws.start_condition = StartCondition.COLD
            self._push_timer(
                f"pull:{ws.workspace_id}", p["pull_ends"], "pull", {"workspace_id": ws.workspace_id}
            )
        elif target is WorkspaceState.INITIALIZING:
            if source is WorkspaceState.PENDING:
                ws.node_id = p["node_id"]
                ws.start_condition = StartCondition.WARM
            self._remove_timer(f"pull:{ws.workspace_id}")
            self._push_timer(
                f"init:{ws.workspace_id}", p["init_ends"], "init", {"workspace_id": ws.workspace_id}
            )
        elif target is WorkspaceState.RUNNING:
            self._remove_timer(f"init:{ws.workspace_id}")
            self.store.latencies.append(
                LatencyRecord(
                    ws.workspace_id,
                    LatencyCondition(ws.start_condition.value),
                    ev.timestamp - ws.episode_start,
                    ev.timestamp,
                )
            )
        elif target in (WorkspaceState.STOPPED, WorkspaceState.FAILED):
            self._remove_timer(f"pull:{ws.workspace_id}")
            self._remove_timer(f"init:{ws.workspace_id}")
            self._abort_jobs(ws, ev.timestamp)
        elif target is WorkspaceState.PENDING:
            self._pending_queue.append(ws.workspace_id)
            ws.start_condition = None
            ws.unschedulable_reason = None
            if p.get("reason") == "rebuild":
                ws.template_version = p["template_version"]
                ws.image_tag = p["image_tag"]
                ws.resources = ResourceSpec.from_dict(p["resources"])
        elif target is WorkspaceState.DELETED:
            if self._researcher_ws.get(ws.owner) == ws.workspace_id:
                del self._researcher_ws[ws.owner]

        ws.record(target, ev.timestamp)

    def _abort_jobs(self, ws: Workspace, ts: float) -> None:
        for interval in self._job_intervals:
            if interval.workspace_id == ws.workspace_id and interval.end > ts:
                interval.end = ts
        for job_id in sorted(ws.active_jobs):
            self._remove_timer(f"jobend:{job_id}")
        ws.active_jobs.clear()

    def _apply_resources_released(self, ev: Event) -> None:
        p = ev.payload
        held = self.reservations.pop(p["workspace_id"], None)
        if held is None:
            return
        node = self.nodes.get(p["node_id"])
        if node is not None:
            node.free(ResourceSpec.from_dict(p["resources"]))

    def _apply_image_cached(self, ev: Event) -> None:
        node = self.nodes.get(ev.payload["node_id"])
        if node is not None:
            node.cache_image(ev.payload["tag"])

    def _apply_fault_injected(self, ev: Event) -> None:
        p = ev.payload
        spec = FaultSpec(
            target=p["target"],
            kind=FaultKind(p["kind"]),
            probability=p["probability"],
            seed=p["seed"],
        )
        self.faults[p["fault_id"]] = FaultState(p["fault_id"], spec)

    def _apply_health_checked(self, ev: Event) -> None:
        p = ev.payload
        for fault_id, value in p["draws"]:
            self.faults[fault_id].replay_draw(value)
        report = HealthReport(
            workspace_id=p["workspace_id"],
            timestamp=ev.timestamp,
            driver_ok=p["driver_ok"],
            cuda_ok=p["cuda_ok"],
            framework_ok=p["framework_ok"],
        )
        self.latest_health[report.workspace_id] = report
        self.store.health.append((ev.timestamp, report.reproducible))

    def _apply_workload_loaded(self, ev: Event) -> None:
        for raw in ev.payload["actions"]:
            action = TimedAction(raw["action_id"], raw["at"], raw["op"], dict(raw["args"]))
            self._push_timer(f"action:{action.action_id}", action.at, "action", action.to_dict())
        for raw in ev.payload["jobs"]:
            self._push_timer(
                f"submit:{raw['job_id']}",
                raw["submit_at"],
                "submit",
                dict(raw),
            )

    def _apply_job_started(self, ev: Event) -> None:
        p = ev.payload
        ws = self.workspaces[p["workspace_id"]]
        self._remove_timer(f"submit:{p['job_id']}")
        ws.pending_jobs = [j for j in ws.pending_jobs if j.job_id != p["job_id"]]
        self._job_intervals.append(
            _JobInterval(
                job_id=p["job_id"],
                workspace_id=p["workspace_id"],
                node_id=p["node_id"],
                util_percent=p["util_percent"],
                start=p["start"],
                end=p["end"],
            )
        )
        ws.active_jobs.add(p["job_id"])
        self._push_timer(
            f"jobend:{p['job_id']}",
            p["end"],
            "jobend",
            {"job_id": p["job_id"], "workspace_id": p["workspace_id"], "exit_code": p["exit_code"]},
        )

    def _apply_job_deferred(self, ev: Event) -> None:
        p = ev.payload
        self._remove_timer(f"submit:{p['job_id']}")
        job = PendingJob(p["job_id"], p["duration"], p["util_percent"], p["exit_code"])
        ws = self.workspaces.get(p["workspace_id"]) if p.get("workspace_id") else None
        if ws is not None and ws.state is not WorkspaceState.DELETED:
            ws.pending_jobs.append(job)
        else:
            self._orphan_jobs.setdefault(p["researcher"], []).append(job)

    def _apply_job_completed(self, ev: Event) -> None:
        p = ev.payload
        self._remove_timer(f"jobend:{p['job_id']}")
        ws = self.workspaces[p["workspace_id"]]
        ws.active_jobs.discard(p["job_id"])
        if p["exit_code"] == 0:
            record = self.store.onboarding[ws.owner]
            if record.first_success_at is None:
                record.first_success_at = ev.timestamp

    def _apply_util_sampled(self, ev: Event) -> None:
        at = ev.payload["at"]
        for node_id, pct in ev.payload["samples"]:
            self.store.add_sample(UtilSample(node_id, at, pct))
        self._remove_timer("sample")
        self._push_timer("sample", at + SAMPLE_INTERVAL, "sample", {})
        cutoff = at - SAMPLE_INTERVAL
        self._job_intervals = [e for e in self._job_intervals if e.end > cutoff]

    def _apply_samples_imported(self, ev: Event) -> None:
        for node_id, ts, pct in ev.payload["records"]:
            self.store.add_sample(UtilSample(node_id, ts, pct))

    def _apply_pipeline_config_registered(self, ev: Event) -> None:
        p = ev.payload
        self.pipeline_configs[p["project_name"]] = PipelineConfig(
            project_name=p["project_name"],
            stages=tuple(p["stages"]),
            stage_duration_ranges={k: (v[0], v[1]) for k, v in p["stage_duration_ranges"].items()},
            cache=CacheState(p["cache"]),
            cache_miss_penalty=p["cache_miss_penalty"],
        )

    def _apply_pipeline_started(self, ev: Event) -> None:
        p = ev.payload
        run = PipelineRun(run_id=p["run_id"], project_name=p["project"], started_at=ev.timestamp)
        state = _PipelineState(
            run=run, stages=list(p["stages"]), durations=list(p["durations"]), fail_at=p["fail_at"]
        )
        self.pipelines[run.run_id] = state
        self._pipeline_counts[p["project"]] = self._pipeline_counts.get(p["project"], 0) + 1
        self._push_timer(
            f"stage:{run.run_id}",
            ev.timestamp + state.durations[0],
            "stage",
            {"run_id": run.run_id},
        )

    def _apply_pipeline_stage_completed(self, ev: Event) -> None:
        p = ev.payload
        state = self.pipelines[p["run_id"]]
        run = state.run
        self._remove_timer(f"stage:{run.run_id}")
        run.stage_durations.append((p["stage"], p["duration"]))
        index = len(run.stage_durations)
        if not p["ok"]:
            run.failed_stage = p["stage"]
            run.finished = True
        elif index == len(state.stages):
            run.finished = True
            self.store.latencies.append(
                LatencyRecord(run.run_id, LatencyCondition.PIPELINE, run.total, ev.timestamp)
            )
        else:
            self._push_timer(
                f"stage:{run.run_id}",
                ev.timestamp + state.durations[index],
                "stage",
                {"run_id": run.run_id},
            )

    def _apply_allocation_mode_set(self, ev: Event) -> None:
        self.allocation_mode = AllocationMode(ev.payload["mode"])
        self.pins.clear()

    def _apply_assisted_flag_set(self, ev: Event) -> None:
        record = self.store.onboarding[ev.payload["researcher"]]
        record.assisted = ev.payload["assisted"]

    def _apply_action_fired(self, ev: Event) -> None:
        self._remove_timer(f"action:{ev.payload['action_id']}")

    # ------------------------------------------------------------------
    # queries

    def _get_workspace(self, workspace_id: str) -> Workspace:
        ws = self.workspaces.get(workspace_id)
        if ws is None:
            raise NotFoundError("unknown_workspace", f"unknown workspace {workspace_id}", "workspace_id")
        return ws

    @staticmethod
    def _authorize(owner: str, actor: str | None) -> None:
        if actor is not None and actor != owner and actor != "admin":
            raise AuthorizationError(f"actor {actor} may not operate on {owner}'s workspace")

    @staticmethod
    def _require_transition(ws: Workspace, target: WorkspaceState) -> None:
        validate_transition(ws.state, target, ws.start_condition)

    def deployment_latency(self, workspace_id: str) -> LatencyRecord:
        with self._lock:
            self._get_workspace(workspace_id)
            for record in self.store.latencies:
                if record.workspace_id == workspace_id:
                    return record
            raise PlaneError("never_ran", f"workspace {workspace_id} has not reached Running")

    def _window(self, start: float | None, end: float | None) -> tuple[float, float]:
        end = self.clock.now if end is None else end
        start = max(0.0, end - DEFAULT_WINDOW) if start is None else start
        return start, end

    def reproducibility_rate(self, start: float | None = None, end: float | None = None) -> float:
        with self._lock:
            s, e = self._window(start, end)
            return reproducibility_rate(self.store, s, e)

    def utilisation(self, start: float | None = None, end: float | None = None) -> float:
        with self._lock:
            s, e = self._window(start, end)
            return utilisation(self.store, s, e)

    def idle_intervals(
        self, node_id: str, start: float | None = None, end: float | None = None
    ) -> list[IdleInterval]:
        with self._lock:
            s, e = self._window(start, end)
            return idle_intervals(self.store, node_id, s, e)

    def onboarding_time(self, researcher: str) -> OnboardingRecord:
        with self._lock:
            return onboarding_time(self.store, researcher)

    def summary(self, start: float | None = None, end: float | None = None) -> dict:
        with self._lock:
            s, e = self._window(start, end)
            return summary_report(self.store, s, e, self.config.targets)

    def pipeline_run(self, run_id: str) -> PipelineRun:
        with self._lock:
            state = self.pipelines.get(run_id)
            if state is None:
                raise NotFoundError("unknown_pipeline_run", f"unknown pipeline run {run_id}", "run_id")
            return state.run

    # ------------------------------------------------------------------
    # snapshots and integrity

    def check_invariants(self) -> None:
        """Structural invariants; raises AssertionError on violation.

        Reservations are checked purely by conservation (capacity minus
        free equals the reserved sum) because a log truncated between a
        transition and its release event legitimately leaves a
        non-bound workspace still holding its reservation.
        """
        with self._lock:
            reserved: dict[str, list[int]] = {
                node_id: [0, 0, 0] for node_id in self.nodes
            }
            for workspace_id, (node_id, res) in self.reservations.items():
                if node_id in reserved:
                    reserved[node_id][0] += res.gpu_count
                    reserved[node_id][1] += res.cpu_millicores
                    reserved[node_id][2] += res.mem_bytes
            for node_id, node in self.nodes.items():
                node.check_invariants()
                gpu, cpu, mem = reserved[node_id]
                assert node.gpu_count - node.gpu_free == gpu, node_id
                assert node.cpu_capacity - node.cpu_free == cpu, node_id
                assert node.mem_capacity - node.mem_free == mem, node_id
            for ws in self.workspaces.values():
                if ws.node_id is not None:
                    assert ws.state in NODE_BOUND_STATES, ws.workspace_id
                if ws.state in NODE_BOUND_STATES:
                    assert ws.node_id is not None, ws.workspace_id
                    node = self.nodes[ws.node_id]
                    if ws.resources.gpu_count == 0:
                        assert not node.taints, f"taint violation: {ws.workspace_id} on {node.node_id}"

    def state_snapshot(self) -> dict:
        """Canonical, JSON-serialisable view of all state the fold produces."""
        with self._lock:
            return {
                "config": self.config.to_dict(),
                "clock": self.clock.now,
                "allocation_mode": self.allocation_mode.value,
                "nodes": {nid: n.to_dict() for nid, n in sorted(self.nodes.items())},
                "images": {t: i.to_dict() for t, i in sorted(self.images.items())},
                "templates": {n: t.to_dict() for n, t in sorted(self.templates.items())},
                "workspaces": {
                    wid: {
                        **ws.to_dict(),
                        "image_tag": ws.image_tag,
                        "resources": ws.resources.to_dict(),
                        "episode_start": ws.episode_start,
                        "pending_jobs": [vars(j) for j in ws.pending_jobs],
                        "active_jobs": sorted(ws.active_jobs),
                    }
                    for wid, ws in sorted(self.workspaces.items())
                },
                "reservations": {
                    wid: [nid, res.to_dict()] for wid, (nid, res) in sorted(self.reservations.items())
                },
                "pins": dict(sorted(self.pins.items())),
                "pending_queue": list(self._pending_queue),
                "researcher_ws": dict(sorted(self._researcher_ws.items())),
                "orphan_jobs": {
                    r: [vars(j) for j in jobs] for r, jobs in sorted(self._orphan_jobs.items()) if jobs
                },
                "faults": {
                    fid: {
                        **f.spec.to_dict(),
                        "draws": f.draws,
                        "rng": hashlib.sha256(str(f.rng.getstate()).encode()).hexdigest(),
                    }
                    for fid, f in sorted(self.faults.items())
                },
                "onboarding": {r: rec.to_dict() for r, rec in sorted(self.store.onboarding.items())},
                "latencies": [r.to_dict() for r in self.store.latencies],
                "health": self.store.health,
                "latest_health": {w: r.to_dict() for w, r in sorted(self.latest_health.items())},
                "samples": {
                    nid: [[s.timestamp, s.gpu_util_percent] for s in trace]
                    for nid, trace in sorted(self.store.samples.items())
                },
                "job_intervals": [vars(e) for e in self._job_intervals],
                "pipeline_configs": {p: c.to_dict() for p, c in sorted(self.pipeline_configs.items())},
                "pipelines": {
                    rid: {**s.run.to_dict(), "fail_at": s.fail_at, "pending": s.durations[len(s.run.stage_durations):]}
                    for rid, s in sorted(self.pipelines.items())
                },
                "counters": {
                    "workspaces": self._ws_count,
                    "pipelines": dict(sorted(self._pipeline_counts.items())),
                    "timer_order": self._timer_order,
                },
                "timers": [
                    [t.key, t.ts, t.order, t.kind] for t in sorted(self._timers.values(), key=lambda t: t.order)
                ],
            }

    def state_digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.state_snapshot(), sort_keys=True).encode("utf-8")
        ).hexdigest()

    @property
    def sequence(self) -> int:
        return self._seq
