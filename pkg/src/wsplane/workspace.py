"""Workspace templates and the researcher-facing lifecycle state machine."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import TransitionError
from .model import ResourceSpec


class WorkspaceState(str, Enum):
    PENDING = "Pending"
    PULLING = "Pulling"
    INITIALIZING = "Initializing"
    RUNNING = "Running"
    STOPPED = "Stopped"
    DELETED = "Deleted"
    FAILED = "Failed"


class StartCondition(str, Enum):
    COLD = "Cold"
    WARM = "Warm"


# Warm starts skip Pulling entirely, hence the direct Pending -> Initializing
# edge; it is only taken when the image was already cached at schedule time.
LEGAL_TRANSITIONS: dict[WorkspaceState, frozenset[WorkspaceState]] = {
    WorkspaceState.PENDING: frozenset(
        {WorkspaceState.PULLING, WorkspaceState.INITIALIZING, WorkspaceState.FAILED}
    ),
    WorkspaceState.PULLING: frozenset({WorkspaceState.INITIALIZING, WorkspaceState.FAILED}),
    WorkspaceState.INITIALIZING: frozenset({WorkspaceState.RUNNING, WorkspaceState.FAILED}),
    WorkspaceState.RUNNING: frozenset({WorkspaceState.STOPPED, WorkspaceState.FAILED}),
    WorkspaceState.STOPPED: frozenset({WorkspaceState.PENDING, WorkspaceState.DELETED}),
    WorkspaceState.FAILED: frozenset({WorkspaceState.PENDING, WorkspaceState.DELETED}),
    WorkspaceState.DELETED: frozenset(),
}

# States in which the workspace holds a node assignment.
NODE_BOUND_STATES = frozenset(
    {WorkspaceState.PULLING, WorkspaceState.INITIALIZING, WorkspaceState.RUNNING}
)


def is_legal(src: WorkspaceState, dst: WorkspaceState) -> bool:
    return dst in LEGAL_TRANSITIONS[src]


def validate_transition(
    src: WorkspaceState, dst: WorkspaceState, start_condition: StartCondition | None = None
) -> None:
    """Raise unless src -> dst is a legal edge (warm-guarded where needed)."""
    if not is_legal(src, dst):
        raise TransitionError(f"illegal transition {src.value} -> {dst.value}")
    if src is WorkspaceState.PENDING and dst is WorkspaceState.INITIALIZING:
        if start_condition is not StartCondition.WARM:
            raise TransitionError("Pending -> Initializing is reserved for warm starts")


@dataclass
class Template:
    """A versioned workspace recipe binding an image, resources and mounts."""

    name: str
    image_tag: str
    resources: ResourceSpec
    mounts: list[str] = field(default_factory=list)
    version: int = 1

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "image_tag": self.image_tag,
            "resources": self.resources.to_dict(),
            "mounts": list(self.mounts),
            "version": self.version,
        }


@dataclass
class PendingJob:
    """A job submitted while its workspace was not Running."""

    job_id: str
    duration: float
    util_percent: float
    exit_code: int


@dataclass
class Workspace:
    workspace_id: str
    owner: str
    template_name: str
    template_version: int
    # Snapshot of the template contents at creation/rebuild time, so later
    # template edits never retroactively change a workspace's request.
    image_tag: str = ""
    resources: ResourceSpec = field(default_factory=lambda: ResourceSpec(1000, 1024**3, 1))
    state: WorkspaceState = WorkspaceState.PENDING
    node_id: str | None = None
    start_condition: StartCondition | None = None
    transition_log: list[tuple[WorkspaceState, float]] = field(default_factory=list)
    created_at: float = 0.0
    # Timestamp of the most recent entry into Pending (creation, restart or
    # rebuild); the deployment-latency stopwatch starts here.
    episode_start: float = 0.0
    pending_jobs: list[PendingJob] = field(default_factory=list)
    active_jobs: set[str] = field(default_factory=set)
    unschedulable_reason: str | None = None

    def record(self, state: WorkspaceState, ts: float) -> None:
        self.state = state
        self.transition_log.append((state, ts))
        if state not in NODE_BOUND_STATES:
            self.node_id = None
        if state is WorkspaceState.PENDING:
            self.episode_start = ts

    def first_running_at(self) -> float | None:
        for state, ts in self.transition_log:
            if state is WorkspaceState.RUNNING:
                return ts
        return None

    def to_dict(self) -> dict:
        return {
            "workspace_id": self.workspace_id,
            "owner": self.owner,
            "template_name": self.template_name,
            "template_version": self.template_version,
            "state": self.state.value,
            "node_id": self.node_id,
            "start_condition": self.start_condition.value if self.start_condition else None,
            "transition_log": [[s.value, ts] for s, ts in self.transition_log],
            "created_at": self.created_at,
            "unschedulable_reason": self.unschedulable_reason,
        }
