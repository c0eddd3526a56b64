"""wsplane: a simulated control plane for self-service GPU research workspaces."""

from .compat import CompatReport, ImageSpec
from .errors import PlaneError
from .health import FaultKind, FaultSpec, HealthReport
from .metrics import IdleInterval, LatencyRecord, OnboardingRecord, UtilSample
from .model import CudaVersion, Node, ResourceSpec, Taint, compare_cuda
from .plane import ControlPlane, PlaneConfig
from .scheduler import AllocationMode, ScheduleDecision
from .simulation import PipelineConfig, PipelineRun, SimClock, WorkloadProfile
from .workspace import Template, Workspace, WorkspaceState

__version__ = "0.1.0"

__all__ = [
    "AllocationMode",
    "CompatReport",
    "ControlPlane",
    "CudaVersion",
    "FaultKind",
    "FaultSpec",
    "HealthReport",
    "IdleInterval",
    "ImageSpec",
    "LatencyRecord",
    "Node",
    "OnboardingRecord",
    "PipelineConfig",
    "PipelineRun",
    "PlaneConfig",
    "PlaneError",
    "ResourceSpec",
    "ScheduleDecision",
    "SimClock",
    "Taint",
    "Template",
    "UtilSample",
    "WorkloadProfile",
    "Workspace",
    "WorkspaceState",
    "compare_cuda",
]
