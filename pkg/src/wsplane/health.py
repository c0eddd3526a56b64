"""Reproducibility probe: three environment checks per workspace start.

Checks run against the modeled node/image state rather than a live
container, so faults have to be injected explicitly. Each fault owns a
seeded RNG stream; one uniform draw is consumed per applicable check,
which makes the whole failure sequence replayable from the seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .errors import ValidationError


class FaultKind(str, Enum):
    DRIVER_DRIFT = "DriverDrift"
    RUNTIME_MISMATCH = "RuntimeMismatch"
    FRAMEWORK_IMPORT_ERROR = "FrameworkImportError"


@dataclass(frozen=True)
class FaultSpec:
    target: str  # node_id or image_tag
    kind: FaultKind
    probability: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValidationError(
                "invalid_probability", f"probability {self.probability} outside [0, 1]", "probability"
            )

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "kind": self.kind.value,
            "probability": self.probability,
            "seed": self.seed,
        }


@dataclass
class FaultState:
    """An injected fault plus its private, seeded draw stream."""

    fault_id: str
    spec: FaultSpec
    rng: random.Random = field(init=False)
    draws: int = 0

    def __post_init__(self):
        self.rng = random.Random(self.spec.seed)

    def draw(self) -> tuple[float, bool]:
        """One uniform draw; returns (value, triggered)."""
        value = self.rng.random()
        self.draws += 1
        return value, value < self.spec.probability

    def replay_draw(self, recorded: float) -> None:
        """Advance the stream during replay, checking it matches the log."""
        value = self.rng.random()
        self.draws += 1
        if value != recorded:
            raise ValidationError(
                "replay_mismatch",
                f"fault {self.fault_id} draw {self.draws} diverged from the event log",
            )

    def applies_to(self, node_id: str | None, image_tag: str) -> bool:
        kind = self.spec.kind
        if kind is FaultKind.DRIVER_DRIFT:
            return self.spec.target == node_id
        if kind is FaultKind.RUNTIME_MISMATCH:
            return self.spec.target in (node_id, image_tag)
        return self.spec.target == image_tag


@dataclass(frozen=True)
class HealthReport:
    workspace_id: str
    timestamp: float
    driver_ok: bool
    cuda_ok: bool
    framework_ok: bool

    @property
    def reproducible(self) -> bool:
        return self.driver_ok and self.cuda_ok and self.framework_ok

    def to_dict(self) -> dict:
        return {
            "workspace_id": self.workspace_id,
            "timestamp": self.timestamp,
            "driver_ok": self.driver_ok,
            "cuda_ok": self.cuda_ok,
            "framework_ok": self.framework_ok,
            "reproducible": self.reproducible,
        }
