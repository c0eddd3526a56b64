"""Node selection: taint filtering, compatibility, resource fit, tie-breaking.

The policy is first-fit-by-preference over the filtered candidate set.
Filters run in a fixed order so an unschedulable outcome can name the
dominant filter (the first one that emptied the pool). Fancier policies
(bin-packing, preemption) plug in behind `SchedulingPolicy`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from .compat import ImageSpec, image_compatible
from .model import Node, ResourceSpec


class AllocationMode(str, Enum):
    SHARED = "Shared"
    DEDICATED_VM = "DedicatedVM"


@dataclass(frozen=True)
class ScheduleDecision:
    workspace_id: str
    assigned: bool
    node_id: str | None = None
    reason: str | None = None
    candidates_considered: int = 0
    cache_hit: bool = False

    @property
    def outcome(self) -> str:
        return f"Assigned({self.node_id})" if self.assigned else f"Unschedulable({self.reason})"

    def to_dict(self) -> dict:
        return {
            "workspace_id": self.workspace_id,
            "assigned": self.assigned,
            "node_id": self.node_id,
            "reason": self.reason,
            "candidates_considered": self.candidates_considered,
            "cache_hit": self.cache_hit,
        }


class SchedulingPolicy(Protocol):
    def pick(self, survivors: list[Node], image_tag: str) -> Node:
        """Choose one node from a non-empty filtered candidate list."""


class FirstFitByPreference:
    """Prefer cached image, then most free GPUs, then smallest node_id."""

    def pick(self, survivors: list[Node], image_tag: str) -> Node:
        return min(
            survivors,
            key=lambda n: (0 if n.has_cached(image_tag) else 1, -n.gpu_free, n.node_id),
        )


def decide(
    workspace_id: str,
    owner: str,
    request: ResourceSpec,
    image: ImageSpec,
    nodes: list[Node],
    mode: AllocationMode = AllocationMode.SHARED,
    pins: dict[str, str] | None = None,
    policy: SchedulingPolicy | None = None,
) -> ScheduleDecision:
    """Evaluate the filter chain and pick a node, without mutating anything.

    In DedicatedVM mode a researcher is confined to their pinned node;
    unpinned researchers may only claim nodes no one else has pinned.
    """
    pins = pins or {}
    policy = policy or FirstFitByPreference()

    if mode is AllocationMode.DEDICATED_VM:
        pinned = pins.get(owner)
        if pinned is not None:
            pool = [n for n in nodes if n.node_id == pinned]
        else:
            taken = set(pins.values())
            pool = [n for n in nodes if n.node_id not in taken]
        if not pool:
            return ScheduleDecision(
                workspace_id,
                assigned=False,
                reason="pinning: no dedicated node available",
                candidates_considered=0,
            )
    else:
        pool = list(nodes)

    considered = len(pool)
    if not pool:
        return ScheduleDecision(
            workspace_id, assigned=False, reason="no nodes registered", candidates_considered=0
        )

    # Filter 1: taints. CPU-only workloads are repelled by the GPU taint;
    # GPU-requesting workloads tolerate it.
    if request.gpu_count == 0:
        after_taint = [n for n in pool if not n.taints]
    else:
        after_taint = list(pool)
    if not after_taint:
        return ScheduleDecision(
            workspace_id,
            assigned=False,
            reason="taint: CPU-only workload excluded from GPU-tainted nodes",
            candidates_considered=considered,
        )

    # Filter 2: image compatibility.
    after_compat = [n for n in after_taint if image_compatible(image, n).compatible]
    if not after_compat:
        return ScheduleDecision(
            workspace_id,
            assigned=False,
            reason=f"compatibility: image {image.tag} incompatible with every candidate node",
            candidates_considered=considered,
        )

    # Filter 3: resource fit.
    survivors = [n for n in after_compat if n.fits(request)]
    if not survivors:
        return ScheduleDecision(
            workspace_id,
            assigned=False,
            reason="resources: no candidate node has sufficient free capacity",
            candidates_considered=considered,
        )

    chosen = policy.pick(survivors, image.tag)
    return ScheduleDecision(
        workspace_id,
        assigned=True,
        node_id=chosen.node_id,
        candidates_considered=considered,
        cache_hit=chosen.has_cached(image.tag),
    )
