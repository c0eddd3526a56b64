"""Versioned image registry and the host/runtime compatibility rule.

An image is compatible with a node exactly when its CUDA runtime is at
or below the node's maximum supported CUDA version. Framework and
interpreter versions are carried for reporting but never gate
placement; mismatches there surface through the health check instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import CudaVersion, Node


@dataclass(frozen=True)
class ImageSpec:
    """A published container image tag. Tags are immutable once registered."""

    tag: str
    cuda_runtime: CudaVersion
    framework: str
    framework_version: str
    interpreter_version: str

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "cuda_runtime": str(self.cuda_runtime),
            "framework": self.framework,
            "framework_version": self.framework_version,
            "interpreter_version": self.interpreter_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ImageSpec:
        return cls(
            tag=d["tag"],
            cuda_runtime=CudaVersion.parse(d["cuda_runtime"]),
            framework=d["framework"],
            framework_version=str(d["framework_version"]),
            interpreter_version=str(d["interpreter_version"]),
        )


@dataclass(frozen=True)
class CompatReport:
    image_tag: str
    node_id: str
    compatible: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "image_tag": self.image_tag,
            "node_id": self.node_id,
            "compatible": self.compatible,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class DriverUpdateResult:
    """Outcome of a host driver change: full revalidation of the registry."""

    node_id: str
    reports: tuple[CompatReport, ...]
    newly_incompatible: tuple[str, ...]


def image_compatible(image: ImageSpec, node: Node) -> CompatReport:
    """Apply the runtime-at-or-below-host-maximum rule for one pair."""
    if image.cuda_runtime <= node.max_cuda:
        return CompatReport(image.tag, node.node_id, True)
    reason = (
        f"image {image.tag} needs CUDA runtime {image.cuda_runtime}, "
        f"node {node.node_id} supports at most {node.max_cuda}"
    )
    return CompatReport(image.tag, node.node_id, False, reason)


def revalidate_node(images: dict[str, ImageSpec], node: Node, before: dict[str, bool]) -> DriverUpdateResult:
    """Re-check every registered tag against a node after a driver change.

    `before` maps tag -> compatibility prior to the change; tags that
    flipped from compatible to incompatible are the newly incompatible
    set. No tag is ever removed.
    """
    reports = tuple(image_compatible(images[tag], node) for tag in sorted(images))
    newly = tuple(r.image_tag for r in reports if not r.compatible and before.get(r.image_tag, False))
    return DriverUpdateResult(node.node_id, reports, newly)
