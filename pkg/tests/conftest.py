from __future__ import annotations

import pytest

from wsplane.compat import ImageSpec
from wsplane.model import CudaVersion, Node, ResourceSpec
from wsplane.plane import ControlPlane, PlaneConfig

GIB = 1024**3

SHIPPED_TAGS = ("pytorch-2x-cu121", "pytorch-2x-cu124", "pytorch-2x-cu130")


def shipped_images() -> list[ImageSpec]:
    runtimes = {"pytorch-2x-cu121": "12.1", "pytorch-2x-cu124": "12.4", "pytorch-2x-cu130": "13.0"}
    return [
        ImageSpec(tag, CudaVersion.parse(rt), "PyTorch", "2.10", "3.10")
        for tag, rt in runtimes.items()
    ]


def gpu_node(node_id: str, max_cuda: str = "13.0", gpu_count: int = 1, **kwargs) -> Node:
    return Node(
        node_id=node_id,
        gpu_count=gpu_count,
        driver_version=kwargs.pop("driver_version", "580.126.09"),
        max_cuda=CudaVersion.parse(max_cuda),
        **kwargs,
    )


def cpu_node(node_id: str, **kwargs) -> Node:
    return Node(node_id=node_id, gpu_count=0, **kwargs)


def gpu_request(cpu: int = 4000, mem: int = 16 * GIB, gpus: int = 1) -> ResourceSpec:
    return ResourceSpec(cpu, mem, gpus)


def cpu_request(cpu: int = 2000, mem: int = 8 * GIB) -> ResourceSpec:
    return ResourceSpec(cpu, mem, 0)


def make_plane(
    nodes: list[Node] | None = None,
    images: list[ImageSpec] | None = None,
    templates: dict[str, tuple[str, ResourceSpec]] | None = None,
    config: PlaneConfig | None = None,
) -> ControlPlane:
    """Plane preloaded with a small standard cluster."""
    plane = ControlPlane(config=config)
    for node in nodes if nodes is not None else [gpu_node("gpu-01")]:
        plane.register_node(node)
    for image in images if images is not None else shipped_images():
        plane.register_image(image)
    defaults = {"pytorch-a5000": ("pytorch-2x-cu124", gpu_request())}
    for name, (tag, resources) in (templates if templates is not None else defaults).items():
        plane.save_template(name, tag, resources, ["home"])
    return plane


@pytest.fixture
def plane() -> ControlPlane:
    return make_plane()
