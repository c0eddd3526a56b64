"""Cluster domain types: CUDA versions, taints, resource requests and nodes."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError

GPU_TAINT_KEY = "nvidia.com/gpu"

DEFAULT_GPU_MODEL = "RTX A5000"
DEFAULT_CPU_CAPACITY = 16_000  # millicores
DEFAULT_MEM_CAPACITY = 64 * 1024**3  # bytes


@dataclass(frozen=True, order=True)
class CudaVersion:
    """A CUDA version ordered numerically component-wise (12.10 > 12.4)."""

    major: int
    minor: int

    def __post_init__(self):
        if self.major < 0 or self.minor < 0:
            raise ValidationError("invalid_version", f"negative CUDA version component: {self}")

    @classmethod
    def parse(cls, text: str | float | CudaVersion) -> CudaVersion:
        if isinstance(text, CudaVersion):
            return text
        raw = str(text)
        parts = raw.split(".")
        if len(parts) != 2:
            raise ValidationError("invalid_version", f"expected major.minor, got {raw!r}", "cuda")
        try:
            return cls(int(parts[0]), int(parts[1]))
        except ValueError:
            raise ValidationError("invalid_version", f"non-numeric CUDA version {raw!r}", "cuda")

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}"


def compare_cuda(a: CudaVersion, b: CudaVersion) -> int:
    """Return -1, 0 or 1 as `a` is below, equal to or above `b`."""
    if a == b:
        return 0
    return -1 if a < b else 1


@dataclass(frozen=True)
class Taint:
    key: str
    effect: str = "NoSchedule"  # the only effect in this system

    def __post_init__(self):
        if self.effect != "NoSchedule":
            raise ValidationError("invalid_taint", f"unsupported taint effect {self.effect!r}")


@dataclass(frozen=True)
class ResourceSpec:
    """Per-workspace resource request. gpu_count = 0 means CPU-only."""

    cpu_millicores: int
    mem_bytes: int
    gpu_count: int = 0

    def __post_init__(self):
        if self.cpu_millicores <= 0:
            raise ValidationError("invalid_resources", "cpu_millicores must be positive", "cpu_millicores")
        if self.mem_bytes <= 0:
            raise ValidationError("invalid_resources", "mem_bytes must be positive", "mem_bytes")
        if self.gpu_count < 0:
            raise ValidationError("invalid_resources", "gpu_count must be non-negative", "gpu_count")

    def to_dict(self) -> dict:
        return {
            "cpu_millicores": self.cpu_millicores,
            "mem_bytes": self.mem_bytes,
            "gpu_count": self.gpu_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ResourceSpec:
        return cls(int(d["cpu_millicores"]), int(d["mem_bytes"]), int(d.get("gpu_count", 0)))


@dataclass
class Node:
    """A compute host in the pool.

    GPU nodes always carry the GPU taint; CPU-only nodes carry none.
    Free counters are maintained by the control plane as reservations
    come and go.
    """

    node_id: str
    gpu_count: int = 1
    gpu_model: str = DEFAULT_GPU_MODEL
    driver_version: str = "580.126.09"
    max_cuda: CudaVersion = field(default_factory=lambda: CudaVersion(13, 0))
    labels: dict[str, str] = field(default_factory=dict)
    taints: frozenset[Taint] = frozenset()
    cpu_capacity: int = DEFAULT_CPU_CAPACITY
    mem_capacity: int = DEFAULT_MEM_CAPACITY
    gpu_free: int = 0
    cpu_free: int = 0
    mem_free: int = 0
    image_cache: list[str] = field(default_factory=list)  # LRU order, most recent last
    cache_capacity: int | None = None  # None = unbounded

    def __post_init__(self):
        if self.gpu_count < 0:
            raise ValidationError("invalid_node", "gpu_count must be non-negative", "gpu_count")
        if self.cpu_capacity <= 0 or self.mem_capacity <= 0:
            raise ValidationError("invalid_node", "capacities must be positive")
        expected = frozenset({Taint(GPU_TAINT_KEY)}) if self.gpu_count > 0 else frozenset()
        if self.taints and self.taints != expected:
            raise ValidationError(
                "invalid_node",
                f"node {self.node_id} taints must be derived from gpu_count",
                "taints",
            )
        self.taints = expected
        self.gpu_free = self.gpu_count
        self.cpu_free = self.cpu_capacity
        self.mem_free = self.mem_capacity

    @property
    def is_gpu(self) -> bool:
        return self.gpu_count > 0

    def has_cached(self, tag: str) -> bool:
        return tag in self.image_cache

    def cache_image(self, tag: str) -> None:
        if tag in self.image_cache:
            self.image_cache.remove(tag)
        self.image_cache.append(tag)
        if self.cache_capacity is not None:
            while len(self.image_cache) > self.cache_capacity:
                self.image_cache.pop(0)

    def fits(self, req: ResourceSpec) -> bool:
        return (
            req.gpu_count <= self.gpu_free
            and req.cpu_millicores <= self.cpu_free
            and req.mem_bytes <= self.mem_free
        )

    def reserve(self, req: ResourceSpec) -> None:
        if not self.fits(req):
            raise ValidationError("capacity_invariant", f"reservation exceeds free capacity on {self.node_id}")
        self.gpu_free -= req.gpu_count
        self.cpu_free -= req.cpu_millicores
        self.mem_free -= req.mem_bytes

    def free(self, req: ResourceSpec) -> None:
        self.gpu_free += req.gpu_count
        self.cpu_free += req.cpu_millicores
        self.mem_free += req.mem_bytes
        if (
            self.gpu_free > self.gpu_count
            or self.cpu_free > self.cpu_capacity
            or self.mem_free > self.mem_capacity
        ):
            raise ValidationError("capacity_invariant", f"release drove {self.node_id} above capacity")

    def check_invariants(self) -> None:
        assert 0 <= self.gpu_free <= self.gpu_count, self.node_id
        assert 0 <= self.cpu_free <= self.cpu_capacity, self.node_id
        assert 0 <= self.mem_free <= self.mem_capacity, self.node_id
        if self.gpu_count > 0:
            assert Taint(GPU_TAINT_KEY) in self.taints, self.node_id
        else:
            assert not self.taints, self.node_id

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "gpu_count": self.gpu_count,
            "gpu_model": self.gpu_model,
            "driver_version": self.driver_version,
            "max_cuda": str(self.max_cuda),
            "labels": dict(self.labels),
            "taints": sorted(t.key for t in self.taints),
            "cpu_capacity": self.cpu_capacity,
            "mem_capacity": self.mem_capacity,
            "gpu_free": self.gpu_free,
            "cpu_free": self.cpu_free,
            "mem_free": self.mem_free,
            "image_cache": list(self.image_cache),
            "cache_capacity": self.cache_capacity,
        }
