"""Shared value types and mask-geometry helpers.

Masks cross the library boundary only as :class:`MaskGeometry`; a raw
bitmask is accepted solely by :func:`geometry_summary`.
"""

from __future__ import annotations

import enum
import statistics
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class TrackingMode(str, enum.Enum):
    STABLE = "stable"
    AMBIGUOUS = "ambiguous"
    RECOVERY = "recovery"

    @property
    def severity(self) -> int:
        return _SEVERITY[self]


_SEVERITY = {TrackingMode.STABLE: 0, TrackingMode.AMBIGUOUS: 1, TrackingMode.RECOVERY: 2}


@dataclass(frozen=True)
class MaskGeometry:
    area: int
    centroid: tuple[float, float] | None
    aspect_ratio: float | None
    frame_size: tuple[int, int]

    def __post_init__(self):
        if self.area < 0:
            raise ValueError(f"area must be >= 0, got {self.area}")
        if self.area > 0:
            if self.centroid is None or self.aspect_ratio is None:
                raise ValueError("visible geometry needs a centroid and aspect ratio")
            if not self.aspect_ratio > 0:
                raise ValueError(f"aspect_ratio must be > 0, got {self.aspect_ratio}")

    @classmethod
    def absent(cls, frame_size: tuple[int, int]) -> MaskGeometry:
        return cls(0, None, None, frame_size)

    @property
    def visible(self) -> bool:
        return self.area > 0


def geometry_summary(bitmask) -> MaskGeometry:
    """Summarize a 2-D boolean mask (rows = y, columns = x)."""
    grid = np.asarray(bitmask, dtype=bool)
    if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D grid, got shape {grid.shape}")
    height, width = grid.shape
    ys, xs = np.nonzero(grid)
    if xs.size == 0:
        return MaskGeometry.absent((width, height))
    # Bounding-box extents are inclusive, so a single row/column is 1 cell.
    bbox_w = int(xs.max() - xs.min()) + 1
    bbox_h = int(ys.max() - ys.min()) + 1
    return MaskGeometry(
        area=int(xs.size),
        centroid=(float(xs.mean()), float(ys.mean())),
        aspect_ratio=bbox_w / bbox_h,
        frame_size=(width, height),
    )


@dataclass(frozen=True)
class ObjectPointer:
    vector: np.ndarray

    @classmethod
    def normalized(cls, vector) -> ObjectPointer:
        v = np.asarray(vector, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero pointer")
        return cls(v / norm)

    def normalize(self) -> ObjectPointer:
        return ObjectPointer.normalized(self.vector)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def cosine(self, other: ObjectPointer) -> float:
        return float(np.dot(self.vector, other.vector))


@dataclass(frozen=True)
class CandidateMask:
    geometry: MaskGeometry
    predicted_iou: float
    objectness: float
    # Opaque predictor handle for re-prompting with this candidate; never
    # interpreted by the tracker.
    token: str | None = None

    def __post_init__(self):
        for name in ("predicted_iou", "objectness"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    @property
    def quality(self) -> float:
        return self.objectness * self.predicted_iou


@dataclass(frozen=True)
class PredictorOutput:
    primary: CandidateMask
    alternatives: tuple[CandidateMask, ...]
    pointer: ObjectPointer
    frame_index: int

    def __post_init__(self):
        ious = [c.predicted_iou for c in self.alternatives]
        if any(a < b for a, b in zip(ious, ious[1:])):
            raise ValueError("alternatives must be sorted by predicted_iou, descending")
        if ious and self.primary.predicted_iou < ious[0]:
            raise ValueError("primary must have the highest predicted_iou")
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")

    @property
    def candidate_ious(self) -> list[float]:
        return [self.primary.predicted_iou] + [c.predicted_iou for c in self.alternatives]


@dataclass
class ReferenceStats:
    """Median area / aspect over a bounded window of stable frames."""

    capacity: int
    history: deque = field(default_factory=deque)
    median_area: float | None = None
    median_aspect: float | None = None

    @classmethod
    def from_first_frame(cls, geometry: MaskGeometry, capacity: int) -> ReferenceStats:
        stats = cls(capacity)
        return update_reference_stats(stats, geometry, TrackingMode.STABLE)

    def copy(self) -> ReferenceStats:
        return ReferenceStats(self.capacity, deque(self.history), self.median_area, self.median_aspect)


def update_reference_stats(
    stats: ReferenceStats, geometry: MaskGeometry, mode: TrackingMode
) -> ReferenceStats:
    if not geometry.visible:
        raise ValueError("reference statistics only accept visible geometry")
    if mode is not TrackingMode.STABLE:
        return stats
    out = stats.copy()
    out.history.append((geometry.area, geometry.aspect_ratio))
    while len(out.history) > out.capacity:
        out.history.popleft()
    out.median_area = float(statistics.median(a for a, _ in out.history))
    out.median_aspect = float(statistics.median(r for _, r in out.history))
    return out


def small_object_flag(stats: ReferenceStats, frame_size: tuple[int, int], small_area_fraction: float) -> bool:
    if stats.median_area is None:
        raise ValueError("reference statistics have no median yet")
    width, height = frame_size
    return stats.median_area < small_area_fraction * width * height
