"""Appearance anchors: normalized pointers from the first frame and verified stable frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Config
from .core import ObjectPointer, TrackingMode


@dataclass(frozen=True)
class Anchor:
    pointer: ObjectPointer
    frame_index: int
    permanent: bool = False


class AnchorBank:
    def __init__(self, anchors: list[Anchor], capacity: int):
        if not anchors or not anchors[0].permanent:
            raise ValueError("an anchor bank starts with its permanent first-frame anchor")
        self.anchors = list(anchors)
        self.capacity = capacity

    @classmethod
    def init(cls, first_pointer: ObjectPointer, capacity: int = 8, frame_index: int = 0) -> AnchorBank:
        return cls([Anchor(first_pointer.normalize(), frame_index, permanent=True)], capacity)

    def __len__(self) -> int:
        return len(self.anchors)

    def copy(self) -> AnchorBank:
        return AnchorBank(self.anchors, self.capacity)

    @property
    def frame_indices(self) -> list[int]:
        return [a.frame_index for a in self.anchors]

    def max_cosine(self, pointer: ObjectPointer) -> float:
        # per-anchor dots: a stacked matmul may round the same pair differently
        # depending on bank size, which would break monotonicity under addition
        return max(float(np.dot(a.pointer.vector, pointer.vector)) for a in self.anchors)

    def best_similarity(self, pointer: ObjectPointer) -> float:
        """Largest cosine to any anchor, mapped from [-1, 1] to [0, 1]."""
        if not self.anchors:
            raise ValueError("anchor bank is empty")
        return min(max((self.max_cosine(pointer) + 1.0) / 2.0, 0.0), 1.0)

    def maybe_add(
        self, pointer: ObjectPointer, q: float, mode: TrackingMode, cfg: Config, frame_index: int
    ) -> bool:
        """Admit a verified stable frame; returns True when the bank changed."""
        if mode is not TrackingMode.STABLE or q < cfg.tau_anchor:
            return False
        pointer = pointer.normalize()
        if self.max_cosine(pointer) >= cfg.anchor_novelty:
            return False
        self.anchors.append(Anchor(pointer, frame_index))
        while len(self.anchors) > self.capacity:
            # first non-permanent anchor is the oldest one
            idx = next(i for i, a in enumerate(self.anchors) if not a.permanent)
            del self.anchors[idx]
        return True
