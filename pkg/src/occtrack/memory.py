"""Memory governance: delayed DRM promotion, selection bypass, conditioning set."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .config import Config
from .core import CandidateMask, PredictorOutput, ReferenceStats, TrackingMode


@dataclass
class MemoryStore:
    """Conditioning frames (frame 0 plus DRM entries) and a recency buffer.

    ``noncond`` holds ``(frame_index, quality)`` pairs, oldest first.
    """

    noncond_size: int = 28
    conditioning: list[int] = field(default_factory=lambda: [0])
    noncond: deque = field(default_factory=deque)
    last_drm_frame: int = 0
    promotion_streak: int = 0
    miss_streak: int = 0

    def record_noncond(self, frame_index: int, quality: float) -> None:
        if self.noncond and frame_index <= self.noncond[-1][0]:
            raise ValueError("non-conditioning entries must have increasing frame indices")
        self.noncond.append((frame_index, quality))
        while len(self.noncond) > self.noncond_size:
            self.noncond.popleft()

    def drm_gap(self, t: int) -> int:
        return t - self.last_drm_frame


@dataclass(frozen=True)
class MemoryDecision:
    gamma: int
    use_memory_selection: int
    conditioning_set: tuple[int, ...]
    noncond_selected: tuple[int, ...]


def drm_candidate(q, g, r, small, reappear, distractor, cfg: Config) -> bool:
    tau = cfg.tau_drm_reappear if reappear else cfg.tau_drm
    lo, hi = (cfg.r_min_small, cfg.r_max_small) if small else (cfg.r_min, cfg.r_max)
    return q >= tau and g >= cfg.g_min and lo <= r <= hi and (reappear or distractor)


def drm_promote(store: MemoryStore, candidate: bool, t: int, n_drm: int) -> bool:
    """Advance the consecutive-candidate counter; insert frame ``t`` once it reaches ``n_drm``."""
    if not candidate:
        store.promotion_streak = 0
        return False
    store.promotion_streak += 1
    if store.promotion_streak < n_drm:
        return False
    if t not in store.conditioning:
        store.conditioning.append(t)
    store.last_drm_frame = t
    store.promotion_streak = 0
    return True


def bypass_indicator(small: bool, miss_streak: int, mode: TrackingMode) -> int:
    return int(small and (miss_streak > 0 or mode is not TrackingMode.STABLE))


def select_noncond(store: MemoryStore, use_selection: int, budget: int) -> list[int]:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    entries = list(store.noncond)
    if len(entries) <= budget:
        return [t for t, _ in entries]
    if use_selection:
        window = entries[-2 * budget:]
        # highest quality first, ties to the more recent frame
        ranked = sorted(window, key=lambda e: (e[1], e[0]), reverse=True)[:budget]
        return sorted(t for t, _ in ranked)
    n = len(entries)
    if budget == 1:
        return [entries[-1][0]]
    # round-half-up of i * (n - 1) / (budget - 1), in integers
    span = budget - 1
    positions = [(2 * i * (n - 1) + span) // (2 * span) for i in range(budget)]
    return [entries[p][0] for p in positions]


def conditioning_set(store: MemoryStore, t: int, k_c: int, keep_first: bool = True) -> list[int]:
    def nearest(frames, k):
        # smallest temporal distance first, ties to the more recent frame
        return sorted(frames, key=lambda j: (abs(j - t), -j))[:k]

    if keep_first:
        rest = [j for j in store.conditioning if j != 0]
        return [0] + nearest(rest, k_c - 1)
    return nearest(store.conditioning, k_c)


def distractor_signal(output: PredictorOutput, stats: ReferenceStats, cfg: Config) -> bool:
    primary = output.primary.geometry
    if not primary.visible or stats.median_area is None:
        return False
    limit = cfg.d_dist * math.sqrt(stats.median_area)
    for alt in output.alternatives:
        if alt.predicted_iou < cfg.tau_dist or not alt.geometry.visible:
            continue
        (x0, y0), (x1, y1) = primary.centroid, alt.geometry.centroid
        if math.hypot(x1 - x0, y1 - y0) > limit:
            return True
    return False


def update_miss_streak(store: MemoryStore, output: CandidateMask | None, committed: bool) -> int:
    """A committed visible frame resets the streak; an absent reported output extends it."""
    if committed and output is not None and output.geometry.visible:
        store.miss_streak = 0
    elif output is None or not output.geometry.visible:
        store.miss_streak += 1
    return store.miss_streak
