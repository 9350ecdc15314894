"""Hypothesis pool used while the tracker is ambiguous or recovering.

Each branch owns a private predictor context, motion history and pointer,
and accumulates a log-evidence score over the frames it survives.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any

from .anchors import AnchorBank
from .config import Config
from .core import CandidateMask, ObjectPointer, PredictorOutput, ReferenceStats
from .predictor import PredictorError
from .reliability import (
    candidate_margin,
    geometry_score,
    motion_scale,
    motion_score_from_history,
)

log = logging.getLogger(__name__)

PRIMARY = "primary"
ABSENT = "absent"


def root_priority(root_id: str) -> int:
    """Tie-break order: primary, then alternatives by rank, then absent."""
    if root_id == PRIMARY:
        return 0
    if root_id == ABSENT:
        return 1_000_000
    return int(root_id.split("-", 1)[1])


@dataclass(frozen=True)
class Evidence:
    q: float
    o: float
    s_app: float
    s_mot: float
    s_geo: float
    area: int
    margin: float

    def to_dict(self) -> dict:
        return {
            "q": self.q, "o": self.o, "s_app": self.s_app, "s_mot": self.s_mot,
            "s_geo": self.s_geo, "area": self.area,
            "margin": None if math.isinf(self.margin) else self.margin,
        }


@dataclass
class BranchContext:
    query: Any
    centers: deque = field(default_factory=lambda: deque(maxlen=2))
    pointer: ObjectPointer | None = None
    last_geometry: Any = None

    def copy(self) -> BranchContext:
        return BranchContext(self.query, deque(self.centers, maxlen=2), self.pointer, self.last_geometry)


@dataclass(eq=False)
class Branch:
    root_id: str
    born: int
    context: BranchContext | None
    score: float = 0.0
    win_streak: int = 0
    last_output: CandidateMask | None = None
    last_evidence: Evidence | None = None
    last_increment: float = 0.0

    @property
    def is_absent(self) -> bool:
        return self.root_id == ABSENT

    @property
    def visible(self) -> bool:
        return self.last_output is not None and self.last_output.geometry.visible


@dataclass
class BranchPool:
    branches: list[Branch] = field(default_factory=list)
    frames_in_recovery: int = 0

    def __len__(self) -> int:
        return len(self.branches)

    def __bool__(self) -> bool:
        return bool(self.branches)

    def argmax(self) -> Branch:
        return min(self.branches, key=_rank_key)

    def clear(self) -> None:
        self.branches.clear()
        self.frames_in_recovery = 0


def _rank_key(branch: Branch):
    return (-branch.score, root_priority(branch.root_id), branch.born)


def step_score(score: float, ev: Evidence, cfg: Config) -> tuple[float, float]:
    """Return ``(new_score, increment)`` for one frame of branch evidence."""
    increment = (
        math.log(max(ev.q, cfg.eps))
        + 0.5 * math.log(max(ev.o, cfg.eps))
        + cfg.lambda_a * ev.s_app
        + cfg.lambda_m * ev.s_mot
        + cfg.lambda_g * ev.s_geo
        - cfg.lambda_e * (ev.area == 0)
    )
    return score + increment, increment


def visible_evidence(
    output: PredictorOutput,
    centers,
    bank: AnchorBank,
    stats: ReferenceStats,
    small: bool,
    cfg: Config,
) -> Evidence:
    primary = output.primary
    geom = primary.geometry
    margin = candidate_margin(output.candidate_ious)
    if not geom.visible:
        return Evidence(primary.predicted_iou, primary.objectness, 0.0, 0.0, 0.0, 0, margin)
    s_mot, _ = motion_score_from_history(geom.centroid, centers, motion_scale(cfg, geom.frame_size))
    return Evidence(
        q=primary.predicted_iou,
        o=primary.objectness,
        s_app=bank.best_similarity(output.pointer),
        s_mot=s_mot,
        s_geo=geometry_score(geom, stats, small, cfg.small_area_floor),
        area=geom.area,
        margin=margin,
    )


def absent_evidence(main_output: PredictorOutput, cfg: Config) -> Evidence:
    o = min(max(1.0 - main_output.primary.objectness, cfg.eps), 1.0)
    return Evidence(cfg.eps, o, 0.0, 0.0, 0.0, 0, math.inf)


def spawn(
    output: PredictorOutput,
    main_context: BranchContext,
    predictor,
    cfg: Config,
    memory=None,
) -> tuple[BranchPool, dict[str, PredictorOutput]]:
    """Open a pool from the current frame's output.

    Returns the pool and the spawn-frame output of every visible-rooted
    branch, keyed by root id, so the caller can score the spawn frame.
    """
    t = output.frame_index
    pool = BranchPool()
    outputs = {}
    pool.branches.append(Branch(PRIMARY, t, main_context.copy()))
    outputs[PRIMARY] = output
    for k, alt in enumerate(output.alternatives[: max(cfg.branch_keep - 2, 0)], start=1):
        root = f"alt-{k}"
        try:
            query, alt_output = predictor.prompt(t, alt, root, memory)
        except PredictorError as exc:
            log.warning("frame %d: dropping branch %s: %s", t, root, exc)
            continue
        ctx = main_context.copy()
        ctx.query = query
        pool.branches.append(Branch(root, t, ctx))
        outputs[root] = alt_output
    pool.branches.append(Branch(ABSENT, t, None))
    pool.branches = pool.branches[: cfg.branch_keep]
    return pool, outputs


def prune(pool: BranchPool, branch_keep: int) -> BranchPool:
    best: dict[str, Branch] = {}
    for branch in sorted(pool.branches, key=_rank_key):
        best.setdefault(branch.root_id, branch)
    kept = sorted(best.values(), key=_rank_key)[:branch_keep]
    return BranchPool(kept, pool.frames_in_recovery)


def update_wins(pool: BranchPool) -> Branch:
    """Advance the argmax branch's win streak and zero every other one."""
    winner = pool.argmax()
    for branch in pool.branches:
        branch.win_streak = branch.win_streak + 1 if branch is winner else 0
    return winner


def check_reconfirm(win_streak: int, ev: Evidence, miss_streak: int, cfg: Config) -> str | None:
    """Return the reconfirmation path taken (``"relaxed"`` / ``"generic"``) or None."""
    if miss_streak >= cfg.l_miss:
        ok = (
            win_streak >= 1
            and ev.q >= cfg.tau_rep_iou
            and ev.s_app >= cfg.tau_rep_app
            and ev.margin >= cfg.tau_rep_delta
            and ev.area > 0
        )
        return "relaxed" if ok else None
    ok = win_streak >= cfg.n_win and ev.s_app >= cfg.tau_reconf_app and ev.area > 0
    return "generic" if ok else None
