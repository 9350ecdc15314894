"""Per-frame control pipeline over an abstract predictor.

Ordering per frame:

1. query the predictor on the main context, attending the memory chosen on
   the previous frame;
2. score the primary candidate and classify the frame;
3. stable: update references, anchors and DRM, commit the output;
4. uncertain: grow/score/prune the branch pool and commit a reconfirmed
   branch if there is one;
5. update the missing streak;
6. choose the memory (selection mode, conditioning set) for the next frame;
7. emit one trace event.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

from .anchors import AnchorBank
from .branches import (
    ABSENT,
    Branch,
    BranchContext,
    BranchPool,
    absent_evidence,
    check_reconfirm,
    prune,
    spawn,
    step_score,
    update_wins,
    visible_evidence,
)
from .config import Config
from .core import (
    CandidateMask,
    PredictorOutput,
    ReferenceStats,
    TrackingMode,
    small_object_flag,
    update_reference_stats,
)
from .memory import (
    MemoryDecision,
    MemoryStore,
    bypass_indicator,
    conditioning_set,
    distractor_signal,
    drm_candidate,
    drm_promote,
    select_noncond,
    update_miss_streak,
)
from .predictor import PredictorError
from .reliability import assess

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ablation:
    """Switches that disable one mechanism each, for directional comparisons."""

    branching: bool = True
    bypass: bool = True
    delayed_drm: bool = True
    keep_first: bool = True

    @property
    def flags(self) -> list[str]:
        names = {"branching": "--no-branching", "bypass": "--no-bypass",
                 "delayed_drm": "--no-delayed-drm", "keep_first": "--no-keep-first"}
        return [flag for attr, flag in names.items() if not getattr(self, attr)]


@dataclass
class TrackerState:
    mode: TrackingMode
    main: BranchContext
    stats: ReferenceStats
    bank: AnchorBank
    store: MemoryStore
    pool: BranchPool = field(default_factory=BranchPool)
    t: int = 0
    small: bool = False
    memory: MemoryDecision | None = None


def _margin_json(m: float):
    return None if math.isinf(m) else m


def _branch_summary(b: Branch) -> dict:
    return {
        "root_id": b.root_id,
        "born": b.born,
        "score": b.score,
        "increment": b.last_increment,
        "win_streak": b.win_streak,
        "evidence": b.last_evidence.to_dict() if b.last_evidence else None,
    }


def _output_json(c: CandidateMask | None):
    if c is None or not c.geometry.visible:
        return None
    return {"area": c.geometry.area, "centroid": list(c.geometry.centroid), "token": c.token}


class Tracker:
    def __init__(self, predictor, cfg: Config | None = None, ablation: Ablation | None = None):
        self.predictor = predictor
        self.ablation = ablation or Ablation()
        cfg = cfg or Config()
        if not self.ablation.delayed_drm:
            cfg = cfg.replace(n_drm=1)
        if not self.ablation.keep_first:
            cfg = cfg.replace(keep_first_cond_frame=False)
        self.cfg = cfg
        self.state: TrackerState | None = None
        self._frame_size = predictor.frame_size

    # ------------------------------------------------------------------ init

    def initialize(self) -> dict:
        cfg = self.cfg
        query = self.predictor.initial_context()
        out = self.predictor.predict(0, query, None)
        geom = out.primary.geometry
        if not geom.visible:
            raise PredictorError("frame 0: the initialization mask is empty")
        stats = ReferenceStats.from_first_frame(geom, cfg.median_window)
        bank = AnchorBank.init(out.pointer, cfg.anchor_capacity, frame_index=0)
        main = BranchContext(self.predictor.advance(query, 0, out.primary), deque([geom.centroid], maxlen=2),
                             out.pointer, geom)
        store = MemoryStore(noncond_size=cfg.noncond_buffer_size)
        self.state = TrackerState(TrackingMode.STABLE, main, stats, bank, store, t=0)
        small = small_object_flag(stats, self._frame_size, cfg.small_area_fraction)
        report = assess(out, bank, stats, [], small, cfg)
        store.record_noncond(0, out.primary.quality)
        event = self._base_event(0, report, TrackingMode.STABLE)
        event["committed"] = True
        event["commit"] = {"kind": "init"}
        event["output"] = _output_json(out.primary)
        event["anchors"] = bank.frame_indices
        event["memory"] = {"drm_candidate": False, "drm_promoted": False, "drm_gap": 0,
                           "promotion_streak": 0, "distractor": False, "reappear": False}
        self._finish_frame(event, TrackingMode.STABLE)
        return event

    # ----------------------------------------------------------------- frame

    def process_frame(self, t: int) -> dict:
        st = self.state
        if st is None:
            raise RuntimeError("tracker not initialized")
        if t <= st.t:
            raise ValueError(f"frame indices must increase: got {t} after {st.t}")
        cfg = self.cfg
        out = self.predictor.predict(t, st.main.query, st.memory)
        st.t = t
        small = small_object_flag(st.stats, self._frame_size, cfg.small_area_fraction)
        report = assess(out, st.bank, st.stats, st.main.centers, small, cfg)
        mode = report.mode
        # An open pool is only closed by reconfirmation, never by one good main-path frame.
        if mode is TrackingMode.STABLE and st.pool:
            mode = TrackingMode.AMBIGUOUS
        event = self._base_event(t, report, mode)
        events = event["events"]
        anchors_before = st.bank.frame_indices

        if mode is TrackingMode.STABLE:
            output = out.primary
            mem = self._commit_stable(t, out, small, reappear=False)
            event["commit"] = {"kind": "stable"}
            committed = True
            self._main_follow(t, out)
        elif not self.ablation.branching:
            # single-path baseline: every visible prediction is written back
            output = out.primary
            mem = self._no_drm(t)
            committed = output.geometry.visible
            event["commit"] = {"kind": "direct"} if committed else None
            if committed:
                st.main.query = self.predictor.advance(st.main.query, t, output)
        else:
            output, committed, mem, mode = self._uncertain_frame(t, out, small, mode, events, event)

        st.mode = mode
        event["mode"] = mode.value
        event["committed"] = committed
        event["output"] = _output_json(output)
        event["memory"] = mem
        anchors_after = st.bank.frame_indices
        event["anchors"] = anchors_after if anchors_after != anchors_before else None
        update_miss_streak(st.store, output, committed)
        quality = output.quality if output is not None else out.primary.quality
        st.store.record_noncond(t, quality)
        self._finish_frame(event, mode)
        return event

    def _uncertain_frame(self, t, out: PredictorOutput, small, mode, events, event):
        st, cfg = self.state, self.cfg
        fresh: dict[str, PredictorOutput] = {}
        if st.pool and st.pool.frames_in_recovery >= cfg.recovery_cap:
            events.append({"kind": "reset", "dropped": [_branch_summary(b) for b in st.pool.branches]})
            st.pool.clear()
        if not st.pool:
            st.pool, fresh = spawn(out, st.main, self.predictor, cfg, st.memory)
            events.append({"kind": "spawn", "roots": [b.root_id for b in st.pool.branches]})
        full_outputs: dict[int, PredictorOutput] = {}
        for branch in st.pool.branches:
            if branch.is_absent:
                ev = absent_evidence(out, cfg)
                branch.last_output = None
            else:
                b_out = fresh.get(branch.root_id) if branch.born == t else None
                if b_out is None:
                    b_out = self.predictor.predict(t, branch.context.query, st.memory)
                ev = visible_evidence(b_out, branch.context.centers, st.bank, st.stats, small, cfg)
                branch.last_output = b_out.primary
                full_outputs[id(branch)] = b_out
                geom = b_out.primary.geometry
                if geom.visible:
                    branch.context.centers.append(geom.centroid)
                    branch.context.pointer = b_out.pointer
                    branch.context.last_geometry = geom
                    branch.context.query = self.predictor.advance(branch.context.query, t, b_out.primary)
            branch.score, branch.last_increment = step_score(branch.score, ev, cfg)
            branch.last_evidence = ev
        before = list(st.pool.branches)
        st.pool = prune(st.pool, cfg.branch_keep)
        kept = {id(b) for b in st.pool.branches}
        dropped = [b for b in before if id(b) not in kept]
        if dropped:
            events.append({"kind": "prune", "dropped": [_branch_summary(b) for b in dropped]})
        st.pool.frames_in_recovery += 1
        winner = update_wins(st.pool)
        events.append({"kind": "win", "root_id": winner.root_id, "born": winner.born,
                       "win_streak": winner.win_streak})
        path = check_reconfirm(winner.win_streak, winner.last_evidence, st.store.miss_streak, cfg)
        if path is None:
            return winner.last_output, False, self._no_drm(t), mode

        # commit: the winner's private context becomes the main path
        w_out = full_outputs[id(winner)]
        events.append({"kind": "commit", "root_id": winner.root_id, "born": winner.born, "path": path,
                       "score": winner.score, "pool": [_branch_summary(b) for b in st.pool.branches]})
        event["commit"] = {"kind": "reconfirm", "root_id": winner.root_id, "path": path}
        st.main = winner.context.copy()
        mem = self._commit_stable(t, w_out, small, reappear=(path == "relaxed"), admit_anchor=False)
        st.pool.clear()
        return winner.last_output, True, mem, TrackingMode.STABLE

    # --------------------------------------------------------------- helpers

    def _main_follow(self, t, out: PredictorOutput) -> None:
        main = self.state.main
        main.centers.append(out.primary.geometry.centroid)
        main.pointer = out.pointer
        main.last_geometry = out.primary.geometry
        main.query = self.predictor.advance(main.query, t, out.primary)
        self.state.pool.clear()

    def _commit_stable(self, t, out: PredictorOutput, small: bool, reappear: bool,
                       admit_anchor: bool = True) -> dict:
        st, cfg = self.state, self.cfg
        geom = out.primary.geometry
        q = out.primary.predicted_iou
        ratio = geom.area / st.stats.median_area
        gap = st.store.drm_gap(t)
        distractor = distractor_signal(out, st.stats, cfg)
        candidate = drm_candidate(q, gap, ratio, small, reappear, distractor, cfg)
        promoted = drm_promote(st.store, candidate, t, cfg.n_drm)
        st.stats = update_reference_stats(st.stats, geom, TrackingMode.STABLE)
        # a reconfirmed branch's pointer is not yet independently verified
        if admit_anchor:
            st.bank.maybe_add(out.pointer, q, TrackingMode.STABLE, cfg, t)
        return {"drm_candidate": candidate, "drm_promoted": promoted, "drm_gap": gap,
                "promotion_streak": st.store.promotion_streak, "distractor": distractor,
                "reappear": reappear}

    def _no_drm(self, t) -> dict:
        st = self.state
        gap = st.store.drm_gap(t)
        drm_promote(st.store, False, t, self.cfg.n_drm)
        return {"drm_candidate": False, "drm_promoted": False, "drm_gap": gap,
                "promotion_streak": st.store.promotion_streak, "distractor": False, "reappear": False}

    def _base_event(self, t, report, mode) -> dict:
        return {
            "t": t,
            "mode": mode.value,
            "classified_mode": report.mode.value,
            "scores": {"q": report.top_iou, "s_app": report.s_app, "s_mot": report.s_mot,
                       "s_geo": report.s_geo, "margin": _margin_json(report.margin), "area": report.area},
            "committed": False,
            "commit": None,
            "output": None,
            "events": [],
        }

    def _finish_frame(self, event: dict, mode: TrackingMode) -> None:
        st, cfg = self.state, self.cfg
        small = small_object_flag(st.stats, self._frame_size, cfg.small_area_fraction)
        gamma = bypass_indicator(small, st.store.miss_streak, mode) if self.ablation.bypass else 0
        use_sel = 1 - gamma
        cond = conditioning_set(st.store, event["t"] + 1, cfg.k_c, cfg.keep_first_cond_frame)
        selected = select_noncond(st.store, use_sel, cfg.noncond_capacity)
        st.small = small
        st.memory = MemoryDecision(gamma, use_sel, tuple(cond), tuple(selected))
        event["miss_streak"] = st.store.miss_streak
        event["small"] = small
        event["gamma"] = gamma
        event["use_memory_selection"] = use_sel
        event["memory"].update({
            "drm_frames": sorted(st.store.conditioning),
            "conditioning_set": cond,
            "noncond_selected": selected,
        })
        event["branches"] = [_branch_summary(b) for b in st.pool.branches]
        # fixed key order keeps traces byte-stable
        order = ["t", "mode", "classified_mode", "scores", "committed", "commit", "output", "miss_streak",
                 "small", "gamma", "use_memory_selection", "memory", "anchors", "branches", "events"]
        event.setdefault("anchors", None)
        snapshot = {k: event[k] for k in order}
        event.clear()
        event.update(snapshot)

    # ----------------------------------------------------------------- run

    def run(self):
        yield self.initialize()
        for t in range(1, self.predictor.length):
            yield self.process_frame(t)
