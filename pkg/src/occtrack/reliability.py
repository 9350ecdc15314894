"""Per-frame reliability cues and the stable / ambiguous / recovery classifier."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .anchors import AnchorBank
from .config import Config
from .core import MaskGeometry, ObjectPointer, PredictorOutput, ReferenceStats, TrackingMode

# Margin reported when the predictor returned a single candidate. It compares
# greater than any finite threshold, so the margin test never fires.
NO_COMPETITOR = math.inf

Point = tuple[float, float]


@dataclass(frozen=True)
class ReliabilityReport:
    s_app: float
    s_mot: float
    s_geo: float
    margin: float
    top_iou: float
    area: int
    mode: TrackingMode
    predicted_center: Point | None


def appearance_score(pointer: ObjectPointer, bank: AnchorBank) -> float:
    return bank.best_similarity(pointer)


def motion_predict(c_prev: Point, c_prev2: Point) -> Point:
    return (2 * c_prev[0] - c_prev2[0], 2 * c_prev[1] - c_prev2[1])


def motion_score(c: Point, c_hat: Point, tau_m: float) -> float:
    if not tau_m > 0:
        raise ValueError("tau_m must be positive")
    return math.exp(-math.hypot(c[0] - c_hat[0], c[1] - c_hat[1]) / tau_m)


def motion_scale(cfg: Config, frame_size: tuple[int, int]) -> float:
    """Absolute motion scale in pixels (``tau_m`` is a fraction of the diagonal)."""
    return cfg.tau_m * math.hypot(*frame_size)


def motion_score_from_history(c: Point, history, tau_m: float) -> tuple[float, Point | None]:
    """Motion score against the last two stable centers; 1.0 without enough history."""
    if len(history) < 2:
        return 1.0, None
    c_hat = motion_predict(history[-1], history[-2])
    return motion_score(c, c_hat, tau_m), c_hat


def _ratio(a: float, b: float) -> float:
    return min(a / b, b / a)


def geometry_score(geom: MaskGeometry, stats: ReferenceStats, small: bool, floor: float = 0.5) -> float:
    if not geom.visible:
        raise ValueError("geometry score is undefined for an absent observation")
    if stats.median_area is None or stats.median_aspect is None:
        raise ValueError("reference statistics have no medians")
    r_area = _ratio(geom.area, stats.median_area)
    if small:
        r_area = max(r_area, floor)
    r_aspect = _ratio(geom.aspect_ratio, stats.median_aspect)
    return min(max(0.7 * r_area + 0.3 * r_aspect, 0.0), 1.0)


def candidate_margin(ious) -> float:
    ious = sorted(ious, reverse=True)
    if not ious:
        raise ValueError("candidate list is empty")
    if len(ious) == 1:
        return NO_COMPETITOR
    return ious[0] - ious[1]


def classify_mode(q, s_app, s_mot, s_geo, margin, area, cfg: Config) -> TrackingMode:
    if area == 0 or q < cfg.tau_rec or s_app < cfg.tau_app_rec:
        return TrackingMode.RECOVERY
    if (
        q < cfg.tau_unc
        or s_app < cfg.tau_app_unc
        or s_mot < cfg.tau_mot
        or s_geo < cfg.tau_geo
        or margin < cfg.tau_delta
    ):
        return TrackingMode.AMBIGUOUS
    return TrackingMode.STABLE


def assess(
    output: PredictorOutput,
    bank: AnchorBank,
    stats: ReferenceStats,
    motion_history,
    small: bool,
    cfg: Config,
) -> ReliabilityReport:
    """Score the primary candidate of one predictor output and classify the frame.

    Absent observations are never scored: their cues are reported as 0 and
    the frame is classified as recovery.
    """
    primary = output.primary
    geom = primary.geometry
    margin = candidate_margin(output.candidate_ious)
    if not geom.visible:
        return ReliabilityReport(
            s_app=0.0, s_mot=0.0, s_geo=0.0, margin=margin, top_iou=primary.predicted_iou,
            area=0, mode=TrackingMode.RECOVERY, predicted_center=None,
        )
    s_app = appearance_score(output.pointer, bank)
    s_mot, c_hat = motion_score_from_history(
        geom.centroid, motion_history, motion_scale(cfg, geom.frame_size)
    )
    s_geo = geometry_score(geom, stats, small, cfg.small_area_floor)
    mode = classify_mode(primary.predicted_iou, s_app, s_mot, s_geo, margin, geom.area, cfg)
    return ReliabilityReport(
        s_app=s_app, s_mot=s_mot, s_geo=s_geo, margin=margin, top_iou=primary.predicted_iou,
        area=geom.area, mode=mode, predicted_center=c_hat,
    )
