"""Deterministic scenario-scripted predictor.

A scenario describes a target trajectory, occlusion intervals and
distractors. :class:`SimPredictor` turns it into per-frame predictor outputs
that exercise every branch of the control layer, and :func:`ground_truth`
gives the matching per-frame truth for scoring.

Every random draw comes from a xoshiro256** stream keyed by
``(seed, frame, channel, identity)``, so ``predict`` is a pure function of
``(script, t, context)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .config import Config
from .core import CandidateMask, MaskGeometry, ObjectPointer, PredictorOutput
from .memory import MemoryDecision
from .predictor import PredictorError
from .rng import Xoshiro256

KINDS = ("steady", "occlusion", "distractor", "reappear-small")
TARGET = "target"

# Output model constants.
BASE_IOU = 0.90
BASE_OBJECTNESS = 0.95
AREA_JITTER = 0.03
ASPECT_JITTER = 0.02
ONSET_AREA_FACTOR = 0.4
ONSET_IOU = 0.20
ONSET_OBJECTNESS = 0.40
OCCLUDED_IOU = 0.10
OCCLUDED_OBJECTNESS = 0.05
CROSS_RADIUS = 2.0      # in units of sqrt(area): candidates compete, margin < 0.06
NEAR_RADIUS = 6.0       # in units of sqrt(area): distractor shows up as a weak alternative
CROSS_MARGIN = 0.06
SWAP_RADIUS = 1.0       # in units of sqrt(area): masks overlap, unprompted contexts may swap
SWAP_PROBABILITY = 0.1
PROMPT_HOLD = 15        # frames over which a fresh prompt suppresses swaps
SMALL_MEMORY_WEIGHT = 1.0
LARGE_MEMORY_WEIGHT = 0.25


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Keyframe:
    frame: int
    center: tuple[float, float]
    area: float
    aspect: float


@dataclass(frozen=True)
class Distractor:
    keyframes: tuple[Keyframe, ...]
    similarity: float


@dataclass(frozen=True)
class Noise:
    center_sigma: float = 1.0
    iou_sigma: float = 0.05
    pointer_sigma: float = 0.05


@dataclass(frozen=True)
class ScenarioScript:
    kind: str
    seed: int
    length: int
    frame_size: tuple[int, int]
    pointer_dim: int
    target: tuple[Keyframe, ...]
    occlusions: tuple[tuple[int, int], ...] = ()
    distractors: tuple[Distractor, ...] = ()
    noise: Noise = field(default_factory=Noise)

    def __post_init__(self):
        validate_script(self)

    def occluded(self, t: int) -> bool:
        return any(s <= t < e for s, e in self.occlusions)

    def occlusion_onset(self, t: int) -> bool:
        return any(s == t for s, _ in self.occlusions)


def validate_script(s: ScenarioScript) -> None:
    if s.length < 1:
        raise ScenarioError(f"length must be >= 1, got {s.length}")
    if len(s.frame_size) != 2 or min(s.frame_size) < 1:
        raise ScenarioError(f"frame_size must be two positive integers, got {s.frame_size}")
    if s.pointer_dim < 2:
        raise ScenarioError(f"pointer_dim must be >= 2, got {s.pointer_dim}")
    if not s.target:
        raise ScenarioError("target needs at least one keyframe")
    for name, kfs in [("target", s.target)] + [(f"distractors[{i}]", d.keyframes) for i, d in enumerate(s.distractors)]:
        frames = [k.frame for k in kfs]
        if frames != sorted(set(frames)):
            raise ScenarioError(f"{name}: keyframe frames must be strictly increasing")
        for k in kfs:
            if k.area <= 0 or k.aspect <= 0:
                raise ScenarioError(f"{name}: keyframe at frame {k.frame} needs area > 0 and aspect > 0")
    for start, end in s.occlusions:
        if not 0 <= start < end <= s.length:
            raise ScenarioError(f"occlusion interval [{start}, {end}) outside [0, {s.length})")
    if s.occlusions and s.occluded(0):
        raise ScenarioError("the target must be visible on frame 0")
    for i, d in enumerate(s.distractors):
        if not 0.0 <= d.similarity <= 1.0:
            raise ScenarioError(f"distractors[{i}].similarity must lie in [0, 1]")


def interpolate(keyframes, t: int) -> tuple[tuple[float, float], float, float]:
    if t <= keyframes[0].frame:
        k = keyframes[0]
        return k.center, k.area, k.aspect
    if t >= keyframes[-1].frame:
        k = keyframes[-1]
        return k.center, k.area, k.aspect
    for a, b in zip(keyframes, keyframes[1:]):
        if a.frame <= t <= b.frame:
            w = (t - a.frame) / (b.frame - a.frame)
            center = (a.center[0] + w * (b.center[0] - a.center[0]), a.center[1] + w * (b.center[1] - a.center[1]))
            return center, a.area + w * (b.area - a.area), a.aspect + w * (b.aspect - a.aspect)
    raise AssertionError("unreachable")


# --------------------------------------------------------------------------
# generation


def _small_limit(frame_size, cfg: Config) -> float:
    return cfg.small_area_fraction * frame_size[0] * frame_size[1]


def generate(kind: str, seed: int, cfg: Config | None = None, length: int | None = None) -> ScenarioScript:
    if kind not in KINDS:
        raise ScenarioError(f"unknown scenario kind {kind!r}; expected one of {', '.join(KINDS)}")
    cfg = cfg or Config()
    rng = Xoshiro256.stream("generate", kind, seed)
    w, h = 640, 480
    noise = Noise()

    def path(start, velocity, n, area, aspect, wobble=True):
        # two legs with a mild heading change at the midpoint
        mid = n // 2
        vx, vy = velocity
        if wobble:
            turn = rng.uniform(-0.3, 0.3)
            c, s_ = math.cos(turn), math.sin(turn)
            v2 = (vx * c - vy * s_, vx * s_ + vy * c)
        else:
            v2 = velocity
        p_mid = (start[0] + vx * mid, start[1] + vy * mid)
        p_end = (p_mid[0] + v2[0] * (n - 1 - mid), p_mid[1] + v2[1] * (n - 1 - mid))
        return (
            Keyframe(0, _r(start), area, aspect),
            Keyframe(mid, _r(p_mid), area * rng.uniform(0.9, 1.1), aspect),
            Keyframe(n - 1, _r(p_end), area * rng.uniform(0.9, 1.1), aspect),
        )

    occlusions: tuple = ()
    distractors: tuple = ()
    if kind in ("steady", "occlusion"):
        n = length or 120
        area = rng.uniform(2000.0, 4000.0)
        speed = rng.uniform(0.5, 1.5)
        heading = rng.uniform(0, 2 * math.pi)
        velocity = (speed * math.cos(heading), speed * math.sin(heading))
        start = (w / 2 - velocity[0] * n / 2, h / 2 - velocity[1] * n / 2)
        target = path(start, velocity, n, area, rng.uniform(0.7, 1.4))
        if kind == "occlusion":
            gap = rng.integers(3, max(cfg.l_miss - 1, 3))
            onset = rng.integers(30, 60)
            occlusions = ((onset, min(onset + gap, n)),)
    elif kind == "distractor":
        n = length or 120
        area = rng.uniform(1800.0, 3200.0)
        side = math.sqrt(area)
        cross = rng.integers(50, 70)
        speed = rng.uniform(2.5, 3.5)
        y = h / 2 + rng.uniform(-60, 60)
        t_start = (w / 2 - speed * cross, y)
        target = (
            Keyframe(0, _r(t_start), area, rng.uniform(0.8, 1.25)),
            Keyframe(n - 1, _r((t_start[0] + speed * (n - 1), y)), area * rng.uniform(0.9, 1.1), 1.0),
        )
        target = (target[0], replace(target[1], aspect=target[0].aspect))
        # distractor runs the opposite way, slightly offset, meeting the target at `cross`
        d_speed = rng.uniform(2.5, 3.5)
        offset = rng.uniform(-0.4, 0.4) * side
        d_start = (w / 2 + d_speed * cross, y + offset)
        d_area = area * rng.uniform(0.85, 1.15)
        d_kfs = (
            Keyframe(0, _r(d_start), d_area, rng.uniform(0.8, 1.25)),
            Keyframe(n - 1, _r((d_start[0] - d_speed * (n - 1), y + offset)), d_area, 1.0),
        )
        d_kfs = (d_kfs[0], replace(d_kfs[1], aspect=d_kfs[0].aspect))
        distractors = (Distractor(d_kfs, round(rng.uniform(0.8, 0.9), 6)),)
    else:  # reappear-small
        gap = rng.integers(cfg.l_miss + 5, cfg.l_miss + 12)
        onset = rng.integers(30, 45)
        n = length or onset + gap + 40
        limit = _small_limit((w, h), cfg)
        area = rng.uniform(0.1 * limit, 0.6 * limit)
        speed = rng.uniform(0.5, 2.0)
        heading = rng.uniform(0, 2 * math.pi)
        velocity = (speed * math.cos(heading), speed * math.sin(heading))
        start = (w / 2 - velocity[0] * n / 2, h / 2 - velocity[1] * n / 2)
        target = path(start, velocity, n, area, rng.uniform(0.7, 1.4))
        # keep the whole trajectory small
        target = tuple(replace(k, area=min(k.area, 0.9 * limit)) for k in target)
        occlusions = ((onset, min(onset + gap, n)),)
    return ScenarioScript(
        kind=kind, seed=seed, length=n, frame_size=(w, h), pointer_dim=64,
        target=target, occlusions=occlusions, distractors=distractors, noise=noise,
    )


def _r(p):
    return (round(p[0], 3), round(p[1], 3))


# --------------------------------------------------------------------------
# ground truth


@dataclass(frozen=True)
class TruthFrame:
    visible: bool
    center: tuple[float, float]
    area: float
    aspect: float
    identity: str  # "target" when visible, "none" otherwise


def ground_truth(script: ScenarioScript) -> list[TruthFrame]:
    out = []
    for t in range(script.length):
        center, area, aspect = interpolate(script.target, t)
        visible = not script.occluded(t)
        out.append(TruthFrame(visible, center, area, aspect, TARGET if visible else "none"))
    return out


# --------------------------------------------------------------------------
# predictor


@dataclass(frozen=True)
class SimContext:
    context_id: str
    token: str
    prompt_frame: int = 0


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


class SimPredictor:
    """Scripted stand-in for a promptable video segmentation backbone.

    Visible objects are reported with jittered geometry and high IoU. The
    followed object degrades to an empty mask while occluded. Nearby
    distractors appear as alternatives; when they overlap the followed object
    the margin collapses and an unprompted context may swap onto the
    distractor. Predictions for a small target weaken when the attended
    non-conditioning memory holds no frames in which the target was visible.
    """

    def __init__(self, script: ScenarioScript):
        self.script = script
        self.frame_size = script.frame_size
        self.length = script.length
        self.truth = ground_truth(script)
        self._small_limit = 0.005 * script.frame_size[0] * script.frame_size[1]
        self._archetypes = self._make_archetypes()
        self._obs_cache: dict = {}

    def _make_archetypes(self) -> dict[str, np.ndarray]:
        d = self.script.pointer_dim
        rng = Xoshiro256.stream(self.script.seed, "archetype", TARGET)
        target = _unit(np.array(rng.normals(d)))
        out = {TARGET: target}
        for i, dis in enumerate(self.script.distractors):
            rng = Xoshiro256.stream(self.script.seed, "archetype", i)
            u = np.array(rng.normals(d))
            u = _unit(u - np.dot(u, target) * target)
            s = dis.similarity
            out[f"distractor-{i}"] = s * target + math.sqrt(max(1.0 - s * s, 0.0)) * u
        return out

    # identities ------------------------------------------------------------

    def identities(self) -> list[str]:
        return [TARGET] + [f"distractor-{i}" for i in range(len(self.script.distractors))]

    def _truth_of(self, ident: str, t: int):
        if ident == TARGET:
            center, area, aspect = interpolate(self.script.target, t)
            return center, area, aspect, not self.script.occluded(t)
        i = int(ident.split("-", 1)[1])
        center, area, aspect = interpolate(self.script.distractors[i].keyframes, t)
        return center, area, aspect, True

    def archetype(self, ident: str) -> np.ndarray:
        return self._archetypes[ident]

    # per-frame observation of one object (pure in (seed, t, ident)) -------

    def _observe(self, ident: str, t: int):
        key = (ident, t)
        if key in self._obs_cache:
            return self._obs_cache[key]
        sc = self.script
        nz = sc.noise
        rng = Xoshiro256.stream(sc.seed, t, "observe", ident)
        center, area, aspect, visible = self._truth_of(ident, t)
        jx, jy, ja, jr, jq, jo = rng.normals(6)
        pointer_noise = np.array(rng.normals(sc.pointer_dim))
        pointer = _unit(self._archetypes[ident] + nz.pointer_sigma * pointer_noise / math.sqrt(sc.pointer_dim))
        w, h = sc.frame_size
        cx = min(max(center[0] + nz.center_sigma * jx, 0.0), w - 1.0)
        cy = min(max(center[1] + nz.center_sigma * jy, 0.0), h - 1.0)
        obs = {
            "visible": visible,
            "center": (cx, cy),
            "area": max(area * (1.0 + AREA_JITTER * ja), 1.0),
            "aspect": max(aspect * (1.0 + ASPECT_JITTER * jr), 1e-3),
            # clipped at two sigma below the base so a clean view always reads as confident
            "iou": min(max(BASE_IOU + nz.iou_sigma * jq, BASE_IOU - 2 * nz.iou_sigma), 0.99),
            "objectness": min(max(BASE_OBJECTNESS + 0.02 * jo, 0.0), 1.0),
            "pointer": pointer,
            "true_center": center,
            "true_area": area,
        }
        self._obs_cache[key] = obs
        return obs

    def _candidate(self, ident: str, obs, iou: float, objectness: float, area_factor: float = 1.0) -> CandidateMask:
        geom = MaskGeometry(
            area=max(int(round(obs["area"] * area_factor)), 1),
            centroid=obs["center"],
            aspect_ratio=obs["aspect"],
            frame_size=self.frame_size,
        )
        return CandidateMask(geom, min(max(iou, 0.0), 1.0), min(max(objectness, 0.0), 1.0), ident)

    def _memory_factor(self, ident: str, obs, memory: MemoryDecision | None) -> float:
        if ident != TARGET or memory is None or not memory.noncond_selected:
            return 1.0
        frames = memory.noncond_selected
        support = sum(1 for f in frames if self.truth[f].visible) / len(frames)
        weight = SMALL_MEMORY_WEIGHT if obs["true_area"] < self._small_limit else LARGE_MEMORY_WEIGHT
        return 1.0 - weight * 0.5 * (1.0 - support)

    # predictor protocol ---------------------------------------------------

    def initial_context(self) -> SimContext:
        return SimContext("main", TARGET, 0)

    def predict(self, t: int, context: SimContext, memory: MemoryDecision | None = None) -> PredictorOutput:
        if not 0 <= t < self.length:
            raise PredictorError(f"frame {t} outside [0, {self.length})")
        sc = self.script
        followed = context.token
        obs = self._observe(followed, t)
        rng = Xoshiro256.stream(sc.seed, t, "query", followed)
        if obs["visible"]:
            factor = self._memory_factor(followed, obs, memory)
            primary = self._candidate(followed, obs, obs["iou"] * factor, obs["objectness"] * factor)
            pointer = obs["pointer"]
        else:
            if followed == TARGET and sc.occlusion_onset(t):
                q = min(max(ONSET_IOU + sc.noise.iou_sigma * rng.normal(), 0.01), 0.29)
                primary = self._candidate(followed, obs, q, ONSET_OBJECTNESS, ONSET_AREA_FACTOR)
                pointer = obs["pointer"]
            else:
                q = min(max(OCCLUDED_IOU + 0.5 * sc.noise.iou_sigma * rng.normal(), 0.01), 0.29)
                geom = MaskGeometry.absent(self.frame_size)
                primary = CandidateMask(geom, q, OCCLUDED_OBJECTNESS, None)
                pointer = _unit(np.array(rng.normals(sc.pointer_dim)))
        alternatives = []
        if primary.geometry.visible:
            side = math.sqrt(obs["true_area"])
            hold = min(max((t - context.prompt_frame) / PROMPT_HOLD, 0.0), 1.0)
            for other in self.identities():
                if other == followed:
                    continue
                o_obs = self._observe(other, t)
                if not o_obs["visible"]:
                    continue
                (x0, y0), (x1, y1) = obs["true_center"], o_obs["true_center"]
                d = math.hypot(x1 - x0, y1 - y0) / side
                if d >= NEAR_RADIUS:
                    continue
                if d < CROSS_RADIUS:
                    gap = rng.uniform(0.0, CROSS_MARGIN)
                    alt = self._candidate(other, o_obs, primary.predicted_iou - gap, o_obs["objectness"])
                    if d < SWAP_RADIUS and rng.random() < SWAP_PROBABILITY * hold:
                        alt, primary = replace(primary, predicted_iou=alt.predicted_iou), replace(
                            alt, predicted_iou=primary.predicted_iou
                        )
                        pointer = o_obs["pointer"]
                else:
                    gap = 0.15 + 0.05 * (d - CROSS_RADIUS)
                    alt = self._candidate(other, o_obs, primary.predicted_iou - gap, o_obs["objectness"])
                alternatives.append(alt)
        alternatives.sort(key=lambda c: c.predicted_iou, reverse=True)
        return PredictorOutput(primary, tuple(alternatives), ObjectPointer(pointer), t)

    def prompt(self, t: int, candidate: CandidateMask, context_id: str, memory: MemoryDecision | None = None):
        if candidate.token is None or not candidate.geometry.visible:
            raise PredictorError(f"frame {t}: cannot prompt with an empty mask")
        ctx = SimContext(context_id, candidate.token, t)
        return ctx, self.predict(t, ctx, memory)

    def advance(self, context: SimContext, t: int, candidate: CandidateMask) -> SimContext:
        if candidate.token is None or not candidate.geometry.visible:
            return context
        return replace(context, token=candidate.token)


# --------------------------------------------------------------------------
# file format


def script_to_dict(s: ScenarioScript) -> dict:
    def kf(k: Keyframe):
        return {"frame": k.frame, "center": list(k.center), "area": k.area, "aspect": k.aspect}

    return {
        "kind": s.kind,
        "seed": s.seed,
        "length": s.length,
        "frame_size": list(s.frame_size),
        "pointer_dim": s.pointer_dim,
        "target": [kf(k) for k in s.target],
        "occlusions": [list(iv) for iv in s.occlusions],
        "distractors": [{"similarity": d.similarity, "keyframes": [kf(k) for k in d.keyframes]} for d in s.distractors],
        "noise": {"center_sigma": s.noise.center_sigma, "iou_sigma": s.noise.iou_sigma, "pointer_sigma": s.noise.pointer_sigma},
    }


def _field(data: dict, name: str, where: str):
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    if name not in data:
        raise ScenarioError(f"{where}: missing field '{name}'")
    return data[name]


def _keyframes(items, where: str) -> tuple[Keyframe, ...]:
    if not isinstance(items, list):
        raise ScenarioError(f"{where}: expected a list of keyframes")
    out = []
    for i, item in enumerate(items):
        loc = f"{where}[{i}]"
        try:
            center = _field(item, "center", loc)
            out.append(Keyframe(int(_field(item, "frame", loc)), (float(center[0]), float(center[1])),
                                float(_field(item, "area", loc)), float(_field(item, "aspect", loc))))
        except (TypeError, IndexError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"{loc}: malformed keyframe: {exc}") from exc
    return tuple(out)


def script_from_dict(data: dict) -> ScenarioScript:
    where = "scenario"
    try:
        noise_data = data.get("noise", {}) if isinstance(data, dict) else {}
        script = ScenarioScript(
            kind=str(_field(data, "kind", where)),
            seed=int(_field(data, "seed", where)),
            length=int(_field(data, "length", where)),
            frame_size=tuple(int(v) for v in _field(data, "frame_size", where)),
            pointer_dim=int(_field(data, "pointer_dim", where)),
            target=_keyframes(_field(data, "target", where), "target"),
            occlusions=tuple((int(a), int(b)) for a, b in data.get("occlusions", []) or []),
            distractors=tuple(
                Distractor(_keyframes(_field(d, "keyframes", f"distractors[{i}]"), f"distractors[{i}].keyframes"),
                           float(_field(d, "similarity", f"distractors[{i}]")))
                for i, d in enumerate(data.get("distractors", []) or [])
            ),
            noise=Noise(**{k: float(v) for k, v in noise_data.items()}),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    return script


def save_script(script: ScenarioScript, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(script_to_dict(script), sort_keys=False, default_flow_style=None))


def load_script(path: str | Path) -> ScenarioScript:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ScenarioError(f"{path}: malformed scenario file{loc}: {getattr(exc, 'problem', exc)}") from exc
    try:
        return script_from_dict(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
