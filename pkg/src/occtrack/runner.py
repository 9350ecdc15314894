"""Sequence runner, JSON-Lines traces and run metrics."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .config import Config
from .sim import TARGET, ScenarioScript, SimPredictor, TruthFrame, ground_truth, load_script
from .tracker import Ablation, Tracker


@dataclass
class RunMetrics:
    identity_accuracy: float
    mean_frames_to_recover: float | None
    frames_to_recover: list[int]
    unrecovered: int
    false_commit_count: int
    centroid_rmse: float | None
    mode_counts: dict[str, int] = field(default_factory=dict)
    commit_paths: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(trace: list[dict], truth: list[TruthFrame]) -> RunMetrics:
    """Score a trace against ground truth.

    Frames-to-recover runs from the end of each occlusion to the first
    committed frame showing the target; an occlusion never recovered counts
    the remaining sequence length.
    """
    if len(trace) != len(truth):
        raise ValueError(f"trace covers {len(trace)} frames but ground truth has {len(truth)}")
    visible = correct = false_commits = 0
    sq_err: list[float] = []
    modes = {"stable": 0, "ambiguous": 0, "recovery": 0}
    paths: dict[str, int] = {}
    for ev, gt in zip(trace, truth):
        modes[ev["mode"]] += 1
        out = ev["output"]
        token = out["token"] if out else None
        if ev["committed"] and out and token != TARGET:
            false_commits += 1
        commit = ev["commit"]
        if commit and commit.get("kind") == "reconfirm":
            paths[commit["path"]] = paths.get(commit["path"], 0) + 1
        if not gt.visible:
            continue
        visible += 1
        if token == TARGET:
            correct += 1
            cx, cy = out["centroid"]
            sq_err.append((cx - gt.center[0]) ** 2 + (cy - gt.center[1]) ** 2)

    recover: list[int] = []
    unrecovered = 0
    n = len(truth)
    for end in _occlusion_ends(truth):
        for f in range(end, n):
            out = trace[f]["output"]
            if trace[f]["committed"] and out and out["token"] == TARGET:
                recover.append(f - end)
                break
        else:
            unrecovered += 1
            recover.append(n - end)
    return RunMetrics(
        identity_accuracy=correct / visible if visible else 1.0,
        mean_frames_to_recover=sum(recover) / len(recover) if recover else None,
        frames_to_recover=recover,
        unrecovered=unrecovered,
        false_commit_count=false_commits,
        centroid_rmse=math.sqrt(sum(sq_err) / len(sq_err)) if sq_err else None,
        mode_counts=modes,
        commit_paths=paths,
    )


def _occlusion_ends(truth: list[TruthFrame]) -> list[int]:
    """First visible frame after each run of invisible frames."""
    ends = []
    for t in range(1, len(truth)):
        if truth[t].visible and not truth[t - 1].visible:
            ends.append(t)
    return ends


def trace_line(event: dict) -> str:
    return json.dumps(event, allow_nan=False)


def run_sequence(
    script: ScenarioScript,
    cfg: Config | None = None,
    ablation: Ablation | None = None,
    trace_path: str | Path | None = None,
) -> tuple[RunMetrics, list[dict]]:
    predictor = SimPredictor(script)
    tracker = Tracker(predictor, cfg, ablation)
    trace = list(tracker.run())
    if trace_path is not None:
        trace_path = Path(trace_path)
        try:
            with trace_path.open("w") as fh:
                for event in trace:
                    fh.write(trace_line(event) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write trace {trace_path}: {exc}") from exc
    return compute_metrics(trace, ground_truth(script)), trace


def read_trace(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


# --------------------------------------------------------------------------
# batch


def _batch_job(args):
    scenario_path, cfg, ablation, trace_path = args
    script = load_script(scenario_path)
    metrics, _ = run_sequence(script, cfg, ablation, trace_path)
    return Path(scenario_path).stem, script.kind, metrics.to_dict()


def run_batch(
    scenario_dir: str | Path,
    cfg: Config | None = None,
    ablation: Ablation | None = None,
    trace_dir: str | Path | None = None,
    workers: int = 1,
) -> dict:
    scenario_dir = Path(scenario_dir)
    files = sorted(p for p in scenario_dir.iterdir() if p.suffix in (".yaml", ".yml"))
    if not files:
        raise FileNotFoundError(f"no scenario files (*.yaml) in {scenario_dir}")
    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
    jobs = [
        (str(f), cfg or Config(), ablation or Ablation(),
         str(Path(trace_dir) / f"{f.stem}.jsonl") if trace_dir is not None else None)
        for f in files
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_batch_job, jobs))
    else:
        results = [_batch_job(j) for j in jobs]
    return batch_report(results, ablation or Ablation())


def batch_report(results, ablation: Ablation) -> dict:
    sequences = {name: {"kind": kind, **m} for name, kind, m in results}
    by_kind: dict[str, dict] = {}
    for name, kind, m in results:
        agg = by_kind.setdefault(kind, {"sequences": 0, "identity_accuracy": 0.0, "false_commit_count": 0,
                                        "frames_to_recover_total": 0, "unrecovered": 0})
        agg["sequences"] += 1
        agg["identity_accuracy"] += m["identity_accuracy"]
        agg["false_commit_count"] += m["false_commit_count"]
        agg["frames_to_recover_total"] += sum(m["frames_to_recover"])
        agg["unrecovered"] += m["unrecovered"]
    for agg in by_kind.values():
        agg["identity_accuracy"] /= agg["sequences"]
    return {"ablation": ablation.flags, "sequences": sequences, "by_kind": dict(sorted(by_kind.items()))}
