"""Command-line interface.

    occtrack scenario gen --kind K --seed N --out FILE
    occtrack scenario suite --dir DIR --seeds N
    occtrack track run --scenario FILE [--config FILE] --trace OUT.jsonl --metrics OUT.json
    occtrack track batch --dir DIR [--config FILE] --report OUT.json
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .predictor import PredictorError
from .runner import ground_truth, run_batch, run_sequence
from .sim import KINDS, ScenarioError, generate, load_script, save_script
from .tracker import Ablation

log = logging.getLogger("occtrack")


def _add_ablation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-branching", action="store_true", help="commit the single-path prediction every frame")
    p.add_argument("--no-bypass", action="store_true", help="never bypass native memory selection")
    p.add_argument("--no-delayed-drm", action="store_true", help="promote DRM candidates immediately")
    p.add_argument("--no-keep-first", action="store_true", help="do not reserve frame 0 in the conditioning set")


def _ablation(args) -> Ablation:
    return Ablation(
        branching=not args.no_branching,
        bypass=not args.no_bypass,
        delayed_drm=not args.no_delayed_drm,
        keep_first=not args.no_keep_first,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occtrack", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    groups = parser.add_subparsers(dest="group", required=True)

    scen = groups.add_parser("scenario", help="generate scenario files").add_subparsers(dest="command", required=True)
    gen = scen.add_parser("gen", help="write one generated scenario")
    gen.add_argument("--kind", required=True, choices=KINDS)
    gen.add_argument("--seed", required=True, type=int)
    gen.add_argument("--out", required=True, type=Path)
    gen.add_argument("--config", type=Path, help="config whose thresholds shape the scenario (l_miss, small area)")
    suite = scen.add_parser("suite", help="write every kind for seeds 0..N-1 into a directory")
    suite.add_argument("--dir", required=True, type=Path)
    suite.add_argument("--seeds", type=int, default=1)
    suite.add_argument("--config", type=Path)

    track = groups.add_parser("track", help="run the tracker").add_subparsers(dest="command", required=True)
    run = track.add_parser("run", help="track one scenario")
    run.add_argument("--scenario", required=True, type=Path)
    run.add_argument("--config", type=Path)
    run.add_argument("--trace", required=True, type=Path)
    run.add_argument("--metrics", required=True, type=Path)
    run.add_argument("--figures", type=Path, help="directory for a timeline PNG")
    _add_ablation_flags(run)
    batch = track.add_parser("batch", help="track every scenario file in a directory")
    batch.add_argument("--dir", required=True, type=Path)
    batch.add_argument("--config", type=Path)
    batch.add_argument("--report", required=True, type=Path)
    batch.add_argument("--trace-dir", type=Path, help="per-sequence traces (default: <report dir>/traces)")
    batch.add_argument("--workers", type=int, default=1)
    batch.add_argument("--figures", type=Path, help="directory for summary and per-sequence PNGs")
    _add_ablation_flags(batch)
    return parser


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n")


def cmd_scenario_gen(args) -> None:
    cfg = load_config(args.config)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_script(generate(args.kind, args.seed, cfg), args.out)


def cmd_scenario_suite(args) -> None:
    cfg = load_config(args.config)
    args.dir.mkdir(parents=True, exist_ok=True)
    for kind in KINDS:
        for seed in range(args.seeds):
            save_script(generate(kind, seed, cfg), args.dir / f"{kind}-{seed:03d}.yaml")


def cmd_track_run(args) -> None:
    cfg = load_config(args.config)
    script = load_script(args.scenario)
    args.trace.parent.mkdir(parents=True, exist_ok=True)
    metrics, trace = run_sequence(script, cfg, _ablation(args), args.trace)
    _write_json(args.metrics, {"scenario": str(args.scenario), "kind": script.kind, "seed": script.seed,
                               "ablation": _ablation(args).flags, **metrics.to_dict()})
    if args.figures:
        from .plots import plot_run

        plot_run(trace, args.figures / f"{args.scenario.stem}.png", title=args.scenario.stem,
                 truth=ground_truth(script))


def cmd_track_batch(args) -> None:
    cfg = load_config(args.config)
    trace_dir = args.trace_dir or args.report.parent / "traces"
    report = run_batch(args.dir, cfg, _ablation(args), trace_dir, workers=args.workers)
    _write_json(args.report, report)
    if args.figures:
        from .plots import plot_batch, plot_run
        from .runner import read_trace

        plot_batch(report, args.figures / "summary.png")
        for name in report["sequences"]:
            script = load_script(args.dir / f"{name}.yaml")
            plot_run(read_trace(Path(trace_dir) / f"{name}.jsonl"), args.figures / f"{name}.png", title=name,
                     truth=ground_truth(script))


COMMANDS = {
    ("scenario", "gen"): cmd_scenario_gen,
    ("scenario", "suite"): cmd_scenario_suite,
    ("track", "run"): cmd_track_run,
    ("track", "batch"): cmd_track_batch,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[(args.group, args.command)](args)
    except (ConfigError, ScenarioError, PredictorError, OSError) as exc:
        print(f"occtrack: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
