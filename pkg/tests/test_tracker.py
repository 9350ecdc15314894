import json

import pytest

from oracles import pool_errors
from occtrack import Ablation, Config, Tracker, compute_metrics, generate, run_sequence
from occtrack.predictor import PredictorError
from occtrack.runner import read_trace
from occtrack.sim import TARGET, SimPredictor, TruthFrame

CFG = Config()


def test_steady_is_stable_throughout(suite_runs):
    for seed in range(5):
        _, metrics, trace = suite_runs[("steady", seed)]
        assert all(ev["mode"] == "stable" and ev["branches"] == [] for ev in trace)
        assert not any(e["kind"] == "spawn" for ev in trace for e in ev["events"])
        assert metrics.identity_accuracy == 1.0 and metrics.false_commit_count == 0


def test_one_event_per_frame(tmp_path):
    script = generate("distractor", 2)
    _, trace = run_sequence(script, trace_path=tmp_path / "t.jsonl")
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert len(lines) == script.length
    assert [json.loads(x)["t"] for x in lines] == list(range(script.length))
    assert read_trace(tmp_path / "t.jsonl") == trace


def test_every_field_present(suite_runs):
    keys = ["t", "mode", "classified_mode", "scores", "committed", "commit", "output", "miss_streak", "small",
            "gamma", "use_memory_selection", "memory", "anchors", "branches", "events"]
    for _, _, trace in suite_runs.values():
        for ev in trace:
            assert list(ev) == keys
            assert set(ev["memory"]) == {"drm_candidate", "drm_promoted", "drm_gap", "promotion_streak",
                                         "distractor", "reappear", "drm_frames", "conditioning_set",
                                         "noncond_selected"}


def test_occlusion_walkthrough(suite_runs):
    for seed in range(5):
        script, _, trace = suite_runs[("occlusion", seed)]
        start, end = script.occlusions[0]
        assert trace[start]["mode"] == "recovery"
        spawned = [e for e in trace[start]["events"] if e["kind"] == "spawn"]
        assert spawned and "absent" in spawned[0]["roots"]
        for ev in trace[start + 1:end]:
            # nothing visible is reported or written back while the target is hidden
            assert ev["output"] is None and not ev["committed"]


def test_reappearance_walkthrough(suite_runs):
    for seed in range(5):
        script, metrics, trace = suite_runs[("reappear-small", seed)]
        end = script.occlusions[0][1]
        commits = [ev for ev in trace[end:] if ev["commit"] and ev["commit"]["kind"] == "reconfirm"]
        first = commits[0]
        assert first["commit"]["path"] == "relaxed" and first["t"] - end <= 5
        assert first["memory"]["reappear"] and first["output"]["token"] == TARGET
        assert metrics.unrecovered == 0


def test_mode_pool_coupling_and_memory_isolation(suite_runs):
    for (kind, seed), (_, _, trace) in suite_runs.items():
        assert not pool_errors(trace, CFG.branch_keep)
        for ev in trace:
            assert (ev["mode"] == "stable") == (ev["branches"] == []), (kind, seed, ev["t"])
            if ev["memory"]["drm_promoted"] or ev["anchors"] is not None:
                assert ev["mode"] == "stable" and ev["committed"]
            if ev["anchors"] is not None and ev["t"] > 0:
                # reconfirmation commits never admit anchors
                assert ev["commit"]["kind"] == "stable"


def test_win_streaks_in_trace(suite_runs):
    for _, _, trace in suite_runs.values():
        prev = {}
        for ev in trace:
            wins = [e for e in ev["events"] if e["kind"] == "win"]
            if not wins:
                prev = {}
                continue
            w = wins[0]
            key = (w["root_id"], w["born"])
            assert w["win_streak"] == prev.get(key, 0) + 1
            prev = {key: w["win_streak"]}
            for b in ev["branches"]:
                if (b["root_id"], b["born"]) != key:
                    assert b["win_streak"] == 0


def test_no_branching_commits_directly():
    _, trace = run_sequence(generate("distractor", 3), ablation=Ablation(branching=False))
    assert all(ev["branches"] == [] for ev in trace)
    kinds = {ev["commit"]["kind"] for ev in trace if ev["commit"]}
    assert "reconfirm" not in kinds and "direct" in kinds


def test_no_keep_first_and_no_bypass_flags():
    script = generate("reappear-small", 1)
    _, trace = run_sequence(script, ablation=Ablation(bypass=False, keep_first=False))
    assert all(ev["gamma"] == 0 and ev["use_memory_selection"] == 1 for ev in trace)


def test_recovery_cap_resets_pool():
    _, trace = run_sequence(generate("reappear-small", 0), CFG.replace(recovery_cap=4))
    resets = [e for ev in trace for e in ev["events"] if e["kind"] == "reset"]
    assert resets and all(len(e["dropped"]) <= 3 for e in resets)


def test_frames_must_increase():
    tracker = Tracker(SimPredictor(generate("steady", 0)))
    tracker.initialize()
    tracker.process_frame(1)
    with pytest.raises(ValueError):
        tracker.process_frame(1)


def test_predictor_failure_aborts():
    class Broken(SimPredictor):
        def predict(self, t, context, memory=None):
            if t == 5:
                raise PredictorError("backbone crashed at frame 5")
            return super().predict(t, context, memory)

    with pytest.raises(PredictorError, match="frame 5"):
        list(Tracker(Broken(generate("steady", 0))).run())


# ------------------------------------------------------------------ metrics


def truth(n, hidden=()):
    return [TruthFrame(t not in hidden, (float(t), 0.0), 100.0, 1.0, "target" if t not in hidden else "none")
            for t in range(n)]


def frame(t, token="target", committed=True, center=None):
    out = None if token is None else {"area": 100, "centroid": list(center or (float(t), 0.0)), "token": token}
    return {"t": t, "mode": "stable" if committed else "recovery", "committed": committed, "output": out,
            "commit": None}


class TestMetrics:
    def test_perfect(self):
        m = compute_metrics([frame(t) for t in range(10)], truth(10))
        assert m.identity_accuracy == 1.0 and m.centroid_rmse == 0.0 and m.false_commit_count == 0

    def test_one_distractor_commit(self):
        trace = [frame(t, "distractor-0" if t == 50 else "target") for t in range(100)]
        m = compute_metrics(trace, truth(100))
        assert m.identity_accuracy == pytest.approx(0.99) and m.false_commit_count == 1

    def test_recovery_delay(self):
        hidden = set(range(10, 20))
        trace = [frame(t, None, False) if t < 23 and t >= 10 else frame(t) for t in range(40)]
        m = compute_metrics(trace, truth(40, hidden))
        assert m.frames_to_recover == [3] and m.mean_frames_to_recover == 3

    def test_unrecovered_counts_remaining(self):
        trace = [frame(t) if t < 10 else frame(t, None, False) for t in range(30)]
        m = compute_metrics(trace, truth(30, set(range(10, 20))))
        assert m.unrecovered == 1 and m.frames_to_recover == [10]

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="9 frames"):
            compute_metrics([frame(t) for t in range(9)], truth(10))


def test_gap_argmax_is_the_empty_primary_branch(suite_runs):
    # With q(absent) fixed at eps, the absent root scores about
    # log(1e-4) + 0.5 log(1 - o) - 1 per frame, far below a primary-rooted
    # branch whose empty mask still carries q around 0.1. The reported output
    # is absent either way.
    for kind in ("occlusion", "reappear-small"):
        for seed in range(5):
            script, _, trace = suite_runs[(kind, seed)]
            start, end = script.occlusions[0]
            for ev in trace[start + 1:end]:
                scores = {b["root_id"]: b["score"] for b in ev["branches"]}
                assert scores["primary"] > scores["absent"]
                assert ev["output"] is None
