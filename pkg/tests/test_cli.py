import csv
import json
from pathlib import Path

import numpy as np
import pytest

from diffplan.cli import UserError, ema, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SEARCH = ["builtin:search_decls", "builtin:search_rules", "builtin:task_deep"]

LOOP_MANIFEST = """
[train]
slots = 4
lr = 0.1
steps = {steps}
seeds = {seeds}

[task:loop]
program = loop.pl
goal = reach_goal
T = 3
"""


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_parse_summary_and_print(capsys, tmp_path):
    code, out, _ = _run(capsys, "parse", "builtin:door_loop")
    assert code == 0
    assert "clauses=4" in out and "state_predicates=2 action_predicates=3" in out
    code, out, _ = _run(capsys, "parse", "--print", "builtin:doorkey")
    path = tmp_path / "echo.pl"
    path.write_text(out.split("predicates=")[0])
    code2, out2, _ = _run(capsys, "parse", "--print", path)
    assert code == code2 == 0 and out2 == out


def test_parse_errors_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.pl"
    bad.write_text("pred p/0\np :- p,, p.\n")
    code, _, err = _run(capsys, "parse", bad)
    assert code == 1 and "line 2" in err
    code, _, err = _run(capsys, "parse", tmp_path / "missing.pl")
    assert code == 1 and "error" in err
    assert _run(capsys, "parse", "builtin:nothing")[0] == 1


def test_ground_writes_table(capsys, tmp_path):
    code, out, _ = _run(capsys, "ground", "builtin:doorkey", "--out", tmp_path / "atoms.csv")
    rows = _rows(tmp_path / "atoms.csv")
    assert code == 0 and "G=10" in out
    assert rows[0] == ["index", "atom"] and rows[1] == ["0", "_false"] and len(rows) == 11
    assert _run(capsys, "ground", "builtin:doorkey", "--cap", 3)[0] == 1


def test_infer_search_task(capsys):
    code, out, _ = _run(capsys, "infer", *SEARCH, "--facts", CONFIGS / "deep_start.pl",
                        "--weights", CONFIGS / "weights_dfs.csv", "-T", 3, "--query", "plan(a,h)")
    assert code == 0 and float(out) >= 0.99


def test_infer_reserved_and_missing(capsys, tmp_path):
    code, out, _ = _run(capsys, "infer", "builtin:doorkey", "--query", "true")
    assert code == 0 and float(out) == 1.0
    code, _, err = _run(capsys, "infer", "builtin:doorkey", "--facts", tmp_path / "none.pl", "--query", "true")
    assert code == 1 and "error" in err
    code, _, _ = _run(capsys, "infer", "builtin:doorkey", "--query", "nonsense(")
    assert code == 1


def test_infer_doorkey_facts(capsys, tmp_path):
    facts = tmp_path / "facts.pl"
    facts.write_text("initial. go_red_key. go_open_red_door. go_to_goal.\n")
    code, out, _ = _run(capsys, "infer", "builtin:doorkey", "--facts", facts, "-T", 3, "--query", "reach_goal")
    assert code == 0 and float(out) >= 0.99
    code, out, _ = _run(capsys, "infer", "builtin:doorkey", "--facts", facts, "-T", 1, "--query", "reach_goal")
    assert float(out) <= 0.01


def _loop_manifest(tmp_path, steps, seeds):
    (tmp_path / "loop.pl").write_text(
        (Path(__file__).resolve().parents[1] / "src/diffplan/programs/door_loop.pl").read_text()
        + "\ninitial. go_through_red_door. go_through_blue_door. go_to_goal.\n")
    manifest = tmp_path / "tasks.ini"
    manifest.write_text(LOOP_MANIFEST.format(steps=steps, seeds=seeds))
    return manifest


def test_learn_planner_outputs(capsys, tmp_path):
    manifest = _loop_manifest(tmp_path, 200, "0 1 2")
    code, out, _ = _run(capsys, "learn-planner", manifest, "--out", tmp_path / "run")
    assert code == 0
    for seed in range(3):
        rows = _rows(tmp_path / "run" / f"loss_seed{seed}.csv")
        assert rows[0] == ["step", "task_id", "loss"] and len(rows) == 201
        losses = [float(r[2]) for r in rows[1:]]
        assert losses[-1] < losses[0]
        assert len(_rows(tmp_path / "run" / f"weights_seed{seed}.csv")) == 5
    meta = json.loads((tmp_path / "run" / "learn-planner.manifest.json").read_text())
    assert meta["rng"] == "numpy.random.PCG64" and meta["config"]["steps"] == 200


def test_learn_planner_zero_steps(capsys, tmp_path):
    manifest = _loop_manifest(tmp_path, 0, "4")
    code, _, _ = _run(capsys, "learn-planner", manifest, "--out", tmp_path / "run")
    assert code == 0 and _rows(tmp_path / "run" / "loss_seed4.csv") == [["step", "task_id", "loss"]]


def test_learn_planner_rejects_bad_manifest(capsys, tmp_path):
    manifest = tmp_path / "bad.ini"
    manifest.write_text("[train]\nslotz = 3\n[task:x]\nbuiltin = deep\n")
    code, _, err = _run(capsys, "learn-planner", manifest, "--out", tmp_path)
    assert code == 1 and "slotz" in err
    manifest.write_text("[train]\nsteps = 1\n")
    assert _run(capsys, "learn-planner", manifest, "--out", tmp_path)[0] == 1


def test_plan_listing(capsys):
    code, out, _ = _run(capsys, "plan", "builtin:doorkey", "--init", "initial", "--goal", "reach_goal",
                        "--distances", "go_blue_door=2,go_red_key=5,go_open_red_door=inf,go_to_goal=inf")
    assert code == 0
    plans = out.split("% best")[0]
    assert plans.count("probability=") == 2
    assert out.split("% best")[1].split()[0] == "move(go_blue_door,"
    assert "move(go_blue_door, initial, go_through_door)" in out
    code, _, _ = _run(capsys, "plan", "builtin:doorkey", "--init", "initial", "--goal", "reach_goal",
                      "--distances", "go_blue_door")
    assert code == 1


def _smoke_config(tmp_path, extra=""):
    path = tmp_path / "exp.ini"
    path.write_text("[env]\nsize = 8\n[run]\nalgo = ppo\nreward_model = static\nseeds = 0 1\n"
                    f"output = {tmp_path / 'out'}\n[trainer]\ntotal_frames = 2048\n{extra}")
    return path


def test_train_outputs_and_determinism(capsys, tmp_path):
    cfg = _smoke_config(tmp_path)
    assert _run(capsys, "train", cfg)[0] == 0
    first = {p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()}
    for seed in (0, 1):
        curve = _rows(tmp_path / "out" / f"curve_seed{seed}.csv")
        assert curve[0] == ["frames", "update", "return_mean", "return_min", "return_max",
                            "policy_loss", "value_loss", "entropy"]
        frames = [int(r[0]) for r in curve[1:]]
        assert frames == sorted(frames) and frames[-1] == 2048
    rewards = _rows(tmp_path / "out" / "rewards_seed0.csv")
    assert any(float(r[3]) > 0 for r in rewards[1:])
    assert (tmp_path / "out" / "train.manifest.json").is_file()
    assert _run(capsys, "train", cfg)[0] == 0
    second = {p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()}
    assert first == second


def test_train_rejects_unknown_key(capsys, tmp_path):
    code, _, err = _run(capsys, "train", _smoke_config(tmp_path, "learning_rate = 3\n"))
    assert code == 1 and "learning_rate" in err
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nalgo = dqn\n")
    code, _, err = _run(capsys, "train", bad)
    assert code == 1 and "algo" in err


def test_eval_planner_all_variants(capsys):
    code, out, _ = _run(capsys, "eval", "--planner", "--variant", "all", "--episodes", 10)
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 4
    assert all("success=100" in line for line in lines)


def test_eval_single_episode_and_errors(capsys, tmp_path):
    code, out, _ = _run(capsys, "eval", "--planner", "--variant", "key_retrieval", "--episodes", 1)
    assert code == 0 and out.split("success=")[1].split()[0] in ("0", "100")
    assert _run(capsys, "eval", "--checkpoint", tmp_path / "none.csv")[0] == 1
    assert _run(capsys, "eval")[0] == 1


def test_ema_recursion():
    x = [0.0, 0.0, 1.0, 1.0, 1.0]
    np.testing.assert_allclose(ema(x, 1.0), x)
    np.testing.assert_allclose(ema([0.3] * 4, 0.1), [0.3] * 4)
    np.testing.assert_allclose(ema(x, 0.5), [0.0, 0.0, 0.5, 0.75, 0.875])
    with pytest.raises(UserError):
        ema(x, 0.0)


def test_plot_data(capsys, tmp_path):
    header = "frames,update,return_mean,return_min,return_max,policy_loss,value_loss,entropy\n"
    for i, values in enumerate(([0.0, 1.0, 1.0], [0.0, 0.0, 1.0])):
        (tmp_path / f"c{i}.csv").write_text(header + "".join(
            f"{512 * (k + 1)},{k + 1},{v},0,1,0,0,0\n" for k, v in enumerate(values)))
    out = tmp_path / "plot.csv"
    code, _, _ = _run(capsys, "plot-data", f"ppo={tmp_path / 'c0.csv'},{tmp_path / 'c1.csv'}",
                      "--ema-alpha", 0.5, "--out", out)
    rows = _rows(out)
    assert code == 0 and rows[0] == ["method", "frames", "mean", "min", "max"]
    assert rows[1:] == [["ppo", "512", "0", "0", "0"], ["ppo", "1024", "0.25", "0", "0.5"],
                        ["ppo", "1536", "0.625", "0.5", "0.75"]]
    assert _run(capsys, "plot-data", f"ppo={tmp_path / 'zzz.csv'}", "--out", out)[0] == 1
