from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffplan.doorkey import (ACTIONS, EMPTY, FORWARD, GOAL, KEY, OBS_DIM, PICKUP, PRIMITIVES, TOGGLE, TRAP, WALL,
                              DoorKeyEnv, EnvConfig, reset, route_exists, run_primitive, write_trace)
from diffplan.state import UNREACHABLE


def _bfs(env, src, dst, passable):
    """Independent 4-neighbour grid BFS; the target cell may be impassable."""
    seen = {src: 0}
    queue = deque([src])
    while queue:
        x, y = queue.popleft()
        if (x, y) == dst:
            return seen[(x, y)]
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (x + dx, y + dy)
            if n not in seen and (n == dst or passable(n)):
                seen[n] = seen[(x, y)] + 1
                queue.append(n)
    return UNREACHABLE


def test_config_validation():
    assert EnvConfig(8).max_steps == 640
    with pytest.raises(ValueError):
        EnvConfig(5)
    with pytest.raises(ValueError):
        EnvConfig(8, "fly")
    with pytest.raises(ValueError):
        EnvConfig(8, max_steps=0)


@pytest.mark.parametrize("size", [8, 12, 16])
@pytest.mark.parametrize("seed", range(10))
def test_both_routes_exist(size, seed):
    env, obs, sym = reset(EnvConfig(size), seed)
    assert route_exists(env, "blue") and route_exists(env, "red")
    assert sym.progress == "initial"
    assert (env.kind == KEY).sum() == 1 and (env.kind[:, env.layout.wall_x] != WALL).sum() == 2


def test_reset_is_deterministic():
    a, _, _ = reset(EnvConfig(8), 3)
    b, _, _ = reset(EnvConfig(8), 3)
    assert a.render_ascii() == b.render_ascii()
    c, _, _ = reset(EnvConfig(8), 4)
    assert a.render_ascii() != c.render_ascii()


@pytest.mark.parametrize("seed", range(5))
def test_safe_variant_has_one_trap_behind_blue_door(seed):
    env, _, _ = reset(EnvConfig(8, "safe_goal_reaching"), seed)
    traps = np.argwhere(env.kind == TRAP)
    bx, by = env.layout.blue_door
    assert traps.tolist() == [[by, bx + 1]]


def test_ascii_layout_symbols():
    env, _, _ = reset(EnvConfig(8, "safe_goal_reaching"), 0)
    text = env.render_ascii()
    rows = text.splitlines()
    assert len(rows) == 8 and all(len(r) == 8 for r in rows)
    for ch in "#KRBGT":
        assert text.count(ch) >= 1
    assert sum(text.count(c) for c in "><^v") == 1


def _face(env, heading):
    env.heading = heading


def test_forward_into_wall():
    env, _, _ = reset(EnvConfig(8), 0)
    env.pos = (1, 1)
    _face(env, 2)
    _, reward, done, _ = env.step(FORWARD)
    assert env.pos == (1, 1) and reward == 0.0 and not done


def test_toggle_locked_door_needs_key():
    env, _, _ = reset(EnvConfig(8), 0)
    rx, ry = env.layout.red_door
    env.pos = (rx - 1, ry)
    _face(env, 0)
    env.step(TOGGLE)
    assert env.doors["red"] == "locked"
    env.carrying = True
    env.step(TOGGLE)
    assert env.doors["red"] == "open"
    env.step(FORWARD)
    assert env.pos == (rx, ry)


def test_terminal_reward_formula():
    env, _, _ = reset(EnvConfig(8), 0)
    gx, gy = env.layout.goal
    env.pos = (gx - 1, gy) if env.kind[gy, gx - 1] == EMPTY else (gx + 1, gy)
    _face(env, 0 if env.pos[0] < gx else 2)
    env.step_count = 39
    _, reward, done, sym = env.step(FORWARD)
    assert reward == pytest.approx(0.94375) and done and env.success
    assert sym.progress == "reach_goal"
    with pytest.raises(RuntimeError):
        env.step(FORWARD)


def test_trap_ends_episode_without_reward():
    env, _, _ = reset(EnvConfig(8, "safe_goal_reaching"), 0)
    bx, by = env.layout.blue_door
    env.pos = (bx, by)
    _face(env, 0)
    _, reward, done, _ = env.step(FORWARD)
    assert done and reward == 0.0 and not env.success


def test_episode_times_out():
    env, _, _ = reset(EnvConfig(8, max_steps=3), 0)
    for _ in range(3):
        _, reward, done, _ = env.step(0)
    assert done and reward == 0.0


def test_invalid_action():
    env, _, _ = reset(EnvConfig(8), 0)
    with pytest.raises(ValueError):
        env.step(len(ACTIONS))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 50), st.lists(st.integers(0, 4), max_size=150),
       st.sampled_from(["reach_goal", "safe_goal_reaching"]))
def test_dynamics_invariants(seed, actions, variant):
    cfg = EnvConfig(8, variant)
    env, obs, _ = reset(cfg, seed)
    twin, _, _ = reset(cfg, seed)
    for a in actions:
        if env.done:
            break
        obs, reward, done, sym = env.step(a)
        obs2, reward2, _, _ = twin.step(a)
        np.testing.assert_array_equal(obs, obs2)
        assert reward == reward2
        assert env.kind[env.pos[1], env.pos[0]] != WALL
        assert ((env.kind == KEY).sum() == 1) != env.carrying
        assert obs.shape == (OBS_DIM,) and np.all(np.abs(obs) <= 1.0)
        if reward != 0.0:
            assert done and env.success
        assert env.step_count <= cfg.max_steps


def test_progress_atoms():
    env, _, sym = reset(EnvConfig(8), 0)
    assert sym.progress == "initial"
    steps, ok = run_primitive(env, "go_red_key")
    assert ok and env.symbolic_state().progress == "get_red_key"
    env.pos = (env.layout.wall_x + 1, 1)
    assert env.symbolic_state().progress == "go_through_door"


def test_distance_adjacent_key():
    env, _, _ = reset(EnvConfig(8), 0)
    kx, ky = env.layout.key
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        if env.kind[ky + dy, kx + dx] == EMPTY:
            env.pos = (kx + dx, ky + dy)
            break
    env._dist_cache = {}
    assert env.distance_to("go_red_key") == 1


def test_distance_walled_off_target():
    env, _, _ = reset(EnvConfig(8), 0)
    gx, gy = env.layout.goal
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        if env.kind[gy + dy, gx + dx] == EMPTY:
            env.kind[gy + dy, gx + dx] = WALL
    env._dist_cache = {}
    assert env.distance_to("go_to_goal") == UNREACHABLE
    with pytest.raises(KeyError):
        env.distance_to("fly")


@pytest.mark.parametrize("seed", range(8))
def test_distance_to_key_across_blue_door(seed):
    env, _, _ = reset(EnvConfig(8), seed)
    env.pos = (env.layout.wall_x + 1, env.layout.blue_door[1] - 1)
    if env.kind[env.pos[1], env.pos[0]] != EMPTY:
        env.pos = (env.layout.wall_x + 2, env.layout.blue_door[1])
    env._dist_cache = {}
    want = _bfs(env, env.pos, env.layout.key, lambda c: env.kind[c[1], c[0]] in (EMPTY, GOAL)
                or c == env.layout.blue_door)
    assert env.distance_to("go_red_key") == want


@pytest.mark.parametrize("seed", range(5))
def test_primitive_rollouts(seed):
    env, _, _ = reset(EnvConfig(8), seed)
    steps, ok = run_primitive(env, "go_open_red_door")
    assert not ok and env.doors["red"] == "locked"
    env, _, _ = reset(EnvConfig(8), seed)
    trace = []
    for name in ("go_red_key", "go_open_red_door", "go_to_goal"):
        _, ok = run_primitive(env, name, trace=trace)
        assert ok
    assert env.success
    assert all((x, y) != env.layout.blue_door for _, _, x, y, _, _ in trace)
    with pytest.raises(KeyError):
        run_primitive(env, "fly")


def test_blue_route_primitives():
    env, _, _ = reset(EnvConfig(12), 1)
    for name in ("go_blue_door", "go_to_goal"):
        assert run_primitive(env, name)[1]
    assert env.success


def test_trace_csv(tmp_path):
    env, _, _ = reset(EnvConfig(8), 0)
    trace = []
    run_primitive(env, "go_red_key", trace=trace)
    write_trace(tmp_path / "t.csv", trace)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "step,action,x,y,reward,progress_atom"
    assert len(lines) == len(trace) + 1 and lines[-1].endswith("get_red_key")
