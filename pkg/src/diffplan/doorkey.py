"""A self-contained DoorKey gridworld with two routes to the goal.

A vertical wall splits the grid. Its upper opening is a locked red door and
its lower opening a blue door that starts open. The red key and the agent
start on the left; the goal is on the right. In the ``safe_goal_reaching``
variant the cell just behind the blue door is a trap.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .state import UNREACHABLE, SymbolicState

EMPTY, WALL, DOOR, KEY, GOAL, TRAP = range(6)
RED, BLUE = "red", "blue"
OPEN, CLOSED, LOCKED = "open", "closed", "locked"

ACTIONS = ("turn_left", "turn_right", "forward", "pickup", "toggle")
TURN_LEFT, TURN_RIGHT, FORWARD, PICKUP, TOGGLE = range(5)
# heading 0 = +x (east), 1 = +y (south), 2 = -x, 3 = -y
DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))
DIR_CHARS = ">v<^"

VARIANTS = ("reach_goal", "key_retrieval", "red_door_reaching", "safe_goal_reaching")
PRIMITIVES = ("go_red_key", "go_open_red_door", "go_blue_door", "go_to_goal")
PROGRESS_ATOMS = ("initial", "get_red_key", "go_through_door", "reach_goal")
OBS_DIM = 15


@dataclass(frozen=True)
class EnvConfig:
    size: int = 8
    task_variant: str = "reach_goal"
    layout_seed: int = 0
    max_steps: Optional[int] = None

    def __post_init__(self):
        if self.size < 6:
            raise ValueError("grid size must be at least 6")
        if self.task_variant not in VARIANTS:
            raise ValueError(f"unknown task variant {self.task_variant!r}")
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", 10 * self.size ** 2)
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class Layout:
    kind: np.ndarray            # (size, size) cell codes, indexed [y, x]
    wall_x: int
    red_door: Tuple[int, int]
    blue_door: Tuple[int, int]
    key: Tuple[int, int]
    goal: Tuple[int, int]
    trap: Optional[Tuple[int, int]]
    agent: Tuple[int, int]
    heading: int


def generate_layout(size: int, variant: str, seed: int) -> Layout:
    """Deterministic two-route layout for ``(size, variant, seed)``."""
    if size < 6:
        raise ValueError("layout needs size >= 6")
    rng = np.random.Generator(np.random.PCG64(seed))
    wx = math.ceil(size / 2)
    red_y, blue_y = size // 3, (2 * size) // 3
    kind = np.full((size, size), EMPTY, dtype=np.int8)
    kind[0, :] = kind[-1, :] = kind[:, 0] = kind[:, -1] = WALL
    kind[:, wx] = WALL
    kind[red_y, wx] = kind[blue_y, wx] = DOOR
    trap = (wx + 1, blue_y) if variant == "safe_goal_reaching" else None
    if trap:
        kind[trap[1], trap[0]] = TRAP
    left = [(x, y) for y in range(1, size - 1) for x in range(1, wx)]
    right = [(x, y) for y in range(1, size - 1) for x in range(wx + 1, size - 1)]
    door_fronts = {(wx - 1, red_y), (wx - 1, blue_y), (wx + 1, red_y), (wx + 1, blue_y)}
    key_cells = [c for c in left if c not in door_fronts]
    key = key_cells[rng.integers(len(key_cells))]
    agent_cells = [c for c in left if c != key]
    agent = agent_cells[rng.integers(len(agent_cells))]
    goal_cells = [c for c in right if c not in door_fronts]
    goal = goal_cells[rng.integers(len(goal_cells))]
    kind[key[1], key[0]] = KEY
    kind[goal[1], goal[0]] = GOAL
    return Layout(kind, wx, (wx, red_y), (wx, blue_y), key, goal, trap, agent, int(rng.integers(4)))


class DoorKeyEnv:
    """Gridworld with MiniGrid-style egocentric movement and a sparse terminal reward."""

    def __init__(self, config: EnvConfig = EnvConfig()):
        self.config = config
        self.layout: Optional[Layout] = None
        self.done = True
        self._dist_cache: Dict[tuple, Dict[str, float]] = {}
        self.state_distances = True

    # ------------------------------------------------------------ episode control
    def reset(self, seed: Optional[int] = None):
        seed = self.config.layout_seed if seed is None else seed
        self.layout = generate_layout(self.config.size, self.config.task_variant, seed)
        lay = self.layout
        self.kind = lay.kind.copy()
        self.doors = {RED: LOCKED, BLUE: OPEN}
        self.pos = lay.agent
        self.heading = lay.heading
        self.carrying = False
        self.step_count = 0
        self.done = False
        self.success = False
        self._dist_cache = {}
        return self.observation(), self.symbolic_state()

    @property
    def size(self) -> int:
        return self.config.size

    def door_color(self, cell) -> Optional[str]:
        if cell == self.layout.red_door:
            return RED
        if cell == self.layout.blue_door:
            return BLUE
        return None

    def front(self) -> Tuple[int, int]:
        dx, dy = DIRS[self.heading]
        return self.pos[0] + dx, self.pos[1] + dy

    def _enterable(self, cell) -> bool:
        k = self.kind[cell[1], cell[0]]
        if k in (EMPTY, GOAL, TRAP):
            return True
        return k == DOOR and self.doors[self.door_color(cell)] == OPEN

    def step(self, action: int):
        if self.done:
            raise RuntimeError("episode is finished; call reset()")
        action = int(action)
        if not 0 <= action < len(ACTIONS):
            raise ValueError(f"invalid action {action}")
        self.step_count += 1
        reward = 0.0
        if action == TURN_LEFT:
            self.heading = (self.heading - 1) % 4
        elif action == TURN_RIGHT:
            self.heading = (self.heading + 1) % 4
        elif action == FORWARD:
            nxt = self.front()
            if self._enterable(nxt):
                self.pos = nxt
        elif action == PICKUP:
            fx, fy = self.front()
            if not self.carrying and self.kind[fy, fx] == KEY:
                self.carrying = True
                self.kind[fy, fx] = EMPTY
        elif action == TOGGLE:
            color = self.door_color(self.front())
            if color is not None:
                status = self.doors[color]
                if status == LOCKED:
                    if self.carrying and color == RED:
                        self.doors[color] = OPEN
                else:
                    self.doors[color] = CLOSED if status == OPEN else OPEN
        cell_kind = self.kind[self.pos[1], self.pos[0]]
        if cell_kind == TRAP:
            self.done = True
        elif self._variant_achieved():
            self.done = self.success = True
            reward = 1.0 - 0.9 * self.step_count / self.config.max_steps
        if self.step_count >= self.config.max_steps:
            self.done = True
        return self.observation(), reward, self.done, self.symbolic_state(self.state_distances)

    def _variant_achieved(self) -> bool:
        v = self.config.task_variant
        if v == "key_retrieval":
            return self.carrying
        if v == "red_door_reaching":
            return self.pos == self.layout.red_door
        return self.pos == self.layout.goal

    # ------------------------------------------------------------ views
    def observation(self) -> np.ndarray:
        n = self.size - 1
        x, y = self.pos
        lay = self.layout
        obs = np.zeros(OBS_DIM)
        obs[0], obs[1] = x / n, y / n
        obs[2 + self.heading] = 1.0
        obs[6] = float(self.carrying)
        obs[7] = float(self.doors[RED] == OPEN)
        obs[8] = float(self.doors[BLUE] == OPEN)
        if not self.carrying:
            obs[9], obs[10] = (lay.key[0] - x) / n, (lay.key[1] - y) / n
        obs[11], obs[12] = (lay.red_door[0] - x) / n, (lay.red_door[1] - y) / n
        obs[13], obs[14] = (lay.goal[0] - x) / n, (lay.goal[1] - y) / n
        return obs

    def progress_atom(self) -> str:
        if self.pos == self.layout.goal:
            return "reach_goal"
        if self.pos[0] > self.layout.wall_x:
            return "go_through_door"
        if self.carrying:
            return "get_red_key"
        return "initial"

    def symbolic_state(self, with_distances: bool = True) -> SymbolicState:
        facts = {f"{c}_door_{s}" for c, s in self.doors.items()}
        if self.carrying:
            facts.add("carrying_red_key")
        dist = self.distances() if with_distances else {}
        return SymbolicState(self.progress_atom(), frozenset(facts), dist)

    # ------------------------------------------------------------ distances
    def _passable_mask(self, red_open: bool) -> np.ndarray:
        k = self.kind
        mask = (k == EMPTY) | (k == GOAL)
        rx, ry = self.layout.red_door
        bx, by = self.layout.blue_door
        mask[ry, rx] = red_open
        mask[by, bx] = self.doors[BLUE] == OPEN
        return mask

    def _distance_map(self, target, red_open: bool) -> np.ndarray:
        """Cell distances from every cell to ``target``; the target itself need not be passable."""
        mask = self._passable_mask(red_open)
        dist = np.full(mask.shape, np.inf)
        tx, ty = target
        dist[ty, tx] = 0
        queue = deque([target])
        while queue:
            x, y = queue.popleft()
            d = dist[y, x] + 1
            for dx, dy in DIRS:
                nx, ny = x + dx, y + dy
                if mask[ny, nx] and dist[ny, nx] == np.inf:
                    dist[ny, nx] = d
                    queue.append((nx, ny))
        return dist

    def _maps(self):
        key = (self.carrying, self.doors[RED], self.doors[BLUE])
        maps = self._dist_cache.get(key)
        if maps is None:
            lay = self.layout
            red_open = self.doors[RED] == OPEN
            maps = {
                "key": self._distance_map(lay.key, red_open),
                "red": self._distance_map(lay.red_door, red_open),
                "blue": self._distance_map(lay.blue_door, red_open),
                "goal": self._distance_map(lay.goal, red_open),
                "goal_unlocked": self._distance_map(lay.goal, True),
            }
            self._dist_cache = {key: maps}
        return maps

    @staticmethod
    def _from_cell(dist: np.ndarray, cell) -> float:
        """Map value at ``cell``, stepping out through a neighbour when the cell itself is blocked."""
        x, y = cell
        if np.isfinite(dist[y, x]):
            return dist[y, x]
        return 1 + min(dist[y + dy, x + dx] for dx, dy in DIRS)

    def distances(self) -> Dict[str, float]:
        """Shortest-path cell counts from the agent to each subtask target."""
        return {name: self.distance_to(name) for name in PRIMITIVES}

    def distance_to(self, action: str) -> float:
        if action not in PRIMITIVES:
            raise KeyError(f"unknown subtask {action!r}")
        m = self._maps()
        x, y = self.pos
        lay = self.layout
        key_first = (not self.carrying and self.doors[RED] == LOCKED)
        to_key = m["key"][y, x]
        if action == "go_red_key":
            d = 0.0 if self.carrying else to_key
        elif action == "go_open_red_door":
            if key_first:
                d = to_key + self._from_cell(m["red"], lay.key)
            else:
                d = m["red"][y, x]
        elif action == "go_blue_door":
            d = m["blue"][y, x]
        else:
            d = m["goal"][y, x]
            if key_first:
                d = min(d, to_key + self._from_cell(m["goal_unlocked"], lay.key))
            elif not self.doors[RED] == OPEN and self.carrying:
                d = min(d, m["goal_unlocked"][y, x])
        return float(d) if np.isfinite(d) else UNREACHABLE

    # ------------------------------------------------------------ rendering
    def render_ascii(self) -> str:
        chars = {EMPTY: ".", WALL: "#", KEY: "K", GOAL: "G", TRAP: "T"}
        rows = []
        for y in range(self.size):
            row = []
            for x in range(self.size):
                if (x, y) == self.pos:
                    row.append(DIR_CHARS[self.heading])
                    continue
                k = self.kind[y, x]
                row.append("R" if (x, y) == self.layout.red_door else
                           "B" if (x, y) == self.layout.blue_door else chars[k])
            rows.append("".join(row))
        return "\n".join(rows)


def reset(config: EnvConfig, seed: Optional[int] = None):
    """Create an environment, reset it, and return ``(env, observation, symbolic_state)``."""
    env = DoorKeyEnv(config)
    obs, sym = env.reset(seed)
    return env, obs, sym


# ---------------------------------------------------------------- scripted primitives

def _plan_moves(env: DoorKeyEnv, goal_test, avoid_traps: bool = True) -> Optional[List[int]]:
    """Shortest action sequence over (x, y, heading) reaching a pose with ``goal_test`` true."""
    start = (env.pos, env.heading)
    if goal_test(*start):
        return []
    prev = {start: None}
    queue = deque([start])
    while queue:
        pose = queue.popleft()
        (x, y), h = pose
        dx, dy = DIRS[h]
        succ = [(TURN_LEFT, ((x, y), (h - 1) % 4)), (TURN_RIGHT, ((x, y), (h + 1) % 4))]
        nxt = (x + dx, y + dy)
        if env._enterable(nxt) and not (avoid_traps and env.kind[nxt[1], nxt[0]] == TRAP):
            succ.append((FORWARD, (nxt, h)))
        for a, p in succ:
            if p not in prev:
                prev[p] = (pose, a)
                if goal_test(*p):
                    actions = []
                    while prev[p] is not None:
                        p, a = prev[p]
                        actions.append(a)
                    return actions[::-1]
                queue.append(p)
    return None


def _facing(target):
    def test(pos, h):
        return (pos[0] + DIRS[h][0], pos[1] + DIRS[h][1]) == target
    return test


def _standing(target):
    return lambda pos, h: pos == target


def _primitive_script(env: DoorKeyEnv, name: str):
    """Yield the low-level actions of one primitive; each leg is planned when it starts."""
    lay = env.layout
    if name == "go_red_key":
        if env.carrying:
            return
        yield from _execute_path(env, _facing(lay.key))
        yield PICKUP
    elif name == "go_open_red_door":
        if env.doors[RED] != OPEN:
            yield from _execute_path(env, _facing(lay.red_door))
            yield TOGGLE
            if env.doors[RED] != OPEN:
                return
        yield from _execute_path(env, _standing((lay.wall_x + 1, lay.red_door[1])))
    elif name == "go_blue_door":
        if env.doors[BLUE] != OPEN:
            yield from _execute_path(env, _facing(lay.blue_door))
            yield TOGGLE
        yield from _execute_path(env, _standing((lay.wall_x + 1, lay.blue_door[1])), avoid_traps=False)
    elif name == "go_to_goal":
        yield from _execute_path(env, _standing(lay.goal))
    else:
        raise KeyError(f"unknown primitive {name!r}")


def _execute_path(env, goal_test, avoid_traps=True):
    path = _plan_moves(env, goal_test, avoid_traps)
    if path is None:
        return
    yield from path


_POSTCONDITION = {
    "go_red_key": lambda env: env.carrying,
    "go_open_red_door": lambda env: env.doors[RED] == OPEN and (env.pos[0] > env.layout.wall_x or env.success),
    "go_blue_door": lambda env: env.pos[0] > env.layout.wall_x or env.success,
    "go_to_goal": lambda env: env.pos == env.layout.goal,
}


def run_primitive(env: DoorKeyEnv, name: str, budget: Optional[int] = None, trace: Optional[list] = None):
    """Run a scripted controller until its post-condition holds or the budget runs out.

    Returns ``(steps executed, success flag)``.
    """
    if name not in PRIMITIVES:
        raise KeyError(f"unknown primitive {name!r}")
    budget = 4 * env.size if budget is None else budget
    steps = 0
    post = _POSTCONDITION[name]
    for action in _primitive_script(env, name):
        if env.done or steps >= budget or post(env):
            break
        _, reward, _, sym = env.step(action)
        steps += 1
        if trace is not None:
            trace.append((env.step_count, ACTIONS[action], env.pos[0], env.pos[1], reward, sym.progress))
    return steps, bool(post(env))


def write_trace(path, rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "action", "x", "y", "reward", "progress_atom"])
        for r in rows:
            w.writerow([r[0], r[1], r[2], r[3], f"{r[4]:.9g}", r[5]])


def route_exists(env: DoorKeyEnv, route: str) -> bool:
    """Grid-search check that the goal is reachable along ``route`` ('blue' or 'red')."""
    lay = env.layout
    mask = (env.kind == EMPTY) | (env.kind == GOAL)
    bx, by = lay.blue_door
    rx, ry = lay.red_door

    def reach(src, dst, m):
        seen, queue = {src}, deque([src])
        while queue:
            x, y = queue.popleft()
            for dx, dy in DIRS:
                n = (x + dx, y + dy)
                if n == dst:
                    return True
                if m[n[1], n[0]] and n not in seen:
                    seen.add(n)
                    queue.append(n)
        return False

    if route == "blue":
        m = mask.copy()
        m[by, bx] = True
        return reach(env.pos, lay.goal, m)
    m = mask.copy()
    if not reach(env.pos, lay.key, m):
        return False
    m[ry, rx] = True
    return reach(lay.key, lay.goal, m)
