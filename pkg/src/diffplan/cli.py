"""Command line entry point: ``diffplan <command> ...``.

Exit status is 0 on success, 1 for user errors (bad input, missing files,
malformed configs) and 2 for internal failures.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__

RNG_NAME = "numpy.random.PCG64"


class UserError(Exception):
    """Problem with the command's inputs rather than with the program."""


# ---------------------------------------------------------------- helpers

def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise UserError(f"no such file: {path}")
    return p.read_text()


def _program_text(path) -> str:
    if str(path).startswith("builtin:"):
        from .programs import program_text
        try:
            return program_text(str(path)[len("builtin:"):])
        except FileNotFoundError:
            raise UserError(f"no packaged program named {path}") from None
    return _read_text(path)


def _load_program(paths):
    """Parse the concatenation of one or more program files (``builtin:NAME`` for packaged ones)."""
    from .logic import parse_program
    if isinstance(paths, (str, Path)):
        paths = [paths]
    return parse_program("\n".join(_program_text(p) for p in paths))


def write_manifest(out_dir: Path, name: str, config: Dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.manifest.json"
    manifest = {"command": name, "version": __version__, "rng": RNG_NAME,
                "numpy": np.__version__, "config": config}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def ema(values: Sequence[float], alpha: float) -> np.ndarray:
    """``s_t = alpha * x_t + (1 - alpha) * s_{t-1}`` seeded with the first value."""
    if not 0 < alpha <= 1:
        raise UserError("ema alpha must be in (0, 1]")
    out = np.empty(len(values))
    s = None
    for i, x in enumerate(values):
        s = x if s is None else alpha * x + (1 - alpha) * s
        out[i] = s
    return out


# ---------------------------------------------------------------- parse / ground

def cmd_parse(args) -> int:
    from .logic import classify_clause_atoms, format_program
    program = _load_program(args.program)
    if args.print:
        sys.stdout.write(format_program(program) + "\n")
        return 0
    print(f"predicates={len(program.predicates)} clauses={len(program.clauses)} facts={len(program.facts)}")
    states, actions = classify_clause_atoms(program)
    print(f"state_predicates={len(states)} action_predicates={len(actions)}")
    return 0


def cmd_ground(args) -> int:
    from .logic import enumerate_ground_atoms
    program = _load_program(args.program)
    table = enumerate_ground_atoms(program, cap=args.cap)
    print(f"G={len(table)}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "atom"])
            for i, atom in enumerate(table):
                w.writerow([i, str(atom)])
        write_manifest(out.parent, out.stem, vars(args))
    return 0


# ---------------------------------------------------------------- inference

def _facts(program, path) -> list:
    from .logic import parse_program
    from .logic.parser import format_program
    if path is None:
        return list(program.facts)
    extra = parse_program(format_program(program) + "\n" + _program_text(path))
    return list(extra.facts)


def cmd_infer(args) -> int:
    from .infer import InferConfig, infer, read_matrix
    from .logic import enumerate_ground_atoms, parse_atom
    from .logic.terms import FALSE_ATOM, TRUE_ATOM
    from .tensorize import encode_program
    from .experiments import valuation_from_facts
    from .planner import one_hot_weights

    program = _load_program(args.program)
    facts = _facts(program, args.facts)
    table = enumerate_ground_atoms(program, cap=args.cap)
    enc = encode_program(program, table, cap=args.substitution_cap)
    if args.weights:
        W = read_matrix(args.weights) if Path(args.weights).is_file() else None
        if W is None:
            raise UserError(f"no such file: {args.weights}")
    else:
        W = one_hot_weights(enc.C, range(enc.C))
    config = InferConfig(gamma=args.gamma, T=args.T, M=W.shape[0], softor=args.softor)
    text = args.query.strip()
    if text in ("true", "⊤"):
        target = table.index(TRUE_ATOM)
    elif text in ("false", "⊥"):
        target = table.index(FALSE_ATOM)
    else:
        target = table.index(parse_atom(text, program))
    v = infer(valuation_from_facts(table, facts), enc, W, config)
    print(_fmt(float(v[target])))
    return 0


def _read_manifest(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(_read_text(path))
    except configparser.Error as e:
        raise UserError(f"malformed config {path}: {e}") from None
    return cp


def _planner_tasks(cp: configparser.ConfigParser, base: Path):
    from .experiments import search_train_task, valuation_from_facts
    from .infer import TrainTask
    from .logic import enumerate_ground_atoms, parse_atom
    from .tensorize import encode_program, prune_encoding
    tasks = []
    for section in cp.sections():
        if not section.startswith("task:"):
            continue
        sec = cp[section]
        _reject_unknown(sec, {"builtin", "program", "goal", "t", "target"}, section)
        T = sec.getint("T", 3)
        if "builtin" in sec:
            task = search_train_task(sec["builtin"], T)
        else:
            if "program" not in sec or "goal" not in sec:
                raise UserError(f"[{section}] needs 'program' and 'goal' (or 'builtin')")
            program = _load_program(base / sec["program"])
            table = enumerate_ground_atoms(program)
            enc = encode_program(program, table, cap=10 ** 6)
            v0 = valuation_from_facts(table, program.facts)
            target = table.index(parse_atom(sec["goal"], program))
            task = TrainTask(v0, target, sec.getfloat("target", 1.0), T, prune_encoding(enc, v0, T))
        task.name = section[5:]
        tasks.append(task)
    if not tasks:
        raise UserError("manifest defines no [task:NAME] sections")
    return tasks


def _reject_unknown(section, allowed, name):
    for key in section:
        if key not in allowed and key not in section.parser.defaults():
            raise UserError(f"unknown key '{key}' in [{name}]")


def cmd_learn_planner(args) -> int:
    from .infer import InferConfig, train_rule_weights, write_loss_trace, write_matrix
    cp = _read_manifest(args.manifest)
    sec = cp["train"] if cp.has_section("train") else {}
    if cp.has_section("train"):
        _reject_unknown(cp["train"], {"slots", "gamma", "lr", "steps", "seeds", "softor"}, "train")
    tasks = _planner_tasks(cp, Path(args.manifest).parent)
    lr = args.lr if args.lr is not None else float(sec.get("lr", 0.1))
    steps = args.steps if args.steps is not None else int(sec.get("steps", 3000))
    seeds = _seed_list(args.seed if args.seed is not None else sec.get("seeds", "0"))
    config = InferConfig(gamma=float(sec.get("gamma", 0.01)), M=int(sec.get("slots", 6)),
                         softor=sec.get("softor", "anchored"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [t.name for t in tasks]
    for seed in seeds:
        res = train_rule_weights(tasks, None, config, lr=lr, steps=steps, seed=seed)
        write_loss_trace(out / f"loss_seed{seed}.csv", res.loss_trace, names)
        write_matrix(out / f"weights_seed{seed}.csv", res.W)
        final = res.mean_loss[-1] if steps else float("nan")
        print(f"seed={seed} steps={steps} final_mean_loss={_fmt(final)}")
    write_manifest(out, "learn-planner", {"manifest": str(args.manifest), "lr": lr, "steps": steps,
                                          "seeds": seeds, "infer": asdict(config), "tasks": names})
    return 0


def _seed_list(text) -> List[int]:
    if isinstance(text, int):
        return [text]
    try:
        seeds = [int(s) for s in str(text).replace(",", " ").split()]
    except ValueError:
        raise UserError(f"seeds must be integers, got {text!r}") from None
    if not seeds:
        raise UserError("at least one seed is required")
    return seeds


# ---------------------------------------------------------------- planning

def _parse_distances(text: Optional[str]) -> Dict[str, float]:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        name, _, value = item.partition("=")
        if not value:
            raise UserError(f"distance entries look like action=cells, got {item!r}")
        out[name.strip()] = math.inf if value.strip() in ("inf", "unreachable") else float(value)
    return out


def cmd_plan(args) -> int:
    from .planner import (DifferentiablePlanner, action_valuation, clauses_to_moves, enumerate_plans,
                          select_best_plan)
    program = _load_program(args.program)
    moves = clauses_to_moves(program)
    plans = enumerate_plans(moves, args.init, args.goal, args.max_len, loop_guard=not args.no_loop_guard)
    if not plans:
        print("no plan")
        return 0
    dist = _parse_distances(args.distances)
    actions = {m.action for m in moves}
    values = {a: action_valuation(dist.get(a, 0.0)) for a in actions}
    if args.no_loop_guard or not any(p.moves for p in plans):
        scored = [p.with_probability(float(np.prod([values[a] for a in p.actions]))) for p in plans]
    else:
        planner = DifferentiablePlanner(sorted({m for p in plans for m in p.moves}), max(len(p) for p in plans))
        scored = planner.score(plans, values)
    for i, p in enumerate(scored):
        print(f"% plan {i}")
        print(p.dump())
    best = select_best_plan(scored)
    print("% best")
    print(best.dump())
    return 0


# ---------------------------------------------------------------- RL

TRAIN_SECTIONS = {"env": {"size", "variant", "max_steps"},
                  "run": {"algo", "reward_model", "seeds", "output"},
                  "reward": {"bonus", "omega", "shift"}}


def load_experiment(path):
    """Resolve an experiment config into ``(env_config, trainer kwargs, run options, reward kwargs)``."""
    from .doorkey import EnvConfig
    from .rl import TrainerConfig
    cp = _read_manifest(path)
    trainer_keys = {f.name for f in fields(TrainerConfig)} - {"seed"}
    allowed = dict(TRAIN_SECTIONS, trainer=trainer_keys)
    for section in cp.sections():
        if section not in allowed:
            raise UserError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in allowed[section]:
                raise UserError(f"unknown key '{key}' in [{section}]")
    env = cp["env"] if cp.has_section("env") else {}
    try:
        env_config = EnvConfig(int(env.get("size", 8)), env.get("variant", "reach_goal"),
                               max_steps=int(env["max_steps"]) if "max_steps" in env else None)
        trainer = {}
        if cp.has_section("trainer"):
            types = {f.name: f.type for f in fields(TrainerConfig)}
            for key, value in cp["trainer"].items():
                trainer[key] = int(value) if types[key] in (int, "int") else float(value)
        TrainerConfig(**trainer)
        reward = {k: float(v) for k, v in (cp["reward"].items() if cp.has_section("reward") else [])}
    except (ValueError, KeyError) as e:
        raise UserError(f"invalid value in {path}: {e}") from None
    run = cp["run"] if cp.has_section("run") else {}
    options = {"algo": run.get("algo", "ppo"), "reward_model": run.get("reward_model", "none"),
               "seeds": _seed_list(run.get("seeds", "0")), "output": run.get("output", "runs")}
    if options["algo"] not in ("ppo", "a2c"):
        raise UserError(f"algo must be ppo or a2c, got {options['algo']!r}")
    if options["reward_model"] not in ("none", "static", "adaptive"):
        raise UserError(f"reward_model must be none, static or adaptive, got {options['reward_model']!r}")
    return env_config, trainer, options, reward


def cmd_train(args) -> int:
    from .experiments import variant_library
    from .reward import RewardConfig
    from .rl import TrainerConfig, save_checkpoint, train, write_curve, write_reward_log
    env_config, trainer, options, reward = load_experiment(args.config)
    if args.frames is not None:
        trainer["total_frames"] = args.frames
    out = Path(args.out or options["output"])
    out.mkdir(parents=True, exist_ok=True)
    kind = options["reward_model"]
    library = variant_library(env_config.task_variant) if kind != "none" else None
    reward_config = RewardConfig(total_steps=env_config.max_steps, **reward)
    for seed in options["seeds"]:
        config = TrainerConfig(seed=seed, **trainer)
        res = train(config, env_config, options["algo"], kind, library, reward_config)
        write_curve(out / f"curve_seed{seed}.csv", res.records)
        write_reward_log(out / f"rewards_seed{seed}.csv", res.reward_log)
        save_checkpoint(out / f"checkpoint_seed{seed}.csv", res.net)
        last = res.records[-1]
        print(f"seed={seed} frames={last['frames']} return_mean={_fmt(last['return_mean'])}")
    write_manifest(out, "train", {"env": asdict(env_config), "trainer": trainer, "run": options,
                                  "reward": asdict(reward_config)})
    return 0


def cmd_eval(args) -> int:
    from .doorkey import EnvConfig, VARIANTS
    from .experiments import PlanExecutor, variant_library
    from .rl import evaluate, load_checkpoint
    variants = VARIANTS if args.variant == "all" else [args.variant]
    if not args.planner and not args.checkpoint:
        raise UserError("pass --planner or --checkpoint PATH")
    net = None
    if args.checkpoint:
        if not Path(args.checkpoint).is_file():
            raise UserError(f"no such checkpoint: {args.checkpoint}")
        net = load_checkpoint(args.checkpoint)
    for variant in variants:
        agent = PlanExecutor(variant_library(variant)) if args.planner else net
        mean, std = evaluate(agent, EnvConfig(args.size, variant), args.episodes, args.seed)
        print(f"{variant} success={_fmt(mean)} std={_fmt(std)}")
    return 0


def cmd_plot_data(args) -> int:
    from .rl import read_curve
    rows = []
    for item in args.curves:
        method, _, files = item.rpartition("=")
        method = method or Path(files).stem
        paths = files.split(",")
        curves = [read_curve(_checked(p)) for p in paths]
        n = min(len(c["frames"]) for c in curves)
        if n == 0:
            raise UserError(f"empty curve for {method}")
        stack = np.stack([c["return_mean"][:n] for c in curves])
        frames = curves[0]["frames"][:n]
        series = {k: ema(f(stack, axis=0), args.ema_alpha) for k, f in
                  (("mean", np.mean), ("min", np.min), ("max", np.max))}
        for i in range(n):
            rows.append([method, int(frames[i]), series["mean"][i], series["min"][i], series["max"][i]])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "frames", "mean", "min", "max"])
        for r in rows:
            w.writerow([r[0], r[1]] + [_fmt(x) for x in r[2:]])
    write_manifest(out.parent, out.stem, vars(args))
    return 0


def _checked(path):
    if not Path(path).is_file():
        raise UserError(f"no such file: {path}")
    return path


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffplan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("parse", help="parse and validate a program")
    s.add_argument("program", nargs="+", help="program files; builtin:NAME for packaged ones")
    s.add_argument("--print", action="store_true", help="echo the normalised program")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("ground", help="enumerate the ground atom table")
    s.add_argument("program", nargs="+", help="program files; builtin:NAME for packaged ones")
    s.add_argument("--out")
    s.add_argument("--cap", type=int, default=100_000)
    s.set_defaults(func=cmd_ground)

    s = sub.add_parser("infer", help="run differentiable forward chaining and print a query value")
    s.add_argument("program", nargs="+", help="program files; builtin:NAME for packaged ones")
    s.add_argument("--facts")
    s.add_argument("--weights", help="CSV rule-weight matrix; default selects every clause")
    s.add_argument("--gamma", type=float, default=0.01)
    s.add_argument("-T", "--steps", dest="T", type=int, default=3)
    s.add_argument("--query", required=True)
    s.add_argument("--softor", choices=("anchored", "plain"), default="anchored")
    s.add_argument("--cap", type=int, default=100_000)
    s.add_argument("--substitution-cap", type=int, default=10 ** 6)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("learn-planner", help="train rule weights on a task manifest")
    s.add_argument("manifest")
    s.add_argument("--lr", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="planner_out")
    s.set_defaults(func=cmd_learn_planner)

    s = sub.add_parser("plan", help="enumerate and score plans of a two-body-clause program")
    s.add_argument("program", nargs="+", help="program files; builtin:NAME for packaged ones")
    s.add_argument("--init", default="initial")
    s.add_argument("--goal", default="reach_goal")
    s.add_argument("--max-len", type=int, default=6)
    s.add_argument("--distances", help="comma separated action=cells entries")
    s.add_argument("--no-loop-guard", action="store_true")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("train", help="train an RL agent from an experiment config")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--frames", type=int, help="override the frame budget")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="success rate of a checkpoint or of the planner with primitives")
    s.add_argument("--checkpoint")
    s.add_argument("--planner", action="store_true")
    s.add_argument("--variant", default="all")
    s.add_argument("--episodes", type=int, default=50)
    s.add_argument("--size", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("plot-data", help="EMA-smoothed mean/min/max curves across seeds")
    s.add_argument("curves", nargs="+", help="METHOD=curve1.csv,curve2.csv,...")
    s.add_argument("--ema-alpha", type=float, default=0.1)
    s.add_argument("--out", default="plot_data.csv")
    s.set_defaults(func=cmd_plot_data)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .logic import GroundingLimitError, ParseError, ProgramError
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        return args.func(args)
    except (UserError, ParseError, ProgramError, GroundingLimitError, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
