"""Differentiable forward chaining over compiled clause encodings.

One reasoning step gathers body valuations, multiplies them per grounding,
takes a soft disjunction over groundings of each head, mixes clauses into
``M`` program slots with row-softmaxed weights, takes a soft disjunction over
slots and softly merges the result into the previous valuation.

Two soft disjunctions are available:

``"plain"``
    ``gamma * log(sum(exp(x / gamma)))``. Every operand contributes, so a
    disjunction of ``n`` zeros evaluates to ``gamma * ln(n)``.
``"anchored"`` (inference default)
    ``gamma * log(sum(exp(x / gamma)) - (n - 1))``. Identical gradient
    structure and the same ``[max, max + gamma*ln(n)]`` envelope, but zero
    operands are exactly neutral, so atoms with no support stay at 0 instead
    of accumulating ``gamma * ln 2`` per step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .logic.grounding import FALSE, TRUE
from .logic.terms import Atom
from .tensorize import ProgramEncoding

BCE_EPS = 1e-7
SOFTOR_MODES = ("anchored", "plain")


@dataclass
class InferConfig:
    gamma: float = 0.01
    T: int = 1
    M: int = 1
    softor: str = "anchored"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.softor not in SOFTOR_MODES:
            raise ValueError(f"softor must be one of {SOFTOR_MODES}")


# ---------------------------------------------------------------- soft disjunction

def _softor_parts(x: np.ndarray, gamma: float, mode: str, axis: int = -1):
    """Return (value, weights) where weights is d value / d x."""
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp((x - m) / gamma)
    s = e.sum(axis=axis, keepdims=True)
    if mode == "anchored":
        n = x.shape[axis]
        s = s - (n - 1) * np.exp(-m / gamma)
    elif mode != "plain":
        raise ValueError(f"unknown softor mode {mode!r}")
    value = np.squeeze(m + gamma * np.log(s), axis=axis)
    return value, e / s


def softor(values, gamma: float = 0.01, axis: int = -1, mode: str = "plain"):
    """Smooth maximum ``gamma * log sum exp(values / gamma)`` along ``axis``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("softor of an empty list")
    value, _ = _softor_parts(x, gamma, mode, axis)
    return float(value) if np.ndim(value) == 0 else value


def anchored_softor(values, gamma: float = 0.01, axis: int = -1):
    return softor(values, gamma, axis, mode="anchored")


def _segment_softor(x: np.ndarray, starts: np.ndarray, seg_of: np.ndarray, gamma: float, mode: str):
    """Soft disjunction over contiguous segments; returns values and d/dx."""
    if len(x) == 0:
        return np.zeros(0), np.zeros(0)
    m = np.maximum.reduceat(x, starts)
    e = np.exp((x - m[seg_of]) / gamma)
    s = np.add.reduceat(e, starts)
    if mode == "anchored":
        counts = np.diff(np.r_[starts, len(x)])
        s = s - (counts - 1) * np.exp(-m / gamma)
    return m + gamma * np.log(s), e / s[seg_of]


# ---------------------------------------------------------------- dense operations

def gather(valuation: np.ndarray, index_tensor: np.ndarray) -> np.ndarray:
    return np.asarray(valuation, dtype=float)[np.asarray(index_tensor)]


def body_conjunction(gathered: np.ndarray) -> np.ndarray:
    return np.prod(gathered, axis=-1)


def substitution_disjunction(b: np.ndarray, gamma: float = 0.01, valid_mask=None, mode: str = "plain"):
    """Per-head soft disjunction over the substitution axis of a ``G x S`` array.

    With a ``valid_mask`` only real groundings take part and heads without any
    grounding score 0.
    """
    b = np.asarray(b, dtype=float)
    if valid_mask is None:
        return softor(b, gamma, axis=-1, mode=mode)
    mask = np.asarray(valid_mask, dtype=bool)
    out = np.zeros(b.shape[0])
    for j in np.flatnonzero(mask.any(axis=1)):
        out[j] = softor(b[j][mask[j]], gamma, mode=mode)
    return out


def softmax(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    z = np.exp(W - W.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def weighted_rule_aggregation(c: np.ndarray, W: np.ndarray, gamma: float = 0.01, mode: str = "plain"):
    """Mix ``C x G`` clause scores into ``M`` slots and soft-or the slots."""
    h = softmax(W) @ np.asarray(c, dtype=float)        # (M, G)
    return softor(h, gamma, axis=0, mode=mode)


# ---------------------------------------------------------------- sparse engine

@dataclass
class _StepCache:
    gathered: np.ndarray
    b: np.ndarray
    row_w: np.ndarray
    c: np.ndarray
    P: np.ndarray
    slot_w: np.ndarray
    merge_w: np.ndarray
    pass_mask: np.ndarray


def _check_weights(W: np.ndarray, enc: ProgramEncoding, config: InferConfig) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] != enc.C:
        raise ValueError(f"weights must have shape (M, {enc.C}), got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("rule weights contain non-finite entries")
    return W


def _forward_step(v: np.ndarray, enc: ProgramEncoding, P: np.ndarray, config: InferConfig, keep: bool):
    gamma, mode = config.gamma, config.softor
    gathered = v[enc.rows_body]
    b = gathered.prod(axis=1)
    c_seg, row_w = _segment_softor(b, enc.seg_starts, enc.rows_seg, gamma, mode)
    c = np.zeros((enc.C, len(enc.heads)))
    c[enc.seg_clause, enc.seg_hpos] = c_seg
    h = P @ c
    r, slot_w = _softor_parts(h, gamma, mode, axis=0)
    prev = v[enc.heads]
    u, merge_w = _softor_parts(np.stack([r, prev]), gamma, mode, axis=0)
    out = v.copy()
    out[enc.heads] = np.clip(u, 0.0, 1.0)
    out[FALSE], out[TRUE] = 0.0, 1.0
    cache = _StepCache(gathered, b, row_w, c, P, slot_w, merge_w, (u >= 0.0) & (u <= 1.0)) if keep else None
    return out, cache


def _validate_valuation(v0, G: int) -> np.ndarray:
    v = np.array(v0, dtype=float)
    if v.shape != (G,):
        raise ValueError(f"valuation must have length {G}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("valuation contains non-finite entries")
    v = np.clip(v, 0.0, 1.0)
    v[FALSE], v[TRUE] = 0.0, 1.0
    return v


def infer_step(v, encoding: ProgramEncoding, W, config: InferConfig = InferConfig()) -> np.ndarray:
    W = _check_weights(W, encoding, config)
    v = _validate_valuation(v, encoding.G)
    return _forward_step(v, encoding, softmax(W), config, keep=False)[0]


def infer(v0, encoding: ProgramEncoding, W, config: InferConfig = InferConfig(), T: Optional[int] = None,
          trace: bool = False):
    """Run ``T`` steps (default ``config.T``). With ``trace`` also return every intermediate valuation."""
    T = config.T if T is None else T
    W = _check_weights(W, encoding, config)
    v = _validate_valuation(v0, encoding.G)
    P = softmax(W)
    history = [v]
    for _ in range(T):
        v = _forward_step(v, encoding, P, config, keep=False)[0]
        history.append(v)
    return (v, history) if trace else v


def query(v: np.ndarray, atom, table=None) -> float:
    """Value of ``atom`` (an index, or an Atom looked up in ``table``)."""
    if isinstance(atom, Atom):
        if table is None:
            raise ValueError("an atom query needs the ground atom table")
        atom = table.index(atom)
    return float(v[int(atom)])


def bce_loss(target: float, predicted: float) -> float:
    p = min(max(float(predicted), BCE_EPS), 1.0 - BCE_EPS)
    return -(target * math.log(p) + (1.0 - target) * math.log(1.0 - p))


def _bce_grad(target: float, predicted: float) -> float:
    if predicted <= BCE_EPS or predicted >= 1.0 - BCE_EPS:
        return 0.0
    return -target / predicted + (1.0 - target) / (1.0 - predicted)


# ---------------------------------------------------------------- training

@dataclass
class TrainTask:
    """A target atom to drive towards ``target`` from ``v0`` within ``T`` steps.

    ``encoding`` may be task specific (e.g. when built-ins read task facts at
    compile time); all tasks trained together must share the clause list.
    """

    v0: np.ndarray
    target_index: int
    target: float = 1.0
    T: int = 1
    encoding: Optional[ProgramEncoding] = None
    name: str = ""

    def __post_init__(self):
        self.v0 = np.asarray(self.v0, dtype=float)
        if not 0 <= self.target_index < len(self.v0):
            raise ValueError("target atom is not in the table")


def _encoding_for(task: TrainTask, encoding: Optional[ProgramEncoding]) -> ProgramEncoding:
    enc = task.encoding if task.encoding is not None else encoding
    if enc is None:
        raise ValueError(f"task {task.name!r} has no encoding")
    return enc


def task_loss(task: TrainTask, encoding, W, config: InferConfig = InferConfig()) -> float:
    enc = _encoding_for(task, encoding)
    v = infer(task.v0, enc, W, config, T=task.T)
    return bce_loss(task.target, v[task.target_index])


def loss_and_grad(task: TrainTask, encoding, W, config: InferConfig = InferConfig()):
    """BCE loss of one task and its exact gradient with respect to ``W``."""
    enc = _encoding_for(task, encoding)
    W = _check_weights(W, enc, config)
    P = softmax(W)
    v = _validate_valuation(task.v0, enc.G)
    caches: List[_StepCache] = []
    for _ in range(task.T):
        v, cache = _forward_step(v, enc, P, config, keep=True)
        caches.append(cache)
    p = v[task.target_index]
    loss = bce_loss(task.target, p)
    dv = np.zeros(enc.G)
    dv[task.target_index] = _bce_grad(task.target, p)
    dP = np.zeros_like(P)
    L = enc.rows_body.shape[1]
    for t in range(task.T - 1, -1, -1):
        ca = caches[t]
        du = dv[enc.heads] * ca.pass_mask
        dv_prev = dv.copy()
        dv_prev[enc.heads] = du * ca.merge_w[1]
        dv_prev[FALSE] = dv_prev[TRUE] = 0.0
        dh = (du * ca.merge_w[0])[None, :] * ca.slot_w        # (M, D)
        dP += dh @ ca.c.T
        dc = P.T @ dh                                          # (C, D)
        db = dc[enc.seg_clause, enc.seg_hpos][enc.rows_seg] * ca.row_w
        if L == 1:
            dg = db[:, None] * np.ones_like(ca.gathered)
        else:
            dg = np.empty_like(ca.gathered)
            for l in range(L):
                dg[:, l] = db * np.prod(np.delete(ca.gathered, l, axis=1), axis=1)
        dv_prev += np.bincount(enc.rows_body.ravel(), weights=dg.ravel(), minlength=enc.G)
        if not np.all(np.isfinite(dv_prev)) or not np.all(np.isfinite(dP)):
            raise FloatingPointError(f"non-finite gradient at reasoning step {t}")
        dv = dv_prev
    dW = P * (dP - (dP * P).sum(axis=1, keepdims=True))
    return loss, dW


def grad_rule_weights(task: TrainTask, encoding, W, config: InferConfig = InferConfig()) -> np.ndarray:
    return loss_and_grad(task, encoding, W, config)[1]


@dataclass
class TrainResult:
    W: np.ndarray
    loss_trace: np.ndarray                 # (steps, n_tasks)
    W0: np.ndarray = field(repr=False, default=None)

    @property
    def mean_loss(self) -> np.ndarray:
        return self.loss_trace.mean(axis=1) if len(self.loss_trace) else np.zeros(0)


def init_rule_weights(M: int, C: int, seed=0, std: float = 0.1) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))
    return rng.normal(0.0, std, size=(M, C))


def train_rule_weights(tasks: Sequence[TrainTask], encoding: Optional[ProgramEncoding], config: InferConfig,
                       lr: float = 0.1, steps: int = 1000, seed=0, init_std: float = 0.1,
                       W0: Optional[np.ndarray] = None) -> TrainResult:
    """Plain gradient descent on the mean BCE of ``tasks``.

    The loss trace row ``s`` holds each task's loss at the weights before
    update ``s``.
    """
    if not tasks:
        raise ValueError("at least one task is required")
    C = _encoding_for(tasks[0], encoding).C
    W = init_rule_weights(config.M, C, seed, init_std) if W0 is None else np.array(W0, dtype=float)
    start = W.copy()
    trace = np.zeros((steps, len(tasks)))
    for s in range(steps):
        grad = np.zeros_like(W)
        for i, task in enumerate(tasks):
            loss, g = loss_and_grad(task, encoding, W, config)
            trace[s, i] = loss
            grad += g / len(tasks)
        if not np.all(np.isfinite(trace[s])):
            raise FloatingPointError(f"loss diverged at step {s}: {trace[:s + 1].tolist()}")
        W = W - lr * grad
    return TrainResult(W, trace, start)


# ---------------------------------------------------------------- outputs

def write_loss_trace(path, trace: np.ndarray, task_names: Optional[Sequence[str]] = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "task_id", "loss"])
        for s, row in enumerate(np.atleast_2d(trace) if len(trace) else []):
            for i, loss in enumerate(row):
                w.writerow([s, task_names[i] if task_names else i, f"{loss:.9g}"])


def write_matrix(path, W: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"c{i}" for i in range(W.shape[1])])
        for row in W:
            w.writerow([f"{x:.9g}" for x in row])


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
