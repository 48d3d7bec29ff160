"""Constant-pinning attack that learns which synthesis-report deltas mark the correct bit."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..netcore import GateType, KeyMapping, Netlist, NetlistEditor
from ..resynth import constant_propagate, report, resynthesize
from .report import AttackReport, finish

G = GateType
WINDOW = 48
EFFORT = 1


def key_window(n: Netlist, key: str, size: int = WINDOW) -> Netlist:
    """Sub-netlist of the ``size`` gates around a key-gate.

    Nets entering the window become inputs, nets leaving it become outputs;
    the key-input keeps its name.
    """
    kid = n.by_name(key)
    region = [g for g in n.neighborhood(n.key_gate(kid), size) if n[g].kind not in (G.INPUT, G.OUTPUT)]
    inside = set(region)
    ed = NetlistEditor()
    new: dict[int, int] = {}

    def source(f: int) -> int:
        if f not in new:
            g = n[f]
            if f == kid:
                new[f] = ed.add_input(g.name, key=True)
            else:
                new[f] = ed.add_input(f"w{f}")
        return new[f]

    for gid in n.topological_order():
        if gid in inside:
            g = n[gid]
            new[gid] = ed.add_gate(g.kind, [new[f] if f in inside else source(f) for f in g.fanins])
    for gid in region:
        if any(c not in inside for c in n.fanouts[gid]):
            ed.add_output(f"o{gid}", new[gid])
    if not ed.primary_outputs:
        ed.add_output(f"o{region[-1]}", new[region[-1]])
    if kid not in new:
        raise ValueError(f"window around {key!r} does not reach the key-input")
    return ed.freeze()


def key_features(n: Netlist, key: str, window: int = WINDOW, effort: int = EFFORT, seed: int = 0):
    """Report deltas after pinning ``key`` to 0 and to 1, relative to the unpinned window."""
    w = key_window(n, key, window)
    base = np.array(report(resynthesize(w, effort, seed=seed)).vector(), dtype=np.float64)
    out = []
    for b in (0, 1):
        pinned = resynthesize(constant_propagate(w, {key: b}), effort, seed=seed)
        out.append(np.array(report(pinned).vector(), dtype=np.float64) - base)
    return out[0], out[1]


class SweepModel:
    """Feature weights = mean(correct-bit delta - wrong-bit delta) over training keys."""

    def __init__(self, window: int = WINDOW, effort: int = EFFORT, seed: int = 0):
        self.window = window
        self.effort = effort
        self.seed = seed
        self.weights: np.ndarray | None = None

    def fit(self, training_locks: Sequence[tuple[Netlist, KeyMapping]]) -> "SweepModel":
        diffs = []
        for n, mapping in training_locks:
            truth = mapping.as_dict()
            for k in mapping.names:
                f0, f1 = key_features(n, k, self.window, self.effort, self.seed)
                diffs.append(f0 - f1 if truth[k] == 0 else f1 - f0)
        if not diffs:
            raise ValueError("empty training set")
        self.weights = np.mean(diffs, axis=0)
        return self

    def score_gap(self, n: Netlist, key: str) -> float:
        """score(0) - score(1); positive favours bit 0."""
        if self.weights is None:
            raise RuntimeError("model is not trained")
        f0, f1 = key_features(n, key, self.window, self.effort, self.seed)
        return float(self.weights @ (f0 - f1))


def sweep_attack(
    training_locks: Sequence[tuple[Netlist, KeyMapping]] | SweepModel,
    target: Netlist,
    margin: float = 0.0,
    truth: KeyMapping | None = None,
    **kw,
) -> AttackReport:
    """Guess each bit from the learned score gap; a gap within ``margin`` abstains."""
    model = training_locks if isinstance(training_locks, SweepModel) else SweepModel(**kw).fit(training_locks)
    rep = AttackReport({})
    for k in target.key_names:
        gap = model.score_gap(target, k)
        rep.confidence[k] = abs(gap)
        if gap > margin:
            rep.guesses[k] = 0
        elif gap < -margin:
            rep.guesses[k] = 1
        else:
            rep.guesses[k] = None
        rep.stages[k] = "sweep"
    return finish(rep, truth)
