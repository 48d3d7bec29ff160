"""Key guessing from the stuck-at redundancy each constant key value leaves behind."""

from __future__ import annotations

import numpy as np

from ..netcore import GateType, KeyMapping, Netlist
from ..simeval import Fault, FaultSimulator, PatternBlock, n_words
from .report import AttackReport, finish

G = GateType


def pin_key(n: Netlist, key: str, bit: int) -> tuple[Netlist, int]:
    """Replace a key-input by a constant gate, without simplifying; returns the gate id."""
    ed = n.edit()
    kid = ed.by_name(key)
    c = ed.add_gate(G.CONST1 if bit else G.CONST0)
    ed.redirect(kid, c)
    ed.remove(kid)
    return ed.freeze(), c


def fault_supports(n: Netlist, const: int) -> dict[int, frozenset[str]]:
    """For gates whose observing outputs also see ``const``: input names those outputs depend on."""
    pos = set(n.primary_outputs)
    seen_by_const = n.transitive_fanout(const) & pos
    tfi_inputs: dict[int, frozenset[str]] = {}
    for o in seen_by_const | pos:
        tfi_inputs[o] = frozenset(n[g].name for g in n.transitive_fanin(o) if n[g].kind is G.INPUT)
    out = {}
    for g in n:
        if g.kind in (G.OUTPUT, G.CONST0, G.CONST1):
            continue
        observers = n.transitive_fanout(g.id) & pos
        if not observers & seen_by_const:
            continue
        out[g.id] = frozenset().union(*(tfi_inputs[o] for o in observers))
    return out


def count_redundant(n: Netlist, const: int, cone_limit: int) -> int:
    """Undetectable stuck-at faults among those observed together with ``const``.

    Faults whose observing outputs depend on more than ``cone_limit``
    inputs are skipped.
    """
    groups: dict[frozenset[str], list[int]] = {}
    for g, sup in fault_supports(n, const).items():
        if len(sup) <= cone_limit:
            groups.setdefault(sup, []).append(g)
    names = n.input_names + n.key_names
    total = 0
    for sup, gates in groups.items():
        # inputs outside the support cannot reach the observing outputs
        pats = PatternBlock.exhaustive(sorted(sup))
        zero = np.zeros(n_words(pats.n_patterns), dtype=np.uint64)
        pats = pats.with_lanes({nm: zero for nm in names if nm not in sup})
        fs = FaultSimulator(n, pats)
        for g in gates:
            for v in (0, 1):
                total += not fs.detects(Fault(g, v))
    return total


def redundancy_attack(target: Netlist, truth: KeyMapping | None = None, cone_limit: int = 12) -> AttackReport:
    """Guess the bit whose constant leaves fewer redundant faults; equal counts abstain."""
    if cone_limit < 1:
        raise ValueError("cone_limit must be >= 1")
    rep = AttackReport({})
    for k in target.key_names:
        counts = []
        for b in (0, 1):
            pinned, c = pin_key(target, k, b)
            counts.append(count_redundant(pinned, c, cone_limit))
        r0, r1 = counts
        rep.guesses[k] = 1 if r0 > r1 else 0 if r1 > r0 else None
        rep.confidence[k] = float(abs(r0 - r1))
        rep.stages[k] = f"redundancy:{r0}/{r1}"
    return finish(rep, truth)
