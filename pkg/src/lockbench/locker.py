"""Key-gate insertion and the RLL / FLL / SLL placement heuristics.

Every scheme is a pure function of ``(netlist, K, palette, seed)`` and
returns a :class:`LockRecord` with the locked netlist, the correct key and
the list of locked sites.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .netcore import GateType, KeyMapping, Netlist, NetlistEditor, NetlistError
from .simeval import Fault, FaultSimulator, PatternBlock, make_rng

G = GateType


class KeyGateKind(enum.Enum):
    XOR_KG = "XOR"
    XNOR_KG = "XNOR"
    AND_KG = "AND"
    OR_KG = "OR"
    MUX_ANDOR_KG = "MUX_ANDOR"
    MUX_NAND_KG = "MUX_NAND"
    MUX_NOR_KG = "MUX_NOR"

    @property
    def is_mux(self) -> bool:
        return self.name.startswith("MUX")


K_ = KeyGateKind

#: Correct bit of the single-gate kinds (the identity element of the operator).
FIXED_BIT = {K_.XOR_KG: 0, K_.XNOR_KG: 1, K_.AND_KG: 1, K_.OR_KG: 0}

#: Gate type of the gate a kind's key-input drives directly (its "root").
ROOT_TYPE = {
    K_.XOR_KG: G.XOR,
    K_.XNOR_KG: G.XNOR,
    K_.AND_KG: G.AND,
    K_.OR_KG: G.OR,
    K_.MUX_ANDOR_KG: G.AND,
    K_.MUX_NAND_KG: G.NAND,
    K_.MUX_NOR_KG: G.NOR,
}


@dataclass(frozen=True)
class Palette:
    name: str
    kinds: frozenset

    def __post_init__(self):
        if not self.kinds:
            raise ValueError("a palette needs at least one key-gate kind")

    def __contains__(self, kind) -> bool:
        return kind in self.kinds

    def ordered(self) -> list[KeyGateKind]:
        return [k for k in KeyGateKind if k in self.kinds]


_XNOR = frozenset({K_.XOR_KG, K_.XNOR_KG})
_CL1 = frozenset({K_.MUX_ANDOR_KG, K_.MUX_NAND_KG})
_CL2 = _CL1 | {K_.MUX_NOR_KG}
_CL3 = _CL2 | _XNOR
_CL4 = _CL3 | {K_.AND_KG, K_.OR_KG}

PALETTES = {
    "xnor": Palette("xnor", _XNOR),
    "cl_v1": Palette("cl_v1", _CL1),
    "cl_v2": Palette("cl_v2", _CL2),
    "cl_v3": Palette("cl_v3", _CL3),
    "cl_v4": Palette("cl_v4", _CL4),
}


def palette(name: str | Palette) -> Palette:
    if isinstance(name, Palette):
        return name
    key = name.lower().replace("-", "_").replace("(", "").replace(")", "")
    if key in ("x_n_or", "xnor_palette", "xor"):
        key = "xnor"
    try:
        return PALETTES[key]
    except KeyError:
        raise ValueError(f"unknown palette {name!r}; choose from {', '.join(PALETTES)}") from None


@dataclass(frozen=True)
class Site:
    key: str
    net: int
    kind: KeyGateKind


@dataclass
class LockRecord:
    locked: Netlist
    mapping: KeyMapping
    sites: list[Site]
    scores: list[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.sites)


# ---------------------------------------------------------------------------
# Insertion


@dataclass
class Insertion:
    """What one key-gate insertion added to an editor; enough to undo it."""

    key_id: int
    key_name: str
    net: int
    kind: KeyGateKind
    bit: int
    output: int
    created: list[int]
    redirected: list[int]

    def undo(self, ed: NetlistEditor) -> None:
        for c in self.redirected:
            ed.replace_fanin(c, self.output, self.net)
        for g in reversed(self.created):
            ed.set_fanins(g, [])
        for g in reversed(self.created):
            ed.remove(g)
        ed.remove(self.key_id)


def next_key_name(ed: NetlistEditor) -> str:
    i = len(ed.key_inputs)
    while ed.has_name(f"k{i}"):
        i += 1
    return f"k{i}"


def insert_key_gate_editor(
    ed: NetlistEditor,
    net: int,
    kind: KeyGateKind,
    key_name: str | None = None,
    rng=None,
    *,
    true_on_one: bool | None = None,
) -> Insertion:
    """Insert a key-gate on ``net`` inside an editor.

    MUX kinds pick the data-input order with ``rng`` unless
    ``true_on_one`` fixes it (True: the select value 1 passes the original
    net).
    """
    if net not in ed:
        raise NetlistError(f"invalid net {net}")
    if net in ed.key_inputs:
        raise NetlistError("cannot lock a key-input")
    if ed.kind[net] is G.OUTPUT:
        raise NetlistError("cannot lock an output port marker")
    consumers = sorted(ed.fanouts[net])
    if not consumers:
        raise NetlistError(f"net {net} has no consumer")
    key_name = key_name or next_key_name(ed)
    if ed.has_name(key_name):
        raise NetlistError(f"name collision on {key_name!r}")
    k = ed.add_input(key_name, key=True)
    created: list[int] = []

    def add(kind_, fanins, suffix):
        g = ed.add_gate(kind_, fanins, ed.fresh_name(f"{key_name}_{suffix}"))
        created.append(g)
        return g

    if not kind.is_mux:
        out = add(ROOT_TYPE[kind], (net, k), "kg")
        bit = FIXED_BIT[kind]
    else:
        if true_on_one is None:
            rng = make_rng(rng if rng is not None else 0)
            true_on_one = bool(rng.integers(0, 2))
        inv = add(G.NOT, (net,), "f")
        in1, in0 = (net, inv) if true_on_one else (inv, net)
        bit = 1 if true_on_one else 0
        ns = add(G.NOT, (k,), "ns")
        if kind is K_.MUX_ANDOR_KG:
            a1 = add(G.AND, (k, in1), "m1")
            a0 = add(G.AND, (ns, in0), "m0")
            out = add(G.OR, (a1, a0), "mux")
        elif kind is K_.MUX_NAND_KG:
            a1 = add(G.NAND, (k, in1), "m1")
            a0 = add(G.NAND, (ns, in0), "m0")
            out = add(G.NAND, (a1, a0), "mux")
        else:
            # out = NOR(NOR(~s, in1), NOR(s, in0)) = s ? in1 : in0;
            # the gate fed by the key directly is created first
            a0 = add(G.NOR, (k, in0), "m0")
            a1 = add(G.NOR, (ns, in1), "m1")
            out = add(G.NOR, (a1, a0), "mux")
    for c in consumers:
        ed.replace_fanin(c, net, out)
    return Insertion(k, key_name, net, kind, bit, out, created, consumers)


def insert_key_gate(n: Netlist, net: int, kind: KeyGateKind, key_name: str, rng=None) -> tuple[Netlist, int]:
    """Locked copy of ``n`` with one key-gate on ``net`` and its correct bit."""
    ed = n.edit()
    ins = insert_key_gate_editor(ed, net, kind, key_name, rng)
    return ed.freeze(), ins.bit


# ---------------------------------------------------------------------------
# Site eligibility


def key_structure(fanins_of, fanouts_of, kind_of, key_ids: Iterable[int]) -> set[int]:
    """Gates belonging to key-gate structures.

    These are consumers of key-inputs (directly or through inverters),
    gates fed only by such consumers (the output stage of composite
    key-gates), and inverters that feed nothing but key-gate logic.
    """
    core: set[int] = set()
    for k in key_ids:
        stack = [k]
        while stack:
            s = stack.pop()
            for c in fanouts_of(s):
                if kind_of(c) is G.OUTPUT or c in core:
                    continue
                core.add(c)
                if kind_of(c) in (G.NOT, G.BUF):
                    stack.append(c)
    extra = set()
    for g in core:
        for c in fanouts_of(g):
            if kind_of(c) is not G.OUTPUT and c not in core and all(f in core for f in fanins_of(c)):
                extra.add(c)
    core |= extra
    for g in list(core):
        for f in fanins_of(g):
            if kind_of(f) is G.NOT and f not in core and all(c in core for c in fanouts_of(f)):
                core.add(f)
    return core


def lockable_nets(n: Netlist) -> list[int]:
    """Nets a new key-gate may be placed on, in id order."""
    kind_of = lambda g: n[g].kind  # noqa: E731
    taken = key_structure(lambda g: n[g].fanins, n.fanouts.__getitem__, kind_of, n.key_inputs)
    keys = set(n.key_inputs)
    out = []
    for g in n:
        if g.kind in (G.OUTPUT, G.CONST0, G.CONST1) or g.id in keys or g.id in taken:
            continue
        if not n.fanouts[g.id]:
            continue
        out.append(g.id)
    return sorted(out)


def lockable_in_editor(ed: NetlistEditor) -> list[int]:
    kind_of = ed.kind.__getitem__
    taken = key_structure(ed.fanins.__getitem__, ed.fanouts.__getitem__, kind_of, ed.key_inputs)
    keys = set(ed.key_inputs)
    return sorted(
        g for g in ed.ids()
        if ed.kind[g] not in (G.OUTPUT, G.CONST0, G.CONST1)
        and g not in keys and g not in taken and ed.fanouts[g]
    )


def _check_K(K: int, candidates: Sequence[int]) -> None:
    if K < 0:
        raise ValueError("K must be non-negative")
    if K > len(candidates):
        raise ValueError(f"K={K} exceeds the {len(candidates)} lockable nets")


def _apply(n: Netlist, nets: Sequence[int], kinds: Sequence[KeyGateKind], rng, scores=()) -> LockRecord:
    ed = n.edit()
    sites, bits = [], []
    for net, kind in zip(nets, kinds):
        ins = insert_key_gate_editor(ed, net, kind, None, rng)
        sites.append(Site(ins.key_name, net, kind))
        bits.append((ins.key_name, ins.bit))
    locked = ed.freeze()
    return LockRecord(locked, KeyMapping(tuple(bits)), sites, list(scores))


def _pick_kinds(pal: Palette, K: int, rng) -> list[KeyGateKind]:
    opts = pal.ordered()
    return [opts[i] for i in rng.integers(0, len(opts), size=K)] if K else []


# ---------------------------------------------------------------------------
# Schemes


def lock_rll(n: Netlist, K: int, pal: Palette | str, seed=0) -> LockRecord:
    """Random logic locking: K distinct random nets, random kinds from the palette."""
    pal = palette(pal)
    rng = make_rng(seed)
    cands = lockable_nets(n)
    _check_K(K, cands)
    idx = rng.choice(len(cands), size=K, replace=False) if K else []
    nets = [cands[i] for i in idx]
    return _apply(n, nets, _pick_kinds(pal, K, rng), rng)


def fault_impact_scores(n: Netlist, nets: Sequence[int], n_patterns: int, seed) -> dict[int, int]:
    """Output bit flips caused by stuck-at-0 plus stuck-at-1 on each net."""
    names = n.input_names + n.key_names
    fs = FaultSimulator(n, PatternBlock.random(names, n_patterns, seed))
    return {g: fs.impact(Fault(g, 0)) + fs.impact(Fault(g, 1)) for g in nets}


def lock_fll(n: Netlist, K: int, pal: Palette | str, seed=0, n_patterns: int = 2048) -> LockRecord:
    """Fault-analysis locking: the K nets with the highest fault impact (ties by id)."""
    pal = palette(pal)
    rng = make_rng(seed)
    cands = lockable_nets(n)
    _check_K(K, cands)
    scores = fault_impact_scores(n, cands, n_patterns, rng)
    ranked = sorted(cands, key=lambda g: (-scores[g], g))[:K]
    return _apply(n, ranked, _pick_kinds(pal, K, rng), rng, [scores[g] for g in ranked])


def lock_sll(n: Netlist, K: int, seed=0, pal: Palette | str = "xnor") -> LockRecord:
    """Greedy interference-maximising placement with X(N)OR key-gates.

    A candidate's score is the number of already placed key-gates whose
    fan-in or fan-out cone contains it.
    """
    pal = palette(pal)
    if pal.kinds != _XNOR:
        raise ValueError("SLL is defined for the X(N)OR palette only")
    rng = make_rng(seed)
    cands = lockable_nets(n)
    _check_K(K, cands)
    score = {g: 0 for g in cands}
    chosen: list[int] = []
    picked_scores: list[int] = []
    for _ in range(K):
        best = max(score.values())
        tied = [g for g, s in score.items() if s == best]
        g = tied[int(rng.integers(0, len(tied)))]
        chosen.append(g)
        picked_scores.append(best)
        del score[g]
        for c in (n.transitive_fanin(g) | n.transitive_fanout(g)) - {g}:
            if c in score:
                score[c] += 1
    return _apply(n, chosen, _pick_kinds(pal, K, rng), rng, picked_scores)


def lock(n: Netlist, scheme: str, K: int, pal: Palette | str = "xnor", seed=0, **kw) -> LockRecord:
    scheme = scheme.lower()
    if scheme == "rll":
        return lock_rll(n, K, pal, seed)
    if scheme == "fll":
        return lock_fll(n, K, pal, seed, **kw)
    if scheme == "sll":
        return lock_sll(n, K, seed, pal)
    raise ValueError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Decoding key-gate types back to key bits


def decode_sequence(seq: Sequence[GateType], pal: Palette | None = None) -> int | None:
    """Key bit implied by a key-gate's local type sequence, or None if unknown.

    Single-gate kinds decode from the root type.  MUX kinds need the
    fourth element, which is the data input next to the key-driven gate: an
    inverter there means the inverted copy sits on that data input.  When
    that inverter is followed by another one the order is ambiguous and the
    result is None.
    """
    if not seq:
        return None
    kinds = pal.kinds if pal is not None else frozenset(KeyGateKind)
    root = seq[0]
    if root is G.XOR:
        return 0
    if root is G.XNOR:
        return 1
    if root is G.OR and K_.OR_KG in kinds:
        return 0
    mux = {G.AND: K_.MUX_ANDOR_KG, G.NAND: K_.MUX_NAND_KG, G.NOR: K_.MUX_NOR_KG}.get(root)
    stage = {G.AND: G.OR, G.NAND: G.NAND, G.NOR: G.NOR}.get(root)
    looks_mux = len(seq) >= 3 and seq[1] is stage and seq[2] is root
    if mux is not None and mux in kinds and looks_mux:
        if len(seq) < 4:
            return None
        inverted_here = seq[3] is G.NOT
        if inverted_here and len(seq) >= 5 and seq[4] is G.NOT:
            return None
        # MUX_NOR's key-driven gate carries the select=0 input
        if mux is K_.MUX_NOR_KG:
            return 1 if inverted_here else 0
        return 0 if inverted_here else 1
    if root is G.AND and K_.AND_KG in kinds:
        return 1
    return None
