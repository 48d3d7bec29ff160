"""Seedable local-rewrite resynthesis, constant propagation and gate-count reports.

``resynthesize`` runs ``effort`` sweeps.  A sweep visits every logic gate in
an order drawn from the seed and applies the first matching rule.  Simplify
rules always apply; perturb rules (which restructure without shrinking, such
as trading an XOR and a complemented fan-in for an XNOR) are enabled per
gate by a seeded coin.  All random decisions are keyed by
``(seed, sweep, gate id)``, so two netlists that differ in one region make
the same choices everywhere else.

Set ``CHECK_EQUIVALENCE = True`` (the test suite does) to verify every call
against its input by simulation with key-inputs left free.
"""

from __future__ import annotations

import itertools
import os
import random
from dataclasses import dataclass
from typing import Callable, Mapping

from .netcore import COMPLEMENT, GateType, Netlist, NetlistEditor

G = GateType

CHECK_EQUIVALENCE = os.environ.get("LOCKBENCH_CHECK", "") not in ("", "0")

_MASK64 = (1 << 64) - 1


def _splitmix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def keyed_hash(*parts: int) -> int:
    h = 0x243F6A8885A308D3
    for p in parts:
        h = _splitmix(h ^ (int(p) & _MASK64))
    return h


# ---------------------------------------------------------------------------
# Templates and rule registry

_TT_OPS: dict[str, Callable] = {
    "AND": lambda v: int(all(v)),
    "NAND": lambda v: 1 - int(all(v)),
    "OR": lambda v: int(any(v)),
    "NOR": lambda v: 1 - int(any(v)),
    "XOR": lambda v: sum(v) % 2,
    "XNOR": lambda v: 1 - sum(v) % 2,
    "NOT": lambda v: 1 - v[0],
    "BUF": lambda v: v[0],
}


def eval_template(expr, env: Mapping[str, int]) -> int:
    if isinstance(expr, str):
        if expr in ("0", "1"):
            return int(expr)
        return env[expr]
    op, *args = expr
    return _TT_OPS[op]([eval_template(a, env) for a in args])


def _template_vars(expr, out: set) -> set:
    if isinstance(expr, str):
        if expr not in ("0", "1"):
            out.add(expr)
    else:
        for a in expr[1:]:
            _template_vars(a, out)
    return out


def templates_equivalent(pattern, replacement) -> bool:
    names = sorted(_template_vars(pattern, set()) | _template_vars(replacement, set()))
    for bits in itertools.product((0, 1), repeat=len(names)):
        env = dict(zip(names, bits))
        if eval_template(pattern, env) != eval_template(replacement, env):
            return False
    return True


@dataclass(frozen=True)
class RewriteRule:
    name: str
    direction: str  # "simplify" or "perturb"
    templates: tuple  # ((pattern, replacement), ...) checked at registration
    apply: Callable[[NetlistEditor, int, random.Random], bool]


RULES: list[RewriteRule] = []


def register(rule: RewriteRule) -> RewriteRule:
    if rule.direction not in ("simplify", "perturb"):
        raise ValueError(f"bad rule direction {rule.direction!r}")
    if not rule.templates:
        raise ValueError(f"rule {rule.name} has no templates")
    for pat, rep in rule.templates:
        if not templates_equivalent(pat, rep):
            raise ValueError(f"rule {rule.name}: template {pat} is not equivalent to {rep}")
    RULES.append(rule)
    return rule


def rule(name: str, direction: str, templates):
    def deco(fn):
        register(RewriteRule(name, direction, tuple(templates), fn))
        return fn

    return deco


# ---------------------------------------------------------------------------
# Editor helpers

MULTI = (G.AND, G.NAND, G.OR, G.NOR, G.XOR, G.XNOR)
DUAL = {G.AND: G.NOR, G.OR: G.NAND, G.NAND: G.OR, G.NOR: G.AND}
BASE = {G.AND: G.AND, G.NAND: G.AND, G.OR: G.OR, G.NOR: G.OR, G.XOR: G.XOR, G.XNOR: G.XOR}
MAX_FANIN = 4


def _sole_consumer(ed: NetlistEditor, f: int, g: int) -> bool:
    return ed.fanouts[f] == {g} and ed.fanins[g].count(f) == 1


def _replace_by(ed: NetlistEditor, g: int, x: int) -> None:
    ed.redirect(g, x)


def _make_const(ed: NetlistEditor, g: int, value: int) -> None:
    ed.set_fanins(g, [])
    ed.set_kind(g, G.CONST1 if value else G.CONST0)


def _reduce_to(ed: NetlistEditor, g: int, x: int, inverted: bool) -> None:
    """Replace gate g by wire x, or by NOT(x) reusing g's id."""
    if inverted:
        ed.set_fanins(g, [x])
        ed.set_kind(g, G.NOT)
    else:
        _replace_by(ed, g, x)


def _kind_name(k: GateType) -> str:
    return k.value


def _complement_pairs(kinds):
    return [(k, COMPLEMENT[k]) for k in kinds]


# ---------------------------------------------------------------------------
# Simplify rules


@rule("buf_elim", "simplify", [(("BUF", "a"), "a")])
def _buf_elim(ed, g, rnd):
    if ed.kind[g] is not G.BUF:
        return False
    _replace_by(ed, g, ed.fanins[g][0])
    return True


@rule("double_inverter", "simplify", [(("NOT", ("NOT", "a")), "a")])
def _double_inverter(ed, g, rnd):
    if ed.kind[g] is not G.NOT:
        return False
    f = ed.fanins[g][0]
    if ed.kind[f] is not G.NOT:
        return False
    _replace_by(ed, g, ed.fanins[f][0])
    return True


_CONST_TEMPLATES = [
    (("AND", "a", "0"), "0"), (("AND", "a", "1"), "a"), (("NAND", "a", "0"), "1"), (("NAND", "a", "1"), ("NOT", "a")),
    (("OR", "a", "1"), "1"), (("OR", "a", "0"), "a"), (("NOR", "a", "1"), "0"), (("NOR", "a", "0"), ("NOT", "a")),
    (("XOR", "a", "1"), ("NOT", "a")), (("XOR", "a", "0"), "a"), (("XNOR", "a", "1"), "a"), (("XNOR", "a", "0"), ("NOT", "a")),
    (("NOT", "0"), "1"), (("BUF", "1"), "1"), (("AND", "a", "b", "1"), ("AND", "a", "b")),
]


def fold_constants(ed: NetlistEditor, g: int) -> bool:
    """Simplify gate g if any fan-in is a constant."""
    kind = ed.kind[g]
    fan = ed.fanins[g]
    consts = [f for f in fan if ed.kind[f] in (G.CONST0, G.CONST1)]
    if not consts or kind in (G.OUTPUT, G.INPUT, G.CONST0, G.CONST1):
        return False
    cval = lambda f: 1 if ed.kind[f] is G.CONST1 else 0  # noqa: E731
    if kind in (G.NOT, G.BUF):
        v = cval(fan[0])
        _make_const(ed, g, 1 - v if kind is G.NOT else v)
        return True
    rest = [f for f in fan if ed.kind[f] not in (G.CONST0, G.CONST1)]
    if kind in (G.AND, G.NAND, G.OR, G.NOR):
        dominant = 0 if BASE[kind] is G.AND else 1
        inv = kind in (G.NAND, G.NOR)
        if any(cval(f) == dominant for f in consts):
            _make_const(ed, g, dominant ^ inv)
            return True
        if not rest:
            _make_const(ed, g, (1 - dominant) ^ inv)
        elif len(rest) == 1:
            _reduce_to(ed, g, rest[0], inv)
        else:
            ed.set_fanins(g, rest)
        return True
    parity = sum(cval(f) for f in consts) % 2
    inv = (kind is G.XNOR) ^ bool(parity)
    if not rest:
        _make_const(ed, g, int(inv))
    elif len(rest) == 1:
        _reduce_to(ed, g, rest[0], inv)
    else:
        ed.set_fanins(g, rest)
        ed.set_kind(g, G.XNOR if inv else G.XOR)
    return True


register(RewriteRule("const_prop", "simplify", tuple(_CONST_TEMPLATES), lambda ed, g, rnd: fold_constants(ed, g)))


@rule("dup_fanin", "simplify", [
    (("AND", "a", "a"), "a"), (("NAND", "a", "a"), ("NOT", "a")), (("OR", "a", "a", "b"), ("OR", "a", "b")),
    (("XOR", "a", "a"), "0"), (("XNOR", "a", "a"), "1"), (("XOR", "a", "a", "b"), "b"),
])
def _dup_fanin(ed, g, rnd):
    kind = ed.kind[g]
    fan = ed.fanins[g]
    if kind not in MULTI or len(set(fan)) == len(fan):
        return False
    if BASE[kind] is G.XOR:
        counts: dict[int, int] = {}
        for f in fan:
            counts[f] = counts.get(f, 0) + 1
        rest = [f for f in dict.fromkeys(fan) if counts[f] % 2]
        inv = kind is G.XNOR
        if not rest:
            _make_const(ed, g, int(inv))
        elif len(rest) == 1:
            _reduce_to(ed, g, rest[0], inv)
        else:
            ed.set_fanins(g, rest)
        return True
    rest = list(dict.fromkeys(fan))
    if len(rest) == 1:
        _reduce_to(ed, g, rest[0], kind in (G.NAND, G.NOR))
    else:
        ed.set_fanins(g, rest)
    return True


@rule("not_absorb", "simplify", [
    (("NOT", (k.value, "a", "b")), (COMPLEMENT[k].value, "a", "b")) for k in MULTI
])
def _not_absorb(ed, g, rnd):
    if ed.kind[g] is not G.NOT:
        return False
    f = ed.fanins[g][0]
    if ed.kind[f] not in MULTI or not _sole_consumer(ed, f, g):
        return False
    ed.set_kind(f, COMPLEMENT[ed.kind[f]])
    _replace_by(ed, g, f)
    return True


@rule("xor_absorb_in", "simplify", [
    (("XOR", ("NOT", "a"), "b"), ("XNOR", "a", "b")),
    (("XNOR", ("NOT", "a"), "b"), ("XOR", "a", "b")),
])
def _xor_absorb_in(ed, g, rnd):
    kind = ed.kind[g]
    if kind not in (G.XOR, G.XNOR):
        return False
    for f in ed.fanins[g]:
        if ed.kind[f] is G.NOT and _sole_consumer(ed, f, g):
            ed.replace_fanin(g, f, ed.fanins[f][0])
            ed.set_kind(g, COMPLEMENT[kind])
            return True
    return False


@rule("demorgan_simplify", "simplify", [
    ((k.value, ("NOT", "a"), ("NOT", "b")), (DUAL[k].value, "a", "b")) for k in DUAL
])
def _demorgan_simplify(ed, g, rnd):
    kind = ed.kind[g]
    if kind not in DUAL:
        return False
    fan = ed.fanins[g]
    if not all(ed.kind[f] is G.NOT and _sole_consumer(ed, f, g) for f in fan):
        return False
    ed.set_fanins(g, [ed.fanins[f][0] for f in fan])
    ed.set_kind(g, DUAL[kind])
    return True


@rule("dup_merge", "simplify", [((k.value, "a", "b"), (k.value, "b", "a")) for k in MULTI] + [(("NOT", "a"), ("NOT", "a"))])
def _dup_merge(ed, g, rnd):
    kind = ed.kind[g]
    if kind not in MULTI and kind is not G.NOT:
        return False
    fan = ed.fanins[g]
    sig = sorted(fan)
    for h in sorted(ed.fanouts[fan[0]]):
        if h != g and ed.kind[h] is kind and sorted(ed.fanins[h]) == sig:
            keep, drop = (h, g) if h < g else (g, h)
            _replace_by(ed, drop, keep)
            return True
    return False


_ASSOC_TEMPLATES = [
    (("AND", ("AND", "a", "b"), "c"), ("AND", "a", "b", "c")),
    (("NAND", ("AND", "a", "b"), "c"), ("NAND", "a", "b", "c")),
    (("OR", ("OR", "a", "b"), "c"), ("OR", "a", "b", "c")),
    (("NOR", ("OR", "a", "b"), "c"), ("NOR", "a", "b", "c")),
    (("XOR", ("XOR", "a", "b"), "c"), ("XOR", "a", "b", "c")),
    (("XOR", ("XNOR", "a", "b"), "c"), ("XNOR", "a", "b", "c")),
    (("XNOR", ("XNOR", "a", "b"), "c"), ("XOR", "a", "b", "c")),
]


@rule("assoc_flatten", "simplify", _ASSOC_TEMPLATES)
def _assoc_flatten(ed, g, rnd):
    kind = ed.kind[g]
    if kind not in MULTI:
        return False
    fan = ed.fanins[g]
    for f in fan:
        fk = ed.kind[f]
        ok = fk is BASE[kind] or (BASE[kind] is G.XOR and fk in (G.XOR, G.XNOR))
        if not ok or not _sole_consumer(ed, f, g):
            continue
        merged = [x for x in fan if x != f] + list(ed.fanins[f])
        if len(merged) > MAX_FANIN:
            continue
        ed.set_fanins(g, merged)
        if fk is G.XNOR:
            ed.set_kind(g, COMPLEMENT[kind])
        return True
    return False


# ---------------------------------------------------------------------------
# Perturb rules


@rule("xnor_flip_fanin", "perturb", [
    ((x.value, (k.value, "a", "b"), "c"), (COMPLEMENT[x].value, (COMPLEMENT[k].value, "a", "b"), "c"))
    for x in (G.XOR, G.XNOR) for k in MULTI
])
def _xnor_flip_fanin(ed, g, rnd):
    kind = ed.kind[g]
    if kind not in (G.XOR, G.XNOR):
        return False
    cands = [f for f in ed.fanins[g] if ed.kind[f] in MULTI and _sole_consumer(ed, f, g)]
    if not cands:
        return False
    f = cands[rnd.randrange(len(cands))]
    ed.set_kind(f, COMPLEMENT[ed.kind[f]])
    ed.set_kind(g, COMPLEMENT[kind])
    return True


@rule("xor_expand", "perturb", [
    (("XOR", "a", "b"), ("NOT", ("XNOR", "a", "b"))),
    (("XNOR", "a", "b"), ("NOT", ("XOR", "a", "b"))),
])
def _xor_expand(ed, g, rnd):
    kind = ed.kind[g]
    if kind not in (G.XOR, G.XNOR):
        return False
    ed.set_kind(g, COMPLEMENT[kind])
    h = ed.add_gate(G.NOT, (g,))
    ed.redirect(g, h, skip=(h,))
    return True


@rule("demorgan_expand", "perturb", [
    ((k.value, "a", "b"), (DUAL[k].value, ("NOT", "a"), ("NOT", "b"))) for k in DUAL
])
def _demorgan_expand(ed, g, rnd):
    kind = ed.kind[g]
    fan = ed.fanins[g]
    if kind not in DUAL or len(fan) > 3:
        return False
    ed.set_fanins(g, [ed.add_gate(G.NOT, (f,)) for f in fan])
    ed.set_kind(g, DUAL[kind])
    return True


BUBBLE = {G.OR: (G.AND, G.NAND, G.NAND), G.NAND: (G.NAND, G.OR, G.AND),
          G.AND: (G.OR, G.NOR, G.NOR), G.NOR: (G.NOR, G.AND, G.OR)}


@rule("bubble_push", "perturb", [
    (("OR", ("AND", "a", "b"), ("AND", "c", "d")), ("NAND", ("NAND", "a", "b"), ("NAND", "c", "d"))),
    (("NAND", ("NAND", "a", "b"), ("NAND", "c", "d")), ("OR", ("AND", "a", "b"), ("AND", "c", "d"))),
    (("AND", ("OR", "a", "b"), ("OR", "c", "d")), ("NOR", ("NOR", "a", "b"), ("NOR", "c", "d"))),
    (("NOR", ("NOR", "a", "b"), ("NOR", "c", "d")), ("AND", ("OR", "a", "b"), ("OR", "c", "d"))),
])
def _bubble_push(ed, g, rnd):
    kind = ed.kind[g]
    if kind not in BUBBLE:
        return False
    inner, new_outer, new_inner = BUBBLE[kind]
    fan = ed.fanins[g]
    if not all(ed.kind[f] is inner and _sole_consumer(ed, f, g) for f in fan):
        return False
    for f in fan:
        ed.set_kind(f, new_inner)
    ed.set_kind(g, new_outer)
    return True


@rule("assoc_split", "perturb", [(b, a) for a, b in _ASSOC_TEMPLATES[:5]])
def _assoc_split(ed, g, rnd):
    kind = ed.kind[g]
    fan = list(ed.fanins[g])
    if kind not in MULTI or len(fan) < 3:
        return False
    i, j = sorted(rnd.sample(range(len(fan)), 2))
    inner = ed.add_gate(BASE[kind], (fan[i], fan[j]))
    ed.set_fanins(g, [inner] + [f for k, f in enumerate(fan) if k not in (i, j)])
    return True


PERTURB_RATE = 0.2

SIMPLIFY = [r for r in RULES if r.direction == "simplify"]
PERTURB = [r for r in RULES if r.direction == "perturb"]


# ---------------------------------------------------------------------------
# Passes


def _logic(ed: NetlistEditor, g: int) -> bool:
    return ed.kind[g] not in (G.INPUT, G.OUTPUT, G.CONST0, G.CONST1)


def _seed_int(seed) -> int:
    if isinstance(seed, int):
        return seed
    return keyed_hash(*(ord(c) for c in str(seed)))


def rewrite_sweeps(
    ed: NetlistEditor, effort: int, seed, perturb_rate: float = PERTURB_RATE, region: set[int] | None = None
) -> None:
    """Run ``effort`` sweeps and a closing simplify-only sweep in place.

    ``region`` limits which gates may be rewrite roots.
    """
    s0 = _seed_int(seed)
    for sweep in range(effort + 1):
        rate = perturb_rate if sweep < effort else 0.0
        roots = [g for g in ed.ids() if _logic(ed, g) and (region is None or g in region)]
        roots.sort(key=lambda g: (keyed_hash(s0, sweep, g), g))
        for g in roots:
            if g not in ed.kind or not _logic(ed, g) or not ed.fanouts[g]:
                continue
            h = keyed_hash(s0, sweep, g, 1)
            rnd = random.Random(h)
            rules = SIMPLIFY + (PERTURB if (h >> 11) / float(1 << 53) < rate else [])
            for r in rules:
                if r.apply(ed, g, rnd):
                    break
        ed.remove_dead()


def resynthesize(n: Netlist, effort: int = 2, seed=0, perturb_rate: float = PERTURB_RATE) -> Netlist:
    """Functionally equivalent, structurally rewritten copy of ``n``.

    ``effort=0`` returns ``n`` unchanged.
    """
    if effort < 0:
        raise ValueError("effort must be >= 0")
    if effort == 0:
        return n
    ed = n.edit()
    rewrite_sweeps(ed, effort, seed, perturb_rate)
    out = ed.freeze()
    if CHECK_EQUIVALENCE:
        _check(n, out, f"resynthesize(effort={effort}, seed={seed})")
    return out


def _check(a: Netlist, b: Netlist, what: str) -> None:
    from .simeval import free_key_equivalence

    if not free_key_equivalence(a, b, n_patterns=2048, seed=12345):
        raise AssertionError(f"{what} changed the circuit function")


def propagate_in_editor(ed: NetlistEditor, start=None) -> None:
    """Fold constants to a fixpoint, then drop dead logic."""
    work = sorted(start if start is not None else [g for g in ed.ids() if ed.kind[g] in (G.CONST0, G.CONST1)])
    queue = []
    for c in work:
        queue.extend(sorted(ed.fanouts.get(c, ())))
    seen_rounds = 0
    while queue:
        seen_rounds += 1
        nxt = []
        for g in sorted(set(queue)):
            if g not in ed.kind:
                continue
            before = (ed.kind[g], tuple(ed.fanins[g]))
            consumers = sorted(ed.fanouts[g])
            if fold_constants(ed, g):
                if g in ed.kind and (ed.kind[g], tuple(ed.fanins[g])) != before:
                    nxt.extend(sorted(ed.fanouts[g]))
                # a gate reduced to a wire hands its constant/wire to its old consumers
                nxt.extend(c for c in consumers if c in ed.kind)
        queue = nxt
    ed.remove_dead()


def constant_propagate(n: Netlist, pins: Mapping[str, int]) -> Netlist:
    """Tie the named inputs to constants and simplify to a fixpoint."""
    ed = n.edit()
    consts = []
    for name, bit in pins.items():
        if not ed.has_name(name) or ed.kind[ed.by_name(name)] is not G.INPUT:
            raise KeyError(f"unknown pin {name!r}")
        pid = ed.by_name(name)
        c = ed.add_gate(G.CONST1 if int(bit) else G.CONST0)
        ed.redirect(pid, c)
        ed.remove(pid)
        consts.append(c)
    propagate_in_editor(ed)
    return ed.freeze()


def pin_without_propagation(n: Netlist, pins: Mapping[str, int]) -> Netlist:
    """Replace the named inputs by constant gates and leave the rest untouched."""
    ed = n.edit()
    for name, bit in pins.items():
        if not ed.has_name(name):
            raise KeyError(f"unknown pin {name!r}")
        pid = ed.by_name(name)
        c = ed.add_gate(G.CONST1 if int(bit) else G.CONST0)
        ed.redirect(pid, c)
        ed.remove(pid)
    return ed.freeze()


# ---------------------------------------------------------------------------
# Reports

REPORT_TYPES = (G.AND, G.NAND, G.OR, G.NOR, G.XOR, G.XNOR, G.NOT, G.BUF, G.CONST0, G.CONST1)


@dataclass(frozen=True)
class SynthReport:
    gate_count_by_type: dict
    total_gates: int
    logic_depth: int
    literal_count: int

    def vector(self) -> list[int]:
        """Counts per type in :data:`REPORT_TYPES` order, then total, depth, literals."""
        return [self.gate_count_by_type.get(t, 0) for t in REPORT_TYPES] + [
            self.total_gates, self.logic_depth, self.literal_count,
        ]

    @staticmethod
    def header() -> str:
        return ",".join([t.value.lower() for t in REPORT_TYPES] + ["total", "depth", "literals"])

    def csv_row(self) -> str:
        return ",".join(str(v) for v in self.vector())


def report(n: Netlist) -> SynthReport:
    counts: dict[GateType, int] = {}
    literals = 0
    depth: dict[int, int] = {}
    for gid in n.topological_order():
        g = n[gid]
        d = max((depth[f] for f in g.fanins), default=0)
        if g.kind in (G.INPUT, G.OUTPUT):
            depth[gid] = d
            continue
        counts[g.kind] = counts.get(g.kind, 0) + 1
        literals += len(g.fanins)
        depth[gid] = d + (0 if g.kind in (G.CONST0, G.CONST1) else 1)
    return SynthReport(counts, sum(counts.values()), max(depth.values(), default=0), literals)
