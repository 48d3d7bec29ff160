"""Gate-level netlist model, BENCH / structural Verilog I/O and structural queries.

A :class:`Netlist` is immutable once built and validated.  Edits go through a
:class:`NetlistEditor`, which keeps gate ids stable and hands back a fresh,
validated netlist from :meth:`NetlistEditor.freeze`.

Primary-output ports are explicit ``OUTPUT`` gates with fan-in 1.  Their names
live in a namespace separate from internal signal names, so a port keeps its
name when the logic driving it is rewritten.
"""

from __future__ import annotations

import enum
import heapq
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence


class NetlistError(ValueError):
    """Raised for malformed netlists and parse failures."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)


class CycleError(NetlistError):
    pass


class GateType(enum.Enum):
    INPUT = "INPUT"
    OUTPUT = "OUTPUT"
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUF = "BUF"
    CONST0 = "CONST0"
    CONST1 = "CONST1"

    def __repr__(self) -> str:
        return self.value

    @property
    def is_source(self) -> bool:
        return self in (GateType.INPUT, GateType.CONST0, GateType.CONST1)

    @property
    def is_logic(self) -> bool:
        """True for gates that appear in synthesis reports."""
        return self not in (GateType.INPUT, GateType.OUTPUT)


#: Fixed vocabulary order used by the one-hot encoder.
VOCABULARY: tuple[GateType, ...] = tuple(GateType)
VOCAB_INDEX = {t: i for i, t in enumerate(VOCABULARY)}

MULTI_INPUT = frozenset(
    {GateType.AND, GateType.NAND, GateType.OR, GateType.NOR, GateType.XOR, GateType.XNOR}
)
SINGLE_INPUT = frozenset({GateType.NOT, GateType.BUF, GateType.OUTPUT})

#: Output complement of each gate type (AND <-> NAND, NOT <-> BUF, ...).
COMPLEMENT = {
    GateType.AND: GateType.NAND,
    GateType.NAND: GateType.AND,
    GateType.OR: GateType.NOR,
    GateType.NOR: GateType.OR,
    GateType.XOR: GateType.XNOR,
    GateType.XNOR: GateType.XOR,
    GateType.NOT: GateType.BUF,
    GateType.BUF: GateType.NOT,
    GateType.CONST0: GateType.CONST1,
    GateType.CONST1: GateType.CONST0,
}


def check_arity(kind: GateType, n_fanin: int) -> bool:
    if kind.is_source:
        return n_fanin == 0
    if kind in SINGLE_INPUT:
        return n_fanin == 1
    return n_fanin >= 2


@dataclass(frozen=True, slots=True)
class Gate:
    id: int
    kind: GateType
    fanins: tuple[int, ...] = ()
    name: str | None = None


class Netlist:
    """Validated combinational gate graph.

    Parameters
    ----------
    gates:
        Gates in any order; ids must be unique.
    primary_inputs, key_inputs:
        Ordered ids of ``INPUT`` gates.  Every ``INPUT`` gate must be in
        exactly one of the two lists.
    primary_outputs:
        Ordered ids of ``OUTPUT`` gates (all of them).
    """

    def __init__(
        self,
        gates: Iterable[Gate],
        primary_inputs: Sequence[int],
        primary_outputs: Sequence[int],
        key_inputs: Sequence[int] = (),
        *,
        validate: bool = True,
    ):
        self._gates: dict[int, Gate] = {}
        for g in gates:
            if g.id in self._gates:
                raise NetlistError(f"duplicate gate id {g.id}")
            self._gates[g.id] = g
        self.primary_inputs = tuple(primary_inputs)
        self.primary_outputs = tuple(primary_outputs)
        self.key_inputs = tuple(key_inputs)
        if validate:
            self.validate()

    # -- basic access -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self._gates.values())

    def __contains__(self, gid: object) -> bool:
        return gid in self._gates

    def __getitem__(self, gid: int) -> Gate:
        try:
            return self._gates[gid]
        except KeyError:
            raise KeyError(f"unknown gate id {gid}") from None

    @property
    def gates(self) -> Mapping[int, Gate]:
        return self._gates

    @cached_property
    def fanouts(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {gid: [] for gid in self._gates}
        for g in self._gates.values():
            for f in g.fanins:
                out[f].append(g.id)
        return {gid: tuple(sorted(set(v))) for gid, v in out.items()}

    @cached_property
    def _names(self) -> dict[str, int]:
        return {
            g.name: g.id
            for g in self._gates.values()
            if g.name is not None and g.kind is not GateType.OUTPUT
        }

    @cached_property
    def _ports(self) -> dict[str, int]:
        return {self._gates[o].name: o for o in self.primary_outputs}

    def by_name(self, name: str) -> int:
        """Id of the internal signal (not output port) called ``name``."""
        try:
            return self._names[name]
        except KeyError:
            raise KeyError(f"unknown signal {name!r}") from None

    def has_name(self, name: str) -> bool:
        return name in self._names

    def port(self, name: str) -> int:
        return self._ports[name]

    def name_of(self, gid: int) -> str:
        g = self._gates[gid]
        return g.name if g.name is not None else f"n{gid}"

    @property
    def input_names(self) -> list[str]:
        return [self._gates[i].name for i in self.primary_inputs]

    @property
    def output_names(self) -> list[str]:
        return [self._gates[o].name for o in self.primary_outputs]

    @property
    def key_names(self) -> list[str]:
        return [self._gates[k].name for k in self.key_inputs]

    @property
    def max_id(self) -> int:
        return max(self._gates, default=-1)

    def key_gate(self, key: int | str) -> int:
        """The gate a key-input controls.

        For composite key-gates the key drives several gates; the first
        consumer that is not an inverter or buffer (lowest id) is taken, else
        the lowest-id consumer.
        """
        kid = self.by_name(key) if isinstance(key, str) else key
        consumers = [c for c in self.fanouts[kid] if self._gates[c].kind is not GateType.OUTPUT]
        if not consumers:
            raise NetlistError(f"key-input {self.name_of(kid)!r} has no consumer")
        direct = [c for c in consumers if self._gates[c].kind not in (GateType.NOT, GateType.BUF)]
        return (direct or consumers)[0]

    def edit(self) -> "NetlistEditor":
        return NetlistEditor(self)

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        gates = self._gates
        pis, keys = set(self.primary_inputs), set(self.key_inputs)
        if len(pis) != len(self.primary_inputs) or len(keys) != len(self.key_inputs):
            raise NetlistError("repeated id in input lists")
        if pis & keys:
            raise NetlistError("a gate cannot be both primary input and key-input")
        names: set[str] = set()
        ports: set[str] = set()
        inputs_seen = set()
        outputs_seen = set()
        for g in gates.values():
            if not check_arity(g.kind, len(g.fanins)):
                raise NetlistError(
                    f"gate {g.name or g.id}: {g.kind.value} cannot have {len(g.fanins)} fan-ins"
                )
            for f in g.fanins:
                if f not in gates:
                    raise NetlistError(f"gate {g.name or g.id}: dangling fan-in {f}")
                if gates[f].kind is GateType.OUTPUT:
                    raise NetlistError(f"gate {g.name or g.id}: output port used as fan-in")
            if g.kind is GateType.INPUT:
                inputs_seen.add(g.id)
                if not g.name:
                    raise NetlistError(f"input gate {g.id} has no name")
            if g.kind is GateType.OUTPUT:
                outputs_seen.add(g.id)
                if not g.name:
                    raise NetlistError(f"output gate {g.id} has no name")
                if g.name in ports:
                    raise NetlistError(f"duplicate output port {g.name!r}")
                ports.add(g.name)
            elif g.name is not None:
                if g.name in names:
                    raise NetlistError(f"duplicate signal name {g.name!r}")
                names.add(g.name)
        if inputs_seen != pis | keys:
            raise NetlistError("INPUT gates and declared input lists disagree")
        if outputs_seen != set(self.primary_outputs) or len(self.primary_outputs) != len(outputs_seen):
            raise NetlistError("OUTPUT gates and declared output list disagree")
        self.topological_order()  # raises CycleError

    # -- structure ----------------------------------------------------------

    def topological_order(self) -> list[int]:
        return list(self._topo)

    @cached_property
    def _topo(self) -> tuple[int, ...]:
        indeg = {gid: len(set(g.fanins)) for gid, g in self._gates.items()}
        fo = self.fanouts
        heap = [gid for gid, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            gid = heapq.heappop(heap)
            order.append(gid)
            for c in fo[gid]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, c)
        if len(order) != len(self._gates):
            stuck = sorted(g for g, d in indeg.items() if d > 0)
            names = ", ".join(self.name_of(g) for g in stuck[:5])
            raise CycleError(f"combinational cycle through {names}")
        return tuple(order)

    @cached_property
    def level(self) -> dict[int, int]:
        """Logic level: sources are 0, each gate is 1 + max fan-in level."""
        lv: dict[int, int] = {}
        for gid in self._topo:
            g = self._gates[gid]
            lv[gid] = 1 + max((lv[f] for f in g.fanins), default=-1)
        return lv

    def transitive_fanout(self, gid: int) -> set[int]:
        seen, stack, fo = {gid}, [gid], self.fanouts
        while stack:
            for c in fo[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def transitive_fanin(self, gid: int) -> set[int]:
        seen, stack = {gid}, [gid]
        while stack:
            for f in self._gates[stack.pop()].fanins:
                if f not in seen:
                    seen.add(f)
                    stack.append(f)
        return seen

    def neighborhood(self, seed: int, size: int, exclude: Iterable[int] | None = None) -> list[int]:
        return neighborhood(self, seed, size, exclude)

    def type_counts(self) -> dict[GateType, int]:
        counts: dict[GateType, int] = {}
        for g in self._gates.values():
            counts[g.kind] = counts.get(g.kind, 0) + 1
        return counts

    def __repr__(self) -> str:
        return (
            f"Netlist({len(self._gates)} gates, {len(self.primary_inputs)} PI, "
            f"{len(self.key_inputs)} keys, {len(self.primary_outputs)} PO)"
        )


def topological_order(n: Netlist) -> list[int]:
    """Gate ids with every gate after its fan-ins; ties broken by lowest id."""
    return n.topological_order()


def neighborhood(n: Netlist, seed: int, size: int, exclude: Iterable[int] | None = None) -> list[int]:
    """Deterministic local region around ``seed``, at most ``size`` gates.

    Expansion starts with the seed's fan-out gates and then alternates
    fan-in / fan-out steps.  Each step walks the already-visited gates from
    most recent to oldest and appends their unvisited neighbours in the
    step's direction, each neighbour list in gate-id order.  Key-inputs are
    never visited (pass ``exclude`` to override).
    """
    if seed not in n:
        raise KeyError(f"unknown gate id {seed}")
    gates = n.gates
    fo = n.fanouts
    skip = set(n.key_inputs if exclude is None else exclude)
    return expand_region(seed, size, fo.__getitem__, lambda g: gates[g].fanins, skip)


def expand_region(seed, size, fanouts_of, fanins_of, skip) -> list[int]:
    """Traversal behind :func:`neighborhood`, over arbitrary adjacency callables."""
    if size < 1:
        raise ValueError("size must be >= 1")
    order = [seed]
    seen = {seed}
    direction_out = True
    idle = 0
    while len(order) < size and idle < 2:
        added = 0
        for gid in reversed(order[:]):
            nbrs = fanouts_of(gid) if direction_out else fanins_of(gid)
            for x in sorted(set(nbrs)):
                if x in seen or (x in skip and x != seed):
                    continue
                seen.add(x)
                order.append(x)
                added += 1
                if len(order) >= size:
                    return order
        idle = 0 if added else idle + 1
        direction_out = not direction_out
    return order


# ---------------------------------------------------------------------------
# Editing


class NetlistEditor:
    """Mutable working copy of a netlist; gate ids stay stable across edits."""

    def __init__(self, n: Netlist | None = None):
        self.kind: dict[int, GateType] = {}
        self.fanins: dict[int, list[int]] = {}
        self.name: dict[int, str | None] = {}
        self.fanouts: dict[int, set[int]] = {}
        self.primary_inputs: list[int] = []
        self.primary_outputs: list[int] = []
        self.key_inputs: list[int] = []
        self._names: dict[str, int] = {}
        self.next_id = 0
        if n is not None:
            for g in n:
                self.kind[g.id] = g.kind
                self.fanins[g.id] = list(g.fanins)
                self.name[g.id] = g.name
                self.fanouts[g.id] = set()
                if g.name is not None and g.kind is not GateType.OUTPUT:
                    self._names[g.name] = g.id
            for g in n:
                for f in g.fanins:
                    self.fanouts[f].add(g.id)
            self.primary_inputs = list(n.primary_inputs)
            self.primary_outputs = list(n.primary_outputs)
            self.key_inputs = list(n.key_inputs)
            self.next_id = n.max_id + 1

    def __contains__(self, gid: object) -> bool:
        return gid in self.kind

    def __len__(self) -> int:
        return len(self.kind)

    def ids(self) -> list[int]:
        return list(self.kind)

    def has_name(self, name: str) -> bool:
        return name in self._names

    def by_name(self, name: str) -> int:
        return self._names[name]

    def fresh_name(self, stem: str) -> str:
        i = 0
        name = stem
        while name in self._names:
            i += 1
            name = f"{stem}_{i}"
        return name

    def add_gate(self, kind: GateType, fanins: Sequence[int] = (), name: str | None = None) -> int:
        gid = self.next_id
        self.next_id += 1
        if name is not None and kind is not GateType.OUTPUT:
            if name in self._names:
                raise NetlistError(f"name collision on {name!r}")
            self._names[name] = gid
        self.kind[gid] = kind
        self.fanins[gid] = list(fanins)
        self.name[gid] = name
        self.fanouts[gid] = set()
        for f in fanins:
            self.fanouts[f].add(gid)
        return gid

    def add_input(self, name: str, key: bool = False) -> int:
        gid = self.add_gate(GateType.INPUT, (), name)
        (self.key_inputs if key else self.primary_inputs).append(gid)
        return gid

    def add_output(self, port: str, driver: int) -> int:
        gid = self.add_gate(GateType.OUTPUT, (driver,), port)
        self.primary_outputs.append(gid)
        return gid

    def set_fanins(self, gid: int, fanins: Sequence[int]) -> None:
        for f in set(self.fanins[gid]):
            self.fanouts[f].discard(gid)
        self.fanins[gid] = list(fanins)
        for f in fanins:
            self.fanouts[f].add(gid)

    def set_kind(self, gid: int, kind: GateType) -> None:
        self.kind[gid] = kind

    def replace_fanin(self, gid: int, old: int, new: int) -> None:
        self.set_fanins(gid, [new if f == old else f for f in self.fanins[gid]])

    def redirect(self, old: int, new: int, *, skip: Iterable[int] = ()) -> None:
        """Point every consumer of ``old`` (except ``skip``) at ``new``."""
        if old == new:
            return
        skipped = set(skip)
        for c in sorted(self.fanouts[old]):
            if c not in skipped:
                self.replace_fanin(c, old, new)

    def remove(self, gid: int) -> None:
        if self.fanouts[gid]:
            raise NetlistError(f"cannot remove gate {gid}: still has consumers")
        for f in set(self.fanins[gid]):
            self.fanouts[f].discard(gid)
        nm = self.name.pop(gid)
        if nm is not None and self._names.get(nm) == gid:
            del self._names[nm]
        del self.kind[gid], self.fanins[gid], self.fanouts[gid]
        for lst in (self.primary_inputs, self.key_inputs, self.primary_outputs):
            if gid in lst:
                lst.remove(gid)

    def rename(self, gid: int, name: str | None) -> None:
        old = self.name[gid]
        if old is not None and self._names.get(old) == gid:
            del self._names[old]
        if name is not None:
            if name in self._names:
                raise NetlistError(f"name collision on {name!r}")
            self._names[name] = gid
        self.name[gid] = name

    def neighborhood(self, seed: int, size: int) -> list[int]:
        return expand_region(seed, size, self.fanouts.__getitem__, self.fanins.__getitem__, set(self.key_inputs))

    def key_gate(self, kid: int) -> int:
        consumers = sorted(c for c in self.fanouts[kid] if self.kind[c] is not GateType.OUTPUT)
        if not consumers:
            raise NetlistError(f"key-input {self.name[kid]!r} has no consumer")
        direct = [c for c in consumers if self.kind[c] not in (GateType.NOT, GateType.BUF)]
        return (direct or consumers)[0]

    def remove_dead(self, protect: Iterable[int] = ()) -> int:
        """Delete logic with no path to anything; returns the number removed."""
        keep = set(protect)
        stack = [
            g for g, fo in self.fanouts.items()
            if not fo and self.kind[g] not in (GateType.INPUT, GateType.OUTPUT) and g not in keep
        ]
        removed = 0
        while stack:
            g = stack.pop()
            if g not in self.kind or self.fanouts[g] or g in keep:
                continue
            if self.kind[g] in (GateType.INPUT, GateType.OUTPUT):
                continue
            fanins = set(self.fanins[g])
            self.remove(g)
            removed += 1
            stack.extend(f for f in fanins if not self.fanouts[f])
        return removed

    def freeze(self, validate: bool = True) -> Netlist:
        gates = [
            Gate(gid, self.kind[gid], tuple(self.fanins[gid]), self.name[gid])
            for gid in sorted(self.kind)
        ]
        return Netlist(gates, self.primary_inputs, self.primary_outputs, self.key_inputs, validate=validate)


# ---------------------------------------------------------------------------
# BENCH

_BENCH_KEYWORDS = {
    "AND": GateType.AND,
    "NAND": GateType.NAND,
    "OR": GateType.OR,
    "NOR": GateType.NOR,
    "XOR": GateType.XOR,
    "XNOR": GateType.XNOR,
    "NOT": GateType.NOT,
    "INV": GateType.NOT,
    "BUF": GateType.BUF,
    "BUFF": GateType.BUF,
    "CONST0": GateType.CONST0,
    "CONST1": GateType.CONST1,
    "GND": GateType.CONST0,
    "VDD": GateType.CONST1,
}
_SEQUENTIAL = {"DFF", "DFFR", "LATCH", "DFFS"}

_IO_RE = re.compile(r"^(INPUT|OUTPUT)\s*\(\s*([^\s()]+)\s*\)\s*$", re.IGNORECASE)
_ASSIGN_RE = re.compile(r"^([^\s=()]+)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")
KEY_NAME_RE = re.compile(r"^k\d+$")


class _Builder:
    """Shared back end of the two text parsers."""

    def __init__(self, key_pattern: re.Pattern | None):
        self.key_pattern = key_pattern
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.defs: dict[str, tuple[GateType, list[str], int]] = {}
        self.lines: dict[str, int] = {}

    def add_input(self, name: str, line: int) -> None:
        if name in self.lines:
            raise NetlistError(f"duplicate definition of {name!r}", line)
        self.lines[name] = line
        self.inputs.append(name)

    def add_output(self, name: str, line: int) -> None:
        if name in self.outputs:
            raise NetlistError(f"duplicate output {name!r}", line)
        self.outputs.append(name)

    def add_def(self, name: str, kind: GateType, args: list[str], line: int) -> None:
        if name in self.lines:
            raise NetlistError(f"duplicate definition of {name!r}", line)
        if not check_arity(kind, len(args)):
            raise NetlistError(f"{kind.value} cannot take {len(args)} inputs", line)
        self.lines[name] = line
        self.defs[name] = (kind, args, line)

    def build(self) -> Netlist:
        ed = NetlistEditor()
        ids: dict[str, int] = {}
        for nm in self.inputs:
            is_key = bool(self.key_pattern and self.key_pattern.match(nm))
            ids[nm] = ed.add_input(nm, key=is_key)
        for nm in self.defs:
            ids[nm] = ed.add_gate(self.defs[nm][0], (), nm)
        for nm, (kind, args, line) in self.defs.items():
            fan = []
            for a in args:
                if a not in ids:
                    raise NetlistError(f"undeclared signal {a!r} used by {nm!r}", line)
                fan.append(ids[a])
            ed.set_fanins(ids[nm], fan)
        for nm in self.outputs:
            if nm not in ids:
                raise NetlistError(f"output {nm!r} is never driven")
            ed.add_output(nm, ids[nm])
        return ed.freeze()


def parse_bench(text: str, key_pattern: str | re.Pattern | None = KEY_NAME_RE) -> Netlist:
    """Parse ISCAS BENCH text.

    Inputs whose names match ``key_pattern`` (``k0``, ``k1``, ... by default)
    become key-inputs; pass ``None`` to treat every input as primary.
    """
    pat = re.compile(key_pattern) if isinstance(key_pattern, str) else key_pattern
    b = _Builder(pat)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _IO_RE.match(line)
        if m:
            (b.add_input if m.group(1).upper() == "INPUT" else b.add_output)(m.group(2), lineno)
            continue
        m = _ASSIGN_RE.match(line)
        if not m:
            col = raw.find(line) + 1
            raise NetlistError(f"cannot parse {line!r}", lineno, col)
        name, kw, argtext = m.group(1), m.group(2).upper(), m.group(3)
        if kw in _SEQUENTIAL:
            raise NetlistError(f"sequential element {kw} not supported", lineno, raw.find(m.group(2)) + 1)
        if kw not in _BENCH_KEYWORDS:
            raise NetlistError(f"unknown gate type {m.group(2)!r}", lineno, raw.find(m.group(2)) + 1)
        args = [a.strip() for a in argtext.split(",")] if argtext.strip() else []
        if any(not a for a in args):
            raise NetlistError("empty argument", lineno, raw.find("(") + 1)
        b.add_def(name, _BENCH_KEYWORDS[kw], args, lineno)
    return b.build()


# ---------------------------------------------------------------------------
# Structural Verilog subset

_V_PRIMS = {
    "and": GateType.AND,
    "nand": GateType.NAND,
    "or": GateType.OR,
    "nor": GateType.NOR,
    "xor": GateType.XOR,
    "xnor": GateType.XNOR,
    "not": GateType.NOT,
    "buf": GateType.BUF,
}
_V_UNSUPPORTED = {
    "always", "initial", "reg", "integer", "function", "task", "generate", "posedge",
    "negedge", "begin", "end", "if", "case", "parameter", "localparam", "for",
}
_V_TOKEN = re.compile(
    r"\s+|//[^\n]*|/\*.*?\*/|(\\\S+)|([A-Za-z_][A-Za-z0-9_$]*)|(\d+'[bB][01]|\d+)|(.)",
    re.DOTALL,
)


def _verilog_tokens(text: str) -> list[tuple[str, int]]:
    toks = []
    line = 1
    for m in _V_TOKEN.finditer(text):
        s = m.group(0)
        if m.group(1):
            toks.append((m.group(1)[1:], line))
        elif m.group(2) or m.group(3) or m.group(4):
            toks.append((s, line))
        line += s.count("\n")
    return toks


def parse_structural_verilog(text: str, key_pattern: str | re.Pattern | None = KEY_NAME_RE) -> Netlist:
    """Parse a single gate-level Verilog module built from primitives.

    Supports ``input``/``output``/``wire`` declarations, primitive
    instantiations with the output as first port (``nand g1(y, a, b);``,
    instance name optional) and ``assign y = a;`` / ``assign y = 1'b0;``.
    """
    pat = re.compile(key_pattern) if isinstance(key_pattern, str) else key_pattern
    toks = _verilog_tokens(text)
    stmts: list[list[tuple[str, int]]] = []
    cur: list[tuple[str, int]] = []
    for t in toks:
        if t[0] == ";":
            stmts.append(cur)
            cur = []
        elif t[0] == "endmodule":
            if cur:
                stmts.append(cur)
            cur = [t]
            stmts.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        raise NetlistError("missing ';' or 'endmodule'", cur[0][1])
    if not stmts or not stmts[0] or stmts[0][0][0] != "module":
        raise NetlistError("expected 'module'", stmts[0][0][1] if stmts and stmts[0] else 1)
    if stmts[-1][0][0] != "endmodule":
        raise NetlistError("missing 'endmodule'")
    if sum(1 for s in stmts if s and s[0][0] == "module") > 1:
        raise NetlistError("only a single module is supported")

    b = _Builder(pat)
    wires: set[str] = set()
    declared_out: list[str] = []
    assign_count = 0
    for st in stmts[1:-1]:
        if not st:
            continue
        head, line = st[0]
        words = [t for t, _ in st]
        for w, ln in st:
            if w in _V_UNSUPPORTED or w == "@":
                raise NetlistError(f"unsupported construct {w!r}", ln)
            if w == "[":
                raise NetlistError("vectors are not supported; expand buses to single bits", ln)
        if head in ("input", "output", "wire"):
            names = [w for w in words[1:] if w != ","]
            for nm in names:
                if head == "input":
                    b.add_input(nm, line)
                elif head == "output":
                    declared_out.append(nm)
                    wires.add(nm)
                else:
                    wires.add(nm)
        elif head == "assign":
            if len(words) != 4 or words[2] != "=":
                raise NetlistError("only 'assign y = x;' is supported", line)
            lhs, rhs = words[1], words[3]
            if rhs in ("1'b0", "1'B0"):
                b.add_def(lhs, GateType.CONST0, [], line)
            elif rhs in ("1'b1", "1'B1"):
                b.add_def(lhs, GateType.CONST1, [], line)
            elif rhs[0].isdigit():
                raise NetlistError(f"unsupported constant {rhs!r}", line)
            else:
                b.add_def(lhs, GateType.BUF, [rhs], line)
            assign_count += 1
        elif head.lower() in _V_PRIMS:
            kind = _V_PRIMS[head.lower()]
            i = 1
            if i < len(words) and words[i] != "(":
                i += 1  # instance name
            if i >= len(words) or words[i] != "(" or words[-1] != ")":
                raise NetlistError(f"malformed instantiation of {head}", line)
            ports = [w for w in words[i + 1:-1] if w != ","]
            if len(ports) < 2:
                raise NetlistError(f"{head} needs an output and at least one input", line)
            b.add_def(ports[0], kind, ports[1:], line)
        else:
            raise NetlistError(f"unsupported construct {head!r}", line)

    for nm in declared_out:
        b.add_output(nm, 0)
    for nm, (_, args, line) in b.defs.items():
        if nm not in wires and nm not in b.inputs:
            raise NetlistError(f"undeclared wire {nm!r}", line)
        for a in args:
            if a not in wires and a not in b.inputs:
                raise NetlistError(f"undeclared wire {a!r}", line)
    return b.build()


# ---------------------------------------------------------------------------
# Writing

_BENCH_OUT = {
    GateType.AND: "AND",
    GateType.NAND: "NAND",
    GateType.OR: "OR",
    GateType.NOR: "NOR",
    GateType.XOR: "XOR",
    GateType.XNOR: "XNOR",
    GateType.NOT: "NOT",
    GateType.BUF: "BUFF",
    GateType.CONST0: "CONST0",
    GateType.CONST1: "CONST1",
}
_V_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_$]*$")


def _emit_names(n: Netlist) -> tuple[dict[int, str], list[tuple[str, int]]]:
    """Pick printable signal names.

    Each output port claims the name of its driver when possible; otherwise
    the writer adds a buffer named after the port.  Returns the signal name
    per gate and the list of (port, driver) pairs that need such a buffer.
    """
    ports = {n[o].name for o in n.primary_outputs}
    emitted: dict[int, str] = {}
    claimed: set[str] = set()
    buffers: list[tuple[str, int]] = []
    for o in n.primary_outputs:
        port, drv = n[o].name, n[o].fanins[0]
        if drv in emitted:
            buffers.append((port, drv))
        elif n[drv].name == port or (n[drv].kind is not GateType.INPUT and (n[drv].name is None or n[drv].name not in ports)):
            emitted[drv] = port
            claimed.add(port)
        else:
            buffers.append((port, drv))
    used = set(claimed) | {p for p, _ in buffers}
    for gid in n.topological_order():
        g = n[gid]
        if g.kind is GateType.OUTPUT or gid in emitted:
            continue
        base = g.name if g.name is not None else f"n{gid}"
        nm = base
        i = 0
        while nm in used:
            i += 1
            nm = f"{base}_{i}"
        used.add(nm)
        emitted[gid] = nm
    return emitted, buffers


def write_netlist(n: Netlist, format: str = "bench") -> str:
    """Serialise to ``"bench"`` or ``"verilog"``."""
    fmt = format.lower()
    names, buffers = _emit_names(n)
    order = [g for g in n.topological_order() if n[g].kind not in (GateType.INPUT, GateType.OUTPUT)]
    if fmt == "bench":
        out = [f"# {len(n.primary_inputs)} inputs, {len(n.key_inputs)} key-inputs, "
               f"{len(n.primary_outputs)} outputs, {len(order)} gates"]
        out += [f"INPUT({names[i]})" for i in n.primary_inputs]
        out += [f"INPUT({names[k]})" for k in n.key_inputs]
        out += [f"OUTPUT({n[o].name})" for o in n.primary_outputs]
        out.append("")
        for gid in order:
            g = n[gid]
            out.append(f"{names[gid]} = {_BENCH_OUT[g.kind]}({', '.join(names[f] for f in g.fanins)})")
        for port, drv in buffers:
            out.append(f"{port} = BUFF({names[drv]})")
        return "\n".join(out) + "\n"
    if fmt == "verilog":
        def v(nm: str) -> str:
            return nm if _V_IDENT.match(nm) and nm not in _V_UNSUPPORTED and nm.lower() not in _V_PRIMS else f"\\{nm} "

        ins = [names[i] for i in n.primary_inputs] + [names[k] for k in n.key_inputs]
        outs = [n[o].name for o in n.primary_outputs]
        port_set = set(outs)
        out = [f"module top({', '.join(v(p) for p in ins + outs)});"]
        out += [f"  input {v(p)};" for p in ins]
        out += [f"  output {v(p)};" for p in outs]
        for gid in order:
            if names[gid] not in port_set:
                out.append(f"  wire {v(names[gid])};")
        for i, gid in enumerate(order):
            g = n[gid]
            if g.kind is GateType.CONST0:
                out.append(f"  assign {v(names[gid])} = 1'b0;")
            elif g.kind is GateType.CONST1:
                out.append(f"  assign {v(names[gid])} = 1'b1;")
            else:
                args = ", ".join(v(x) for x in [names[gid]] + [names[f] for f in g.fanins])
                out.append(f"  {g.kind.value.lower()} g{i}({args});")
        for port, drv in buffers:
            out.append(f"  assign {v(port)} = {v(names[drv])};")
        out.append("endmodule")
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown format {format!r}")


def read_netlist(path) -> Netlist:
    """Load a ``.bench`` or ``.v`` file, choosing the parser by extension."""
    from pathlib import Path

    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() in (".v", ".sv", ".verilog"):
        return parse_structural_verilog(text)
    return parse_bench(text)


# ---------------------------------------------------------------------------
# Key files


@dataclass(frozen=True)
class KeyMapping:
    """Ordered (key-input name, correct bit) pairs."""

    bits: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [k for k, _ in self.bits]
        if len(set(names)) != len(names):
            raise ValueError("duplicate key name in mapping")
        for k, b in self.bits:
            if b not in (0, 1):
                raise ValueError(f"key bit for {k} must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __getitem__(self, name: str) -> int:
        return self.as_dict()[name]

    @property
    def names(self) -> list[str]:
        return [k for k, _ in self.bits]

    def as_dict(self) -> dict[str, int]:
        return dict(self.bits)

    def __add__(self, other: "KeyMapping") -> "KeyMapping":
        return KeyMapping(self.bits + other.bits)

    def check_against(self, n: Netlist) -> None:
        if self.names != n.key_names:
            raise ValueError("key mapping does not match the netlist's key-inputs")

    @classmethod
    def from_dict(cls, d: Mapping[str, int]) -> "KeyMapping":
        return cls(tuple((k, int(v)) for k, v in d.items()))


def write_keyfile(m: KeyMapping) -> str:
    return "".join(f"{k}={b}\n" for k, b in m.bits)


def parse_keyfile(text: str) -> KeyMapping:
    bits = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise NetlistError(f"expected name=bit, got {line!r}", lineno)
        k, v = (s.strip() for s in line.split("=", 1))
        if v not in ("0", "1"):
            raise NetlistError(f"key bit must be 0 or 1, got {v!r}", lineno)
        bits.append((k, int(v)))
    return KeyMapping(tuple(bits))
