"""Built-in benchmark corpus.

c17 is reproduced gate for gate.  The remaining circuits are generated
deterministically (arithmetic blocks and NAND-heavy random logic) and sized
into the classes the experiments use: small (<= 16 inputs, exhaustively
checkable), mid-size (a few hundred to ~1500 gates) and large (10k / 25k
gates for timing checks).
"""

from __future__ import annotations

import random
from typing import Callable

from .netcore import GateType, Netlist, NetlistEditor, parse_bench

C17_BENCH = """\
# c17
INPUT(1)
INPUT(2)
INPUT(3)
INPUT(6)
INPUT(7)
OUTPUT(22)
OUTPUT(23)
10 = NAND(1, 3)
11 = NAND(3, 6)
16 = NAND(2, 11)
19 = NAND(11, 7)
22 = NAND(10, 16)
23 = NAND(16, 19)
"""


def c17() -> Netlist:
    return parse_bench(C17_BENCH)


class Builder:
    """Thin helper for writing generators with named nets."""

    def __init__(self):
        self.ed = NetlistEditor()
        self._count = 0

    def input(self, name: str) -> int:
        return self.ed.add_input(name)

    def gate(self, kind: GateType, *fanins: int) -> int:
        self._count += 1
        return self.ed.add_gate(kind, fanins, f"g{self._count}")

    def output(self, name: str, driver: int) -> None:
        self.ed.add_output(name, driver)

    def build(self) -> Netlist:
        self.ed.remove_dead()
        return self.ed.freeze()

    # composite cells in a few different gate styles
    def xor2(self, a: int, b: int, style: int = 0) -> int:
        G = GateType
        if style == 0:
            return self.gate(G.XOR, a, b)
        if style == 1:
            m = self.gate(G.NAND, a, b)
            return self.gate(G.NAND, self.gate(G.NAND, a, m), self.gate(G.NAND, b, m))
        na, nb = self.gate(G.NOT, a), self.gate(G.NOT, b)
        return self.gate(G.OR, self.gate(G.AND, a, nb), self.gate(G.AND, na, b))

    def full_adder(self, a: int, b: int, c: int, style: int = 0) -> tuple[int, int]:
        G = GateType
        p = self.xor2(a, b, style)
        s = self.xor2(p, c, style)
        if style == 1:
            co = self.gate(G.NAND, self.gate(G.NAND, a, b), self.gate(G.NAND, p, c))
        elif style == 2:
            co = self.gate(G.NOT, self.gate(G.NOR, self.gate(G.AND, a, b), self.gate(G.AND, p, c)))
        else:
            co = self.gate(G.OR, self.gate(G.AND, a, b), self.gate(G.AND, p, c))
        return s, co


def ripple_adder(bits: int, style: int = 0) -> Netlist:
    b = Builder()
    xs = [b.input(f"a{i}") for i in range(bits)]
    ys = [b.input(f"b{i}") for i in range(bits)]
    c = b.input("cin")
    for i in range(bits):
        s, c = b.full_adder(xs[i], ys[i], c, style=(style + i) % 3 if style < 0 else style)
        b.output(f"s{i}", s)
    b.output("cout", c)
    return b.build()


def array_multiplier(bits: int) -> Netlist:
    """Unsigned array multiplier with mixed adder styles."""
    G = GateType
    b = Builder()
    xs = [b.input(f"x{i}") for i in range(bits)]
    ys = [b.input(f"y{i}") for i in range(bits)]
    pp = [[b.gate(G.AND, xs[i], ys[j]) if (i + j) % 3 else b.gate(G.NOR, b.gate(G.NOT, xs[i]), b.gate(G.NOT, ys[j])) for i in range(bits)] for j in range(bits)]
    row = pp[0][:]
    outs = [row[0]]
    row = row[1:]
    for j in range(1, bits):
        carry = None
        new = []
        for i in range(bits):
            a = pp[j][i]
            x = row[i] if i < len(row) else None
            style = (i + j) % 3
            if x is None and carry is None:
                new.append(a)
                continue
            if x is None:
                s, carry = b.xor2(a, carry, style), b.gate(G.AND, a, carry)
            elif carry is None:
                s, carry = b.xor2(a, x, style), b.gate(G.AND, a, x)
            else:
                s, carry = b.full_adder(a, x, carry, style)
            new.append(s)
        if carry is not None:
            new.append(carry)
        outs.append(new[0])
        row = new[1:]
    outs.extend(row)
    for k, o in enumerate(outs):
        b.output(f"p{k}", o)
    return b.build()


def comparator(bits: int) -> Netlist:
    """Magnitude comparator: outputs a>b, a==b, a<b."""
    G = GateType
    b = Builder()
    xs = [b.input(f"a{i}") for i in range(bits)]
    ys = [b.input(f"b{i}") for i in range(bits)]
    gt = eq = None
    for i in reversed(range(bits)):
        ny = b.gate(G.NOT, ys[i])
        g_i = b.gate(G.AND, xs[i], ny)
        e_i = b.gate(G.XNOR, xs[i], ys[i])
        if gt is None:
            gt, eq = g_i, e_i
        else:
            gt = b.gate(G.OR, gt, b.gate(G.AND, eq, g_i))
            eq = b.gate(G.AND, eq, e_i)
    lt = b.gate(G.NOR, gt, eq)
    b.output("gt", gt)
    b.output("eq", eq)
    b.output("lt", lt)
    return b.build()


def parity_checker(n_data: int, n_check: int, seed: int = 1) -> Netlist:
    """Syndrome generator in the spirit of SEC circuits: XOR trees over data subsets."""
    G = GateType
    rnd = random.Random(seed)
    b = Builder()
    ds = [b.input(f"d{i}") for i in range(n_data)]
    cs = [b.input(f"c{i}") for i in range(n_check)]
    synd = []
    for j in range(n_check):
        members = [d for d in ds if rnd.random() < 0.5] or ds[:2]
        acc = cs[j]
        for m in members:
            acc = b.xor2(acc, m, rnd.randrange(3))
        synd.append(acc)
        b.output(f"s{j}", acc)
    for i, d in enumerate(ds[: min(len(ds), 8)]):
        nz = [b.gate(G.NOT, s) if (i >> k) & 1 == 0 else s for k, s in enumerate(synd[:4])]
        b.output(f"o{i}", b.xor2(d, b.gate(G.AND, *nz) if len(nz) > 1 else nz[0], 1))
    return b.build()


def alu(bits: int) -> Netlist:
    """Small ALU: op selects among add, and, or, xor."""
    G = GateType
    b = Builder()
    xs = [b.input(f"a{i}") for i in range(bits)]
    ys = [b.input(f"b{i}") for i in range(bits)]
    s0, s1 = b.input("op0"), b.input("op1")
    ns0, ns1 = b.gate(G.NOT, s0), b.gate(G.NOT, s1)
    sel = [b.gate(G.AND, ns1, ns0), b.gate(G.AND, ns1, s0), b.gate(G.AND, s1, ns0), b.gate(G.AND, s1, s0)]
    c = b.gate(G.AND, s0, s1)
    zero_terms = []
    for i in range(bits):
        sm, c = b.full_adder(xs[i], ys[i], c, i % 3)
        a_ = b.gate(G.AND, xs[i], ys[i])
        o_ = b.gate(G.NOR, b.gate(G.NOR, xs[i], ys[i]), b.gate(G.NOT, sel[3]))
        x_ = b.xor2(xs[i], ys[i], (i + 1) % 3)
        terms = [b.gate(G.NAND, sm, sel[0]), b.gate(G.NAND, a_, sel[1]), b.gate(G.NAND, x_, sel[2]), b.gate(G.NOT, o_)]
        r = b.gate(G.NAND, *terms)
        b.output(f"r{i}", r)
        zero_terms.append(r)
    b.output("cout", c)
    b.output("zero", b.gate(G.NOR, *zero_terms[:4]) if len(zero_terms) >= 4 else b.gate(G.NOR, *zero_terms))
    return b.build()


_RANDOM_WEIGHTS = [
    (GateType.NAND, 30),
    (GateType.AND, 14),
    (GateType.NOR, 12),
    (GateType.OR, 12),
    (GateType.NOT, 14),
    (GateType.XOR, 8),
    (GateType.XNOR, 4),
    (GateType.BUF, 2),
]


def random_logic(
    n_inputs: int,
    n_gates: int,
    seed: int = 0,
    max_fanin: int = 3,
    fresh_bias: float = 0.5,
    weights=None,
    n_outputs: int | None = None,
) -> Netlist:
    """ISCAS-flavoured random combinational logic.

    Each fan-in is, with probability ``fresh_bias``, a signal nobody consumes
    yet and otherwise a uniform pick among all earlier signals, which keeps
    depth logarithmic and leaves few dangling gates.  Unconsumed gates become
    outputs; when ``n_outputs`` asks for more, random internal taps are
    added, when it asks for fewer the surplus is merged through extra gates.
    """
    rnd = random.Random(seed)
    kinds, wts = zip(*(weights or _RANDOM_WEIGHTS))
    b = Builder()
    sigs = [b.input(f"i{k}") for k in range(n_inputs)]
    unused = list(sigs)
    where = {s: i for i, s in enumerate(unused)}

    def take(s):
        i = where.pop(s, None)
        if i is None:
            return
        last = unused.pop()
        if last != s:
            unused[i] = last
            where[last] = i

    for _ in range(n_gates):
        kind = rnd.choices(kinds, wts)[0]
        arity = 1 if kind in (GateType.NOT, GateType.BUF) else (2 if rnd.random() < 0.75 else rnd.randint(2, max_fanin))
        fan: list[int] = []
        while len(fan) < arity:
            if unused and rnd.random() < fresh_bias:
                s = unused[rnd.randrange(len(unused))]
            else:
                s = sigs[rnd.randrange(len(sigs))]
            if s not in fan:
                fan.append(s)
        g = b.gate(kind, *fan)
        for s in fan:
            take(s)
        sigs.append(g)
        where[g] = len(unused)
        unused.append(g)
    outs = sorted(s for s in unused if b.ed.kind[s] is not GateType.INPUT)
    if n_outputs is not None:
        internal = [s for s in sigs[n_inputs:] if s not in set(outs)]
        while len(outs) < n_outputs and internal:
            outs.append(internal.pop(rnd.randrange(len(internal))))
        while len(outs) > n_outputs:
            a, c = outs.pop(0), outs.pop(0)
            outs.append(b.gate(rnd.choice([GateType.NAND, GateType.NOR, GateType.XOR]), a, c))
    for k, o in enumerate(outs):
        b.output(f"o{k}", o)
    return b.build()


def _small_mux() -> Netlist:
    return random_logic(12, 60, seed=7, n_outputs=6)


CORPUS: dict[str, Callable[[], Netlist]] = {
    # small: <= 16 primary inputs
    "c17": c17,
    "add4": lambda: ripple_adder(4, style=-1),
    "cmp6": lambda: comparator(6),
    "rnd12": _small_mux,
    "mul4": lambda: array_multiplier(4),
    # mid-size
    "mul8": lambda: array_multiplier(8),
    "alu16": lambda: alu(16),
    "sec32": lambda: parity_checker(32, 8, seed=3),
    "rnd600": lambda: random_logic(40, 600, seed=11, n_outputs=24),
    "rnd1200": lambda: random_logic(60, 1200, seed=12, n_outputs=40),
    # large
    "rnd10k": lambda: random_logic(200, 10_000, seed=21, n_outputs=150),
    "rnd25k": lambda: random_logic(400, 25_000, seed=22, n_outputs=300),
}

SMALL = ("add4", "cmp6", "rnd12", "mul4")
MID = ("mul8", "alu16", "rnd600", "rnd1200")


def load(name: str) -> Netlist:
    """Corpus circuit by name (cached)."""
    if name not in _CACHE:
        try:
            _CACHE[name] = CORPUS[name]()
        except KeyError:
            raise KeyError(f"unknown corpus circuit {name!r}; known: {', '.join(CORPUS)}") from None
    return _CACHE[name]


_CACHE: dict[str, Netlist] = {}
