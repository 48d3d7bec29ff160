"""Independent reference implementations used as test oracles."""

from __future__ import annotations

import itertools
import math
import random

from lockbench.circuits import random_logic
from lockbench.netcore import GateType, Netlist

G = GateType


def eval_scalar(n: Netlist, assignment: dict[str, int]) -> dict[str, int]:
    """Single-pattern evaluator written without numpy or the compiled schedule."""
    val: dict[int, int] = {}
    for gid in n.topological_order():
        g = n[gid]
        ins = [val[f] for f in g.fanins]
        k = g.kind
        if k is GateType.INPUT:
            v = assignment[g.name]
        elif k is GateType.CONST0:
            v = 0
        elif k is GateType.CONST1:
            v = 1
        elif k in (GateType.BUF, GateType.OUTPUT):
            v = ins[0]
        elif k is GateType.NOT:
            v = 1 - ins[0]
        elif k is GateType.AND:
            v = int(all(ins))
        elif k is GateType.NAND:
            v = 1 - int(all(ins))
        elif k is GateType.OR:
            v = int(any(ins))
        elif k is GateType.NOR:
            v = 1 - int(any(ins))
        elif k is GateType.XOR:
            v = sum(ins) % 2
        else:
            v = 1 - sum(ins) % 2
        val[gid] = v
    return {n[o].name: val[o] for o in n.primary_outputs}


def all_assignments(names):
    for bits in itertools.product((0, 1), repeat=len(names)):
        yield dict(zip(names, bits))


def scalar_equivalent(a: Netlist, b: Netlist, key_a: dict, key_b: dict) -> bool:
    for asg in all_assignments(a.input_names):
        if eval_scalar(a, {**asg, **key_a}) != eval_scalar(b, {**asg, **key_b}):
            return False
    return True


def small_random(seed: int, n_inputs: int = 8, n_gates: int = 50) -> Netlist:
    return random_logic(n_inputs, n_gates, seed=seed, n_outputs=4)


def isomorphic(a: Netlist, b: Netlist) -> bool:
    """Structural equality under renaming, anchored at input and port names.

    Each gate gets a canonical id interned bottom-up from its type and the
    ids of its fan-ins (order-sensitive); OUTPUT markers take their driver's
    id.
    """
    table: dict[tuple, int] = {}

    def intern(key):
        return table.setdefault(key, len(table))

    def sigs(n: Netlist):
        s: dict[int, int] = {}
        for gid in n.topological_order():
            g = n[gid]
            if g.kind is GateType.INPUT:
                s[gid] = intern(("IN", g.name))
            elif g.kind is GateType.OUTPUT:
                s[gid] = s[g.fanins[0]]
            else:
                s[gid] = intern((g.kind.value, tuple(s[f] for f in g.fanins)))
        outs = {n[o].name: s[o] for o in n.primary_outputs}
        inner = sorted(s[g.id] for g in n if g.kind is not GateType.OUTPUT)
        return outs, inner

    return sigs(a) == sigs(b)


def random_dag(seed: int, n_inputs: int, n_gates: int) -> Netlist:
    rnd = random.Random(seed)
    return random_logic(n_inputs, n_gates, seed=rnd.randrange(1 << 30), n_outputs=max(1, n_gates // 20))


def brute_f1(X, y):
    best = 0.0
    for j in range(len(X[0])):
        a = [row[j] for row, t in zip(X, y) if t]
        b = [row[j] for row, t in zip(X, y) if not t]
        ma, mb = sum(a) / len(a), sum(b) / len(b)
        va = sum((v - ma) ** 2 for v in a) / len(a)
        vb = sum((v - mb) ** 2 for v in b) / len(b)
        num = (ma - mb) ** 2
        if num == 0:
            f = 0.0
        elif va + vb == 0:
            f = math.inf
        else:
            f = num / (va + vb)
        best = max(best, f)
    return best


def bigint_outputs(n, names, fixed, force=None):
    """All-patterns evaluation with Python integers, one bit per pattern."""
    N = 1 << len(names)
    full = (1 << N) - 1
    lanes = {}
    for i, nm in enumerate(names):
        block = (1 << (1 << i)) - 1
        period = 1 << (i + 1)
        v = 0
        for start in range(1 << i, N, period):
            v |= block << start
        lanes[nm] = v
    val = {}
    for gid in n.topological_order():
        g = n[gid]
        ins = [val[f] for f in g.fanins]
        k = g.kind
        if k is G.INPUT:
            v = fixed[g.name] * full if g.name in fixed else lanes[g.name]
        elif k is G.CONST0:
            v = 0
        elif k is G.CONST1:
            v = full
        elif k in (G.BUF, G.OUTPUT):
            v = ins[0]
        elif k is G.NOT:
            v = full ^ ins[0]
        elif k in (G.AND, G.NAND):
            v = full
            for x in ins:
                v &= x
            v = v if k is G.AND else full ^ v
        elif k in (G.OR, G.NOR):
            v = 0
            for x in ins:
                v |= x
            v = v if k is G.OR else full ^ v
        else:
            v = 0
            for x in ins:
                v ^= x
            v = v if k is G.XOR else full ^ v
        if force is not None and gid == force[0]:
            v = force[1] * full
        val[gid] = v
    return [val[o] for o in n.primary_outputs]


def oracle_redundancy(n, key, bit, cone_limit):
    """Count undetectable stuck-at faults by brute force over every free input."""
    names = [g.name for g in n if g.kind is G.INPUT and g.name != key]
    fixed = {key: bit}
    kid = n.by_name(key)
    pos = list(n.primary_outputs)

    def tfo(g):
        seen, stack = set(), [g]
        while stack:
            x = stack.pop()
            for c in n.fanouts[x]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def tfi_inputs(g):
        seen, stack = {g}, [g]
        while stack:
            x = stack.pop()
            for f in n[x].fanins:
                if f not in seen:
                    seen.add(f)
                    stack.append(f)
        return {n[x].name for x in seen if n[x].kind is G.INPUT and x != kid}

    key_seen = tfo(kid) & set(pos)
    good = bigint_outputs(n, names, fixed)
    total = 0
    for g in n:
        if g.kind in (G.OUTPUT, G.CONST0, G.CONST1) or g.id == kid:
            continue
        obs = tfo(g.id) & set(pos)
        if not obs & key_seen:
            continue
        support = set().union(*(tfi_inputs(o) for o in obs))
        if len(support) > cone_limit:
            continue
        for v in (0, 1):
            bad = bigint_outputs(n, names, fixed, (g.id, v))
            total += bad == good
    return total
