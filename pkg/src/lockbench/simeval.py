"""Bit-parallel simulation, equivalence checks, HD/OER and stuck-at fault coverage.

Every signal carries a row of ``uint64`` words, 64 patterns per word.  Bits
beyond ``n_patterns`` in the last word are kept at zero by the pattern
generators and masked out of every count.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .netcore import GateType, KeyMapping, Netlist, NetlistError

WORD = 64
ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)
_EXHAUSTIVE_WORDS = [
    np.uint64(0xAAAAAAAAAAAAAAAA),
    np.uint64(0xCCCCCCCCCCCCCCCC),
    np.uint64(0xF0F0F0F0F0F0F0F0),
    np.uint64(0xFF00FF00FF00FF00),
    np.uint64(0xFFFF0000FFFF0000),
    np.uint64(0xFFFFFFFF00000000),
]


def n_words(n_patterns: int) -> int:
    return max(1, -(-n_patterns // WORD))


def tail_mask(n_patterns: int) -> np.ndarray:
    """Word mask with ones on valid pattern positions."""
    m = np.full(n_words(n_patterns), ALL_ONES, dtype=np.uint64)
    rem = n_patterns % WORD
    if rem:
        m[-1] = np.uint64((1 << rem) - 1)
    if n_patterns == 0:
        m[:] = 0
    return m


def popcount(a: np.ndarray) -> int:
    return int(np.bitwise_count(a).sum())


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator so every reported number can be replayed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class PatternBlock:
    """Input or output values for ``n_patterns`` patterns, one lane per signal."""

    lanes: dict[str, np.ndarray]
    n_patterns: int

    def __post_init__(self):
        w = n_words(self.n_patterns)
        for k, v in self.lanes.items():
            if v.shape != (w,) or v.dtype != np.uint64:
                raise ValueError(f"lane {k!r} must be a uint64 vector of {w} words")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.lanes[name]

    @property
    def names(self) -> list[str]:
        return list(self.lanes)

    def bit(self, name: str, pattern: int) -> int:
        return int((int(self.lanes[name][pattern // WORD]) >> (pattern % WORD)) & 1)

    def pattern(self, p: int) -> dict[str, int]:
        return {k: self.bit(k, p) for k in self.lanes}

    def with_lanes(self, extra: Mapping[str, np.ndarray]) -> "PatternBlock":
        return PatternBlock({**self.lanes, **extra}, self.n_patterns)

    def concat(self, other: "PatternBlock") -> "PatternBlock":
        """Append ``other``'s patterns after this block's."""
        if set(self.lanes) != set(other.lanes):
            raise ValueError("pattern blocks cover different signals")
        rows = {k: np.concatenate([unpack(self.lanes[k], self.n_patterns), unpack(other.lanes[k], other.n_patterns)]) for k in self.lanes}
        return from_bits(rows)

    @classmethod
    def random(cls, names: Iterable[str], n_patterns: int, seed) -> "PatternBlock":
        if n_patterns < 1:
            raise ValueError("need at least one pattern")
        names = list(names)
        rng = make_rng(seed)
        w = n_words(n_patterns)
        raw = rng.integers(0, np.iinfo(np.uint64).max, size=(len(names), w), dtype=np.uint64, endpoint=True)
        raw &= tail_mask(n_patterns)
        return cls({nm: raw[i] for i, nm in enumerate(names)}, n_patterns)

    @classmethod
    def exhaustive(cls, names: Iterable[str]) -> "PatternBlock":
        """All ``2**len(names)`` assignments; pattern p sets input i to bit i of p."""
        names = list(names)
        s = len(names)
        if s > 30:
            raise ValueError("too many inputs for exhaustive patterns")
        n_pat = 1 << s
        w = n_words(n_pat)
        mask = tail_mask(n_pat)
        lanes = {}
        widx = np.arange(w, dtype=np.uint64)
        for i, nm in enumerate(names):
            if i < 6:
                lane = np.full(w, _EXHAUSTIVE_WORDS[i], dtype=np.uint64)
            else:
                sel = (widx >> np.uint64(i - 6)) & np.uint64(1)
                lane = np.where(sel == 1, ALL_ONES, np.uint64(0)).astype(np.uint64)
            lanes[nm] = lane & mask
        return cls(lanes, n_pat)


def from_bits(rows: Mapping[str, Sequence[int]]) -> PatternBlock:
    """Pack explicit 0/1 sequences (all of equal length) into a block."""
    lengths = {len(v) for v in rows.values()}
    if len(lengths) != 1:
        raise ValueError("all signals need the same number of patterns")
    n = lengths.pop()
    lanes = {}
    for k, v in rows.items():
        bits = np.zeros(n_words(n) * WORD, dtype=np.uint8)
        bits[:n] = np.asarray(v, dtype=np.uint8)
        lanes[k] = np.packbits(bits.reshape(-1, 8), axis=1, bitorder="little").reshape(-1).view(np.uint64).copy()
    return PatternBlock(lanes, n)


def unpack(lane: np.ndarray, n_patterns: int) -> np.ndarray:
    return np.unpackbits(lane.view(np.uint8), bitorder="little")[:n_patterns]


# ---------------------------------------------------------------------------
# Compiled evaluation


class _Program:
    """Dense, level-grouped evaluation schedule for one netlist."""

    def __init__(self, n: Netlist):
        order = n.topological_order()
        self.index = {gid: i for i, gid in enumerate(order)}
        self.order = order
        self.kind = [n[g].kind for g in order]
        self.fanins = [tuple(self.index[f] for f in n[g].fanins) for g in order]
        self.input_rows = {n[g].name: self.index[g] for g in n.primary_inputs}
        self.key_rows = {n[g].name: self.index[g] for g in n.key_inputs}
        self.output_rows = [(n[o].name, self.index[o]) for o in n.primary_outputs]
        fo: list[list[int]] = [[] for _ in order]
        for i, fi in enumerate(self.fanins):
            for f in set(fi):
                fo[f].append(i)
        self.fanouts = [tuple(sorted(x)) for x in fo]
        level = [0] * len(order)
        for i, fi in enumerate(self.fanins):
            level[i] = 1 + max((level[f] for f in fi), default=-1)
        groups: dict[tuple[int, GateType, int], list[int]] = {}
        for i, k in enumerate(self.kind):
            if k in (GateType.INPUT,):
                continue
            groups.setdefault((level[i], k, len(self.fanins[i])), []).append(i)
        self.schedule = []
        for (lv, k, ar), idx in sorted(groups.items(), key=lambda t: (t[0][0], t[0][1].value, t[0][2])):
            out = np.asarray(idx, dtype=np.intp)
            fmat = np.asarray([self.fanins[i] for i in idx], dtype=np.intp).reshape(len(idx), ar)
            self.schedule.append((k, out, fmat))


def program(n: Netlist) -> _Program:
    p = n.__dict__.get("_sim_program")
    if p is None:
        p = _Program(n)
        n.__dict__["_sim_program"] = p
    return p


def eval_gate(kind: GateType, ins: Sequence[np.ndarray], mask: np.ndarray) -> np.ndarray:
    """Bitwise value of one gate given its fan-in lanes."""
    if kind is GateType.CONST0:
        return np.zeros_like(mask)
    if kind is GateType.CONST1:
        return mask.copy()
    if kind in (GateType.BUF, GateType.OUTPUT):
        return ins[0].copy()
    if kind is GateType.NOT:
        return ~ins[0] & mask
    v = ins[0].copy()
    if kind in (GateType.AND, GateType.NAND):
        for x in ins[1:]:
            v &= x
    elif kind in (GateType.OR, GateType.NOR):
        for x in ins[1:]:
            v |= x
    else:
        for x in ins[1:]:
            v ^= x
    if kind in (GateType.NAND, GateType.NOR, GateType.XNOR):
        v = ~v & mask
    return v


def _run_schedule(prog: _Program, values: np.ndarray, mask: np.ndarray) -> None:
    for kind, out, fmat in prog.schedule:
        if kind is GateType.CONST0:
            values[out] = 0
            continue
        if kind is GateType.CONST1:
            values[out] = mask
            continue
        v = values[fmat[:, 0]]
        if kind in (GateType.AND, GateType.NAND):
            for j in range(1, fmat.shape[1]):
                v &= values[fmat[:, j]]
        elif kind in (GateType.OR, GateType.NOR):
            for j in range(1, fmat.shape[1]):
                v |= values[fmat[:, j]]
        elif kind in (GateType.XOR, GateType.XNOR):
            for j in range(1, fmat.shape[1]):
                v ^= values[fmat[:, j]]
        if kind in (GateType.NOT, GateType.NAND, GateType.NOR, GateType.XNOR):
            v = ~v & mask
        values[out] = v


def _key_bits(n: Netlist, key) -> dict[str, int]:
    if key is None:
        return {}
    if isinstance(key, KeyMapping):
        return key.as_dict()
    if isinstance(key, Mapping):
        return {k: int(v) for k, v in key.items()}
    bits = list(key)
    if len(bits) != len(n.key_inputs):
        raise ValueError("key length does not match key-input count")
    return dict(zip(n.key_names, (int(b) for b in bits)))


def simulate_all(n: Netlist, inputs: PatternBlock, key=None) -> np.ndarray:
    """Values of every gate, rows in the netlist's topological order."""
    prog = program(n)
    w = n_words(inputs.n_patterns)
    mask = tail_mask(inputs.n_patterns)
    values = np.zeros((len(prog.order), w), dtype=np.uint64)
    for nm, row in prog.input_rows.items():
        if nm not in inputs.lanes:
            raise ValueError(f"missing assignment for input {nm!r}")
        values[row] = inputs.lanes[nm]
    bits = _key_bits(n, key)
    for nm, row in prog.key_rows.items():
        if nm in bits:
            values[row] = mask if bits[nm] else 0
        elif nm in inputs.lanes:
            values[row] = inputs.lanes[nm]
        else:
            raise ValueError(f"missing assignment for key-input {nm!r}")
    _run_schedule(prog, values, mask)
    return values


def simulate(n: Netlist, inputs: PatternBlock, key=None) -> PatternBlock:
    """Primary-output values.

    ``key`` is a :class:`KeyMapping`, a ``{name: bit}`` dict or a bit
    sequence in key-input order.  Key-inputs may instead be given as lanes
    of ``inputs`` (free keys).
    """
    values = simulate_all(n, inputs, key)
    prog = program(n)
    return PatternBlock({nm: values[row].copy() for nm, row in prog.output_rows}, inputs.n_patterns)


# ---------------------------------------------------------------------------
# Equivalence


def _check_interfaces(a: Netlist, b: Netlist) -> None:
    if set(a.input_names) != set(b.input_names):
        raise ValueError("primary-input names differ")
    if set(a.output_names) != set(b.output_names):
        raise ValueError("primary-output names differ")


def count_mismatches(a: Netlist, b: Netlist, key_a, key_b, patterns: PatternBlock) -> int:
    """Number of patterns on which any output differs."""
    _check_interfaces(a, b)
    oa = simulate(a, patterns, key_a)
    ob = simulate(b, patterns, key_b)
    diff = np.zeros(n_words(patterns.n_patterns), dtype=np.uint64)
    for nm in oa.names:
        diff |= oa[nm] ^ ob[nm]
    return popcount(diff & tail_mask(patterns.n_patterns))


def equivalence_exhaustive(a: Netlist, b: Netlist, key_a=None, key_b=None, max_inputs: int = 24) -> bool:
    """True iff every output agrees on all primary-input combinations."""
    _check_interfaces(a, b)
    if len(a.primary_inputs) > max_inputs:
        raise ValueError(f"{len(a.primary_inputs)} inputs exceed the exhaustive limit of {max_inputs}")
    pats = PatternBlock.exhaustive(a.input_names)
    return count_mismatches(a, b, key_a, key_b, pats) == 0


def equivalence_random(a: Netlist, b: Netlist, key_a=None, key_b=None, n_patterns: int = 10_000, seed=0) -> int:
    """Mismatching-pattern count over ``n_patterns`` random inputs."""
    pats = PatternBlock.random(a.input_names, n_patterns, seed)
    return count_mismatches(a, b, key_a, key_b, pats)


def equivalent(a: Netlist, b: Netlist, key_a=None, key_b=None, *, exhaustive_limit: int = 16, n_patterns: int = 10_000, seed=0) -> bool:
    """Exhaustive check on small circuits, random-pattern agreement otherwise."""
    if len(a.primary_inputs) <= exhaustive_limit:
        return equivalence_exhaustive(a, b, key_a, key_b)
    return equivalence_random(a, b, key_a, key_b, n_patterns, seed) == 0


def free_key_equivalence(a: Netlist, b: Netlist, n_patterns: int = 10_000, seed=0, exhaustive_limit: int = 16) -> bool:
    """Equivalence with key-inputs treated as ordinary free inputs.

    Used to check that rewriting preserves function for every key value.
    """
    if set(a.key_names) != set(b.key_names):
        raise ValueError("key-input names differ")
    names = a.input_names + a.key_names
    if len(names) <= exhaustive_limit:
        pats = PatternBlock.exhaustive(names)
    else:
        pats = PatternBlock.random(names, n_patterns, seed)
    return count_mismatches(a, b, None, None, pats) == 0


# ---------------------------------------------------------------------------
# HD / OER


@dataclass(frozen=True)
class CorruptionStats:
    hd: float
    oer: float
    patterns_evaluated: int
    keys_evaluated: int

    def __post_init__(self):
        if not (0.0 <= self.hd <= 1.0 and 0.0 <= self.oer <= 1.0):
            raise ValueError("hd and oer must lie in [0, 1]")

    def csv_row(self, circuit: str, scheme: str, K: int, seed) -> str:
        return f"{circuit},{scheme},{K},{seed},{self.hd:.6f},{self.oer:.6f}"


CORRUPTION_HEADER = "circuit,scheme,K,seed,hd,oer"


def random_wrong_keys(correct: Sequence[int], n_keys: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Distinct uniformly random keys, none equal to ``correct``."""
    K = len(correct)
    if K < 63 and n_keys > (1 << K) - 1:
        raise ValueError(f"cannot draw {n_keys} distinct wrong keys from a {K}-bit key space")
    corr = tuple(int(b) for b in correct)
    seen: set[tuple[int, ...]] = {corr}
    keys: list[tuple[int, ...]] = []
    if K < 20 and n_keys > (1 << K) // 2:
        # dense regime: sample without replacement from the enumerated space
        space = [tuple((v >> i) & 1 for i in range(K)) for v in range(1 << K)]
        space.remove(corr)
        idx = rng.permutation(len(space))[:n_keys]
        return [space[i] for i in idx]
    while len(keys) < n_keys:
        cand = tuple(int(b) for b in rng.integers(0, 2, size=K))
        if cand not in seen:
            seen.add(cand)
            keys.append(cand)
    return keys


def corruption(
    original: Netlist,
    locked: Netlist,
    mapping: KeyMapping,
    n_keys: int = 100,
    n_patterns: int = 10_000,
    seed=0,
) -> CorruptionStats:
    """Output corruption under random wrong keys.

    ``n_keys=0`` is a probe mode that evaluates only the correct key.
    """
    if set(original.input_names) != set(locked.input_names):
        raise ValueError("locked netlist's primary inputs do not match the original")
    if set(original.output_names) != set(locked.output_names):
        raise ValueError("locked netlist's primary outputs do not match the original")
    mapping.check_against(locked)
    rng = make_rng(seed)
    pats = PatternBlock.random(original.input_names, n_patterns, rng)
    ref = simulate(original, pats)
    mask = tail_mask(n_patterns)
    correct = [b for _, b in mapping]
    keys = [tuple(correct)] if n_keys == 0 else random_wrong_keys(correct, n_keys, rng)
    n_po = len(original.primary_outputs)
    bit_diff = 0
    pat_diff = 0
    for key in keys:
        out = simulate(locked, pats, key)
        anydiff = np.zeros_like(mask)
        for nm in ref.names:
            d = (out[nm] ^ ref[nm]) & mask
            bit_diff += popcount(d)
            anydiff |= d
        pat_diff += popcount(anydiff)
    total = len(keys) * n_patterns
    return CorruptionStats(
        hd=bit_diff / (total * n_po) if n_po else 0.0,
        oer=pat_diff / total,
        patterns_evaluated=n_patterns,
        keys_evaluated=0 if n_keys == 0 else len(keys),
    )


# ---------------------------------------------------------------------------
# Stuck-at faults


class Fault(NamedTuple):
    gate: int
    stuck: int


def all_faults(n: Netlist) -> list[Fault]:
    """Stuck-at-0/1 on every gate output except the OUTPUT port markers."""
    return [
        Fault(gid, v)
        for gid in n.topological_order()
        if n[gid].kind is not GateType.OUTPUT
        for v in (0, 1)
    ]


class FaultSimulator:
    """Event-driven single-fault simulation against a fault-free reference."""

    def __init__(self, n: Netlist, patterns: PatternBlock, key=None):
        if patterns.n_patterns < 1:
            raise ValueError("empty pattern set")
        self.n = n
        self.prog = program(n)
        self.patterns = patterns
        self.mask = tail_mask(patterns.n_patterns)
        self.good = simulate_all(n, patterns, key)
        self.po_rows = {row for _, row in self.prog.output_rows}

    def detects(self, fault: Fault) -> bool:
        return self.difference(fault) is not None

    def difference(self, fault: Fault) -> np.ndarray | None:
        """OR of all PO difference lanes, or None if the fault is not observed."""
        prog, good, mask = self.prog, self.good, self.mask
        row = prog.index[fault.gate]
        forced = mask.copy() if fault.stuck else np.zeros_like(mask)
        if np.array_equal(forced, good[row]):
            return None
        faulty = {row: forced}
        heap = list(prog.fanouts[row])
        heapq.heapify(heap)
        queued = set(heap)
        anydiff = None
        while heap:
            i = heapq.heappop(heap)
            ins = [faulty.get(f, good[f]) for f in prog.fanins[i]]
            v = eval_gate(prog.kind[i], ins, mask)
            if np.array_equal(v, good[i]):
                continue
            faulty[i] = v
            if i in self.po_rows:
                d = v ^ good[i]
                anydiff = d if anydiff is None else anydiff | d
            for c in prog.fanouts[i]:
                if c not in queued:
                    queued.add(c)
                    heapq.heappush(heap, c)
        return anydiff

    def impact(self, fault: Fault) -> int:
        """Number of (pattern, output) bits the fault flips."""
        prog, good, mask = self.prog, self.good, self.mask
        row = prog.index[fault.gate]
        forced = mask.copy() if fault.stuck else np.zeros_like(mask)
        if np.array_equal(forced, good[row]):
            return 0
        faulty = {row: forced}
        heap = list(prog.fanouts[row])
        heapq.heapify(heap)
        queued = set(heap)
        flips = 0
        while heap:
            i = heapq.heappop(heap)
            v = eval_gate(prog.kind[i], [faulty.get(f, good[f]) for f in prog.fanins[i]], mask)
            if np.array_equal(v, good[i]):
                continue
            faulty[i] = v
            if i in self.po_rows:
                flips += popcount(v ^ good[i])
            for c in prog.fanouts[i]:
                if c not in queued:
                    queued.add(c)
                    heapq.heappush(heap, c)
        return flips

    def first_detecting_pattern(self, fault: Fault) -> int | None:
        d = self.difference(fault)
        if d is None:
            return None
        bits = unpack(d, self.patterns.n_patterns)
        return int(np.flatnonzero(bits)[0])


def fault_support(n: Netlist, gid: int) -> list[int]:
    """Sources (PIs and key-inputs) that can influence whether a fault at ``gid`` is seen."""
    pos = [g for g in n.transitive_fanout(gid) if n[g].kind is GateType.OUTPUT]
    cone: set[int] = set()
    for o in pos:
        cone |= n.transitive_fanin(o)
    cone |= n.transitive_fanin(gid)
    return sorted(g for g in cone if n[g].kind is GateType.INPUT)


def exhaustive_detectable(n: Netlist, fault: Fault, support: Sequence[int] | None = None) -> tuple[bool, dict[str, int] | None]:
    """Decide a fault exhaustively over its input support.

    Returns ``(detectable, witness)``; the witness assigns every source
    (inputs outside the support are 0).
    """
    sup = fault_support(n, fault.gate) if support is None else list(support)
    names = [n.name_of(g) for g in sup]
    if not names:
        # constant cone: a single all-zero pattern decides it
        base = {nm: 0 for nm in n.input_names + n.key_names}
        block = from_bits({k: [0] for k in base})
        fs = FaultSimulator(n, block)
        return (fs.detects(fault), base if fs.detects(fault) else None)
    ex = PatternBlock.exhaustive(names)
    zero = np.zeros(n_words(ex.n_patterns), dtype=np.uint64)
    lanes = {nm: zero for nm in n.input_names + n.key_names}
    lanes.update(ex.lanes)
    fs = FaultSimulator(n, PatternBlock(lanes, ex.n_patterns))
    p = fs.first_detecting_pattern(fault)
    if p is None:
        return False, None
    witness = {nm: 0 for nm in n.input_names + n.key_names}
    witness.update(ex.pattern(p))
    return True, witness


@dataclass
class FaultReport:
    test_coverage: float
    fault_coverage: float
    total: int
    detected: int
    undetectable: int
    unknown: int
    top_up_patterns: int = 0
    undetected_faults: list[Fault] = field(default_factory=list)


class CoverageResult(NamedTuple):
    test_coverage: float
    fault_coverage: float


def fault_analysis(
    n: Netlist,
    patterns: PatternBlock,
    exhaustive_limit: int = 24,
    top_up: bool = False,
) -> FaultReport:
    """Stuck-at coverage with key-inputs treated as free inputs.

    Faults missed by ``patterns`` are classified exhaustively over their
    input support when it has at most ``exhaustive_limit`` sources; larger
    ones are counted as unknown and left out of the test-coverage
    denominator.  With ``top_up`` a detecting witness found by that search
    is added to the pattern set and the fault counts as detected.
    """
    if patterns.n_patterns < 1:
        raise ValueError("empty pattern set")
    names = n.input_names + n.key_names
    missing = [nm for nm in names if nm not in patterns.lanes]
    if missing:
        raise ValueError(f"patterns do not cover {missing[:3]}")
    faults = all_faults(n)
    fs = FaultSimulator(n, patterns)
    undetected = [f for f in faults if not fs.detects(f)]
    detected = len(faults) - len(undetected)
    undetectable = unknown = 0
    extra: list[dict[str, int]] = []
    left: list[Fault] = []
    support_cache: dict[int, list[int]] = {}
    for f in undetected:
        if extra:
            # an earlier top-up pattern may already catch this one
            block = from_bits({nm: [w[nm] for w in extra] for nm in names})
            if FaultSimulator(n, block).detects(f):
                detected += 1
                continue
        sup = support_cache.get(f.gate)
        if sup is None:
            sup = support_cache[f.gate] = fault_support(n, f.gate)
        if len(sup) > exhaustive_limit:
            unknown += 1
            left.append(f)
            continue
        ok, witness = exhaustive_detectable(n, f, sup)
        if not ok:
            undetectable += 1
        elif top_up:
            extra.append(witness)
            detected += 1
        else:
            left.append(f)
    total = len(faults)
    detectable = total - undetectable - unknown
    return FaultReport(
        test_coverage=detected / detectable if detectable else 1.0,
        fault_coverage=detected / total if total else 1.0,
        total=total,
        detected=detected,
        undetectable=undetectable,
        unknown=unknown,
        top_up_patterns=len(extra),
        undetected_faults=left,
    )


def fault_coverage(n: Netlist, patterns: PatternBlock, exhaustive_limit: int = 24, top_up: bool = False) -> CoverageResult:
    """``(test_coverage, fault_coverage)`` for single stuck-at faults."""
    r = fault_analysis(n, patterns, exhaustive_limit, top_up)
    return CoverageResult(r.test_coverage, r.fault_coverage)


def random_patterns_for(n: Netlist, n_patterns: int, seed, include_keys: bool = True) -> PatternBlock:
    names = n.input_names + (n.key_names if include_keys else [])
    return PatternBlock.random(names, n_patterns, seed)


def check_pattern_names(n: Netlist, block: PatternBlock) -> None:
    for nm in n.input_names:
        if nm not in block.lanes:
            raise NetlistError(f"missing assignment for input {nm!r}")
