"""Split-key locking that plants misleading key-gate structures after resynthesis.

Half the key-gates are inserted with an ordinary scheme and the netlist is
resynthesized.  Comparing key-gate regions before and after gives a
dictionary of changed structures and a set U of unchanged ones.  The other
half is then inserted so that each new key-gate either

* reproduces a changed post-synthesis structure without having changed
  (dictionary-matched), or
* becomes a member of U through one rewrite that is applied on the spot,
  so it looks untouched although it changed (U-targeted).

When the templates run out, ``fill_up`` lets later insertions reuse
templates that were already matched, in proportion to how often each
structure occurs genuinely, and finally places plain key-gates whose type
does not give the bit away where that is possible.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

from .features import (
    SUB_SIZES,
    ChangeDictionary,
    Seq,
    SubgraphSample,
    build_dictionary,
    editor_sequences,
    key_sequences,
)
from .locker import (
    LockRecord,
    Palette,
    Site,
    decode_sequence,
    insert_key_gate_editor,
    lock,
    lockable_in_editor,
    palette,
)
from .netcore import KeyMapping, Netlist, NetlistEditor
from .resynth import PERTURB, keyed_hash, resynthesize

TEMPLATE_SUB = 3
SCHEMES = ("rll", "fll", "sll")


class EmptyDictionaryError(ValueError):
    """Resynthesis changed no key-gate region, so there is nothing to imitate."""


class InsufficientSitesError(ValueError):
    pass


@dataclass(frozen=True)
class UnsailConfig:
    K: int
    scheme: str = "rll"
    palette: str = "xnor"
    effort: int = 2
    seed: int = 0
    fill_up: bool = True

    def __post_init__(self):
        if self.K <= 0 or self.K % 2:
            raise ValueError(f"K must be a positive even number, got {self.K}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        palette(self.palette)
        if self.scheme == "sll" and self.palette != "xnor":
            raise ValueError("SLL places X(N)OR key-gates only")
        if self.effort < 0:
            raise ValueError("effort must be >= 0")


ORIGINS = ("phase1", "dictionary", "U", "fill_up")


@dataclass
class UnsailRecord(LockRecord):
    """Lock record plus what an evaluator needs to label the result.

    ``pre_sequences`` holds each key-gate's region types before any change
    was applied to it: after phase-1 locking for the first half, at
    insertion time (before the targeting rewrite) for the second half.
    """

    pre_sequences: dict[tuple[str, int], Seq] = field(default_factory=dict)
    origins: dict[str, str] = field(default_factory=dict)
    templates: dict[str, Seq] = field(default_factory=dict)
    dictionary: ChangeDictionary = field(default_factory=ChangeDictionary)

    def pre_samples(self, sub_sizes=SUB_SIZES) -> list[SubgraphSample]:
        return [
            SubgraphSample(k, s, self.pre_sequences[(k, s)])
            for k in self.mapping.names for s in sub_sizes
        ]


class _Checkpoint:
    """Local snapshot of an editor; enough to undo one rewrite at ``root``."""

    def __init__(self, ed: NetlistEditor, root: int):
        region = {root, *ed.fanins[root], *ed.fanouts[root]}
        for f in ed.fanins[root]:
            region.update(ed.fanins[f])
        self.saved = {g: (ed.kind[g], list(ed.fanins[g])) for g in region}
        self.next_id = ed.next_id

    def restore(self, ed: NetlistEditor) -> None:
        new = [g for g in range(self.next_id, ed.next_id) if g in ed.kind]
        for g in new:
            ed.set_fanins(g, [])
        for g, (kind, fan) in self.saved.items():
            ed.set_kind(g, kind)
            ed.set_fanins(g, fan)
        for g in sorted(new, reverse=True):
            ed.remove(g)
        ed.next_id = self.next_id


def _region(ed: NetlistEditor, kid: int) -> set[int]:
    return set(ed.neighborhood(ed.key_gate(kid), TEMPLATE_SUB))


class _Injector:
    def __init__(self, ed: NetlistEditor, pal: Palette, d: ChangeDictionary, seed: int, lookup=None):
        self.ed = ed
        self.pal = pal
        self.kinds = pal.ordered()
        self.d = d
        self.seed = seed
        # post sequence -> Counter of pre sequences, per sub size, from phase 1
        self.lookup = lookup or {}
        self.protected: set[int] = set()
        for kid in ed.key_inputs:
            self.protected |= _region(ed, kid)

    def _site_ok(self, x: int) -> bool:
        ed = self.ed
        return x in ed.kind and bool(ed.fanouts[x]) and x not in self.protected and not (ed.fanouts[x] & self.protected)

    def _guesses(self, kid: int, path: str) -> set[int | None]:
        """Bits an attacker that learned phase-1 behaviour would likely read off this key-gate.

        ``path`` is "recon" (treated as changed and reconstructed), "decode"
        (treated as unchanged) or "both".
        """
        seqs = editor_sequences(self.ed, kid, SUB_SIZES)
        out = set()
        if path in ("decode", "both"):
            out.add(decode_sequence(seqs[max(SUB_SIZES)], self.pal))
        if path in ("recon", "both"):
            guess = None
            for s in sorted(SUB_SIZES, reverse=True):
                c = self.lookup.get(s, {}).get(seqs[s])
                if c:
                    guess = decode_sequence(c.most_common(1)[0][0], self.pal)
                    break
            out.add(guess)
        return out

    def _try_kind(self, x, kind, orient, dict_ok, u_ok):
        ed = self.ed
        ins = insert_key_gate_editor(ed, x, kind, None, true_on_one=orient)
        pre = editor_sequences(ed, ins.key_id)
        seq = pre[TEMPLATE_SUB]
        if dict_ok(seq):
            return ins, pre, seq, "dictionary", None
        kg = ed.key_gate(ins.key_id)
        created = set(ins.created)
        for root in (kg, *sorted(ed.fanouts[kg])):
            if root not in created:
                continue
            rnd = random.Random(keyed_hash(self.seed, x, 99))
            for r in PERTURB:
                cp = _Checkpoint(ed, root)
                if not r.apply(ed, root, rnd):
                    continue
                after = editor_sequences(ed, ins.key_id, (TEMPLATE_SUB,))[TEMPLATE_SUB]
                if after != seq and u_ok(after):
                    return ins, pre, after, "U", cp
                cp.restore(ed)
        ins.undo(ed)
        return None

    def try_site(self, x: int, dict_ok, u_ok, mislead: str | None = "origin"):
        """Insert at x if some kind matches an allowed template; returns the match or None.

        With ``mislead`` a match only counts when the bits an attacker would
        likely read off it are all wrong or undecidable; "origin" picks the
        reading that fits the match (reconstruction for dictionary matches),
        otherwise see ``_guesses``.  MUX kinds try both data-input orders.
        """
        rng = random.Random(keyed_hash(self.seed, x))
        kinds = list(self.kinds)
        rng.shuffle(kinds)
        for kind in kinds:
            first = bool(rng.getrandbits(1))
            for o in (first, not first) if kind.is_mux else (None,):
                hit = self._try_kind(x, kind, o, dict_ok, u_ok)
                if hit is None:
                    break  # the sequence does not depend on the order
                ins, pre, seq, origin, cp = hit
                path = ("recon" if origin == "dictionary" else "decode") if mislead == "origin" else mislead
                if mislead is None or ins.bit not in self._guesses(ins.key_id, path):
                    return ins, pre, seq, origin
                if cp is not None:
                    cp.restore(self.ed)
                ins.undo(self.ed)
        return None

    def accept(self, ins) -> None:
        self.protected |= _region(self.ed, ins.key_id)


def unsail_lock(n: Netlist, cfg: UnsailConfig) -> UnsailRecord:
    """Lock ``n`` with ``cfg.K`` keys, half of them placed to mislead change learning."""
    pal = palette(cfg.palette)
    half = cfg.K // 2
    rec1 = lock(n, cfg.scheme, half, pal, seed=cfg.seed)
    pre1 = key_sequences(rec1.locked)
    synth = resynthesize(rec1.locked, cfg.effort, seed=cfg.seed)
    post1 = key_sequences(synth, (TEMPLATE_SUB,))
    d = build_dictionary(
        [SubgraphSample(k, TEMPLATE_SUB, pre1[(k, TEMPLATE_SUB)]) for k in rec1.mapping.names],
        [SubgraphSample(k, TEMPLATE_SUB, post1[(k, TEMPLATE_SUB)]) for k in rec1.mapping.names],
    )
    if not d.entries:
        raise EmptyDictionaryError(
            f"resynthesis at effort {cfg.effort} changed no key-gate region; raise the effort"
        )

    post_all = key_sequences(synth)
    lookup: dict[int, dict[Seq, Counter]] = {}
    genuine: Counter = Counter()
    for k in rec1.mapping.names:
        for s in SUB_SIZES:
            lookup.setdefault(s, {}).setdefault(post_all[(k, s)], Counter())[pre1[(k, s)]] += 1
        genuine[post1[(k, TEMPLATE_SUB)]] += 1

    ed = synth.edit()
    inj = _Injector(ed, pal, d, keyed_hash(cfg.seed, 0x5A11), lookup)
    sites = lockable_in_editor(ed)
    random.Random(keyed_hash(cfg.seed, 1)).shuffle(sites)

    bits, new_sites = [], []
    pre_sequences = dict(pre1)
    origins = {k: "phase1" for k in rec1.mapping.names}
    templates: dict[str, Seq] = {}
    injected: Counter = Counter()

    def place(site, hit, origin):
        ins, pre, seq, _ = hit
        inj.accept(ins)
        bits.append((ins.key_name, ins.bit))
        new_sites.append(Site(ins.key_name, site, ins.kind))
        for s, q in pre.items():
            pre_sequences[(ins.key_name, s)] = q
        origins[ins.key_name] = origin
        templates[ins.key_name] = seq
        injected[seq] += 1

    def run(candidates, allowed, origin=None, dict_ok=None, u_ok=None, mislead="origin"):
        dict_ok = dict_ok or (lambda s: s in d.entries and allowed(s))
        u_ok = u_ok or (lambda s: s in d.unchanged_U and allowed(s))
        left = []
        for x in candidates:
            if len(bits) == half or not inj._site_ok(x):
                left.append(x)
                continue
            hit = inj.try_site(x, dict_ok, u_ok, mislead)
            if hit is None:
                left.append(x)
            else:
                place(x, hit, origin or hit[3])
        return left

    # every template once, then in proportion to how often phase 1 produced it
    remaining = run(sites, lambda s: s not in injected)
    if cfg.fill_up:
        r = 1
        while len(bits) < half and remaining:
            before = len(bits)
            remaining = run(remaining, lambda s, r=r: 0 < injected[s] < r * genuine[s], "fill_up",
                            mislead="origin" if r == 1 else "both")
            if len(bits) == before and not any(injected[t] >= r * genuine[t] for t in injected):
                break
            r += 1
        # out of template sites: any known sequence, then plain insertion,
        # each first where reading the region gives the wrong bit or none
        known = set(d.entries) | d.unchanged_U
        never = lambda s: False  # noqa: E731
        for mislead in ("both", None):
            remaining = run(remaining, None, "fill_up", lambda s: s in known, never, mislead)
            remaining = run(remaining, None, "fill_up", lambda s: True, never, mislead)

    if len(bits) < half:
        raise InsufficientSitesError(
            f"placed {len(bits)} of {half} second-phase key-gates"
            + ("" if cfg.fill_up else "; fill_up is disabled")
        )
    locked = ed.freeze()
    mapping = rec1.mapping + KeyMapping(tuple(bits))
    return UnsailRecord(
        locked, mapping, list(rec1.sites) + new_sites, list(rec1.scores),
        pre_sequences=pre_sequences, origins=origins, templates=templates, dictionary=d,
    )


def injection_stats(record: UnsailRecord, dictionary: ChangeDictionary | None = None) -> tuple[int, int, int]:
    """(dictionary-matched, U-targeted, fill-up) counts of the second-phase key-gates."""
    d = dictionary if dictionary is not None else record.dictionary
    n_dict = n_u = n_fill = 0
    for k, origin in record.origins.items():
        if origin == "dictionary":
            if record.templates[k] not in d.entries:
                raise ValueError(f"{k} is not matched to a dictionary entry")
            n_dict += 1
        elif origin == "U":
            n_u += 1
        elif origin == "fill_up":
            n_fill += 1
    return n_dict, n_u, n_fill


STATS_HEADER = "circuit,K,scheme,palette,effort,seed,dictionary_matched,u_targeted,fill_up,dictionary_entries,u_size"


def stats_row(circuit: str, cfg: UnsailConfig, record: UnsailRecord) -> str:
    a, b, c = injection_stats(record)
    return ",".join(str(v) for v in (
        circuit, cfg.K, cfg.scheme, cfg.palette, cfg.effort, cfg.seed, a, b, c,
        len(record.dictionary.entries), len(record.dictionary.unchanged_U),
    ))
