"""Key-gate subgraph samples, change labels, Fisher's F1 and the change dictionary."""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from .netcore import VOCAB_INDEX, VOCABULARY, GateType, Netlist, NetlistError

SUB_SIZES = (3, 5, 6)
F1_CAP = 1e9

NEIGHBORHOOD_RULE = (
    "key-gate = lowest-id consumer of the key-input that is not NOT/BUF (else lowest-id consumer); "
    "region = key-gate, then alternating fan-out/fan-in steps from visited gates newest-first, "
    "neighbours in id order, key-inputs skipped, output ports included"
)


class Label(str, enum.Enum):
    CHANGED = "Changed"
    UNCHANGED = "Unchanged"


Seq = tuple[GateType, ...]


def encode_one_hot(seq: Sequence[GateType], sub_size: int) -> np.ndarray:
    v = np.zeros(sub_size * len(VOCABULARY), dtype=np.uint8)
    for i, t in enumerate(seq[:sub_size]):
        v[i * len(VOCABULARY) + VOCAB_INDEX[t]] = 1
    return v


@dataclass(frozen=True)
class SubgraphSample:
    key_name: str
    sub_size: int
    type_sequence: Seq
    label: Label | None = None

    @property
    def one_hot(self) -> np.ndarray:
        return encode_one_hot(self.type_sequence, self.sub_size)

    @property
    def ident(self) -> tuple[str, int]:
        return (self.key_name, self.sub_size)

    def with_label(self, label: Label | None) -> "SubgraphSample":
        return replace(self, label=label)


def seq_to_str(seq: Sequence[GateType]) -> str:
    return "|".join(t.value for t in seq)


def seq_from_str(text: str) -> Seq:
    return tuple(GateType(t) for t in text.split("|")) if text else ()


def key_sequences(n: Netlist, sub_sizes: Iterable[int] = SUB_SIZES) -> dict[tuple[str, int], Seq]:
    out = {}
    for kid in n.key_inputs:
        name = n[kid].name
        kg = n.key_gate(kid)
        for s in sub_sizes:
            out[(name, s)] = tuple(n[g].kind for g in n.neighborhood(kg, s))
    return out


def editor_sequences(ed, kid: int, sub_sizes: Iterable[int] = SUB_SIZES) -> dict[int, Seq]:
    sub_sizes = tuple(sub_sizes)
    full = tuple(ed.kind[g] for g in ed.neighborhood(ed.key_gate(kid), max(sub_sizes)))
    return {s: full[:s] for s in sub_sizes}


def extract_samples(n: Netlist, sub_sizes: Iterable[int] = SUB_SIZES) -> list[SubgraphSample]:
    """One sample per (key-input, sub size), keys in declaration order."""
    sub_sizes = tuple(sub_sizes)
    if not n.key_inputs:
        raise ValueError("netlist has no key-inputs")
    for s in sub_sizes:
        if s < 1:
            raise ValueError("sub sizes must be positive")
    gates = n.gates
    out = []
    for kid in n.key_inputs:
        name = gates[kid].name
        try:
            kg = n.key_gate(kid)
        except NetlistError as e:
            raise ValueError(str(e)) from None
        region = n.neighborhood(kg, max(sub_sizes))
        for s in sub_sizes:
            # regions are prefixes of one another, so the largest one serves all
            out.append(SubgraphSample(name, s, tuple(gates[g].kind for g in region[:s])))
    return out


def label_changes(pre: Sequence[SubgraphSample], post: Sequence[SubgraphSample]) -> list[SubgraphSample]:
    """Post samples labeled Unchanged iff their sequence equals the pre one."""
    pre_by = {s.ident: s for s in pre}
    post_ids = {s.ident for s in post}
    missing = set(pre_by) ^ post_ids
    if missing:
        raise ValueError(f"pre and post samples differ on {sorted(missing)[:5]}")
    return [
        s.with_label(Label.UNCHANGED if pre_by[s.ident].type_sequence == s.type_sequence else Label.CHANGED)
        for s in post
    ]


# ---------------------------------------------------------------------------
# Fisher's discriminant ratio


def fisher_ratios(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-feature (mu1 - mu2)^2 / (var1 + var2) with population variances.

    A zero numerator gives 0; a zero denominator with a positive numerator
    gives +inf.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    a, b = X[y], X[~y]
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both classes must be non-empty")
    num = (a.mean(axis=0) - b.mean(axis=0)) ** 2
    den = a.var(axis=0) + b.var(axis=0)
    f = np.zeros_like(num)
    pos = num > 0
    with np.errstate(divide="ignore"):
        f[pos] = np.where(den[pos] > 0, num[pos] / np.where(den[pos] > 0, den[pos], 1.0), np.inf)
    return f


def fisher_f1(samples: Sequence[SubgraphSample] | None = None, *, X=None, y=None) -> float:
    """Maximum per-feature Fisher ratio between Changed and Unchanged samples."""
    if samples is not None:
        if any(s.label is None for s in samples):
            raise ValueError("all samples must be labeled")
        X, y = samples_to_arrays(samples)
    return float(fisher_ratios(X, y).max(initial=0.0))


def capped(v: float) -> float:
    return F1_CAP if math.isinf(v) else min(v, F1_CAP)


def samples_to_arrays(samples: Sequence[SubgraphSample]) -> tuple[np.ndarray, np.ndarray]:
    """One-hot matrix and Changed indicator; samples must share a sub size."""
    sizes = {s.sub_size for s in samples}
    if len(sizes) != 1:
        raise ValueError(f"samples mix sub sizes {sorted(sizes)}")
    X = np.stack([s.one_hot for s in samples]) if samples else np.zeros((0, 0), dtype=np.uint8)
    y = np.array([s.label is Label.CHANGED for s in samples], dtype=bool)
    return X, y


# ---------------------------------------------------------------------------
# Change dictionary


@dataclass
class ChangeDictionary:
    entries: dict[Seq, Counter] = field(default_factory=dict)
    unchanged_U: set[Seq] = field(default_factory=set)

    def __post_init__(self):
        self._settle()

    def _settle(self) -> None:
        # a sequence seen both ways is kept as a change entry only
        self.unchanged_U -= set(self.entries)

    def add_change(self, post: Seq, pre: Seq, count: int = 1) -> None:
        self.entries.setdefault(tuple(post), Counter())[tuple(pre)] += count
        self.unchanged_U.discard(tuple(post))

    def add_unchanged(self, seq: Seq) -> None:
        if tuple(seq) not in self.entries:
            self.unchanged_U.add(tuple(seq))

    def most_common_pre(self, post: Seq) -> Seq | None:
        c = self.entries.get(tuple(post))
        if not c:
            return None
        return sorted(c.items(), key=lambda kv: (-kv[1], seq_to_str(kv[0])))[0][0]

    def __len__(self) -> int:
        return len(self.entries)


def build_dictionary(pre: Sequence[SubgraphSample], post: Sequence[SubgraphSample]) -> ChangeDictionary:
    pre_by = {s.ident: s for s in pre}
    d = ChangeDictionary()
    for s in label_changes(pre, post):
        if s.label is Label.CHANGED:
            d.add_change(s.type_sequence, pre_by[s.ident].type_sequence)
    for s in label_changes(pre, post):
        if s.label is Label.UNCHANGED:
            d.add_unchanged(s.type_sequence)
    return d


# ---------------------------------------------------------------------------
# Dataset CSV

DATASET_COLUMNS = ("circuit", "instance", "key", "sub", "label", "seq", "onehot")


@dataclass(frozen=True)
class DatasetRow:
    circuit: str
    instance: str
    sample: SubgraphSample


def write_dataset(rows: Iterable[DatasetRow], out: TextIO) -> None:
    out.write(f"# neighborhood: {NEIGHBORHOOD_RULE}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(DATASET_COLUMNS)
    for r in rows:
        s = r.sample
        w.writerow([
            r.circuit, r.instance, s.key_name, s.sub_size, s.label.value if s.label else "",
            seq_to_str(s.type_sequence), "".join(map(str, s.one_hot.tolist())),
        ])


def read_dataset(src: TextIO | str) -> list[DatasetRow]:
    text = src if isinstance(src, str) else src.read()
    lines = [ln for ln in io.StringIO(text) if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != DATASET_COLUMNS:
        raise ValueError(f"unexpected dataset columns {reader.fieldnames}")
    rows = []
    for d in reader:
        s = SubgraphSample(d["key"], int(d["sub"]), seq_from_str(d["seq"]), Label(d["label"]) if d["label"] else None)
        if "".join(map(str, s.one_hot.tolist())) != d["onehot"]:
            raise ValueError(f"one-hot column disagrees with seq for key {d['key']}")
        rows.append(DatasetRow(d["circuit"], d["instance"], s))
    return rows
