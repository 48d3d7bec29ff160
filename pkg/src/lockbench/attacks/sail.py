"""Change prediction plus reconstruction, turning key-gate structure into key bits."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from ..features import SUB_SIZES, DatasetRow, Label, Seq, SubgraphSample, encode_one_hot, key_sequences
from ..locker import Palette, decode_sequence, lock, palette
from ..netcore import KeyMapping, Netlist
from ..resynth import keyed_hash, resynthesize
from .forest import train_change_model
from .recon import ReconModel
from .report import AttackReport, finish

ML1_SUB = 3


@dataclass
class LabeledKey:
    """One key-gate's region types before and after, per sub size."""

    instance: str
    key: str
    pre: dict[int, Seq]
    post: dict[int, Seq]

    def changed(self, sub: int) -> bool:
        return self.pre[sub] != self.post[sub]


@dataclass
class TrainingCorpus:
    keys: list[LabeledKey] = field(default_factory=list)
    sub_sizes: tuple[int, ...] = SUB_SIZES

    def add(self, instance: str, names: Iterable[str], pre: Mapping, post: Mapping) -> None:
        for k in names:
            self.keys.append(LabeledKey(
                instance, k, {s: pre[(k, s)] for s in self.sub_sizes}, {s: post[(k, s)] for s in self.sub_sizes},
            ))

    def __len__(self) -> int:
        return len(self.keys)

    def arrays(self, sub: int) -> tuple[np.ndarray, np.ndarray]:
        X = np.stack([encode_one_hot(k.post[sub], sub) for k in self.keys])
        y = np.array([k.changed(sub) for k in self.keys], dtype=bool)
        return X, y

    def rows(self, circuit: str) -> list[DatasetRow]:
        return [
            DatasetRow(circuit, k.instance, SubgraphSample(
                k.key, s, k.post[s], Label.CHANGED if k.changed(s) else Label.UNCHANGED))
            for k in self.keys for s in self.sub_sizes
        ]


def gen_training_data(
    locked: Netlist,
    scheme: str,
    pal: Palette | str,
    n_instances: int,
    K: int,
    sub_sizes: Iterable[int] = SUB_SIZES,
    effort: int = 2,
    seed: int = 0,
) -> TrainingCorpus:
    """Relock the target with fresh keys, resynthesize, and label the new key-gates."""
    corpus = TrainingCorpus(sub_sizes=tuple(sub_sizes))
    for i in range(n_instances):
        s = keyed_hash(seed, i)
        rec = lock(locked, scheme, K, pal, seed=s)
        pre = key_sequences(rec.locked, corpus.sub_sizes)
        post = key_sequences(resynthesize(rec.locked, effort, seed=s), corpus.sub_sizes)
        corpus.add(str(i), rec.mapping.names, pre, post)
    return corpus


@dataclass
class SailModels:
    ml1: object
    recon: ReconModel
    pal: Palette
    ml1_sub: int = ML1_SUB


def train_sail(corpus: TrainingCorpus, pal: Palette | str, n_trees: int = 50, seed: int = 0,
               ml1_sub: int = ML1_SUB) -> SailModels:
    if not len(corpus):
        raise ValueError("empty training corpus")
    X, y = corpus.arrays(ml1_sub)
    ml1 = train_change_model(X, y, n_trees, seed)
    recon = ReconModel(corpus.sub_sizes)
    for k in corpus.keys:
        for s in corpus.sub_sizes:
            if k.changed(s):
                recon.add(s, k.post[s], k.pre[s])
    return SailModels(ml1, recon, palette(pal), ml1_sub)


def _coin(seed, key: str) -> int:
    return random.Random(keyed_hash(seed, *(ord(c) for c in key))).getrandbits(1)


def sail_attack(
    target: Netlist,
    models: SailModels,
    truth: KeyMapping | None = None,
    true_pre: Mapping[tuple[str, int], Seq] | None = None,
    seed: int = 0,
) -> AttackReport:
    """Guess every key bit of ``target``.

    A key-gate predicted Unchanged is decoded from its own region; one
    predicted Changed is decoded from the reconstructed pre-synthesis
    region.  Undecodable regions get a seeded coin flip at confidence 0.5.
    With ``true_pre`` the report also carries the accuracy of each stage.
    """
    subs = models.recon.sub_sizes
    posts = key_sequences(target, subs)
    names = target.key_names
    X = np.stack([encode_one_hot(posts[(k, models.ml1_sub)], models.ml1_sub) for k in names])
    pred = models.ml1.predict(X)
    rep = AttackReport({})
    ml1_hits = ml2_hits = ml2_total = 0
    for k, changed in zip(names, pred):
        mine = {s: posts[(k, s)] for s in subs}
        largest = max(subs)
        if changed:
            seq, _ = models.recon.reconstruct(mine)
            stage = "ml2"
        else:
            seq = mine[largest]
            stage = "ml1"
        bit = decode_sequence(seq, models.pal)
        if bit is None:
            bit = _coin(seed, k)
            rep.confidence[k] = 0.5
            stage += "+coin"
        else:
            rep.confidence[k] = 1.0
        rep.guesses[k] = bit
        rep.stages[k] = stage
        if true_pre is not None:
            really = true_pre[(k, models.ml1_sub)] != mine[models.ml1_sub]
            ml1_hits += bool(changed) == really
            if really:
                ml2_total += 1
                rec, _ = models.recon.reconstruct(mine)
                ml2_hits += rec[: models.ml1_sub] == true_pre[(k, models.ml1_sub)]
    if true_pre is not None:
        rep.ml1_accuracy = ml1_hits / len(names)
        rep.ml2_accuracy = ml2_hits / ml2_total if ml2_total else None
    return finish(rep, truth)


def type_decode_attack(target: Netlist, pal: Palette | str, truth: KeyMapping | None = None, seed: int = 0) -> AttackReport:
    """Read each bit straight off the key-gate region, coin-flipping when it is ambiguous."""
    pal = palette(pal)
    posts = key_sequences(target, (max(SUB_SIZES),))
    rep = AttackReport({})
    for k in target.key_names:
        bit = decode_sequence(posts[(k, max(SUB_SIZES))], pal)
        rep.stages[k] = "decode"
        if bit is None:
            bit = _coin(seed, k)
            rep.confidence[k] = 0.5
            rep.stages[k] = "decode+coin"
        else:
            rep.confidence[k] = 1.0
        rep.guesses[k] = bit
    return finish(rep, truth)
