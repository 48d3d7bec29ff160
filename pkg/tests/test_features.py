import io
import math
import random

import numpy as np
import pytest

from lockbench import circuits
from lockbench.features import (
    ChangeDictionary,
    Label,
    SubgraphSample,
    build_dictionary,
    capped,
    extract_samples,
    fisher_f1,
    label_changes,
    read_dataset,
    write_dataset,
    DatasetRow,
)
from lockbench.locker import lock_rll
from lockbench.netcore import VOCABULARY, GateType, parse_bench
from lockbench.resynth import resynthesize

from helpers import brute_f1

G = GateType


def test_sample_count_k64():
    rec = lock_rll(circuits.load("mul8"), 64, "xnor", seed=0)
    s = extract_samples(rec.locked, [3, 5, 6])
    assert len(s) == 192
    assert [x.sub_size for x in s[:3]] == [3, 5, 6]


def test_xor_key_gate_feeding_and():
    n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(k0)\nOUTPUT(y)\nx = XOR(a, k0)\ny = AND(x, b)")
    (s,) = extract_samples(n, [3])
    assert s.type_sequence[:2] == (G.XOR, G.AND)


def test_short_region_zero_padded():
    n = parse_bench("INPUT(k0)\nOUTPUT(y)\ny = NOT(k0)")
    (s,) = extract_samples(n, [3])
    assert s.type_sequence == (G.NOT, G.OUTPUT)
    v = s.one_hot
    assert v.shape == (3 * len(VOCABULARY),)
    assert v.reshape(3, -1).sum(axis=1).tolist() == [1, 1, 0]


def test_one_hot_invariant_and_root():
    rec = lock_rll(circuits.load("alu16"), 32, "cl_v4", seed=1)
    for s in extract_samples(rec.locked):
        rows = s.one_hot.reshape(s.sub_size, -1)
        assert rows.sum(axis=1).tolist() == [1] * len(s.type_sequence) + [0] * (s.sub_size - len(s.type_sequence))
        kg = rec.locked.key_gate(s.key_name)
        assert s.type_sequence[0] is rec.locked[kg].kind


def test_no_keys_is_error():
    with pytest.raises(ValueError):
        extract_samples(circuits.c17())


def test_unconsumed_key_is_error():
    n = parse_bench("INPUT(a)\nINPUT(k0)\nOUTPUT(y)\ny = NOT(a)")
    with pytest.raises(ValueError, match="no consumer"):
        extract_samples(n)


def test_labels_identical_and_effort_zero():
    rec = lock_rll(circuits.load("mul8"), 32, "xnor", seed=0)
    pre = extract_samples(rec.locked)
    post = extract_samples(resynthesize(rec.locked, 0))
    assert all(s.label is Label.UNCHANGED for s in label_changes(pre, post))


def test_label_xor_to_xnor_changed():
    a = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(k0)\nOUTPUT(y)\nx = NAND(a, b)\ny = XOR(x, k0)")
    b = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(k0)\nOUTPUT(y)\nx = AND(a, b)\ny = XNOR(x, k0)")
    (lab,) = label_changes(extract_samples(a, [3]), extract_samples(b, [3]))
    assert lab.label is Label.CHANGED


def test_label_mismatched_keys():
    a = [SubgraphSample("k0", 3, (G.XOR,))]
    b = [SubgraphSample("k1", 3, (G.XOR,))]
    with pytest.raises(ValueError):
        label_changes(a, b)


def test_label_partition_counts():
    rec = lock_rll(circuits.load("rnd600"), 64, "xnor", seed=2)
    pre = extract_samples(rec.locked)
    post = extract_samples(resynthesize(rec.locked, 2, seed=2))
    lab = label_changes(pre, post)
    assert sum(s.label is Label.CHANGED for s in lab) + sum(s.label is Label.UNCHANGED for s in lab) == 64 * 3


# Fisher


def _arrays(a, b):
    X = np.array([[v] for v in a + b], dtype=float)
    y = np.array([1] * len(a) + [0] * len(b))
    return X, y


def test_fisher_hand_value():
    X, y = _arrays([0, 2], [4, 6])
    assert fisher_f1(X=X, y=y) == pytest.approx(8.0)


def test_fisher_identical_distributions():
    X, y = _arrays([0, 1, 0, 1], [1, 0, 1, 0])
    assert fisher_f1(X=X, y=y) == 0.0


def test_fisher_degenerate_rules():
    X, y = _arrays([1, 1], [0, 0])
    assert math.isinf(fisher_f1(X=X, y=y)) and capped(fisher_f1(X=X, y=y)) == 1e9
    X, y = _arrays([1, 1], [1, 1])
    assert fisher_f1(X=X, y=y) == 0.0


def test_fisher_single_class_error():
    X, y = _arrays([1, 2], [])
    with pytest.raises(ValueError):
        fisher_f1(X=X, y=y)


@pytest.mark.parametrize("seed", range(100))
def test_fisher_matches_brute_force(seed):
    rnd = random.Random(seed)
    rows, cols = rnd.randint(4, 40), rnd.randint(1, 12)
    binary = seed % 2 == 0
    X = [[rnd.randint(0, 1) if binary else rnd.uniform(-3, 3) for _ in range(cols)] for _ in range(rows)]
    y = [1, 0] + [rnd.randint(0, 1) for _ in range(rows - 2)]
    got = fisher_f1(X=np.array(X), y=np.array(y))
    want = brute_f1(X, y)
    if math.isinf(want):
        assert math.isinf(got)
    else:
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
    # swapping the class names leaves F1 unchanged
    swapped = fisher_f1(X=np.array(X), y=1 - np.array(y))
    assert swapped == got or (math.isinf(swapped) and math.isinf(got)) or swapped == pytest.approx(got, rel=1e-12)


def test_fisher_from_samples():
    s = [SubgraphSample("k0", 3, (G.XOR,), Label.CHANGED), SubgraphSample("k1", 3, (G.XNOR,), Label.UNCHANGED)]
    assert math.isinf(fisher_f1(s))
    with pytest.raises(ValueError):
        fisher_f1([SubgraphSample("k0", 3, (G.XOR,))])


# dictionary


def test_dictionary_no_changes():
    rec = lock_rll(circuits.load("mul8"), 16, "xnor", seed=0)
    pre = extract_samples(rec.locked, [3])
    d = build_dictionary(pre, pre)
    assert len(d) == 0 and d.unchanged_U == {s.type_sequence for s in pre}


def test_dictionary_single_change_and_accumulation():
    pre = [SubgraphSample("k0", 3, (G.XOR, G.OR, G.NAND)), SubgraphSample("k1", 3, (G.XOR, G.OR, G.NAND))]
    post = [SubgraphSample("k0", 3, (G.XNOR, G.OR, G.NAND)), SubgraphSample("k1", 3, (G.XOR, G.OR, G.NAND))]
    d = build_dictionary(pre, post)
    assert d.entries == {(G.XNOR, G.OR, G.NAND): {(G.XOR, G.OR, G.NAND): 1}}
    d2 = build_dictionary(pre + [SubgraphSample("k2", 3, (G.XOR, G.OR, G.NAND))],
                          post + [SubgraphSample("k2", 3, (G.XNOR, G.OR, G.NAND))])
    assert d2.entries[(G.XNOR, G.OR, G.NAND)][(G.XOR, G.OR, G.NAND)] == 2
    assert d2.unchanged_U == {(G.XOR, G.OR, G.NAND)}


def test_dictionary_disjoint():
    pre = [SubgraphSample("k0", 3, (G.XOR,)), SubgraphSample("k1", 3, (G.XNOR,))]
    post = [SubgraphSample("k0", 3, (G.XNOR,)), SubgraphSample("k1", 3, (G.XNOR,))]
    d = build_dictionary(pre, post)
    assert set(d.entries) & d.unchanged_U == set()
    d = ChangeDictionary({(G.XOR,): {(G.XNOR,): 1}}, {(G.XOR,), (G.AND,)})
    assert d.unchanged_U == {(G.AND,)}


def test_dataset_round_trip():
    rec = lock_rll(circuits.load("add4"), 8, "cl_v4", seed=0)
    pre = extract_samples(rec.locked)
    post = label_changes(pre, extract_samples(resynthesize(rec.locked, 2, seed=1)))
    buf = io.StringIO()
    write_dataset([DatasetRow("add4", "0", s) for s in post], buf)
    text = buf.getvalue()
    assert text.startswith("# neighborhood:")
    assert text.splitlines()[1] == "circuit,instance,key,sub,label,seq,onehot"
    back = read_dataset(text)
    assert [r.sample for r in back] == post
