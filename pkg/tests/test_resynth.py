import pytest

from lockbench import circuits, resynth
from lockbench.locker import PALETTES, lock
from lockbench.netcore import GateType, neighborhood, parse_bench, write_netlist
from lockbench.resynth import (
    RULES,
    RewriteRule,
    constant_propagate,
    register,
    report,
    resynthesize,
    templates_equivalent,
)
from lockbench.simeval import equivalence_exhaustive

from helpers import scalar_equivalent, small_random

G = GateType


def test_check_mode_is_on():
    assert resynth.CHECK_EQUIVALENCE


@pytest.mark.parametrize("r", RULES, ids=lambda r: r.name)
def test_every_rule_template_is_equivalent(r):
    assert r.templates
    for pat, rep in r.templates:
        assert templates_equivalent(pat, rep)


def test_register_rejects_unsound_rule():
    bad = RewriteRule("bad", "simplify", ((("AND", "a", "b"), ("OR", "a", "b")),), lambda ed, g, rnd: False)
    with pytest.raises(ValueError, match="not equivalent"):
        register(bad)
    assert bad not in RULES


def test_double_inverter_removed():
    n = parse_bench("INPUT(a)\nOUTPUT(y)\nm = NOT(a)\nq = NOT(m)\ny = AND(q, a)")
    r = resynthesize(n, 1, seed=0, perturb_rate=0.0)
    assert r.type_counts().get(G.NOT, 0) == 0


def test_inverter_absorbed_into_xor():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nx = XOR(a, b)\ny = NOT(x)")
    r = resynthesize(n, 1, seed=0, perturb_rate=0.0)
    c = r.type_counts()
    assert c.get(G.XNOR) == 1 and G.NOT not in c and G.XOR not in c


def test_xor_key_gate_flip_keeps_function():
    # XOR(NAND(a,b), k) -> XNOR(AND(a,b), k) is one of the perturbations
    n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(k0)\nOUTPUT(y)\nx = NAND(a, b)\ny = XOR(x, k0)")
    kinds = set()
    for seed in range(40):
        r = resynthesize(n, 1, seed=seed, perturb_rate=0.5)
        kinds.add(r[r.key_gate("k0")].kind)
        for k in (0, 1):
            assert scalar_equivalent(n, r, {"k0": k}, {"k0": k})
    assert kinds == {G.XOR, G.XNOR}


def test_effort_zero_is_identity():
    n = circuits.load("mul8")
    assert resynthesize(n, 0, seed=5) is n


def test_negative_effort_rejected():
    with pytest.raises(ValueError):
        resynthesize(circuits.c17(), -1)


def test_deterministic():
    n = lock(circuits.load("alu16"), "rll", 32, "cl_v4", seed=1).locked
    a = resynthesize(n, 2, seed=7)
    b = resynthesize(n, 2, seed=7)
    c = resynthesize(n, 2, seed=8)
    assert write_netlist(a) == write_netlist(b)
    assert write_netlist(a) != write_netlist(c)


GRID = [(s, p) for s in ("rll", "fll", "sll") for p in PALETTES if s != "sll" or p == "xnor"]


@pytest.mark.parametrize("scheme,pal", GRID)
@pytest.mark.parametrize("name", circuits.SMALL[:3])
def test_resynthesis_preserves_function_grid(scheme, pal, name):
    n = circuits.load(name)
    for K in (8, 16):
        rec = lock(n, scheme, K, pal, seed=K)
        for effort in (1, 2, 4):
            for seed in range(10):
                r = resynthesize(rec.locked, effort, seed=seed)
                assert equivalence_exhaustive(n, r, None, rec.mapping)


@pytest.mark.parametrize("seed", range(30))
def test_resynthesis_random_netlists(seed):
    n = small_random(seed, n_inputs=6, n_gates=40)
    r = resynthesize(n, 3, seed=seed, perturb_rate=0.6)
    assert scalar_equivalent(n, r, {}, {})


def test_key_names_survive():
    rec = lock(circuits.load("mul8"), "rll", 64, "cl_v4", seed=0)
    r = resynthesize(rec.locked, 4, seed=1)
    assert r.key_names == rec.locked.key_names and r.input_names == rec.locked.input_names
    assert r.output_names == rec.locked.output_names


def test_resynthesis_changes_key_gate_neighborhoods():
    n = circuits.load("mul8")
    fracs = []
    for seed in range(10):
        rec = lock(n, "rll", 64, "xnor", seed=seed)
        r = resynthesize(rec.locked, 2, seed=seed)
        changed = 0
        for s in rec.sites:
            a = [rec.locked[g].kind for g in neighborhood(rec.locked, rec.locked.key_gate(s.key), 3)]
            b = [r[g].kind for g in neighborhood(r, r.key_gate(s.key), 3)]
            changed += a != b
        fracs.append(changed / 64)
    assert sum(fracs) / len(fracs) >= 0.10


def test_resynthesis_does_not_grow_circuit():
    n = circuits.load("rnd600")
    r = resynthesize(n, 4, seed=3)
    assert report(r).total_gates <= report(n).total_gates * 1.05


# constant propagation


def test_constant_propagate_and():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)")
    r = constant_propagate(n, {"b": 0})
    assert r.type_counts().get(G.CONST0) == 1 and G.AND not in r.type_counts()
    r = constant_propagate(n, {"b": 1})
    assert G.AND not in r.type_counts() and r.input_names == ["a"]


def test_constant_propagate_xor_key():
    n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(k0)\nOUTPUT(y)\nx = AND(a, b)\ny = XOR(x, k0)")
    right = constant_propagate(n, {"k0": 0})
    wrong = constant_propagate(n, {"k0": 1})
    assert right.type_counts().get(G.XOR) is None and right.type_counts().get(G.NOT) is None
    assert wrong.type_counts().get(G.NOT) == 1
    assert scalar_equivalent(n, wrong, {"k0": 1}, {})


def test_constant_propagate_reaches_fixpoint():
    text = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nOUTPUT(z)\n" \
           "p = OR(a, b)\nq = NAND(p, c)\nr = XNOR(q, a, b)\ny = NOT(r)\nz = AND(r, c)"
    n = parse_bench(text)
    once = constant_propagate(n, {"a": 1})
    twice = constant_propagate(once, {})
    assert write_netlist(once) == write_netlist(twice)
    assert scalar_equivalent(n, once, {"a": 1}, {})


def test_constant_propagate_everything_constant():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nm = NOR(a, b)\ny = XOR(m, a)")
    r = constant_propagate(n, {"a": 1, "b": 0})
    kinds = set(r.type_counts())
    assert kinds == {G.CONST1, G.OUTPUT}


def test_constant_propagate_unknown_pin():
    with pytest.raises(KeyError, match="unknown pin"):
        constant_propagate(circuits.c17(), {"nope": 1})


@pytest.mark.parametrize("seed", range(20))
def test_constant_propagate_random(seed):
    n = small_random(seed, n_inputs=6, n_gates=40)
    pins = {nm: (seed >> i) & 1 for i, nm in enumerate(n.input_names[:3])}
    r = constant_propagate(n, pins)
    assert scalar_equivalent(n, r, pins, {})


# reports


def test_report_single_and():
    rep = report(parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)"))
    assert rep.total_gates == 1 and rep.logic_depth == 1 and rep.literal_count == 2
    assert rep.gate_count_by_type == {G.AND: 1}


def test_report_csv_row():
    rep = report(circuits.c17())
    fields = rep.csv_row().split(",")
    assert len(fields) == len(rep.header().split(","))
    assert rep.total_gates == 6 and rep.logic_depth == 3 and rep.literal_count == 12
