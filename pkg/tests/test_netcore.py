import time

import pytest

from lockbench import circuits
from lockbench.netcore import (
    CycleError,
    GateType,
    KeyMapping,
    NetlistError,
    neighborhood,
    parse_bench,
    parse_keyfile,
    parse_structural_verilog,
    topological_order,
    write_keyfile,
    write_netlist,
)

from helpers import isomorphic, random_dag, small_random


def test_parse_smallest_circuit():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)")
    assert n.input_names == ["a", "b"]
    assert n.output_names == ["y"]
    counts = n.type_counts()
    assert counts[GateType.AND] == 1 and counts[GateType.OUTPUT] == 1


def test_parse_undeclared_signal():
    with pytest.raises(NetlistError, match="undeclared"):
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, z)")


def test_parse_cycle():
    text = """INPUT(a)
INPUT(b)
OUTPUT(g6)
g1 = NAND(a, g2)
g2 = NAND(g1, b)
g3 = NAND(a, b)
g4 = NAND(g3, g2)
g5 = NAND(g4, g3)
g6 = NAND(g5, g4)
"""
    with pytest.raises(CycleError):
        parse_bench(text)


def test_parse_errors_carry_location():
    with pytest.raises(NetlistError) as e:
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a a")
    assert e.value.line == 3
    with pytest.raises(NetlistError, match="duplicate"):
        parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\ny = OR(a, b)")
    with pytest.raises(NetlistError, match="sequential"):
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = DFF(a)")
    with pytest.raises(NetlistError, match="cannot take"):
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a)")


def test_bench_keywords_case_insensitive_and_comments():
    n = parse_bench("# header\ninput(a)\nINPUT(b)  # trailing\noutput(y)\ny = nand(a, b)\n")
    assert n.type_counts()[GateType.NAND] == 1


def test_verilog_single_and():
    n = parse_structural_verilog("module m(a,b,y); input a,b; output y; and g0(y,a,b); endmodule")
    assert n.type_counts()[GateType.AND] == 1
    assert n.output_names == ["y"]


def test_verilog_rejects_behavioral_and_vectors():
    with pytest.raises(NetlistError, match="unsupported"):
        parse_structural_verilog("module m(a,y); input a; output y; reg r; always @(a) r = a; endmodule")
    with pytest.raises(NetlistError, match="vector"):
        parse_structural_verilog("module m(a,y); input [1:0] a; output y; endmodule")
    with pytest.raises(NetlistError, match="undeclared"):
        parse_structural_verilog("module m(a,y); input a; output y; not g(y, q); endmodule")


def test_verilog_assign_and_constants():
    n = parse_structural_verilog(
        "module m(a, y, z); input a; output y, z; wire w;\n"
        "assign w = 1'b1; and (y, a, w); assign z = a; endmodule"
    )
    c = n.type_counts()
    assert c[GateType.CONST1] == 1 and c[GateType.BUF] == 1


def test_verilog_matches_bench():
    b = circuits.c17()
    v = parse_structural_verilog(write_netlist(b, "verilog"))
    assert isomorphic(b, v)


def test_write_one_and():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)")
    text = write_netlist(n)
    assert text.count("= AND(") == 1


def test_key_inputs_written_as_inputs():
    n = parse_bench("INPUT(a)\nINPUT(k0)\nOUTPUT(y)\ny = XOR(a, k0)")
    assert n.key_names == ["k0"] and n.input_names == ["a"]
    text = write_netlist(n)
    assert "INPUT(k0)" in text
    assert parse_bench(text).key_names == ["k0"]


@pytest.mark.parametrize("seed", range(100))
def test_round_trip_random(seed):
    n = small_random(seed, n_inputs=6, n_gates=50)
    for fmt, parse in (("bench", parse_bench), ("verilog", parse_structural_verilog)):
        back = parse(write_netlist(n, fmt))
        assert isomorphic(n, back)
        # fixed point after one round trip
        assert write_netlist(parse(write_netlist(back, fmt)), fmt) == write_netlist(back, fmt)


def test_round_trip_corpus():
    for name in ("c17", "mul8", "alu16", "rnd600"):
        n = circuits.load(name)
        assert isomorphic(n, parse_bench(write_netlist(n)))


def test_output_driven_by_input_gets_buffer():
    n = parse_bench("INPUT(a)\nOUTPUT(a)\nOUTPUT(y)\ny = NOT(a)")
    text = write_netlist(n)
    back = parse_bench(text)
    assert back.output_names == ["a", "y"]
    assert isomorphic(n, back)


def test_topological_chain():
    n = parse_bench("INPUT(a)\nOUTPUT(y)\nn1 = NOT(a)\ny = NOT(n1)")
    names = [n.name_of(g) for g in topological_order(n)]
    assert names == ["a", "n1", "y", "y"]


def test_topological_diamond():
    n = parse_bench("INPUT(a)\nOUTPUT(g3)\ng1 = NOT(a)\ng2 = BUFF(a)\ng3 = AND(g1, g2)")
    order = topological_order(n)
    logic = [g for g in order if n[g].kind is not GateType.OUTPUT]
    assert n.name_of(logic[0]) == "a" and n.name_of(logic[-1]) == "g3"


def test_topological_large_random():
    n = random_dag(5, 30, 1000)
    pos = {g: i for i, g in enumerate(topological_order(n))}
    for g in n:
        for f in g.fanins:
            assert pos[f] < pos[g.id]
    assert topological_order(n) == topological_order(n)


FIG6 = """
INPUT(a)
INPUT(b)
INPUT(c)
INPUT(k0)
OUTPUT(y)
x = NAND(a, b)
kg = XOR(x, k0)
y = OR(kg, s)
s = NOT(c)
"""


def test_neighborhood_size_one():
    n = parse_bench(FIG6)
    assert neighborhood(n, n.by_name("kg"), 1) == [n.by_name("kg")]


def test_neighborhood_key_gate_fanout_sibling():
    n = parse_bench(FIG6)
    got = neighborhood(n, n.by_name("kg"), 3)
    assert [n.name_of(g) for g in got] == ["kg", "y", "s"]
    got5 = neighborhood(n, n.by_name("kg"), 5)
    assert n.by_name("k0") not in got5
    assert [n[g].kind for g in got5][:3] == [GateType.XOR, GateType.OR, GateType.NOT]


def test_neighborhood_po_only_seed():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nx = NOT(a)\ny = AND(x, b)")
    seed = n.by_name("y")
    got = neighborhood(n, seed, 5)
    assert len(got) <= 5 and got[0] == seed
    # the OUTPUT port marker, then fan-ins
    assert [n[g].kind for g in got][:2] == [GateType.AND, GateType.OUTPUT]
    assert set(n.name_of(g) for g in got[2:]) == {"x", "b", "a"}


def test_neighborhood_deterministic_and_unknown():
    n = circuits.load("rnd600")
    seed = sorted(n.gates)[300]
    assert neighborhood(n, seed, 6) == neighborhood(n, seed, 6)
    with pytest.raises(KeyError):
        neighborhood(n, 10**9, 3)


def test_keyfile_round_trip():
    m = KeyMapping((("k0", 1), ("k1", 0)))
    assert write_keyfile(m) == "k0=1\nk1=0\n"
    assert parse_keyfile(write_keyfile(m)) == m
    with pytest.raises(NetlistError):
        parse_keyfile("k0=2\n")


def test_validation_rejects_duplicate_names():
    with pytest.raises(NetlistError):
        parse_bench("INPUT(a)\nINPUT(a)\nOUTPUT(y)\ny = NOT(a)")


def test_parse_10k_under_one_second():
    text = write_netlist(circuits.load("rnd10k"), "verilog")
    t0 = time.perf_counter()
    n = parse_structural_verilog(text)
    assert time.perf_counter() - t0 < 1.0
    assert len(n) > 10_000
