"""Logic-locking workbench: lock, resynthesize, defend and attack gate-level netlists."""

from .netcore import (
    Gate,
    GateType,
    KeyMapping,
    Netlist,
    NetlistEditor,
    NetlistError,
    neighborhood,
    parse_bench,
    parse_keyfile,
    parse_structural_verilog,
    read_netlist,
    topological_order,
    write_keyfile,
    write_netlist,
)

__version__ = "0.1.0"
