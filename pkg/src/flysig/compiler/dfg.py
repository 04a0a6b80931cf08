"""Dataflow graphs: text format, validation, structure counts, reference interpreter.

Grammar (one statement per line, ``#`` comments)::

    dfg <name> width=<W>
    in <id>
    const <id> = <int>
    op <id> = add <src> <src>
    op <id> = sub <src> <src>            # src0 - src1
    op <id> = mulc <src> <int>
    reg <id> = <src> [init=<int>]        # init: one-sample delay; none: pipeline register
    reg <id> = <src> shift=<k>           # k zero-initialised bit stages: x * 2**k
    out <id> = <src>

Sources may be referenced before they are defined, so feedback is written
directly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import networkx as nx

from ..dualrail import to_signed
from ..kernel import SimulationError

NODE_KINDS = ("INPUT", "OUTPUT", "CONST", "ADD", "SUB", "MUL_CONST", "DELAY")
_ID = r"[A-Za-z_][\w.]*"


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    srcs: tuple[str, ...] = ()
    value: int | None = None  # CONST value, MUL_CONST constant, DELAY init
    shift: int = 0  # DELAY only: bit-level shift register length
    line: int = 0

    @property
    def is_word_delay(self) -> bool:
        """A sample delay: the only node that breaks a combinational cycle."""
        return self.kind == "DELAY" and self.shift == 0 and self.value is not None

    @property
    def initialized(self) -> bool:
        return self.kind == "DELAY" and (self.value is not None or self.shift > 0)


@dataclass
class Dfg:
    name: str
    width: int
    nodes: dict[str, Node] = field(default_factory=dict)

    def of_kind(self, *kinds: str) -> list[Node]:
        return [n for n in self.nodes.values() if n.kind in kinds]

    @property
    def inputs(self) -> list[str]:
        return [n.id for n in self.of_kind("INPUT")]

    @property
    def outputs(self) -> list[str]:
        return [n.id for n in self.of_kind("OUTPUT")]

    def consumers(self) -> dict[str, list[tuple[str, int]]]:
        out: dict[str, list[tuple[str, int]]] = {k: [] for k in self.nodes}
        for n in self.nodes.values():
            for i, s in enumerate(n.srcs):
                out[s].append((n.id, i))
        return out

    def graph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.nodes)
        for n in self.nodes.values():
            for s in n.srcs:
                g.add_edge(s, n.id)
        return g

    def copy(self) -> "Dfg":
        return Dfg(self.name, self.width, dict(self.nodes))


def _err(code: str, line: int, msg: str) -> SimulationError:
    return SimulationError(code, f"line {line}: {msg}" if line else msg)


_PATTERNS = [
    ("header", re.compile(rf"dfg\s+({_ID})\s+width=(\d+)$")),
    ("in", re.compile(rf"in\s+({_ID})$")),
    ("const", re.compile(rf"const\s+({_ID})\s*=\s*(-?\d+)$")),
    ("add", re.compile(rf"op\s+({_ID})\s*=\s*(add|sub)\s+({_ID})\s+({_ID})$")),
    ("mulc", re.compile(rf"op\s+({_ID})\s*=\s*mulc\s+({_ID})\s+(-?\d+)$")),
    ("reg", re.compile(rf"reg\s+({_ID})\s*=\s*({_ID})(?:\s+(init|shift)=(-?\d+))?$")),
    ("out", re.compile(rf"out\s+({_ID})\s*=\s*({_ID})$")),
]


def parse_dfg(text: str) -> Dfg:
    """Parse and validate a DFG; errors carry the offending line number."""
    dfg = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for tag, pat in _PATTERNS:
            m = pat.match(line)
            if m:
                break
        else:
            raise _err("SYNTAX", lineno, repr(raw))
        if tag == "header":
            if dfg is not None:
                raise _err("SYNTAX", lineno, "second dfg header")
            dfg = Dfg(m[1], int(m[2]))
            continue
        if dfg is None:
            raise _err("SYNTAX", lineno, "statement before 'dfg' header")
        if tag == "in":
            node = Node(m[1], "INPUT", line=lineno)
        elif tag == "const":
            node = Node(m[1], "CONST", value=int(m[2]), line=lineno)
        elif tag == "add":
            node = Node(m[1], m[2].upper(), (m[3], m[4]), line=lineno)
        elif tag == "mulc":
            node = Node(m[1], "MUL_CONST", (m[2],), value=int(m[3]), line=lineno)
        elif tag == "reg":
            if m[3] == "shift":
                k = int(m[4])
                if k < 1:
                    raise _err("SYNTAX", lineno, "shift must be >= 1")
                node = Node(m[1], "DELAY", (m[2],), shift=k, line=lineno)
            else:
                node = Node(m[1], "DELAY", (m[2],), value=None if m[3] is None else int(m[4]), line=lineno)
        else:
            node = Node(m[1], "OUTPUT", (m[2],), line=lineno)
        if node.id in dfg.nodes:
            raise _err("SYNTAX", lineno, f"duplicate id {node.id}")
        dfg.nodes[node.id] = node
    if dfg is None:
        raise SimulationError("SYNTAX", "missing 'dfg <name> width=<W>' header")
    validate_dfg(dfg)
    return dfg


def validate_dfg(dfg: Dfg) -> None:
    if dfg.width < 2:
        raise SimulationError("SYNTAX", "width must be >= 2")
    for n in dfg.nodes.values():
        for s in n.srcs:
            if s not in dfg.nodes:
                raise _err("UNKNOWN_NODE_REF", n.line, f"{n.id} reads undeclared {s}")
            if dfg.nodes[s].kind == "OUTPUT":
                raise _err("UNKNOWN_NODE_REF", n.line, f"{n.id} reads output {s}")
        if n.kind == "DELAY" and n.shift >= dfg.width:
            raise _err("SYNTAX", n.line, f"shift {n.shift} >= width {dfg.width}")
    comb = nx.DiGraph()
    comb.add_nodes_from(dfg.nodes)
    for n in dfg.nodes.values():
        if n.is_word_delay:
            continue
        for s in n.srcs:
            comb.add_edge(s, n.id)
    try:
        cycle = nx.find_cycle(comb)
    except nx.NetworkXNoCycle:
        return
    nodes = " -> ".join(e[0] for e in cycle)
    raise _err("COMBINATIONAL_LOOP", dfg.nodes[cycle[0][0]].line, f"cycle without an initialised delay: {nodes}")


def emit_dfg(dfg: Dfg) -> str:
    lines = [f"dfg {dfg.name} width={dfg.width}"]
    for n in dfg.nodes.values():
        if n.kind == "INPUT":
            lines.append(f"in {n.id}")
        elif n.kind == "CONST":
            lines.append(f"const {n.id} = {n.value}")
        elif n.kind in ("ADD", "SUB"):
            lines.append(f"op {n.id} = {n.kind.lower()} {n.srcs[0]} {n.srcs[1]}")
        elif n.kind == "MUL_CONST":
            lines.append(f"op {n.id} = mulc {n.srcs[0]} {n.value}")
        elif n.kind == "DELAY":
            extra = f" shift={n.shift}" if n.shift else ("" if n.value is None else f" init={n.value}")
            lines.append(f"reg {n.id} = {n.srcs[0]}{extra}")
        else:
            lines.append(f"out {n.id} = {n.srcs[0]}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Structure:
    operations: int
    registers: int
    feedback_cycles: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.operations, self.registers, self.feedback_cycles)


def count_structure(dfg: Dfg) -> Structure:
    """Operations (add/sub/mulc), registers (all delays), simple cycles."""
    ops = len(dfg.of_kind("ADD", "SUB", "MUL_CONST"))
    regs = len(dfg.of_kind("DELAY"))
    cycles = sum(1 for _ in nx.simple_cycles(nx.DiGraph(dfg.graph())))
    return Structure(ops, regs, cycles)


def topo_order(dfg: Dfg) -> list[str]:
    """Evaluation order with sample-delay edges cut."""
    g = nx.DiGraph()
    g.add_nodes_from(dfg.nodes)
    for n in dfg.nodes.values():
        if not n.is_word_delay:
            for s in n.srcs:
                g.add_edge(s, n.id)
    return list(nx.lexicographical_topological_sort(g))


def interpret(dfg: Dfg, streams: Mapping[str, Sequence[int]], samples: int | None = None) -> dict[str, list[int]]:
    """Reference evaluator: one sample per step, W-bit two's complement."""
    w = dfg.width
    if samples is None:
        samples = min((len(streams[i]) for i in dfg.inputs), default=0)
    missing = [i for i in dfg.inputs if i not in streams]
    if missing:
        raise SimulationError("PORT_UNBOUND", f"no stream for inputs {missing}")
    order = topo_order(dfg)
    state = {n.id: to_signed(n.value, w) for n in dfg.nodes.values() if n.is_word_delay}
    out: dict[str, list[int]] = {o: [] for o in dfg.outputs}
    for k in range(samples):
        val: dict[str, int] = {}
        for nid in order:
            n = dfg.nodes[nid]
            if n.kind == "INPUT":
                v = streams[nid][k]
            elif n.kind == "CONST":
                v = n.value
            elif n.kind == "ADD":
                v = val[n.srcs[0]] + val[n.srcs[1]]
            elif n.kind == "SUB":
                v = val[n.srcs[0]] - val[n.srcs[1]]
            elif n.kind == "MUL_CONST":
                v = val[n.srcs[0]] * n.value
            elif n.kind == "DELAY":
                if n.is_word_delay:
                    v = state[nid]
                else:
                    v = val[n.srcs[0]] << n.shift
            else:
                v = val[n.srcs[0]]
                out[nid].append(to_signed(v, w))
            val[nid] = to_signed(v, w)
        for nid in state:
            state[nid] = val[dfg.nodes[nid].srcs[0]]
    return out


def rename(dfg: Dfg, mapping: Mapping[str, str]) -> Dfg:
    nodes = {}
    for n in dfg.nodes.values():
        nid = mapping.get(n.id, n.id)
        nodes[nid] = replace(n, id=nid, srcs=tuple(mapping.get(s, s) for s in n.srcs))
    return Dfg(dfg.name, dfg.width, nodes)


def load_dfg(path) -> Dfg:
    with open(path) as fh:
        return parse_dfg(fh.read())
