"""Operation scheduling and configuration emission."""

from __future__ import annotations

from typing import Mapping

import networkx as nx

from ..arch.config import (Dest, MemoryCell, Operator, ProcessorConfig, Route, Token, initial_tokens,
                           validate_config)
from ..dualrail import to_signed
from ..kernel import SimulationError
from .dfg import Dfg, topo_order
from .rewrite import decompose_mul_const

SHARABLE = ("ADD", "SUB")


def _kind(node) -> str:
    if node.kind == "DELAY":
        return "SHL" if node.shift else "REG"
    return node.kind


def _live(dfg: Dfg) -> Dfg:
    """Drop nodes whose value never reaches an output; inputs keep their ports."""
    g = dfg.graph()
    keep = set(dfg.inputs) | set(dfg.outputs)
    for o in dfg.outputs:
        keep |= nx.ancestors(g, o)
    if len(keep) == len(dfg.nodes):
        return dfg
    return Dfg(dfg.name, dfg.width, {k: n for k, n in dfg.nodes.items() if k in keep})


def schedule_and_emit(dfg: Dfg, inventory: Mapping[str, int] | None = None, bubbles_per_link: int = 1,
                      sharing: bool = True, balance: bool = True) -> ProcessorConfig:
    """Map every node onto an operator instance and emit a configuration.

    Additions and subtractions are list-scheduled in topological order onto
    the inventory's instances of their kind (least loaded first, lowest index
    on ties); kinds missing from ``inventory`` get one instance per operation.
    Registers, shifters and constants get a private instance each. Every link
    carries at least ``bubbles_per_link`` empty stages; with ``balance`` the
    links of reconvergent paths are padded further (see ``balance_links``).
    Idle inventory instances are still declared, as in a configurable
    prototype.
    """
    if bubbles_per_link < 0:
        raise SimulationError("BAD_BUBBLES", str(bubbles_per_link))
    dfg = _live(decompose_mul_const(dfg))
    inventory = dict(inventory or {})
    w = dfg.width
    nodes = dfg.nodes
    order = topo_order(dfg)
    ops = [n for n in order if nodes[n].kind not in ("INPUT", "OUTPUT")]
    in_port = {n: i for i, n in enumerate(dfg.inputs)}
    out_port = {n: i for i, n in enumerate(dfg.outputs)}

    # outputs fed straight from an input need an operation to carry the word
    passthrough = {}
    for o in dfg.outputs:
        s = nodes[o].srcs[0]
        if nodes[s].kind == "INPUT":
            passthrough[o] = f"{o}_pass"

    cfg = ProcessorConfig(dfg.name, w)
    assign: dict[str, str] = {}
    for kind in SHARABLE:
        members = [n for n in ops if nodes[n].kind == kind]
        count = inventory.get(kind)
        if count is None:
            count = len(members)
        if len(members) > count and not sharing:
            raise SimulationError("INSUFFICIENT_OPERATORS", f"{len(members)} {kind} operations, {count} instances")
        if members and count == 0:
            raise SimulationError("INSUFFICIENT_OPERATORS", f"no {kind} instance")
        insts = [f"{kind.lower()}{i}" for i in range(count)]
        for inst in insts:
            cfg.operators[inst] = Operator(inst, kind)
        load = {inst: 0 for inst in insts}
        for n in members:
            inst = min(insts, key=lambda i: (load[i], insts.index(i)))
            load[inst] += 1
            assign[n] = inst
    for kind, count in sorted(inventory.items()):
        if kind in SHARABLE:
            continue
        for i in range(count):
            inst = f"{kind.lower()}{i}"
            cfg.operators[inst] = Operator(inst, kind)
    for n in ops:
        node = nodes[n]
        k = _kind(node)
        if k in SHARABLE:
            continue
        inst = f"{k.lower()}_{n}"
        params = ()
        if k == "SHL":
            params = (("amount", node.shift),)
        elif k == "CONST":
            params = (("value", to_signed(node.value, w)),)
        cfg.operators[inst] = Operator(inst, k, params)
        assign[n] = inst
    for o, p in passthrough.items():
        inst = f"reg_{p}"
        cfg.operators[inst] = Operator(inst, "REG")
        assign[p] = inst

    def source(s: str) -> str:
        return f"IN[{in_port[s]}]" if nodes[s].kind == "INPUT" else s

    dsts: dict[str, list[Dest]] = {n: [] for n in list(ops) + list(passthrough.values()) + dfg.inputs}
    for n in list(nodes):
        node = nodes[n]
        if node.kind == "OUTPUT":
            s = node.srcs[0]
            if o_pass := passthrough.get(n):
                dsts[s].append(Dest("CELL", o_pass, 0))
                dsts[o_pass].append(Dest("OUT", port=out_port[n]))
            else:
                dsts[s].append(Dest("OUT", port=out_port[n]))
        elif node.kind != "INPUT":
            for i, s in enumerate(node.srcs):
                dsts[s].append(Dest("CELL", n, i))

    for n in ops:
        node = nodes[n]
        srcs = tuple(source(s) for s in node.srcs)
        cfg.routing[n] = Route(n, assign[n], srcs, tuple(dsts[n]))
        if node.kind == "DELAY" and node.value is not None and not node.shift:
            tok = Token(n, (1,), (1,) * len(dsts[n]), (to_signed(node.value, w),))
            cfg.memory[n] = MemoryCell(n, tok)
        else:
            cfg.memory[n] = MemoryCell(n)
    for o, p in passthrough.items():
        cfg.routing[p] = Route(p, assign[p], (source(nodes[o].srcs[0]),), tuple(dsts[p]))
        cfg.memory[p] = MemoryCell(p)

    for r in cfg.routing.values():
        for s in r.srcs:
            cfg.links.setdefault((s, r.op_id), bubbles_per_link)
        for d in r.dsts:
            if d.kind == "OUT":
                cfg.links.setdefault((r.op_id, f"OUT[{d.port}]"), bubbles_per_link)
    if balance:
        balance_links(cfg, bubbles_per_link)
    validate_config(cfg)
    return cfg


def _stages(cfg: ProcessorConfig, src: str, breakers: set, shared: set) -> int:
    """Pipeline stages between a source's depth point and its output links.

    Adders are combinational; a shifter holds ``amount`` bit tokens in twice
    as many stages; an empty register is two stages; an operation on a
    shared instance sits behind a one-word operand buffer.
    """
    if src.startswith("IN[") or src in breakers:
        return 0
    if src in shared:
        return 2 * cfg.width + 1  # operand buffer in front of the shared instance
    k = cfg.kind_of(src)
    if k == "SHL":
        return 2 * cfg.operators[cfg.routing[src].inst].get("amount", 1)
    if k == "REG":
        return 2
    return 0


def balance_links(cfg: ProcessorConfig, bubbles: int) -> None:
    """Slack matching: pad links so reconvergent paths have equal stage depth.

    A fork lets its next bit go only once every branch took the current one,
    so when two branches of one fork meet again, the shorter one must buffer
    what the longer one holds in flight. Depths are longest paths in
    pipeline stages from every origin (input ports, initialised registers,
    constants); a link is padded to the largest depth difference seen from
    any origin whose cone holds both its ends. Joins of independent origins
    are left alone, they only wait.
    """
    breakers = {o for o in cfg.routing
                if cfg.kind_of(o) == "CONST" or (cfg.kind_of(o) == "REG" and initial_tokens(cfg, o) > 0)}
    g = nx.DiGraph()
    g.add_nodes_from(cfg.routing)
    for op, r in cfg.routing.items():
        for s in r.srcs:
            if op not in breakers:
                g.add_edge(s, op)
    if not nx.is_directed_acyclic_graph(g):  # rings held only by empty registers
        g.remove_edges_from([(s, d) for s, d in list(g.edges) if cfg.kind_of(d) == "REG"])
    # a shared instance runs its operations in routing order, one word each:
    # the next one cannot start before the previous word went through
    by_inst: dict[str, list[str]] = {}
    for op, r in cfg.routing.items():
        by_inst.setdefault(r.inst, []).append(op)
    shared = {op for ops in by_inst.values() if len(ops) > 1 for op in ops}
    h = g.copy()
    word = {}
    for ops in by_inst.values():
        for a, c in zip(ops, ops[1:]):
            if not h.has_edge(a, c):
                h.add_edge(a, c)
                if nx.is_directed_acyclic_graph(h):
                    word[(a, c)] = 2 * cfg.width
                else:
                    h.remove_edge(a, c)
    order = list(nx.topological_sort(h))
    origins = [n for n in order if n.startswith("IN[") or n in breakers]
    out_st = {n: _stages(cfg, n, breakers, shared) for n in g}

    def step(p, n):
        return word[(p, n)] if (p, n) in word else out_st[p] + bubbles

    need: dict[tuple[str, str], int] = {}
    for o in origins:
        depth = {o: 0}
        for n in order:
            if n == o:
                continue
            ps = [p for p in h.predecessors(n) if p in depth]
            if ps:
                depth[n] = max(depth[p] + step(p, n) for p in ps)
        for s, d in g.edges:
            if s in depth and d in depth:
                k = (s, d)
                need[k] = max(need.get(k, bubbles), depth[d] - depth[s] - out_st[s])
    for k, n in need.items():
        cfg.links[k] = max(cfg.links.get(k, bubbles), n)
