"""Processor networks: results written straight into another processor's cells.

A network is flattened into one configuration (operation names prefixed by
processor) so that it runs under a single event loop at either level.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from ..kernel import SimulationError
from .config import Dest, MemoryCell, ProcessorConfig, Route, rename_ops, validate_config
from .processor import ProcessorInstance, load_configuration


@dataclass
class Network:
    """Flattened network plus the map from (processor, port) to network ports."""

    config: ProcessorConfig
    inputs: dict[tuple[str, int], int] = field(default_factory=dict)
    outputs: dict[tuple[str, int], int] = field(default_factory=dict)
    members: tuple[str, ...] = ()

    def instance(self, level: str = "TOKEN") -> ProcessorInstance:
        return load_configuration(ProcessorInstance(self.config.name, level), self.config)


def as_network(p: ProcessorInstance | ProcessorConfig | Network, name: str | None = None) -> Network:
    if isinstance(p, Network):
        return p
    cfg = p.config if isinstance(p, ProcessorInstance) else p
    if cfg is None:
        raise SimulationError("NOT_CONFIGURED", getattr(p, "name", "?"))
    name = name or cfg.name
    flat = rename_ops(cfg, f"{name}.")
    flat.name = name
    return Network(flat, {(name, k): k for k in cfg.input_ports()},
                   {(name, k): k for k in cfg.output_ports()}, (name,))


def _merge(a: Network, b: Network) -> Network:
    if a.config.width != b.config.width:
        raise SimulationError("WIDTH_MISMATCH", f"{a.config.width}-bit and {b.config.width}-bit processors")
    clash = set(a.members) & set(b.members)
    if clash:
        raise SimulationError("BAD_NETWORK", f"processor name(s) used twice: {sorted(clash)}")
    shift_in = max(a.config.input_ports(), default=-1) + 1
    shift_out = max(a.config.output_ports(), default=-1) + 1
    bc = b.config
    ren_in = {f"IN[{k}]": f"IN[{k + shift_in}]" for k in bc.input_ports()}
    cfg = a.config.copy()
    cfg.name = f"{a.config.name}+{bc.name}"
    cfg.operators.update(bc.operators)
    for r in bc.routing.values():
        dsts = tuple(replace(d, port=d.port + shift_out) if d.kind == "OUT" else d for d in r.dsts)
        cfg.routing[r.op_id] = Route(r.op_id, r.inst, tuple(ren_in.get(s, s) for s in r.srcs), dsts)
    cfg.memory.update(bc.memory)
    for (s, d), n in bc.links.items():
        if d.startswith("OUT["):
            d = f"OUT[{int(d[4:-1]) + shift_out}]"
        cfg.links[(ren_in.get(s, s), d)] = n
    ins = dict(a.inputs)
    ins.update({k: v + shift_in for k, v in b.inputs.items()})
    outs = dict(a.outputs)
    outs.update({k: v + shift_out for k, v in b.outputs.items()})
    return Network(cfg, ins, outs, a.members + b.members)


def _bind(net: Network, up_port: int, down_port: int) -> None:
    """Feed network output ``up_port`` into every cell reading input ``down_port``."""
    cfg = net.config
    src, dst = f"OUT[{up_port}]", f"IN[{down_port}]"
    producers = [r for r in cfg.routing.values() if any(d.kind == "OUT" and d.port == up_port for d in r.dsts)]
    readers = [(r.op_id, i) for r in cfg.routing.values() for i, s in enumerate(r.srcs) if s == dst]
    if len(producers) != 1 or not readers:
        raise SimulationError("PORT_UNBOUND", f"{src} -> {dst}")
    p = producers[0]
    out_bubbles = cfg.links.pop((p.op_id, src), 0)
    new_dsts = []
    guards = []
    tok = cfg.token(p.op_id)
    for j, d in enumerate(p.dsts):
        if d.kind == "OUT" and d.port == up_port:
            for op, slot in readers:
                new_dsts.append(Dest("CELL", op, slot))
                guards.append(1 if tok is None else tok.guard[j])
        else:
            new_dsts.append(d)
            guards.append(1 if tok is None else tok.guard[j])
    cfg.routing[p.op_id] = replace(p, dsts=tuple(new_dsts))
    if tok is not None:
        cfg.memory[p.op_id] = MemoryCell(p.op_id, replace(tok, guard=tuple(guards)))
    for op, slot in readers:
        r = cfg.routing[op]
        srcs = list(r.srcs)
        srcs[slot] = p.op_id
        cfg.routing[op] = replace(r, srcs=tuple(srcs))
        cfg.links[(p.op_id, op)] = out_bubbles + cfg.links.pop((dst, op), 0)


def connect_processors(upstream, downstream, port_map: Mapping[int, int], name: str | None = None) -> Network:
    """Connect upstream output ports to downstream input ports.

    ``upstream`` and ``downstream`` are processor instances, configurations
    or networks; passing the same object twice closes a loop inside it.
    Ports are network port numbers or ``(processor, port)`` pairs. The
    channel between the two carries the bubbles of both original links.
    """
    if upstream is downstream:
        net = as_network(upstream)
        up, down = net, net
        net = Network(net.config.copy(), dict(net.inputs), dict(net.outputs), net.members)
        up_of, down_of = (lambda k: k), (lambda k: k)
    else:
        up = as_network(upstream)
        down = as_network(downstream)
        net = _merge(up, down)
        shift_in = max(up.config.input_ports(), default=-1) + 1
        up_of = lambda k: k
        down_of = lambda k: k + shift_in
    if not port_map:
        raise SimulationError("PORT_UNBOUND", "empty port map")
    resolved = {}
    for o, i in port_map.items():
        o = _port_of(up.outputs, o, "output")
        i = _port_of(down.inputs, i, "input")
        if o not in up.config.output_ports():
            raise SimulationError("PORT_UNBOUND", f"upstream has no output port {o}")
        if i not in down.config.input_ports():
            raise SimulationError("PORT_UNBOUND", f"downstream has no input port {i}")
        resolved[o] = i
    port_map = resolved
    for o, i in port_map.items():
        _bind(net, up_of(o), down_of(i))
    net.inputs = {k: v for k, v in net.inputs.items() if v not in {down_of(i) for i in port_map.values()}}
    net.outputs = {k: v for k, v in net.outputs.items() if v not in {up_of(o) for o in port_map}}
    _renumber(net)
    if name:
        net.config.name = name
    validate_config(net.config)
    return net


def _port_of(ports: dict, key, what: str) -> int:
    """A port given as a network port number or as (processor, port)."""
    if isinstance(key, tuple):
        if key not in ports:
            raise SimulationError("PORT_UNBOUND", f"no {what} port {key}")
        return ports[key]
    return int(key)


def _renumber(net: Network) -> None:
    """Compact the remaining network ports to 0..n-1 (network order)."""
    cfg = net.config
    imap = {old: new for new, old in enumerate(sorted(net.inputs.values()))}
    omap = {old: new for new, old in enumerate(sorted(net.outputs.values()))}
    rin = lambda s: f"IN[{imap[int(s[3:-1])]}]" if s.startswith("IN[") else s
    rout = lambda s: f"OUT[{omap[int(s[4:-1])]}]" if s.startswith("OUT[") else s
    for op, r in list(cfg.routing.items()):
        dsts = tuple(replace(d, port=omap[d.port]) if d.kind == "OUT" else d for d in r.dsts)
        cfg.routing[op] = replace(r, srcs=tuple(rin(s) for s in r.srcs), dsts=dsts)
    cfg.links = {(rin(a), rout(b)): n for (a, b), n in cfg.links.items()}
    net.inputs = {k: imap[v] for k, v in net.inputs.items()}
    net.outputs = {k: omap[v] for k, v in net.outputs.items()}


def split_config(cfg: ProcessorConfig, first: set[str], names: tuple[str, str] = ("p0", "p1")):
    """Cut one configuration into two processors along the operations in ``first``.

    Every cut edge becomes an output port of its producer's processor and an
    input port of the consumer's; the link's bubbles stay on the input side.
    Returns ``(cfg_a, cfg_b, map_ab, map_ba)`` where the maps pair output
    ports of one side with input ports of the other.
    """
    parts = (set(first), set(cfg.routing) - set(first))
    outs: list[dict] = [{}, {}]  # producer op -> new out port, per side
    ins: list[dict] = [{}, {}]  # producer op -> new in port on the consumer side
    maps: list[dict] = [{}, {}]
    nout = [max(cfg.output_ports(), default=-1) + 1] * 2
    nin = [max(cfg.input_ports(), default=-1) + 1] * 2
    for op in cfg.routing:
        side = 0 if op in parts[0] else 1
        for d in cfg.routing[op].dsts:
            if d.kind == "CELL" and (d.target in parts[0]) != (side == 0) and op not in outs[side]:
                outs[side][op] = nout[side]
                nout[side] += 1
                ins[1 - side][op] = nin[1 - side]
                nin[1 - side] += 1
                maps[side][outs[side][op]] = ins[1 - side][op]
    cfgs = []
    for side, name in enumerate(names):
        c = ProcessorConfig(name, cfg.width)
        ops = [o for o in cfg.routing if o in parts[side]]
        for o in ops:
            r = cfg.routing[o]
            c.operators[r.inst] = cfg.operators[r.inst]
            srcs = tuple(f"IN[{ins[side][s]}]" if s in ins[side] else s for s in r.srcs)
            dsts, guards = [], []
            tok = cfg.token(o)
            crossed = False
            for j, d in enumerate(r.dsts):
                g = 1 if tok is None else tok.guard[j]
                if d.kind == "CELL" and d.target not in parts[side]:
                    if not crossed:
                        dsts.append(Dest("OUT", port=outs[side][o]))
                        guards.append(g)
                        crossed = True
                    continue
                dsts.append(d)
                guards.append(g)
            c.routing[o] = Route(o, r.inst, srcs, tuple(dsts))
            c.memory[o] = MemoryCell(o, None if tok is None else replace(tok, guard=tuple(guards)))
        for (a, b), n in cfg.links.items():
            if b in parts[side] or (b.startswith("OUT[") and a in parts[side]):
                a2 = f"IN[{ins[side][a]}]" if a in ins[side] else a
                c.links[(a2, b)] = n
        for o, port in outs[side].items():
            c.links[(o, f"OUT[{port}]")] = 0
        cfgs.append(c)
    return cfgs[0], cfgs[1], maps[0], maps[1]
