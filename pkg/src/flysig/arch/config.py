"""Processor configuration: tokens, memory cells, routing, links, text format.

Text format::

    processor <name> width=<W>
    [OPERATORS]
    <inst> <KIND> [key=value ...]
    [ROUTING]
    <op> inst=<inst> src=<s>,... dst=<d>,...
    [MEMORY]
    <cell> token op=<op> valid=<bits> guard=<bits> operands=<ints>
    <cell> empty
    [LINKS]
    <from> <to> bubbles=<n>

Every scheduled operation owns the memory cell of the same name, whose token
has one operand slot per source. A source is ``IN[k]`` or the name of the
producing operation (``-`` for none). A destination is ``<op>[<slot>]``,
``OUT[k]`` or ``remote:<proc>.<op>[<slot>]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable

import networkx as nx

from ..dualrail import to_signed
from ..kernel import SimulationError

# operation kinds an instance can execute, with operand slot counts
EXEC_SLOTS = {"ADD": 2, "SUB": 2, "SHL": 1, "REG": 1, "CONST": 0}
STRUCTURAL = ("RSELECT", "WSELECT", "FORK", "JOIN")
OPERATOR_KINDS = tuple(EXEC_SLOTS) + STRUCTURAL
ARITH = ("ADD", "SUB")
STORAGE = ("REG", "SHL")


@dataclass(frozen=True)
class Token:
    op_id: str
    valid: tuple[int, ...]
    guard: tuple[int, ...]
    operands: tuple[int, ...]

    def __post_init__(self):
        if len(self.operands) != len(self.valid):
            raise SimulationError("BAD_TOKEN", f"{self.op_id}: {len(self.valid)} flags, {len(self.operands)} operands")

    @property
    def executable(self) -> bool:
        return all(self.valid)


@dataclass
class MemoryCell:
    cell_id: str
    token: Token | None = None


@dataclass(frozen=True)
class Operator:
    inst: str
    kind: str
    params: tuple[tuple[str, int], ...] = ()

    def get(self, key, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class Dest:
    kind: str  # CELL | OUT | REMOTE
    target: str = ""  # op id (CELL, REMOTE)
    slot: int = 0
    port: int = 0  # OUT index
    proc: str = ""  # REMOTE

    def __str__(self) -> str:
        if self.kind == "OUT":
            return f"OUT[{self.port}]"
        if self.kind == "REMOTE":
            return f"remote:{self.proc}.{self.target}[{self.slot}]"
        return f"{self.target}[{self.slot}]"


@dataclass(frozen=True)
class Route:
    op_id: str
    inst: str
    srcs: tuple[str, ...]
    dsts: tuple[Dest, ...]


@dataclass
class ProcessorConfig:
    name: str
    width: int
    operators: dict[str, Operator] = field(default_factory=dict)
    routing: dict[str, Route] = field(default_factory=dict)
    memory: dict[str, MemoryCell] = field(default_factory=dict)
    links: dict[tuple[str, str], int] = field(default_factory=dict)
    frozen: bool = False  # hardwired target: routing is immutable

    def kind_of(self, op_id: str) -> str:
        return self.operators[self.routing[op_id].inst].kind

    def token(self, op_id: str) -> Token | None:
        cell = self.memory.get(op_id)
        return cell.token if cell else None

    def bubbles(self, src: str, dst: str) -> int:
        return self.links.get((src, dst), 0)

    def input_ports(self) -> list[int]:
        return sorted({_port(s) for r in self.routing.values() for s in r.srcs if s.startswith("IN[")})

    def output_ports(self) -> list[int]:
        return sorted({d.port for r in self.routing.values() for d in r.dsts if d.kind == "OUT"})

    def copy(self) -> "ProcessorConfig":
        return ProcessorConfig(self.name, self.width, dict(self.operators), dict(self.routing),
                               {k: MemoryCell(c.cell_id, c.token) for k, c in self.memory.items()},
                               dict(self.links), self.frozen)


def _port(s: str) -> int:
    return int(s[s.index("[") + 1:-1])


# ---------------------------------------------------------------------------
# Text format

_DST = re.compile(r"(?:remote:([\w.]+?)\.([\w.]+)\[(\d+)\]|OUT\[(\d+)\]|([\w.]+)\[(\d+)\])$")


def _parse_dest(text: str, lineno: int) -> Dest:
    m = _DST.match(text)
    if not m:
        raise SimulationError("SYNTAX", f"line {lineno}: bad destination {text!r}")
    if m[1]:
        return Dest("REMOTE", m[2], int(m[3]), proc=m[1])
    if m[4] is not None:
        return Dest("OUT", port=int(m[4]))
    return Dest("CELL", m[5], int(m[6]))


def _kv(parts: Iterable[str], lineno: int) -> dict[str, str]:
    out = {}
    for p in parts:
        if "=" not in p:
            raise SimulationError("SYNTAX", f"line {lineno}: expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k] = v
    return out


def _bits(text: str) -> tuple[int, ...]:
    if text == "-":
        return ()
    if set(text) - {"0", "1"}:
        raise ValueError(text)
    return tuple(int(c) for c in text)


def parse_config(text: str) -> ProcessorConfig:
    cfg: ProcessorConfig | None = None
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            section = line.strip("[]").upper()
            if section not in ("OPERATORS", "ROUTING", "MEMORY", "LINKS"):
                raise SimulationError("SYNTAX", f"line {lineno}: unknown section {line}")
            continue
        parts = line.split()
        if parts[0] == "processor":
            kv = _kv(parts[2:], lineno)
            cfg = ProcessorConfig(parts[1], int(kv.get("width", 8)), frozen=kv.get("target") == "1")
            continue
        if cfg is None:
            raise SimulationError("SYNTAX", f"line {lineno}: missing 'processor' header")
        try:
            if section == "OPERATORS":
                kind = parts[1].upper()
                if kind not in OPERATOR_KINDS:
                    raise SimulationError("UNKNOWN_OPERATOR", f"line {lineno}: {parts[1]}")
                params = tuple(sorted((k, int(v)) for k, v in _kv(parts[2:], lineno).items()))
                cfg.operators[parts[0]] = Operator(parts[0], kind, params)
            elif section == "ROUTING":
                kv = _kv(parts[1:], lineno)
                srcs = tuple(s for s in kv.get("src", "-").split(",") if s != "-")
                dsts = tuple(_parse_dest(d, lineno) for d in kv.get("dst", "").split(",") if d)
                cfg.routing[parts[0]] = Route(parts[0], kv["inst"], srcs, dsts)
            elif section == "MEMORY":
                if parts[1] == "empty":
                    cfg.memory[parts[0]] = MemoryCell(parts[0])
                else:
                    kv = _kv(parts[2:], lineno)
                    ops = tuple(int(v) for v in kv.get("operands", "-").split(",") if v != "-")
                    tok = Token(kv["op"], _bits(kv["valid"]), _bits(kv["guard"]), ops)
                    cfg.memory[parts[0]] = MemoryCell(parts[0], tok)
            elif section == "LINKS":
                kv = _kv(parts[2:], lineno)
                cfg.links[(parts[0], parts[1])] = int(kv.get("bubbles", 0))
            else:
                raise SimulationError("SYNTAX", f"line {lineno}: statement outside a section")
        except (KeyError, ValueError, IndexError) as exc:
            raise SimulationError("SYNTAX", f"line {lineno}: {raw!r} ({exc})") from None
    if cfg is None:
        raise SimulationError("SYNTAX", "missing 'processor' header")
    return cfg


def emit_config(cfg: ProcessorConfig) -> str:
    head = f"processor {cfg.name} width={cfg.width}" + (" target=1" if cfg.frozen else "")
    lines = [head, "[OPERATORS]"]
    for op in cfg.operators.values():
        lines.append(" ".join([op.inst, op.kind] + [f"{k}={v}" for k, v in op.params]))
    lines.append("[ROUTING]")
    for r in cfg.routing.values():
        src = ",".join(r.srcs) or "-"
        lines.append(f"{r.op_id} inst={r.inst} src={src} dst={','.join(str(d) for d in r.dsts)}")
    lines.append("[MEMORY]")
    for c in cfg.memory.values():
        t = c.token
        if t is None:
            lines.append(f"{c.cell_id} empty")
        else:
            bits = lambda v: "".join(map(str, v)) or "-"
            ops = ",".join(map(str, t.operands)) or "-"
            lines.append(f"{c.cell_id} token op={t.op_id} valid={bits(t.valid)} guard={bits(t.guard)} operands={ops}")
    lines.append("[LINKS]")
    for (a, b), n in cfg.links.items():
        lines.append(f"{a} {b} bubbles={n}")
    return "\n".join(lines) + "\n"


def load_config_file(path) -> ProcessorConfig:
    with open(path) as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# Token semantics


def token_evaluation(cell: MemoryCell | None) -> bool:
    """True iff the cell holds a token whose operand flags are all set."""
    return cell is not None and cell.token is not None and cell.token.executable


def route_token(token: Token, routing: ProcessorConfig | dict) -> str:
    """Operator instance that executes ``token``."""
    table = routing.routing if isinstance(routing, ProcessorConfig) else routing
    route = table.get(token.op_id)
    if route is None:
        raise SimulationError("UNROUTED_OPERATION", str(token.op_id))
    return route if isinstance(route, str) else route.inst


def guard_evaluate(result: Token, destinations: Iterable[Dest]) -> list[Dest]:
    """Destinations whose guard bit is set (bit i selects destination i)."""
    dsts = list(destinations)
    if len(result.guard) != len(dsts):
        raise SimulationError("BAD_TOKEN", f"{result.op_id}: {len(result.guard)} guard bits, {len(dsts)} destinations")
    chosen = [d for d, g in zip(dsts, result.guard) if g]
    if not chosen:
        raise SimulationError("EMPTY_GUARD", str(result.op_id))
    return chosen


def token_for(cfg: ProcessorConfig, op_id: str) -> Token:
    """The op's token, or an all-clear one when its cell is empty."""
    tok = cfg.token(op_id)
    if tok is not None:
        return tok
    r = cfg.routing[op_id]
    n = len(r.srcs)
    return Token(op_id, (0,) * n, (1,) * len(r.dsts), (0,) * n)


def enabled_dests(cfg: ProcessorConfig, op_id: str) -> list[Dest]:
    return guard_evaluate(token_for(cfg, op_id), cfg.routing[op_id].dsts)


# ---------------------------------------------------------------------------
# Validation and ring analysis


@dataclass
class ConfigStatus:
    scheduled_operations: int = 0
    registers: int = 0
    routed: int = 0
    instances_used: int = 0
    warnings: list[str] = field(default_factory=list)
    zero_bubble_rings: list[tuple[str, ...]] = field(default_factory=list)


def initial_tokens(cfg: ProcessorConfig, op_id: str) -> int:
    """Word tokens initially held by an operation (its memory image)."""
    t = cfg.token(op_id)
    if t is None:
        return 0
    if cfg.kind_of(op_id) == "REG":
        return int(all(t.valid))
    return sum(t.valid)


def edge_slack(cfg: ProcessorConfig, src: str, dst: str) -> int:
    """Empty stages a word sees on the link src -> dst and inside dst.

    Link bubbles are free places. An empty pipeline register adds its two
    stages of slack; initialised storage holds exactly as many tokens as it
    has data stages, so it adds none.
    """
    slack = cfg.bubbles(src, dst)
    if dst in cfg.routing and cfg.kind_of(dst) == "REG" and initial_tokens(cfg, dst) == 0:
        slack += 2
    return slack


def op_graph(cfg: ProcessorConfig) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(cfg.routing)
    for op in cfg.routing:
        for d in enabled_dests(cfg, op):
            if d.kind == "CELL":
                g.add_edge(op, d.target)
    return g


def rings(cfg: ProcessorConfig, limit: int = 20000) -> list[tuple[str, ...]]:
    out = []
    for c in nx.simple_cycles(op_graph(cfg)):
        out.append(tuple(c))
        if len(out) >= limit:
            break
    return out


def ring_slack(cfg: ProcessorConfig, ring: tuple[str, ...]) -> int:
    return sum(edge_slack(cfg, ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring)))


def zero_bubble_rings(cfg: ProcessorConfig) -> list[tuple[str, ...]]:
    return [r for r in rings(cfg) if ring_slack(cfg, r) == 0]


def validate_config(cfg: ProcessorConfig) -> ConfigStatus:
    """Check a configuration; returns status with warnings or raises."""
    w = cfg.width
    lo, hi = -(1 << (w - 1)), (1 << w) - 1
    for op in cfg.operators.values():
        if op.get("width", w) != w:
            raise SimulationError("WIDTH_MISMATCH", f"{op.inst} width={op.get('width')} in a {w}-bit processor")
        if op.kind == "SHL" and not 1 <= op.get("amount", 1) < w:
            raise SimulationError("WIDTH_MISMATCH", f"{op.inst}: shift {op.get('amount')} at width {w}")
        if op.kind == "CONST" and not lo <= op.get("value", 0) <= hi:
            raise SimulationError("WIDTH_MISMATCH", f"{op.inst}: constant {op.get('value')} at width {w}")
    for r in cfg.routing.values():
        inst = cfg.operators.get(r.inst)
        if inst is None:
            raise SimulationError("UNKNOWN_OPERATOR", f"{r.op_id} uses missing instance {r.inst}")
        if inst.kind not in EXEC_SLOTS:
            raise SimulationError("UNKNOWN_OPERATOR", f"{r.op_id}: {inst.kind} cannot execute operations")
        if len(r.srcs) != EXEC_SLOTS[inst.kind]:
            raise SimulationError("BAD_ROUTING", f"{r.op_id}: {inst.kind} needs {EXEC_SLOTS[inst.kind]} sources")
        if not r.dsts:
            raise SimulationError("BAD_ROUTING", f"{r.op_id} has no destination")
        for s in r.srcs:
            if not (s.startswith("IN[") or s.startswith("remote:") or s in cfg.routing):
                raise SimulationError("BAD_ROUTING", f"{r.op_id} reads unknown source {s}")
        for d in r.dsts:
            if d.kind == "CELL":
                tgt = cfg.routing.get(d.target)
                if tgt is None or d.slot >= len(tgt.srcs) or tgt.srcs[d.slot] != r.op_id:
                    raise SimulationError("BAD_ROUTING", f"{r.op_id} -> {d}: consumer does not read it there")
        tok = cfg.token(r.op_id)
        if tok is not None:
            if tok.op_id != r.op_id or len(tok.valid) != len(r.srcs) or len(tok.guard) != len(r.dsts):
                raise SimulationError("BAD_TOKEN", f"cell {r.op_id} does not match its routing")
            for v in tok.operands:
                if not lo <= v <= hi:
                    raise SimulationError("WIDTH_MISMATCH", f"cell {r.op_id}: operand {v} at width {w}")
        guard_evaluate(token_for(cfg, r.op_id), r.dsts)
    for r in cfg.routing.values():  # every source slot has a producer that writes it
        for i, s in enumerate(r.srcs):
            if s in cfg.routing:
                if not any(d.kind == "CELL" and d.target == r.op_id and d.slot == i for d in cfg.routing[s].dsts):
                    raise SimulationError("BAD_ROUTING", f"{s} does not write {r.op_id}[{i}]")
    for cell in cfg.memory:
        if cell not in cfg.routing:
            raise SimulationError("BAD_ROUTING", f"memory cell {cell} has no scheduled operation")
    status = ConfigStatus()
    kinds = [cfg.kind_of(o) for o in cfg.routing]
    status.scheduled_operations = sum(k in ARITH for k in kinds)
    status.registers = sum(k in STORAGE for k in kinds)
    status.routed = len(kinds)
    status.instances_used = len({r.inst for r in cfg.routing.values()})
    status.zero_bubble_rings = zero_bubble_rings(cfg)
    for ring in status.zero_bubble_rings:
        status.warnings.append("RING_WITHOUT_BUBBLE: " + " -> ".join(ring))
    return status


def with_bubbles(cfg: ProcessorConfig, bubbles: int) -> ProcessorConfig:
    """Copy with every link set to ``bubbles`` empty stages."""
    out = cfg.copy()
    out.links = {k: bubbles for k in cfg.links}
    return out


def set_token(cfg: ProcessorConfig, op_id: str, token: Token | None) -> None:
    cfg.memory[op_id] = MemoryCell(op_id, token)


def rename_ops(cfg: ProcessorConfig, prefix: str) -> ProcessorConfig:
    """Prefix every operation, instance and cell name (for processor networks)."""
    p = lambda s: s if s.startswith(("IN[", "remote:")) else f"{prefix}{s}"
    out = ProcessorConfig(cfg.name, cfg.width, frozen=cfg.frozen)
    out.operators = {p(k): replace(v, inst=p(k)) for k, v in cfg.operators.items()}
    for r in cfg.routing.values():
        dsts = tuple(replace(d, target=p(d.target)) if d.kind == "CELL" else d for d in r.dsts)
        out.routing[p(r.op_id)] = Route(p(r.op_id), p(r.inst), tuple(p(s) for s in r.srcs), dsts)
    for k, c in cfg.memory.items():
        tok = None if c.token is None else replace(c.token, op_id=p(c.token.op_id))
        out.memory[p(k)] = MemoryCell(p(k), tok)
    out.links = {(p(a) if not a.startswith("OUT[") else a, p(b) if not b.startswith("OUT[") else b): n
                 for (a, b), n in cfg.links.items()}
    return out


def signed_operand(v: int, width: int) -> int:
    return to_signed(v, width)
