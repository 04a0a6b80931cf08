"""GATE level: elaborate a configuration into one dual-rail netlist.

Words travel bit-serially, least significant bit first, on one dual-rail
channel per link. Each operation becomes its operator's netlist fragment;
results fan out through fork trees to the destinations enabled by the guard
flags, and every link gets its configured number of empty (bubble) stages.
Operations sharing one adder instance are multiplexed word by word with
read-select chains on the operands and a write-select chain on the result,
driven by round-robin select rings; their operand links get one word of
buffering so a producer never waits on a consumer that is still queued.
Unused inventory instances are elaborated idle (prototype resources).
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

from ..dualrail import Channel, ChannelMonitor, Consumer, Producer, bits_to_word, word_to_bits
from ..kernel import Netlist, NetlistBuilder, RandomizedDelays, SimulationError, simulate
from ..oplib import builders as bl
from ..oplib.cells import chain, fork, input_channel, terminate
from .config import ProcessorConfig, enabled_dests, token_for
from .token_sim import RunReport, steady_throughput

E = bl.E


@dataclass
class Elaboration:
    netlist: Netlist
    inputs: dict[int, Channel]
    outputs: dict[int, Channel]
    op_outputs: dict[str, Channel] = field(default_factory=dict)
    internal: list[Channel] = field(default_factory=list)


def _placeholder(b: NetlistBuilder, hint: str) -> Channel:
    return Channel(b.net(f"{hint}.t"), b.net(f"{hint}.f"), b.net(f"{hint}.ack"))


def _connect(b: NetlistBuilder, src: Channel, dst: Channel) -> None:
    """Make placeholder ``dst`` carry ``src``'s rails; ``dst``'s reader acks ``src``."""
    b.alias(dst.t, src.t)
    b.alias(dst.f, src.f)
    b.alias(src.ack, dst.ack)


def _select_pattern(width: int, remaining: int) -> list[int]:
    return [1] * width + [0] * (width * (remaining - 1))


def _rselect_chain(b, chans: list[Channel], width: int, hint: str) -> Channel:
    if len(chans) == 1:
        return chans[0]
    rest = _rselect_chain(b, chans[1:], width, f"{hint}r")
    sel = bl.pattern_source(b, _select_pattern(width, len(chans)), f"{hint}.sel")
    return bl.build_rselect(b, sel, chans[0], rest, f"{hint}.rs")


def _wselect_chain(b, d: Channel, n: int, width: int, hint: str) -> list[Channel]:
    if n == 1:
        return [d]
    sel = bl.pattern_source(b, _select_pattern(width, n), f"{hint}.sel")
    t, f = bl.build_wselect(b, d, sel, f"{hint}.ws")
    return [t] + _wselect_chain(b, f, n - 1, width, f"{hint}w")


def _build_single(b, cfg: ProcessorConfig, op: str, ins: list[Channel]) -> Channel:
    w = cfg.width
    inst = cfg.operators[cfg.routing[op].inst]
    k = inst.kind
    if k in ("ADD", "SUB"):
        return bl.build_serial_adder(b, ins[0], ins[1], w, subtract=k == "SUB", hint=f"{op}.add")
    if k == "SHL":
        return bl.build_shift(b, ins[0], w, inst.get("amount", 1), f"{op}.shl")
    if k == "CONST":
        return bl.build_constant(b, inst.get("value", 0), w, f"{op}.k")
    tok = token_for(cfg, op)
    init = tok.operands[0] if tok.valid and tok.valid[0] else None
    return bl.build_word_register(b, ins[0], w, None if init is None else init % (1 << w), f"{op}.reg")


def _idle_instance(b, cfg: ProcessorConfig, inst) -> None:
    """An unused inventory operator: built, its inputs never driven."""
    w = cfg.width
    k = inst.kind
    n_in = {"ADD": 2, "SUB": 2, "SHL": 1, "REG": 1, "CONST": 0, "RSELECT": 3, "WSELECT": 2, "FORK": 1, "JOIN": 2}[k]
    ins = [input_channel(b, f"idle.{inst.inst}.{i}") for i in range(n_in)]
    h = f"idle.{inst.inst}"
    if k in ("ADD", "SUB"):
        outs = [bl.build_serial_adder(b, ins[0], ins[1], w, subtract=k == "SUB", hint=h)]
    elif k == "SHL":
        outs = [bl.build_shift(b, ins[0], w, inst.get("amount", 1), h)]
    elif k == "REG":
        outs = [bl.build_word_register(b, ins[0], w, None, h)]
    elif k == "CONST":
        outs = [bl.build_constant(b, inst.get("value", 0), w, h)]
    elif k == "RSELECT":
        outs = [bl.build_rselect(b, ins[0], ins[1], ins[2], h)]
    elif k == "WSELECT":
        outs = list(bl.build_wselect(b, ins[0], ins[1], h))
    elif k == "FORK":
        outs = list(bl.build_fork(b, ins[0], h))
    else:
        outs = list(bl.build_join(b, ins[0], ins[1], h))
    seen = set()
    for ch in outs:
        if ch.ack not in seen:
            seen.add(ch.ack)
            terminate(b, ch)


def elaborate(cfg: ProcessorConfig, include_idle: bool = True) -> Elaboration:
    w = cfg.width
    b = NetlistBuilder(cfg.name)
    routes = cfg.routing
    slots = {op: [_placeholder(b, f"{op}.in{i}") for i in range(len(r.srcs))] for op, r in routes.items()}
    internal: list[Channel] = []

    # fragment inputs: initial operands become word registers in front of the slot
    frag_in: dict[str, list[Channel]] = {}
    for op, r in routes.items():
        tok = token_for(cfg, op)
        chans = []
        for i, ph in enumerate(slots[op]):
            if cfg.kind_of(op) != "REG" and tok.valid[i]:
                ph = bl.build_word_register(b, ph, w, tok.operands[i] % (1 << w), f"{op}.init{i}")
            chans.append(ph)
        frag_in[op] = chans

    by_inst: dict[str, list[str]] = defaultdict(list)
    for op, r in routes.items():
        by_inst[r.inst].append(op)
    out_ch: dict[str, Channel] = {}
    for inst, ops in by_inst.items():
        kind = cfg.operators[inst].kind
        if len(ops) == 1 or kind not in ("ADD", "SUB"):
            if len(ops) > 1:
                raise SimulationError("UNSHARABLE", f"{inst} ({kind}) cannot be shared")
            out_ch[ops[0]] = _build_single(b, cfg, ops[0], frag_in[ops[0]])
            continue
        # one word of slack per operand link so a queued operation's producer can finish its word
        buffered = {op: [chain(b, ch, [E] * (2 * w + 1), f"{op}.buf{i}") for i, ch in enumerate(frag_in[op])]
                    for op in ops}
        a = _rselect_chain(b, [buffered[op][0] for op in ops], w, f"{inst}.a")
        x = _rselect_chain(b, [buffered[op][1] for op in ops], w, f"{inst}.b")
        y = bl.build_serial_adder(b, a, x, w, subtract=kind == "SUB", hint=f"{inst}.add")
        for op, ch in zip(ops, _wselect_chain(b, y, len(ops), w, f"{inst}.y")):
            out_ch[op] = ch

    if include_idle:
        used = set(by_inst)
        for inst in cfg.operators.values():
            if inst.inst not in used:
                _idle_instance(b, cfg, inst)

    inputs = {k: input_channel(b, f"IN{k}") for k in cfg.input_ports()}
    outputs: dict[int, Channel] = {}
    fed = set()

    def fan_out(src_name: str, ch: Channel, dsts: list[tuple[str, object]]):
        counts = [cfg.bubbles(src_name, d) for d, _ in dsts]
        shared = 0
        if len(dsts) > 1 and min(counts) >= 1:
            # one bubble of every branch moves in front of the fork: ring slack is unchanged
            # and the fork's C-tree leaves the producer's handshake cycle
            shared = 1
            ch = chain(b, ch, [E], f"{src_name}.dist")
        branches = fork(b, ch, len(dsts), f"{src_name}.fork") if len(dsts) > 1 else [ch]
        for (dst_name, target), br, n in zip(dsts, branches, counts):
            n -= shared
            if n:
                br = chain(b, br, [E] * n, f"{src_name}>{dst_name}.bub")
            if isinstance(target, Channel):
                _connect(b, br, target)
            else:
                outputs[target] = br
                terminate(b, br)

    for k, ch in inputs.items():
        dsts = [(op, slots[op][i]) for op, r in routes.items() for i, s in enumerate(r.srcs) if s == f"IN[{k}]"]
        for op, ph in dsts:
            fed.add(ph)
        if not dsts:
            terminate(b, ch)
            continue
        fan_out(f"IN[{k}]", ch, dsts)
    for op in routes:
        ch = out_ch[op]
        internal.append(ch)
        dsts = []
        for d in enabled_dests(cfg, op):
            if d.kind == "CELL":
                ph = slots[d.target][d.slot]
                fed.add(ph)
                dsts.append((d.target, ph))
            elif d.kind == "OUT":
                dsts.append((f"OUT[{d.port}]", d.port))
            else:
                raise SimulationError("PORT_UNBOUND", f"{op} -> {d}: remote destination outside a network")
        fan_out(op, ch, dsts)
    for op, phs in slots.items():
        for ph in phs:
            if ph not in fed:  # slot disabled by guards: starves
                b.add_input(ph.t)
                b.add_input(ph.f)
    return Elaboration(b.finalize(), inputs, outputs, out_ch, internal)


def settle_time(elab: Elaboration, delay_model=None, t_max_ns: float = 10_000) -> int:
    """Time (ps) at which the processor, given no input, stops moving.

    Initial register contents advance until they wait on input-dependent
    data; inputs applied after that see only the input-to-output path.
    """
    sinks = [Consumer(ch) for ch in elab.outputs.values()]
    trace = simulate(elab.netlist, delay_model=delay_model, t_max=t_max_ns, agents=sinks, record=())
    return trace.quiescent_at or 0


def simulate_gates(cfg: ProcessorConfig, streams: dict[int, list[int]], samples: int | None = None,
                   delay_model=None, t_max_ns: float | None = None, monitor: str = "none",
                   elab: Elaboration | None = None, settle: bool = True) -> RunReport:
    """Run the elaborated netlist with producers on IN ports and consumers on OUT ports.

    With ``settle`` the inputs start once the unfed processor is quiescent,
    so the start-up latency measures the input-to-output path rather than
    the reset transient of the rings.

    ``monitor``: "none", "ports" or "all" (every operation output channel too).
    """
    w = cfg.width
    elab = elab or elaborate(cfg)
    ports_in = sorted(elab.inputs)
    if samples is None:
        samples = min((len(streams[k]) for k in ports_in), default=0)
    if samples < 1:
        raise SimulationError("EMPTY_STIMULUS", "need at least one sample")
    if t_max_ns is None:
        # a shared instance serves its operations one word at a time
        share = max(Counter(r.inst for r in cfg.routing.values()).values(), default=1)
        t_max_ns = 2000 + samples * w * 200.0 * share
    start = settle_time(elab, delay_model, t_max_ns) if settle else 0
    producers = [Producer(elab.inputs[k], [bit for v in streams[k][:samples] for bit in word_to_bits(v, w)],
                          start=start)
                 for k in ports_in]
    consumers = {k: Consumer(ch, limit=samples * w) for k, ch in elab.outputs.items()}
    monitors = []
    if monitor != "none":
        chans = list(elab.inputs.values()) + list(elab.outputs.values())
        if monitor == "all":
            chans += elab.internal
        seen = set()
        for ch in chans:
            if ch.nets not in seen:
                seen.add(ch.nets)
                monitors.append(ChannelMonitor(ch))
    trace = simulate(elab.netlist, delay_model=delay_model, t_max=t_max_ns,
                     agents=producers + list(consumers.values()) + monitors, record=())
    outputs, times, first_out = {}, {}, {}
    for k, c in consumers.items():
        bits = c.values
        n = len(bits) // w
        outputs[k] = [bits_to_word(bits[j * w:(j + 1) * w]) for j in range(n)]
        times[k] = [c.times[j * w + w - 1] for j in range(n)]
        if c.times:
            first_out[k] = c.times[0]
    deadlock = any(len(v) < samples for v in outputs.values())
    firsts = [p.first_emit for p in producers if p.first_emit is not None]
    first = min(firsts) if firsts else 0
    port0 = min(outputs) if outputs else None
    t0 = times.get(port0, [])
    latency = (first_out[port0] - first) / 1000 if port0 in first_out else None
    thr = 0.0 if deadlock else steady_throughput(t0)
    violations = []
    for m in monitors:
        rep = m.finish()
        violations += [(rep.channel, v) for v in rep.violations]
    warnings = []
    if trace.quiescent_at is None and deadlock:
        warnings.append("OSCILLATION_AT_TMAX")
    return RunReport(
        outputs=outputs,
        latency_ns=latency,
        throughput_per_us=thr,
        deadlock=deadlock,
        level="GATE",
        completion_ns={k: [x / 1000 for x in v] for k, v in times.items()},
        emitted=sum(len(v) for v in outputs.values()),
        warnings=warnings,
        events=trace.event_count,
        violations=violations,
    )
