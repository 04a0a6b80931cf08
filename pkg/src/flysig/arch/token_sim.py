"""TOKEN level: word-granular dataflow execution with characterized timing.

Each operation owns one memory cell with one-place operand slots. An
operation is dispatched to its operator instance when all its slots are valid
and its previous result has been delivered everywhere; dispatch clears the
slots. Instances serve ready operations first come first served (ties by
operation id). Results travel to the destinations selected by the guard flags
and wait while a destination slot is still occupied.

Timing comes from gate-level characterization of the operators. Rings with no
free place are frozen outright: at gate level such a ring cannot move, and a
word-level model would otherwise happily run it.
"""

from __future__ import annotations

import functools
import heapq
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from ..dualrail import to_signed
from ..kernel import DelayTable, default_delay_table
from ..oplib.cells import RegisterInit
from ..oplib.operators import OperatorSpec, characterize
from .config import ProcessorConfig, enabled_dests, initial_tokens, rings, token_for, zero_bubble_rings


@dataclass(frozen=True)
class OpTiming:
    latency_ps: int  # first input bit to last result bit of a word
    occupancy_ps: int  # time the instance is busy per word


@functools.lru_cache(maxsize=64)
def timing_table(width: int, table: DelayTable) -> dict:
    def word(spec: OperatorSpec) -> OpTiming:
        ch = characterize(spec, table)
        lat = ch.forward_latency + (width - 1) * ch.cycle_time
        return OpTiming(round(lat * 1000), round(width * ch.cycle_time * 1000))

    reg = characterize(OperatorSpec.make("REG", init=RegisterInit.EMPTY_INIT), table)
    return {
        "ADD": word(OperatorSpec.make("SERIAL_ADDER", width=width)),
        "SUB": word(OperatorSpec.make("SERIAL_ADDER", width=width, subtract=True)),
        "REG": word(OperatorSpec.make("SHIFT_REG", inits=(RegisterInit.EMPTY_INIT,))),
        "CONST": word(OperatorSpec.make("CONST", width=width, value=0)),
        "stage_ps": round(reg.forward_latency * 1000),
        "shl": lambda amount: word(OperatorSpec.make("SHIFT", width=width, amount=amount)),
    }


@dataclass
class RunReport:
    outputs: dict[int, list[int]]
    latency_ns: float | None
    throughput_per_us: float
    deadlock: bool
    level: str
    completion_ns: dict[int, list[float]] = field(default_factory=dict)
    dispatched: dict[str, int] = field(default_factory=dict)
    emitted: int = 0
    link_histogram: dict[tuple[str, str], Counter] = field(default_factory=dict)
    ring_occupancy: dict[tuple[str, ...], tuple[int, int, int]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    events: int = 0
    violations: list = field(default_factory=list)

    @property
    def ring_tokens_invariant(self) -> bool:
        return all(lo == hi == init for init, lo, hi in self.ring_occupancy.values())


def steady_throughput(times_ps: list[int], t_end_ps: int | None = None) -> float:
    """Words per microsecond after a warm-up of the first 10% of the run."""
    if len(times_ps) < 2:
        return 0.0
    t_end = t_end_ps if t_end_ps is not None else times_ps[-1]
    window = [t for t in times_ps if t >= 0.1 * t_end]
    if len(window) < 2 or window[-1] == window[0]:
        window = times_ps
    return (len(window) - 1) / ((window[-1] - window[0]) / 1e6)


EMPTY, INCOMING, VALID = 0, 1, 2


def simulate_tokens(cfg: ProcessorConfig, streams: dict[int, list[int]], samples: int | None = None,
                    table: DelayTable | None = None, t_max_ns: float | None = None) -> RunReport:
    table = table or default_delay_table()
    w = cfg.width
    tim = timing_table(w, table)
    stage_ps = tim["stage_ps"]
    ports_in = cfg.input_ports()
    if samples is None:
        samples = min((len(streams[k]) for k in ports_in), default=0)
    ports_out = cfg.output_ports()

    ops = list(cfg.routing)
    routes = cfg.routing
    kind = {o: cfg.kind_of(o) for o in ops}

    def op_timing(o):
        k = kind[o]
        if k == "SHL":
            return tim["shl"](cfg.operators[routes[o].inst].get("amount", 1))
        return tim[k]

    timing = {o: op_timing(o) for o in ops}
    dests = {o: enabled_dests(cfg, o) for o in ops}
    slot_state = {o: [EMPTY] * len(routes[o].srcs) for o in ops}
    slot_val = {o: [0] * len(routes[o].srcs) for o in ops}
    for o in ops:
        tok = token_for(cfg, o)
        for i, v in enumerate(tok.valid):
            if v:
                slot_state[o][i] = VALID
                slot_val[o][i] = to_signed(tok.operands[i], w)
    frozen = {o for r in zero_bubble_rings(cfg) for o in r}
    warnings = [f"RING_WITHOUT_BUBBLE: {' -> '.join(r)}" for r in zero_bubble_rings(cfg)]

    inst_busy: dict[str, bool] = {}
    executing = set()
    pending: dict[str, dict] = {}  # op -> {dest index: value}
    out_words: dict[int, list[int]] = {k: [] for k in ports_out}
    out_times: dict[int, list[int]] = {k: [] for k in ports_out}
    dispatched = Counter()
    link_hist: dict[tuple[str, str], Counter] = defaultdict(Counter)
    in_next = {k: 0 for k in ports_in}
    in_pending: dict[int, set] = {k: set() for k in ports_in}  # slots still to receive word in_next
    readers = {k: [(o, i) for o in ops for i, s in enumerate(routes[o].srcs) if s == f"IN[{k}]"] for k in ports_in}
    first_input = None

    # ring occupancy bookkeeping: ring edge (producer, consumer slot)
    ring_list = rings(cfg)
    ring_edges = []
    for r in ring_list:
        edges = []
        for i, o in enumerate(r):
            nxt = r[(i + 1) % len(r)]
            slot = next(d.slot for d in dests[o] if d.kind == "CELL" and d.target == nxt)
            edges.append((o, nxt, slot))
        ring_edges.append(edges)

    def ring_count(edges) -> int:
        n = 0
        for o, nxt, slot in edges:
            if slot_state[nxt][slot] != EMPTY:
                n += 1
            if o in executing:
                n += 1
            elif o in pending and any(d.kind == "CELL" and d.target == nxt and d.slot == slot
                                      for j, d in enumerate(dests[o]) if j in pending[o]):
                n += 1
        return n

    ring_init = [ring_count(e) for e in ring_edges]
    ring_lo = list(ring_init)
    ring_hi = list(ring_init)

    heap: list = []
    seq = 0

    def push(t, kind_, *data):
        nonlocal seq
        seq += 1
        heapq.heappush(heap, (t, seq, kind_, data))

    ready_q: dict[str, list] = defaultdict(list)  # instance -> heap of (ready time, op)
    queued = set()

    def link_ps(a, b):
        return cfg.bubbles(a, b) * stage_ps

    def try_ready(o, t):
        if o in frozen or o in executing or o in pending or o in queued:
            return
        if all(s == VALID for s in slot_state[o]):
            queued.add(o)
            heapq.heappush(ready_q[routes[o].inst], (t, o))
            try_dispatch(routes[o].inst, t)

    def try_dispatch(inst, t):
        q = ready_q[inst]
        if not q or inst_busy.get(inst):
            return
        _, o = heapq.heappop(q)
        queued.discard(o)
        vals = list(slot_val[o])
        for i in range(len(slot_state[o])):
            slot_state[o][i] = EMPTY
        k = kind[o]
        if k == "ADD":
            res = vals[0] + vals[1]
        elif k == "SUB":
            res = vals[0] - vals[1]
        elif k == "SHL":
            res = vals[0] << cfg.operators[routes[o].inst].get("amount", 1)
        elif k == "CONST":
            res = cfg.operators[routes[o].inst].get("value", 0)
        else:
            res = vals[0]
        res = to_signed(res, w)
        dispatched[o] += 1
        executing.add(o)
        inst_busy[inst] = True
        push(t + timing[o].occupancy_ps, "free", inst)
        push(t + timing[o].latency_ps, "done", o, res)
        # freed slots may unblock producers
        for i, s in enumerate(routes[o].srcs):
            unblock(s, o, i, t)

    def unblock(src, o, slot, t):
        if src.startswith("IN["):
            feed_input(int(src[3:-1]), t)
        elif src in pending:
            deliver(src, t)

    def deliver(o, t):
        left = pending[o]
        for j in sorted(left):
            d = dests[o][j]
            if d.kind == "OUT":
                push(t + link_ps(o, f"OUT[{d.port}]"), "out", d.port, left[j])
                del left[j]
            elif slot_state[d.target][d.slot] == EMPTY:
                slot_state[d.target][d.slot] = INCOMING
                link_hist[(o, d.target)][1] += 1
                push(t + link_ps(o, d.target), "arrive", d.target, d.slot, left[j])
                del left[j]
            else:
                link_hist[(o, d.target)]["blocked"] += 1
        if not left:
            del pending[o]
            try_ready(o, t)

    def feed_input(k, t):
        nonlocal first_input
        while in_next[k] < samples:
            if not in_pending[k]:
                in_pending[k] = set(range(len(readers[k])))
            v = to_signed(streams[k][in_next[k]], w)
            for j in sorted(in_pending[k]):
                o, i = readers[k][j]
                if slot_state[o][i] == EMPTY:
                    slot_state[o][i] = INCOMING
                    if first_input is None:
                        first_input = t
                    push(t + link_ps(f"IN[{k}]", o), "arrive", o, i, v)
                    in_pending[k].discard(j)
            if in_pending[k]:
                return
            in_next[k] += 1

    # inputs start once the initial tokens have run as far as they can
    t = 0
    for o in ops:
        try_ready(o, 0)
    limit_ps = None if t_max_ns is None else round(t_max_ns * 1000)
    events = 0
    target = samples
    fed = False
    while heap or not fed:
        if not heap:
            fed = True
            for k in ports_in:
                feed_input(k, t)
            if not heap:
                break
        t, _, what, data = heapq.heappop(heap)
        if limit_ps is not None and t > limit_ps:
            break
        events += 1
        if what == "arrive":
            o, i, v = data
            slot_state[o][i] = VALID
            slot_val[o][i] = v
            try_ready(o, t)
        elif what == "done":
            o, res = data
            executing.discard(o)
            pending[o] = dict(enumerate([res] * len(dests[o])))
            deliver(o, t)
        elif what == "free":
            (inst,) = data
            inst_busy[inst] = False
            try_dispatch(inst, t)
        elif what == "out":
            k, v = data
            if len(out_words[k]) < target:
                out_words[k].append(v)
                out_times[k].append(t)
            if all(len(out_words[p]) >= target for p in ports_out):
                break
        for n, e in enumerate(ring_edges):
            c = ring_count(e)
            ring_lo[n] = min(ring_lo[n], c)
            ring_hi[n] = max(ring_hi[n], c)

    deadlock = any(len(out_words[p]) < target for p in ports_out)
    first_out = ports_out[0] if ports_out else None
    times = out_times.get(first_out, [])
    latency = None
    if times and first_input is not None:
        latency = (times[0] - first_input) / 1000
    thr = 0.0 if deadlock else steady_throughput(times)
    return RunReport(
        outputs=out_words,
        latency_ns=latency,
        throughput_per_us=thr,
        deadlock=deadlock,
        level="TOKEN",
        completion_ns={k: [x / 1000 for x in v] for k, v in out_times.items()},
        dispatched=dict(dispatched),
        emitted=sum(len(v) for v in out_words.values()),
        link_histogram=dict(link_hist),
        ring_occupancy={r: (ring_init[n], ring_lo[n], ring_hi[n]) for n, r in enumerate(ring_list)},
        warnings=warnings,
        events=events,
    )
