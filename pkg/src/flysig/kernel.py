"""Deterministic event-driven gate-level simulator.

Nets are binary. Every gate has one output net and a delay; a gate whose
inputs change re-evaluates and, if its projected output differs, schedules the
new value ``delay`` later (inertial: a pending change that is undone before it
fires is cancelled). Time is kept in integer picoseconds so the event queue
ordering never depends on float rounding. Events at equal times are ordered by
net index, then by insertion sequence.

Environment processes (producers, consumers, monitors) attach as *agents*:
they watch nets and may answer a change with new primary-input events.
"""

from __future__ import annotations

import enum
import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

PS_PER_NS = 1000


class SimulationError(Exception):
    """Raised for malformed netlists and invalid simulation requests.

    ``code`` carries the machine-readable error kind, e.g. ``MULTIPLE_DRIVERS``.
    """

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class GateKind(enum.Enum):
    C_ELEMENT = "C_ELEMENT"
    C_ELEMENT3 = "C_ELEMENT3"
    AND2 = "AND2"
    OR2 = "OR2"
    OR3 = "OR3"
    NOR2 = "NOR2"
    BUF = "BUF"
    SOURCE = "SOURCE"
    PROBE = "PROBE"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def state_holding(self) -> bool:
        return self in (GateKind.C_ELEMENT, GateKind.C_ELEMENT3)


_ARITY = {
    GateKind.C_ELEMENT: 2,
    GateKind.C_ELEMENT3: 3,
    GateKind.AND2: 2,
    GateKind.OR2: 2,
    GateKind.OR3: 3,
    GateKind.NOR2: 2,
    GateKind.BUF: 1,
    GateKind.SOURCE: 0,
    GateKind.PROBE: 1,
}

# Small integer codes used by the inner loop.
_CODE = {kind: i for i, kind in enumerate(GateKind)}
_C2, _C3, _AND2, _OR2, _OR3, _NOR2, _BUF, _SOURCE, _PROBE = range(9)


def ns_to_ps(value) -> int:
    """Convert a nanosecond quantity (int, float, str, Decimal, Fraction) to ps."""
    if isinstance(value, Fraction):
        return round(value * PS_PER_NS)
    if isinstance(value, float):
        value = Decimal(repr(value))
    return int((Decimal(value) * PS_PER_NS).to_integral_value())


def ps_to_ns(value: int) -> float:
    return value / PS_PER_NS


def evaluate_gate(kind: GateKind, inputs: Sequence[int], previous_output: int = 0) -> int:
    """Boolean function of one gate; C-elements hold state when inputs disagree."""
    if len(inputs) != kind.arity:
        raise SimulationError("ARITY_MISMATCH", f"{kind.value} takes {kind.arity} inputs, got {len(inputs)}")
    if kind.state_holding:
        if all(inputs):
            return 1
        if not any(inputs):
            return 0
        return previous_output
    if kind is GateKind.AND2:
        return int(inputs[0] and inputs[1])
    if kind in (GateKind.OR2, GateKind.OR3):
        return int(any(inputs))
    if kind is GateKind.NOR2:
        return int(not (inputs[0] or inputs[1]))
    if kind in (GateKind.BUF, GateKind.PROBE):
        return int(inputs[0])
    return previous_output  # SOURCE: constant, set through ``init``


@dataclass(frozen=True)
class Gate:
    id: str
    kind: GateKind
    inputs: tuple[str, ...]
    output: str
    delay: Fraction | None = None  # ns; None defers to the delay model's table
    init: int = 0

    def __post_init__(self):
        if self.delay is not None and self.delay < 0:
            raise SimulationError("NEGATIVE_DELAY", self.id)


@dataclass(frozen=True)
class Netlist:
    name: str
    gates: tuple[Gate, ...]
    primary_inputs: tuple[str, ...]
    probes: tuple[str, ...] = ()
    aliases: tuple[tuple[str, str], ...] = ()  # (alias, canonical net)

    def __post_init__(self):
        object.__setattr__(self, "_compiled", None)

    @property
    def nets(self) -> tuple[str, ...]:
        return self.compiled.nets

    @property
    def compiled(self) -> "_Compiled":
        if self._compiled is None:
            object.__setattr__(self, "_compiled", _Compiled(self))
        return self._compiled

    def gate_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for g in self.gates:
            counts[g.kind.value] = counts.get(g.kind.value, 0) + 1
        return dict(sorted(counts.items()))

    def driver(self, net: str) -> Gate | None:
        return self.compiled.driver.get(self.resolve(net))

    def resolve(self, net: str) -> str:
        return dict(self.aliases).get(net, net)


class NetlistBuilder:
    """Mutable netlist under construction; ``finalize`` validates it."""

    def __init__(self, name: str = "netlist"):
        self.name = name
        self.gates: list[Gate] = []
        self.primary_inputs: list[str] = []
        self.probes: list[str] = []
        self._names: set[str] = set()
        self._counter = 0
        self._alias: dict[str, str] = {}

    def net(self, hint: str = "n") -> str:
        """Fresh, unique net name derived from ``hint``."""
        name = hint
        while name in self._names:
            self._counter += 1
            name = f"{hint}~{self._counter}"
        self._names.add(name)
        return name

    def add_gate(self, kind: GateKind, inputs: Sequence[str], output: str | None = None, *,
                 name: str | None = None, delay=None, init: int = 0) -> str:
        if output is None:
            output = self.net(name or kind.value.lower())
        else:
            self._names.add(output)
        gid = name or f"g{len(self.gates)}"
        d = None if delay is None else Fraction(ns_to_ps(delay), PS_PER_NS)
        self.gates.append(Gate(gid, kind, tuple(inputs), output, d, int(init)))
        return output

    def add_input(self, net: str | None = None, hint: str = "in") -> str:
        if net is None:
            net = self.net(hint)
        else:
            self._names.add(net)
        self.primary_inputs.append(net)
        return net

    def add_probe(self, net: str) -> None:
        self.probes.append(net)

    def alias(self, net: str, target: str) -> None:
        """Make ``net`` another name for ``target`` (merged at finalize)."""
        self._names.add(net)
        root = self.resolve(target)
        if self.resolve(net) == root:
            return
        if net in self._alias:
            raise SimulationError("MULTIPLE_DRIVERS", f"{net} aliased twice")
        self._alias[net] = root

    def resolve(self, net: str) -> str:
        while net in self._alias:
            net = self._alias[net]
        return net

    def finalize(self) -> Netlist:
        return finalize_netlist(self)


def finalize_netlist(builder: NetlistBuilder) -> Netlist:
    """Validate the builder's gates and freeze them into a :class:`Netlist`."""
    r = builder.resolve
    aliased = {a for a in builder._alias}
    for g in builder.gates:
        if g.output in aliased:
            raise SimulationError("MULTIPLE_DRIVERS", f"{g.output} is driven and aliased")
    for pi in builder.primary_inputs:
        if pi in aliased:
            raise SimulationError("MULTIPLE_DRIVERS", f"{pi} is a primary input and aliased")
    gates = [Gate(g.id, g.kind, tuple(r(n) for n in g.inputs), g.output, g.delay, g.init) for g in builder.gates]
    probes = [r(p) for p in builder.probes]
    drivers: dict[str, str] = {}
    for g in gates:
        if len(g.inputs) != g.kind.arity:
            raise SimulationError("ARITY_MISMATCH", f"gate {g.id}: {g.kind.value} with {len(g.inputs)} inputs")
        if g.output in drivers:
            raise SimulationError("MULTIPLE_DRIVERS", g.output)
        drivers[g.output] = g.id
    for pi in builder.primary_inputs:
        if pi in drivers:
            raise SimulationError("MULTIPLE_DRIVERS", f"{pi} is a primary input and a gate output")
    inputs = set(builder.primary_inputs)
    if len(inputs) != len(builder.primary_inputs):
        raise SimulationError("MULTIPLE_DRIVERS", "primary input listed twice")
    for g in gates:
        for net in g.inputs:
            if net not in drivers and net not in inputs:
                raise SimulationError("UNDRIVEN_NET", f"{net} (input of {g.id})")
    for p in probes:
        if p not in drivers and p not in inputs:
            raise SimulationError("UNDRIVEN_NET", f"probe {p}")
    aliases = tuple(sorted((a, r(a)) for a in builder._alias))
    return Netlist(builder.name, tuple(gates), tuple(builder.primary_inputs), tuple(probes), aliases)


class _Compiled:
    """Index-based view of a netlist used by the event loop."""

    def __init__(self, netlist: Netlist):
        nets: list[str] = list(netlist.primary_inputs)
        seen = set(nets)
        for g in netlist.gates:
            for n in (*g.inputs, g.output):
                if n not in seen:
                    seen.add(n)
                    nets.append(n)
        self.nets = tuple(nets)
        self.index = {n: i for i, n in enumerate(nets)}
        for a, target in netlist.aliases:
            if target in self.index:
                self.index[a] = self.index[target]
        self.driver = {g.output: g for g in netlist.gates}
        self.kind = [_CODE[g.kind] for g in netlist.gates]
        self.ins = [tuple(self.index[n] for n in g.inputs) for g in netlist.gates]
        self.out = [self.index[g.output] for g in netlist.gates]
        self.fanout: list[list[int]] = [[] for _ in nets]
        for gi, g in enumerate(netlist.gates):
            for n in set(self.ins[gi]):
                self.fanout[n].append(gi)
        self.primary = frozenset(self.index[n] for n in netlist.primary_inputs)


# ---------------------------------------------------------------------------
# Delay models

DEFAULT_DELAYS_NS: dict[str, str] = {
    "C_ELEMENT": "0.30",
    "C_ELEMENT3": "0.40",
    "AND2": "0.15",
    "OR2": "0.15",
    "OR3": "0.20",
    "NOR2": "0.10",
    "BUF": "0.10",
    "SOURCE": "0",
    "PROBE": "0",
    "DEFAULT": "0.20",
}


@dataclass(frozen=True)
class DelayTable:
    """Per-kind gate delays in ps; kinds not listed use ``default``."""

    delays: tuple[tuple[str, int], ...]
    default: int

    @classmethod
    def from_ns(cls, table: Mapping[str, object]) -> "DelayTable":
        table = dict(table)
        default = ns_to_ps(table.pop("DEFAULT", DEFAULT_DELAYS_NS["DEFAULT"]))
        entries = []
        for kind, value in table.items():
            GateKind(kind)  # validates the name
            ps = ns_to_ps(value)
            if ps < 0:
                raise SimulationError("NEGATIVE_DELAY", kind)
            entries.append((kind, ps))
        return cls(tuple(sorted(entries)), default)

    def ps(self, kind: GateKind) -> int:
        for k, v in self.delays:
            if k == kind.value:
                return v
        return self.default

    def to_text(self) -> str:
        lines = [f"{k} {Decimal(v) / PS_PER_NS}" for k, v in self.delays]
        lines.append(f"DEFAULT {Decimal(self.default) / PS_PER_NS}")
        return "\n".join(lines) + "\n"


def default_delay_table() -> DelayTable:
    return DelayTable.from_ns(DEFAULT_DELAYS_NS)


def parse_delay_table(text: str) -> DelayTable:
    """Parse ``<GATEKIND> <delay_ns>`` lines; ``#`` starts a comment.

    Kinds missing from the text fall back to the ``DEFAULT`` line, or to the
    built-in default when the text has none.
    """
    table: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SimulationError("SYNTAX", f"delay table line {lineno}: {raw!r}")
        kind, value = parts
        if kind != "DEFAULT":
            try:
                GateKind(kind)
            except ValueError:
                raise SimulationError("SYNTAX", f"delay table line {lineno}: unknown gate kind {kind}") from None
        try:
            Decimal(value)
        except ArithmeticError:
            raise SimulationError("SYNTAX", f"delay table line {lineno}: bad delay {value!r}") from None
        table[kind] = value
    table.setdefault("DEFAULT", DEFAULT_DELAYS_NS["DEFAULT"])
    return DelayTable.from_ns(table)


@dataclass(frozen=True)
class FixedDelays:
    table: DelayTable = field(default_factory=default_delay_table)

    def assign(self, netlist: Netlist) -> list[int]:
        return [ns_to_ps(g.delay) if g.delay is not None else self.table.ps(g.kind) for g in netlist.gates]


@dataclass(frozen=True)
class RandomizedDelays:
    """One uniform delay per gate from ``[min_ns, max_ns]``; fixed per seed."""

    min_ns: Fraction = Fraction(1, 10)
    max_ns: Fraction = Fraction(2)
    seed: int = 0

    def assign(self, netlist: Netlist) -> list[int]:
        lo, hi = ns_to_ps(self.min_ns), ns_to_ps(self.max_ns)
        if lo > hi or lo < 0:
            raise SimulationError("BAD_DELAY_BOUNDS", f"[{self.min_ns}, {self.max_ns}]")
        rng = random.Random(self.seed & 0xFFFFFFFFFFFFFFFF)
        return [rng.randint(lo, hi) for _ in netlist.gates]


DelayModel = FixedDelays | RandomizedDelays


# ---------------------------------------------------------------------------
# Simulation


class Agent:
    """An environment process attached to a simulation.

    ``watch`` lists the nets whose changes are delivered to :meth:`react`.
    Both :meth:`start` and :meth:`react` return ``(time_ps, net, value)``
    events to schedule on primary inputs; times must not lie in the past.
    """

    watch: tuple[str, ...] = ()

    def start(self, sim: "Simulator") -> Iterable[tuple[int, str, int]]:
        return ()

    def react(self, sim: "Simulator", time: int, net: str, value: int) -> Iterable[tuple[int, str, int]]:
        return ()


@dataclass
class Trace:
    """Result of a simulation run. Times are integer picoseconds."""

    events: list[tuple[int, str, int]]
    final_values: dict[str, int]
    quiescent_at: int | None
    t_max: int
    initial_values: dict[str, int]
    event_count: int = 0
    aliases: dict[str, str] = field(default_factory=dict)

    def resolve(self, net: str) -> str:
        return self.aliases.get(net, net)

    def events_on(self, net: str) -> list[tuple[int, int]]:
        net = self.resolve(net)
        return [(t, v) for t, n, v in self.events if n == net]

    def value(self, net: str) -> int:
        return self.final_values[self.resolve(net)]

    def initial(self, net: str) -> int:
        return self.initial_values.get(self.resolve(net), 0)

    @property
    def settled(self) -> bool:
        return self.quiescent_at is not None


class Simulator:
    """One simulation instance; not shared between threads or processes."""

    def __init__(self, netlist: Netlist, delay_model: DelayModel | None = None,
                 agents: Sequence[Agent] = (), record: Iterable[str] | None = None):
        self.netlist = netlist
        c = netlist.compiled
        self._c = c
        self.delays = (delay_model or FixedDelays()).assign(netlist)
        self.agents = list(agents)
        n = len(c.nets)
        self.val = [0] * n
        for gi, g in enumerate(netlist.gates):
            if g.init:
                self.val[c.out[gi]] = 1
        self._settle_from_init()
        self.initial = {c.nets[i]: v for i, v in enumerate(self.val) if v}
        self._pending = [None] * n  # projected value of a scheduled change
        self._ver = [0] * n
        self._heap: list[tuple[int, int, int, int, int]] = []
        self._seq = 0
        self.now = 0
        self._watchers: list[list[Agent] | None] = [None] * n
        for a in self.agents:
            for net in a.watch:
                i = c.index[net]
                if self._watchers[i] is None:
                    self._watchers[i] = []
                self._watchers[i].append((a, net))
        if record is None:
            self._record = None
        else:
            self._record = bytearray(n)
            for net in record:
                self._record[c.index[net]] = 1
        self.events: list[tuple[int, str, int]] = []
        self.event_count = 0

    def _settle_from_init(self) -> None:
        # Reset epoch: with C-elements held at their reset values, every
        # combinational net is brought to its consistent value before time
        # starts. Netlists without initialised state skip this, so free
        # running loops (oscillators) start from all zeros.
        if not any(g.init for g in self.netlist.gates):
            return
        c = self._c
        val = self.val
        work = deque(range(len(self.netlist.gates)))
        budget = 50 * len(self.netlist.gates) + 100
        while work and budget > 0:
            budget -= 1
            gi = work.popleft()
            k = c.kind[gi]
            if k in (_C2, _C3, _SOURCE):
                continue
            nv = _eval(k, c.ins[gi], val, c.out[gi])
            o = c.out[gi]
            if nv != val[o]:
                val[o] = nv
                work.extend(c.fanout[o])

    def value(self, net: str) -> int:
        return self.val[self._c.index[net]]

    def schedule(self, time: int, net: str, value: int) -> None:
        i = self._c.index[net]
        if i not in self._c.primary:
            raise SimulationError("NOT_A_PRIMARY_INPUT", net)
        if time < self.now:
            raise SimulationError("CAUSALITY", f"event for {net} at {time} < now {self.now}")
        self._seq += 1
        heapq.heappush(self._heap, (time, i, self._seq, value, -1))

    def run(self, t_max: int) -> Trace:
        c = self._c
        val = self.val
        pending = self._pending
        ver = self._ver
        heap = self._heap
        delays = self.delays
        kinds, ins, outs, fanout = c.kind, c.ins, c.out, c.fanout
        nets = c.nets
        watchers = self._watchers
        record = self._record
        events = self.events
        push, pop = heapq.heappush, heapq.heappop

        # Every gate is evaluated once at t=0.
        seq = self._seq
        for gi in range(len(kinds)):
            k = kinds[gi]
            if k == _SOURCE:
                continue
            o = outs[gi]
            nv = _eval(k, ins[gi], val, o)
            cur = pending[o] if pending[o] is not None else val[o]
            if nv != cur:
                if pending[o] is not None:
                    pending[o] = None
                    ver[o] += 1
                else:
                    seq += 1
                    pending[o] = nv
                    push(heap, (delays[gi], o, seq, nv, ver[o]))
        self._seq = seq
        for a in self.agents:
            for t, net, v in a.start(self):
                self.schedule(t, net, v)
        seq = self._seq

        count = 0
        now = 0
        while heap:
            t, n, _, v, vr = heap[0]
            if t > t_max:
                break
            pop(heap)
            if vr >= 0:
                if vr != ver[n]:
                    continue
                pending[n] = None
            if val[n] == v:
                continue
            now = t
            val[n] = v
            count += 1
            if record is None or record[n]:
                events.append((t, nets[n], v))
            for gi in fanout[n]:
                o = outs[gi]
                k = kinds[gi]
                ii = ins[gi]
                if k == _C2:
                    a = val[ii[0]]
                    nv = a if a == val[ii[1]] else val[o]
                elif k == _OR2:
                    nv = val[ii[0]] | val[ii[1]]
                elif k == _NOR2:
                    nv = 1 - (val[ii[0]] | val[ii[1]])
                elif k == _AND2:
                    nv = val[ii[0]] & val[ii[1]]
                elif k == _C3:
                    a = val[ii[0]]
                    nv = a if a == val[ii[1]] == val[ii[2]] else val[o]
                elif k == _OR3:
                    nv = val[ii[0]] | val[ii[1]] | val[ii[2]]
                else:
                    nv = val[ii[0]]
                p = pending[o]
                if p is None:
                    if nv != val[o]:
                        seq += 1
                        pending[o] = nv
                        push(heap, (t + delays[gi], o, seq, nv, ver[o]))
                elif nv != p:
                    pending[o] = None
                    ver[o] += 1
            w = watchers[n]
            if w is not None:
                self.now = t
                self._seq = seq
                for agent, name in w:
                    for te, net, ve in agent.react(self, t, name, v):
                        self.schedule(te, net, ve)
                seq = self._seq
        self._seq = seq
        self.now = now
        self.event_count += count
        quiescent = None if heap else now
        return Trace(
            events=events,
            final_values={nets[i]: val[i] for i in range(len(nets))},
            quiescent_at=quiescent,
            t_max=t_max,
            initial_values=dict(self.initial),
            event_count=self.event_count,
            aliases=dict(self.netlist.aliases),
        )


def _eval(k: int, ii: tuple[int, ...], val: list[int], o: int) -> int:
    if k == _C2:
        a = val[ii[0]]
        return a if a == val[ii[1]] else val[o]
    if k == _C3:
        a = val[ii[0]]
        return a if a == val[ii[1]] == val[ii[2]] else val[o]
    if k == _AND2:
        return val[ii[0]] & val[ii[1]]
    if k == _OR2:
        return val[ii[0]] | val[ii[1]]
    if k == _OR3:
        return val[ii[0]] | val[ii[1]] | val[ii[2]]
    if k == _NOR2:
        return 1 - (val[ii[0]] | val[ii[1]])
    if k == _SOURCE:
        return val[o]
    return val[ii[0]]


def simulate(netlist: Netlist, stimuli: Iterable[tuple[object, str, int]] = (),
             delay_model: DelayModel | None = None, t_max=1000, *,
             agents: Sequence[Agent] = (), record: Iterable[str] | None = None) -> Trace:
    """Run ``netlist`` from reset until ``t_max`` ns or quiescence.

    ``stimuli`` are ``(time_ns, primary_input, value)`` triples. ``record``
    restricts the trace to the given nets (default: all nets).
    """
    stimuli = [(ns_to_ps(t), net, int(v)) for t, net, v in stimuli]
    t_max_ps = ns_to_ps(t_max)
    for t, net, _ in stimuli:
        if t < 0:
            raise SimulationError("BAD_STIMULUS", f"negative time for {net}")
        if t >= t_max_ps:
            raise SimulationError("BAD_STIMULUS", f"stimulus for {net} at or after t_max")
    sim = Simulator(netlist, delay_model, agents, record)
    for t, net, v in stimuli:
        sim.schedule(t, net, v)
    return sim.run(t_max_ps)


# ---------------------------------------------------------------------------
# Deadlock detection


@dataclass(frozen=True)
class DeadlockReport:
    status: str  # OK | DEADLOCK | OSCILLATION_AT_TMAX
    observed: int
    expected: int
    at: int | None

    @property
    def ok(self) -> bool:
        return self.status == "OK"


def count_probe_events(trace: Trace, probes: Iterable[str]) -> int:
    probes = set(probes)
    return sum(1 for _, n, v in trace.events if v == 1 and n in probes)


def deadlock_check(trace: Trace, expected_probe_events: int, probes: Iterable[str] | None = None,
                   observed: int | None = None) -> DeadlockReport:
    """Classify a finished run.

    A probe event is a rising edge on a probe net (harnesses probe the
    acknowledge wire of each output, so one rising edge is one codeword).
    """
    if observed is None:
        observed = count_probe_events(trace, probes or ())
    if trace.quiescent_at is None:
        return DeadlockReport("OSCILLATION_AT_TMAX", observed, expected_probe_events, None)
    if observed < expected_probe_events:
        return DeadlockReport("DEADLOCK", observed, expected_probe_events, trace.quiescent_at)
    return DeadlockReport("OK", observed, expected_probe_events, trace.quiescent_at)
