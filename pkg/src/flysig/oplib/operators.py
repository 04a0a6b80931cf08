"""Operator registry: specs, gate-level fragments, behavioral models, harness."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..dualrail import Channel, Consumer, Producer, ProtocolReport, monitor_channel
from ..kernel import (DelayTable, FixedDelays, NetlistBuilder, Netlist, SimulationError, default_delay_table,
                      ps_to_ns, simulate)
from . import builders as bl
from .cells import RegisterInit, input_channel, terminate

KINDS = ("REG", "SHIFT_REG", "RSELECT", "WSELECT", "FORK", "JOIN", "DIMS_ADD", "DR_ADD", "SERIAL_ADDER",
         "SHIFT", "CONST")

# role names; a tuple in OUT_PORTS means the outputs share one ack (bundle)
IN_PORTS = {
    "REG": ("d",), "SHIFT_REG": ("d",), "RSELECT": ("sel", "T", "F"), "WSELECT": ("d", "sel"),
    "FORK": ("d",), "JOIN": ("a", "b"), "DIMS_ADD": ("a", "b", "cin"), "DR_ADD": ("a", "b", "cin"),
    "SERIAL_ADDER": ("a", "b"), "SHIFT": ("d",), "CONST": (),
}
OUT_PORTS = {
    "REG": ("q",), "SHIFT_REG": ("q",), "RSELECT": ("y",), "WSELECT": ("T", "F"), "FORK": ("y1", "y2"),
    "JOIN": (("a", "b"),), "DIMS_ADD": ("sum", "cout"), "DR_ADD": ("sum", "cout"), "SERIAL_ADDER": ("s",),
    "SHIFT": ("q",), "CONST": ("q",),
}


@dataclass(frozen=True)
class OperatorSpec:
    """An operator kind plus parameters.

    Parameters by kind: REG ``init``; SHIFT_REG ``inits`` (tuple of
    RegisterInit); SERIAL_ADDER ``width``, ``subtract``, ``core``; SHIFT
    ``width``, ``amount``; CONST ``width``, ``value``.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SimulationError("UNKNOWN_OPERATOR", self.kind)

    @classmethod
    def make(cls, kind: str, **params) -> "OperatorSpec":
        return cls(kind, tuple(sorted(params.items())))

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    @property
    def in_ports(self) -> tuple[str, ...]:
        return IN_PORTS[self.kind]

    @property
    def out_roles(self) -> tuple:
        return OUT_PORTS[self.kind]


@dataclass
class Fragment:
    """A built operator inside some builder, with its named port channels."""

    spec: OperatorSpec
    inputs: dict[str, Channel]
    outputs: dict[str, Channel]
    resources: bl.Resources = field(default_factory=bl.Resources)


def build_fragment(b: NetlistBuilder, spec: OperatorSpec, inputs: Mapping[str, Channel], hint: str = "op") -> Fragment:
    """Instantiate ``spec`` in ``b`` reading from the given input channels."""
    k = spec.kind
    missing = [p for p in spec.in_ports if p not in inputs]
    if missing or len(inputs) != len(spec.in_ports):
        raise SimulationError("PORT_MISMATCH", f"{k} needs ports {spec.in_ports}, got {sorted(inputs)}")
    res = bl.Resources()
    if k == "REG":
        outs = {"q": bl.build_register(b, inputs["d"], spec.get("init", bl.E), hint)}
        res.stages = 1
    elif k == "SHIFT_REG":
        inits = spec.get("inits", (bl.E,))
        outs = {"q": bl.build_shift_register(b, inputs["d"], inits, hint)}
        res.stages = 2 * len(inits)
    elif k == "RSELECT":
        outs = {"y": bl.build_rselect(b, inputs["sel"], inputs["T"], inputs["F"], hint)}
    elif k == "WSELECT":
        t, f = bl.build_wselect(b, inputs["d"], inputs["sel"], hint)
        outs = {"T": t, "F": f}
    elif k == "FORK":
        y1, y2 = bl.build_fork(b, inputs["d"], hint)
        outs = {"y1": y1, "y2": y2}
    elif k == "JOIN":
        a, c = bl.build_join(b, inputs["a"], inputs["b"], hint)
        outs = {"a": a, "b": c}
    elif k in ("DIMS_ADD", "DR_ADD"):
        core = "DIMS" if k == "DIMS_ADD" else "DR"
        s, co, res = bl.build_adder_cell(b, inputs["a"], inputs["b"], inputs["cin"], core, hint)
        outs = {"sum": s, "cout": co}
    elif k == "SERIAL_ADDER":
        outs = {"s": bl.build_serial_adder(b, inputs["a"], inputs["b"], spec.get("width", 8),
                                           subtract=spec.get("subtract", False), core=spec.get("core", "DR"),
                                           hint=hint)}
    elif k == "SHIFT":
        outs = {"q": bl.build_shift(b, inputs["d"], spec.get("width", 8), spec.get("amount", 1), hint)}
    else:  # CONST
        outs = {"q": bl.build_constant(b, spec.get("value", 0), spec.get("width", 8), hint)}
    return Fragment(spec, dict(inputs), outs, res)


@dataclass
class BuiltOperator:
    """A stand-alone operator netlist with environment-facing ports."""

    fragment: Fragment
    netlist: Netlist

    @property
    def channels(self) -> list[Channel]:
        return list(self.fragment.inputs.values()) + list(self.fragment.outputs.values())


@functools.lru_cache(maxsize=256)
def build_operator(spec: OperatorSpec) -> BuiltOperator:
    b = NetlistBuilder(spec.kind.lower())
    ins = {p: input_channel(b, p) for p in spec.in_ports}
    frag = build_fragment(b, spec, ins, "op")
    for role in spec.out_roles:
        ch = frag.outputs[role[0] if isinstance(role, tuple) else role]
        terminate(b, ch)
    return BuiltOperator(frag, b.finalize())


# ---------------------------------------------------------------------------
# Behavioral models (the fast simulation level)


def _serial_add(a, b, width, subtract):
    out = []
    carry = 0
    for i, (x, y) in enumerate(zip(a, b)):
        if i % width == 0:
            carry = 1 if subtract else 0
        if subtract:
            y = 1 - y
        s = x + y + carry
        out.append(s & 1)
        carry = s >> 1
    return out


def _initial_tokens(spec: OperatorSpec) -> list[int]:
    if spec.kind == "REG":
        inits = [spec.get("init", bl.E)]
    elif spec.kind == "SHIFT_REG":
        inits = list(spec.get("inits", (bl.E,)))
    elif spec.kind == "SHIFT":
        return [0] * spec.get("amount", 1)
    else:
        return []
    return [i.token for i in inits if i.token is not None]


def behavioral_model(spec: OperatorSpec) -> Callable[..., dict]:
    """Pure stream function: input bit lists by port -> output bit lists by port.

    The result is the output a gate-level run produces once all finite inputs
    are consumed (CONST takes a ``count`` keyword instead of inputs).
    """
    k = spec.kind

    def run(**streams):
        if k in ("REG", "SHIFT_REG"):
            return {"q": _initial_tokens(spec) + list(streams["d"])}
        if k == "RSELECT":
            t, f = list(streams["T"]), list(streams["F"])
            out = []
            for s in streams["sel"]:
                src = t if s else f
                if not src:
                    break
                out.append(src.pop(0))
            return {"y": out}
        if k == "WSELECT":
            out = {"T": [], "F": []}
            for x, s in zip(streams["d"], streams["sel"]):
                out["T" if s else "F"].append(x)
            return out
        if k == "FORK":
            return {"y1": list(streams["d"]), "y2": list(streams["d"])}
        if k == "JOIN":
            return {"a": list(zip(streams["a"], streams["b"]))}
        if k in ("DIMS_ADD", "DR_ADD"):
            tot = [x + y + c for x, y, c in zip(streams["a"], streams["b"], streams["cin"])]
            return {"sum": [t & 1 for t in tot], "cout": [t >> 1 for t in tot]}
        if k == "SERIAL_ADDER":
            return {"s": _serial_add(streams["a"], streams["b"], spec.get("width", 8), spec.get("subtract", False))}
        if k == "SHIFT":
            w, s = spec.get("width", 8), spec.get("amount", 1)
            z = [0] * s + list(streams["d"])
            return {"q": [0 if i % w < s else x for i, x in enumerate(z)]}
        if k == "CONST":
            w, v = spec.get("width", 8), spec.get("value", 0)
            return {"q": [(v >> (i % w)) & 1 for i in range(streams.get("count", w))]}
        raise SimulationError("UNKNOWN_OPERATOR", k)

    return run


# ---------------------------------------------------------------------------
# Harness


@dataclass
class OperatorRun:
    outputs: dict[str, list]
    reports: list[ProtocolReport]
    first_input: int | None
    output_times: dict[str, list[int]]
    producers: dict[str, Producer]
    quiescent: bool

    @property
    def clean(self) -> bool:
        return all(r.clean for r in self.reports)

    @property
    def violations(self) -> list:
        return [(r.channel, v) for r in self.reports for v in r.violations]


def run_operator(spec: OperatorSpec, streams: Mapping[str, Sequence[int]], delay_model=None,
                 t_max_ns: float = 100_000, limit: int | None = None, monitor: bool = True) -> OperatorRun:
    """Drive a stand-alone operator with producers and always-ready consumers."""
    built = build_operator(spec)
    frag = built.fragment
    producers = {p: Producer(frag.inputs[p], list(streams[p])) for p in spec.in_ports if streams.get(p)}
    consumers = {}
    for role in spec.out_roles:
        if isinstance(role, tuple):
            consumers[role[0]] = Consumer([frag.outputs[r] for r in role], limit=limit)
        else:
            consumers[role] = Consumer(frag.outputs[role], limit=limit)
    # starved inputs: nothing drives them, rails stay EMPTY
    watched = [n for ch in built.channels for n in ch.nets] if monitor else []
    trace = simulate(built.netlist, delay_model=delay_model, t_max=t_max_ns,
                     agents=list(producers.values()) + list(consumers.values()), record=watched)
    reports = [monitor_channel(trace, ch) for ch in built.channels] if monitor else []
    firsts = [p.first_emit for p in producers.values() if p.first_emit is not None]
    return OperatorRun(
        outputs={r: c.values for r, c in consumers.items()},
        reports=reports,
        first_input=min(firsts) if firsts else None,
        output_times={r: c.times for r, c in consumers.items()},
        producers=producers,
        quiescent=trace.quiescent_at is not None,
    )


@dataclass(frozen=True)
class OperatorCharacterization:
    forward_latency: float  # ns
    cycle_time: float  # ns


def _saturating_streams(spec: OperatorSpec, n: int) -> dict[str, list[int]]:
    pattern = [1, 0, 0, 1, 1, 0, 1, 0]
    streams = {}
    for p in spec.in_ports:
        if p == "sel":
            streams[p] = [1] * n
        else:
            streams[p] = [pattern[i % len(pattern)] for i in range(n)]
    if spec.kind == "RSELECT":
        streams["F"] = [0]
    return streams


@functools.lru_cache(maxsize=512)
def _characterize(spec: OperatorSpec, table: DelayTable, n: int) -> OperatorCharacterization:
    run = run_operator(spec, _saturating_streams(spec, n), FixedDelays(table), limit=n if not spec.in_ports else None,
                       monitor=False)
    role = next(iter(run.output_times))
    times = run.output_times[role]
    if len(times) < max(4, n // 2):
        raise SimulationError("DEADLOCK", f"{spec.kind} produced {len(times)} of {n} outputs")
    skip = len(_initial_tokens(spec))
    start = run.first_input if run.first_input is not None else 0
    latency = times[skip] - start if skip < len(times) else times[0]
    half = len(times) // 2
    cycle = (times[-1] - times[half]) / (len(times) - 1 - half)
    return OperatorCharacterization(ps_to_ns(latency), cycle / 1000)


def characterize(spec: OperatorSpec, delay_table: DelayTable | None = None, samples: int = 40) -> OperatorCharacterization:
    """Forward latency and steady-state cycle time under a fixed delay table.

    Latency runs from the first input codeword to the output codeword that
    carries it (initial tokens are skipped); cycle time is the mean output
    period over the second half of a saturated run.
    """
    return _characterize(spec, delay_table or default_delay_table(), samples)
