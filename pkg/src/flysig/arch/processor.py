"""Processor instances: configuration/status control and the two simulation levels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..kernel import FixedDelays, SimulationError, default_delay_table
from .config import ConfigStatus, ProcessorConfig, validate_config
from .elaborate import Elaboration, elaborate, simulate_gates
from .token_sim import RunReport, simulate_tokens

LEVELS = ("GATE", "TOKEN")


@dataclass
class ProcessorStatus:
    """Readback of the configuration and status component."""

    state: str = "IDLE"  # IDLE | CONFIGURED | DONE | DEADLOCK
    scheduled_operations: int = 0
    registers: int = 0
    routed: int = 0
    instances: int = 0
    instances_used: int = 0
    warnings: list[str] = field(default_factory=list)
    tokens_dispatched: int = 0
    codewords_emitted: int = 0
    link_histogram: dict = field(default_factory=dict)
    runs: int = 0


@dataclass
class ProcessorInstance:
    name: str = "flysig"
    level: str = "TOKEN"
    config: ProcessorConfig | None = None
    status: ProcessorStatus = field(default_factory=ProcessorStatus)
    elaboration: Elaboration | None = None

    def __post_init__(self):
        if self.level not in LEVELS:
            raise SimulationError("BAD_LEVEL", self.level)

    @property
    def netlist(self):
        return None if self.elaboration is None else self.elaboration.netlist

    @property
    def input_ports(self) -> list[int]:
        return [] if self.config is None else self.config.input_ports()

    @property
    def output_ports(self) -> list[int]:
        return [] if self.config is None else self.config.output_ports()


def load_configuration(instance: ProcessorInstance, config: ProcessorConfig) -> ProcessorInstance:
    """Validate and install ``config``; at GATE level the netlist is elaborated here."""
    if instance.status.state not in ("IDLE", "DONE", "DEADLOCK"):
        raise SimulationError("BUSY", f"{instance.name} is {instance.status.state}")
    cs: ConfigStatus = validate_config(config)
    instance.config = config
    instance.elaboration = elaborate(config) if instance.level == "GATE" else None
    instance.status = ProcessorStatus(
        state="CONFIGURED",
        scheduled_operations=cs.scheduled_operations,
        registers=cs.registers,
        routed=cs.routed,
        instances=len(config.operators),
        instances_used=cs.instances_used,
        warnings=list(cs.warnings),
    )
    return instance


def _streams(streams, ports: Sequence[int]) -> dict[int, list[int]]:
    if isinstance(streams, Mapping):
        out = {int(k): list(v) for k, v in streams.items()}
    else:
        streams = list(streams)
        if len(ports) == 1 and (not streams or isinstance(streams[0], int)):
            out = {ports[0]: streams}
        else:
            out = dict(zip(ports, (list(s) for s in streams)))
    missing = [p for p in ports if p not in out]
    if missing:
        raise SimulationError("PORT_UNBOUND", f"no stream for input port(s) {missing}")
    return out


def simulate_processor(instance: ProcessorInstance | ProcessorConfig, streams, level: str | None = None,
                       delay_model=None, t_max_ns: float | None = None, samples: int | None = None,
                       monitor: str = "none") -> RunReport:
    """Run a configured processor on per-port input streams.

    TOKEN level takes its operator timing from the fixed delay table of
    ``delay_model`` (the default table for randomized models). The report's
    ``deadlock`` flag is set when an output port delivers fewer words than
    there were input samples.
    """
    if isinstance(instance, ProcessorConfig):
        cfg = instance
        instance = load_configuration(ProcessorInstance(cfg.name, (level or "TOKEN").upper()), cfg)
    return _run(instance, streams, level, delay_model, t_max_ns, samples, monitor)


def _run(instance, streams, level, delay_model, t_max_ns, samples, monitor) -> RunReport:
    level = (level or instance.level).upper()
    if level not in LEVELS:
        raise SimulationError("BAD_LEVEL", level)
    cfg = instance.config
    if cfg is None:
        raise SimulationError("NOT_CONFIGURED", instance.name)
    for r in cfg.routing.values():
        for d in r.dsts:
            if d.kind == "REMOTE":
                raise SimulationError("PORT_UNBOUND", f"{r.op_id} -> {d}: connect the processors first")
        for s in r.srcs:
            if s.startswith("remote:"):
                raise SimulationError("PORT_UNBOUND", f"{r.op_id} reads {s}")
    data = _streams(streams, cfg.input_ports())
    if level == "GATE":
        if instance.elaboration is None:
            instance.elaboration = elaborate(cfg)
        rep = simulate_gates(cfg, data, samples, delay_model, t_max_ns, monitor, elab=instance.elaboration)
    else:
        table = delay_model.table if isinstance(delay_model, FixedDelays) else default_delay_table()
        rep = simulate_tokens(cfg, data, samples, table, t_max_ns)
    st = instance.status
    st.state = "DEADLOCK" if rep.deadlock else "DONE"
    st.runs += 1
    st.tokens_dispatched += sum(rep.dispatched.values())
    st.codewords_emitted += rep.emitted
    for k, c in rep.link_histogram.items():
        st.link_histogram.setdefault(k, type(c)()).update(c)
    return rep
