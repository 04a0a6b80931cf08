"""Mutation fixtures: small pipelines with one deliberately broken stage."""

from __future__ import annotations

from dataclasses import dataclass, field

from flysig.dualrail import Channel, Consumer, Producer, monitor_channel
from flysig.kernel import GateKind as K, NetlistBuilder, simulate
from flysig.oplib.cells import input_channel, latch, terminate


def bypassed_latch(b: NetlistBuilder, d: Channel, hint: str) -> Channel:
    """A stage whose enable ignores the downstream ack: rails are plain buffers."""
    qt = b.add_gate(K.BUF, [d.t], b.net(f"{hint}.t"))
    qf = b.add_gate(K.BUF, [d.f], b.net(f"{hint}.f"))
    b.add_gate(K.OR2, [qt, qf], d.ack)
    return Channel(qt, qf, b.net(f"{hint}.ack"))


@dataclass
class PipelineSubject:
    """Producer -> 5 stages -> consumer; stage 1 is bypassed when ``broken``."""

    bits: list[int]
    broken: bool = False
    name: str = field(default="pipeline")

    def run(self, delay_model):
        b = NetlistBuilder(self.name)
        src = input_channel(b, "in")
        chans = [src]
        d = latch(b, src, hint="s0")
        chans.append(d)
        d = bypassed_latch(b, d, "s1") if self.broken else latch(b, d, hint="s1")
        chans.append(d)
        for k in range(2, 5):
            d = latch(b, d, hint=f"s{k}")
            chans.append(d)
        terminate(b, d)
        prod, cons = Producer(src, self.bits), Consumer(d)
        trace = simulate(b.finalize(), delay_model=delay_model, t_max=20_000, agents=[prod, cons])
        violations = [(ch, v) for ch in chans for v in monitor_channel(trace, ch).violations]
        err = None if cons.values == self.bits else "received sequence differs from the sent one"
        return cons.values, violations, err
