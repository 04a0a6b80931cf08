"""Gate-level building blocks shared by the operator builders.

Convention for every builder: an *input* channel arrives with its rails
driven elsewhere and its ack net named but undriven; the builder drives that
ack. An *output* channel is returned with rails driven by the builder and a
fresh ack net that whoever consumes the channel must drive.
"""

from __future__ import annotations

import enum
from typing import Sequence

from ..dualrail import Channel
from ..kernel import GateKind as K
from ..kernel import NetlistBuilder


class RegisterInit(enum.Enum):
    EMPTY_INIT = "EMPTY"
    ZERO_INIT = "ZERO"
    ONE_INIT = "ONE"

    @classmethod
    def for_bit(cls, bit: int | None) -> "RegisterInit":
        if bit is None:
            return cls.EMPTY_INIT
        return cls.ONE_INIT if bit else cls.ZERO_INIT

    @property
    def token(self) -> int | None:
        return {RegisterInit.EMPTY_INIT: None, RegisterInit.ZERO_INIT: 0, RegisterInit.ONE_INIT: 1}[self]


def new_channel(b: NetlistBuilder, t: str, f: str, hint: str) -> Channel:
    return Channel(t, f, b.net(f"{hint}.ack"))


def input_channel(b: NetlistBuilder, hint: str) -> Channel:
    """Channel whose rails are primary inputs (driven by a producer)."""
    t = b.add_input(hint=f"{hint}.t")
    f = b.add_input(hint=f"{hint}.f")
    return Channel(t, f, b.net(f"{hint}.ack"))


def terminate(b: NetlistBuilder, ch: Channel) -> Channel:
    """Make ``ch``'s ack a primary input so an environment consumer drives it."""
    b.add_input(ch.ack)
    return ch


def inverter(b: NetlistBuilder, net: str, hint: str) -> str:
    return b.add_gate(K.NOR2, [net, net], b.net(hint))


def completion(b: NetlistBuilder, ch: Channel, hint: str) -> str:
    """1 while the channel carries a codeword."""
    return b.add_gate(K.OR2, [ch.t, ch.f], b.net(hint))


def rail_completion(b: NetlistBuilder, rails: tuple[str, str], hint: str) -> str:
    return b.add_gate(K.OR2, list(rails), b.net(hint))


def c_tree(b: NetlistBuilder, nets: Sequence[str], hint: str, output: str | None = None) -> str:
    """C-element tree: rises once all inputs are 1, falls once all are 0."""
    nets = list(nets)
    if not nets:
        raise ValueError("empty C-element tree")
    if len(nets) == 1:
        if output is None:
            return nets[0]
        return b.add_gate(K.BUF, nets, output)
    while len(nets) > 3:
        grouped = []
        i = 0
        while i < len(nets):
            chunk = nets[i:i + 3] if len(nets) - i != 4 else nets[i:i + 2]
            if len(chunk) == 1:
                grouped.append(chunk[0])
            else:
                kind = K.C_ELEMENT3 if len(chunk) == 3 else K.C_ELEMENT
                grouped.append(b.add_gate(kind, chunk, b.net(hint)))
            i += len(chunk)
        nets = grouped
    kind = K.C_ELEMENT3 if len(nets) == 3 else K.C_ELEMENT
    return b.add_gate(kind, nets, output or b.net(hint))


def or_tree(b: NetlistBuilder, nets: Sequence[str], hint: str, output: str | None = None) -> str:
    nets = list(nets)
    if len(nets) == 1:
        return b.add_gate(K.BUF, nets, output or b.net(hint))
    while len(nets) > 3:
        grouped = []
        i = 0
        while i < len(nets):
            chunk = nets[i:i + 3] if len(nets) - i != 4 else nets[i:i + 2]
            if len(chunk) == 1:
                grouped.append(chunk[0])
            else:
                kind = K.OR3 if len(chunk) == 3 else K.OR2
                grouped.append(b.add_gate(kind, chunk, b.net(hint)))
            i += len(chunk)
        nets = grouped
    kind = K.OR3 if len(nets) == 3 else K.OR2
    return b.add_gate(kind, nets, output or b.net(hint))


def latch(b: NetlistBuilder, d: Channel, init: RegisterInit = RegisterInit.EMPTY_INIT,
          hint: str = "st") -> Channel:
    """One dual-rail pipeline stage.

    Each rail is a C-element of the data rail and the inverted downstream
    ack; the stage acknowledges its input with the OR of its output rails.
    """
    ack_out = b.net(f"{hint}.ack")
    en = inverter(b, ack_out, f"{hint}.en")
    qt = b.add_gate(K.C_ELEMENT, [d.t, en], b.net(f"{hint}.t"), init=init is RegisterInit.ONE_INIT)
    qf = b.add_gate(K.C_ELEMENT, [d.f, en], b.net(f"{hint}.f"), init=init is RegisterInit.ZERO_INIT)
    b.add_gate(K.OR2, [qt, qf], d.ack)
    return Channel(qt, qf, ack_out)


def chain(b: NetlistBuilder, d: Channel, inits: Sequence[RegisterInit], hint: str = "st") -> Channel:
    """Series of latch stages; ``inits[0]`` is nearest the input."""
    for i, init in enumerate(inits):
        d = latch(b, d, init, f"{hint}{i}")
    return d


def fork(b: NetlistBuilder, d: Channel, n: int = 2, hint: str = "fork") -> list[Channel]:
    """Copy a channel to ``n`` consumers; the input is acknowledged once all have."""
    outs = [Channel(d.t, d.f, b.net(f"{hint}.ack{i}")) for i in range(n)]
    if n == 1:
        b.alias(d.ack, outs[0].ack)
        return outs
    c_tree(b, [o.ack for o in outs], f"{hint}.c", output=d.ack)
    return outs


def sink(b: NetlistBuilder, d: Channel, hint: str = "sink") -> None:
    """Absorb every codeword on ``d`` (ack follows data completion)."""
    b.add_gate(K.OR2, [d.t, d.f], d.ack)


# Dual-rail logic. Rails are monotone AND/OR functions of input rails, so
# outputs only rise during the evaluate phase and only fall during reset.
# Indication is not guaranteed here; function blocks add input completion.


def dr_and(b: NetlistBuilder, x: tuple[str, str], y: tuple[str, str], hint: str) -> tuple[str, str]:
    t = b.add_gate(K.AND2, [x[0], y[0]], b.net(f"{hint}.t"))
    f = b.add_gate(K.OR2, [x[1], y[1]], b.net(f"{hint}.f"))
    return t, f


def dr_or(b: NetlistBuilder, x: tuple[str, str], y: tuple[str, str], hint: str) -> tuple[str, str]:
    t = b.add_gate(K.OR2, [x[0], y[0]], b.net(f"{hint}.t"))
    f = b.add_gate(K.AND2, [x[1], y[1]], b.net(f"{hint}.f"))
    return t, f


def dr_xor(b: NetlistBuilder, x: tuple[str, str], y: tuple[str, str], hint: str) -> tuple[tuple[str, str], dict]:
    """Dual-rail XOR built on the four rail products (returned for reuse)."""
    p = {
        "tt": b.add_gate(K.AND2, [x[0], y[0]], b.net(f"{hint}.tt")),
        "tf": b.add_gate(K.AND2, [x[0], y[1]], b.net(f"{hint}.tf")),
        "ft": b.add_gate(K.AND2, [x[1], y[0]], b.net(f"{hint}.ft")),
        "ff": b.add_gate(K.AND2, [x[1], y[1]], b.net(f"{hint}.ff")),
    }
    t = b.add_gate(K.OR2, [p["tf"], p["ft"]], b.net(f"{hint}.t"))
    f = b.add_gate(K.OR2, [p["tt"], p["ff"]], b.net(f"{hint}.f"))
    return (t, f), p
