"""Gate-level operator builders (registers, control, arithmetic)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..dualrail import Channel
from ..kernel import GateKind as K
from ..kernel import NetlistBuilder
from .cells import (RegisterInit, c_tree, chain, completion, rail_completion, dr_and, dr_or, dr_xor, fork, latch,
                    new_channel, or_tree)

E, Z, O = RegisterInit.EMPTY_INIT, RegisterInit.ZERO_INIT, RegisterInit.ONE_INIT


@dataclass
class Resources:
    """Structural counts of one built operator (beyond raw gate counts)."""

    dual_rail_gates: int = 0
    c_elements: int = 0
    stages: int = 0
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Storage


def shift_register_inits(inits: Sequence[RegisterInit]) -> list[RegisterInit]:
    """Physical stage list (input side first) for a shift register.

    ``inits[0]`` is the token emitted first. Every listed stage is preceded
    upstream by an empty stage, so a token never sits right behind a channel
    whose acknowledge it would hold high at reset.
    """
    physical: list[RegisterInit] = []
    for init in reversed(list(inits)):
        physical += [E, init]
    return physical


def build_register(b: NetlistBuilder, d: Channel, init: RegisterInit = E, hint: str = "reg") -> Channel:
    return latch(b, d, init, hint)


def build_shift_register(b: NetlistBuilder, d: Channel, inits: Sequence[RegisterInit], hint: str = "sr") -> Channel:
    if not len(inits):
        raise ValueError("shift register needs at least one stage")
    return chain(b, d, shift_register_inits(inits), hint)


def build_word_register(b: NetlistBuilder, d: Channel, width: int, init: int | None, hint: str = "wreg") -> Channel:
    """Word-level delay: ``width`` bit stages holding ``init`` LSB-first.

    With ``init=None`` the register is a single empty basic register (plus
    its interleaved empty stage): it only adds slack, no sample delay.
    """
    if init is None:
        return build_shift_register(b, d, [E], hint)
    bits = [(init >> i) & 1 for i in range(width)]
    return build_shift_register(b, d, [RegisterInit.for_bit(x) for x in bits], hint)


def pattern_source(b: NetlistBuilder, bits: Sequence[int], hint: str = "pat", slack: int | None = None) -> Channel:
    """Ring that repeats ``bits`` forever on its output channel.

    The ring holds one token per pattern bit with an empty stage after each
    and ``slack`` extra empty stages (bubbles) so it can circulate.
    """
    bits = list(bits)
    n = len(bits)
    if slack is None:
        slack = max(2, n)
    if slack < 1:
        raise ValueError("a ring needs at least one bubble")
    physical = [E] * slack + shift_register_inits([RegisterInit.for_bit(x) for x in bits])
    back = b.net(f"{hint}.loop.ack")
    # ring entry channel: rails come from the tap (defined after the chain)
    entry_t, entry_f = b.net(f"{hint}.tap.t"), b.net(f"{hint}.tap.f")
    entry = Channel(entry_t, entry_f, back)
    last = chain(b, entry, physical, f"{hint}.r")
    # tap: the last stage's rails, forked to the output and back into the ring
    b.alias(entry_t, last.t)
    b.alias(entry_f, last.f)
    out = Channel(last.t, last.f, b.net(f"{hint}.out.ack"))
    c_tree(b, [out.ack, back], f"{hint}.fork", output=last.ack)
    return out


# ---------------------------------------------------------------------------
# Control operators


def build_fork(b: NetlistBuilder, d: Channel, hint: str = "fork") -> tuple[Channel, Channel]:
    o1, o2 = fork(b, d, 2, hint)
    return o1, o2


def build_join(b: NetlistBuilder, x: Channel, y: Channel, hint: str = "join") -> tuple[Channel, Channel]:
    """Synchronise two channels into one two-bit transfer with a shared ack."""
    ack_out = b.net(f"{hint}.ack")
    en = b.add_gate(K.NOR2, [ack_out, ack_out], b.net(f"{hint}.en"))
    outs = []
    done = []
    for tag, d in (("a", x), ("b", y)):
        qt = b.add_gate(K.C_ELEMENT, [d.t, en], b.net(f"{hint}.{tag}.t"))
        qf = b.add_gate(K.C_ELEMENT, [d.f, en], b.net(f"{hint}.{tag}.f"))
        done.append(b.add_gate(K.OR2, [qt, qf], b.net(f"{hint}.{tag}.done")))
        outs.append(Channel(qt, qf, ack_out))
    ack_in = c_tree(b, done, f"{hint}.c", output=x.ack)
    b.alias(y.ack, ack_in)
    return outs[0], outs[1]


def build_rselect(b: NetlistBuilder, sel: Channel, tin: Channel, fin: Channel, hint: str = "rsel") -> Channel:
    """Read-select: consume one codeword from the input named by ``sel``.

    The unselected input is left unacknowledged.
    """
    yt = or_tree(b, [b.add_gate(K.AND2, [sel.t, tin.t], b.net(f"{hint}.tt")),
                     b.add_gate(K.AND2, [sel.f, fin.t], b.net(f"{hint}.ft"))], f"{hint}.y.t")
    yf = or_tree(b, [b.add_gate(K.AND2, [sel.t, tin.f], b.net(f"{hint}.tf")),
                     b.add_gate(K.AND2, [sel.f, fin.f], b.net(f"{hint}.ff"))], f"{hint}.y.f")
    out = Channel(yt, yf, b.net(f"{hint}.y.ack"))
    ct = completion(b, tin, f"{hint}.ct")
    cf = completion(b, fin, f"{hint}.cf")
    b.add_gate(K.C_ELEMENT3, [sel.t, out.ack, ct], tin.ack)
    b.add_gate(K.C_ELEMENT3, [sel.f, out.ack, cf], fin.ack)
    b.add_gate(K.OR2, [tin.ack, fin.ack], sel.ack)
    return out


def build_wselect(b: NetlistBuilder, d: Channel, sel: Channel, hint: str = "wsel") -> tuple[Channel, Channel]:
    """Write-select: steer each input codeword to the output named by ``sel``."""
    out_t = Channel(b.add_gate(K.AND2, [sel.t, d.t], b.net(f"{hint}.T.t")),
                    b.add_gate(K.AND2, [sel.t, d.f], b.net(f"{hint}.T.f")), b.net(f"{hint}.T.ack"))
    out_f = Channel(b.add_gate(K.AND2, [sel.f, d.t], b.net(f"{hint}.F.t")),
                    b.add_gate(K.AND2, [sel.f, d.f], b.net(f"{hint}.F.f")), b.net(f"{hint}.F.ack"))
    any_ack = b.add_gate(K.OR2, [out_t.ack, out_f.ack], b.net(f"{hint}.anyack"))
    cd = completion(b, d, f"{hint}.cd")
    cs = completion(b, sel, f"{hint}.cs")
    b.add_gate(K.C_ELEMENT3, [any_ack, cd, cs], d.ack)
    b.alias(sel.ack, d.ack)
    return out_t, out_f


# ---------------------------------------------------------------------------
# Arithmetic


def dims_full_adder(b: NetlistBuilder, a, x, c, hint: str):
    """DIMS: one 3-input C-element per input minterm, OR planes per output rail.

    Returns (sum rails, carry rails, internal rail pairs needing indication,
    resources). DIMS indicates everything through its outputs.
    """
    rails = {0: (a[1], x[1], c[1]), 1: (a[0], x[0], c[0])}
    minterm = {}
    for va in (0, 1):
        for vb in (0, 1):
            for vc in (0, 1):
                ins = [rails[va][0], rails[vb][1], rails[vc][2]]
                minterm[(va, vb, vc)] = b.add_gate(K.C_ELEMENT3, ins, b.net(f"{hint}.m{va}{vb}{vc}"))
    groups = {"s.t": [], "s.f": [], "c.t": [], "c.f": []}
    for (va, vb, vc), m in minterm.items():
        total = va + vb + vc
        groups["s.t" if total % 2 else "s.f"].append(m)
        groups["c.t" if total >= 2 else "c.f"].append(m)
    out = {k: or_tree(b, v, f"{hint}.{k}") for k, v in groups.items()}
    res = Resources(dual_rail_gates=0, c_elements=8)
    return (out["s.t"], out["s.f"]), (out["c.t"], out["c.f"]), [], res


def dr_full_adder(b: NetlistBuilder, a, x, c, hint: str):
    """Full adder from complete dual-rail gates: two XOR, two AND, one OR.

    These gates indicate weakly, so the internal pairs p, g, h are returned
    for the caller's completion detector; otherwise a slow internal gate
    could still hold the previous value when the next codeword arrives.
    """
    p, pab = dr_xor(b, a, x, f"{hint}.p")
    s, ppc = dr_xor(b, p, c, f"{hint}.s")
    g = (pab["tt"], b.add_gate(K.OR2, [pab["ff"], p[0]], b.net(f"{hint}.g.f")))
    h = (ppc["tt"], b.add_gate(K.OR2, [p[1], c[1]], b.net(f"{hint}.h.f")))
    co = dr_or(b, g, h, f"{hint}.co")
    return s, co, [p, g, h], Resources(dual_rail_gates=5, c_elements=0)


ADDER_CORES = {"DR": dr_full_adder, "DIMS": dims_full_adder}


def build_adder_cell(b: NetlistBuilder, a: Channel, x: Channel, c: Channel, core: str = "DR",
                     hint: str = "fa") -> tuple[Channel, Channel, Resources]:
    """One-bit full adder operator (a, b, cin -> sum, cout) with handshakes.

    The DIMS core indicates its inputs by itself; the dual-rail core gets an
    input completion detector folded into the acknowledge.
    """
    first = len(b.gates)
    s, co, internal, res = ADDER_CORES[core](b, (a.t, a.f), (x.t, x.f), (c.t, c.f), hint)
    sum_ch = Channel(s[0], s[1], b.net(f"{hint}.sum.ack"))
    cout_ch = Channel(co[0], co[1], b.net(f"{hint}.cout.ack"))
    acks = [sum_ch.ack, cout_ch.ack]
    if core == "DR":
        pairs = [(ch.t, ch.f) for ch in (a, x, c)] + internal
        acks.append(c_tree(b, [rail_completion(b, r, f"{hint}.done") for r in pairs], f"{hint}.cdone"))
    c_tree(b, acks, f"{hint}.cack", output=a.ack)
    res.c_elements = sum(g.kind in (K.C_ELEMENT, K.C_ELEMENT3) for g in b.gates[first:])
    b.alias(x.ack, a.ack)
    b.alias(c.ack, a.ack)
    return sum_ch, cout_ch, res


def frame_pattern(width: int, lead: int = 1) -> list[int]:
    """1 for the first ``lead`` bit positions of every word, else 0."""
    return [1] * lead + [0] * (width - lead)


CARRY_LOOP = (E, E, Z)


def build_serial_adder(b: NetlistBuilder, a: Channel, x: Channel, width: int, *, subtract: bool = False,
                       core: str = "DR", hint: str = "sadd", frame_slack: int | None = None) -> Channel:
    """Bit-serial adder, LSB first, word length ``width``.

    The carry goes round a short loop through a zero-initialised register.
    A local frame ring marks the first bit of each word; there the incoming
    carry is forced to 0 (1 when subtracting, where the second operand's
    rails are also swapped to complement it).
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    fr = pattern_source(b, frame_pattern(width), f"{hint}.frame", frame_slack)
    cq_t, cq_f = b.net(f"{hint}.cq.t"), b.net(f"{hint}.cq.f")
    cq = Channel(cq_t, cq_f, b.net(f"{hint}.cq.ack"))
    if subtract:
        cin = dr_or(b, (cq.t, cq.f), (fr.t, fr.f), f"{hint}.cin")
        xr = (x.f, x.t)
    else:
        cin = dr_and(b, (cq.t, cq.f), (fr.f, fr.t), f"{hint}.cin")
        xr = (x.t, x.f)
    s, co, internal, _ = ADDER_CORES[core](b, (a.t, a.f), xr, cin, f"{hint}.fa")
    out = Channel(s[0], s[1], b.net(f"{hint}.out.ack"))
    co_ch = Channel(co[0], co[1], b.net(f"{hint}.co.ack"))
    pairs = [(ch.t, ch.f) for ch in (a, x, cq, fr)] + [cin] + internal
    done = c_tree(b, [rail_completion(b, r, f"{hint}.done") for r in pairs], f"{hint}.cdone")
    c_tree(b, [out.ack, co_ch.ack, done], f"{hint}.cack", output=a.ack)
    for ch in (x, cq, fr):
        b.alias(ch.ack, a.ack)
    loop = chain(b, co_ch, CARRY_LOOP, f"{hint}.carry")
    b.alias(cq_t, loop.t)
    b.alias(cq_f, loop.f)
    b.alias(loop.ack, cq.ack)
    return out


def build_shift(b: NetlistBuilder, d: Channel, width: int, amount: int, hint: str = "shl",
                frame_slack: int | None = None) -> Channel:
    """Multiply a word stream by ``2**amount`` (mod 2**width).

    ``amount`` zero-initialised stages delay the bit stream; a frame mask
    clears the bits that spilled over from the previous word.
    """
    if not 1 <= amount < width:
        raise ValueError("shift amount must be in [1, width-1]")
    delayed = build_shift_register(b, d, [Z] * amount, f"{hint}.sr")
    fr = pattern_source(b, frame_pattern(width, amount), f"{hint}.frame", frame_slack)
    yt, yf = dr_and(b, (delayed.t, delayed.f), (fr.f, fr.t), f"{hint}.mask")
    out = Channel(yt, yf, b.net(f"{hint}.out.ack"))
    done = c_tree(b, [completion(b, delayed, f"{hint}.cd"), completion(b, fr, f"{hint}.cf")], f"{hint}.cdone")
    c_tree(b, [out.ack, done], f"{hint}.cack", output=delayed.ack)
    b.alias(fr.ack, delayed.ack)
    return out


def build_constant(b: NetlistBuilder, value: int, width: int, hint: str = "const") -> Channel:
    return pattern_source(b, [(value >> i) & 1 for i in range(width)], hint)
