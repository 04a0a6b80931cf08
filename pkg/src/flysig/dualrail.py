"""Dual-rail codes, four-phase channels, protocol monitors and environments.

Rail convention: the first rail carries TRUE. Acknowledge is active high with
return to zero, so one transfer is: codeword, ack up, spacer, ack down.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .kernel import Agent, SimulationError, Trace


class DualRailValue(enum.Enum):
    EMPTY = (0, 0)
    TRUE = (1, 0)
    FALSE = (0, 1)
    ILLEGAL = (1, 1)

    @property
    def is_codeword(self) -> bool:
        return self in (DualRailValue.TRUE, DualRailValue.FALSE)

    @property
    def bit(self) -> int:
        if not self.is_codeword:
            raise ValueError(f"{self.name} carries no bit")
        return 1 if self is DualRailValue.TRUE else 0


_DECODE = {(0, 0): DualRailValue.EMPTY, (1, 0): DualRailValue.TRUE,
           (0, 1): DualRailValue.FALSE, (1, 1): DualRailValue.ILLEGAL}


def dr_decode(t: int, f: int) -> DualRailValue:
    return _DECODE[(int(bool(t)), int(bool(f)))]


def dr_encode(bit: int) -> tuple[int, int]:
    return (1, 0) if bit else (0, 1)


def word_to_bits(value: int, width: int) -> list[int]:
    """Two's complement bits of ``value``, least significant first."""
    value &= (1 << width) - 1
    return [(value >> i) & 1 for i in range(width)]


def bits_to_word(bits: Sequence[int], signed: bool = True) -> int:
    width = len(bits)
    value = sum(b << i for i, b in enumerate(bits))
    if signed and width and bits[-1]:
        value -= 1 << width
    return value


def to_signed(value: int, width: int) -> int:
    value &= (1 << width) - 1
    return value - (1 << width) if value >> (width - 1) else value


@dataclass(frozen=True)
class Channel:
    """One dual-rail bit plus its acknowledge; data flows producer to consumer."""

    t: str
    f: str
    ack: str

    def __post_init__(self):
        if len({self.t, self.f, self.ack}) != 3:
            raise SimulationError("BAD_CHANNEL", f"nets must be distinct: {self}")

    @property
    def nets(self) -> tuple[str, str, str]:
        return (self.t, self.f, self.ack)


# ---------------------------------------------------------------------------
# Protocol monitoring

VIOLATION_KINDS = ("BOTH_RAILS_HIGH", "MISSING_SPACER", "ACK_BEFORE_DATA", "ACK_HELD_OVER_SPACER")


@dataclass
class ProtocolReport:
    channel: Channel
    violations: list[tuple[int, str]] = field(default_factory=list)
    codeword_log: list[tuple[int, DualRailValue]] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.violations

    @property
    def values(self) -> list[int]:
        return [v.bit for _, v in self.codeword_log]


class ChannelMonitor(Agent):
    """Replays rail and ack changes and checks four-phase ordering.

    All changes sharing one timestamp are treated as simultaneous, so a state
    that exists for zero time (a rail pair passing through EMPTY while one
    rail falls and the other rises) is not a real spacer.

    Rules: a codeword must follow a spacer (``MISSING_SPACER``); both rails
    high for a nonzero time is ``BOTH_RAILS_HIGH``; ack may rise only on a
    codeword and fall only on a spacer (``ACK_BEFORE_DATA``); the sender must
    not change the data phase before the ack answered the previous one
    (``ACK_HELD_OVER_SPACER``).
    """

    def __init__(self, channel: Channel, initial: dict[str, int] | None = None):
        self.channel = channel
        self.watch = channel.nets
        initial = initial or {}
        self._vals = {n: initial.get(n, 0) for n in channel.nets}
        self._committed = dr_decode(self._vals[channel.t], self._vals[channel.f])
        self._last_code = self._committed if self._committed.is_codeword else None
        self._ack = self._vals[channel.ack]
        self._group: list[tuple[str, int]] = []
        self._group_t: int | None = None
        self.report = ProtocolReport(channel)
        if self._committed is DualRailValue.ILLEGAL:
            self._flag(0, "BOTH_RAILS_HIGH")
        elif self._committed.is_codeword:
            self.report.codeword_log.append((0, self._committed))

    def start(self, sim):
        self.__init__(self.channel, {n: sim.value(n) for n in self.channel.nets})
        return ()

    def react(self, sim, time, net, value):
        self.feed(time, net, value)
        return ()

    def feed(self, time: int, net: str, value: int) -> None:
        if self._group_t is not None and time != self._group_t:
            self._flush()
        self._group_t = time
        self._group.append((net, value))

    def finish(self) -> ProtocolReport:
        self._flush()
        return self.report

    def _flag(self, time: int, kind: str) -> None:
        self.report.violations.append((time, kind))

    def _flush(self) -> None:
        if not self._group:
            return
        t = self._group_t
        ch = self.channel
        for net, value in self._group:
            if net == ch.ack:
                self._commit(t, dr_decode(self._vals[ch.t], self._vals[ch.f]), final=False)
                self._vals[net] = value
                if value == self._ack:
                    continue
                self._ack = value
                state = self._committed
                if value == 1 and not state.is_codeword:
                    self._flag(t, "ACK_BEFORE_DATA")
                elif value == 0 and state is not DualRailValue.EMPTY:
                    self._flag(t, "ACK_BEFORE_DATA")
            else:
                self._vals[net] = value
        self._commit(t, dr_decode(self._vals[ch.t], self._vals[ch.f]), final=True)
        self._group = []

    def _commit(self, t: int, kind: DualRailValue, final: bool) -> None:
        prev = self._committed
        if kind is prev:
            return
        self._committed = kind
        if kind is DualRailValue.ILLEGAL:
            self._flag(t, "BOTH_RAILS_HIGH")
            return
        if kind.is_codeword:
            if self._last_code is not None:
                self._flag(t, "MISSING_SPACER")
            elif self._ack == 1:
                self._flag(t, "ACK_HELD_OVER_SPACER")
            self._last_code = kind
            self.report.codeword_log.append((t, kind))
        else:  # EMPTY
            if prev.is_codeword and self._ack == 0:
                self._flag(t, "ACK_HELD_OVER_SPACER")
            self._last_code = None


def monitor_channel(trace: Trace, channel: Channel) -> ProtocolReport:
    """Check one channel's four-phase protocol over a recorded trace."""
    canon = {trace.resolve(n): n for n in channel.nets}
    mon = ChannelMonitor(channel, {n: trace.initial(n) for n in channel.nets})
    for t, n, v in trace.events:
        name = canon.get(n)
        if name is not None:
            mon.feed(t, name, v)
    return mon.finish()


# ---------------------------------------------------------------------------
# Environment processes


class Producer(Agent):
    """Four-phase sender of a bit sequence on one channel.

    Emits codeword i, waits for ack high, emits the spacer, waits for ack low,
    then moves on. ``delay`` (ps) is the environment's reaction time.
    """

    def __init__(self, channel: Channel, bits: Sequence[int], start: int = 0, delay: int = 0):
        if not len(bits):
            raise SimulationError("EMPTY_STIMULUS", "producer needs at least one value")
        self.channel = channel
        self.bits = [int(b) for b in bits]
        self.watch = (channel.ack,)
        self.start_time = start
        self.delay = delay
        self.sent = 0  # codewords fully handed over (ack seen)
        self.emitted = 0
        self.first_emit: int | None = None
        self.emit_times: list[int] = []
        self._phase = "idle"

    @property
    def done(self) -> bool:
        return self.sent == len(self.bits) and self._phase == "done"

    @property
    def timed_out(self) -> bool:
        return not self.done

    def _codeword(self, t: int):
        bit = self.bits[self.emitted]
        self.emitted += 1
        if self.first_emit is None:
            self.first_emit = t
        self.emit_times.append(t)
        self._phase = "wait_high"
        return [(t, self.channel.t if bit else self.channel.f, 1)]

    def start(self, sim):
        t = max(self.start_time, sim.now)
        if sim.value(self.channel.ack) == 0:
            return self._codeword(t)
        self._phase = "wait_low"
        return ()

    def react(self, sim, time, net, value):
        t = time + self.delay
        if value == 1 and self._phase == "wait_high":
            bit = self.bits[self.emitted - 1]
            self._phase = "wait_low"
            self.sent += 1
            return [(t, self.channel.t if bit else self.channel.f, 0)]
        if value == 0 and self._phase == "wait_low":
            if self.emitted < len(self.bits):
                return self._codeword(t)
            self._phase = "done"
        return ()


class Consumer(Agent):
    """Always-ready receiver for a group of channels sharing one ack wire.

    Acknowledges once every channel of the group carries a codeword and
    releases once all of them are back to the spacer.
    """

    def __init__(self, channels: Channel | Sequence[Channel], delay: int = 0, limit: int | None = None):
        if isinstance(channels, Channel):
            channels = [channels]
        channels = list(channels)
        acks = {c.ack for c in channels}
        if len(acks) != 1:
            raise SimulationError("BAD_CHANNEL", "consumer channels must share one ack net")
        self.channels = channels
        self.ack = channels[0].ack
        self.watch = tuple(n for c in channels for n in (c.t, c.f))
        self.delay = delay
        self.limit = limit
        self.values: list = []
        self.times: list[int] = []
        self._acked = 0

    def start(self, sim):
        self._acked = sim.value(self.ack)
        return self._check(sim, max(sim.now, 0))

    def react(self, sim, time, net, value):
        return self._check(sim, time + self.delay)

    def _check(self, sim, t):
        codes = [dr_decode(sim.value(c.t), sim.value(c.f)) for c in self.channels]
        if not self._acked and all(c.is_codeword for c in codes):
            if self.limit is not None and len(self.values) >= self.limit:
                return ()
            bits = [c.bit for c in codes]
            self.values.append(bits[0] if len(bits) == 1 else tuple(bits))
            self.times.append(t)
            self._acked = 1
            return [(t, self.ack, 1)]
        if self._acked and all(c is DualRailValue.EMPTY for c in codes):
            self._acked = 0
            return [(t, self.ack, 0)]
        return ()

    def received(self) -> list:
        return list(self.values)


def make_producer(values: Sequence[int], channel: Channel, start: int = 0) -> Producer:
    return Producer(channel, values, start)


def make_consumer(channel: Channel | Sequence[Channel]) -> tuple[Consumer, callable]:
    consumer = Consumer(channel)
    return consumer, consumer.received


def monitors_for(channels: Iterable[Channel]) -> list[ChannelMonitor]:
    return [ChannelMonitor(c) for c in channels]
