import random

from hypothesis import given, strategies as st

from flysig.dualrail import (Channel, Consumer, DualRailValue, Producer, bits_to_word, dr_decode, dr_encode,
                             monitor_channel, word_to_bits)
from flysig.kernel import NetlistBuilder, RandomizedDelays, simulate
from flysig.oplib.cells import chain, input_channel, terminate, RegisterInit as R


def test_codes():
    assert dr_decode(0, 0) is DualRailValue.EMPTY
    assert dr_decode(1, 1) is DualRailValue.ILLEGAL
    for bit in (0, 1):
        assert dr_decode(*dr_encode(bit)).bit == bit


@given(st.integers(1, 32).flatmap(lambda w: st.tuples(st.just(w), st.integers(-(1 << (w - 1)), (1 << (w - 1)) - 1))))
def test_word_bits_round_trip(wv):
    w, v = wv
    bits = word_to_bits(v, w)
    assert len(bits) == w
    assert bits_to_word(bits) == v


def _pipe(n):
    b = NetlistBuilder()
    src = input_channel(b, "in")
    out = chain(b, src, [R.EMPTY_INIT] * n)
    terminate(b, out)
    return b.finalize(), src, out


@given(st.lists(st.integers(0, 1), min_size=1, max_size=30), st.integers(0, 2**32))
def test_pipeline_transfers_under_random_delays(bits, seed):
    nl, src, out = _pipe(4)
    p, c = Producer(src, bits), Consumer(out)
    tr = simulate(nl, delay_model=RandomizedDelays(seed=seed), t_max=10_000, agents=[p, c])
    assert c.values == bits
    assert p.done
    for ch in (src, out):
        rep = monitor_channel(tr, ch)
        assert rep.clean, rep.violations
    assert monitor_channel(tr, src).values == bits


def _replay(events, initial=None):
    ch = Channel("t", "f", "a")
    from flysig.dualrail import ChannelMonitor
    m = ChannelMonitor(ch, initial)
    for t, n, v in events:
        m.feed(t, n, v)
    return [k for _, k in m.finish().violations]


def test_monitor_flags_both_rails_high():
    assert "BOTH_RAILS_HIGH" in _replay([(1, "t", 1), (2, "f", 1)])


def test_monitor_flags_missing_spacer():
    assert "MISSING_SPACER" in _replay([(1, "t", 1), (2, "a", 1), (3, "t", 0), (3, "f", 1)])


def test_monitor_flags_early_ack():
    assert "ACK_BEFORE_DATA" in _replay([(1, "a", 1)])


def test_monitor_clean_handshake():
    ev = [(1, "t", 1), (2, "a", 1), (3, "t", 0), (4, "a", 0), (5, "f", 1), (6, "a", 1), (7, "f", 0), (8, "a", 0)]
    assert _replay(ev) == []
