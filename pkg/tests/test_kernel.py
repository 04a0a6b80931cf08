import itertools
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from flysig.kernel import (DelayTable, FixedDelays, GateKind as K, NetlistBuilder, RandomizedDelays,
                           SimulationError, deadlock_check, default_delay_table, evaluate_gate, ns_to_ps,
                           parse_delay_table, simulate)


def test_c_element_truth_table():
    for a, b, prev in itertools.product((0, 1), repeat=3):
        want = a if a == b else prev
        assert evaluate_gate(K.C_ELEMENT, [a, b], prev) == want


def test_combinational_gates():
    for a, b in itertools.product((0, 1), repeat=2):
        assert evaluate_gate(K.AND2, [a, b]) == (a & b)
        assert evaluate_gate(K.OR2, [a, b]) == (a | b)
        assert evaluate_gate(K.NOR2, [a, b]) == 1 - (a | b)


def test_arity_checked():
    with pytest.raises(SimulationError) as e:
        evaluate_gate(K.OR2, [1])
    assert e.value.code == "ARITY_MISMATCH"


def test_multiple_drivers_rejected():
    b = NetlistBuilder()
    a = b.add_input(hint="a")
    b.add_gate(K.BUF, [a], "y")
    b.add_gate(K.BUF, [a], "y")
    with pytest.raises(SimulationError) as e:
        b.finalize()
    assert e.value.code == "MULTIPLE_DRIVERS"


def test_ns_to_ps_is_exact():
    assert ns_to_ps("0.3") == 300
    assert ns_to_ps(0.1) == 100
    assert ns_to_ps(Fraction(1, 10)) == 100


def test_buffer_chain_timing():
    b = NetlistBuilder()
    n = b.add_input(hint="a")
    for _ in range(5):
        n = b.add_gate(K.BUF, [n])
    tr = simulate(b.finalize(), [(1, "a", 1)], t_max=100)
    assert tr.events_on(n) == [(1000 + 5 * 100, 1)]
    assert tr.settled


def test_inertial_glitch_cancelled():
    b = NetlistBuilder()
    a = b.add_input(hint="a")
    y = b.add_gate(K.BUF, [a], "y", delay=1)
    tr = simulate(b.finalize(), [(1, a, 1), ("1.5", a, 0)], t_max=10)
    assert tr.events_on(y) == []


def test_ring_oscillator_reaches_tmax():
    b = NetlistBuilder()
    x = b.net("x")
    b.add_gate(K.NOR2, [x, x], x)
    tr = simulate(b.finalize(), t_max=20)
    assert tr.quiescent_at is None
    assert deadlock_check(tr, 0).status == "OSCILLATION_AT_TMAX"


def test_delay_table_round_trip():
    t = parse_delay_table("C_ELEMENT 0.5\nOR2 0.25  # comment\n")
    assert t.ps(K.C_ELEMENT) == 500 and t.ps(K.OR2) == 250
    assert parse_delay_table(t.to_text()) == t
    assert default_delay_table().ps(K.C_ELEMENT) == 300


def test_delay_table_rejects_unknown_kind():
    with pytest.raises((SimulationError, ValueError)):
        parse_delay_table("XOR9 1\n")


@given(st.integers(0, 2**64 - 1))
def test_randomized_delays_reproducible_and_bounded(seed):
    b = NetlistBuilder()
    n = b.add_input(hint="a")
    for _ in range(10):
        n = b.add_gate(K.BUF, [n])
    nl = b.finalize()
    m = RandomizedDelays(Fraction(1, 10), Fraction(2), seed)
    d = m.assign(nl)
    assert d == m.assign(nl)
    assert all(100 <= x <= 2000 for x in d)


def test_fixed_delays_follow_table():
    b = NetlistBuilder()
    a = b.add_input(hint="a")
    b.add_gate(K.OR2, [a, a])
    tab = DelayTable.from_ns({"OR2": "0.7"})
    assert FixedDelays(tab).assign(b.finalize()) == [700]
