import random

import pytest
from hypothesis import given, settings, strategies as st

from dfg_strategies import dfg_texts
from flysig.arch.config import validate_config
from flysig.arch.elaborate import simulate_gates
from flysig.arch.processor import ProcessorInstance, load_configuration
from flysig.arch.token_sim import simulate_tokens
from flysig.compiler.dfg import count_structure, emit_dfg, interpret, parse_dfg
from flysig.compiler.rewrite import decompose_mul_const, naf_digits, optimize_repeated_add, shift_add_terms
from flysig.compiler.schedule import schedule_and_emit
from flysig.dualrail import to_signed
from flysig.kernel import RandomizedDelays, SimulationError, default_delay_table

FILTER_AB_1 = """dfg filter_ab_1 width=8
in u
reg ra = o3 init=0
reg rb = o3 init=0
reg rc = o3 init=0
op o1 = add ra rb
op o2 = add o1 rc
op o3 = add u o2
out y = o3
"""


def _streams(dfg, n, seed):
    rng = random.Random(seed)
    lim = 1 << (dfg.width - 1)
    return {name: [rng.randrange(-lim, lim) for _ in range(n)] for name in dfg.inputs}


def _by_port(dfg, streams):
    return {i: streams[n] for i, n in enumerate(dfg.inputs)}


def test_parse_counts():
    st_ = count_structure(parse_dfg(FILTER_AB_1))
    assert st_.as_tuple() == (3, 3, 3)


def test_interpreter_recurrence():
    d = parse_dfg(FILTER_AB_1)
    y = interpret(d, {"u": [1, 2, -3, 5]}, 4)["y"]
    assert y == [1, 5, 12, 41]


@pytest.mark.parametrize("text,code", [
    ("dfg g width=8\nin a\nop x = add a b\nout y = x\n", "UNKNOWN_NODE_REF"),
    ("dfg g width=8\nin a\nop x = add a y2\nop y2 = add x a\nout y = x\n", "COMBINATIONAL_LOOP"),
    ("dfg g width=8\nin a\nop x = frob a a\nout y = x\n", "SYNTAX"),
])
def test_parse_errors(text, code):
    with pytest.raises(SimulationError) as e:
        parse_dfg(text)
    assert e.value.code == code


def test_optimize_repeated_add_counts():
    src = ("dfg ax width=8\nin a\nin x\nop o1 = add a x\nreg r1 = o1\nop o2 = add r1 x\nreg r2 = o2\n"
           "op o3 = add r2 x\nreg r3 = o3\nout y = r3\n")
    d = parse_dfg(src)
    o = optimize_repeated_add(d)
    assert (count_structure(d).operations, count_structure(d).registers) == (3, 3)
    assert len(o.of_kind("ADD")) == 2
    delays = o.of_kind("DELAY")
    assert len(delays) == 2
    assert sum(n.initialized for n in delays) == 1


@given(st.integers(-128, 127))
def test_shift_add_terms_exact(c):
    terms = shift_add_terms(c, 8)
    for x in range(-128, 128, 37):
        assert to_signed(sum(s * (x << k) for s, k in terms), 8) == to_signed(c * x, 8)


@given(st.integers(-10**6, 10**6))
def test_naf_is_non_adjacent(c):
    d = naf_digits(c)
    assert sum(x << i for i, x in enumerate(d)) == c
    assert all(not (d[i] and d[i + 1]) for i in range(len(d) - 1))


def test_constant_out_of_range():
    with pytest.raises(SimulationError) as e:
        shift_add_terms(200, 8)
    assert e.value.code == "CONSTANT_OVERFLOW"


@settings(max_examples=60)
@given(dfg_texts(), st.integers(0, 1000))
def test_rewrites_preserve_semantics(text, seed):
    d = parse_dfg(text)
    s = _streams(d, 100, seed)
    ref = interpret(d, s, 100)
    for rw in (optimize_repeated_add, decompose_mul_const):
        assert interpret(rw(d), s, 100) == ref


@settings(max_examples=60)
@given(dfg_texts())
def test_optimize_never_adds_resources(text):
    d = parse_dfg(text)
    o = optimize_repeated_add(d)
    assert len(o.of_kind("ADD")) <= len(d.of_kind("ADD"))
    assert len(o.of_kind("DELAY")) <= len(d.of_kind("DELAY"))


@settings(max_examples=60)
@given(dfg_texts())
def test_emit_parse_round_trip(text):
    d = parse_dfg(text)
    assert count_structure(parse_dfg(emit_dfg(d))) == count_structure(d)
    assert emit_dfg(parse_dfg(emit_dfg(d))) == emit_dfg(d)


@settings(max_examples=25)
@given(dfg_texts(max_ops=5), st.integers(1, 3), st.integers(0, 1000))
def test_compiled_config_validates_and_computes(text, bubbles, seed):
    d = parse_dfg(text)
    cfg = schedule_and_emit(optimize_repeated_add(d), bubbles_per_link=bubbles)
    load_configuration(ProcessorInstance("p"), cfg)
    assert not validate_config(cfg).zero_bubble_rings
    s = _streams(d, 12, seed)
    rep = simulate_tokens(cfg, _by_port(d, s), 12, default_delay_table())
    ref = interpret(d, s, 12)
    assert not rep.deadlock
    assert rep.outputs == {k: ref[n] for k, n in enumerate(d.outputs)}


@settings(max_examples=6)
@given(dfg_texts(max_ops=4, width=6), st.integers(0, 1000))
def test_compiled_config_gate_level(text, seed):
    d = parse_dfg(text)
    cfg = schedule_and_emit(d, bubbles_per_link=2)
    s = _streams(d, 6, seed)
    rep = simulate_gates(cfg, _by_port(d, s), 6)
    ref = interpret(d, s, 6)
    assert rep.outputs == {k: ref[n] for k, n in enumerate(d.outputs)}


def test_sharing_respects_inventory():
    d = parse_dfg(FILTER_AB_1)
    cfg = schedule_and_emit(d, inventory={"ADD": 4})
    st_ = validate_config(cfg)
    assert (st_.scheduled_operations, st_.registers) == (3, 3)
    assert sum(op.kind == "ADD" for op in cfg.operators.values()) == 4
    cfg1 = schedule_and_emit(d, inventory={"ADD": 1}, bubbles_per_link=2)
    assert {r.inst for r in cfg1.routing.values() if cfg1.kind_of(r.op_id) == "ADD"} == {"add0"}
    s = {"u": [3, -1, 4, 1, -5, 9]}
    rep = simulate_gates(cfg1, {0: s["u"]}, 6)
    assert rep.outputs[0] == interpret(d, s, 6)["y"]


CHAIN_ON_ONE_ADDER = """dfg g width=6
in i0
op n0_0 = add i0 i0
op n0_1 = add n0_0 i0
reg n0_p1 = n0_1
op n0_2 = add n0_p1 i0
op n0_3 = add n0_2 i0
reg n0_p3 = n0_3
reg n0 = n0_p3
op n1 = add i0 i0
op n2_0 = add n1 n0
op n2_1 = add n2_0 n0
op n2_2 = add n2_1 n0
reg n2_p2 = n2_2
op n2_3 = add n2_p2 n0
reg n2 = n2_3
op n3 = add n2 n0
op n4 = sub n3 n2
out y = n4
out z = n1
"""


def test_heavily_shared_adder_finishes_within_default_time_limit():
    # 13 additions on one adder under random delays: a slow run, not a deadlock
    d = parse_dfg(CHAIN_ON_ONE_ADDER)
    cfg = schedule_and_emit(optimize_repeated_add(d), bubbles_per_link=1, inventory={"ADD": 1})
    s = _streams(d, 8, 145)
    ref = interpret(d, s, 8)
    rep = simulate_gates(cfg, _by_port(d, s), 8, RandomizedDelays(seed=145), monitor="all")
    assert not rep.deadlock and not rep.violations
    assert rep.outputs == {k: ref[n] for k, n in enumerate(d.outputs)}


def test_negative_bubbles_rejected():
    with pytest.raises(SimulationError):
        schedule_and_emit(parse_dfg(FILTER_AB_1), bubbles_per_link=-1)
