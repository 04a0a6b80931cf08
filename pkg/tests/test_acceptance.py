"""Acceptance criteria; each test prints one PASS/FAIL line.

Run with pytest, or directly: ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import itertools
import random
import sys
import time

from flysig.arch.config import validate_config
from flysig.arch.elaborate import simulate_gates
from flysig.arch.target import derive_target, prototype_config
from flysig.arch.token_sim import simulate_tokens
from flysig.bench import (TABLE1, best, compile_benchmark, config_subject, load_benchmark, operator_subject,
                          stimulus, sweep_bubbles, throughput_spread, verify_di)
from flysig.compiler.dfg import count_structure, interpret, parse_dfg
from flysig.compiler.rewrite import optimize_repeated_add
from flysig.compiler.schedule import schedule_and_emit
from flysig.dualrail import bits_to_word, to_signed, word_to_bits
from flysig.kernel import FixedDelays, default_delay_table
from flysig.oplib.cells import RegisterInit as R
from flysig.oplib.operators import OperatorSpec as S, run_operator

EXPECTED = {
    ("elliptic", None): (26, 8, 8),
    **{(f, v): (ops, regs, 3)
       for f, ops in (("filter_ab", 3), ("filter_abc", 6), ("filter_abcd", 9))
       for v, regs in ((1, 3), (2, 2), (3, 1))},
}
SWEEP_K = 4
SAMPLES = 50
SEED = 7
SPREAD_TOL = 0.05
CRIT1_SECONDS = 1.0
CRIT2_SECONDS = 300.0
OP_TRIALS = 20
BENCH_TRIALS = 10

OPERATOR_SPECS = [
    S.make("REG", init=R.EMPTY_INIT), S.make("REG", init=R.ZERO_INIT), S.make("REG", init=R.ONE_INIT),
    S.make("SHIFT_REG", inits=(R.ZERO_INIT, R.ONE_INIT, R.EMPTY_INIT)),
    S.make("RSELECT"), S.make("WSELECT"), S.make("FORK"), S.make("JOIN"),
    S.make("DIMS_ADD"), S.make("DR_ADD"),
    S.make("SERIAL_ADDER", width=8), S.make("SERIAL_ADDER", width=8, subtract=True),
    S.make("SERIAL_ADDER", width=4, core="DIMS"),
    S.make("SHIFT", width=8, amount=3), S.make("CONST", width=8, value=0x5A),
]


LINES: list[str] = []  # shown by conftest's terminal summary under pytest


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
    LINES.append(line)
    if __name__ == "__main__":
        print(line, flush=True)


def _name(name, variant):
    return name if variant is None else f"{name}_{variant}"


@functools.lru_cache(maxsize=None)
def suite_sweep():
    """GATE-level sweep of every benchmark over 0..K bubbles, TOKEN cross-checked."""
    t0 = time.perf_counter()
    res = {(n, v): sweep_bubbles(n, v, SWEEP_K, samples=SAMPLES, seed=SEED, xcheck=True) for n, v in TABLE1}
    return res, time.perf_counter() - t0


def test_1_table1_counts():
    t0 = time.perf_counter()
    bad = []
    for (name, v), want in EXPECTED.items():
        dfg = load_benchmark(name, v)
        st = validate_config(compile_benchmark(dfg, 3))
        got = (st.scheduled_operations, st.registers, count_structure(dfg).feedback_cycles)
        if got != want or count_structure(dfg).as_tuple() != want:
            bad.append(f"{_name(name, v)} {got} != {want}")
    dt = time.perf_counter() - t0
    ok = not bad and dt < CRIT1_SECONDS
    report(1, ok, f"{len(EXPECTED)} benchmarks, {dt:.2f}s {'; '.join(bad)}")
    assert not bad, bad
    assert dt < CRIT1_SECONDS


def test_2_throughput_flatness():
    res, dt = suite_sweep()
    tops = {k: best(v) for k, v in res.items()}
    spread = throughput_spread(r.throughput_per_us for r in tops.values())
    ok = spread <= SPREAD_TOL and dt < CRIT2_SECONDS
    lo = min(tops.values(), key=lambda r: r.throughput_per_us)
    hi = max(tops.values(), key=lambda r: r.throughput_per_us)
    report(2, ok, f"spread {100 * spread:.2f}% (tol {100 * SPREAD_TOL:.0f}%), "
                  f"min {lo.throughput_per_us:.2f}/us {lo.benchmark}_{lo.variant}@{lo.bubbles}, "
                  f"max {hi.throughput_per_us:.2f}/us {hi.benchmark}_{hi.variant}@{hi.bubbles}, sweep {dt:.0f}s")
    assert spread <= SPREAD_TOL
    assert dt < CRIT2_SECONDS


def test_3_latency_vs_registers():
    res, _ = suite_sweep()
    bad = []
    checked = 0
    for fam in ("filter_ab", "filter_abc", "filter_abcd"):
        for b in range(SWEEP_K + 1):
            # variants 3, 2, 1 carry 1, 2, 3 registers
            lat = [res[(fam, v)][b].latency_ns for v in (3, 2, 1)]
            if any(x is None for x in lat):
                bad.append(f"{fam}@{b}: missing latency")
                continue
            checked += 1
            if not lat[0] >= lat[1] >= lat[2]:
                bad.append(f"{fam}@{b}: {lat}")
    report(3, not bad, f"{checked} (family, bubbles) triples non-increasing {'; '.join(bad)}")
    assert not bad, bad


def test_4_delay_insensitivity():
    bad = []
    for i, spec in enumerate(OPERATOR_SPECS):
        rep = verify_di(operator_subject(spec, bits=24, seed=i), OP_TRIALS, seed=i)
        if not rep.passed:
            bad.append(rep.to_text().strip())
    for i, (name, v) in enumerate(TABLE1):
        cfg = compile_benchmark(load_benchmark(name, v), 3)
        rep = verify_di(config_subject(cfg, samples=10, seed=i), BENCH_TRIALS, seed=100 + i)
        if not rep.passed:
            bad.append(rep.to_text().strip())
    report(4, not bad, f"{len(OPERATOR_SPECS)} operators x {OP_TRIALS} trials, "
                       f"{len(TABLE1)} benchmarks x {BENCH_TRIALS} trials {' | '.join(bad)}")
    assert not bad, bad


def _serial_sums(width, pairs):
    a = [b for x, _ in pairs for b in word_to_bits(x, width)]
    c = [b for _, y in pairs for b in word_to_bits(y, width)]
    s = run_operator(S.make("SERIAL_ADDER", width=width), {"a": a, "b": c}, monitor=False,
                     t_max_ns=10**8).outputs["s"]
    return [bits_to_word(s[i * width:(i + 1) * width], signed=False) for i in range(len(pairs))]


def test_5_arithmetic_oracles():
    cases = list(itertools.product((0, 1), repeat=3))
    streams = {p: [c[i] for c in cases] for i, p in enumerate(("a", "b", "cin"))}
    want = {"sum": [sum(c) & 1 for c in cases], "cout": [sum(c) >> 1 for c in cases]}
    dims = run_operator(S.make("DIMS_ADD"), streams).outputs
    dr = run_operator(S.make("DR_ADD"), streams).outputs
    ok = dims == want and dr == want
    details = [f"full adders {'ok' if ok else 'MISMATCH'}"]
    for w in (8, 16):
        rng = random.Random(w)
        pairs = [(rng.randrange(1 << w), rng.randrange(1 << w)) for _ in range(1000)]
        got = _serial_sums(w, pairs)
        miss = sum(g != (x + y) % (1 << w) for g, (x, y) in zip(got, pairs))
        details.append(f"W={w}: {1000 - miss}/1000")
        ok = ok and miss == 0
    report(5, ok, ", ".join(details))
    assert ok


AXXX = """dfg axxx width=8
in a
in x
op o1 = add a x
reg r1 = o1
op o2 = add r1 x
reg r2 = o2
op o3 = add r2 x
reg r3 = o3
out y = r3
"""


def test_6_repeated_add_rewrite():
    plain = parse_dfg(AXXX)
    opt = optimize_repeated_add(plain)
    n_add = lambda d: len(d.of_kind("ADD"))
    delays = lambda d: d.of_kind("DELAY")
    counts_ok = (n_add(plain), len(delays(plain)), n_add(opt), len(delays(opt))) == (3, 3, 2, 2) and \
        sum(n.initialized for n in delays(opt)) == 1 and sum(n.initialized for n in delays(plain)) == 0
    n = 100
    rng = random.Random(SEED)
    a = [rng.randrange(-128, 128) for _ in range(n)]
    x = [rng.randrange(-128, 128) for _ in range(n)]
    want = [to_signed(p + 3 * q, 8) for p, q in zip(a, x)]
    outs = {}
    for tag, d in (("plain", plain), ("opt", opt)):
        outs[f"{tag}.ref"] = interpret(d, {"a": a, "x": x}, n)["y"]
        cfg = schedule_and_emit(d, bubbles_per_link=3)
        outs[f"{tag}.gate"] = simulate_gates(cfg, {0: a, 1: x}, n).outputs[0]
    bad = [k for k, v in outs.items() if v != want]
    ok = counts_ok and not bad
    report(6, ok, f"ADD/DELAY {n_add(plain)}+{len(delays(plain))} -> {n_add(opt)}+{len(delays(opt))}, "
                  f"a+3x on {n} samples: {'all match' if not bad else 'mismatch in ' + ', '.join(bad)}")
    assert counts_ok
    assert not bad, bad


def test_7_two_level_equivalence():
    res, _ = suite_sweep()
    bad = [f"{r.benchmark}_{r.variant}@{r.bubbles}" for rs in res.values() for r in rs
           if not r.xcheck_ok or (not r.deadlock and not r.outputs_ok)]
    live = [r for rs in res.values() for r in rs if not r.deadlock]
    ok = not bad and len(live) == len(TABLE1) * SWEEP_K
    report(7, ok, f"GATE == TOKEN == interpreter on {len(live)} live runs x {SAMPLES} samples "
                  f"{' '.join(bad)}")
    assert not bad, bad
    assert len(live) == len(TABLE1) * SWEEP_K


def test_8_ring_laws():
    res, _ = suite_sweep()
    bad = []
    rings = 0
    for name, v in TABLE1:
        dfg = load_benchmark(name, v)
        zero = validate_config(compile_benchmark(dfg, 0))
        if not zero.zero_bubble_rings or not any(w.startswith("RING_WITHOUT_BUBBLE") for w in zero.warnings):
            bad.append(f"{_name(name, v)}@0 not flagged")
        if not res[(name, v)][0].deadlock:
            bad.append(f"{_name(name, v)}@0 did not deadlock")
        for b in (1, 3):
            cfg = compile_benchmark(dfg, b)
            rep = simulate_tokens(cfg, stimulus(cfg, 30, SEED), 30, default_delay_table())
            rings += len(rep.ring_occupancy)
            if not rep.ring_occupancy or not rep.ring_tokens_invariant:
                bad.append(f"{_name(name, v)}@{b} ring occupancy changed")
    report(8, not bad, f"zero-bubble configs flagged and deadlocked; {rings} ring counters constant "
                       f"{'; '.join(bad)}")
    assert not bad, bad


def test_9_prototype_to_target():
    bad = []
    n = 100
    for i, (name, v) in enumerate(TABLE1):
        cfg = compile_benchmark(load_benchmark(name, v), 3)
        n_add = sum(op.kind == "ADD" for op in cfg.operators.values())
        inventory = {"ADD": n_add + 2, "SUB": 1, "RSELECT": 2, "WSELECT": 2}
        target, rep = derive_target(cfg, inventory)
        used = {r.inst for r in target.routing.values()}
        if set(target.operators) != used or rep.removed_by_kind() != {"ADD": 2, "SUB": 1, "RSELECT": 2,
                                                                       "WSELECT": 2}:
            bad.append(f"{_name(name, v)}: pruning {rep.removed_by_kind()}")
        if not rep.after.dominated_by(rep.before):
            bad.append(f"{_name(name, v)}: resources grew")
        proto = prototype_config(cfg, inventory)
        data = stimulus(cfg, n, 200 + i)
        a = simulate_gates(proto, data, n, FixedDelays())
        b = simulate_gates(target, data, n, FixedDelays())
        if a.outputs != b.outputs or a.deadlock or len(a.outputs[0]) != n:
            bad.append(f"{_name(name, v)}: outputs differ")
    report(9, not bad, f"{len(TABLE1)} benchmarks pruned, resources non-increasing, {n} samples equal "
                       f"{'; '.join(bad)}")
    assert not bad, bad


if __name__ == "__main__":
    failed = 0
    for fn in [test_1_table1_counts, test_2_throughput_flatness, test_3_latency_vs_registers,
               test_4_delay_insensitivity, test_5_arithmetic_oracles, test_6_repeated_add_rewrite,
               test_7_two_level_equivalence, test_8_ring_laws, test_9_prototype_to_target]:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
