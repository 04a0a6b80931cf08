import io
import random

import pytest

from flysig.bench import (CSV_HEADER, BenchmarkResult, best, config_subject, emit_csv, load_benchmark,
                          operator_subject, run_benchmark, sweep_bubbles, throughput_spread, verify_di)
from flysig.compiler.dfg import count_structure
from flysig.kernel import SimulationError
from flysig.oplib.operators import OperatorSpec
from mutants import PipelineSubject


@pytest.fixture(scope="module")
def ab1_sweep():
    return sweep_bubbles("filter_ab", 1, 4, samples=12, seed=7)


def test_run_benchmark_counts():
    r = run_benchmark("filter_ab", 1, 2, samples=50, seed=7)
    assert (r.ops, r.registers) == (3, 3)
    assert r.outputs_ok and not r.deadlock


def test_elliptic_structure():
    s = count_structure(load_benchmark("elliptic"))
    assert s.as_tuple() == (26, 8, 8)


def test_unknown_benchmark():
    with pytest.raises(SimulationError) as e:
        load_benchmark("fir", 1)
    assert e.value.code == "UNKNOWN_BENCHMARK"


def test_too_few_samples():
    with pytest.raises(SimulationError):
        run_benchmark("filter_ab", 1, samples=1)


def test_sweep_shape(ab1_sweep):
    assert [r.bubbles for r in ab1_sweep] == [0, 1, 2, 3, 4]
    assert ab1_sweep[0].deadlock and ab1_sweep[0].throughput_per_us == 0
    top = best(ab1_sweep)
    assert all(top.throughput_per_us >= r.throughput_per_us for r in ab1_sweep)


def test_throughput_deadlock_invariant(ab1_sweep):
    for r in ab1_sweep:
        assert (r.throughput_per_us > 0) == (not r.deadlock)


def test_sweep_needs_k():
    with pytest.raises(SimulationError):
        sweep_bubbles("filter_ab", 1, 0)


def test_csv_empty_is_header_only():
    assert emit_csv([]) == ",".join(CSV_HEADER) + "\n"


def test_csv_sweep_lines_and_determinism(ab1_sweep, tmp_path):
    p = tmp_path / "a.csv"
    emit_csv(ab1_sweep, p)
    assert len(p.read_text().splitlines()) == 6
    again = sweep_bubbles("filter_ab", 1, 4, samples=12, seed=7)
    q = tmp_path / "b.csv"
    emit_csv(again, q)
    assert p.read_bytes() == q.read_bytes()


def test_csv_stream_and_row_format():
    r = BenchmarkResult("x", "-", 1, 2, 3, None, 1.23456, False, 9)
    buf = io.StringIO()
    emit_csv([r], buf)
    assert buf.getvalue().splitlines()[1] == "x,-,1,2,3,,1.235,false,9"


def test_spread():
    assert throughput_spread([10, 10]) == 0
    assert throughput_spread([10, 9]) == pytest.approx(0.1)


def test_verify_di_precondition():
    with pytest.raises(SimulationError) as e:
        verify_di(operator_subject(OperatorSpec.make("FORK")), 1)
    assert e.value.code == "PRECONDITION"


def test_verify_di_serial_adder_passes():
    rep = verify_di(operator_subject(OperatorSpec.make("SERIAL_ADDER", width=8)), 20, seed=3)
    assert rep.passed, rep.to_text()
    assert len(set(rep.seeds)) == 20


def test_verify_di_reports_broken_latch():
    rng = random.Random(1)
    bits = [rng.randrange(2) for _ in range(30)]
    good = verify_di(PipelineSubject(bits), 10, seed=1)
    bad = verify_di(PipelineSubject(bits, broken=True), 10, seed=1)
    assert good.passed
    assert not bad.passed
    assert any(k in "\n".join(bad.failures) for k in ("BOTH_RAILS_HIGH", "ACK_HELD_OVER_SPACER",
                                                       "MISSING_SPACER", "diverge", "differs"))
    assert "FAIL" in bad.to_text()


def test_verify_di_config():
    from flysig.bench import compile_benchmark
    cfg = compile_benchmark(load_benchmark("filter_ab", 3), 3)
    rep = verify_di(config_subject(cfg, samples=6), 3, seed=2)
    assert rep.passed, rep.to_text()
