"""Benchmark harness: suite runs, bubble sweeps, DI verification, CSV reports."""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .arch.config import ProcessorConfig, load_config_file
from .arch.elaborate import simulate_gates
from .arch.token_sim import simulate_tokens
from .compiler.dfg import Dfg, count_structure, interpret, parse_dfg
from .compiler.rewrite import optimize_repeated_add
from .compiler.schedule import schedule_and_emit
from .kernel import DelayTable, FixedDelays, RandomizedDelays, SimulationError, default_delay_table
from .oplib.operators import OperatorSpec, behavioral_model, run_operator

CSV_HEADER = ("benchmark", "variant", "ops", "registers", "bubbles", "latency_ns", "throughput_per_us",
              "deadlock", "seed")

TABLE1 = (
    [("filter_ab", v) for v in (1, 2, 3)]
    + [("filter_abc", v) for v in (1, 2, 3)]
    + [("filter_abcd", v) for v in (1, 2, 3)]
    + [("elliptic", None)]
)
SUITES = {"table1": TABLE1}
DEFAULT_SAMPLES = 50
DEFAULT_BUBBLES = 3


def benchmark_text(name: str, variant: int | None = None) -> str:
    fname = f"{name}_{variant}.dfg" if variant not in (None, "-") else f"{name}.dfg"
    f = resources.files("flysig.benchmarks").joinpath(fname)
    if not f.is_file():
        raise SimulationError("UNKNOWN_BENCHMARK", fname)
    return f.read_text()


def load_benchmark(name: str, variant: int | None = None) -> Dfg:
    return parse_dfg(benchmark_text(name, variant))


def random_words(rng: random.Random, width: int, n: int) -> list[int]:
    lo = -(1 << (width - 1))
    return [rng.randrange(lo, -lo) for _ in range(n)]


def stimulus(dfg_or_cfg, samples: int, seed: int) -> dict[int, list[int]]:
    """Random two's complement words per input port, reproducible from ``seed``."""
    rng = random.Random(seed)
    ports = range(len(dfg_or_cfg.inputs)) if isinstance(dfg_or_cfg, Dfg) else dfg_or_cfg.input_ports()
    return {k: random_words(rng, dfg_or_cfg.width, samples) for k in ports}


@dataclass
class BenchmarkResult:
    benchmark: str
    variant: str
    ops: int
    registers: int
    bubbles: int
    latency_ns: float | None
    throughput_per_us: float
    deadlock: bool
    seed: int
    feedback_cycles: int = 0
    outputs_ok: bool | None = None  # against the graph interpreter; None when deadlocked
    xcheck_ok: bool | None = None  # GATE vs TOKEN outputs, when cross-checked

    def row(self) -> list[str]:
        lat = "" if self.latency_ns is None else f"{self.latency_ns:.3f}"
        return [self.benchmark, self.variant, str(self.ops), str(self.registers), str(self.bubbles), lat,
                f"{self.throughput_per_us:.3f}", "true" if self.deadlock else "false", str(self.seed)]


def compile_benchmark(dfg: Dfg, bubbles: int, optimize: bool = True) -> ProcessorConfig:
    if optimize:
        dfg = optimize_repeated_add(dfg)
    return schedule_and_emit(dfg, bubbles_per_link=bubbles)


def run_benchmark(name: str, variant: int | None = None, bubbles: int = DEFAULT_BUBBLES,
                  table: DelayTable | None = None, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                  xcheck: bool = False, optimize: bool = True) -> BenchmarkResult:
    """Compile, run at GATE level on ``samples`` random words and summarise."""
    if samples < 2:
        raise SimulationError("PRECONDITION", "throughput needs at least 2 samples")
    dfg = load_benchmark(name, variant)
    st = count_structure(dfg)
    cfg = compile_benchmark(dfg, bubbles, optimize)
    data = stimulus(cfg, samples, seed)
    table = table or default_delay_table()
    rep = simulate_gates(cfg, data, samples, FixedDelays(table))
    expected = interpret(dfg, {n: data[i] for i, n in enumerate(dfg.inputs)}, samples)
    ok = None
    if not rep.deadlock:
        ok = all(rep.outputs[k] == expected[n] for k, n in enumerate(dfg.outputs))
    xok = None
    if xcheck:
        tok = simulate_tokens(cfg, data, samples, table)
        xok = tok.outputs == rep.outputs and tok.deadlock == rep.deadlock
    return BenchmarkResult(name, "-" if variant is None else str(variant), st.operations, st.registers, bubbles,
                           rep.latency_ns, rep.throughput_per_us, rep.deadlock, seed, st.feedback_cycles, ok, xok)


def sweep_bubbles(name: str, variant: int | None, k: int, **kw) -> list[BenchmarkResult]:
    """One result per bubble count 0..k."""
    if k < 1:
        raise SimulationError("PRECONDITION", "sweep needs K >= 1")
    return [run_benchmark(name, variant, b, **kw) for b in range(k + 1)]


def best(results: Sequence[BenchmarkResult]) -> BenchmarkResult:
    """Highest throughput; the fewest bubbles among equals."""
    return max(results, key=lambda r: (r.throughput_per_us, -r.bubbles))


def run_suite(suite: str = "table1", bubbles: int | None = DEFAULT_BUBBLES, sweep: int | None = None,
              **kw) -> list[BenchmarkResult]:
    if suite not in SUITES:
        raise SimulationError("UNKNOWN_SUITE", suite)
    out = []
    for name, variant in SUITES[suite]:
        if sweep is not None:
            out += sweep_bubbles(name, variant, sweep, **kw)
        else:
            out.append(run_benchmark(name, variant, bubbles, **kw))
    return out


def throughput_spread(values: Iterable[float]) -> float:
    """(max - min) / max; 0 for identical values."""
    v = list(values)
    return (max(v) - min(v)) / max(v) if v and max(v) > 0 else float("inf")


def emit_csv(results: Iterable[BenchmarkResult], out=None) -> str:
    """CSV text (and file, if ``out`` is a path or a writable stream)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow(r.row())
    text = buf.getvalue()
    if isinstance(out, (str, Path)):
        Path(out).write_text(text)
    elif out is not None:
        out.write(text)
    return text


# ---------------------------------------------------------------------------
# Delay-insensitivity verification


class DiSubject(Protocol):
    name: str

    def run(self, delay_model) -> tuple[object, list, str | None]:
        """(decoded outputs, protocol violations, error or None) under one delay model."""


@dataclass
class ConfigSubject:
    config: ProcessorConfig
    streams: dict[int, list[int]]
    samples: int
    name: str = "config"

    def run(self, delay_model):
        rep = simulate_gates(self.config, self.streams, self.samples, delay_model, monitor="all", settle=False)
        return rep.outputs, rep.violations, "deadlock: fewer output words than samples" if rep.deadlock else None


@dataclass
class OperatorSubject:
    spec: OperatorSpec
    streams: dict[str, list[int]]
    count: int = 0
    name: str = "operator"

    def run(self, delay_model):
        if self.spec.kind == "CONST":
            r = run_operator(self.spec, {}, delay_model, limit=self.count)
            expected = behavioral_model(self.spec)(count=self.count)
        else:
            r = run_operator(self.spec, self.streams, delay_model)
            expected = behavioral_model(self.spec)(**self.streams)
        return r.outputs, r.violations, None if r.outputs == expected else "outputs differ from the behavioural model"


@dataclass
class DiReport:
    subject: str
    trials: int
    seeds: list[int]
    passed: bool
    reference: object = None
    failures: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        head = f"{self.subject}: {'PASS' if self.passed else 'FAIL'} ({self.trials} randomized-delay trials)"
        return "\n".join([head] + [f"  {f}" for f in self.failures[:10]]) + "\n"


def verify_di(subject: DiSubject, trials: int, seed: int = 0,
              jitter: tuple[float, float] = (Fraction(1, 10), Fraction(2))) -> DiReport:
    """Run ``subject`` under ``trials`` random gate-delay assignments.

    PASS iff every run finishes, all decoded outputs are identical and no
    protocol monitor flags a violation.
    """
    if trials < 2:
        raise SimulationError("PRECONDITION", "verify_di needs at least 2 trials")
    lo, hi = (Fraction(str(x)) for x in jitter)
    rng = random.Random(seed)
    seeds = [rng.getrandbits(64) for _ in range(trials)]
    ref = None
    failures = []
    for i, s in enumerate(seeds):
        outputs, violations, error = subject.run(RandomizedDelays(lo, hi, s))
        if violations:
            ch, (t, kind) = violations[0]
            failures.append(f"trial {i} (seed {s}): {kind} on {ch.t}/{ch.f} at {t} ps")
        if error:
            failures.append(f"trial {i} (seed {s}): {error}")
        if ref is None:
            ref = outputs
        elif outputs != ref:
            failures.append(f"trial {i} (seed {s}): outputs diverge from trial 0: {_first_divergence(ref, outputs)}")
    return DiReport(subject.name, trials, seeds, not failures, ref, failures)


def _first_divergence(a, b) -> str:
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b), key=str):
            x, y = a.get(k, []), b.get(k, [])
            for j, (p, q) in enumerate(zip(x, y)):
                if p != q:
                    return f"port {k} word {j}: {p} vs {q}"
            if len(x) != len(y):
                return f"port {k}: {len(x)} vs {len(y)} words"
    return f"{a!r} vs {b!r}"


def config_subject(cfg: ProcessorConfig | str | Path, samples: int = 20, seed: int = 0) -> ConfigSubject:
    if not isinstance(cfg, ProcessorConfig):
        cfg = load_config_file(cfg)
    return ConfigSubject(cfg, stimulus(cfg, samples, seed), samples, cfg.name)


def operator_subject(spec: OperatorSpec, bits: int = 24, seed: int = 0) -> OperatorSubject:
    rng = random.Random(seed)
    streams = {p: [rng.randrange(2) for _ in range(bits)] for p in spec.in_ports}
    return OperatorSubject(spec, streams, bits, spec.kind)

