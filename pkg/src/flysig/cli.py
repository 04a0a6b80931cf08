"""``flysig`` command line.

Exit codes: 0 success, 1 validation or input error, 2 delay-insensitivity FAIL.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from .arch.config import emit_config, load_config_file, validate_config
from .arch.processor import simulate_processor
from .arch.target import derive_target
from .bench import (DEFAULT_BUBBLES, DEFAULT_SAMPLES, SUITES, best, config_subject, emit_csv, run_suite,
                    throughput_spread, verify_di)
from .compiler.dfg import load_dfg
from .compiler.rewrite import optimize_repeated_add
from .compiler.schedule import schedule_and_emit
from .kernel import FixedDelays, RandomizedDelays, SimulationError, default_delay_table, parse_delay_table


def _err(msg: str) -> None:
    print(f"flysig: {msg}", file=sys.stderr)


def read_inputs(path: str, ports: list[int]) -> dict[int, list[int]]:
    """One sample per line, one integer per input port (comma or blank separated)."""
    cols: dict[int, list[int]] = {p: [] for p in ports}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].replace(",", " ").split()
        if not line:
            continue
        if len(line) != len(ports):
            raise SimulationError("SYNTAX", f"{path}:{lineno}: expected {len(ports)} value(s), got {len(line)}")
        try:
            for p, v in zip(ports, line):
                cols[p].append(int(v, 0))
        except ValueError:
            raise SimulationError("SYNTAX", f"{path}:{lineno}: not an integer") from None
    return cols


def _parse_range(text: str) -> int:
    """``0..K`` or ``K`` -> K."""
    hi = text.split("..")[-1]
    if text.count("..") > 1 or (".." in text and text.split("..")[0] not in ("", "0")):
        raise SimulationError("SYNTAX", f"bubble sweep must start at 0: {text}")
    return int(hi)


def _parse_jitter(text: str) -> tuple[Fraction, Fraction]:
    try:
        lo, hi = (Fraction(x.strip()) for x in text.split(","))
    except ValueError:
        raise SimulationError("SYNTAX", f"--jitter wants MIN,MAX in ns, got {text}") from None
    return lo, hi


def cmd_compile(a) -> int:
    dfg = load_dfg(a.dfg)
    if not a.no_opt:
        dfg = optimize_repeated_add(dfg)
    cfg = schedule_and_emit(dfg, bubbles_per_link=a.bubbles)
    status = validate_config(cfg)
    Path(a.output).write_text(emit_config(cfg))
    for w in status.warnings:
        _err(f"warning: {w}")
    print(f"{cfg.name}: {status.scheduled_operations} scheduled operations, {status.registers} registers, "
          f"{len(cfg.operators)} operator instances -> {a.output}")
    return 0


def cmd_sim(a) -> int:
    cfg = load_config_file(a.config)
    data = read_inputs(a.inputs, cfg.input_ports())
    if a.seed is not None:
        dm = RandomizedDelays(seed=a.seed)
    else:
        dm = FixedDelays(parse_delay_table(Path(a.delays).read_text()) if a.delays else default_delay_table())
    rep = simulate_processor(cfg, data, level=a.level.upper(), delay_model=dm, t_max_ns=a.tmax)
    ports = sorted(rep.outputs)
    for j in range(max((len(v) for v in rep.outputs.values()), default=0)):
        print(" ".join(str(rep.outputs[p][j]) if j < len(rep.outputs[p]) else "-" for p in ports))
    lat = "-" if rep.latency_ns is None else f"{rep.latency_ns:.3f}"
    print(f"# level={rep.level} latency_ns={lat} throughput_per_us={rep.throughput_per_us:.3f} "
          f"deadlock={str(rep.deadlock).lower()}", file=sys.stderr)
    for w in rep.warnings:
        _err(f"warning: {w}")
    return 0


def cmd_bench(a) -> int:
    table = parse_delay_table(Path(a.delays).read_text()) if a.delays else None
    sweep = _parse_range(a.sweep_bubbles) if a.sweep_bubbles else None
    results = run_suite(a.suite, a.bubbles, sweep, table=table, samples=a.samples, seed=a.seed, xcheck=a.xcheck)
    text = emit_csv(results, a.csv)
    if not a.csv:
        sys.stdout.write(text)
    bad = [r for r in results if r.outputs_ok is False or r.xcheck_ok is False]
    for r in bad:
        _err(f"{r.benchmark}/{r.variant} bubbles={r.bubbles}: outputs_ok={r.outputs_ok} xcheck_ok={r.xcheck_ok}")
    if sweep is not None:
        groups: dict[tuple[str, str], list] = {}
        for r in results:
            groups.setdefault((r.benchmark, r.variant), []).append(r)
        tops = {k: best(v) for k, v in groups.items()}
        for (name, var), r in tops.items():
            print(f"# best {name}/{var}: bubbles={r.bubbles} throughput_per_us={r.throughput_per_us:.3f}",
                  file=sys.stderr)
        print(f"# throughput spread at best bubbles: {100 * throughput_spread(r.throughput_per_us for r in tops.values()):.2f}%",
              file=sys.stderr)
    return 1 if bad else 0


def cmd_verify_di(a) -> int:
    subject = config_subject(a.config, a.samples, a.seed)
    rep = verify_di(subject, a.trials, a.seed, _parse_jitter(a.jitter) if a.jitter else (Fraction(1, 10), Fraction(2)))
    sys.stdout.write(rep.to_text())
    return 0 if rep.passed else 2


def cmd_derive_target(a) -> int:
    cfg = load_config_file(a.config)
    inventory = {}
    for item in a.inventory or []:
        kind, _, n = item.partition("=")
        inventory[kind.upper()] = int(n)
    target, report = derive_target(cfg, inventory)
    Path(a.output).write_text(emit_config(target))
    if a.report:
        sys.stdout.write(report.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flysig", description="Delay-insensitive bit-serial dataflow processor toolkit")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("compile", help="compile a dataflow graph into a processor configuration")
    c.add_argument("dfg")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--bubbles", type=int, default=DEFAULT_BUBBLES, help="minimum empty stages per link")
    c.add_argument("--no-opt", action="store_true", help="skip the repeated-addend rewrite")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("sim", help="simulate a configuration")
    s.add_argument("config")
    s.add_argument("--inputs", required=True, help="one line per sample, one integer per input port")
    s.add_argument("--level", choices=("gate", "token"), default="token")
    s.add_argument("--delays", help="delay table file (<GATEKIND> <ns> lines)")
    s.add_argument("--seed", type=int, help="randomized gate delays with this seed")
    s.add_argument("--tmax", type=float, help="simulated time limit in ns")
    s.set_defaults(func=cmd_sim)

    b = sub.add_parser("bench", help="run a benchmark suite at GATE level")
    b.add_argument("--suite", choices=sorted(SUITES), default="table1")
    b.add_argument("--sweep-bubbles", metavar="0..K")
    b.add_argument("--bubbles", type=int, default=DEFAULT_BUBBLES)
    b.add_argument("--csv")
    b.add_argument("--xcheck", action="store_true", help="also run TOKEN level and compare outputs")
    b.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--delays")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify-di", help="check delay-insensitivity under randomized gate delays")
    v.add_argument("config")
    v.add_argument("--trials", type=int, required=True)
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--jitter", metavar="MIN,MAX", help="gate delay bounds in ns (default 0.1,2)")
    v.add_argument("--samples", type=int, default=20)
    v.set_defaults(func=cmd_verify_di)

    t = sub.add_parser("derive-target", help="prune a prototype configuration into a target")
    t.add_argument("config")
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--report", action="store_true")
    t.add_argument("--inventory", nargs="*", metavar="KIND=N", help="full prototype inventory")
    t.set_defaults(func=cmd_derive_target)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SimulationError as e:
        _err(f"{e.code}: {e.detail}")
        return 1
    except (OSError, ValueError) as e:
        _err(str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
