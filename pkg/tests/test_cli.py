import subprocess
import sys
from importlib import resources

import pytest

from flysig.cli import main

BENCH = resources.files("flysig.benchmarks")


def _dfg(name):
    return str(BENCH.joinpath(f"{name}.dfg"))


def test_compile_and_sim(tmp_path, capsys):
    cfg = tmp_path / "ab.cfg"
    assert main(["compile", _dfg("filter_ab_1"), "-o", str(cfg)]) == 0
    inp = tmp_path / "in.txt"
    inp.write_text("# u\n1\n2\n-3\n5\n")
    capsys.readouterr()
    assert main(["sim", str(cfg), "--inputs", str(inp), "--level", "gate"]) == 0
    out = capsys.readouterr()
    assert out.out.split() == ["1", "5", "12", "41"]
    assert "deadlock=false" in out.err


def test_sim_randomized_token_level(tmp_path, capsys):
    cfg = tmp_path / "ab.cfg"
    main(["compile", _dfg("filter_ab_2"), "-o", str(cfg)])
    inp = tmp_path / "in.txt"
    inp.write_text("1\n2\n")
    capsys.readouterr()
    assert main(["sim", str(cfg), "--inputs", str(inp), "--seed", "4"]) == 0
    assert capsys.readouterr().out.split() == ["1", "5"]


def test_bad_inputs_file_exit_1(tmp_path, capsys):
    cfg = tmp_path / "ab.cfg"
    main(["compile", _dfg("filter_ab_1"), "-o", str(cfg)])
    inp = tmp_path / "in.txt"
    inp.write_text("1 2\n")
    assert main(["sim", str(cfg), "--inputs", str(inp)]) == 1
    assert "SYNTAX" in capsys.readouterr().err


def test_missing_file_exit_1(tmp_path):
    assert main(["compile", str(tmp_path / "nope.dfg"), "-o", str(tmp_path / "x")]) == 1


def test_invalid_config_exit_1(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("processor x width=8\n[ROUTING]\ny inst=nothing src=IN[0],IN[0] dst=OUT[0]\n")
    assert main(["derive-target", str(p), "-o", str(tmp_path / "t.cfg")]) == 1


def test_verify_di_pass(tmp_path, capsys):
    cfg = tmp_path / "ab.cfg"
    main(["compile", _dfg("filter_ab_3"), "-o", str(cfg)])
    capsys.readouterr()
    assert main(["verify-di", str(cfg), "--trials", "2", "--seed", "1", "--samples", "4"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_verify_di_fail_exit_2(tmp_path, capsys):
    cfg = tmp_path / "ab0.cfg"
    main(["compile", _dfg("filter_ab_3"), "-o", str(cfg), "--bubbles", "0"])
    capsys.readouterr()
    assert main(["verify-di", str(cfg), "--trials", "2", "--seed", "1", "--samples", "3"]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_derive_target_report(tmp_path, capsys):
    cfg = tmp_path / "ab.cfg"
    main(["compile", _dfg("filter_ab_1"), "-o", str(cfg)])
    out = tmp_path / "t.cfg"
    capsys.readouterr()
    assert main(["derive-target", str(cfg), "-o", str(out), "--report", "--inventory", "ADD=5"]) == 0
    text = capsys.readouterr().out
    assert "removed 2 operator instance(s)" in text
    assert out.read_text().startswith("processor filter_ab_1 width=8 target=1")


def test_bad_sweep_range_exit_1():
    assert main(["bench", "--sweep-bubbles", "2..4"]) == 1


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "flysig.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "verify-di" in r.stdout
