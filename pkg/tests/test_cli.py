import json
import subprocess
import sys

import numpy as np
import pytest

from bondperc.cli import main, read_config
from bondperc.inference import PosteriorSample

FAST = ["--iterations", "20000", "--burn-in", "2000", "--thin", "5"]


def run(*argv):
    return main([str(a) for a in argv])


def site_lines(path):
    lines = []
    for line in path.read_text().splitlines():
        if line == "EDGES":
            break
        if not line.startswith("#"):
            lines.append(line)
    return lines


def test_simulate_p0(tmp_path):
    out = tmp_path / "c.txt"
    assert run("simulate", "--p", 0, "--out", out) == 0
    assert site_lines(out) == ["0,0"]
    assert out.read_text().startswith("# bondperc ")
    assert "seed=0" in out.read_text().splitlines()[0]


def test_simulate_full_box(tmp_path):
    out = tmp_path / "c.txt"
    assert run("simulate", "--p", 1, "--plot", "box:2,5", "--out", out) == 0
    assert len(site_lines(out)) == 25


def test_simulate_deterministic(tmp_path):
    out = tmp_path / "c.txt"
    run("simulate", "--p", 0.478, "--seed", 11, "--out", out)
    first = out.read_bytes()
    run("simulate", "--p", 0.478, "--seed", 11, "--out", out)
    assert out.read_bytes() == first


def test_simulate_from_intensity(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    run("simulate", "--lam", 0.65, "--seed", 2, "--out", a)
    run("simulate", "--p", 1 - np.exp(-0.65), "--seed", 2, "--out", b)
    assert site_lines(a) == site_lines(b)


def test_simulate_truncation(tmp_path, capsys):
    assert run("simulate", "--p", 0.7, "--cap", 50, "--seed", 1, "--out", tmp_path / "t.txt") == 3
    assert "exceeded" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["simulate", "--p", 0.5, "--plot", "box:2,4"],
    ["simulate", "--p", 1.5],
    ["simulate"],
    ["simulate", "--p", "abc"],
])
def test_simulate_input_errors(tmp_path, argv):
    assert run(*argv, "--out", tmp_path / "x.txt") == 2


def test_replicates_independent_of_threads(tmp_path):
    a, b = tmp_path / "a" / "r.txt", tmp_path / "b" / "r.txt"
    a.parent.mkdir(), b.parent.mkdir()
    assert run("simulate", "--p", 0.45, "--replicates", 5, "--out", a) == 0
    assert run("simulate", "--p", 0.45, "--replicates", 5, "--threads", 3, "--out", b) == 0
    for i in range(5):
        assert site_lines(a.with_name(f"r.rep{i}.txt")) == site_lines(b.with_name(f"r.rep{i}.txt"))
    rows = a.read_text().splitlines()
    assert rows[1] == "replicate,size,status" and len(rows) == 7


def test_infer_s1_two_sites(tmp_path):
    cluster = tmp_path / "two.txt"
    cluster.write_text("0,0\n1,0\n")
    out = tmp_path / "s.csv"
    assert run("infer-s1", "--cluster", cluster, "--out", out, *FAST) == 0
    summary = json.loads((tmp_path / "s.csv.summary.json").read_text())
    assert summary["mean"] == pytest.approx(2 / 9, abs=0.01)
    sample = PosteriorSample.from_csv(out)
    assert len(sample) == summary["n_draws"] == 3600


def test_simulate_then_infer_round_trip(tmp_path):
    cluster, out = tmp_path / "c.txt", tmp_path / "s.csv"
    assert run("simulate", "--p", 0.5, "--plot", "inner-outer:2,7,1", "--seed", 3, "--out", cluster) == 0
    assert run("infer-s1", "--cluster", cluster, "--out", out, *FAST) == 0
    summary = json.loads((tmp_path / "s.csv.summary.json").read_text())
    assert summary["plot"] == "inner-outer:2,7,1"


@pytest.mark.parametrize("text", ["0,0\n1,x\n", "0,0\n2,0\n", "0,0\n0,0\n"])
def test_infer_s1_bad_input(tmp_path, capsys, text):
    cluster = tmp_path / "bad.txt"
    cluster.write_text(text)
    assert run("infer-s1", "--cluster", cluster, "--out", tmp_path / "s.csv", *FAST) == 2
    assert "error" in capsys.readouterr().err


def test_infer_s1_line_number_in_message(tmp_path, capsys):
    cluster = tmp_path / "bad.txt"
    cluster.write_text("0,0\n1,0\n1,y\n")
    run("infer-s1", "--cluster", cluster, "--out", tmp_path / "s.csv")
    assert "line 3" in capsys.readouterr().err


def test_infer_s2_n1(tmp_path):
    out = tmp_path / "n1.csv"
    assert run("infer-s2", "--n", 1, "--out", out, *FAST) == 0
    summary = json.loads((tmp_path / "n1.csv.summary.json").read_text())
    assert summary["mean"] == pytest.approx(1 / 6, abs=0.01)
    header = out.read_text().splitlines()[1]
    assert header == "step,p,e_open,e_sat,w"


def test_infer_s2_errors(tmp_path):
    assert run("infer-s2", "--n", 0, "--out", tmp_path / "x.csv") == 2
    assert run("infer-s2", "--n", 30, "--plot", "box:2,5", "--out", tmp_path / "x.csv") == 2


def test_infer_s2_mode_grows(tmp_path):
    modes = {}
    for n in (5, 40):
        out = tmp_path / f"n{n}.csv"
        assert run("infer-s2", "--n", n, "--iterations", 400000, "--burn-in", 40000, "--out", out) == 0
        modes[n] = json.loads((tmp_path / f"n{n}.csv.summary.json").read_text())["mode"]
    assert modes[40] > modes[5]


def test_infer_replicates(tmp_path):
    out = tmp_path / "agg.csv"
    assert run("infer-s2", "--n", 3, "--replicates", 3, "--threads", 2, "--out", out, *FAST) == 0
    rows = out.read_text().splitlines()
    assert rows[1].startswith("replicate,seed") and len(rows) == 5
    assert (tmp_path / "agg.rep2.csv").exists()


def test_oracle(tmp_path):
    out = tmp_path / "o.csv"
    assert run("oracle", "--scenario", "s2", "--n", 2, "--out", out) == 0
    assert out.read_text().splitlines()[1:] == ["s,k,l,count", "1,1,6,4"]
    block = tmp_path / "block.txt"
    block.write_text("0,0\n0,1\n1,0\n1,1\n")
    assert run("oracle", "--scenario", "s1", "--cluster", block, "--out", out) == 0
    assert out.read_text().splitlines()[2:] == ["4,3,8,4", "4,4,8,1"]


def test_oracle_guards(tmp_path):
    assert run("oracle", "--scenario", "s2", "--n", 20, "--out", tmp_path / "o.csv") == 4
    assert run("oracle", "--scenario", "s2", "--out", tmp_path / "o.csv") == 2


def test_design_trivial(tmp_path, capsys):
    out = tmp_path / "d.csv"
    assert run("design", "--mode", "instructive", "--N", 3, "--p-star", 0.5, "--M", 4, "--out", out,
               "--iterations", 3000, "--burn-in", 300) == 0
    assert "m=3 r=0" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[1] == "design,m,r,utility_mean,utility_se,M"
    assert lines[2].startswith("io-3-0,3,0,")


def test_design_progressive_report(tmp_path):
    out = tmp_path / "p.csv"
    assert run("design", "--mode", "progressive", "--N", 7, "--outer-iterations", 200, "--outer-burn-in", 20,
               "--iterations", 3000, "--burn-in", 300, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "design,frequency" and len(lines) == 4
    assert sum(float(x.split(",")[1]) for x in lines[2:]) == pytest.approx(1.0, abs=1e-5)


def test_design_requires_p_star(tmp_path):
    assert run("design", "--mode", "instructive", "--N", 11, "--out", tmp_path / "d.csv") == 2
    assert run("design", "--mode", "mc", "--N", 10, "--out", tmp_path / "d.csv") == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "c.txt"
    cfg.write_text(f"# defaults\np = 1\nplot = box:2,3\nout = {out}\n")
    assert run("simulate", "--config", cfg) == 0
    assert len(site_lines(out)) == 9
    assert run("simulate", "--config", cfg, "--p", 0) == 0
    assert len(site_lines(out)) == 1
    assert read_config(cfg) == {"p": "1", "plot": "box:2,3", "out": str(out)}


@pytest.mark.parametrize("text", ["bogus = 3\n", "p = abc\n", "just words\n"])
def test_config_errors(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert run("simulate", "--config", cfg, "--out", tmp_path / "c.txt") == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "c.txt"
    proc = subprocess.run([sys.executable, "-m", "bondperc.cli", "simulate", "--p", "0", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert site_lines(out) == ["0,0"]
