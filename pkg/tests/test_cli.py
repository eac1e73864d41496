import csv
import json
from pathlib import Path

import numpy as np
import pytest

from fracnls.cli import main
from fracnls.config import parse_config
from fracnls.runner import EXIT_CONFIG, EXIT_IO, EXIT_NON_VANISHING, EXIT_OK, EXIT_PICARD, expand_sweep, manifest
from fracnls.spectral import SpectralField, TorusGrid, from_function, write_snapshot

PLANE = """
[equation]
s = 1.0
N = 1
M = 32

[nonlinearity]
kind = "power"
gamma = 2.0

[initial_data]
kind = "plane_wave"
amplitude = 2.0
k = [1]

[solver]
total_T = 0.3
max_window = 0.1
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_simulate_plane_wave(tmp_path, capsys):
    code = main(["simulate", "--config", write(tmp_path, PLANE), "--output-dir", str(tmp_path / "out"),
                 "--snapshot-every", "1", "--diagnostics", "jsonl"])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["final_error"] < 1e-6
    run_dir = Path(summary["run_dir"])
    for name in ("manifest.json", "config.toml", "timeline.jsonl", "reports/norms.csv", "reports/picard.jsonl", "reports/summary.json"):
        assert (run_dir / name).exists()
    assert len(list((run_dir / "snapshots").iterdir())) == 4


def test_manifest_hash_deterministic():
    a = manifest(parse_config(PLANE))
    b = manifest(parse_config(PLANE))
    assert a["config_hash"] == b["config_hash"]
    other = manifest(parse_config(PLANE.replace("total_T = 0.3", "total_T = 0.2")))
    assert other["config_hash"] != a["config_hash"]


def test_exit_config(tmp_path):
    assert main(["simulate", "--config", write(tmp_path, PLANE.replace("M = 32", "M = 33")), "--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_exit_non_vanishing(tmp_path):
    # the infimum collapses inside one long window for this data
    g = TorusGrid(1, 64)
    F = from_function(g, lambda x: 1 + 0.3 * np.exp(1j * x) + 0.3 * np.exp(2j * x))
    snap = tmp_path / "u0.fnls"
    write_snapshot(snap, F, 1.0, 0.0)
    text = PLANE.replace('kind = "power"\ngamma = 2.0', 'kind = "log"').replace("M = 32", "M = 64").replace(
        'kind = "plane_wave"\namplitude = 2.0\nk = [1]', f'kind = "from_snapshot"\npath = "{snap}"').replace(
        "total_T = 0.3\nmax_window = 0.1", "total_T = 4.0\nmax_window = 1.0\nquad_nodes = 16\npicard_max_iters = 400")
    assert main(["simulate", "--config", write(tmp_path, text), "--output-dir", str(tmp_path / "o")]) == EXIT_NON_VANISHING


def test_exit_picard(tmp_path):
    text = PLANE.replace("max_window = 0.1", "max_window = 0.1\npicard_max_iters = 2")
    assert main(["simulate", "--config", write(tmp_path, text), "--output-dir", str(tmp_path / "o")]) == EXIT_PICARD


def test_exit_io(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.toml"), "--output-dir", str(tmp_path)]) == EXIT_IO
    text = PLANE.replace('kind = "plane_wave"\namplitude = 2.0\nk = [1]', f'kind = "from_snapshot"\npath = "{tmp_path / "nope.fnls"}"')
    assert main(["simulate", "--config", write(tmp_path, text), "--output-dir", str(tmp_path / "o")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--config", write(tmp_path, PLANE), "--output-dir", str(blocker)]) == EXIT_IO


def test_sweep_three_dirs(tmp_path, capsys):
    text = PLANE + "\n[sweep]\nmax_parallel = 1\n[sweep.axes]\ns = [0.5, 1.0, 2.0]\n"
    assert main(["sweep", "--config", write(tmp_path, text), "--output-dir", str(tmp_path / "sw")]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "sw" / "summary.csv")))
    assert len(rows) == 3 and all(r["status"] == "pass" for r in rows)
    assert len([p for p in (tmp_path / "sw").iterdir() if p.is_dir()]) == 3


def test_sweep_grid_and_empty():
    two = parse_config(PLANE + "\n[sweep.axes]\ns = [0.5, 1.0]\nM = [16, 32]\n")
    assert len(expand_sweep(two)) == 4
    assert len(expand_sweep(parse_config(PLANE))) == 1


def test_sweep_parallel_and_failures(tmp_path, monkeypatch):
    monkeypatch.setenv("FNLS_THREADS", "2")
    text = PLANE + "\n[sweep]\nmax_parallel = 2\n[sweep.axes]\n\"solver.picard_max_iters\" = [2, 200]\n"
    assert main(["sweep", "--config", write(tmp_path, text), "--output-dir", str(tmp_path / "sw")]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "sw" / "summary.csv")))
    assert [r["status"] for r in rows] == ["fail", "pass"]


def test_certified_T_decreases_with_norm(tmp_path, capsys):
    Ts = []
    for c in (1.0, 2.0, 4.0):
        text = PLANE.replace('kind = "plane_wave"\namplitude = 2.0\nk = [1]', f'kind = "constant"\nc = {c}') + "\neta = 1.0\n"
        text = text.replace("[solver]\n", "[solver]\nuse_certified_T = true\n")
        assert main(["estimate-window", "--config", write(tmp_path, text)]) == EXIT_OK
        out = capsys.readouterr().out
        Ts.append(float(next(l for l in out.splitlines() if l.strip().startswith("T:")).split(":")[1]))
    assert Ts[0] > Ts[1] > Ts[2]


def test_estimate_window_report(tmp_path, capsys):
    assert main(["estimate-window", "--config", write(tmp_path, PLANE), "--fit"]) == EXIT_OK
    out = capsys.readouterr().out
    for key in ("T_map_into_self", "T_contraction", "T_infimum", "G1", "G2", "R:"):
        assert key in out


def test_verify(tmp_path, capsys):
    out = tmp_path / "suite.jsonl"
    assert main(["verify", "--seed", "1", "--checks", "k_constant,series_condition", "--output", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert [json.loads(l)["name"] for l in lines] == ["k_constant", "series_condition"]
    assert main(["verify", "--checks", "bogus"]) == EXIT_CONFIG


def test_inspect_snapshot(tmp_path, capsys):
    g = TorusGrid(1, 8)
    c = np.zeros(8, dtype=complex)
    c[1] = 2.0
    write_snapshot(tmp_path / "s.fnls", SpectralField(g, c), 1.5, 0.25)
    assert main(["inspect-snapshot", str(tmp_path / "s.fnls"), "--top", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "s: 1.5" in out and "k=(1,)" in out
    (tmp_path / "bad.fnls").write_bytes(b"nope")
    assert main(["inspect-snapshot", str(tmp_path / "bad.fnls")]) == EXIT_IO
