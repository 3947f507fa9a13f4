import json
import math

import numpy as np
import pytest

from echosculpt.cli import main


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def files(tmp_path):
    system = _write(
        tmp_path / "system.json",
        {"spins": 3, "offsets_hz": [1200, -800, 450], "couplings_hz": [[0, 1, 10], [0, 2, 20], [1, 2, 40]]},
    )
    target = _write(tmp_path / "target.json", {"one_spin": [0, 0, 0], "two_spin": [[0, 1, "pi"], [0, 2, "pi"], [1, 2, "pi"]]})
    return tmp_path, system, target


def test_rescale_then_verify(files, capsys):
    tmp, system, target = files
    out = tmp / "seq.json"
    assert main(["rescale", "--system", system, "--target", target, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "total_time_s: 0.0625" in text
    assert "naive_time_s: 0.0875" in text
    manifest = json.loads((tmp / "seq.json.manifest.json").read_text())
    assert manifest["command"] == "rescale" and manifest["seed"] == 0
    assert main(["verify", "--system", system, "--sequence", str(out), "--target", target]) == 0
    assert "max_residual_rad" in capsys.readouterr().out


def test_rescale_is_byte_identical(files):
    tmp, system, target = files
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp / name
        assert main(["rescale", "--system", system, "--target", target, "--out", str(out), "--mode", "direct"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert (tmp / "a.json.manifest.json").read_text().replace("a.json", "") != ""


def test_edited_delay_fails_verify(files):
    tmp, system, target = files
    out = tmp / "seq.json"
    main(["rescale", "--system", system, "--target", target, "--out", str(out)])
    doc = json.loads(out.read_text())
    seg = next(s for s in doc["segments"] if s["delay_s"] > 0)
    seg["delay_s"] *= 1.01
    out.write_text(json.dumps(doc))
    assert main(["verify", "--system", system, "--sequence", str(out), "--target", target]) == 1


def test_one_spin_targets_need_direct_mode_or_note(tmp_path, files, capsys):
    tmp, system, _ = files
    target = _write(tmp / "zt.json", {"one_spin": ["pi", "pi", "pi"], "two_spin": [[0, 1, "pi"], [0, 2, "pi"], [1, 2, "pi"]]})
    out = str(tmp / "z.json")
    assert main(["rescale", "--system", system, "--target", target, "--out", out]) == 1
    assert "symmetric mode" in capsys.readouterr().err
    assert main(["rescale", "--system", system, "--target", target, "--out", out, "--z-phase-note"]) == 0
    meta = json.loads((tmp / "z.json").read_text())["metadata"]
    assert meta["z_phases_required_rad"] == pytest.approx([math.pi] * 3)
    with pytest.warns(UserWarning):
        assert main(["rescale", "--system", system, "--target", target, "--out", out, "--mode", "direct"]) == 0
    assert main(["verify", "--system", system, "--sequence", out, "--target", target]) == 0


def test_infeasible_exit_code(tmp_path):
    system = _write(tmp_path / "s.json", {"spins": 2, "offsets_hz": [1, 2], "couplings_hz": []})
    target = _write(tmp_path / "t.json", {"one_spin": [0] * 2, "two_spin": [[0, 1, 1.0]]})
    assert main(["rescale", "--system", system, "--target", target, "--out", str(tmp_path / "o.json")]) == 2


def test_large_exhaustive_is_refused(tmp_path, capsys):
    q = 21
    system = _write(tmp_path / "s.json", {"spins": q, "offsets_hz": [1.0] * q, "couplings_hz": [[0, 1, 5.0]]})
    target = _write(tmp_path / "t.json", {"one_spin": [0] * q, "two_spin": [[0, 1, 1.0]]})
    assert main(["rescale", "--system", system, "--target", target, "--out", str(tmp_path / "o.json")]) == 1
    assert "--rros" in capsys.readouterr().err


def test_rescale_with_rros(tmp_path, capsys):
    rng = np.random.default_rng(1)
    q = 10
    couplings = [[i, j, float(rng.uniform(1, 100))] for i in range(q) for j in range(i + 1, q)]
    system = _write(tmp_path / "s.json", {"spins": q, "offsets_hz": rng.uniform(1, 100, q).tolist(), "couplings_hz": couplings})
    target = _write(tmp_path / "t.json", {"one_spin": [0] * q, "two_spin": [[i, j, float(rng.uniform(-3, 3))] for i, j, _ in couplings]})
    out = str(tmp_path / "o.json")
    assert main(["rescale", "--system", system, "--target", target, "--out", out, "--rros", "4", "--seed", "2"]) == 0
    assert "optimality: subset-only" in capsys.readouterr().out
    assert main(["verify", "--system", system, "--sequence", out, "--target", target]) == 0


def test_refocus_eight_spins(tmp_path, capsys):
    q = 8
    couplings = [[i, j, 10.0 + i + j] for i in range(q) for j in range(i + 1, q)]
    system = _write(tmp_path / "s.json", {"spins": q, "offsets_hz": [100.0 * (i + 1) for i in range(q)], "couplings_hz": couplings})
    out = tmp_path / "r.json"
    assert main(["refocus", "--system", system, "--retain", "2,5", "--phase", "pi/2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "pulses: 34" in text and "pulse_formula: 34" in text
    assert main(["verify", "--system", system, "--sequence", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    values = {ln.split(":")[0]: float(ln.split(":")[1]) for ln in lines}
    assert values["2,5"] == pytest.approx(math.pi / 2, rel=1e-10)
    assert max(abs(v) for k, v in values.items() if k != "2,5") < 1e-12


def test_scan_rounding_csv(files):
    tmp, system, target = files
    seq = tmp / "seq.json"
    main(["rescale", "--system", system, "--target", target, "--out", str(seq)])
    out = tmp / "scan.csv"
    assert main(["scan-rounding", "--system", system, "--sequence", str(seq), "--target", target, "--points", "7", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "resolution_s,infidelity" and len(rows) == 8
    assert float(rows[1].split(",")[0]) == pytest.approx(1e-3)


def test_sweep_and_bench(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ECHO_SCULPT_THREADS", "1")
    out = tmp_path / "sweep.csv"
    assert main(["rros-sweep", "--q", "7", "--k-from", "1.2", "--k-to", "3", "--k-steps", "4", "--trials", "10", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "k,trials,successes,fraction,ci_low,ci_high" and len(rows) == 5
    first = out.read_bytes()
    main(["rros-sweep", "--q", "7", "--k-from", "1.2", "--k-to", "3", "--k-steps", "4", "--trials", "10", "--out", str(out)])
    assert out.read_bytes() == first
    bench = tmp_path / "bench.csv"
    assert main(["bench", "--q-from", "8", "--q-to", "9", "--trials", "1", "--out", str(bench)]) == 0
    assert bench.read_text().splitlines()[0] == "q,r,median_solve_s"


def test_bad_input_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["verify", "--system", str(bad), "--sequence", str(bad)]) == 1
    assert "error" in capsys.readouterr().err
