import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ionphase import cli, detection
from ionphase.exceptions import InconsistentDataError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_modes_csv(capsys):
    code, out, _ = run(capsys, "modes")
    assert code == 0
    table = dict(rows(out)[1:])
    assert rows(out)[0] == ["key", "value"]
    assert float(table["omega_odd"]) == pytest.approx(np.sqrt(1.7**2 - 2.0), abs=1e-10)
    assert float(table["critical_ratio"]) == pytest.approx(1.673, abs=0.002)


def test_modes_axial_json(capsys):
    code, out, _ = run(capsys, "modes", "--direction", "axial", "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert report["omega_odd"] == pytest.approx(np.sqrt(3.0), abs=1e-12)
    assert "critical_ratio" not in report


def test_sweep_header_and_size(capsys):
    code, out, _ = run(capsys, "sweep")
    table = rows(out)
    assert code == 0
    assert table[0] == ["ratio", "e_n0", "r_crit", "s_min", "stable"]
    assert len(table) == 201
    # default range starts below the critical ratio
    assert table[1][4] == "0" and table[1][1] == "nan"
    assert table[-1][4] == "1"


def test_trace_header_and_preset(capsys):
    code, out, _ = run(capsys, "trace", "--preset", "green", "--t-steps", "11")
    table = rows(out)
    assert code == 0
    assert table[0] == ["t_omega_z", "e_n"]
    assert len(table) == 12
    ref = cli.main(["trace", "--n-minus", "0", "--r", "1", "--t-steps", "11"])
    assert ref == 0
    assert capsys.readouterr().out == out


def test_phase_diagram_header(capsys):
    code, out, _ = run(capsys, "phase-diagram", "--grid", "4x5")
    table = rows(out)
    assert code == 0
    assert table[0] == ["n_minus", "r", "phase", "sup_en", "inf_en"]
    assert len(table) == 21
    assert {r[2] for r in table[1:]} <= {"Persistent", "DeathRevival", "Separable"}


def test_detect_stdout_and_stderr(capsys):
    code, out, err = run(capsys, "detect", "--preset", "blue")
    assert code == 0
    table = rows(out)
    assert table[0] == ["mode_id", "axis", "delta_p", "fidelity", "shots"]
    assert len(table) == 1 + 8 * len(detection.DEFAULT_KICKS)
    report = json.loads(err)
    assert set(report["modes"]) == set(detection.DETECT_MODES)


def test_detect_out_writes_report(tmp_path, capsys):
    out = tmp_path / "scan.csv"
    code, stdout, _ = run(capsys, "detect", "--shots", "1000", "--seed", "7", "--out", str(out))
    assert code == 0 and stdout == ""
    assert out.read_text().startswith("mode_id,axis,delta_p,fidelity,shots\n")
    report = json.loads((tmp_path / "scan.report.json").read_text())
    assert report["seed"] == 7 and report["shots"] == 1000


def test_detect_json(capsys):
    code, out, _ = run(capsys, "detect", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and set(doc) == {"scans", "report"}


@pytest.mark.parametrize("command", cli.COMMANDS)
def test_byte_identical_reruns(tmp_path, capsys, command):
    args = [command, "--grid", "6x6"] if command in ("phase-diagram",) else [command]
    if command == "detect":
        args += ["--shots", "500", "--seed", "3"]
    if command == "sweep":
        args += ["--grid", "20"]
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_unstable_exit_code(capsys):
    code, out, err = run(capsys, "modes", "--ratio", "1.6")
    assert code == 2
    assert out == ""
    assert "critical ratio 1.67" in err


def test_unstable_other_commands(capsys):
    for command in ("trace", "phase-diagram", "detect"):
        assert run(capsys, command, "--ratio", "1.5")[0] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["modes", "--ions", "XX"],
        ["modes", "--ions", "custom:1,-2"],
        ["detect", "--shots", "100"],
        ["trace", "--n-minus", "-1"],
        ["phase-diagram", "--grid", "axb"],
        ["bogus"],
        ["modes", "--ratio", "nan"],
    ],
)
def test_config_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_bad_config_file(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text('{"nonsense": 1}')
    assert run(capsys, "modes", "--config", str(bad))[0] == 1
    bad.write_text("{broken")
    assert run(capsys, "modes", "--config", str(bad))[0] == 1
    assert run(capsys, "modes", "--config", str(tmp_path / "missing.json"))[0] == 1


def test_bad_kick_grid(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kicks": [0.0, 0.5, 1.0]}))
    assert run(capsys, "detect", "--config", str(cfg))[0] == 1


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ratio": 2.5, "direction": "transverse", "format": "json"}))
    _, out, _ = run(capsys, "modes", "--config", str(cfg))
    assert json.loads(out)["freq_ratio"] == 2.5
    _, out, _ = run(capsys, "modes", "--config", str(cfg), "--ratio", "3.0")
    assert json.loads(out)["freq_ratio"] == 3.0


def test_custom_ions(capsys):
    _, out, _ = run(capsys, "modes", "--ions", "custom:24,9", "--format", "json")
    assert json.loads(out)["critical_ratio"] == pytest.approx(1.67332, abs=1e-5)


def test_inconsistent_exit_code(monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise InconsistentDataError("trace mismatch")

    monkeypatch.setattr(detection, "detect_state", boom)
    code, _, err = run(capsys, "detect")
    assert code == 3
    assert "trace mismatch" in err


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "ionphase", "modes", "--format", "json"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["direction"] == "transverse"
