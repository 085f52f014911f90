import runpy
from pathlib import Path

import yaml

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


def load_main(name):
    return runpy.run_path(str(SCRIPTS / name))["main"]


def test_certificate_sweep(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert load_main("certificate_sweep.py")(["--n", "3", "--csv", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 10
    assert "feasible" in capsys.readouterr().out


def test_convergence_study(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"grid": {"N_x": 32, "N_v": 64}, "time": {"N_t": 16}}))
    out = tmp_path / "conv.csv"
    assert load_main("convergence_study.py")(["--config", str(cfg), "--levels", "16", "32", "--csv", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("N_t,oracle_l2") and len(lines) == 3
