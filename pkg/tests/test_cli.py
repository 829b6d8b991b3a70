import subprocess
import sys

import pytest

from cubeqkd.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

FAST = ["--samples", "40", "--zenith-max", "20", "--zenith-step", "10"]


def test_validate_ok(capsys):
    assert main(["validate"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok:")


def test_sweep_csv_byte_identical(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    assert main(["sweep", *FAST, "--out", str(a)]) == EXIT_OK
    assert main(["sweep", *FAST, "--out", str(b)]) == EXIT_OK
    assert main(["sweep", *FAST, "--workers", "2", "--out", str(c)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "zenith_deg,protocol,mode,avg_key_rate,mean_transmittance,samples,seed"
    assert len(lines) == 4


def test_multi_scenario_files(tmp_path):
    out = tmp_path / "rates.csv"
    rc = main(["sweep", *FAST, "--scenario", "Day-1", "--scenario", "Night-3", "--protocol", "all", "--out", str(out)])
    assert rc == EXIT_OK
    for name in ("Day-1", "Night-3"):
        text = (tmp_path / f"rates-{name}.csv").read_text().splitlines()
        assert len(text) == 1 + 3 * 2


def test_pdr_and_optimize(tmp_path):
    pdr = tmp_path / "pdr.csv"
    assert main(["pdr", "--samples", "30", "--zeniths", "0,40", "--out", str(pdr)]) == EXIT_OK
    assert pdr.read_text().startswith("zenith_deg,rate,probability\n")
    opt = tmp_path / "best.ini"
    rc = main(["optimize", "--samples", "10", "--mu1", "0.7", "--mu2", "0.1", "--cx", "0.5,0.7", "--out", str(opt)])
    assert rc == EXIT_OK
    assert "c_X = 0.69999999999999996" in opt.read_text()


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep", "--bins", "0"],
        ["sweep", "--scenario", "Fog-9"],
        ["sweep", "--zenith-max", "89"],
        ["optimize", "--mu1", "0.1", "--mu2", "0.2"],
    ],
)
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[source]\nmu1 = 0.05\n")
    assert main(["validate", "--config", str(ini)]) == EXIT_CONFIG
    ini.write_text("[source]\nmu1 = lots\n")
    assert main(["validate", "--config", str(ini)]) == EXIT_CONFIG


def test_numeric_failure(tmp_path, capsys):
    # a two-point rule cannot integrate a wide beam to 1e-6
    ini = tmp_path / "coarse.ini"
    ini.write_text("[turbulence]\nquad_rho = 2\nquad_theta = 2\n")
    assert main(["validate", "--config", str(ini)]) == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cubeqkd.cli", "validate"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ok:")
