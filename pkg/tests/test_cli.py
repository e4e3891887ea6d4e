import json
import xml.etree.ElementTree as ET

import pytest

from hbargeo import cli


def run(tmp_path, *args):
    return cli.main(list(args))


def load(path):
    with open(path) as fh:
        return json.load(fh)


def test_hbar_deterministic_and_stamped(tmp_path):
    args = ["--set", "p_step=0.5", "--set", "grid_n=32", "--seed", "3"]
    assert cli.main(["hbar", "--out", str(tmp_path / "a"), *args]) == 0
    assert cli.main(["hbar", "--out", str(tmp_path / "b"), *args]) == 0
    a = (tmp_path / "a" / "hbar.csv").read_bytes()
    assert a == (tmp_path / "b" / "hbar.csv").read_bytes()
    h = load(tmp_path / "a" / "config.json")["config_hash"]
    assert f"config_hash={h}".encode() in a
    for name in ("hbar.json", "manifest.json"):
        assert load(tmp_path / "a" / name)["config_hash"] == h
    svg = (tmp_path / "a" / "hbar.svg").read_text()
    assert h in svg
    ET.fromstring(svg.split("\n", 1)[1])
    assert load(tmp_path / "a" / "manifest.json")["seed"] == 3


def test_missing_potential_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert cli.main(["hbar", "--potential", missing, "--out", str(tmp_path / "o")]) == 1
    assert missing in capsys.readouterr().err


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["f0", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_bad_tolerance(tmp_path):
    assert cli.main(["hbar", "--set", "tol=0", "--out", str(tmp_path / "o")]) == 1


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"potential": {"template": "separable"}, "a": 1.0, "b": 2.0, "theta": 0.2}))
    assert cli.main(["lp-demo", "--config", str(cfg), "--set", "theta=-0.1", "--out", str(tmp_path / "o")]) == 0
    rep = load(tmp_path / "o" / "lp.json")
    assert rep["theta"] == -0.1 and rep["sup_error_exact"] <= 1e-8


def test_f0_separable(tmp_path):
    out = tmp_path / "f"
    assert cli.main(["f0", "--out", str(out), "--set", "windows=[1,4]", "--set", "resolutions=128"]) == 0
    rep = load(out / "f0.json")
    assert len(rep["polygon"]["edges"]) == 4
    assert sum(e["stable"] for e in rep["edges"]) == 4
    assert len(rep["vertices"]) == 4 and all(abs(v["det"]) == 1 for v in rep["vertices"])
    assert rep["area_nonincreasing"]
    ET.fromstring((out / "f0.svg").read_text().split("\n", 1)[1])


def test_f0_empty_interior_exit_2(tmp_path):
    assert cli.main(["f0", "--potential", "constant", "--set", "windows=[1]", "--set", "resolutions=64",
                     "--out", str(tmp_path / "o")]) == 2


def test_homoclinic_command(tmp_path):
    out = tmp_path / "h"
    assert cli.main(["homoclinic", "--out", str(out), "--set", "classes=[[0,1]]"]) == 0
    rep = load(out / "homoclinic.json")
    assert rep["records"][0]["homology"] == [0, 1]
    assert (out / "orbit_0_1.csv").read_text().startswith("t,x1,x2,v1,v2,energy")


def test_verify_lp_exact(tmp_path):
    out = tmp_path / "v"
    assert cli.main(["verify", "--suite", "lp-exact", "--out", str(out)]) == 0
    rep = load(out / "verify.json")
    meas = rep["results"][0]["measured"]
    assert all(v["contraction"] <= 0.5 for k, v in meas.items() if k.startswith("theta"))


def test_verify_separable_oracle(tmp_path):
    assert cli.main(["verify", "--suite", "separable-oracle", "--out", str(tmp_path / "v")]) == 0


def test_verify_unknown_suite(tmp_path, capsys):
    assert cli.main(["verify", "--suite", "bogus", "--out", str(tmp_path / "v")]) == 1
    err = capsys.readouterr().err
    assert "separable-oracle" in err and "lp-exact" in err


def test_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["nope"])
