"""Config parsing, experiment dispatch, artifacts and exit codes."""

import os

import numpy as np
import pytest

from cutflow.cli import (ConfigError, main, parse_config_file,
                         parse_overrides, resolve_config)


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_key_value_and_comments(tmp_path):
    path = write(tmp_path, """
# refinement study
experiment = converge   # trailing comment
n = 4,6,8

gamma0 = 0.02
""")
    raw = parse_config_file(path)
    assert raw["experiment"][1] == "converge"
    assert raw["n"] == (4, "4,6,8")
    assert raw["gamma0"][1] == "0.02"


def test_parse_rejects_bad_lines(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_file(write(tmp_path, "experiment = converge\nnonsense\n"))
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_file(write(tmp_path, "a = 1\na = 2\n"))


def test_resolve_unknown_key_reports_line(tmp_path):
    raw = parse_config_file(write(tmp_path,
                                  "experiment = converge\nwhatever = 3\n"))
    with pytest.raises(ConfigError, match="line 2.*whatever"):
        resolve_config(raw)


def test_resolve_missing_required():
    with pytest.raises(ConfigError, match="experiment"):
        resolve_config({})
    with pytest.raises(ConfigError, match="missing required keys: gamma0"):
        resolve_config({"experiment": (1, "sweep-gamma")})


def test_resolve_applies_defaults():
    exp, cfg = resolve_config({"experiment": (1, "static-bubble")})
    assert exp == "static-bubble"
    assert cfg["mu"] == 1.0 and cfg["r"] == 0.25 and cfg["h"] == 0.0125
    assert cfg["triplet"] == (2, 1, 0)


def test_resolve_validates_values():
    with pytest.raises(ConfigError, match="gamma0"):
        resolve_config({"experiment": (1, "converge"), "gamma0": (2, "-1")})
    with pytest.raises(ConfigError, match="triplet"):
        resolve_config({"experiment": (1, "converge"), "triplet": (2, "Q2/Q1")})
    with pytest.raises(ConfigError, match="unknown experiment"):
        resolve_config({"experiment": (1, "teapot")})


def test_overrides_win():
    raw = {"experiment": (1, "static-bubble"), "h": (2, "0.1")}
    raw.update(parse_overrides(["h=0.05"]))
    _, cfg = resolve_config(raw)
    assert cfg["h"] == 0.05
    with pytest.raises(ConfigError):
        parse_overrides(["just-a-word"])


def test_converge_end_to_end_and_reproducible(tmp_path):
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    cfg = write(tmp_path, "experiment = converge\nn = 4,6,8\n")
    assert main([cfg, "--override", f"outdir={out1}"]) == 0
    assert main([cfg, "--override", f"outdir={out2}"]) == 0
    conv = (out1 / "converge.csv").read_bytes()
    assert conv == (out2 / "converge.csv").read_bytes()
    lines = conv.decode().strip().splitlines()
    assert lines[0] == "h,errL2u,errH1u,errL2p,errLambda,errPhi"
    assert len(lines) == 5
    # Config echo sits next to the outputs and resolves identically.
    echo = parse_config_file(str(out1 / "config.echo"))
    exp, cfg2 = resolve_config(echo)
    assert exp == "converge" and cfg2["n"] == (4, 6, 8)


def test_static_bubble_end_to_end(tmp_path):
    cfg = write(tmp_path, f"""
experiment = static-bubble
h = 0.1
outdir = {tmp_path}
""")
    assert main([cfg]) == 0
    rows = (tmp_path / "bubble.csv").read_text().strip().splitlines()
    assert rows[0] == "h,p_plus,p_minus,delta_p,deviation"
    dev = float(rows[1].split(",")[4])
    assert dev < 0.01


def test_sweep_gamma_end_to_end(tmp_path):
    cfg = write(tmp_path, f"""
experiment = sweep-gamma
n = 4
gamma0 = 0.02,0.1
outdir = {tmp_path}
""")
    assert main([cfg]) == 0
    rows = (tmp_path / "gamma.csv").read_text().strip().splitlines()
    assert rows[0] == "gamma0,errLambda"
    assert len(rows) == 3


def test_sweep_center_end_to_end_with_jobs(tmp_path):
    cfg = write(tmp_path, f"""
experiment = sweep-center
n = 4
xc = 0.48,0.52
jobs = 2
outdir = {tmp_path}
""")
    assert main([cfg]) == 0
    rows = (tmp_path / "center.csv").read_text().strip().splitlines()
    assert rows[0] == "xc,errLambda_unstab,errLambda_stab"
    assert len(rows) == 3
    vals = np.array([r.split(",") for r in rows[1:]], dtype=float)
    assert np.all(np.isfinite(vals))


def test_evolve_stokes_short_run(tmp_path):
    cfg = write(tmp_path, f"""
experiment = evolve-stokes
n = 10
dt = 0.0005
T = 0.002
outdir = {tmp_path}
""")
    assert main([cfg]) == 0
    rows = (tmp_path / "evolution.csv").read_text().strip().splitlines()
    assert rows[0] == "t,a1,a2,gamma_length,energy,mass_err_pct,newton_iters"
    assert len(rows) == 6     # 4 solve steps plus the final geometry row


def test_exit_codes(tmp_path):
    missing = str(tmp_path / "nope.cfg")
    assert main([missing]) == 2
    bad = write(tmp_path, "experiment = converge\nbogus = 1\n")
    assert main([bad]) == 2
    few = write(tmp_path, f"experiment = converge\nn = 4,6\noutdir = {tmp_path}\n")
    assert main([few]) == 2
