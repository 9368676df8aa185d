import os
import subprocess
import sys

import pytest

from translator_lab.cli import (
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    ExperimentConfig,
    build_parser,
    effective_config,
    main,
    resolve_args,
)
from translator_lab.geometry import read_field
from translator_lab.solver import read_meta

PI4 = "0.7853981633974483"


def run(*argv):
    return main([str(a) for a in argv])


def test_solve_rectangle_contract(tmp_path):
    out = tmp_path / "run1"
    assert run("solve", "--shape", "rect", "--L", 4, "--b", PI4, "--nx", 65, "--ny", 17, "--out", out) == EXIT_OK
    for name in ("field.txt", "meta.txt", "contour.svg", "config.txt"):
        assert (out / name).exists()
    meta = read_meta(out / "meta.txt")
    assert meta["converged"] and meta["t_reached"] == 1.0
    assert read_field(out / "field.txt").domain.nx == 65


def test_solve_annulus(tmp_path):
    out = tmp_path / "ann"
    code = run("solve", "--shape", "annulus", "--a", 2, "--b", 2, "--A", 2.5, "--B", 2.5,
               "--nx", 41, "--ny", 41, "--out", out)
    assert code == EXIT_OK
    from translator_lab.geometry import Annulus
    assert isinstance(read_field(out / "field.txt").domain.shape_meta, Annulus)


def test_parity_rule_is_a_usage_error(tmp_path, capsys):
    code = run("solve", "--shape", "rect", "--L", 4, "--b", PI4, "--nx", 256, "--ny", 65, "--out", tmp_path / "x")
    assert code == EXIT_USAGE
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["solve", "--L", "pi/4"],
    ["solve", "--L", "nan"],
    ["solve", "--shape", "disk"],
    ["nosuchcommand"],
    [],
])
def test_bad_arguments_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_USAGE


def test_missing_option(tmp_path):
    assert run("solve", "--L", 4, "--out", tmp_path / "m") == EXIT_USAGE


def test_solver_failure_leaves_marker(tmp_path, capsys):
    out = tmp_path / "fail"
    code = run("solve", "--L", 4, "--b", PI4, "--nx", 33, "--ny", 9, "--divergence-height", 1e-3, "--out", out)
    assert code == EXIT_NUMERIC
    assert (out / "FAILED").exists() and (out / "field.txt").exists()
    assert "numerical failure" in capsys.readouterr().err
    # a later successful run removes the stale marker
    assert run("solve", "--L", 4, "--b", PI4, "--nx", 33, "--ny", 9, "--out", out) == EXIT_OK
    assert not (out / "FAILED").exists()


def test_config_round_trip_and_precedence(tmp_path):
    out = tmp_path / "a"
    assert run("catenoid", "--lambda", 0.5, "--smax", 1, "--h", 0.01, "--out", out) == EXIT_OK
    text = (out / "config.txt").read_text()
    cfg = ExperimentConfig.from_text(text)
    assert cfg.command == "catenoid" and cfg.params["lambda"] == "0.5"
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg
    # rerun from the written config: byte-identical artifacts
    out2 = tmp_path / "b"
    assert run("catenoid", "--config", out / "config.txt", "--out", out2) == EXIT_OK
    assert (out / "profile.csv").read_bytes() == (out2 / "profile.csv").read_bytes()
    # command line beats the config file
    args = resolve_args(build_parser(), ["catenoid", "--config", str(out / "config.txt"), "--h", "0.02"])
    assert args.h == 0.02 and getattr(args, "lambda") == 0.5
    assert effective_config(args).params["h"] == "0.02"


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("command = bowl\nnot_a_key = 3\n")
    assert run("bowl", "--config", bad) == EXIT_USAGE
    bad.write_text("command = solve\n")
    assert run("bowl", "--config", bad) == EXIT_USAGE
    bad.write_text("rmax\n")
    assert run("bowl", "--config", bad) == EXIT_USAGE
    assert run("bowl", "--config", tmp_path / "missing.txt") == EXIT_USAGE


def test_every_flag_has_a_config_key(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("command = bowl\n# comment\nrmax = 1.5  # trailing\nh = 0.01\n")
    out = tmp_path / "o"
    assert run("bowl", "--config", cfg, "--out", out) == EXIT_OK
    assert "rmax = 1.5" in (out / "config.txt").read_text()


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("TRANSLATOR_LAB_OUT", str(tmp_path))
    assert run("bowl", "--rmax", 1, "--h", 0.01, "--out", "rel") == EXIT_OK
    assert (tmp_path / "rel" / "bowl.csv").exists()


def test_bowl_step_too_large(tmp_path):
    assert run("bowl", "--rmax", 50, "--h", 0.5, "--out", tmp_path / "b") == EXIT_USAGE


def test_catenoid_neck(tmp_path):
    out = tmp_path / "cat"
    assert run("catenoid", "--lambda", 1, "--smax", 5, "--h", 1e-3, "--out", out) == EXIT_OK
    lines = (out / "profile.csv").read_text().splitlines()
    rows = [l.split(",") for l in lines[1:]]
    neck = [r for r in rows if float(r[0]) == 0.0]
    assert len(neck) == 1 and float(neck[0][1]) == 1.0


def test_sweep_is_monotone_and_deterministic(tmp_path, capsys):
    argv = ["sweep", "--b", PI4, "--Ls", "2,4,8", "--dx", 0.25, "--ny", 9]
    assert run(*argv, "--out", tmp_path / "s1") == EXIT_OK
    assert "increments" in capsys.readouterr().out
    assert run(*argv, "--out", tmp_path / "s2") == EXIT_OK
    a = (tmp_path / "s1" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "s2" / "sweep.csv").read_bytes()
    rows = [l.split(",") for l in a.decode().splitlines()]
    assert rows[0] == ["L", "center_height", "cauchy_gap", "measured_tilt", "lambda_est"]
    centers = [float(r[1]) for r in rows[1:]]
    assert centers == sorted(centers) and len(set(centers)) == 3
    for name in ("center_heights.svg", "midline_x.svg", "midline_y.svg"):
        assert (tmp_path / "s1" / name).exists()


def test_deltawing(tmp_path):
    out = tmp_path / "w"
    assert run("deltawing", "--b", 3.14159, "--Ls", "2,4,8", "--dx", 0.25, "--ny", 17,
               "--window", "1,2.9", "--out", out) == EXIT_OK
    text = (out / "deltawing.txt").read_text()
    assert "cauchy_gap = " in text and "tilt_target = 1.73" in text
    assert (out / "limit_field.txt").exists()
    assert run("deltawing", "--b", 1.0, "--Ls", "2,4,8", "--out", tmp_path / "w2") == EXIT_USAGE


def test_morserado_commands(tmp_path, capsys):
    assert run("solve", "--shape", "annulus", "--a", 2, "--b", 2, "--A", 2.5, "--B", 2.5,
               "--nx", 41, "--ny", 41, "--out", tmp_path / "ann") == EXIT_OK
    field = tmp_path / "ann" / "field.txt"
    capsys.readouterr()
    code = run("morserado", "--field", field, "--foliation", "grimreaper", "--angle", 40,
               "--boundary", "2.5,2.5;2,2", "--euler-char", 0, "--out", tmp_path / "m1")
    assert code == EXIT_OK
    assert "rhs=8" in capsys.readouterr().out
    assert (tmp_path / "m1" / "overlay.svg").exists()
    assert run("morserado", "--catenoid-lambda", 1, "--angle", 0, "--out", tmp_path / "m2") == EXIT_OK
    assert "total,,,,2" in (tmp_path / "m2" / "report.csv").read_text()
    assert run("morserado", "--field", field, "--angle", 0, "--boundary", "2.5,2.5;2,2",
               "--euler-char", 0, "--out", tmp_path / "m3") == EXIT_USAGE


def test_leaf_coincidence_is_a_numerical_failure(tmp_path):
    import math

    from translator_lab import closed_forms as cf
    from translator_lab.geometry import HeightField, make_rectangle_domain, write_field

    d = make_rectangle_domain(2.0, 1.0, 33, 17)
    write_field(HeightField.from_function(d, lambda x, y: cf.evaluate(cf.ShiftedGrimReaper(1.0), x, y)),
                tmp_path / "f.txt")
    code = run("morserado", "--field", tmp_path / "f.txt", "--foliation", "grimreaper", "--out", tmp_path / "m")
    assert code == EXIT_NUMERIC and (tmp_path / "m" / "FAILED").exists()


def test_module_entry_point(tmp_path):
    env = dict(os.environ, TRANSLATOR_LAB_OUT=str(tmp_path))
    res = subprocess.run([sys.executable, "-m", "translator_lab", "bowl", "--rmax", "1", "--h", "0.05"],
                         capture_output=True, text=True, env=env, cwd=tmp_path)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "bowl_out" / "bowl.csv").exists()


@pytest.mark.slow
def test_verify_quick(tmp_path, capsys):
    code = run("verify", "--level", "quick", "--repeat", 2, "--out", tmp_path / "v")
    out = capsys.readouterr().out
    # the tilt criterion needs the desk-scale grid, so quick may report it failing
    assert "criterion 9" in out and code in (EXIT_OK, EXIT_NUMERIC)
    assert (tmp_path / "v" / "run1" / "acceptance.csv").exists()
