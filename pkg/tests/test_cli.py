"""Command line interface: parsing, config files, end-to-end subcommands."""

import numpy as np
import pytest

from wgcurl.cli import _load_config, _parse_levels, build_parser, main
from wgcurl.driver import parse_csv_table


def test_parse_levels():
    assert _parse_levels("1..4") == (1, 2, 3, 4)
    assert _parse_levels("2,4") == (2, 4)
    assert _parse_levels("3") == (3,)


def test_parser_requires_command(capsys):
    assert main([]) == 1


def test_unknown_flag(capsys):
    assert main(["study", "--frobnicate"]) == 1


def test_study_csv(capsys):
    assert main(["study", "--k", "2", "--mesh", "tet", "--levels", "1",
                 "--format", "csv"]) == 0
    rows = parse_csv_table(capsys.readouterr().out)
    assert rows[0]["level"] == 1
    assert rows[0]["l2_error"] > 0.0


def test_solve_subcommand(capsys):
    assert main(["solve", "--level", "1", "--k", "2", "--mesh", "hex"]) == 0
    out = capsys.readouterr().out
    assert "l2_error=" in out and "aux_norm_1=" in out


def test_config_file_overrides(tmp_path, capsys):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("k = 2\nmesh = tet   # family\nlevels = 1\nformat = csv\n")
    assert main(["study", "--k", "3", "--mesh", "hex", "--config",
                 str(cfg)]) == 0
    rows = parse_csv_table(capsys.readouterr().out)
    # tet level 1 with k=2 has 384 free DOFs; the flags said hex/k=3
    assert rows[0]["ndof"] == 384


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["study", "--config", str(cfg)]) == 1


def test_config_rejects_bad_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("just words\n")
    with pytest.raises(ValueError):
        _load_config(str(cfg))


def test_dof_guard_exit_code():
    assert main(["study", "--k", "4", "--levels", "9"]) == 1


def test_verify_subcommand(capsys):
    assert main(["verify", "--k", "2"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
