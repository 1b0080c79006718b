import pytest

from euler_llog import cli


def _write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return p


ES_CFG = "method = ES\ngrid.n = 32\nT = 0.1\nsnapshot_dt = 0.05\nserfati = off\n"


def test_missing_file(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "nope.cfg")]) == 2
    assert "file not found" in capsys.readouterr().err


def test_vb_without_eps(tmp_path, capsys):
    p = _write(tmp_path, "method = VB\n")
    assert cli.main(["run", str(p)]) == 2
    assert "eps" in capsys.readouterr().err


def test_unknown_keys(tmp_path, capsys):
    p = _write(tmp_path, ES_CFG + "colour = red\n")
    assert cli.main(["run", str(p), "--flavour", "x"]) == 2
    err = capsys.readouterr().err
    assert "colour" in err and "flavour" in err


def test_dangling_override(tmp_path, capsys):
    p = _write(tmp_path, ES_CFG)
    assert cli.main(["run", str(p), "--T"]) == 2


def test_report_on_empty_dir(tmp_path, capsys):
    assert cli.main(["report", str(tmp_path)]) == 3
    assert "report.csv" in capsys.readouterr().err


def test_run_es_and_report(tmp_path, capsys):
    out = tmp_path / "es"
    p = _write(tmp_path, ES_CFG + f"out_dir = {out}\n")
    assert cli.main(["run", str(p)]) == 0
    text = capsys.readouterr().out
    assert "# effective configuration" in text and "method = ES" in text
    assert cli.main(["report", str(out)]) == 0
    summary = capsys.readouterr().out
    assert "energy drift" in summary and "(PASS < 1e-06)" in summary


def test_override_echo_and_vb_summary(tmp_path, capsys):
    out = tmp_path / "vb"
    p = _write(tmp_path, "method = VB\neps = 0.1\nh_mode = manual\nh = 0.05\nT = 0.02\n"
                         f"snapshot_dt = 0.01\ngrid.n = 32\nserfati = off\nout_dir = {out}\n")
    assert cli.main(["run", str(p), "--eps", "0.05"]) == 0
    text = capsys.readouterr().out
    assert "eps = 0.05" in text
    assert "circulation sum" in text


def test_verify_membership(tmp_path, capsys):
    out = tmp_path / "m"
    p = _write(tmp_path, f"method = ES\npreset = loglog_pair\npreset.beta = 1.5\nout_dir = {out}\n")
    assert cli.main(["-q", "verify-membership", str(p)]) == 0
    assert "verdict OUT" in capsys.readouterr().out
    assert (out / "membership.csv").is_file()


def test_sweep_level_count(tmp_path, capsys):
    p = _write(tmp_path, ES_CFG + f"out_dir = {tmp_path / 's'}\n")
    assert cli.main(["sweep", str(p), "--levels", "0.1,0.05"]) == 2
    assert cli.main(["sweep", str(p), "--levels", "a,b,c"]) == 2


def test_help_lists_keys(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    assert "snapshot_dt" in capsys.readouterr().out
