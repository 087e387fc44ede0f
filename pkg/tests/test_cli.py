import shutil
from importlib import resources
from pathlib import Path

import pytest

from metldpc.cli import main
from metldpc.ensemble import load_ensemble, validate

DATA = resources.files("metldpc").joinpath("data")


def data_path(kind: str, name: str) -> str:
    return str(DATA.joinpath(kind, name))


def test_validate_ok(capsys):
    assert main(["validate", data_path("ensembles", "rate_half_bec_dd.ens")]) == 0
    out = capsys.readouterr().out
    assert "all constraints satisfied" in out


def test_validate_detects_violation(tmp_path, capsys):
    text = Path(data_path("ensembles", "rate_half_bec_dd.ens")).read_text()
    corrupted = text.replace("L=0.526258", "L=0.6")
    bad = tmp_path / "bad.ens"
    bad.write_text(corrupted)
    assert main(["validate", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "transmitted-sum" in out or "socket-count" in out


def test_validate_missing_file():
    assert main(["validate", "/nonexistent/file.ens"]) == 2


def test_validate_parse_error(tmp_path):
    bad = tmp_path / "bad.ens"
    bad.write_text("not an ensemble\n")
    assert main(["validate", str(bad)]) == 2


def test_threshold_reports_gap(capsys, tmp_path):
    trace = tmp_path / "probes.csv"
    rc = main([
        "threshold", data_path("ensembles", "rate_half_reference.ens"),
        "--channel", "bec", "--trace", str(trace),
    ])
    assert rc == 0
    out = capsys.readouterr().out
    values = dict(
        line.split(": ") for line in out.strip().splitlines() if ": " in line
    )
    assert abs(float(values["threshold"]) - 0.463135) <= 5e-4
    assert float(values["shannon_limit"]) == 0.5
    assert abs(float(values["gap"]) - 0.036865) <= 5e-4
    assert trace.read_text().startswith("probe_param,decodable,iterations")


def test_threshold_rejects_degenerate_rate(tmp_path):
    bad = tmp_path / "r1.ens"
    bad.write_text(
        "met-ensemble v1\nedge_types 1\nrate 1.0\nvar b=channel d=2 L=1.0\n"
    )
    assert main(["threshold", str(bad), "--channel", "bec"]) == 2


def test_design_checks_reproduces_published_rows(tmp_path, capsys):
    out_file = tmp_path / "designed.ens"
    rc = main([
        "design-checks", data_path("ensembles", "rate_half_bec_dd.ens"),
        "--groups", "residual:1,2 chain:3,4@4",
        "-o", str(out_file),
    ])
    assert rc == 0
    designed = load_ensemble(out_file)
    reference = load_ensemble(data_path("ensembles", "rate_half_bec_dd.ens"))
    got = {c.d: c.coeff for c in designed.chk_classes}
    for chk in reference.chk_classes:
        assert got[chk.d] == pytest.approx(chk.coeff, abs=1e-4)
    assert validate(designed, 1e-9).ok


def test_design_checks_regular_single_group(tmp_path, capsys):
    src = tmp_path / "reg.ens"
    src.write_text("met-ensemble v1\nedge_types 1\nrate 0.5\nvar b=channel d=3 L=1.0\n")
    rc = main(["design-checks", str(src)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "chk d=6 R=0.5" in out


def test_design_checks_infeasible_is_domain_error(tmp_path, capsys):
    # the chain group would need more checks than the rate allows
    src = tmp_path / "thin.ens"
    src.write_text("met-ensemble v1\nedge_types 2\nrate 0.5\nvar b=channel d=0,1 L=1.0\n")
    assert main(["design-checks", str(src), "--groups", "residual:1 chain:2@2"]) == 1


def test_optimize_requires_seed(tmp_path):
    rc = main([
        "optimize", "--mode", "dd",
        "--template", data_path("templates", "rate_half_dd.tmpl"),
        "--rate", "0.5", "-o", str(tmp_path / "out.ens"),
    ])
    assert rc == 2


def test_optimize_dd_deterministic(tmp_path):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text("np=8\nmax_generations=3\nbisect_tol=1e-4\n")
    args = [
        "optimize", "--mode", "dd",
        "--template", data_path("templates", "rate_half_dd.tmpl"),
        "--rate", "0.5", "--channel", "bec", "--seed", "7",
        "--config", str(cfg),
    ]
    out1, trace1 = tmp_path / "a.ens", tmp_path / "a.csv"
    out2, trace2 = tmp_path / "b.ens", tmp_path / "b.csv"
    assert main(args + ["-o", str(out1), "--trace", str(trace1)]) == 0
    assert main(args + ["-o", str(out2), "--trace", str(trace2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert trace1.read_bytes() == trace2.read_bytes()
    ens = load_ensemble(out1)
    assert validate(ens, 1e-6).ok


def test_optimize_joint_toy(tmp_path):
    cfg = tmp_path / "toy.cfg"
    cfg.write_text(
        "np=8\ninner_np=8\ninner_max_generations=4\npop=4\n"
        "outer_max_generations=6\nouter_stall=3\nbisect_tol=1e-4\npolish_np=0\n"
    )
    out = tmp_path / "toy.ens"
    rc = main([
        "optimize", "--mode", "joint",
        "--template", data_path("templates", "toy_joint.tmpl"),
        "--rate", "0.5", "--seed", "3", "--config", str(cfg),
        "-o", str(out), "--trace", str(tmp_path / "toy.csv"),
    ])
    assert rc == 0
    ens = load_ensemble(out)
    assert validate(ens, 1e-6).ok
    assert (tmp_path / "toy.csv").read_text().startswith("generation,best_threshold,best_gene")


def test_scan_small_grid(tmp_path):
    shutil.copy(data_path("templates", "rate_half_dd.tmpl"), tmp_path / "t.tmpl")
    spec = tmp_path / "s.scan"
    spec.write_text(
        "met-scan v1\nmode coefficients\ntemplate t.tmpl\nrate 0.5\nchannel bec\n"
        "axis slot=1 start=0.5 step=0.02 count=2\n"
        "axis slot=2 start=0.1 step=0.02 count=2\n"
        "fix slot=4 value=0.27\n"
    )
    out = tmp_path / "grid.csv"
    assert main(["scan", str(spec), "-o", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "axis1,axis2,threshold"
    assert len(lines) == 5


def test_scan_missing_spec():
    assert main(["scan", "/nonexistent.scan"]) == 2


def test_reproduce_table3_bec(capsys):
    rc = main(["reproduce", "--table", "3", "--channels", "bec"])
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "all benchmark checks passed" in out


@pytest.mark.parametrize("table", ["1", "2", "3"])
def test_reproduce_full_tables(table, capsys):
    rc = main(["reproduce", "--table", table])
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "all benchmark checks passed" in out
    assert "MISS" not in out


def test_reproduce_unknown_table():
    assert main(["reproduce", "--table", "9"]) == 2


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "metldpc" in capsys.readouterr().out
