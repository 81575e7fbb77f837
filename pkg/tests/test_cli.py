import json
import textwrap
from pathlib import Path

import numpy as np
import pytest

from magspec import cli
from magspec.config import ConfigError, parse_config
from magspec.tables import ConvergenceTable, fmt

BASE = """\
domain: {L1: 1.0, L2: 1.0, N1: 33, N2: 33, w: 0.1}
operator1:
  A: {kind: swirl, center: [0.0, 0.0], radius: 0.3, amplitude: 0.3}
  V: {kind: bump, center: [0.0, 0.0], radius: 0.3, amplitude: 2.0}
operator2: zero
frame:
  xi: [[2.0, 1.0]]
  taus: [4, 8, 16]
solver: {K: 20}
"""


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def test_parse_base():
    cfg = parse_config(BASE, "run.yaml")
    assert cfg.domain.N1 == 33 and cfg.taus == [4.0, 8.0, 16.0] and cfg.K == 20
    assert cfg.tolerances["eig_rel"] == 0.02
    assert cfg.lattice_half == 8


@pytest.mark.parametrize("edit,line,msg", [
    (("taus: [4, 8, 16]", "taus: [4, 8, 64]"), 8, "tau_max"),
    (("taus: [4, 8, 16]", "taus: [8, 4, 16]"), 8, "increasing"),
    (("taus: [4, 8, 16]", "taus: [2, 8, 16]"), 8, "exceed"),
    (("xi: [[2.0, 1.0]]", "xi: [[0, 0]]"), 7, "xi = 0"),
    (("solver: {K: 20}", "solver: {K: 5000}"), 9, "interior"),
    (("kind: swirl", "kind: vortex"), 3, "unknown vector preset"),
    (("radius: 0.3, amplitude: 0.3", "radius: 0.45, amplitude: 0.3"), 3, "collar"),
    (("N1: 33", "N1: 5"), 1, "coarse"),
    (("operator2: zero", "operator2: {gauge_of: 1}"), 5, "gauge.p"),
    (("solver: {K: 20}", "solver: {K: 20}\ntolerances: {eig_rell: 0.1}"), 10, "unknown tolerance"),
    (("solver: {K: 20}", "solver: {K: 20}\nplots: true"), 10, "unknown block"),
])
def test_config_errors_reference_lines(edit, line, msg):
    text = BASE.replace(*edit)
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "run.yaml")
    assert exc.value.line == line
    assert msg in str(exc.value)
    assert str(exc.value).startswith(f"run.yaml:{line}: ")


def test_yaml_syntax_error_has_line():
    with pytest.raises(ConfigError) as exc:
        parse_config(BASE + "frame: [unclosed\n", "x.yaml")
    assert exc.value.line is not None


def test_spectral_route_needs_K():
    text = BASE.replace("solver: {K: 20}", "").replace("taus: [4, 8, 16]",
                                                       "taus: [4, 8, 16]\n  route: both")
    with pytest.raises(ConfigError, match="solver.K"):
        parse_config(text)


def test_invalid_config_exits_2_before_any_solve(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise AssertionError("solver started")
    monkeypatch.setattr(cli, "assemble", boom)
    monkeypatch.setattr(cli, "eigensolve", boom)
    path = write(tmp_path, BASE.replace("taus: [4, 8, 16]", "taus: [4, 8, 99]"))
    assert cli.main(["limit-magnetic", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert f"{path}:8:" in capsys.readouterr().err


def test_eigs_zero_preset(tmp_path):
    path = write(tmp_path, """\
        domain: {L1: 1.0, L2: 1.0, N1: 65, N2: 65, w: 0.1}
        operator1: zero
        solver: {K: 10}
        """)
    out = tmp_path / "o"
    assert cli.main(["eigs", "--config", path, "--out", str(out)]) == 0
    lines = (out / "eigenvalues.csv").read_text().splitlines()
    assert lines[0] == "k,lambda,residual" and len(lines) == 11
    lam1 = float(lines[1].split(",")[1])
    assert abs(lam1 - 2 * np.pi**2) < 0.02 * 2 * np.pi**2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["checks"]["hermiticity_error"] == 0.0


def test_compute_error_names_stage(tmp_path, capsys):
    path = write(tmp_path, BASE)
    out = tmp_path / "o"
    assert cli.main(["limit-electric", "--config", path, "--out", str(out)]) == 1
    assert "stage 'limit-electric'" in capsys.readouterr().err
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failed_stage"] == "limit-electric" and summary["passed"] is False


def test_limit_electric_decreasing(tmp_path):
    # at tau * h = 0.5 discretization error dominates, so stay below the cap
    text = BASE.replace("  A: {kind: swirl, center: [0.0, 0.0], radius: 0.3, amplitude: 0.3}\n", "")
    path = write(tmp_path, text.replace("N1: 33, N2: 33", "N1: 129, N2: 129"))
    out = tmp_path / "o"
    cli.main(["limit-electric", "--config", path, "--out", str(out)])
    t = ConvergenceTable.from_csv(out / "limit_electric_xi0_direct.csv")
    assert t.strictly_decreasing()


def test_lemma_suite(tmp_path):
    path = write(tmp_path, BASE)
    out = tmp_path / "o"
    assert cli.main(["lemma-suite", "--config", path, "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())["checks"]
    assert s["u_norm_decreasing"] and s["z_mu_decreasing"] and s["gradient_bounded"]
    assert s["mu_star"] < 0


def _table(n):
    t = ConvergenceTable(meta={"xi": [1.0, 2.0]})
    for k in range(n):
        t.add(8.0 * 2**k, complex(1 + 0.1 / (k + 1), np.pi / (k + 3)), complex(1.0, 0.3))
    return t


def test_plotdata_files_and_manifest(tmp_path):
    files = cli.emit_plotdata(_table(3), tmp_path, "demo")
    assert (tmp_path / files[0]).read_text().count("\n") == 3
    man = json.loads((tmp_path / "demo_manifest.json").read_text())
    assert man["curves"][0]["x"] == "tau" and man["curves"][0]["y"] == "abs_error"


def test_plotdata_refuses_empty(tmp_path):
    with pytest.raises(ValueError):
        cli.emit_plotdata(ConvergenceTable(), tmp_path, "none")


def test_plotdata_round_trip(tmp_path):
    t = _table(4)
    files = cli.emit_plotdata(t, tmp_path, "rt")
    x, y = cli.read_plotdata(tmp_path / files[0])
    assert np.max(np.abs(x - np.array(t.parameter))) <= 1e-15 * np.max(x)
    assert np.max(np.abs(y - t.abs_error)) <= 1e-15


def test_table_csv_round_trip(tmp_path):
    t = _table(3)
    t.to_csv(tmp_path / "t.csv")
    u = ConvergenceTable.from_csv(tmp_path / "t.csv")
    assert u.parameter == t.parameter and u.measured == t.measured and u.target == t.target


def test_fmt_shortest_round_trip():
    for v in (0.1, 1 / 3, 2.0**-40, 123456789.123):
        assert float(fmt(v)) == v and fmt(v) == repr(v)
    assert fmt(np.nan) == "nan" and fmt(3) == "3"


def test_threads_must_be_positive(tmp_path):
    path = write(tmp_path, BASE)
    assert cli.main(["eigs", "--config", path, "--out", str(tmp_path), "--threads", "0"]) == 2


CONFIGS = sorted((Path(__file__).parents[1] / "configs").glob("*.yaml"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    cfg = parse_config(path.read_text(), str(path))
    assert cfg.domain.N1 >= 65
