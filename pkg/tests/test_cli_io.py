import json
import math

import numpy as np
import pytest

from serrin import cli
from serrin.errors import DomainError, FormatError
from serrin.persist import dumps, fmt_float, read_payload, validate, write_csv
from serrin.verify import curvature_stats


@pytest.fixture(scope="module")
def ring_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("ring")
    rc = cli.main(["ring", "--n", "3", "--tau", "0.5", "--auto-mid", "--out", str(out)])
    return rc, out, out / "ring_n3_tau0.5.json"


@pytest.fixture(scope="module")
def band_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("band")
    rc = cli.main(["band", "--tau", "0.5", "--out", str(out)])
    return rc, out, out / "band_tau0.5.json"


def test_ring_command_passes(ring_run, capsys):
    rc, out, path = ring_run
    assert rc == 0
    data = read_payload(path)
    md = data["metadata"]
    assert md["n"] == 3 and md["dihedral_order"] == 6
    assert md["window"][0] < md["s"] < md["window"][1]
    assert md["unit_circle_residual"] < 1e-9
    assert data["verify"]["passed"]
    assert data["mkdv"]["genus"] == 1
    assert (out / "ring_n3_tau0.5.svg").read_text().startswith("<?xml")


def test_verify_fresh_output(ring_run):
    assert cli.main(["verify", str(ring_run[2])]) == 0


def test_verify_perturbed_v_fails(ring_run, tmp_path):
    data = json.loads(ring_run[2].read_text())
    data["arrays"]["v"][100][200] += 1e-3
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(data))
    assert cli.main(["verify", str(p)]) == 1


def test_verify_truncated_and_foreign_files(ring_run, tmp_path):
    text = ring_run[2].read_text()
    p = tmp_path / "cut.json"
    p.write_text(text[: len(text) // 2])
    assert cli.main(["verify", str(p)]) == 2
    q = tmp_path / "other.json"
    q.write_text(json.dumps({"format": "something/1"}))
    assert cli.main(["verify", str(q)]) == 2
    assert cli.main(["verify", str(tmp_path / "missing.json")]) == 2


def test_verify_report_written(ring_run, tmp_path):
    rep = tmp_path / "rep.json"
    assert cli.main(["verify", str(ring_run[2]), "--out", str(rep)]) == 0
    assert json.loads(rep.read_text())["passed"] is True


def test_verify_explicit_tolerance_overrides_stored(ring_run):
    assert cli.main(["verify", str(ring_run[2]), "--tol", "pde=1e-12"]) == 1


def test_coarse_grid_fails_verification_honestly(tmp_path):
    rc = cli.main(["ring", "--n", "3", "--tau", "0.5", "--grid", "81x161", "--format", "json", "--out", str(tmp_path)])
    assert rc == 1


def test_ring_csv_header_has_units(ring_run):
    head = (ring_run[1] / "ring_n3_tau0.5_boundary.csv").read_text().splitlines()[0]
    assert head == "curve [name],index [1],x1 [length],x2 [length]"


def test_outputs_are_byte_identical(tmp_path):
    args = ["ring", "--n", "3", "--tau", "0.5", "--s", "-3.0", "--grid", "41x81"]
    cli.main(args + ["--out", str(tmp_path / "a")])
    cli.main(args + ["--out", str(tmp_path / "b")])
    for name in ("ring_n3_tau0.5_s-3.json", "ring_n3_tau0.5_s-3_boundary.csv", "ring_n3_tau0.5_s-3.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_stored_round_trip_has_no_drift(ring_run):
    data = read_payload(ring_run[2])
    v = np.asarray(data["arrays"]["v"])
    # 17 significant digits rebuild the same doubles
    assert json.loads(dumps({"v": v}))["v"] == v.tolist()


def test_s_outside_window_refused(tmp_path, capsys):
    rc = cli.main(["ring", "--n", "3", "--tau", "0.5", "--s", "-0.5", "--out", str(tmp_path)])
    assert rc == 2
    assert "embedded window" in capsys.readouterr().err
    # allowed but not embedded: the simplicity check fails
    assert cli.main(["ring", "--n", "3", "--tau", "0.5", "--s", "-0.5", "--allow-immersed", "--grid", "41x81",
                     "--format", "json", "--out", str(tmp_path)]) == 1
    md = read_payload(tmp_path / "ring_n3_tau0.5_s-0.5.json")
    assert md["verify"]["embedded"] is False


def test_input_errors_exit_2(tmp_path):
    assert cli.main(["ring", "--n", "3", "--tau", "0.5", "--grid", "20x20", "--out", str(tmp_path)]) == 2
    assert cli.main(["ring", "--tau", "0.5", "--out", str(tmp_path)]) == 2
    assert cli.main(["ring", "--n", "3", "--tau", "0.5", "--tol", "pde=-1", "--out", str(tmp_path)]) == 2
    assert cli.main(["ring", "--n", "3", "--tau", "0.5", "--format", "pdf", "--out", str(tmp_path)]) == 2
    assert cli.main(["sweep", "--n", "3", "--tau-grid", "0.5,1.5", "--out", str(tmp_path)]) == 2


def test_band_command(band_run):
    rc, out, path = band_run
    assert rc == 0
    md = read_payload(path)["metadata"]
    assert md["critical_points"] == [2, 2]
    assert md["wronskian_residual"] < 1e-9 and md["L_residual"] < 1e-9
    assert cli.main(["verify", str(path)]) == 0


def test_flat_band_command(tmp_path):
    assert cli.main(["band", "--tau", "1", "--grid", "65x129", "--out", str(tmp_path)]) == 0
    md = read_payload(tmp_path / "band_tau1.json")["metadata"]
    assert md["x_star"] == pytest.approx(1.1996786402, abs=1e-9)


def test_rescaled_small_band_figure(tmp_path):
    rc = cli.main(["band", "--tau", "0.01", "--rescaled", "--format", "svg", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "band_tau0.01_rescaled.svg").exists()


def test_plot_redraws_stored_file(band_run, tmp_path):
    assert cli.main(["plot", str(band_run[2]), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "band_tau0.5.svg").read_text()
    assert "<svg" in text
    cli.main(["plot", str(band_run[2]), "--out", str(tmp_path / "again")])
    assert (tmp_path / "again" / "band_tau0.5.svg").read_text() == text


def test_sweep_table(tmp_path):
    rc = cli.main(["sweep", "--n", "3", "--tau-grid", "0.3,0.5,0.7", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "sweep_n3.csv").read_text().splitlines()
    assert lines[0].split(",") == cli.SWEEP_HEADER
    rows = [r.split(",") for r in lines[1:]]
    assert len(rows) == 3 and all(r[-1] == "ok" for r in rows)
    h0 = [float(r[4]) for r in rows]
    h1 = [float(r[5]) for r in rows]
    assert all(a < b < 0 for a, b in zip(h0, h1))


def test_sweep_marks_sign_change_of_psi2():
    # for n = 3, psi2 = a(s) - a(s*) at the window midpoint changes sign between tau = 0.5 and 0.7
    rows = cli.sweep_rows(3, [0.3, 0.5, 0.7, 0.9])
    assert [r[14] for r in rows] == [0, 0, 1, 0]
    assert [r[13] for r in rows] == [0, 0, 0, 0]
    assert rows[1][12] < 0 < rows[2][12]


def test_sweep_failed_row_is_marked(monkeypatch):
    from serrin import moduli
    from serrin.errors import SolverError

    real = moduli.moduli_point

    def flaky(n, tau, with_bounds=False):
        if tau == 0.5:
            raise SolverError("injected")
        return real(n, tau, with_bounds)

    monkeypatch.setattr(moduli, "moduli_point", flaky)
    rows = cli.sweep_rows(3, [0.4, 0.5, 0.6])
    assert [r[-1] for r in rows] == ["ok", "error: SolverError", "ok"]
    assert math.isnan(rows[1][1])


def test_tolerance_layering(tmp_path, monkeypatch):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"tol": {"pde": 1e-3, "harmonic": 1e-3, "dirichlet": 1e-3}, "n": 4, "grid": "65x129"}))
    args = cli.make_parser().parse_args(["ring", "--tau", "0.5", "--config", str(conf), "--tol", "pde=1e-4"])
    env = {"SERRIN_TOL_HARMONIC": "2e-4"}
    cfg = cli.build_config(args, env)
    assert cfg.tolerances["pde"] == 1e-4
    assert cfg.tolerances["harmonic"] == 2e-4
    assert cfg.tolerances["dirichlet"] == 1e-3
    assert cfg.params["n"] == 4 and cfg.grid == (65, 129)


def test_config_from_environment(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"tau": 0.25}))
    args = cli.make_parser().parse_args(["band"])
    assert cli.build_config(args, {"SERRIN_CONFIG": str(conf)}).params["tau"] == 0.25


def test_small_tau_band_default_grid():
    args = cli.make_parser().parse_args(["band", "--tau", "0.01"])
    assert cli.build_config(args, {}).grid == (401, 1601)


def test_bad_config_file(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text("[1, 2")
    with pytest.raises(FormatError):
        cli.load_config(conf)


def test_run_config_validation():
    with pytest.raises(DomainError):
        cli.RunConfig("ring", grid=(10, 10))
    with pytest.raises(DomainError):
        cli.RunConfig("ring", tolerances={"pde": 0.0})
    with pytest.raises(DomainError):
        cli.RunConfig("draw")


def test_tau_grid_parsing():
    assert cli.parse_tau_grid("0.1,0.2") == [0.1, 0.2]
    assert cli.parse_tau_grid("0.1:0.3:3") == pytest.approx([0.1, 0.2, 0.3])
    with pytest.raises(DomainError):
        cli.parse_grid("201-401")


def test_float_formatting():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert fmt_float(math.inf) == "null"
    assert dumps({"b": [1.0, 2], "a": 1j}) == '{\n "a": [0, 1],\n "b": [1, 2]\n}\n'


def test_csv_non_finite_and_locale_free(tmp_path):
    p = write_csv(tmp_path / "t.csv", ["a [1]", "b [1]"], [(1.5, math.inf), (math.nan, "x")])
    assert p.read_text() == "a [1],b [1]\n1.5,inf\nnan,x\n"


def test_validate_rejects_bad_payloads():
    good = {"format": "serrin-band/1", "metadata": {}, "tolerances": {},
            "arrays": {k: [[0.0] * 5] * 5 for k in ("re_g", "im_g", "v", "omega")} | {"x": [0.0] * 5, "y": [0.0] * 5}}
    validate(good)
    bad = json.loads(json.dumps(good))
    bad["arrays"]["v"][2][2] = None
    with pytest.raises(FormatError):
        validate(bad)
    bad = json.loads(json.dumps(good))
    bad["arrays"]["v"] = [[0.0] * 4] * 5
    with pytest.raises(FormatError):
        validate(bad)
    with pytest.raises(FormatError):
        validate([])


def test_near_radial_ring_curvature_converges():
    from serrin.ring_domain import ring_domain

    sd = []
    for tau in (0.999, 0.9999):
        fld, _ = ring_domain(2, tau, s=-1.0, nx=41, ny=81)
        sd.append(curvature_stats(fld.dev.curve(fld.s))["stdev"])
    # deviation from a round circle is linear in 1 - tau
    assert sd[0] / sd[1] == pytest.approx(10.0, rel=0.05)
    assert sd[1] < 1e-4


def test_ring_near_radial_command(tmp_path):
    assert cli.main(["ring", "--n", "2", "--tau", "0.999", "--grid", "65x129", "--format", "json",
                     "--out", str(tmp_path)]) == 0
    md = read_payload(tmp_path / "ring_n2_tau0.999.json")["metadata"]
    assert md["window"][1] > -0.02
