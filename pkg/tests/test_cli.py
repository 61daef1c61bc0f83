import json

import numpy as np
import pytest

from linflow.cli import MATRIX_HEADER, PAIR_HEADER, PARAM_HEADER, main, read_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_family(tmp_path, capsys):
    csv_path = tmp_path / "fam.csv"
    code, out, _ = run(capsys, "simulate", "--params", "1,1,0", "--t-end", "2", "--out", str(csv_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["termination"] == "blowup"
    assert summary["t_max_estimate"] == pytest.approx(1.0, abs=1e-4)
    lo, hi = summary["t_max_interval"]
    assert lo <= summary["t_max_estimate"] <= hi
    header, data = read_csv(csv_path)
    assert tuple(header) == PARAM_HEADER
    assert len(data) == summary["samples_written"]
    # lambda column against the closed form, away from the singularity
    t, lam = data[:, 0], data[:, 1]
    sel = t < 0.9
    assert np.allclose(lam[sel], 1 / (1 - t[sel]), rtol=1e-8)


def test_simulate_stationary(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--params", "1,0,1", "--out", str(tmp_path / "s.csv"))
    assert code == 0
    summary = json.loads(out)
    assert summary["termination"] == "horizon_reached"
    assert all(v is None or v <= 1e-10 for v in summary["invariant_drifts"].values())


def test_simulate_separatrix_reports_invariant(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--params", "1,1,1.5", "--t-end", "100", "--out", str(tmp_path / "b.csv"))
    assert code == 0
    drifts = json.loads(out)["invariant_drifts"]
    assert drifts["boundary_c"] <= 1e-8 and drifts["m0"] <= 1e-8


def test_simulate_matrix_writes_pair(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 3))
    m = a - np.trace(a) / 3 * np.eye(3)
    out_csv = tmp_path / "m.csv"
    entries = ",".join(repr(float(v)) for v in m.ravel())
    code, _, _ = run(capsys, "simulate", f"--matrix={entries}", "--t-end", "0.2", "--samples", "4", "--out", str(out_csv))
    assert code == 0
    header, mats = read_csv(out_csv)
    assert tuple(header) == MATRIX_HEADER
    pheader, pairs = read_csv(tmp_path / "m_pair.csv")
    assert tuple(pheader) == PAIR_HEADER
    assert np.array_equal(mats[:, 0], pairs[:, 0])
    # the printed pair recomposes to the printed matrix
    from linflow.matrix_core import StrainVorticityPair, recompose

    for row, prow in zip(mats, pairs):
        m_t = row[1:10].reshape(3, 3)
        back = recompose(StrainVorticityPair(prow[1:7], prow[7:10])).entries
        assert np.allclose(back, m_t, atol=1e-13 * (1 + np.abs(m_t).max()))
    assert mats[0, 1:10] == pytest.approx(m.ravel(), abs=1e-15)


def test_csv_round_trip_is_exact(tmp_path, capsys):
    out_csv = tmp_path / "p.csv"
    run(capsys, "simulate", "--params", "1,0.5,0.5", "--t-end", "1", "--out", str(out_csv))
    _, data = read_csv(out_csv)
    from linflow.cli import write_csv

    again = tmp_path / "q.csv"
    write_csv(again, PARAM_HEADER, data)
    assert again.read_bytes() == out_csv.read_bytes()


def test_deterministic_output(tmp_path, capsys):
    paths = []
    for name in ("a", "b"):
        csv_path, js = tmp_path / f"{name}.csv", tmp_path / f"{name}.json"
        run(capsys, "simulate", "--params", "1,0.5,0.5", "--t-end", "50", "--out", str(csv_path), "--summary", str(js))
        paths.append((csv_path, js))
    assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
    assert paths[0][1].read_bytes() == paths[1][1].read_bytes()


def test_underflow_exit_code(tmp_path, capsys):
    code, out, _ = run(
        capsys, "simulate", "--params", "1,1,0", "--t-end", "2", "--threshold", "1e300", "--out", str(tmp_path / "u.csv")
    )
    assert code == 3
    assert json.loads(out)["termination"] == "step_underflow"


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--params", "1,2"],
        ["simulate", "--params=-1,1,0"],
        ["simulate", "--params", "1,1,0", "--matrix", "diag(1,1,-2)"],
        ["simulate", "--matrix", "diag(1,1,1)"],
        ["simulate", "--params", "1,1,0", "--t-end", "-1"],
        ["classify", "--params", "a,b,c"],
        ["lagrangian", "--family", "1,-0.5"],
        ["lagrangian", "--family", "1,0.5", "--t-stop", "1.5"],
        ["sweep", "--n-r", "0"],
        ["validate", "--only", "11"],
    ],
)
def test_validation_exit_code(argv, tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("error:")


def test_io_exit_code(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--params", "1,0,1", "--t-end", "1", "--out", str(tmp_path / "no" / "x.csv"))
    assert code == 4
    code, _, _ = run(capsys, "simulate", "--config", str(tmp_path / "missing.cfg"))
    assert code == 4


def test_classify_examples(capsys):
    code, out, _ = run(capsys, "classify", "--params", "1,0.5,0.5")
    assert code == 0 and "case: case2" in out and "limits (r, k):" in out
    code, out, _ = run(capsys, "classify", "--params", "1,1,1.5")
    assert "case: case3_boundary" in out
    code, out, _ = run(capsys, "classify", "--matrix", "diag(2,-1,-1)")
    assert "case: outside_hypothesis" in out


def test_classify_verify_json(capsys):
    code, out, _ = run(capsys, "classify", "--params", "1,0.5,0.5", "--verify", "--json")
    assert code == 0
    rep = json.loads(out)
    assert rep["prediction"]["case"] == "case2"
    assert rep["verification"]["passed"]


def test_classify_pair_input(capsys):
    # strain diag(-1.5, 0.5, 1), vorticity (0, 2, 0): the r = 1/2, k = 1 family matrix
    code, out, _ = run(capsys, "classify", "--pair=-1.5,0.5,1,0,0,0,0,2,0", "--json")
    rep = json.loads(out)
    assert rep["prediction"]["case"] == "general_blowup"
    assert rep["prediction"]["refinement"]["case"] == "family_blowup"


def test_sweep_tags_and_order(tmp_path, capsys):
    out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
    code, _, _ = run(capsys, "sweep", "--out", str(out1))
    assert code == 0
    recs = json.loads(out1.read_text())
    assert len(recs) == 441
    assert [(r["i"], r["j"]) for r in recs] == [(i, j) for i in range(21) for j in range(21)]
    tags = {r["case"] for r in recs}
    assert {"case1", "case2", "case3_boundary", "case4", "case5", "case6"} <= tags
    run(capsys, "sweep", "--out", str(out2), "--jobs", "2")
    assert out1.read_bytes() == out2.read_bytes()


def test_sweep_single_point(tmp_path, capsys):
    out = tmp_path / "one.json"
    run(capsys, "sweep", "--r-range", "1,1", "--k-range", "0,0", "--n-r", "1", "--n-k", "1", "--out", str(out))
    (rec,) = json.loads(out.read_text())
    assert rec["case"] == "family_blowup"


def test_sweep_verify_small_grid(tmp_path, capsys):
    out = tmp_path / "v.json"
    code, stdout, _ = run(
        capsys, "sweep", "--r-range", "0.3,0.7", "--k-range", "0.1,0.4", "--n-r", "3", "--n-k", "3",
        "--verify", "--out", str(out), "--jobs", "2",
    )
    assert code == 0 and "verified 9/9" in stdout


def test_sweep_point_errors_are_records(tmp_path, capsys):
    out = tmp_path / "e.json"
    code, _, _ = run(capsys, "sweep", "--r-range=-2,-2", "--k-range", "0,0", "--n-r", "1", "--n-k", "1", "--verify", "--out", str(out))
    assert code == 0
    (rec,) = json.loads(out.read_text())
    assert "case" in rec


def test_lagrangian_circle_yz(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(capsys, "lagrangian", "--family", "1,0.5", "--scenario", "circle-yz", "--frames", "20", "--out", str(out))
    assert code == 0
    header, data = read_csv(out)
    assert header[-1] == "det_jacobian"
    assert np.all(np.abs(data[:, -1] - 1) <= 1e-9)
    assert len(np.unique(data[:, 0])) == 21


def test_lagrangian_particles(tmp_path, capsys):
    out = tmp_path / "p.csv"
    run(capsys, "lagrangian", "--family", "1,1", "--scenario", "particles", "--y0", "0,0,1", "--out", str(out))
    _, data = read_csv(out)
    t, z = data[:, 1], data[:, 5]
    assert np.allclose(z, 1 / (1 - t), rtol=1e-14)


def test_lagrangian_probe(tmp_path, capsys):
    out = tmp_path / "pp.csv"
    run(capsys, "lagrangian", "--family", "1,1", "--scenario", "pressure-probe", "--frames", "50", "--out", str(out))
    _, data = read_csv(out)
    assert np.all(np.diff(data[:, 2]) < 0)
    assert np.all(np.diff(data[:, 3]) > 0)


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# family run\nparams = 1,1,0\nt-end = 2\nreduced = yes\n")
    code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--t-end", "3", "--dump-config")
    assert code == 0
    lines = dict(line.split(" = ", 1) for line in out.splitlines())
    assert lines["params"] == "1,1,0"
    assert lines["t_end"] == "3.0"
    assert lines["reduced"] == "True"


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense = 1\n")
    code, _, err = run(capsys, "classify", "--config", str(cfg))
    assert code == 2 and "nonsense" in err


def test_dump_config_lists_defaults(capsys):
    code, out, _ = run(capsys, "sweep", "--dump-config")
    assert code == 0
    keys = [line.split(" = ")[0] for line in out.splitlines()]
    assert {"r_range", "k_range", "jobs", "tol", "rel_tol"} <= set(keys)


def test_env_tolerance_default(monkeypatch, capsys):
    monkeypatch.setenv("LINFLOW_DEFAULT_TOL", "1e-7")
    code, out, _ = run(capsys, "simulate", "--dump-config")
    assert "rel_tol = 1e-07" in out


def test_validate_subset(capsys):
    code, out, _ = run(capsys, "validate", "--only", "1,8")
    assert code == 0
    assert out.count("[PASS]") == 2
