import csv
import json
import math
import subprocess
import sys

import gmpy2
import pytest

from lorenz_forge import io
from lorenz_forge.cli import main
from lorenz_forge.dynamics import Budget
from lorenz_forge.errors import ConfigError
from lorenz_forge.henon3d import Henon3DParams, find_codim3_point
from lorenz_forge.hetero_model import Case, MuVector, build_model, config_to_dict, demo_config
from lorenz_forge.rescaling import from_henon, params_invert_corrected, residual_sup
from lorenz_forge.return_map import ReturnIndex
from lorenz_forge.scanner import DomainReport, HenonBox, index_ladder, map_domains


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# ----------------------------------------------------------------------------
# io


def test_fmt_is_lossless():
    for v in (0.1, 1 / 3, 2.0**-1074, 1e308, -0.0):
        assert float(io.fmt(v)) == v
    assert io.fmt(0.1) == "0.10000000000000001"


def test_dumps_round_trips_floats_and_mpfr():
    with gmpy2.context(precision=300):
        x = gmpy2.mpfr(1) / 7
    doc = {"a": [0.1, 1 / 3, -math.inf], "mu": MuVector(x, 0.5, 0.01)}
    back = json.loads(io.dumps(doc))
    assert back["a"] == [0.1, 1 / 3, -math.inf]
    assert io.mpfr_from_json(back["mu"]["mu1"]) == x
    assert io.mpfr_from_json(back["mu"]["mu1"]).precision == 300
    assert back["mu"]["mu2"] == 0.5


def test_domain_report_json():
    cfg = demo_config(Case.I)
    lad = index_ladder(build_model(cfg), 0.7, 5, min_rung=5)
    reps = map_domains(cfg, Case.I, lad, HenonBox((0.04, 0.06), (0.84, 0.86), (0.69, 0.71)), verify=False,
                       threads=1)
    doc = json.loads(io.dumps(io.document("DomainReports", reps)))
    assert doc["schema_version"] == io.OUTPUT_SCHEMA_VERSION
    (d,) = doc["data"]
    assert d["idx"] == [5, 11]
    assert d["residual"] == reps[0].residual
    assert io.mpfr_from_json(d["mu_corrected"]["mu1"]) == reps[0].mu_corrected.mu1
    assert d["confirmed"] is False and d["verification"] is None


def test_numerics_block():
    num = io.resolve_numerics({"verify_budget": {"n_iterates": 500}, "residual_grid": 5})
    assert num["verify_budget"]["n_iterates"] == 500
    assert num["verify_budget"]["n_transient"] == 2000
    assert num["residual_grid"] == 5 and num["invert_tol"] == 1e-10
    with pytest.raises(ConfigError):
        io.resolve_numerics({"tolerance": 1})
    with pytest.raises(ConfigError):
        io.resolve_numerics({"verify_budget": {"n_iterates": 0}})
    with pytest.raises(ConfigError):
        io.resolve_numerics({"residual_grid": 2})


def test_manifest_round_trip(tmp_path):
    m = io.RunManifest("henon codim3", {"x": 1.5})
    io.write_artifact(tmp_path / "out.json", "{}\n", m)
    back = io.RunManifest.load(tmp_path / "out.json.manifest.json")
    assert back.command == "henon codim3" and back.arguments == {"x": 1.5}
    assert back.outputs == {"out.json": io.sha256_file(tmp_path / "out.json")}
    assert set(back.versions) >= {"lorenz_forge", "numpy", "gmpy2", "python", "kernel_backend"}
    assert "finished_utc" in back.wall_clock
    with pytest.raises(ConfigError):
        io.RunManifest.from_dict({"kind": "Other"})


# ----------------------------------------------------------------------------
# henon commands


def test_henon_iterate_zeros(capsys):
    code, out, _ = run(capsys, "henon", "iterate", "--n", 10, "--m1", 0, "--m2", 0, "--b", 0,
                       "--x0", 0, "--y0", 0, "--z0", 0)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert len(rows) == 10
    assert all(float(r[k]) == 0.0 for r in rows for k in "xyz")


def test_henon_codim3(capsys):
    code, out, _ = run(capsys, "henon", "codim3")
    assert code == 0
    d = json.loads(out)["data"]
    p, fp = find_codim3_point()
    assert (d["M1"], d["B"], d["M2"]) == (p.m1, p.b, p.m2)
    assert d["B"] == 1.0 and d["M2"] == 1.0
    assert d["fixed_point"] == list(fp)
    assert d["residuals"]["multipliers"] <= 1e-10


def test_henon_fixed_points(capsys):
    code, out, _ = run(capsys, "henon", "fixed-points", "--m1", 0, "--m2", 0, "--b", 0)
    assert code == 0
    states = sorted(tuple(f["state"]) for f in json.loads(out)["data"]["fixed_points"])
    assert states == [(-1.0, -1.0, -1.0), (0.0, 0.0, 0.0)]


def test_henon_scan_csv_deterministic(tmp_path, capsys):
    argv = ["henon", "scan", "--axis1", "m1:0:0.1:2", "--axis2", "m2:0.8:0.9:2", "--fixed", "b=0.7",
            "--n-iterates", "20000"]
    code, out1, _ = run(capsys, *argv)
    assert code == 0
    rows = list(csv.DictReader(out1.splitlines()))
    assert len(rows) == 4
    assert tuple(rows[0]) == io.SCAN_COLUMNS
    code, out2, _ = run(capsys, "--threads", 2, *argv)
    assert out2 == out1


def test_henon_lyapunov_escape_is_numerical_failure(capsys):
    code, _, err = run(capsys, "henon", "lyapunov", "--m1", 5, "--m2", 0, "--b", 0.5, "--x0", 3)
    assert code == 3
    assert "escaped" in err


def test_invalid_flags_exit_2(capsys):
    assert run(capsys, "henon", "iterate", "--n", 3, "--m1", "nan", "--m2", 0, "--b", 0)[0] == 2
    assert run(capsys, "henon", "iterate", "--bogus")[0] == 2
    assert run(capsys, "henon", "scan", "--axis1", "m9:0:1:2", "--axis2", "m2:0:1:2")[0] == 2
    # axes must leave exactly one parameter to fix
    code, _, err = run(capsys, "henon", "scan", "--axis1", "m1:0:1:2", "--axis2", "m2:0:1:2")
    assert code == 2 and "no value for parameter b" in err


# ----------------------------------------------------------------------------
# model commands


@pytest.mark.parametrize("case", list(Case))
def test_model_check_demo(capsys, case):
    code, out, _ = run(capsys, "model", "check", "--demo", case.value)
    assert code == 0
    names = [line.split()[0] for line in out.splitlines()]
    assert names == ["A", "B", "C", "det", "D"]
    assert all(line.split()[1] == "ok" for line in out.splitlines())


def test_model_check_names_violated_condition(tmp_path, capsys):
    doc = config_to_dict(demo_config(Case.I))
    doc["saddle2"]["gamma"] = 4.0  # J2 = 0.8 < 1
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    code, out, err = run(capsys, "model", "check", "--config", path)
    assert code == 2
    assert "condition B violated" in err
    assert "B    FAILED" in out


def test_model_config_errors_exit_2(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text('{"schema_version": 1}')
    code, _, err = run(capsys, "model", "check", "--config", path)
    assert code == 2 and "saddle1" in err
    code, _, _ = run(capsys, "model", "check", "--config", tmp_path / "missing.json")
    assert code == 2


def test_model_classify_case(capsys):
    code, out, _ = run(capsys, "model", "classify-case", "--demo", "CaseII")
    assert code == 0 and out == "CaseII\n"


def test_model_return_map_chart_exit_exit_3(capsys):
    code, _, err = run(capsys, "model", "return-map", "--demo", "CaseI", "--i", 4, "--j", 8,
                       "--point", 0.3, -0.2, 0.4)
    assert code == 3
    assert "T01^i" in err


def test_model_return_map_product(capsys):
    code, out, _ = run(capsys, "model", "return-map", "--demo", "CaseI", "--i", 4, "--j", 8)
    assert code == 0
    m = build_model(demo_config(Case.I))
    want = m.t12.det * m.t21.det * 0.25**4 * 2.0**8
    assert json.loads(out)["data"]["jacobian_product"] == pytest.approx(want, rel=1e-14)


def test_model_rescale_residual_matches_library(capsys):
    hp = (0.05, 0.85, 0.7)
    code, out, _ = run(capsys, "model", "rescale-residual", "--demo", "CaseI", "--i", 8, "--j", 17,
                       "--target", *hp)
    assert code == 0
    cfg = demo_config(Case.I)
    idx = ReturnIndex(8, 17)
    _, rmap = params_invert_corrected(cfg, idx, from_henon(Case.I, Henon3DParams(*hp)))
    want = residual_sup(rmap.model, idx, rescaled=rmap)
    assert out.splitlines()[0] == f"residual_sup {io.fmt(want)}"


def test_model_rescale_residual_at_mu(capsys):
    cfg = demo_config(Case.I)
    target = from_henon(Case.I, Henon3DParams(0.05, 0.85, 0.7))
    mu, _ = params_invert_corrected(cfg, ReturnIndex(6, 13), target)
    # a double-rounded mu1 still gives a valid map; the CLI must equal the library at that mu
    mu = MuVector(float(mu.mu1), float(mu.mu2), mu.mu3)
    code, out, _ = run(capsys, "model", "rescale-residual", "--demo", "CaseI", "--i", 6, "--j", 13,
                       "--mu1", io.fmt(mu.mu1), "--mu2", io.fmt(mu.mu2), "--mu3", io.fmt(mu.mu3))
    assert code == 0
    want = residual_sup(build_model(cfg, mu), ReturnIndex(6, 13))
    assert out.splitlines()[0] == f"residual_sup {io.fmt(want)}"


def test_model_wrong_case_exit_2(capsys):
    code, _, err = run(capsys, "model", "return-map", "--demo", "CaseI", "--case", "CaseII", "--i", 4, "--j", 8)
    assert code == 2 and "CaseI" in err


def test_model_verify(tmp_path, capsys):
    out = tmp_path / "verify.json"
    code, _, _ = run(capsys, "model", "verify", "--demo", "CaseII", "--i", 8, "--j", 17,
                     "--target", -0.025, 0.75, 0.7, "--out", out)
    assert code == 0
    d = json.loads(out.read_text())["data"]
    assert d["report"]["tag"] == "PeriodicSink" and d["report"]["period"] == 1
    assert io.manifest_path(out).exists()


def test_model_domain_map_and_replay(tmp_path, capsys):
    out = tmp_path / "dom.json"
    code, _, _ = run(capsys, "--threads", 1, "model", "domain-map", "--demo", "CaseIII", "--m1", 0.04, 0.06,
                     "--m2", 0.84, 0.86, "--b", 0.69, 0.71, "--max-rung", 6, "--min-rung", 5, "--no-verify",
                     "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "DomainReports"
    assert [d["idx"] for d in doc["data"]["domains"]] == [[5, 13], [6, 15]]
    manifest = json.loads(io.manifest_path(out).read_text())
    assert manifest["config"] == config_to_dict(demo_config(Case.III))
    code, text, _ = run(capsys, "--threads", 2, "replay", io.manifest_path(out))
    assert code == 0 and "replay ok" in text


def test_replay_detects_mismatch(tmp_path, capsys):
    out = tmp_path / "orbit.csv"
    assert run(capsys, "henon", "iterate", "--n", 5, "--m1", 0.1, "--m2", 0.2, "--b", 0.3, "--out", out)[0] == 0
    mpath = io.manifest_path(out)
    doc = json.loads(mpath.read_text())
    doc["outputs"]["orbit.csv"] = "0" * 64
    mpath.write_text(json.dumps(doc))
    code, _, err = run(capsys, "replay", mpath)
    assert code == 3 and "mismatch" in err


def test_numerics_override_reaches_verification(tmp_path, capsys):
    doc = config_to_dict(demo_config(Case.I))
    doc["numerics"] = {"verify_budget": {"n_transient": 100, "n_iterates": 1000}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "v.json"
    code, _, _ = run(capsys, "model", "verify", "--config", path, "--i", 6, "--j", 13,
                     "--target", 0.05, 0.85, 0.7, "--out", out)
    assert code == 0
    spec = json.loads(out.read_text())["data"]["report"]["spectrum"]
    assert spec["iterates_used"] == 1000 and spec["transient_discarded"] == 100


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "lorenz_forge", "model", "classify-case", "--demo", "CaseIII"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout == "CaseIII\n"
