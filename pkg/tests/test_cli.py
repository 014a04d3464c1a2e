import json
import math

import numpy as np
import pytest

from fracshape.cli import main
from fracshape.focore import ExplicitX, FactoredTf, Gain, ImplicitPower, IORational, PseudoPoly
from fracshape.loopshape import example_loops
from fracshape.compensate import implicit_terms


def write(path, obj):
    path.write_text(obj.to_json() if hasattr(obj, "to_json") else json.dumps(obj))
    return str(path)


def read_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_bode_gain_only(tmp_path):
    tf = write(tmp_path / "g.json", FactoredTf((Gain(1.0),)))
    out = tmp_path / "b.csv"
    assert main(["bode", tf, "--points", "10", "--out", str(out)]) == 0
    data = read_csv(out)
    assert data.shape == (10, 3)
    np.testing.assert_allclose(data[:, 1:], 0, atol=1e-12)
    assert out.read_text().splitlines()[0] == "omega,mag_db,phase_deg"


def test_bode_explicit_x_minimum(tmp_path):
    tf = write(tmp_path / "x.json", FactoredTf((ExplicitX(1.0, 0.5),)))
    out = tmp_path / "b.csv"
    assert main(["bode", tf, "--wmin", "1e-2", "--wmax", "1e2", "--points", "100", "--points-per-decade",
                 "--out", str(out)]) == 0
    data = read_csv(out)
    i = int(np.argmin(np.abs(np.log(data[:, 0] / 0.5))))
    assert data[i, 1] == pytest.approx(20 * math.log10(math.sin(math.pi / 4)), abs=1e-3)
    assert data[i, 1] == pytest.approx(-3.0103, abs=1e-3)


def test_bode_implicit_x_no_dip(tmp_path):
    _, xt = implicit_terms(1.0, 2)
    tf = write(tmp_path / "xt.json", xt)
    out = tmp_path / "b.csv"
    assert main(["bode", tf, "--wmin", "1e-2", "--wmax", "1e2", "--out", str(out)]) == 0
    assert np.all(np.diff(read_csv(out)[:, 1]) >= -1e-12)


def test_bode_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["bode", str(bad)]) == 2
    assert main(["bode", str(tmp_path / "missing.json")]) == 2
    pole = write(tmp_path / "p.json", FactoredTf((IORational((1.0,), (1.0, 0.0, 1.0)),)))
    assert main(["bode", pole, "--wmin", "0.1", "--wmax", "10", "--points", "3"]) == 3


def test_margins_l1(tmp_path, capsys):
    loop = example_loops()["C1"]
    path = tmp_path / "loop.json"
    path.write_text(json.dumps(loop.to_dict()))
    assert main(["margins", str(path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["gain_margin_db"] == pytest.approx(1.26, abs=0.05)
    assert set(rep) == {"omega_c", "phase_margin_deg", "omega_pi", "gain_margin_db", "flags"}


def test_stability_pseudo_polynomial(tmp_path, capsys):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"alpha": "1/2", "coeffs": [1, 1]}))
    assert main(["stability", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["stable"] is True


def test_stability_from_tf_denominator(tmp_path, capsys):
    tf = FactoredTf((ExplicitX(1.0, 0.5, -1),))      # 1/(1 - s^0.5): unstable
    assert main(["stability", write(tmp_path / "t.json", tf)]) == 0
    assert json.loads(capsys.readouterr().out)["stable"] is False


def test_stability_implicit_is_unsupported(tmp_path):
    tf = FactoredTf((ImplicitPower(1.0, 0.5),))
    assert main(["stability", write(tmp_path / "t.json", tf)]) == 5


def test_compensate_explicit(tmp_path, capsys):
    out = tmp_path / "c"
    assert main(["compensate", "--target", "zero", "--z", "1", "--nu", "2", "--method", "explicit",
                 "--out-dir", str(out)]) == 0
    comp = FactoredTf.from_json((out / "compensator.json").read_text())
    res = FactoredTf.from_json((out / "residual.json").read_text())
    assert isinstance(comp.factors[0], PseudoPoly) and comp.factors[0].k == -1
    s = np.array([0.3j, 1j, 4j])
    np.testing.assert_allclose(comp.evaluate(s), 1 / (1 + np.sqrt(s)), rtol=1e-12)
    assert res.factors == (ExplicitX(1.0, 0.5),)


def test_compensate_with_plant_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACSHAPE_OUT_DIR", str(tmp_path / "env"))
    plant = write(tmp_path / "g.json", FactoredTf((IORational((-1.0, 1.0), (1.0, 5 / 6, 1 / 6)),)))
    assert main(["compensate", "--z", "1", "--nu", "3", "--method", "implicit", "--plant", plant]) == 0
    assert (tmp_path / "env" / "compensated_plant.json").exists()
    assert main(["compensate", "--target", "pole-pair", "--z", "-0.514", "--zi", "16.346", "--nu", "2",
                 "--out-dir", str(tmp_path / "sp")]) == 0
    plan = json.loads((tmp_path / "sp" / "plan.json").read_text())
    assert plan["target"] == "stable_pair" and plan["k"] == -1


def test_compensate_bad_zero(tmp_path):
    assert main(["compensate", "--z", "-1", "--nu", "2", "--out-dir", str(tmp_path)]) == 1


def test_approx_alpha(tmp_path):
    out = tmp_path / "a.json"
    assert main(["approx", "--alpha", "0.5", "--N", "3", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert len(d["num"]) == len(d["den"]) == 8


def test_approx_file(tmp_path, capsys):
    tf = write(tmp_path / "q.json", FactoredTf((ImplicitPower(1.0, -0.5, mirrored=True),)))
    assert main(["approx", tf]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["band"] == [1e-3, 1e3] and d["N"] == 5


def test_step_cli(tmp_path):
    path = tmp_path / "loop.json"
    path.write_text(json.dumps(example_loops()["C3"].to_dict()))
    out, met = tmp_path / "y.csv", tmp_path / "m.json"
    assert main(["step", str(path), "--T", "5", "--dt", "0.01", "--out", str(out), "--metrics", str(met)]) == 0
    assert out.read_text().startswith("t,y\n")
    assert "undershoot" in json.loads(met.read_text())
    assert main(["step", str(path), "--solver", "gl", "--T", "1", "--dt", "0.01", "--out", str(out)]) == 0
    c4 = tmp_path / "loop4.json"
    c4.write_text(json.dumps(example_loops()["C4"].to_dict()))
    assert main(["step", str(c4), "--solver", "gl", "--T", "1"]) == 5


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["nope"])
    assert info.value.code == 2


def test_reproduce_margins_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["reproduce", "--figure", "margins", "--out", str(a)]) == 0
    assert main(["reproduce", "--figure", "margins", "--out", str(b)]) == 0
    assert (a / "margins.json").read_bytes() == (b / "margins.json").read_bytes()
    text = capsys.readouterr().out
    assert "FAIL" not in text and "PASS gain_C1" in text


def test_reproduce_all_writes_everything(tmp_path):
    assert main(["reproduce", "--out", str(tmp_path)]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    expected = {"bode_L%d.csv" % i for i in range(1, 5)} | {"step_C%d.csv" % i for i in range(1, 5)} | \
        {"disturbance_C%d.csv" % i for i in range(1, 5)} | {"step_C3_gl.csv", "margins.json", "metrics.json",
                                                            "figures.json", "checks.json"}
    assert expected <= names
    assert not any(n.startswith(".tmp-") for n in names)
    checks = json.loads((tmp_path / "checks.json").read_text())
    assert all(c["passed"] for c in checks)


def test_reproduce_failure_exit_code(tmp_path, monkeypatch):
    import fracshape.reproduce as rep
    monkeypatch.setitem(rep.REFERENCE_GAINS, "C1", 0.9)
    assert main(["reproduce", "--figure", "margins", "--out", str(tmp_path)]) == 4


def test_tf_file_round_trip(tmp_path):
    tf = example_loops()["C4"].controller
    p1 = tmp_path / "one.json"
    p1.write_text(tf.to_json())
    again = FactoredTf.from_json(p1.read_text())
    assert again == tf and again.to_json() == p1.read_text()
