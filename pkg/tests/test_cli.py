import csv
import json
import subprocess
import sys

import jsonschema
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from isoflow import cli, sphere
from isoflow.errors import NonConvergenceError
from isoflow.schema import CLASSIFY_REPORT, SIMULATE_REPORT, SPECTRUM_REPORT

GEO_SIM = {"dt": 1e-3, "horizon": 40, "paths": 2000, "seed": 7, "r0": 1, "eta": [0.01]}


def run(tmp_path, command, config, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(config if isinstance(config, str) else json.dumps(config), encoding="utf-8")
    out = tmp_path / "out"
    return cli.main([command, "--config", str(path), "--out", str(out), *extra]), out


def load(path):
    return json.loads(path.read_text(encoding="utf-8"))


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_classify_critical_sphere(tmp_path):
    code, out = run(tmp_path, "classify", {"schema": "isoflow/1", "sphere": {"d": 3, "a": [0, 0.5], "b": [0, 1]}})
    assert code == 0
    rep = load(out / "classify.json")
    jsonschema.validate(rep, CLASSIFY_REPORT)
    assert rep["verdict"] == "Synchronizes" and rep["lambda1"] == 0.0
    assert rep["gamma1"] == pytest.approx(1.0)
    assert rep["speed_mass"] == "inf"
    assert rep["boundary_coefficients"]["alpha1_prime"] == pytest.approx(4.5)
    assert [b["boundary"] for b in rep["boundaries"]] == ["zero", "R"]
    assert rep["model"] == {"kind": "sphere", "d": 3, "a": [0, 0.5], "b": [0, 1]}


def test_classify_antipodal_sphere(tmp_path):
    code, out = run(tmp_path, "classify", {"sphere": {"d": 3, "a": [0, 1]}})
    rep = load(out / "classify.json")
    assert code == 0
    assert rep["lambda1"] == pytest.approx(-2.0)
    assert rep["spectrum"] == pytest.approx([-2.0, -4.0])
    assert rep["verdict"] == "NotApplicable"
    assert "violated" in rep["evidence"]


def test_classify_iouf(tmp_path):
    code, out = run(tmp_path, "classify", {"iouf": {"d": 4, "c": 0.5, "covariance": "gaussian"}})
    rep = load(out / "classify.json")
    assert code == 0
    jsonschema.validate(rep, CLASSIFY_REPORT)
    assert rep["verdict"] == "Ergodic" and rep["lambda1"] == pytest.approx(0.5)
    assert rep["lambda1_c0"] == pytest.approx(1.0)
    assert isinstance(rep["speed_mass"], float)


def test_classify_raw_diffusion(tmp_path):
    code, out = run(tmp_path, "classify", {"diffusion": {"drift": "x*(1-x)", "diffusion": "x"}})
    rep = load(out / "classify.json")
    assert code == 0 and rep["verdict"] == "Ergodic" and rep["lambda1"] is None
    assert rep["speed_mass"] == pytest.approx(7.38905609893065, rel=1e-8)


def test_degenerate_model_exits_3(tmp_path, capsys):
    code, out = run(tmp_path, "classify", {"sphere": {"d": 3, "b": [1]}})
    assert code == 3
    assert "σ² ≡ 0" in capsys.readouterr().err
    assert not (out / "classify.json").exists()


def test_undamped_iouf_verdict_exits_3(tmp_path, capsys):
    code, _ = run(tmp_path, "classify", {"iouf": {"d": 4, "c": 0}})
    assert code == 3
    assert "invariant probability measure" in capsys.readouterr().err


@pytest.mark.parametrize("config", [
    "{not json",
    json.dumps([1, 2]),
    json.dumps({}),
    json.dumps({"sphere": {"d": 3, "a": [1]}, "iouf": {"d": 4, "c": 1}}),
    json.dumps({"sphere": {"d": 2, "a": [1]}}),
    json.dumps({"sphere": {"d": 3, "a": [0, 0]}}),
    json.dumps({"sphere": {"d": 3, "a": [1]}, "extra": 1}),
    json.dumps({"schema": "isoflow/2", "sphere": {"d": 3, "a": [1]}}),
    json.dumps({"command": "sweep", "sphere": {"d": 3, "a": [1]}}),
    json.dumps({"iouf": {"d": 4, "c": 1, "covariance": "matern"}}),
    json.dumps({"diffusion": {"drift": "x +", "diffusion": "x"}}),
    json.dumps({"diffusion": {"drift": "0", "diffusion": "1"}}),
])
def test_invalid_config_exits_2(tmp_path, config):
    code, _ = run(tmp_path, "classify", config)
    assert code == 2


def test_missing_and_non_utf8_config(tmp_path):
    assert cli.main(["classify", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "latin.json"
    bad.write_bytes(b'{"sphere": {"d": 3, "a": [1], "label": "\xe9"}}')
    assert cli.main(["classify", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sphere": {"d": 3, "a": [0, 1]}}))
    assert cli.main(["classify", "--config", str(cfg), "--out", str(blocker / "sub")]) == 2


def test_numeric_failure_exits_4(tmp_path, monkeypatch):
    def boom(model):
        raise NonConvergenceError("quadrature did not converge")

    monkeypatch.setattr(sphere, "classify", boom)
    code, _ = run(tmp_path, "classify", {"sphere": {"d": 3, "a": [0, 1]}})
    assert code == 4
    monkeypatch.setattr(sphere, "classify", lambda m: 1 / 0)
    code, _ = run(tmp_path, "classify", {"sphere": {"d": 3, "a": [0, 1]}})
    assert code == 4


def test_spectrum_sphere(tmp_path):
    code, out = run(tmp_path, "spectrum", {"sphere": {"d": 3, "b": [0, 1]}})
    rep = load(out / "spectrum.json")
    jsonschema.validate(rep, SPECTRUM_REPORT)
    assert code == 0
    assert rep["spectrum"] == pytest.approx([1.0, -1.0])
    assert rep["gamma1"] == pytest.approx(3.0)


def test_spectrum_iouf_shift_identity(tmp_path):
    code, out = run(tmp_path, "spectrum", {"iouf": {"d": 4, "c": 2}})
    rep = load(out / "spectrum.json")
    assert code == 0
    assert rep["lambda1"] == pytest.approx(-1.0) and rep["lambda1_c0"] == pytest.approx(1.0)
    assert rep["shift_identity"] is True


def test_spectrum_needs_a_flow(tmp_path):
    code, _ = run(tmp_path, "spectrum", {"diffusion": {"drift": "x/4", "diffusion": "x"}})
    assert code == 2


def test_simulate_geometric(tmp_path):
    sim = dict(GEO_SIM, eta=[0.1, 0.01], times=[40, 20])
    code, out = run(tmp_path, "simulate", {"diffusion": {"drift": "x/4", "diffusion": "x"}, "sim": sim})
    assert code == 0
    rows = read_csv(out / "simulate.csv")
    assert rows[0] == ["t", "eta", "p_hat", "ci_lo", "ci_hi", "paths", "seed"]
    keys = [(float(r[0]), float(r[1])) for r in rows[1:]]
    assert keys == [(20.0, 0.01), (20.0, 0.1), (40.0, 0.01), (40.0, 0.1)]
    p = float(rows[3][2])
    assert float(rows[3][3]) <= p <= float(rows[3][4])
    assert abs(p - 0.8031) < 0.03
    assert all(r[5] == "2000" and r[6] == "7" for r in rows[1:])
    raw = (out / "simulate.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rep = load(out / "simulate.json")
    jsonschema.validate(rep, SIMULATE_REPORT)
    assert rep["verdict"] == "Synchronizes"
    assert rep["trend"] == "non-decreasing" and rep["concordant"] is True


def test_simulate_is_thread_independent(tmp_path, monkeypatch):
    cfg = {"iouf": {"d": 4, "c": 1}, "sim": {"dt": 1e-2, "horizon": 5, "paths": 1500, "seed": 3, "r0": 1,
                                              "eta": [0.05, 0.5], "times": [2.5, 5]}}
    outs = []
    for threads in ("1", "3"):
        code, out = run(tmp_path, "simulate", cfg, "--threads", threads)
        assert code == 0
        outs.append((out / "simulate.csv").read_bytes())
    monkeypatch.setenv("ISOFLOW_THREADS", "2")
    code, out = run(tmp_path, "simulate", cfg, "--threads", "1")
    outs.append((out / "simulate.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_simulate_needs_sim_block(tmp_path):
    code, _ = run(tmp_path, "simulate", {"iouf": {"d": 4, "c": 1}})
    assert code == 2
    code, _ = run(tmp_path, "simulate", {"iouf": {"d": 4, "c": 1}, "sim": dict(GEO_SIM, eta=[0])})
    assert code == 2


def test_sweep_iouf_flip(tmp_path):
    grid = [0.25 * k for k in range(1, 11)]
    code, out = run(tmp_path, "sweep", {"iouf": {"d": 4, "c": 1}, "sweep": {"parameter": "c", "values": grid}})
    assert code == 0
    rows = read_csv(out / "sweep.csv")
    assert rows[0] == ["parameter", "value", "lambda1", "gamma1", "verdict", "speed_mass"]
    assert [float(r[1]) for r in rows[1:]] == grid
    for r in rows[1:]:
        c = float(r[1])
        assert float(r[2]) == pytest.approx(1 - c)
        assert r[4] == ("Ergodic" if c < 1 else "Synchronizes")
        assert r[5] == ("finite" if c < 1 else "infinite")


def test_sweep_sphere_flip(tmp_path):
    grid = [0.75, 0.25, 0.5]
    code, out = run(tmp_path, "sweep", {"sphere": {"d": 3, "b": [0, 1]}, "sweep": {"parameter": "a2", "values": grid}},
                    "--threads", "2")
    assert code == 0
    rows = read_csv(out / "sweep.csv")[1:]
    assert [float(r[1]) for r in rows] == grid
    assert [r[4] for r in rows] == ["Synchronizes", "Ergodic", "Synchronizes"]
    assert [float(r[2]) for r in rows] == pytest.approx([1 - 2 * a for a in grid])
    assert [float(r[3]) for r in rows] == pytest.approx([0.75, 1.5, 1.0])


@pytest.mark.parametrize("sweep", [
    {"parameter": "c", "values": []},
    {"parameter": "a2", "values": [0.5]},
    {"parameter": "d", "values": [3.5]},
])
def test_sweep_invalid(tmp_path, sweep):
    code, _ = run(tmp_path, "sweep", {"iouf": {"d": 4, "c": 1}, "sweep": sweep})
    assert code == 2


def test_sweep_degenerate_point_exits_3(tmp_path):
    code, _ = run(tmp_path, "sweep", {"sphere": {"d": 3, "b": [1]}, "sweep": {"parameter": "a1", "values": [0.0]}})
    assert code == 3


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-3, 5) | st.floats(-2, 5, allow_nan=False) | st.sampled_from(["x", "inf", "c"]),
    lambda sub: st.lists(sub, max_size=3) | st.dictionaries(
        st.sampled_from(["sphere", "iouf", "diffusion", "d", "a", "b", "c", "sim", "sweep", "drift", "diffusion",
                         "parameter", "values", "schema"]), sub, max_size=4),
    max_leaves=10,
)


@given(json_values)
@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_exit_codes_are_exhaustive(tmp_path, doc):
    code, _ = run(tmp_path, "spectrum", json.dumps(doc))
    assert code in (0, 2, 3, 4)


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "isoflow.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "classify" in res.stdout
    res = subprocess.run([sys.executable, "-m", "isoflow.cli", "frobnicate", "--config", "x", "--out", "y"],
                         capture_output=True, text=True)
    assert res.returncode == 2
