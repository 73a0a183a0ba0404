import csv
import io
import json

import numpy as np
import pytest

from risbc import __version__
from risbc.cli import main
from risbc.config import ConfigError, ScenarioConfig, Sweep
from risbc.figures import FIG3, FIG11, preset

FIG11_CONFIG = {"d_h": 2.0, "P_dbm": 30.0,
                "tags": [{"d_f": 4.0, "d_u": 5.0, "d_g": 4.5}, {"d_f": 5.0, "d_u": 5.0, "d_g": 5.4}]}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse(text):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = val
        else:
            body.append(line)
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    return meta, rows


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_defaults_and_noise_column(capsys):
    code, out, _ = run(capsys, "analyze")
    assert code == 0
    meta, rows = parse(out)
    assert float(rows[0]["noise_dbm"]) == pytest.approx(-94.0, abs=1e-9)
    assert meta["version"] == f"risbc {__version__}"
    cfg = ScenarioConfig.from_json(meta["config"])
    assert meta["config_sha256"] == cfg.sha256()
    assert (cfg.P_dbm, cfg.N, cfg.beta, cfg.phi, cfg.eta, cfg.d_f, cfg.d_u, cfg.d_g, cfg.d_h) == \
        (20.0, 100, 0.6, 0.8, 0.8, 10.0, 5.0, 3.0, 8.0)


def test_sweep_rows_in_order(capsys):
    code, out, _ = run(capsys, "analyze", "--sweep", "P_dbm:0:30:4")
    _, rows = parse(out)
    assert [float(r["x"]) for r in rows] == [0.0, 10.0, 20.0, 30.0]
    rub = [float(r["R_ub"]) for r in rows]
    assert rub == sorted(rub)


def test_no_ris_zeroes_ris_columns(capsys, tmp_path):
    path = write_config(tmp_path, {"policy": "none"})
    _, out, _ = run(capsys, "analyze", "--config", path)
    _, rows = parse(out)
    assert rows[0]["N"] == "0"
    assert float(rows[0]["mu_X"]) == 0.0 and float(rows[0]["var_X"]) == 0.0


def test_activation_distance_crossing_from_sweep(capsys, tmp_path):
    # the -20 dBm mean received power crossing sits between consecutive sweep points
    from risbc.figures import FIG4, activation_distance
    path = write_config(tmp_path, {k: v for k, v in FIG4.items()})
    _, out, _ = run(capsys, "analyze", "--config", path, "--sweep", "d_f:1:20:20")
    _, rows = parse(out)
    d = activation_distance(ScenarioConfig(**FIG4), 100)
    above = [float(r["x"]) for r in rows if float(r["rx_power_dbm"]) >= -20.0]
    below = [float(r["x"]) for r in rows if float(r["rx_power_dbm"]) < -20.0]
    assert max(above) <= d < min(below)


def test_simulate_is_byte_deterministic(capsys, tmp_path):
    argv = ["simulate", "--trials", "3000", "--seed", "11", "--sweep", "P_dbm:0:20:3"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    _, c, _ = run(capsys, *argv[:4], "12", *argv[5:])
    assert a == b and a != c
    meta, rows = parse(a)
    assert meta["trials"] == "3000" and meta["seed"] == "11"
    assert all(r["trials"] == "3000" for r in rows)
    out = tmp_path / "sim.csv"
    run(capsys, *argv, "--out", str(out))
    assert out.read_text() == a


def test_simulate_gaps_within_tolerance(capsys, tmp_path):
    path = write_config(tmp_path, {"trials": 200000})
    _, out, _ = run(capsys, "simulate", "--config", path, "--sweep", "d_f:5:25:3")
    _, rows = parse(out)
    for r in rows:
        assert abs(float(r["gap_harvested_rel"])) < 0.01
        assert r["rate_in_bounds"] == "1"


def test_simulate_multi_tag(capsys, tmp_path):
    path = write_config(tmp_path, {**FIG11_CONFIG, "N": 8, "trials": 3})
    code, out, _ = run(capsys, "simulate", "--config", path)
    assert code == 0
    _, rows = parse(out)
    assert set(rows[0]) >= {"mc_sum_rate", "mc_outage_0", "mc_outage_1"}


def test_optimize_single_tag_defaults(capsys):
    code, out, _ = run(capsys, "optimize")
    assert code == 0
    _, rows = parse(out)
    trace = [float(r["v1"]) for r in rows if r["record"] == "trace"]
    summary = next(r for r in rows if r["record"] == "summary")
    assert int(summary["v1"]) <= 50 and summary["v2"] == "1"
    assert np.all(np.diff(trace) >= -1e-9)
    assert sum(r["record"] == "theta" for r in rows) == 100


def test_optimize_fig11_geometry(capsys, tmp_path):
    path = write_config(tmp_path, FIG11_CONFIG)
    code, out, _ = run(capsys, "optimize", "--config", path)
    assert code == 0
    _, rows = parse(out)
    trace = [float(r["v1"]) for r in rows if r["record"] == "trace"]
    assert np.all(np.diff(trace) >= -1e-9)
    assert sum(r["record"] == "tag" for r in rows) == 2


def test_figure_preset_echo(capsys):
    code, out, _ = run(capsys, "figure", "3", "--trials", "2000")
    assert code == 0
    meta, rows = parse(out)
    cfg = ScenarioConfig.from_json(meta["config"])
    for key, val in FIG3.items():
        assert getattr(cfg, key) == val
    assert {r["N"] for r in rows} == {"100", "200", "400"}
    _, again, _ = run(capsys, "figure", "3", "--trials", "2000")
    assert again == out
    assert preset(11).tags == FIG11["tags"] and preset(11).d_h == 2.0


def test_config_round_trip(tmp_path):
    cfg = ScenarioConfig(P_dbm=12.5, tags=FIG11["tags"], sweep=Sweep("P_dbm", 0, 10, 3), bits=2)
    text = cfg.to_json()
    again = ScenarioConfig.from_json(text)
    assert again == cfg and again.to_json() == text
    assert ScenarioConfig.from_dict({"sweep": "N:0:200:3"}).points()[1][1].N == 100


@pytest.mark.parametrize("data,field", [
    ({"beta": 1.5}, "beta"),
    ({"N": 2.5}, "N"),
    ({"policy": "bogus"}, "policy"),
    ({"policy": "quantized"}, "bits"),
    ({"d_f": 0.2}, "d_f/m_f"),
    ({"frobnicate": 1}, "frobnicate"),
    ({"tags": [{"d_f": 4.0}]}, "tags[0]"),
    ({"sweep": "Q:0:1:2"}, "sweep"),
    ({"trials": 0}, "trials"),
])
def test_field_level_errors(data, field, capsys, tmp_path):
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_dict(data)
    assert exc.value.field == field
    code, _, err = run(capsys, "analyze", "--config", write_config(tmp_path, data))
    assert code == 2 and err.startswith("error: ") and field in err


def test_cli_errors(capsys):
    assert run(capsys, "analyze", "--sweep", "P_dbm:0:1")[0] == 2
    assert run(capsys, "figure", "5")[0] == 2
    assert run(capsys, "analyze", "--config", "/nonexistent.json")[0] == 2
    code, out, _ = run(capsys, "dump-config")
    assert code == 0 and ScenarioConfig.from_json(out) == ScenarioConfig()
