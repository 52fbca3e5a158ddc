import json
import math

import pytest

from gramterp.results import PLOT_SCHEMA_VERSION, PlotSpec, ResultTable, read_csv, write_plots


def table():
    t = ResultTable(["name", "value", "ok"], metadata={"kind": "demo", "config": "a = 1\nb = 2"})
    t.add(name="x", value=0.1, ok=True)
    t.add(name="y", value=float("nan"), ok=False)
    t.add(name="z", value=3, ok=None)
    return t


def test_schema_enforced():
    t = ResultTable(["a", "b"])
    with pytest.raises(ValueError):
        t.add(a=1)
    with pytest.raises(ValueError):
        t.add(a=1, b=2, c=3)


def test_csv_layout():
    text = table().to_csv()
    assert text.splitlines()[:4] == ["# kind: demo", "# config: a = 1", "#   b = 2",
                                     "name,value,ok"]
    assert "x,0.1,true" in text and "y,nan,false" in text and "z,3," in text


def test_write_read_round_trip(tmp_path):
    t = table()
    path = t.write(tmp_path / "sub" / "t.csv")
    meta, rows = read_csv(path)
    assert meta["kind"] == "demo"
    assert [r["name"] for r in rows] == ["x", "y", "z"]
    assert float(rows[0]["value"]) == 0.1 and math.isnan(float(rows[1]["value"]))


def test_floats_exact():
    t = ResultTable(["v"])
    v = 1 / 3
    t.add(v=v)
    assert float(t.to_csv().splitlines()[-1]) == v


def test_where_and_column():
    t = table()
    assert t.column("name") == ["x", "y", "z"]
    assert t.where(ok=False)[0]["name"] == "y"


def test_plot_json(tmp_path):
    p = PlotSpec("BER", "snr_db", ["ber"], y_scale="log", series_by=["method"],
                 filters={"csi": "perfect"})
    out = write_plots([p], tmp_path / "ber.csv")
    assert out.name == "ber.plot.json"
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == PLOT_SCHEMA_VERSION
    (plot,) = doc["plots"]
    assert plot["data"] == "ber.csv" and plot["y"]["scale"] == "log"
    assert plot["x"]["label"] == "snr_db" and plot["filters"] == {"csi": "perfect"}


def test_multiline_metadata_round_trip(tmp_path):
    meta, _ = read_csv(table().write(tmp_path / "t.csv"))
    assert meta["config"] == "a = 1\nb = 2"


def test_output_regenerates_itself(tmp_path):
    from gramterp.config import parse_config
    from gramterp.experiments import run_experiment

    cfg = parse_config("[run]\nkind = ber\nseed = 4\n[ber]\ntrials = 1\nsnr_db = 5.0\n")
    table, _ = run_experiment(cfg)
    meta, _ = read_csv(table.write(tmp_path / "ber.csv"))
    again = parse_config(meta["config"])
    assert again == cfg and again.digest() == meta["config_sha256"]
    assert run_experiment(again)[0].to_csv() == table.to_csv()
