import csv
import json

import pytest
import yaml

from pathlsi import cli

LSI = {
    "scenario": "lsi",
    "model": {"kind": "halfspace", "dim": 1},
    "x": [1.0],
    "grid": {"T": 1.0, "n_steps": 50},
    "n_paths": 2000,
    "base_seed": 3,
    "function": {"name": "tanh", "times": [1.0]},
}


def write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_verify_writes_outputs(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["verify", "--config", write(tmp_path, LSI), "--out", str(out)])
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["verdict"] == "holds" and rep["schema_version"] == 1
    rows = read_csv(out / "report.csv")
    assert len(rows) == 1 and rows[0]["verdict"] == "holds"
    assert (out / "report.svg").read_text().startswith("<svg")
    assert "<polyline" in (out / "report_curve.svg").read_text()


def test_overrides(tmp_path):
    out = tmp_path / "o"
    cli.main(["verify", "--config", write(tmp_path, LSI), "--out", str(out), "--seed", "9",
              "--paths", "300", "--steps", "20", "--factor2", "off"])
    md = json.loads((out / "report.json").read_text())["metadata"]
    assert (md["base_seed"], md["n_paths"], md["n_steps"], md["factor2"]) == (9, 300, 20, False)


def test_forced_failure_exit_code(tmp_path):
    cfg = dict(LSI, rhs_scale=1e-3)
    assert cli.main(["verify", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 1


def test_determinism_byte_identical(tmp_path):
    path = write(tmp_path, LSI)
    cli.main(["verify", "--config", path, "--out", str(tmp_path / "a")])
    cli.main(["verify", "--config", path, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


@pytest.mark.parametrize("bad", [
    {"scenario": "lsi"},
    dict(LSI, scenario="nonsense"),
    dict(LSI, function={"name": "unknown", "times": [1.0]}),
    dict(LSI, model={"kind": "torus", "dim": 2}),
    dict(LSI, x=[-1.0]),
    dict(LSI, bounds={"K1": 1.0, "K2": 0.5}),
    dict(LSI, function={"name": "tanh"}),
])
def test_malformed_config_exit_2(tmp_path, bad, capsys):
    assert cli.main(["verify", "--config", write(tmp_path, bad), "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_and_invalid_files(tmp_path):
    assert cli.main(["verify", "--config", str(tmp_path / "none.yaml")]) == 2
    p = tmp_path / "bad.yaml"
    p.write_text("a: [1, 2\n")
    assert cli.main(["verify", "--config", str(p)]) == 2


def test_constants_table(tmp_path):
    cfg = {"scenario": "constants-table",
           "constants": {"K1": [1.0, 2.0], "K2": [-1.0, 1.0], "T": [0.5, 1.0, 2.0]}}
    assert cli.main(["constants", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "constants.csv")
    assert len(rows) == 12
    assert list(rows[0]) == cli.constants.CONSTANTS_COLUMNS
    assert (tmp_path / "constants.svg").exists()


def test_sweep_rows_seeds_and_monotonicity(tmp_path):
    cfg = {"scenario": "constants-table", "constants": {"K1": 1.0, "K2": -1.0, "T": 1.0},
           "base_seed": 5,
           "sweep": {"constants.T": [0.5, 1.0, 2.0], "constants.K2": [-1.0, 1.0]},
           "output": {"name": "sw"}}
    assert cli.main(["sweep", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sw.csv")
    assert len(rows) == 6
    assert [int(r["cell"]) for r in rows] == list(range(6))
    assert [int(r["seed"]) for r in rows] == [cli.cell_seed(5, i) for i in range(6)]
    assert len({r["seed"] for r in rows}) == 6
    neg = sorted((float(r["T"]), float(r["spectral_bound"])) for r in rows if float(r["K2"]) < 0)
    assert all(a[1] <= b[1] for a, b in zip(neg, neg[1:]))


def test_sweep_verification_parallel(tmp_path):
    cfg = dict(LSI, n_paths=500, sweep={"grid.T": [1.0, 2.0], "grid.n_steps": [20, 40]},
               sweep_workers=2, output={"name": "sv"})
    assert cli.main(["sweep", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sv.csv")
    assert len(rows) == 4 and all(r["verdict"] != "violated" for r in rows)
    assert list(rows[0]) == cli.SWEEP_COLUMNS
    # same sweep serially gives the same table
    cfg["sweep_workers"] = 1
    cfg["output"] = {"name": "sv1"}
    cli.main(["sweep", "--config", write(tmp_path, cfg, "c2.yaml"), "--out", str(tmp_path)])
    assert (tmp_path / "sv.csv").read_text() == (tmp_path / "sv1.csv").read_text()


def test_empty_sweep_exit_2(tmp_path):
    cfg = dict(LSI, sweep={})
    assert cli.main(["sweep", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    cfg = dict(LSI, sweep={"grid.T": []})
    assert cli.main(["sweep", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2


def test_heat_and_poincare_scenarios(tmp_path):
    heat = {"scenario": "heat-lsi", "model": {"kind": "halfspace", "dim": 1}, "x": [1.0],
            "grid": {"T": 1.0, "n_steps": 40}, "n_paths": 1000,
            "function": {"name": "tanh_integral"}, "output": {"name": "h"}}
    assert cli.main(["verify", "--config", write(tmp_path, heat), "--out", str(tmp_path)]) == 0
    poin = {"scenario": "poincare", "model": {"kind": "sphere", "dim": 2},
            "grid": {"T": 1.0, "n_steps": 40}, "n_paths": 1000,
            "function": {"name": "linear", "times": [1.0]}, "output": {"name": "p"}}
    assert cli.main(["verify", "--config", write(tmp_path, poin), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "p.json").read_text())["kind"] == "poincare"
    # heat scenario demands an integral function
    heat["function"] = {"name": "tanh", "times": [1.0]}
    assert cli.main(["verify", "--config", write(tmp_path, heat), "--out", str(tmp_path)]) == 2


def test_dump_paths(tmp_path):
    cfg = dict(LSI, n_paths=3, output={"name": "paths"})
    assert cli.main(["dump-paths", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "paths.csv")
    assert len(rows) == 3 * 51
    assert list(rows[0]) == ["path_id", "k", "t", "x_1", "dl", "on_boundary"]


def test_shipped_configs_parse():
    import pathlib
    root = pathlib.Path(__file__).resolve().parent.parent / "configs"
    for p in sorted(root.glob("*.yaml")):
        cfg = cli.load_config(p)
        assert cfg["scenario"] in cli.SCENARIOS
