import json
import math

import numpy as np
import pytest

from secmimo.cli import main
from secmimo.config import ConfigError
from secmimo.experiments import PRESETS, ExperimentSpec, list_presets, run_experiment


def test_presets_listed_and_valid():
    listed = {p["figure"]: p for p in list_presets()}
    assert set(listed) == set(PRESETS)
    assert listed["fig4"]["grid"] == [64, 128, 256]
    assert listed["fig4"]["T_per_antenna"] == 16
    assert listed["fig7"]["grid"][-1] == pytest.approx(math.pi)
    assert listed["fig7"]["base"]["tau"] == 8 and listed["fig7_tau64"]["base"]["tau"] == 64
    assert listed["fig3"]["schemes"] == ["proposed", "theorem2"]


def small_spec(tmp_path=None, **kw):
    base = dict(figure="fig3", trials=3, seed=7, scale=0.5, grid=(0.0, 20.0))
    base.update(kw)
    if tmp_path is not None:
        base["out"] = str(tmp_path / "out.csv")
    return ExperimentSpec(**base)


def test_rerun_is_byte_identical(tmp_path):
    a = run_experiment(small_spec(tmp_path)).to_csv()
    b = run_experiment(small_spec()).to_csv()
    assert a == b
    assert (tmp_path / "out.csv").read_text() == a
    meta = json.loads((tmp_path / "out.csv.json").read_text())
    assert meta["figure"] == "fig3" and meta["trials"] == 3 and len(meta["config_hash"]) == 16
    assert a != run_experiment(small_spec(seed=8)).to_csv()


def test_table_layout():
    table = run_experiment(small_spec())
    lines = table.to_csv().splitlines()
    assert lines[0] == "series,sweep_value,scheme,metric,mean,std_error,trials"
    # 2 series x 2 points x (2 MC metrics + 1 formula row)
    assert len(lines) == 1 + 2 * 2 * 3
    x, m, se = table.select("theorem2", "R_sec", "N_t=128")
    assert x.tolist() == [0.0, 20.0] and np.all(m > 0)
    _, _, se_mc = table.select("proposed", "R_sec", "N_t=128")
    assert np.all(se_mc > 0)


def test_worker_pool_matches_serial():
    serial = run_experiment(small_spec(trials=2)).to_csv()
    pooled = run_experiment(small_spec(trials=2, workers=2)).to_csv()
    assert serial == pooled


def test_standard_error_shrinks_like_root_n():
    kw = dict(grid=(10.0,), schemes=("proposed",), scale=0.5)
    se = []
    for n in (25, 100):
        table = run_experiment(small_spec(trials=n, **kw))
        se.append(table.select("proposed", "R_sec", "N_t=128")[2][0])
    assert 1.6 <= se[0] / se[1] <= 2.4


@pytest.mark.parametrize("kw, message", [
    (dict(figure="fig99"), "unknown figure"),
    (dict(full=True, scale=0.5), "drop --scale"),
    (dict(trials=0), "trials"),
    (dict(scale=0.01), "violated"),
    (dict(schemes=("zf",)), "unknown scheme"),
])
def test_validation_errors(kw, message):
    with pytest.raises(ConfigError, match=message):
        run_experiment(small_spec(**kw))


class TestCli:
    def test_success_writes_csv_and_sidecar(self, tmp_path, capsys):
        out = tmp_path / "fig4.csv"
        code = main(["--figure", "fig4", "--trials", "2", "--scale", "0.5", "--out", str(out)])
        assert code == 0
        assert out.exists() and (tmp_path / "fig4.csv.json").exists()
        assert "wrote" in capsys.readouterr().out

    @pytest.mark.parametrize("argv", [
        ["--figure", "nope"],
        ["--figure", "fig3", "--full", "--scale", "0.5"],
        ["--figure", "fig3", "--scale", "0.01"],
        ["--trials", "3"],
    ])
    def test_validation_exit_code(self, argv, tmp_path, capsys):
        assert main(argv + ["--out", str(tmp_path / "x.csv")]) == 2
        assert "simulate: error:" in capsys.readouterr().err

    def test_config_override(self, tmp_path):
        cfg = tmp_path / "o.json"
        cfg.write_text(json.dumps({"K": 1, "L": 0}))
        out = tmp_path / "o.csv"
        assert main(["--figure", "fig3", "--trials", "2", "--scale", "0.5",
                     "--config", str(cfg), "--out", str(out)]) == 0
        meta = json.loads((tmp_path / "o.csv.json").read_text())
        assert meta["base_config"]["K"] == 1 and meta["base_config"]["L"] == 0

    def test_bad_config_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]")
        assert main(["--figure", "fig3", "--config", str(bad)]) == 2
        assert main(["--figure", "fig3", "--config", str(tmp_path / "missing.json")]) == 2

    def test_list(self, capsys):
        assert main(["--list"]) == 0
        assert {p["figure"] for p in json.loads(capsys.readouterr().out)} == set(PRESETS)
