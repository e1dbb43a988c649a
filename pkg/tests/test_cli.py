import json

import pytest

from anythreat.cli import RunConfig, ConfigError, expand_matrix, main, render_tables

SMALL = {
    "data": {"synth": {"n_users": 30, "n_insiders": 5, "days": 8, "scenarios": ["s2", "s3"]}},
    "communities": ["ITAdmin"],
    "variants": ["default", "smote", "amotre", "cd_mi_amotre"],
    "classifiers": [{"kind": "knn"}, {"kind": "random_forest", "n_trees": 5, "name": "rf"}],
    "grid": {"perc_over": [200, 300], "k": [2], "tau": 10},
    "seed": 3,
}


def _config(tmp_path, body=SMALL, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(body))
    return p


def test_matrix_expansion():
    cfg = RunConfig.from_dict(SMALL)
    cells = expand_matrix(cfg, "ITAdmin")
    # default: 2 classifiers; each oversampling variant: 2 classifiers x 2 perc_over
    assert len(cells) == 2 + 3 * 2 * 2
    assert len({c[1].seed for c in cells}) == 1


def test_synth_command(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "logs"), "--seed", "4"]) == 0
    assert (tmp_path / "logs" / "manifest.json").exists()
    assert "insiders" in capsys.readouterr().out


def test_synth_command_rejects_bad_config(tmp_path):
    bad = _config(tmp_path, {"n_users": 5, "n_insiders": 9})
    assert main(["synth", "--out", str(tmp_path / "x"), "--config", str(bad)]) == 2


def test_ingest_command(tmp_path):
    main(["synth", "--out", str(tmp_path / "logs"), "--config",
          str(_config(tmp_path, SMALL["data"]["synth"]))])
    assert main(["ingest", "--logs", str(tmp_path / "logs"), "--out", str(tmp_path / "ds")]) == 0
    assert (tmp_path / "ds" / "dataset_ITAdmin.csv").exists()
    assert main(["ingest", "--logs", str(tmp_path / "missing"), "--out", str(tmp_path / "ds")]) == 1


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("run")
    cfg = _config(base)
    assert main(["run", "--config", str(cfg), "--out", str(base / "a")]) == 0
    return base, cfg


def test_run_writes_results_and_tables(small_run):
    base, _ = small_run
    res = json.loads((base / "a" / "results.json").read_text())
    assert res["format"] == 1 and res["seed"] == 3
    assert len(res["records"]) == 14 and all(r["status"] == "ok" for r in res["records"])
    assert res["datasets"]["ITAdmin"]["threats"] == 5
    assert 0 <= res["wilcoxon"]["p_value"] <= 1
    for name in ("table3_max_tpt.csv", "table4_min_fp.csv", "table5_f1.csv"):
        assert (base / "a" / "ITAdmin" / name).read_text().startswith("experiment,")


def test_run_is_byte_reproducible_and_job_count_free(small_run):
    base, cfg = small_run
    assert main(["run", "--config", str(cfg), "--out", str(base / "b"), "--jobs", "2"]) == 0
    a = (base / "a" / "results.json").read_bytes()
    assert a == (base / "b" / "results.json").read_bytes()


def test_report_regenerates_tables(small_run, tmp_path):
    base, _ = small_run
    assert main(["report", "--results", str(base / "a" / "results.json"), "--out", str(tmp_path)]) == 0
    for name in ("table3_max_tpt.csv", "table4_min_fp.csv", "table5_f1.csv"):
        assert (tmp_path / "ITAdmin" / name).read_bytes() == (base / "a" / "ITAdmin" / name).read_bytes()


def test_render_tables_marks_default_f1(small_run):
    base, _ = small_run
    res = json.loads((base / "a" / "results.json").read_text())
    t5 = render_tables(res)["ITAdmin"]["table5_f1.csv"]
    assert t5.splitlines()[1].startswith("Default,") and "(" in t5.splitlines()[1]
    assert "(" not in t5.splitlines()[2]


def test_invalid_config_reports_field_path(tmp_path, capsys):
    bad = dict(SMALL, grid={"perc_over": [50], "k": [2]})
    assert main(["run", "--config", str(_config(tmp_path, bad))]) == 2
    err = capsys.readouterr().err
    assert "grid/perc_over/0" in err


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="colour"):
        RunConfig.from_dict(dict(SMALL, colour=1))


def test_duplicate_classifier_names_rejected():
    with pytest.raises(ConfigError, match="unique"):
        RunConfig.from_dict(dict(SMALL, classifiers=[{"kind": "knn"}, {"kind": "knn", "k": 3}]))


def test_json_syntax_error_reports_line(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "data": {\n    "synth": {}\n  },\n  "seed": ,\n}\n')
    assert main(["run", "--config", str(p)]) == 2
    assert "broken.json:5:" in capsys.readouterr().err


def test_failing_cell_is_recorded_as_null(tmp_path, capsys):
    body = dict(SMALL, variants=["default"], classifiers=[{"kind": "knn", "k": 100000, "name": "knn_huge"},
                                                     {"kind": "knn"}])
    assert main(["run", "--config", str(_config(tmp_path, body)), "--out", str(tmp_path / "o")]) == 1
    res = json.loads((tmp_path / "o" / "results.json").read_text())
    failed = [r for r in res["records"] if r["status"] == "failed"]
    assert len(failed) == 1 and failed[0]["measures"] is None and failed[0]["reason"]
    assert any(r["status"] == "ok" for r in res["records"])
    assert failed[0]["id"] in capsys.readouterr().err


def test_run_from_prepared_dataset(tmp_path):
    main(["synth", "--out", str(tmp_path / "logs"), "--config",
          str(_config(tmp_path, SMALL["data"]["synth"], "s.json"))])
    main(["ingest", "--logs", str(tmp_path / "logs"), "--out", str(tmp_path / "ds")])
    body = dict(SMALL, data={"dataset": "ds/dataset_ITAdmin.csv"}, variants=["default"],
                classifiers=[{"kind": "linear"}])
    assert main(["run", "--config", str(_config(tmp_path, body)), "--out", str(tmp_path / "o")]) == 0
