import json
from pathlib import Path

import numpy as np
import pytest

from mbtrees.cli import main
from mbtrees.errors import ConfigError
from mbtrees.harness import (THREADS_ENV, ExperimentConfig, Report, emit_report, replicate, report_csv,
                             report_json, resolve_threads, run_experiment)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_urn(seed=3):
    return {
        "criterion": "urn", "kind": "urn_limit", "models": {}, "replicates": 500, "seed": seed,
        "beta": 1.0, "tolerances": {"ks": 0.1},
        "params": {"steps": 500, "polya_initial": [1.0, 1.0],
                   "random": {"initial": [1.0, 1.5, 2.25], "values": [1.0, 2.0], "probs": [0.5, 0.5]}},
    }


def small_mixing():
    return {"criterion": "mix", "kind": "type_mixing", "models": {"gw": "specs/gw_alternating.json"},
            "n_grid": [200], "replicates": 60, "seed": 11, "tolerances": {"abs": 0.05}}


def test_urn_limit_report():
    r = run_experiment(ExperimentConfig.from_dict(small_urn(), CONFIGS))
    assert r.rows and all(row.criterion_id.startswith("urn") for row in r.rows)
    assert r.passed


def test_type_mixing_on_alternating_spec():
    r = run_experiment(ExperimentConfig.from_dict(small_mixing(), CONFIGS))
    assert r.rows
    for row in r.rows:
        assert row.estimate == pytest.approx(0.5, abs=0.05)


def test_same_seed_same_bytes():
    a = report_json(run_experiment(ExperimentConfig.from_dict(small_urn(), CONFIGS)))
    b = report_json(run_experiment(ExperimentConfig.from_dict(small_urn(), CONFIGS)))
    assert a == b
    c = report_json(run_experiment(ExperimentConfig.from_dict(small_urn(seed=4), CONFIGS)))
    assert a != c


def test_thread_count_does_not_change_results():
    cfg = small_urn()
    cfg["replicates"] = 2500
    one = report_csv(run_experiment(ExperimentConfig.from_dict(cfg, CONFIGS), threads=1))
    three = report_csv(run_experiment(ExperimentConfig.from_dict(cfg, CONFIGS), threads=3))
    assert one == three


def _draw(rng, m):
    return rng.random(m)


def test_replicate_chunking():
    a = replicate(_draw, 2500, 1, 0, threads=1, chunk=1000)
    b = replicate(_draw, 2500, 1, 0, threads=2, chunk=1000)
    assert len(a) == 2500 and np.array_equal(a, b)


def test_threads_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads(1) == 3
    monkeypatch.setenv(THREADS_ENV, "x")
    with pytest.raises(ConfigError):
        resolve_threads(1)
    monkeypatch.delenv(THREADS_ENV)
    assert resolve_threads(None) == 1


# ---------------------------------------------------------------- reports


def test_empty_report_is_header_only():
    assert report_csv(Report("k", 0)) == "criterion_id,estimate,stderr_or_stat,threshold,pass\n"


def test_report_json_roundtrip():
    r = Report("k", 5)
    r.add("1", 0.25, 0.01, 0.5, True, "note")
    r.add("2", float("nan"), 1.0, 0.5, False)
    r.point("1", "s", 10, 0.3)
    back = Report.from_dict(json.loads(report_json(r)))
    assert back == Report.from_dict(r.to_dict())
    assert back.rows[1].estimate is None


def test_pass_column_values():
    r = Report("k", 0)
    r.add("a", 1.0, 0.0, 2.0, True)
    r.add("b", 3.0, 0.0, 2.0, False)
    lines = report_csv(r).splitlines()
    assert lines[1].endswith(",true") and lines[2].endswith(",false")
    assert r.lines()[1].startswith("[FAIL] criterion b")


def test_emit_csv_writes_table(tmp_path):
    r = Report("k", 0)
    r.add("a", 1.0, 0.0, 2.0, True)
    r.point("a", "s", 1, 2)
    emit_report(r, "csv", tmp_path / "out.csv")
    assert (tmp_path / "out.table.csv").read_text().startswith("criterion_id,series,x,value")


# ---------------------------------------------------------------- config errors


def test_json_error_has_position():
    with pytest.raises(ConfigError, match="line 2 column"):
        ExperimentConfig.from_json('{"kind": "urn_limit",\n  "criterion": }')


@pytest.mark.parametrize("patch, field", [
    ({"kind": "nope"}, "kind"),
    ({"replicates": -1}, "replicates"),
    ({"n_grid": [0]}, "n_grid"),
    ({"tolerances": {"ks": 0}}, "tolerances.ks"),
    ({"threads": 0}, "threads"),
    ({"bogus": 1}, "unknown"),
])
def test_field_errors(patch, field):
    d = small_urn()
    d.update(patch)
    with pytest.raises(ConfigError, match=field):
        ExperimentConfig.from_dict(d)


def test_missing_field():
    d = small_urn()
    del d["models"]
    with pytest.raises(ConfigError, match="'models'"):
        ExperimentConfig.from_dict(d)


def test_missing_model_file():
    d = small_mixing()
    d["models"]["gw"] = "specs/missing.json"
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig.from_dict(d, CONFIGS))


# ---------------------------------------------------------------- CLI


def write_cfg(tmp_path, d):
    for spec in (CONFIGS / "specs").glob("*.json"):
        (tmp_path / "specs").mkdir(exist_ok=True)
        (tmp_path / "specs" / spec.name).write_text(spec.read_text())
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(d))
    return path


def test_cli_pass(tmp_path, capsys):
    cfg = write_cfg(tmp_path, small_urn())
    assert main(["growth", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "r.json")]) == 0
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["seed"] == 9
    assert "[PASS]" in capsys.readouterr().out


def test_cli_fail_exit_code(tmp_path, capsys):
    d = small_urn()
    d["tolerances"]["ks"] = 1e-6
    cfg = write_cfg(tmp_path, d)
    assert main(["growth", "--config", str(cfg), "--out", str(tmp_path / "r.csv")]) == 1
    assert "FAILED criterion" in capsys.readouterr().err
    assert (tmp_path / "r.csv").read_text().count("false") >= 1


def test_cli_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["growth", "--config", str(bad), "--out", str(tmp_path / "r.csv")]) == 2
    assert "line 1" in capsys.readouterr().err


def test_cli_wrong_verb(tmp_path):
    cfg = write_cfg(tmp_path, small_urn())
    assert main(["gw", "--config", str(cfg), "--out", str(tmp_path / "r.csv")]) == 2


def test_cli_bad_seed(tmp_path):
    cfg = write_cfg(tmp_path, small_urn())
    assert main(["growth", "--config", str(cfg), "--seed", "-1", "--out", str(tmp_path / "r.csv")]) == 2


def test_cli_test_verb_on_directory(tmp_path):
    write_cfg(tmp_path, small_urn())
    (tmp_path / "second.json").write_text(json.dumps(small_mixing()))
    assert main(["test", "--config", str(tmp_path), "--out", str(tmp_path / "all.csv")]) == 0
    rows = (tmp_path / "all.csv").read_text().splitlines()
    assert len(rows) > 2
