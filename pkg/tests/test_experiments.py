import json
from types import SimpleNamespace

import pytest

from src import logging_setup
from src.experiments import ReplicationTask, report, run, run_tasks, tasks_for
from src.families import preset
from src.protocol import CSV_COLUMNS, read_csv
from src.renewal import LatticeError
from src.logging_setup import set_log_context
from src.settings_store import ConfigError, ExperimentConfig, apply_overrides
from src.statistics import StatisticsError
from src.utils import derive_seed


def config(tmp_path, name="run", **overrides):
    base = ExperimentConfig(out_csv=str(tmp_path / f"{name}.csv"), out_json=str(tmp_path / f"{name}.json"))
    return apply_overrides(base, overrides)


def test_bst_run_writes_one_row_per_replication(tmp_path):
    result = run(config(tmp_path))
    assert len(result.rows) == 4
    assert all(st.N == 1000 and st.n == 1000 for st in result.rows)
    assert [st.rep for st in result.rows] == [0, 1, 2, 3]
    assert [st.seed for st in result.rows] == [derive_seed(7, 1000, i) for i in range(4)]

    lines = result.csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5

    summaries = json.loads(result.json_path.read_text(encoding="utf-8"))
    assert len(summaries) == 1
    assert summaries[0]["alpha_hat"] == 1.0
    assert summaries[0]["R"] == 4
    assert summaries[0]["mean_D_n"] is None


def test_rerun_is_byte_identical(tmp_path):
    a = run(config(tmp_path, "a", mode="traced", n_grid="200, 500"))
    b = run(config(tmp_path, "b", mode="traced", n_grid="200, 500"))
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
    assert a.json_path.read_bytes() == b.json_path.read_bytes()


def test_parallel_matches_serial(tmp_path):
    serial = run(config(tmp_path, "serial", family="mary", family_params="m=3", n_grid="300",
                        replications=6, mode="traced", workers=1))
    parallel = run(config(tmp_path, "parallel", family="mary", family_params="m=3", n_grid="300",
                          replications=6, mode="traced", workers=2))
    assert serial.csv_path.read_bytes() == parallel.csv_path.read_bytes()
    assert serial.json_path.read_bytes() == parallel.json_path.read_bytes()


def test_run_tasks_reports_progress():
    spec = preset("bst")
    seen = []
    tasks = tasks_for(ExperimentConfig(replications=3), spec, 50)
    rows = run_tasks(tasks, progress=lambda done, total: seen.append((done, total)))
    assert seen == [(1, 3), (2, 3), (3, 3)]
    assert [r.rep for r in rows] == [0, 1, 2]


def test_tasks_carry_canonical_label():
    spec = preset("trie", p=(0.3, 0.7))
    tasks = tasks_for(ExperimentConfig(replications=2, k_grid=[5]), spec, 100)
    assert tasks[0] == ReplicationTask(family="trie:p=0.3/0.7", n=100, rep=0, seed=derive_seed(7, 100, 0),
                                       mode="counts", epsilon=0.25, beta=2.0, ks=(5,),
                                       context="trie:p=0.3/0.7 n=100")


def test_lattice_family_is_refused_with_renewal_check(tmp_path):
    cfg = config(tmp_path, family="trie", family_params="p=0.5/0.5", renewal_check=True)
    with pytest.raises(LatticeError):
        run(cfg)
    assert not (tmp_path / "run.csv").exists()


def test_lattice_family_runs_without_check(tmp_path):
    result = run(config(tmp_path, family="trie", family_params="p=0.5/0.5", n_grid="100"))
    assert all(st.n == 100 and st.N > 1 for st in result.rows)
    assert result.summaries[0].ks_statistic is None


def test_report_recomputes_summaries(tmp_path):
    result = run(config(tmp_path, mode="traced", n_grid="100, 300"))
    out = tmp_path / "again.json"
    summaries = report(result.csv_path, out)
    assert [s.n for s in summaries] == [100, 300]
    for new, old in zip(summaries, result.summaries):
        assert new.q_hat == pytest.approx(old.q_hat)
        assert new.mean_D_n == pytest.approx(old.mean_D_n)
    # sum_sq_dev steht nicht in der CSV
    assert json.loads(out.read_text(encoding="utf-8"))[0]["sum_sq_dev_ratio"] is None
    assert len(read_csv(result.csv_path)) == 4 * 2


def test_report_rejects_broken_csv(tmp_path):
    empty = tmp_path / "leer.csv"
    empty.write_text(",".join(CSV_COLUMNS) + "\n", encoding="utf-8")
    with pytest.raises(StatisticsError):
        report(empty, tmp_path / "x.json")
    partial = tmp_path / "teil.csv"
    partial.write_text("rep,seed\n0,1\n", encoding="utf-8")
    with pytest.raises(StatisticsError, match="Spalten fehlen"):
        report(partial, tmp_path / "x.json")


def test_renewal_check_fills_summary(tmp_path):
    cfg = config(tmp_path, renewal_check=True,
                 **{"renewal.h": 0.01, "renewal.t_max": 10.0, "heavy.K": 10, "heavy.runs": 200})
    result = run(cfg)
    s = result.summaries[0]
    assert result.renewal is not None
    assert s.U_hat_t_max == pytest.approx(2.0, abs=0.01)
    assert s.W_t_max == pytest.approx(-2.0, abs=0.02)
    assert s.W_limit_predicted == pytest.approx(-2.0)
    assert s.heavy_K == 10
    assert s.heavy_renewal == pytest.approx(199.0, rel=0.01)
    assert s.heavy_leading == pytest.approx(200.0)
    assert s.heavy_mc == pytest.approx(s.heavy_renewal, rel=0.05)
    saved = json.loads(result.json_path.read_text(encoding="utf-8"))[0]
    assert saved["heavy_mc"] == pytest.approx(s.heavy_mc)
    assert saved["U_hat_t_max"] == pytest.approx(s.U_hat_t_max)


def test_renewal_fields_empty_without_check(tmp_path):
    result = run(config(tmp_path))
    assert result.renewal is None
    assert result.summaries[0].U_hat_t_max is None and result.summaries[0].heavy_mc is None


def test_renewal_check_rejects_uneven_grid(tmp_path):
    cfg = config(tmp_path, renewal_check=True, **{"renewal.h": 0.3, "renewal.t_max": 1.0})
    with pytest.raises(ConfigError):
        run(cfg)
    assert not (tmp_path / "run.csv").exists()


def test_replication_runs_in_task_context(monkeypatch):
    seen = []
    monkeypatch.setattr("src.experiments._replicate_in_context", lambda task: seen.append(logging_setup._context) or SimpleNamespace(rep=task.rep))
    task = tasks_for(ExperimentConfig(replications=2), preset("bst"), 50)[0]
    set_log_context("aussen")
    try:
        run_tasks([task])
        assert seen == ["bst n=50"]
        assert logging_setup._context == "aussen"
    finally:
        set_log_context(None)
