import csv
import io
import json
import math
import os
import sys
from functools import partial
from unittest.mock import MagicMock, patch

import numpy as np
import pymongo
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.libs.errors import InvalidArgumentError, ReplicateFailureError, UsageError
from core.libs.costmodel import CostModel
from core.libs.geodesic import EXACT_ENDPOINTS, staircase_upper_bound
from core.libs.pointcloud import PointSet, Window, substream_key
from core.libs.harness import (
    ExperimentSpec,
    FrameWriter,
    MongoLogger,
    RecordWriter,
    ReplicateRunner,
    decode_frames,
    dumps,
    encode_frame,
    main,
    open_sink,
    parse_cli,
    read_frames,
    run_experiment,
    write_summary_csv,
)
from core.libs.harness import cli, orchestrator, tasks

PLANE = {"margin_scale": 5.0, "trust_scale": 2.0}


@pytest.fixture(autouse=True)
def _no_event_store(monkeypatch):
    monkeypatch.delenv("EFPP_MONGO_URI", raising=False)
    monkeypatch.delenv("EFPP_WORKERS", raising=False)


def _echo(task):
    stage, param, replicate = task
    return {"stage": stage, "param": param, "replicate": replicate}


def _fail_on(bad, task):
    if task[2] in bad:
        raise ValueError(f"replicate {task[2]} broke")
    return _echo(task)


# --- record codec ---

def test_frames_round_trip_with_partial_tail():
    a, b = {"x": 1, "y": [1, 2]}, {"z": "text"}
    buffer = encode_frame(a) + encode_frame(b)
    records, tail = decode_frames(buffer[:-3])
    assert records == [a]
    assert tail == encode_frame(b)[:-3]
    records, tail = decode_frames(buffer)
    assert records == [a, b]
    assert tail == b""


def test_malformed_frame_header():
    with pytest.raises(InvalidArgumentError):
        decode_frames(b"abcdefghij{}")


def test_frame_writer_output_reads_back(tmp_path):
    path = str(tmp_path / "run.frames")
    stream, writer = open_sink(path)
    assert isinstance(writer, FrameWriter)
    writer.write({"replicate": 0, "cost": np.float64(1.5)})
    writer.write({"replicate": 1, "cost": math.inf})
    stream.close()
    assert read_frames(path) == [{"cost": 1.5, "replicate": 0}, {"cost": None, "replicate": 1}]
    with open(path, "ab") as handle:
        handle.write(encode_frame({"late": True})[:-2])
    with pytest.raises(InvalidArgumentError):
        read_frames(path)


def test_dumps_is_json_safe_and_sorted():
    record = {"b": np.float64("nan"), "a": np.int64(3), "c": np.array([1, 2]), "d": np.bool_(True)}
    assert dumps(record) == '{"a": 3, "b": null, "c": [1, 2], "d": true}'


def test_record_writer_lines():
    stream = io.StringIO()
    writer = RecordWriter(stream)
    writer.write({"replicate": 0, "cost": 1.5})
    writer.write({"replicate": 1, "cost": 2.5})
    writer.flush()
    assert writer.count == 2
    lines = stream.getvalue().splitlines()
    assert [json.loads(line)["cost"] for line in lines] == [1.5, 2.5]


def test_summary_csv(tmp_path):
    path = tmp_path / "run.summary.csv"
    fields = write_summary_csv(path, [{"ell": 1, "mean": 2.0}, {"ell": 2, "extra": [1, 2]}])
    assert fields == ["ell", "extra", "mean"]
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert rows[0]["mean"] == "2.0"
    assert rows[1]["extra"] == "[1, 2]"


# --- experiment specs and the command line ---

def test_parse_cli_wandering_example():
    spec = parse_cli(["estimate-xi", "--d", "2", "--alpha", "2", "--lengths", "50,100,200,400",
                      "--replicates", "200", "--seed", "42"])
    assert spec.kind == "xi"
    assert spec.ells == [50.0, 100.0, 200.0, 400.0]
    assert (spec.d, spec.alpha, spec.replicates, spec.seed) == (2, 2.0, 200, 42)


def test_missing_seed_warns_and_defaults(capsys):
    spec = parse_cli(["estimate-mu", "--lengths", "10,20"])
    assert spec.seed == 0
    assert "no --seed" in capsys.readouterr().err


def test_parse_cli_usage_errors():
    with pytest.raises(UsageError):
        parse_cli(["estimate-mu", "--lengths", "10,abc", "--seed", "1"])
    with pytest.raises(UsageError):
        parse_cli(["percolate", "--seed", "1"])
    with pytest.raises(UsageError) as err:
        parse_cli(["estimate-mu", "--seed", "1"])
    assert err.value.field == "lengths"
    with pytest.raises(UsageError) as err:
        parse_cli(["tree", "--d", "1", "--seed", "1"])
    assert err.value.field == "d"


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("EFPP_WORKERS", "3")
    assert parse_cli(["lens-check", "--seed", "1"]).workers == 3
    assert parse_cli(["lens-check", "--seed", "1", "--workers", "2"]).workers == 2
    monkeypatch.setenv("EFPP_WORKERS", "many")
    with pytest.raises(UsageError):
        parse_cli(["lens-check", "--seed", "1"])


def test_config_then_flags(tmp_path):
    path = tmp_path / "mu.json"
    path.write_text(json.dumps({"kind": "mu", "lambda": 2.0, "replicates": 50, "ells": [10, 20], "seed": 5}))
    spec = parse_cli(["estimate-mu", "--config", str(path), "--replicates", "60"])
    assert (spec.density, spec.replicates, spec.seed) == (2.0, 60, 5)
    assert spec.ells == [10, 20]
    with pytest.raises(UsageError) as err:
        parse_cli(["estimate-chi", "--config", str(path)])
    assert err.value.field == "config"


def test_mode_and_param_flags():
    spec = parse_cli(["geodesic", "--lengths", "5", "--mode", "exact", "--seed", "1"])
    assert spec.params["mode"] == EXACT_ENDPOINTS
    spec = parse_cli(["sample", "--seed", "1", "--param", "side=4"])
    assert spec.params["side"] == 4


def test_experiment_spec_budget_and_keys():
    assert ExperimentSpec("mu", replicates=30, budget=0.5).effective_replicates == 15
    assert ExperimentSpec("mu", replicates=30, budget=0.01).effective_replicates == 1
    with pytest.raises(UsageError):
        ExperimentSpec.from_dict({"kind": "mu", "colour": "red"})
    with pytest.raises(UsageError) as err:
        ExperimentSpec("lens-properties", window={"bogus": 1}).validate()
    assert err.value.field == "window"


# --- replicate runner ---

def test_runner_stamps_and_isolates_failures():
    stream = io.StringIO()
    runner = ReplicateRunner("demo", 7, writer=RecordWriter(stream), timings=True)
    records = runner(partial(_fail_on, {3}), [(0, None, r) for r in range(20)])
    assert len(records) == 20
    assert records[3]["error"].startswith("ValueError")
    assert records[5]["substream"] == substream_key(5, 0)
    assert all(r["experiment"] == "demo" and r["seed"] == 7 for r in records)
    assert all("wall_time" in r for r in records)
    assert runner.failures == 1
    assert runner.failure_fraction == pytest.approx(0.05)
    assert len(stream.getvalue().splitlines()) == 20


def test_runner_aborts_past_the_failure_limit():
    runner = ReplicateRunner("demo", 7)
    with pytest.raises(ReplicateFailureError):
        runner(partial(_fail_on, {1, 2, 3}), [(0, None, r) for r in range(20)])


def test_runner_output_is_independent_of_worker_count():
    task = partial(tasks.lens_replicate, d=2, alpha=2.0, seed=3, trials=20)
    work = [(0, None, r) for r in range(4)]
    serial = ReplicateRunner("lens", 3, workers=1)(task, work)
    pooled = ReplicateRunner("lens", 3, workers=2)(task, work)
    assert [dumps(r) for r in serial] == [dumps(r) for r in pooled]


# --- experiments end to end ---

def test_oracle_suite_matches_every_instance():
    spec = ExperimentSpec("oracle-suite", seed=3, params={"instances": 10})
    records, summary = run_experiment(spec)
    assert len(records) == 10
    assert summary["result"]["matches"] == 10
    assert summary["passed"] is True


def test_runs_are_deterministic():
    spec = dict(kind="mu", d=1, ells=[20.0, 40.0], replicates=10, seed=9, params={"min_replicates": 10})
    outputs = []
    for _ in range(2):
        stream = io.StringIO()
        _, summary = run_experiment(ExperimentSpec(**spec), RecordWriter(stream))
        outputs.append((stream.getvalue(), dumps(summary)))
    assert outputs[0] == outputs[1]
    assert len(summary["rows"]) == 2


def test_lens_experiment_passes():
    _, summary = run_experiment(ExperimentSpec("lens-properties", seed=2, replicates=2, params={"trials": 50}))
    assert summary["passed"] is True
    assert summary["result"]["violations"] == 0
    assert summary["result"]["violations_by_h"] == {"inf": 0, "0.5": 0, "2": 0}


def test_lens_replicate_checks_every_truncation():
    record = tasks.lens_replicate((0, None, 1), d=2, alpha=2.5, seed=4, trials=40, h_values=(None, 0.25, 3.0))
    assert [entry["h"] for entry in record["by_h"]] == [None, 0.25, 3.0]
    assert record["passed"] is True
    assert set(record["violations"]) == {"convexity", "scaling", "doubling_bound", "excess_bound", "middle_tube"}
    spec = ExperimentSpec("lens-properties", seed=2, replicates=1, params={"trials": 20, "h_values": [1.5]})
    _, summary = run_experiment(spec)
    assert set(summary["result"]["violations_by_h"]) == {"inf", "1.5"}


def test_oracle_suite_runs_the_structural_audits():
    records, summary = run_experiment(ExperimentSpec("oracle-suite", seed=5, params={"instances": 12}))
    assert summary["result"]["audits"] == {"metric_axioms": 0, "subpath": 0, "doubling_back": 0, "crossing": 0,
                                           "staircase": 0}
    assert all(r["audit_violations"] == 0 for r in records)
    assert summary["passed"] is True


def test_staircase_violation_is_flagged():
    ps = PointSet.from_points([[1.0, 1.0], [2.0, 1.2], [3.0, 1.0]], Window.cube(4.0, 2))
    x, y = np.array([0.5, 1.0]), np.array([3.5, 1.0])
    cm = CostModel(2.0)
    bound, _ = staircase_upper_bound(ps, cm, x, y)
    assert tasks.staircase_violations(ps, cm, x, y, bound) == 0
    assert tasks.staircase_violations(ps, cm, x, y, bound + 1.0) == 1


def test_geodesic_experiment_reports_audits():
    spec = ExperimentSpec("geodesic", ells=[4.0, 8.0], replicates=3, seed=6, window=dict(PLANE))
    records, summary = run_experiment(spec)
    assert summary["result"]["audits"] == {"staircase": 0, "doubling_back": 0}
    assert summary["passed"] is True
    assert all(set(r["audits"]) == {"staircase", "doubling_back"} for r in records)


def test_xi_experiment_reports_the_upper_interval_end():
    spec = dict(kind="xi", ells=[4.0, 8.0, 16.0], replicates=10, seed=7, window=dict(PLANE))
    _, loose = run_experiment(ExperimentSpec(**spec, params={"min_replicates": 10, "xi_upper": 10.0}))
    _, tight = run_experiment(ExperimentSpec(**spec, params={"min_replicates": 10, "xi_upper": -1.0}))
    assert loose["result"]["upper_ci_within"] is True
    assert tight["result"]["upper_ci_within"] is False
    assert loose["passed"] == tight["passed"]


def test_directional_trees_check_coalescence_and_stability():
    spec = ExperimentSpec("directional-trees", replicates=2, seed=8, window=dict(PLANE), params={"radius": 6.0})
    records, summary = run_experiment(spec)
    result = summary["result"]
    assert result["coalescence_failures"] == 0
    assert result["coalescence_pairs"] == sum(max(r["covered"] - 1, 0) for r in records)
    assert summary["passed"] == (result["stable_fraction"] >= orchestrator.STABILITY_THRESHOLD)


def _directional_record(compared, unchanged, failures):
    return {"stability": {"compared": compared, "unchanged": unchanged}, "coalescence_pairs": 10,
            "coalescence_failures": failures}


def test_directional_predicate():
    summarize = orchestrator._directional_summary
    assert summarize([_directional_record(100, 96, 0), _directional_record(100, 95, 0)])[1] is True
    assert summarize([_directional_record(100, 90, 0)])[1] is False
    assert summarize([_directional_record(100, 100, 1)])[1] is False
    assert summarize([_directional_record(0, 0, 0)])[1] is False


def test_main_exit_codes(tmp_path, monkeypatch):
    assert main(["estimate-mu", "--seed", "1"]) == cli.EXIT_USAGE
    out = tmp_path / "lens.jsonl"
    code = main(["lens-check", "--replicates", "2", "--trials", "30", "--seed", "1", "--out", str(out)])
    assert code == cli.EXIT_PASS
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(lines) == 3
    assert lines[-1]["format"] == "summary"
    assert "rows" not in lines[-1]
    assert (tmp_path / "lens.jsonl.summary.csv").exists()

    framed = tmp_path / "lens.frames"
    code = main(["lens-check", "--replicates", "2", "--trials", "30", "--seed", "1", "--out", str(framed)])
    assert code == cli.EXIT_PASS
    frames = read_frames(str(framed))
    assert len(frames) == 3
    assert frames[-1]["format"] == "summary"

    def broken(spec, writer=None, logger=None):
        raise ReplicateFailureError("too many failures")
    monkeypatch.setattr(cli, "run_experiment", broken)
    assert main(["lens-check", "--seed", "1", "--out", str(out)]) == cli.EXIT_FAIL


# --- event logging ---

def test_logger_without_uri_is_console_only(capsys):
    logger = MongoLogger()
    assert not logger.connected
    entry = logger.log_event("experiment_started", {"experiment": "demo"})
    assert entry["event_type"] == "experiment_started"
    assert "[EVENT] experiment_started" in capsys.readouterr().err


def test_logger_writes_to_collection():
    with patch("pymongo.MongoClient") as client_cls:
        client = client_cls.return_value
        logger = MongoLogger("mongodb://events:27017", echo=False)
        assert logger.connected
        logger.log_event("replicate_failed", {"replicate": 3})
        collection = client.__getitem__.return_value.__getitem__.return_value
        collection.insert_one.assert_called_once()
        assert collection.insert_one.call_args[0][0]["details"] == {"replicate": 3}
        logger.close()
        client.close.assert_called_once()


def test_logger_falls_back_when_server_is_down():
    with patch("pymongo.MongoClient", MagicMock(side_effect=pymongo.errors.ConnectionFailure("down"))):
        logger = MongoLogger("mongodb://nowhere:27017")
    assert not logger.connected
