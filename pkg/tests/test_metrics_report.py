import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ainav.bench.metrics as metrics_mod
from ainav.bench import (
    Difficulty,
    MetricsRow,
    ReportError,
    Task,
    TaskSpec,
    TrialRecord,
    aggregate,
    emit_report,
    read_report,
    render,
    run_suite,
    run_trial,
)
from ainav.bench.report import markdown_to_json, parse_json
from ainav.executor import EpisodeConfig, FailureClass

from oracles import metric_oracle

TOL = 1e-9

_outcome = st.tuples(
    st.booleans(),
    st.floats(1.0, 119.0),
    st.floats(0.0, 30.0),
    st.floats(0.0, 90.0),
    st.floats(0.0, 40.0),
)


def records(outcomes):
    return [TrialRecord(i, *o) for i, o in enumerate(outcomes)]


def close(a, b):
    return (a is None and b is None) or (a is not None and b is not None and abs(a - b) <= TOL)


@given(st.lists(_outcome, min_size=1, max_size=20))
def test_aggregate_matches_definitions(outcomes):
    row = aggregate(records(outcomes), "s", "m")
    expected = metric_oracle(outcomes)
    assert all(close(row.metrics()[k], v) for k, v in expected.items())


@given(st.lists(_outcome, min_size=1, max_size=20))
def test_ot_identity(outcomes):
    row = aggregate(records(outcomes), "s", "m")
    ots = row.OTS if row.OTS is not None else 0.0
    assert abs(row.OT - (row.SR * ots + (1 - row.SR) * 120.0)) <= TOL
    if row.SR > 0:
        assert row.OTS <= row.OT + TOL


@given(st.lists(_outcome, min_size=1, max_size=20), st.randoms())
def test_order_does_not_matter(outcomes, rnd):
    recs = records(outcomes)
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    assert aggregate(recs, "s", "m") == aggregate(shuffled, "s", "m")


def test_seven_of_ten():
    outcomes = [(True, 30.0 + i, 5.0, 25.0 + i, 10.0) for i in range(7)] + [(False, 50.0, 5.0, 45.0, 3.0)] * 3
    row = aggregate(records(outcomes), "s", "m")
    assert row.SR == pytest.approx(0.7, abs=TOL)
    assert row.OT == pytest.approx((sum(30.0 + i for i in range(7)) + 3 * 120.0) / 10, abs=TOL)
    assert row.failure_histogram == {"IntraSkillFailure": 3}


def test_failed_trials_count_the_full_budget():
    row = aggregate([TrialRecord(0, False, 12.5, 1.0, 11.5, 4.0, FailureClass.SKILL_UNFINISHED)], "s", "m")
    assert row.OT == 120.0
    assert (row.OTS, row.PT, row.ET, row.TLS) == (None, None, None, None)
    assert row.failure_histogram == {"SkillExecutionUnfinished": 1}


def test_all_success_has_ot_equal_ots():
    row = aggregate(records([(True, 40.0, 4.0, 36.0, 9.0), (True, 44.0, 4.0, 40.0, 9.5)]), "s", "m")
    assert row.OT == row.OTS == 42.0


def test_row_validation():
    with pytest.raises(ValueError):
        MetricsRow("s", "m", 1.5, 1.0, None, None, None, None, 1)
    with pytest.raises(ValueError):
        aggregate([], "s", "m")


# -- reports ------------------------------------------------------------------------------------


@pytest.fixture
def rows():
    good = aggregate(records([(True, 40.123456789, 4.0, 36.123456789, 9.0), (False, 0, 0, 0, 0)]), "box_obstruction_M", "rule:none")
    bad = aggregate(records([(False, 60.0, 2.0, 58.0, 3.0)]), "box_usage_H", "rule:noreplan")
    return [good, bad]


def test_undefined_cells_render_as_dash(rows):
    csv_text = render(rows, "csv")
    assert csv_text.splitlines()[2] == "box_usage_H,rule:noreplan,0.000000,120.000000,-,-,-,-"
    md = render(rows, "markdown")
    assert md.splitlines()[0] == "| scenario | method | SR | OT | OTS | PT | ET | TLS |"
    assert "| - | - | - | - |" in md


def test_csv_and_json_carry_the_same_numbers(tmp_path, rows):
    a = read_report(emit_report(rows, tmp_path / "t.csv"))
    b = read_report(emit_report(rows, tmp_path / "t.json"))
    assert a == b
    assert a[0]["OTS"] == 40.123457
    payload = json.loads((tmp_path / "t.json").read_text())
    assert payload[1]["OTS"] is None and payload[0]["trials"] == 2


def test_markdown_round_trips_through_the_json_reader(rows):
    assert parse_json(markdown_to_json(render(rows, "markdown"))) == parse_json(render(rows, "json"))


def test_format_override_and_extension(tmp_path, rows):
    path = emit_report(rows, tmp_path / "table.txt", "markdown")
    assert read_report(path, "markdown")[1]["scenario"] == "box_usage_H"
    assert read_report(emit_report(rows, tmp_path / "t.md"))[0]["method"] == "rule:none"


def test_unwritable_path(tmp_path, rows):
    with pytest.raises(ReportError, match="cannot write"):
        emit_report(rows, tmp_path / "missing" / "dir" / "t.csv")
    with pytest.raises(ReportError):
        render([], "csv")


# -- suite runner -----------------------------------------------------------------------------


def test_crashing_episode_counts_as_intra_skill(monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("simulated crash")

    monkeypatch.setattr(metrics_mod, "run_episode", boom)
    rec, trace = run_trial(TaskSpec(Task.BOX_OBSTRUCTION, Difficulty.L, 0), EpisodeConfig())
    assert rec == TrialRecord(0, False, 120.0, 0.0, 0.0, 0.0, FailureClass.INTRA_SKILL)
    assert trace == ""


def test_suite_writes_traces_and_is_worker_independent(tmp_path):
    specs = [TaskSpec(Task.BOX_OBSTRUCTION, Difficulty.L, 3)]
    serial = run_suite(specs, 2, workers=1, trace_dir=tmp_path)
    parallel = run_suite(specs, 2, workers=2)
    assert serial == parallel
    assert serial[0].SR == 1.0 and serial[0].trials == 2
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["box_obstruction_L_rule_none_seed3.jsonl", "box_obstruction_L_rule_none_seed4.jsonl"]
    with pytest.raises(ValueError):
        run_suite(specs, 0)
