"""Session validation, window aggregation, splitting, and persistence."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skilltransfer.behavior_data import (
    ABSENT,
    ATTRIBUTE_COLUMNS,
    CLASS_COLUMN,
    CONTEXT_FIELDS,
    DATASET_COLUMNS,
    DOMAINS,
    OCCURRED,
    AttributeId,
    BehaviorRecord,
    DataSet,
    PlayerId,
    SessionLog,
    StimulusContext,
    dataset_to_csv,
    read_dataset_csv,
    read_session_jsonl,
    record_from_json,
    record_to_json,
    split,
    to_dataset,
    validate_session,
    write_dataset_csv,
    write_session_jsonl,
)
from skilltransfer.game_domain import ConditionKey, PlayerProfile, Scenario, run_session


def _context(**overrides) -> StimulusContext:
    fields = {f: False for f in CONTEXT_FIELDS}
    fields.update(overrides)
    return StimulusContext(**fields)


def _record(tick, behavior, player=PlayerId.ID1, **ctx) -> BehaviorRecord:
    return BehaviorRecord(player=player, tick=tick, context=_context(**ctx), behavior=behavior)


def _log(records, player=PlayerId.ID1) -> SessionLog:
    return SessionLog(player=player, seed=0, scenario_id="test", records=tuple(records))


MOVE = AttributeId.MOVEMENT


# --- validate_session -------------------------------------------------------

def test_empty_log_validates_clean():
    assert validate_session(_log([])) == []


def test_infeasible_riding_is_reported_with_its_tick():
    log = _log([_record(7, AttributeId.RIDING_HRS, horse_available=False)])
    violations = validate_session(log)
    assert len(violations) == 1
    assert violations[0].tick == 7
    assert violations[0].rule == "infeasible_behavior"
    assert "horse_available" in violations[0].message


def test_non_increasing_ticks_and_wrong_player_are_reported():
    log = _log(
        [
            _record(3, MOVE),
            _record(3, MOVE),
            _record(4, MOVE, player=PlayerId.ID2),
        ]
    )
    rules = [v.rule for v in validate_session(log)]
    assert rules == ["tick_order", "player_mismatch"]


def test_simulated_session_validates_clean(base_scenario, table1_pair):
    expert, _ = table1_pair
    scenario = replace(base_scenario, ticks_per_session=1000)
    log = run_session(scenario, expert, PlayerId.ID1, seed=11)
    assert len(log.records) == 1000
    assert validate_session(log) == []


# --- to_dataset -------------------------------------------------------------

def test_single_window_marks_seen_and_unseen_behaviors():
    records = [_record(t, MOVE) for t in range(4)]
    records.insert(2, _record(9, AttributeId.FIGHTING))
    data = to_dataset([_log(records)], window=5)
    assert data.n_rows == 1
    row = data.row_mapping(0)
    assert row["fighting"] == OCCURRED
    for column in ATTRIBUTE_COLUMNS:
        if column in ("fighting", "location", "movement"):
            continue
        assert row[column] == ABSENT
    # All five contexts are outdoor and four ticks moved, so the window
    # reads as an outdoor run.
    assert row["location"] == "outdoor"
    assert row["movement"] == "run"
    assert row[CLASS_COLUMN] == PlayerId.ID1.value


def test_two_logs_make_rows_for_both_players(base_scenario, table1_pair):
    expert, learner = table1_pair
    scenario = replace(base_scenario, ticks_per_session=50)
    logs = [
        run_session(scenario, expert, PlayerId.ID1, seed=1),
        run_session(scenario, learner, PlayerId.ID2, seed=2),
    ]
    data = to_dataset(logs, window=5)
    assert data.n_rows == 20
    labels = set(data.column_values(CLASS_COLUMN))
    assert labels == {PlayerId.ID1.value, PlayerId.ID2.value}


def test_window_must_be_positive_and_logs_nonempty():
    with pytest.raises(ValueError, match="window"):
        to_dataset([_log([])], window=0)
    with pytest.raises(ValueError, match="no session logs"):
        to_dataset([], window=5)


def test_location_majority_breaks_ties_indoor():
    records = [
        _record(0, MOVE, location_indoor=True),
        _record(1, MOVE, location_indoor=False),
    ]
    data = to_dataset([_log(records)], window=2)
    assert data.row_mapping(0)["location"] == "indoor"
    # One indoor walk tick against one outdoor run tick: walk wins the tie.
    assert data.row_mapping(0)["movement"] == "walk"


def test_fighting_occurrence_rate_matches_the_analytic_product():
    # Fighting happens only while an obstacle governs the tick, with
    # probability 0.7 there; the obstacle shows up half the time. At
    # window width 1 the occurred rate is their product, 0.35.
    profile = PlayerProfile(
        profile_id="obstacle-fighter",
        distributions={
            **{k: {MOVE: 1.0} for k in ConditionKey},
            ConditionKey.OBSTACLE: {AttributeId.FIGHTING: 0.7, MOVE: 0.3},
        },
    )
    scenario = Scenario(
        scenario_id="obstacle-only",
        ticks_per_session=10_000,
        location_indoor=0.5,
        obstacle_present=0.5,
        soldier_present=0.0,
        civilian_present=0.0,
        horse_available=0.0,
        climbable_present=0.0,
        person_facing=0.0,
    )
    log = run_session(scenario, profile, PlayerId.ID1, seed=2024)
    data = to_dataset([log], window=1)
    rate = data.column_values("fighting").count(OCCURRED) / data.n_rows
    assert rate == pytest.approx(0.35, abs=0.03)


@settings(max_examples=40, deadline=None)
@given(
    lengths=st.lists(st.integers(min_value=0, max_value=40), min_size=1, max_size=4),
    window=st.integers(min_value=1, max_value=7),
)
def test_row_count_is_full_windows_summed_over_logs(lengths, window):
    logs = [
        _log([_record(t, MOVE) for t in range(length)], player=PlayerId.ID1)
        for length in lengths
    ]
    data = to_dataset(logs, window)
    assert data.n_rows == sum(length // window for length in lengths)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31), ticks=st.integers(min_value=0, max_value=60))
def test_simulated_windows_always_pass_domain_validation(seed, ticks):
    # DataSet construction rejects out-of-domain cells, so building the
    # table is itself the assertion.
    scenario = Scenario(
        scenario_id="fuzz",
        ticks_per_session=ticks,
        location_indoor=0.5,
        obstacle_present=0.4,
        soldier_present=0.3,
        civilian_present=0.3,
        horse_available=0.4,
        climbable_present=0.4,
        person_facing=0.5,
    )
    from skilltransfer.game_domain import table1_profiles

    expert, learner = table1_profiles()
    logs = [
        run_session(scenario, expert, PlayerId.ID1, seed),
        run_session(scenario, learner, PlayerId.ID2, seed + 1),
    ]
    data = to_dataset(logs, window=3)
    assert data.columns == DATASET_COLUMNS


# --- split ------------------------------------------------------------------

def _synthetic_rows(n_per_class: int):
    rows = []
    for label in (PlayerId.ID1.value, PlayerId.ID2.value):
        for i in range(n_per_class):
            cells = []
            for column in ATTRIBUTE_COLUMNS:
                if column == "location":
                    cells.append("indoor" if i % 2 else "outdoor")
                elif column == "movement":
                    cells.append("none")
                elif column == "fighting":
                    cells.append(OCCURRED if i % 4 < 2 else ABSENT)
                else:
                    cells.append(ABSENT)
            rows.append(tuple(cells) + (label,))
    return tuple(rows)


def _synthetic_dataset(n_per_class: int) -> DataSet:
    return DataSet(
        columns=DATASET_COLUMNS, domains=dict(DOMAINS), rows=_synthetic_rows(n_per_class)
    )


def test_even_split_balances_both_classes():
    train, test = split(_synthetic_dataset(10), ratio=0.5, seed=3)
    assert (train.n_rows, test.n_rows) == (10, 10)
    for side in (train, test):
        counts = Counter(side.column_values(CLASS_COLUMN))
        assert counts == {"ID1": 5, "ID2": 5}


def test_split_is_seed_deterministic():
    data = _synthetic_dataset(10)
    assert split(data, 0.5, seed=9) == split(data, 0.5, seed=9)


def test_split_partitions_400_rows_exactly():
    data = _synthetic_dataset(200)
    train, test = split(data, ratio=0.5, seed=0)
    assert train.n_rows + test.n_rows == 400
    assert Counter(train.rows) + Counter(test.rows) == Counter(data.rows)


def test_split_rejects_bad_ratio_and_tiny_classes():
    data = _synthetic_dataset(10)
    for ratio in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError, match="ratio"):
            split(data, ratio)
    lopsided = DataSet(
        columns=DATASET_COLUMNS,
        domains=dict(DOMAINS),
        rows=_synthetic_rows(1),
    )
    with pytest.raises(ValueError, match="at least 2"):
        split(lopsided, 0.5)


@settings(max_examples=60, deadline=None)
@given(
    n1=st.integers(min_value=2, max_value=25),
    n2=st.integers(min_value=2, max_value=25),
    ratio=st.floats(min_value=0.1, max_value=0.9),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_split_partition_and_per_class_counts(n1, n2, ratio, seed):
    rows = _synthetic_rows(max(n1, n2))
    id1 = [r for r in rows if r[-1] == "ID1"][:n1]
    id2 = [r for r in rows if r[-1] == "ID2"][:n2]
    data = DataSet(columns=DATASET_COLUMNS, domains=dict(DOMAINS), rows=tuple(id1 + id2))
    train, test = split(data, ratio, seed)
    assert Counter(train.rows) + Counter(test.rows) == Counter(data.rows)
    train_counts = Counter(train.column_values(CLASS_COLUMN))
    assert train_counts["ID1"] == int(ratio * n1 + 0.5)
    assert train_counts["ID2"] == int(ratio * n2 + 0.5)


# --- persistence ------------------------------------------------------------

def test_record_json_line_has_the_documented_shape():
    record = _record(5, AttributeId.FIGHTING, obstacle_present=True)
    payload = json.loads(record_to_json(record))
    assert set(payload) == {"tick", "player", "context", "behavior"}
    assert set(payload["context"]) == set(CONTEXT_FIELDS)
    assert payload["behavior"] == "fighting"
    assert record_from_json(record_to_json(record)) == record


def test_session_jsonl_round_trip(tmp_path, base_scenario, table1_pair):
    expert, _ = table1_pair
    scenario = replace(base_scenario, ticks_per_session=40)
    log = run_session(scenario, expert, PlayerId.ID1, seed=5)
    path = tmp_path / "expert.jsonl"
    write_session_jsonl(log, path)
    loaded = read_session_jsonl(path, seed=log.seed, scenario_id=log.scenario_id)
    assert loaded == log


def test_empty_session_file_needs_an_explicit_player(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ValueError, match="no player"):
        read_session_jsonl(path)
    loaded = read_session_jsonl(path, player=PlayerId.ID2)
    assert loaded.player is PlayerId.ID2
    assert loaded.records == ()


def test_dataset_csv_round_trip(tmp_path):
    data = _synthetic_dataset(4)
    path = tmp_path / "dataset.csv"
    write_dataset_csv(data, path)
    assert dataset_to_csv(data).splitlines()[0] == ",".join(DATASET_COLUMNS)
    assert read_dataset_csv(path) == data


def test_dataset_csv_rejects_unknown_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("who,what\na,b\n", encoding="utf-8")
    with pytest.raises(ValueError, match="no domain"):
        read_dataset_csv(path)
    path.write_text("", encoding="utf-8")
    with pytest.raises(ValueError, match="empty"):
        read_dataset_csv(path)


def test_dataset_rejects_out_of_domain_cells():
    rows = _synthetic_rows(2)
    bad = rows[:1] + (("nonsense",) + rows[1][1:],)
    with pytest.raises(ValueError, match="not in domain"):
        DataSet(columns=DATASET_COLUMNS, domains=dict(DOMAINS), rows=bad)
