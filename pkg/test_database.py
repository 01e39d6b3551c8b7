import sqlite3

import database


def test_run_lifecycle(ledger):
    assert database.create_run("lqr_left__legendre_lsvi__N3__seed0", 500, "abc")
    record = database.get_run_status("lqr_left__legendre_lsvi__N3__seed0")
    assert record["status"] == "pending"
    assert record["episodes_total"] == 500 and record["episodes_done"] == 0

    database.update_run_status("lqr_left__legendre_lsvi__N3__seed0", "processing", episodes_done=25)
    database.update_run_status("lqr_left__legendre_lsvi__N3__seed0", "completed", episodes_done=500)
    record = database.get_run_status("lqr_left__legendre_lsvi__N3__seed0")
    assert record["status"] == "completed"
    assert record["episodes_done"] == 500
    assert record["error_message"] is None


def test_missing_run(ledger):
    assert database.get_run_status("nope") is None
    assert database.get_completed_run_by_hash("nope") is None


def test_completed_lookup_by_hash(ledger):
    database.create_run("a", 10, "same")
    database.create_run("b", 10, "same")
    database.update_run_status("b", "completed", episodes_done=10)
    assert database.get_completed_run_by_hash("same")["run_id"] == "b"

    database.update_run_status("a", "failed", error_message="diverged", episodes_done=3)
    failed = database.get_all_runs("failed")
    assert [row["run_id"] for row in failed] == ["a"]
    assert failed[0]["error_message"] == "diverged"
    assert [row["run_id"] for row in database.get_all_runs()] == ["a", "b"]


def test_create_replaces_an_earlier_record(ledger):
    database.create_run("a", 10, "old")
    database.update_run_status("a", "completed", episodes_done=10)
    database.create_run("a", 20, "new")
    record = database.get_run_status("a")
    assert record["status"] == "pending"
    assert record["config_hash"] == "new"


def test_ledger_file_has_runs_table(ledger):
    database.create_run("a", 1)
    with sqlite3.connect(ledger) as conn:
        assert conn.execute("SELECT COUNT(*) FROM runs").fetchone()[0] == 1
    assert database.current_path() == ledger
