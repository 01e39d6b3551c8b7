"""
SQLite ledger of experiment runs: status, progress and the config hash used for reuse
"""
import logging
import sqlite3
import threading
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Union

from config import DB_PATH as DEFAULT_DB_PATH

logger = logging.getLogger(__name__)

_db_path: Optional[Path] = Path(DEFAULT_DB_PATH) if DEFAULT_DB_PATH else None

# Thread-local storage for database connections, one per ledger path
_thread_local = threading.local()

_COLUMNS = "run_id, status, created_at, updated_at, error_message, episodes_total, episodes_done, config_hash"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def configure(path: Union[str, Path], override: bool = False):
    """
    Select the ledger file

    Args:
        path: Default location (usually <output_dir>/runs.db)
        override: Replace a location already set through SMOOTH_RL_DB
    """
    global _db_path
    if _db_path is None or override or not DEFAULT_DB_PATH:
        _db_path = Path(path)
    logger.debug(f"Using run ledger {_db_path}")


def current_path() -> Optional[Path]:
    return _db_path


def get_connection() -> sqlite3.Connection:
    """Get the thread-local connection for the configured ledger"""
    if _db_path is None:
        raise RuntimeError("Run ledger path not configured")
    connections = getattr(_thread_local, "connections", None)
    if connections is None:
        connections = _thread_local.connections = {}
    key = str(_db_path)
    if key not in connections:
        connection = sqlite3.connect(key, timeout=30, check_same_thread=False)
        connection.row_factory = sqlite3.Row
        connections[key] = connection
    return connections[key]


@contextmanager
def get_db():
    """Context manager for database operations"""
    conn = get_connection()
    try:
        yield conn
        conn.commit()
    except Exception:
        conn.rollback()
        raise


def init_database():
    """Create the runs table and its indexes"""
    _db_path.parent.mkdir(parents=True, exist_ok=True)
    with get_db() as conn:
        cursor = conn.cursor()
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id TEXT PRIMARY KEY,
                status TEXT NOT NULL,
                created_at TEXT NOT NULL,
                updated_at TEXT NOT NULL,
                error_message TEXT,
                episodes_total INTEGER,
                episodes_done INTEGER,
                config_hash TEXT
            )
        """)
        cursor.execute("CREATE INDEX IF NOT EXISTS idx_status ON runs(status)")
        cursor.execute("CREATE INDEX IF NOT EXISTS idx_config_hash ON runs(config_hash)")


def create_run(run_id: str, episodes_total: int, config_hash: Optional[str] = None) -> bool:
    """
    Register a run as pending, replacing any earlier record with the same id

    Args:
        run_id: Run identifier (environment, algorithm, degree, seed)
        episodes_total: Number of episodes planned
        config_hash: Fingerprint of everything that determines the run's output

    Returns:
        True if successful, False otherwise
    """
    try:
        with get_db() as conn:
            now = _now()
            conn.execute(f"""
                INSERT OR REPLACE INTO runs ({_COLUMNS})
                VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            """, (run_id, "pending", now, now, None, episodes_total, 0, config_hash))
            return True
    except sqlite3.Error as e:
        logger.error(f"Error creating run {run_id}: {e}")
        return False


def update_run_status(
    run_id: str,
    status: str,
    error_message: Optional[str] = None,
    episodes_done: Optional[int] = None,
) -> bool:
    """
    Update run status

    Args:
        run_id: Run identifier
        status: New status (pending, processing, completed, failed)
        error_message: Error message if failed
        episodes_done: Number of finished episodes

    Returns:
        True if successful, False otherwise
    """
    try:
        with get_db() as conn:
            updates = ["status = ?", "updated_at = ?"]
            params = [status, _now()]

            if error_message is not None:
                updates.append("error_message = ?")
                params.append(error_message)

            if episodes_done is not None:
                updates.append("episodes_done = ?")
                params.append(episodes_done)

            params.append(run_id)
            conn.execute(f"UPDATE runs SET {', '.join(updates)} WHERE run_id = ?", params)
            return True
    except sqlite3.Error as e:
        logger.error(f"Error updating run {run_id}: {e}")
        return False


def get_run_status(run_id: str) -> Optional[Dict[str, Any]]:
    try:
        with get_db() as conn:
            row = conn.execute(f"SELECT {_COLUMNS} FROM runs WHERE run_id = ?", (run_id,)).fetchone()
            return dict(row) if row else None
    except sqlite3.Error as e:
        logger.error(f"Error reading run {run_id}: {e}")
        return None


def get_completed_run_by_hash(config_hash: str) -> Optional[Dict[str, Any]]:
    """
    Find the most recent completed run with the given fingerprint

    Args:
        config_hash: Run fingerprint

    Returns:
        Run dictionary or None
    """
    try:
        with get_db() as conn:
            row = conn.execute(f"""
                SELECT {_COLUMNS}
                FROM runs
                WHERE config_hash = ? AND status = 'completed'
                ORDER BY updated_at DESC
                LIMIT 1
            """, (config_hash,)).fetchone()
            return dict(row) if row else None
    except sqlite3.Error as e:
        logger.error(f"Error looking up run by hash: {e}")
        return None


def get_all_runs(status: Optional[str] = None) -> list[Dict[str, Any]]:
    """All runs ordered by id, optionally filtered by status"""
    try:
        with get_db() as conn:
            if status:
                rows = conn.execute(f"SELECT {_COLUMNS} FROM runs WHERE status = ? ORDER BY run_id", (status,))
            else:
                rows = conn.execute(f"SELECT {_COLUMNS} FROM runs ORDER BY run_id")
            return [dict(row) for row in rows.fetchall()]
    except sqlite3.Error as e:
        logger.error(f"Error listing runs: {e}")
        return []
