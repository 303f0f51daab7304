"""
Results Store for bklab
Keeps a SQLite history of experiment runs and their error-table rows
"""
import sqlite3
import json
from contextlib import contextmanager
from typing import Any, Dict, Iterable, List, Optional

from config import config
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class ResultsStore:
    """
    Manages the run history database
    One row per run plus the error rows it produced
    """

    def __init__(self, db_path: Optional[str] = None):
        """
        Initialize the store

        Args:
            db_path: Path to SQLite database file (defaults to BKLAB_DB_PATH)
        """
        self.db_path = db_path or config.DB_PATH
        self.init_database()

    def init_database(self):
        """Initialize database with required tables"""
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()

                cursor.execute("""
                    CREATE TABLE IF NOT EXISTS runs (
                        id INTEGER PRIMARY KEY AUTOINCREMENT,
                        name TEXT NOT NULL,
                        spec_hash TEXT NOT NULL,
                        status TEXT NOT NULL,
                        duration REAL,
                        output_dir TEXT,
                        summary TEXT,  -- JSON, e.g. engine and row count
                        created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                    )
                """)

                cursor.execute("""
                    CREATE TABLE IF NOT EXISTS error_rows (
                        id INTEGER PRIMARY KEY AUTOINCREMENT,
                        run_id INTEGER NOT NULL REFERENCES runs(id) ON DELETE CASCADE,
                        phantom TEXT NOT NULL,
                        lambda REAL NOT NULL,
                        method TEXT NOT NULL,
                        domain TEXT NOT NULL DEFAULT 'frame',
                        l1_error REAL NOT NULL,
                        reduction_pct REAL NOT NULL,
                        sigma REAL
                    )
                """)

                conn.commit()
                logger.debug(f"Results store ready: {self.db_path}")

        except Exception as e:
            logger.error(f"Database initialization failed: {e}")
            raise

    @contextmanager
    def get_connection(self):
        """Context manager for database connections"""
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            conn.close()

    def record_run(self, name: str, spec_hash: str, status: str, duration: float, output_dir: str,
                   rows: Iterable[Dict[str, Any]] = (), summary: Optional[Dict[str, Any]] = None) -> int:
        """
        Add a run and its error rows

        Args:
            name: Run name
            spec_hash: Hash of the canonical RunSpec JSON
            status: "completed" or "failed"
            duration: Wall time in seconds
            output_dir: Artifact directory
            rows: Error rows with phantom, lambda, method, l1_error, reduction_pct, sigma and optional domain
            summary: Extra JSON-serializable details

        Returns:
            int: Run ID
        """
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                cursor.execute("""
                    INSERT INTO runs (name, spec_hash, status, duration, output_dir, summary)
                    VALUES (?, ?, ?, ?, ?, ?)
                """, (name, spec_hash, status, duration, output_dir, json.dumps(summary or {})))
                run_id = cursor.lastrowid

                cursor.executemany("""
                    INSERT INTO error_rows (run_id, phantom, lambda, method, domain, l1_error, reduction_pct, sigma)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?)
                """, [(run_id, r["phantom"], r["lambda"], r["method"], r.get("domain", "frame"),
                       r["l1_error"], r["reduction_pct"], r.get("sigma")) for r in rows])

                conn.commit()
                logger.info(f"Run recorded: {name} ({status}, id={run_id})")
                return run_id

        except Exception as e:
            logger.error(f"Failed to record run {name}: {e}")
            raise

    def get_runs(self, limit: int = 20) -> List[Dict[str, Any]]:
        """
        Most recent runs first

        Args:
            limit: Maximum number of records to return
        """
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                cursor.execute("SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,))
                records = []
                for row in cursor.fetchall():
                    record = dict(row)
                    record["summary"] = json.loads(record["summary"]) if record["summary"] else {}
                    records.append(record)
                return records

        except Exception as e:
            logger.error(f"Failed to get run history: {e}")
            return []

    def get_error_rows(self, run_id: int, domain: Optional[str] = None) -> List[Dict[str, Any]]:
        """Error rows of one run in insertion order"""
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                if domain is None:
                    cursor.execute("SELECT * FROM error_rows WHERE run_id = ? ORDER BY id", (run_id,))
                else:
                    cursor.execute("SELECT * FROM error_rows WHERE run_id = ? AND domain = ? ORDER BY id",
                                   (run_id, domain))
                return [dict(row) for row in cursor.fetchall()]

        except Exception as e:
            logger.error(f"Failed to get error rows for run {run_id}: {e}")
            return []

    def best_reductions(self, phantom: str, method: str) -> List[Dict[str, Any]]:
        """Best recorded frame reduction of a method per frequency, across all runs"""
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                cursor.execute("""
                    SELECT lambda, MAX(reduction_pct) AS reduction_pct, COUNT(*) AS runs
                    FROM error_rows
                    WHERE phantom = ? AND method = ? AND domain = 'frame'
                    GROUP BY lambda
                    ORDER BY lambda
                """, (phantom, method))
                return [dict(row) for row in cursor.fetchall()]

        except Exception as e:
            logger.error(f"Failed to query reductions for {phantom}/{method}: {e}")
            return []

    def delete_run(self, run_id: int) -> bool:
        """Remove a run and its rows"""
        try:
            with self.get_connection() as conn:
                cursor = conn.cursor()
                cursor.execute("DELETE FROM error_rows WHERE run_id = ?", (run_id,))
                cursor.execute("DELETE FROM runs WHERE id = ?", (run_id,))
                deleted = cursor.rowcount > 0
                conn.commit()
                return deleted

        except Exception as e:
            logger.error(f"Failed to delete run {run_id}: {e}")
            return False
