#!/usr/bin/env python3
"""
Result Cache
sqlite-backed store of per-scenario summaries keyed by the config hash
"""

import json
import logging
import sqlite3
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


@dataclass
class CacheEntry:
    config_hash: str
    analysis: str
    summary: Dict[str, Any]
    timestamp: float
    access_count: int
    runtime: float


class ResultCache:
    """Summaries of finished runs; least-used entries are evicted past max_entries."""

    def __init__(self, cache_dir: str = "cache", max_entries: int = 1000):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_entries = max_entries
        self.db_path = self.cache_dir / "results.db"
        self.hits = 0
        self.misses = 0
        self._init_database()

    def _init_database(self):
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS results (
                    config_hash TEXT NOT NULL,
                    mode TEXT NOT NULL,
                    analysis TEXT NOT NULL,
                    summary TEXT NOT NULL,
                    timestamp REAL NOT NULL,
                    access_count INTEGER DEFAULT 1,
                    runtime REAL NOT NULL,
                    PRIMARY KEY (config_hash, mode)
                )
            """)
            conn.execute("CREATE INDEX IF NOT EXISTS idx_timestamp ON results(timestamp);")
            conn.execute("CREATE INDEX IF NOT EXISTS idx_access_count ON results(access_count);")

    def get(self, config_hash: str, mode: str = 'production') -> Optional[CacheEntry]:
        """Stored summary for the hash and mode, bumping its access count; None on a miss."""
        with sqlite3.connect(self.db_path) as conn:
            row = conn.execute("""
                SELECT analysis, summary, timestamp, access_count, runtime FROM results
                WHERE config_hash = ? AND mode = ?
            """, (config_hash, mode)).fetchone()
            if row is None:
                self.misses += 1
                return None
            conn.execute("""
                UPDATE results SET access_count = access_count + 1
                WHERE config_hash = ? AND mode = ?
            """, (config_hash, mode))
        self.hits += 1
        analysis, summary, timestamp, access_count, runtime = row
        return CacheEntry(config_hash=config_hash, analysis=analysis, summary=json.loads(summary),
                          timestamp=timestamp, access_count=access_count + 1, runtime=runtime)

    def set(self, config_hash: str, analysis: str, summary: Dict[str, Any], runtime: float,
            mode: str = 'production'):
        """Store or replace the summary of a successful run, then evict if over capacity."""
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                INSERT OR REPLACE INTO results
                (config_hash, mode, analysis, summary, timestamp, runtime)
                VALUES (?, ?, ?, ?, ?, ?)
            """, (config_hash, mode, analysis, json.dumps(summary, sort_keys=True, default=str),
                  time.time(), runtime))
            self._cleanup_cache(conn)

    def _cleanup_cache(self, conn):
        """Drop the least-used, oldest entries down to 80% of capacity."""
        count = conn.execute("SELECT COUNT(*) FROM results").fetchone()[0]
        if count > self.max_entries:
            excess = count - int(self.max_entries * 0.8)
            conn.execute("""
                DELETE FROM results WHERE rowid IN (
                    SELECT rowid FROM results
                    ORDER BY access_count ASC, timestamp ASC
                    LIMIT ?
                )
            """, (excess,))
            logger.info(f"cache evicted {excess} entries")

    def get_stats(self) -> Dict[str, Any]:
        """Entry counts, runtime saved by hits and this session's hit/miss counters."""
        with sqlite3.connect(self.db_path) as conn:
            stats = {
                'total_entries': conn.execute("SELECT COUNT(*) FROM results").fetchone()[0],
                'avg_access_count': conn.execute("SELECT AVG(access_count) FROM results").fetchone()[0] or 0,
                'total_runtime_saved': conn.execute(
                    "SELECT SUM(runtime * (access_count - 1)) FROM results").fetchone()[0] or 0.0,
            }
            by_analysis = conn.execute("""
                SELECT analysis, COUNT(*) FROM results GROUP BY analysis ORDER BY analysis
            """).fetchall()
            stats['by_analysis'] = {name: n for name, n in by_analysis}
        stats['session_hits'] = self.hits
        stats['session_misses'] = self.misses
        return stats
