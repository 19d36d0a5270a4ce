#!/usr/bin/env python3
"""
Run Monitoring and Profiling
Logging setup, per-run performance records and stage timing for heavy computations
"""

import json
import logging
import time
from contextlib import contextmanager
from datetime import datetime
from typing import Any, Dict, List, Optional


class RunMonitor:
    """Records every analysis run and summarizes durations and failures."""

    def __init__(self, log_file: str = "nlre_runs.log", level: str = 'INFO'):
        self.log_file = log_file
        self.level = level
        self.setup_logging()
        self.run_data: List[Dict[str, Any]] = []
        self.error_log: List[Dict[str, Any]] = []
        self.cache_hits = 0

    def setup_logging(self):
        """Configure the root logger once per process."""
        logging.basicConfig(
            level=getattr(logging, str(self.level).upper(), logging.INFO),
            format='%(asctime)s - %(levelname)s - %(message)s',
            handlers=[
                logging.FileHandler(self.log_file),
                logging.StreamHandler()
            ]
        )
        self.logger = logging.getLogger(__name__)

    def log_run(self, name: str, analysis: str, duration: float, success: bool = True,
                error: Optional[str] = None, cached: bool = False, config_hash: Optional[str] = None,
                stages: Optional[Dict[str, Any]] = None):
        """Record one run; failures also go to the error log. `stages` holds profiler timings."""
        entry = {
            'timestamp': datetime.now().isoformat(),
            'name': name,
            'analysis': analysis,
            'duration': duration,
            'success': success,
            'error': error,
            'cached': cached,
            'config_hash': config_hash,
            'stages': stages or {},
        }
        self.run_data.append(entry)
        if cached:
            self.cache_hits += 1

        if success:
            self.logger.info(f"Run {name} ({analysis}) completed: {duration:.2f}s{' [cached]' if cached else ''}")
            for stage, timing in (stages or {}).items():
                self.logger.debug(f"  stage {stage}: {timing['total_time']:.3f}s over {timing['calls']} call(s)")
        else:
            self.logger.error(f"Run {name} ({analysis}) failed: {error}")
            self.error_log.append(entry)

    def analyze_performance(self) -> Dict[str, Any]:
        """Duration statistics over the successful runs, with per-analysis counts."""
        if not self.run_data:
            return {"message": "No runs recorded"}

        successful = [entry for entry in self.run_data if entry['success']]
        if not successful:
            return {"message": "No successful runs to analyze", 'total_runs': len(self.run_data),
                    'success_rate': 0.0}

        durations = [entry['duration'] for entry in successful]
        per_analysis: Dict[str, int] = {}
        for entry in self.run_data:
            per_analysis[entry['analysis']] = per_analysis.get(entry['analysis'], 0) + 1

        return {
            'total_runs': len(self.run_data),
            'successful_runs': len(successful),
            'success_rate': len(successful) / len(self.run_data) * 100,
            'avg_duration': sum(durations) / len(durations),
            'min_duration': min(durations),
            'max_duration': max(durations),
            'cache_hits': self.cache_hits,
            'runs_per_analysis': per_analysis,
        }

    def get_error_summary(self) -> Dict[str, Any]:
        """Failures grouped by the prefix before the first colon (error class or 'validation')."""
        if not self.error_log:
            return {"message": "No errors logged"}

        error_types: Dict[str, int] = {}
        for entry in self.error_log:
            error_msg = entry.get('error') or 'Unknown error'
            error_type = error_msg.split(':')[0] if ':' in error_msg else error_msg
            error_types[error_type] = error_types.get(error_type, 0) + 1

        return {
            'total_errors': len(self.error_log),
            'error_types': error_types,
            'recent_errors': self.error_log[-5:],
        }

    def generate_report(self) -> str:
        """Human-readable summary for the console."""
        report = ["📊 RUN REPORT", "=" * 60]
        perf = self.analyze_performance()
        if 'total_runs' in perf and 'avg_duration' in perf:
            report.append(f"   Total Runs: {perf['total_runs']}")
            report.append(f"   Success Rate: {perf['success_rate']:.1f}%")
            report.append(f"   Avg Duration: {perf['avg_duration']:.2f}s")
            report.append(f"   Duration Range: {perf['min_duration']:.2f}s - {perf['max_duration']:.2f}s")
            report.append(f"   Cache Hits: {perf['cache_hits']}")
        errors = self.get_error_summary()
        if 'total_errors' in errors:
            report.append("❌ ERRORS:")
            for error_type, count in errors['error_types'].items():
                report.append(f"     • {error_type}: {count}")
        return "\n".join(report)

    def save_report(self, path: str) -> str:
        """Write performance and error summaries as JSON; returns the path."""
        payload = {'performance': self.analyze_performance(), 'errors': self.get_error_summary()}
        with open(path, 'w') as handle:
            json.dump(payload, handle, indent=2, default=str)
        self.logger.info(f"Run report saved to: {path}")
        return path


class PerformanceProfiler:
    """Wall-clock timing of named stages."""

    def __init__(self):
        self.profiles: Dict[str, List[float]] = {}

    @contextmanager
    def profile(self, stage: str):
        """Time the enclosed block under `stage`, including when it raises."""
        start_time = time.perf_counter()
        try:
            yield
        finally:
            self.profiles.setdefault(stage, []).append(time.perf_counter() - start_time)

    def get_profile_summary(self) -> Dict[str, Any]:
        """Calls and total/avg/min/max seconds per stage."""
        summary = {}
        for stage, durations in self.profiles.items():
            summary[stage] = {
                'calls': len(durations),
                'total_time': sum(durations),
                'avg_time': sum(durations) / len(durations),
                'min_time': min(durations),
                'max_time': max(durations),
            }
        return summary
