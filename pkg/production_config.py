#!/usr/bin/env python3
"""
Run-Mode Configuration
Numerical settings for quick checks, regular runs and high-precision reproductions
"""

import importlib
import os
from pathlib import Path
from typing import Any, Dict, List


class ProductionConfig:
    """Mode-dependent numerics plus the fixed error and monitoring policy."""

    NUMERICS = {
        'fast': {
            'rtol': 1e-6,
            'atol': 1e-8,
            'sample_scale': 0.5,
            'dense_eig_limit': 1600,
            'zero_tol': 1e-7,
            'truncation_threshold': 1e-5,
            'recoil_points_per_unit': 8,
            'wigner_resolution': 81,
            'default_jobs': 1,
        },
        'production': {
            'rtol': 1e-8,
            'atol': 1e-10,
            'sample_scale': 1.0,
            'dense_eig_limit': 4096,
            'zero_tol': 1e-9,
            'truncation_threshold': 1e-6,
            'recoil_points_per_unit': 16,
            'wigner_resolution': 121,
            'default_jobs': 2,
        },
        'precise': {
            'rtol': 1e-10,
            'atol': 1e-13,
            'sample_scale': 2.0,
            'dense_eig_limit': 6400,
            'zero_tol': 1e-10,
            'truncation_threshold': 1e-8,
            'recoil_points_per_unit': 24,
            'wigner_resolution': 201,
            'default_jobs': 4,
        },
    }

    ERROR_HANDLING = {
        'exit_codes': {
            'success': 0,
            'validation': 2,
            'certification': 3,
        },
        'continue_sweep_on_error': True,
        'messages': {
            'validation': "Configuration rejected. Fix the reported field and run again.",
            'certification': "A numerical result could not be certified. Raise the cutoff or tighten tolerances.",
            'unexpected': "Unexpected failure. See the log file for the traceback.",
        },
    }

    MONITORING = {
        'enable_performance_tracking': True,
        'log_level': 'INFO',
        'log_file': 'nlre_runs.log',
        'alert_thresholds': {
            'run_time': 600.0,     # seconds
            'error_rate': 0.1,
        },
    }

    @classmethod
    def get_config(cls, mode: str = 'production') -> Dict[str, Any]:
        """Settings for the mode; unknown modes fall back to production."""
        if mode not in cls.NUMERICS:
            mode = 'production'
        return {
            'numerics': dict(cls.NUMERICS[mode]),
            'error_handling': cls.ERROR_HANDLING,
            'monitoring': dict(cls.MONITORING,
                               log_level=os.getenv('NLRE_LOG_LEVEL', cls.MONITORING['log_level']),
                               log_file=os.getenv('NLRE_LOG_FILE', cls.MONITORING['log_file'])),
            'mode': mode,
        }

    @classmethod
    def default_mode(cls) -> str:
        """NLRE_MODE, or production."""
        return os.getenv('NLRE_MODE', 'production')

    @classmethod
    def exit_code(cls, kind: str) -> int:
        """Exit status for success, validation or certification."""
        return cls.ERROR_HANDLING['exit_codes'][kind]

    @classmethod
    def validate_environment(cls, output_dir: str = None) -> Dict[str, bool]:
        """Importability of the numerical stack and writability of the output directory."""
        checks = {}
        for module in ('numpy', 'scipy', 'mpmath', 'dotenv'):
            try:
                importlib.import_module(module)
                checks[f'{module}_available'] = True
            except ImportError:
                checks[f'{module}_available'] = False

        target = Path(output_dir or os.getenv('NLRE_OUTPUT_DIR', 'results'))
        try:
            target.mkdir(parents=True, exist_ok=True)
            marker = target / '.write_check'
            marker.write_text('ok')
            marker.unlink()
            checks['output_dir_writable'] = True
        except OSError:
            checks['output_dir_writable'] = False
        return checks

    @classmethod
    def get_optimization_recommendations(cls, stats: Dict[str, Any], mode: str = 'production') -> List[str]:
        """Suggestions from RunMonitor.analyze_performance() output."""
        recommendations = []
        avg = stats.get('avg_duration', 0)
        if avg > cls.MONITORING['alert_thresholds']['run_time'] and mode != 'fast':
            recommendations.append("Runs are slow; try --mode fast for exploratory sweeps")
        if stats.get('total_runs', 0) > 1 and stats.get('jobs', 1) <= 1:
            recommendations.append("Sweeps ran serially; pass --jobs N to run points concurrently")
        error_rate = 1 - stats.get('success_rate', 100.0) / 100.0
        if error_rate > cls.MONITORING['alert_thresholds']['error_rate']:
            recommendations.append("Many runs failed certification; raise cutoffs or use --mode precise")
        if stats.get('cache_hits', 0) == 0 and stats.get('total_runs', 0) > 3:
            recommendations.append("Repeated sweeps can reuse results with --cache")
        return recommendations
