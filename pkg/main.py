#!/usr/bin/env python3
"""
NLRE Scenario Runner
Command-line entry point: run a scenario file, sweep one of its parameters, check the environment.

    python main.py run configs/standard_cat_d3.toml
    python main.py sweep configs/confinement.toml --jobs 3
    python main.py sweep configs/confinement.toml --axis scheme.h_star --values 10,15,20,25,30
"""

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from analyses import get_available_analyses, run_analysis
from artifacts import TOOL_VERSION, ArtifactWriter, build_manifest, write_csv, write_json
from debug_monitor import PerformanceProfiler, RunMonitor
from enhanced_cache import ResultCache
from errors import CertificationError, ConfigValidationError
from production_config import ProductionConfig
from scenario_config import ScenarioConfig, load_config, validate_document

load_dotenv()

logger = logging.getLogger(__name__)


def _default_out() -> str:
    return os.getenv('NLRE_OUTPUT_DIR', 'results')


def _scalar_summary(summary: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in summary.items() if isinstance(v, (int, float, str, bool)) or v is None}


def execute(config: ScenarioConfig, out_root: str, mode: str,
            profiler: Optional[PerformanceProfiler] = None) -> Dict[str, Any]:
    """Run one validated scenario and commit its artifacts; nothing is written on failure."""
    settings = ProductionConfig.get_config(mode)['numerics']
    writer = ArtifactWriter(config.output_dir(out_root))
    profiler = profiler or PerformanceProfiler()
    try:
        with profiler.profile(config.analysis):
            summary = run_analysis(config, settings, writer)
        writer.commit(build_manifest(config, mode, summary))
    except BaseException:
        writer.discard()
        raise
    return summary


def _run_point(document: Dict[str, Any], source: Optional[str], out_root: str, mode: str) -> Dict[str, Any]:
    """Worker body for sweeps: failures are returned, not raised."""
    start = time.time()
    try:
        config = validate_document(document, source)
        summary = execute(config, out_root, mode)
        return {'status': 'ok', 'summary': _scalar_summary(summary), 'error': None,
                'duration': time.time() - start}
    except ConfigValidationError as exc:
        status = 'validation'
        error = str(exc)
    except CertificationError as exc:
        status = 'certification'
        error = f"{type(exc).__name__}: {exc}"
    except ValueError as exc:
        status = 'validation'
        error = str(exc)
    except Exception as exc:
        logger.exception(f"sweep point failed unexpectedly: {exc}")
        status = 'error'
        error = f"{type(exc).__name__}: {exc}"
    return {'status': status, 'summary': {}, 'error': error, 'duration': time.time() - start}


def parse_values(raw: str) -> List[Any]:
    """Comma-separated sweep values; JSON literals where possible, strings otherwise."""
    values = []
    for item in raw.split(','):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(json.loads(item))
        except json.JSONDecodeError:
            values.append(item)
    return values


def sweep_plan(base: ScenarioConfig, axis: Optional[str], raw_values: Optional[str]) -> Tuple[str, List[Any]]:
    """Axis and values from the command line, falling back to the scenario's [sweep] table."""
    planned = base.section('sweep')
    axis = axis or planned.get('axis')
    if not axis:
        raise ConfigValidationError("sweep needs --axis or a [sweep] axis in the scenario file")
    values = parse_values(raw_values) if raw_values is not None else list(planned.get('values', []))
    if not values:
        raise ConfigValidationError("sweep needs at least one value")
    return axis, values


def cmd_run(args, monitor: RunMonitor) -> int:
    codes = ProductionConfig.ERROR_HANDLING['exit_codes']
    messages = ProductionConfig.ERROR_HANDLING['messages']
    start = time.time()
    name, analysis, config_hash = args.config, 'unknown', None
    try:
        config = load_config(args.config)
        name, analysis, config_hash = config.name, config.analysis, config.config_hash
        if args.cache:
            cache = ResultCache(os.getenv('NLRE_CACHE_DIR', 'cache'))
            hit = cache.get(config.config_hash, args.mode)
            if hit is not None and (config.output_dir(args.out) / 'manifest.json').exists():
                print(f"⚡ Cached result for {config.name} ({config.config_hash})")
                print(json.dumps(hit.summary, indent=2, sort_keys=True))
                monitor.log_run(name, analysis, time.time() - start, cached=True, config_hash=config_hash)
                return codes['success']
        print(f"🔬 Running {config.analysis} scenario '{config.name}' [{args.mode} mode]")
        profiler = PerformanceProfiler()
        summary = execute(config, args.out, args.mode, profiler)
        duration = time.time() - start
        if args.cache:
            cache.set(config.config_hash, config.analysis, _scalar_summary(summary), duration, args.mode)
        monitor.log_run(name, analysis, duration, config_hash=config_hash,
                        stages=profiler.get_profile_summary())
        print(f"✅ Done in {duration:.1f}s → {config.output_dir(args.out)}")
        print(json.dumps(_scalar_summary(summary), indent=2, sort_keys=True, default=str))
        return codes['success']
    except ConfigValidationError as exc:
        monitor.log_run(name, analysis, time.time() - start, success=False, error=f"validation: {exc}")
        print(f"❌ Invalid configuration: {exc}\n   {messages['validation']}")
        return codes['validation']
    except CertificationError as exc:
        monitor.log_run(name, analysis, time.time() - start, success=False,
                        error=f"{type(exc).__name__}: {exc}")
        print(f"⚠️ Certification failed: {exc}")
        if exc.details:
            print(f"   details: {json.dumps(exc.details, default=str)}")
        print(f"   {messages['certification']}")
        return codes['certification']
    except ValueError as exc:
        monitor.log_run(name, analysis, time.time() - start, success=False, error=f"validation: {exc}")
        print(f"❌ Invalid parameter: {exc}")
        return codes['validation']


def cmd_sweep(args, monitor: RunMonitor) -> int:
    codes = ProductionConfig.ERROR_HANDLING['exit_codes']
    try:
        base = load_config(args.config)
        axis, values = sweep_plan(base, args.axis, args.values)
        points = [base.with_override(axis, value) for value in values]
    except ConfigValidationError as exc:
        print(f"❌ Invalid sweep: {exc}")
        return codes['validation']

    jobs = args.jobs or ProductionConfig.get_config(args.mode)['numerics']['default_jobs']
    cache = ResultCache(os.getenv('NLRE_CACHE_DIR', 'cache')) if args.cache else None
    sweep_dir = Path(args.out) / f"{base.name}__sweep-{axis.replace('.', '-')}"
    point_root = str(sweep_dir / 'points')
    print(f"🔁 Sweeping {axis} over {len(values)} value(s) with {jobs} job(s)")

    results: List[Optional[Dict[str, Any]]] = [None] * len(points)
    pending = []
    for i, point in enumerate(points):
        hit = cache.get(point.config_hash, args.mode) if cache else None
        if hit is not None:
            results[i] = {'status': 'ok', 'summary': hit.summary, 'error': None, 'duration': 0.0, 'cached': True}
        else:
            pending.append(i)

    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {i: pool.submit(_run_point, points[i].document, points[i].source, point_root, args.mode)
                       for i in pending}
            for i in pending:
                results[i] = futures[i].result()
    else:
        for i in pending:
            results[i] = _run_point(points[i].document, points[i].source, point_root, args.mode)

    rows, columns = [], [axis, 'status', 'error']
    for value, point, result in zip(values, points, results):
        monitor.log_run(point.name, point.analysis, result['duration'], success=result['status'] == 'ok',
                        error=result['error'], cached=result.get('cached', False), config_hash=point.config_hash)
        if cache and result['status'] == 'ok' and not result.get('cached'):
            cache.set(point.config_hash, point.analysis, result['summary'], result['duration'], args.mode)
        row = {axis: value, 'status': result['status'], 'error': result['error'] or ''}
        row.update(result['summary'])
        for key in result['summary']:
            if key not in columns:
                columns.append(key)
        rows.append(row)
        mark = '✅' if result['status'] == 'ok' else '❌'
        print(f"   {mark} {axis}={value}: {result['status']}")

    sweep_dir.mkdir(parents=True, exist_ok=True)
    write_csv(sweep_dir / 'summary.csv', rows, metadata={'axis': axis, 'base_config_hash': base.config_hash},
              fieldnames=columns)
    write_json(sweep_dir / 'manifest.json', {
        'tool_version': TOOL_VERSION, 'axis': axis, 'values': values, 'mode': args.mode,
        'base_config_hash': base.config_hash,
        'points': [{'config_hash': p.config_hash, 'status': r['status']} for p, r in zip(points, results)],
    })
    failed = sum(r['status'] != 'ok' for r in results)
    print(f"📊 Sweep: {len(points) - failed}/{len(points)} points succeeded → {sweep_dir}")
    report_sweep(monitor, args, jobs, cache)
    if failed == len(points):
        return codes['certification']
    return codes['success']


def report_sweep(monitor: RunMonitor, args, jobs: int, cache: Optional[ResultCache]) -> None:
    """Console report of the sweep's runs; saved as JSON when --report is given."""
    print(monitor.generate_report())
    stats = dict(monitor.analyze_performance(), jobs=jobs)
    for tip in ProductionConfig.get_optimization_recommendations(stats, args.mode):
        print(f"💡 {tip}")
    if cache is not None:
        cache_stats = cache.get_stats()
        print(f"⚡ Cache: {cache_stats['session_hits']} hit(s), {cache_stats['session_misses']} miss(es), "
              f"{cache_stats['total_runtime_saved']:.1f}s saved overall")
    if args.report:
        monitor.save_report(args.report)


def cmd_check_env(args, monitor: RunMonitor) -> int:
    checks = ProductionConfig.validate_environment(args.out)
    for check, status in checks.items():
        print(f"   {'✅' if status else '❌'} {check}")
    return 0 if all(checks.values()) else ProductionConfig.exit_code('validation')


def cmd_list(args, monitor: RunMonitor) -> int:
    for name, info in get_available_analyses().items():
        print(f"   • {name}: {info['description']} [{', '.join(info['sections'])}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='nlre', description="Nonlinear reservoir engineering scenarios")
    parser.add_argument('--mode', default=ProductionConfig.default_mode(),
                        choices=sorted(ProductionConfig.NUMERICS), help="numerics preset")
    parser.add_argument('--out', default=_default_out(), help="output root directory")
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help="run one scenario file")
    run.add_argument('config')
    run.add_argument('--cache', action='store_true', help="reuse results recorded for the same config hash")
    run.set_defaults(handler=cmd_run)

    sweep = sub.add_parser('sweep', help="run a scenario once per value of one parameter")
    sweep.add_argument('config')
    sweep.add_argument('--axis', help="section.key to override (default: the scenario's [sweep] axis)")
    sweep.add_argument('--values', help="comma-separated values (default: the scenario's [sweep] values)")
    sweep.add_argument('--jobs', type=int, default=None, help="concurrent points")
    sweep.add_argument('--cache', action='store_true')
    sweep.add_argument('--report', help="write the run report as JSON to this path")
    sweep.set_defaults(handler=cmd_sweep)

    env = sub.add_parser('check-env', help="check dependencies and the output directory")
    env.set_defaults(handler=cmd_check_env)

    listing = sub.add_parser('list', help="list analysis kinds")
    listing.set_defaults(handler=cmd_list)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    monitoring = ProductionConfig.get_config(args.mode)['monitoring']
    monitor = RunMonitor(log_file=monitoring['log_file'], level=monitoring['log_level'])
    try:
        return args.handler(args, monitor)
    except KeyboardInterrupt:
        print("\n👋 Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
