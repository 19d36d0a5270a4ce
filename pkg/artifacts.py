#!/usr/bin/env python3
"""
Run Artifacts
CSV tables with #-prefixed metadata, JSON documents and the per-run manifest
"""

import csv
import json
import logging
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

TOOL_NAME = 'nlre'
TOOL_VERSION = '0.3.0'
MANIFEST_NAME = 'manifest.json'


def _plain(value: Any) -> Any:
    """JSON-safe form of numpy scalars, arrays and complex numbers."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, Path):
        return str(value)
    return value


def write_csv(path: Path, rows: Sequence[Dict[str, Any]], metadata: Optional[Dict[str, Any]] = None,
              fieldnames: Optional[List[str]] = None) -> Path:
    """Header row after `# key: value` comment lines; column order from the first row."""
    path = Path(path)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        for key, value in (metadata or {}).items():
            handle.write(f"# {key}: {json.dumps(_plain(value), sort_keys=True)}\n")
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _plain(v) for k, v in row.items()})
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    """Rows of a file written by write_csv, metadata comments skipped."""
    with open(path, newline='', encoding='utf-8') as handle:
        lines = [line for line in handle if not line.startswith('#')]
    return list(csv.DictReader(lines))


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(_plain(payload), handle, indent=2, sort_keys=True)
        handle.write('\n')
    return path


class ArtifactWriter:
    """Stages a run's files next to the target directory and moves them in on commit."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.staging = self.out_dir.with_name(self.out_dir.name + '.partial')
        if self.staging.exists():
            shutil.rmtree(self.staging)
        self.staging.mkdir(parents=True)
        self.files: List[str] = []
        self.certifications: List[Dict[str, Any]] = []

    def csv(self, name: str, rows: Sequence[Dict[str, Any]], metadata: Optional[Dict[str, Any]] = None,
            fieldnames: Optional[List[str]] = None) -> Path:
        self.files.append(name)
        return write_csv(self.staging / name, rows, metadata, fieldnames)

    def json(self, name: str, payload: Any) -> Path:
        self.files.append(name)
        return write_json(self.staging / name, payload)

    def certify(self, label: str, **values: Any) -> None:
        """Record a certification (cutoff, residual, tail mass) for the manifest."""
        self.certifications.append({'check': label, **_plain(values)})

    def commit(self, manifest: Dict[str, Any]) -> Path:
        payload = dict(manifest)
        payload['artifacts'] = sorted(self.files)
        payload['certifications'] = self.certifications
        write_json(self.staging / MANIFEST_NAME, payload)
        if self.out_dir.exists():
            shutil.rmtree(self.out_dir)
        self.staging.rename(self.out_dir)
        logger.info(f"wrote {len(self.files)} artifact(s) to {self.out_dir}")
        return self.out_dir

    def discard(self) -> None:
        if self.staging.exists():
            shutil.rmtree(self.staging)


def build_manifest(config, mode: str, summary: Dict[str, Any]) -> Dict[str, Any]:
    """Manifest body; no timestamps so reruns are byte-identical."""
    return {
        'tool': TOOL_NAME,
        'tool_version': TOOL_VERSION,
        'scenario': config.name,
        'analysis': config.analysis,
        'config_hash': config.config_hash,
        'config_source': config.source,
        'mode': mode,
        'seed': config.seed,
        'summary': summary,
    }
