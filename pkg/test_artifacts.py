#!/usr/bin/env python3
"""
Tests for CSV/JSON artifacts, staged run directories and manifests
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from artifacts import MANIFEST_NAME, TOOL_NAME, ArtifactWriter, build_manifest, read_csv, write_csv, write_json
from scenario_config import validate_document


def _config():
    return validate_document({
        'scenario': {'analysis': 'darkstate', 'name': 'cat', 'seed': 3},
        'scheme': {'kind': 'standard_cat', 'alpha': 2.0, 'd': 2},
    }, source='cat.toml')


def test_csv_metadata_header():
    print("🧪 Testing CSV artifacts...")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / 'profiles.csv'
        rows = [{'k': np.int64(k), 'f': np.float64(0.5 * k)} for k in range(3)]
        write_csv(path, rows, metadata={'cutoff': 30, 'phase': 1 + 2j})
        lines = path.read_text(encoding='utf-8').splitlines()
        assert lines[0] == '# cutoff: 30'
        assert lines[1] == '# phase: [1.0, 2.0]'
        assert lines[2] == 'k,f'
        parsed = read_csv(path)
        assert [row['k'] for row in parsed] == ['0', '1', '2']
        assert float(parsed[2]['f']) == 1.0


def test_csv_explicit_fieldnames():
    with tempfile.TemporaryDirectory() as tmp:
        path = write_csv(Path(tmp) / 'empty.csv', [], fieldnames=['q', 'p', 'class'])
        assert path.read_text(encoding='utf-8') == 'q,p,class\n'
        assert read_csv(path) == []


def test_json_is_plain_and_sorted():
    with tempfile.TemporaryDirectory() as tmp:
        path = write_json(Path(tmp) / 'out.json', {'b': np.arange(2), 'a': np.float32(0.5)})
        text = path.read_text(encoding='utf-8')
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {'a': 0.5, 'b': [0, 1]}


def test_commit_moves_staged_files():
    """Files land in a .partial sibling and appear under the run name only on commit."""
    print("🧪 Testing staged run directories...")
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'cat'
        writer = ArtifactWriter(out)
        assert writer.staging == Path(tmp) / 'cat.partial'
        writer.csv('dist.csv', [{'k': 0, 'p': 1.0}])
        writer.json('spectrum.json', {'n_exact_zero': 4})
        writer.certify('truncation', cutoff=30, max_norm_defect=np.float64(1e-12))
        assert not out.exists()
        config = _config()
        writer.commit(build_manifest(config, 'desk', {'states': 2}))
        assert out.is_dir() and not writer.staging.exists()
        manifest = json.loads((out / MANIFEST_NAME).read_text(encoding='utf-8'))
        assert manifest['artifacts'] == ['dist.csv', 'spectrum.json']
        assert manifest['certifications'] == [{'check': 'truncation', 'cutoff': 30, 'max_norm_defect': 1e-12}]
        assert manifest['config_hash'] == config.config_hash
        assert manifest['summary'] == {'states': 2}


def test_discard_leaves_nothing():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'failed'
        writer = ArtifactWriter(out)
        writer.csv('partial.csv', [{'x': 1}])
        writer.discard()
        assert list(Path(tmp).iterdir()) == []


def test_rerun_replaces_previous_output():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'cat'
        for value in (1, 2):
            writer = ArtifactWriter(out)
            writer.json('value.json', {'value': value})
            writer.commit({'tool': TOOL_NAME})
        assert json.loads((out / 'value.json').read_text(encoding='utf-8')) == {'value': 2}
        assert sorted(p.name for p in Path(tmp).iterdir()) == ['cat']


def test_manifest_is_reproducible():
    config = _config()
    first = build_manifest(config, 'desk', {'mean_n': 4.0})
    second = build_manifest(_config(), 'desk', {'mean_n': 4.0})
    assert first == second
    assert first['tool'] == TOOL_NAME and first['seed'] == 3
    assert first['config_source'] == 'cat.toml'
    assert not any('time' in key or 'date' in key for key in first)


def main():
    """Run all tests."""
    print("🚀 Running artifact tests")
    print("=" * 60)

    tests = [
        test_csv_metadata_header,
        test_csv_explicit_fieldnames,
        test_json_is_plain_and_sorted,
        test_commit_moves_staged_files,
        test_discard_leaves_nothing,
        test_rerun_replaces_previous_output,
        test_manifest_is_reproducible,
    ]

    passed = 0
    for test in tests:
        try:
            test()
            passed += 1
            print(f"✅ {test.__name__}")
        except Exception as e:
            print(f"❌ {test.__name__}: {e}")

    print("\n" + "=" * 60)
    print(f"📊 Test Results: {passed}/{len(tests)} tests passed")


if __name__ == "__main__":
    main()
