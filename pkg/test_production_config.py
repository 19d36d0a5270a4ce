#!/usr/bin/env python3
"""
Tests for run-mode presets and the environment check
"""

import os
import tempfile
from pathlib import Path

from production_config import ProductionConfig


def test_modes_share_keys():
    print("🧪 Testing run-mode presets...")
    keys = set(ProductionConfig.NUMERICS['production'])
    for mode, settings in ProductionConfig.NUMERICS.items():
        assert set(settings) == keys, mode
    fast, precise = ProductionConfig.NUMERICS['fast'], ProductionConfig.NUMERICS['precise']
    assert precise['rtol'] < fast['rtol'] and precise['truncation_threshold'] < fast['truncation_threshold']


def test_get_config():
    config = ProductionConfig.get_config('fast')
    assert config['mode'] == 'fast'
    config['numerics']['rtol'] = 1.0
    assert ProductionConfig.NUMERICS['fast']['rtol'] != 1.0
    assert ProductionConfig.get_config('turbo')['mode'] == 'production'


def test_environment_overrides():
    saved = {key: os.environ.get(key) for key in ('NLRE_MODE', 'NLRE_LOG_LEVEL')}
    try:
        os.environ['NLRE_MODE'] = 'precise'
        os.environ['NLRE_LOG_LEVEL'] = 'DEBUG'
        assert ProductionConfig.default_mode() == 'precise'
        assert ProductionConfig.get_config()['monitoring']['log_level'] == 'DEBUG'
    finally:
        for key, value in saved.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value


def test_exit_codes():
    assert [ProductionConfig.exit_code(k) for k in ('success', 'validation', 'certification')] == [0, 2, 3]


def test_validate_environment():
    with tempfile.TemporaryDirectory() as tmp:
        target = Path(tmp) / 'nested' / 'results'
        checks = ProductionConfig.validate_environment(str(target))
        assert checks['numpy_available'] and checks['scipy_available']
        assert checks['output_dir_writable'] and target.is_dir()
        assert list(target.iterdir()) == []


def main():
    """Run all tests."""
    print("🚀 Running run-mode configuration tests")
    print("=" * 60)

    tests = [
        test_modes_share_keys,
        test_get_config,
        test_environment_overrides,
        test_exit_codes,
        test_validate_environment,
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
