#!/usr/bin/env python3
"""
Tests for the sqlite result cache
"""

import tempfile

from enhanced_cache import ResultCache


def test_round_trip_per_mode():
    print("🧪 Testing result cache...")
    with tempfile.TemporaryDirectory() as tmp:
        cache = ResultCache(tmp)
        assert cache.get('abc', 'fast') is None
        cache.set('abc', 'darkstate', {'states': 2, 'mean_n': 4.0}, runtime=1.5, mode='fast')
        entry = cache.get('abc', 'fast')
        assert entry.summary == {'states': 2, 'mean_n': 4.0}
        assert entry.analysis == 'darkstate' and entry.runtime == 1.5
        assert entry.access_count == 2
        assert cache.get('abc', 'production') is None
        assert (cache.hits, cache.misses) == (1, 2)


def test_replace_and_stats():
    with tempfile.TemporaryDirectory() as tmp:
        cache = ResultCache(tmp)
        cache.set('abc', 'darkstate', {'states': 2}, runtime=2.0)
        cache.set('abc', 'darkstate', {'states': 3}, runtime=2.0)
        cache.set('def', 'spectrum', {'n_exact_zero': 4}, runtime=1.0)
        assert cache.get('abc').summary == {'states': 3}
        stats = cache.get_stats()
        assert stats['total_entries'] == 2
        assert stats['by_analysis'] == {'darkstate': 1, 'spectrum': 1}
        assert stats['total_runtime_saved'] == 2.0
        assert ResultCache(tmp).get('def').summary == {'n_exact_zero': 4}


def test_eviction_prefers_unused_entries():
    with tempfile.TemporaryDirectory() as tmp:
        cache = ResultCache(tmp, max_entries=5)
        cache.set('keep', 'qec', {'x': 0}, runtime=1.0)
        for _ in range(3):
            cache.get('keep')
        for i in range(5):
            cache.set(f'h{i}', 'qec', {'x': i}, runtime=1.0)
        assert cache.get_stats()['total_entries'] <= 5
        assert cache.get('keep') is not None


def main():
    """Run all tests."""
    print("🚀 Running cache tests")
    print("=" * 60)

    tests = [
        test_round_trip_per_mode,
        test_replace_and_stats,
        test_eviction_prefers_unused_entries,
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
