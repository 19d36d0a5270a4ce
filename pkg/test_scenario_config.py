#!/usr/bin/env python3
"""
Tests for scenario parsing, validation, hashing and sweep overrides
"""

import tempfile
from pathlib import Path

import numpy as np

from darkstate import auto_cutoff
from errors import ConfigValidationError
from scenario_config import AUTO_WIDTH, config_hash, load_config, parse_text, set_path, validate_document

CONFIG_DIR = Path(__file__).parent / 'configs'


def _cat_document(**darkstate):
    return {
        'scenario': {'analysis': 'darkstate', 'name': 'cat'},
        'scheme': {'kind': 'standard_cat', 'alpha': 2.0, 'd': 2},
        'cutoff': {'policy': 'explicit', 'value': 30},
        'darkstate': dict(darkstate),
    }


def test_bundled_configs_validate():
    print("🧪 Testing bundled scenario files...")
    paths = sorted(CONFIG_DIR.glob('*.toml'))
    assert paths
    for path in paths:
        config = load_config(str(path))
        assert config.source == str(path)
        assert len(config.config_hash) == 16


def test_hash_tracks_content():
    first = validate_document(_cat_document())
    reordered = {key: _cat_document()[key] for key in ('darkstate', 'cutoff', 'scheme', 'scenario')}
    assert validate_document(reordered).config_hash == first.config_hash
    changed = _cat_document()
    changed['scheme']['alpha'] = 2.5
    assert validate_document(changed).config_hash != first.config_hash
    assert config_hash({'a': 1}) != config_hash({'a': 1.5})


def test_validation_errors():
    """Unknown names, wrong types and malformed noise tables are rejected before any numerics."""
    print("🧪 Testing scenario validation...")
    cases = []
    doc = _cat_document()
    doc['scenario']['analysis'] = 'tomography'
    cases.append(doc)
    doc = _cat_document()
    doc['plot'] = {'dpi': 300}
    cases.append(doc)
    cases.append(_cat_document(cmb=True, colour='red'))
    cases.append(_cat_document(cmb=1))
    doc = _cat_document()
    doc['scheme']['d'] = True
    cases.append(doc)
    doc = _cat_document()
    doc['cutoff']['value'] = 1
    cases.append(doc)
    doc = _cat_document()
    del doc['scheme']
    cases.append(doc)
    doc = _cat_document()
    doc['scheme'] = {'kind': 'linear', 'r': 0, 'l': 2}
    cases.append(doc)
    evolve = {'scenario': {'analysis': 'evolve'}, 'scheme': {'kind': 'standard_cat', 'alpha': 1.0, 'd': 2}}
    for noise in ([{'kind': 'loss'}], [{'kind': 'spin_dephasing', 'rate': 0.1}],
                  [{'kind': 'loss', 'rate': 0.1, 'spin': True}]):
        cases.append({**evolve, 'evolve': {'noise': noise}})
    cases.append({'analysis': 'darkstate'})

    for document in cases:
        try:
            validate_document(document)
            raise AssertionError(f"{document} accepted")
        except ConfigValidationError:
            pass


def test_key_error_details():
    try:
        validate_document(_cat_document(samples=3))
        raise AssertionError("unknown key accepted")
    except ConfigValidationError as exc:
        assert exc.details['section'] == 'darkstate'


def test_sweep_override():
    base = validate_document(_cat_document())
    point = base.with_override('scheme.alpha', 3.0)
    assert point.name == 'cat__scheme-alpha=3.0'
    assert point.section('scheme')['alpha'] == 3.0
    assert base.section('scheme')['alpha'] == 2.0
    assert point.config_hash != base.config_hash
    for axis in ('alpha', 'scheme.', 'scheme.alpha.x'):
        try:
            set_path(base.document, axis, 1.0)
            raise AssertionError(f"axis {axis!r} accepted")
        except ConfigValidationError:
            pass
    try:
        base.with_override('scheme.d', 'two')
        raise AssertionError("ill-typed override accepted")
    except ConfigValidationError:
        pass


def test_nested_sweep_axis():
    """Axes reach into inline tables such as the profile of f̃."""
    base = load_config(str(CONFIG_DIR / 'leakage_32.toml'))
    assert base.section('sweep')['axis'] == 'scheme.f.slope'
    point = base.with_override('scheme.f.slope', 0.9)
    assert point.section('scheme')['f']['slope'] == 0.9
    assert base.section('scheme')['f']['slope'] == 1.0
    assert point.build_scheme().f_profile.slope == 0.9
    try:
        set_path(base.document, 'scheme.kind.x', 1.0)
        raise AssertionError("axis through a scalar accepted")
    except ConfigValidationError:
        pass


def test_cutoff_policies():
    explicit = validate_document(_cat_document())
    assert explicit.space_for(explicit.build_scheme()).cutoff == 30
    doc = _cat_document()
    doc['cutoff'] = {'policy': 'auto'}
    auto = validate_document(doc)
    scheme = auto.build_scheme()
    assert auto.space_for(scheme).cutoff == auto_cutoff(scheme, width_factor=AUTO_WIDTH)
    assert auto.space_for(scheme).cutoff >= AUTO_WIDTH + scheme.d + 10
    doc['cutoff'] = {'policy': 'adaptive'}
    try:
        validate_document(doc)
        raise AssertionError("unknown cutoff policy accepted")
    except ConfigValidationError:
        pass


def test_angular_flag():
    """`angular = false` reads frequencies in Hz and scales them by 2π."""
    doc = {'scenario': {'analysis': 'ion'}, 'ion': {'angular': False, 'omega_l': 50e3}}
    ion = validate_document(doc).ion_config()
    assert np.isclose(ion.omega_l, 2 * np.pi * 50e3)
    doc['ion'] = {'omega_l': 2 * np.pi * 50e3}
    assert np.isclose(validate_document(doc).ion_config().omega_l, ion.omega_l)


def test_output_dir():
    config = validate_document(_cat_document())
    assert config.output_dir('results') == Path('results') / 'cat'
    doc = _cat_document()
    doc['output'] = {'dir': 'elsewhere'}
    assert validate_document(doc).output_dir('results') == Path('elsewhere')


def test_file_loading():
    with tempfile.TemporaryDirectory() as tmp:
        good = Path(tmp) / 'cat.json'
        good.write_text('{"scenario": {"analysis": "darkstate"}, '
                        '"scheme": {"kind": "standard_cat", "alpha": 1.0, "d": 2}}', encoding='utf-8')
        assert load_config(str(good)).name == 'darkstate'
        for path in (Path(tmp) / 'missing.toml', Path(tmp) / 'broken.toml'):
            if path.name == 'broken.toml':
                path.write_text('[scenario\nanalysis = ', encoding='utf-8')
            try:
                load_config(str(path))
                raise AssertionError(f"{path.name} accepted")
            except ConfigValidationError:
                pass
    assert parse_text('[a]\nb = 1\n', '.toml') == {'a': {'b': 1}}


def main():
    """Run all tests."""
    print("🚀 Running scenario configuration tests")
    print("=" * 60)

    tests = [
        test_bundled_configs_validate,
        test_hash_tracks_content,
        test_validation_errors,
        test_key_error_details,
        test_sweep_override,
        test_nested_sweep_axis,
        test_cutoff_policies,
        test_angular_flag,
        test_output_dir,
        test_file_loading,
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
