import json
import warnings

import pytest

from nlskam.config import DEFAULT_TOLERANCES, parse_config
from nlskam.errors import ConfigError


def quiet(data=None, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return parse_config(data, **kw)


def test_defaults_derived_radii():
    cfg = quiet({})
    assert cfg.r == pytest.approx(20 * cfg.rho0) and cfg.mu0 == pytest.approx(2 * cfg.r)
    assert cfg.eps0 == pytest.approx(cfg.eps0_scale * cfg.eps)
    assert cfg.tolerances == DEFAULT_TOLERANCES
    cfg = quiet({"rho0": 0.04})
    assert cfg.r == pytest.approx(0.8) and cfg.mu0 == pytest.approx(1.6)


def test_unknown_key_names_key_and_line():
    text = '{\n  "theta": 0.5,\n  "foo": 1\n}'
    with pytest.raises(ConfigError, match=r"unknown config key 'foo' \(line 3\)"):
        parse_config(text)


@pytest.mark.parametrize("nested,key", [("tolerances", "drop"), ("omega_spec", "bogus"),
                                        ("f_profile", "width")])
def test_unknown_nested_key(nested, key):
    text = json.dumps({nested: {key: 1}}, indent=1)
    with pytest.raises(ConfigError, match=f"{nested}.{key}"):
        parse_config(text)


def test_invalid_json_reports_position():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config('{\n  "theta": }')


@pytest.mark.parametrize("bad", [{"theta": 1.0}, {"theta": 0.0}, {"rho0": -1.0}, {"eps": -1e-9},
                                 {"mode_cap": 0}, {"degree_cap": 4}, {"steps": -1},
                                 {"mode_cap": 2.5}, {"gamma": -1.0}])
def test_range_checks(bad):
    with pytest.raises(ConfigError):
        quiet(bad)


def test_radius_must_clear_lower_bound():
    # (1/(2 - sqrt 2) + 3) * 0.05 = 0.2354
    with pytest.raises(ConfigError, match="r"):
        quiet({"rho0": 0.05, "r": 0.23, "mu0": 0.5})
    quiet({"rho0": 0.05, "r": 0.24, "mu0": 0.5})


def test_mu0_bounded_by_profile_width():
    with pytest.raises(ConfigError, match="mu0"):
        quiet({"mu0": 3.0, "f_profile": {"mu_f": 2.5}})


def test_soft_conditions_warn():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = parse_config({"mu0": 1.5})
    assert any("below 2 r" in str(w.message) for w in caught)
    assert any("below 2 r" in w for w in cfg.warnings)


def test_overrides_apply_last_and_path_clears_profile():
    cfg = quiet({"mode_cap": 2}, overrides={"mode_cap": 4, "steps": None})
    assert cfg.mode_cap == 4 and cfg.steps == 3
    cfg = quiet({}, overrides={"f_path": "/tmp/profile.json"})
    assert cfg.f_profile is None and cfg.f_path == "/tmp/profile.json"
    with pytest.raises(ConfigError, match="unknown"):
        quiet({}, overrides={"nope": 1})


def test_requires_a_profile():
    with pytest.raises(ConfigError, match="f_profile"):
        quiet({"f_profile": None})


def test_canonical_round_trip():
    cfg = quiet({"eps": 1e-9, "tolerances": {"drop_tol": 1e-28}})
    again = quiet(json.loads(cfg.canonical_json()))
    assert again.canonical_json() == cfg.canonical_json()
