"""Run configuration: strict JSON schema, defaults and validation."""

from __future__ import annotations

import copy
import json
import math
import re
import warnings
from dataclasses import dataclass, field

from .errors import ConfigError

DEFAULT_TOLERANCES = {
    "drop_tol": 1e-30,
    "lie_tol_factor": 1e-2,
    "lie_max_order": 12,
    "divisor_abs_floor": 1e-12,
    "invert_tol": 1e-10,
    "invert_max_outer": 8,
    "reality_tol": 1e-12,
    "integrator_tol": 1e-13,
}

DEFAULTS = {
    "theta": 0.5,
    "rho0": 0.05,
    "r": None,          # defaults to 20 * rho0
    "mu0": None,        # defaults to 2 * r
    "eps": 5e-10,
    "eps0_scale": 20.0,
    "gamma": 1e-3,
    "C_theta": 1.0,
    "mode_cap": 3,
    "degree_cap": 8,
    "steps": 3,
    "rng_seed": 20240617,
    "f_profile": {"mu_f": 2.5, "C": 1.0},
    "f_path": None,
    "omega_spec": {"amplitude": 0.5, "support_cap": 4, "coeff_cap": 3, "max_tries": 500},
    "invert_frequencies": False,
    "tolerances": {},
}

_OMEGA_KEYS = {"amplitude", "support_cap", "coeff_cap", "max_tries", "values"}
_PROFILE_KEYS = {"mu_f", "C", "reach", "theta", "coeffs"}


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if not m:
        return ""
    return f" (line {text.count(chr(10), 0, m.start()) + 1})"


@dataclass
class RunConfig:
    theta: float
    rho0: float
    r: float
    mu0: float
    eps: float
    eps0_scale: float
    gamma: float
    C_theta: float
    mode_cap: int
    degree_cap: int
    steps: int
    rng_seed: int
    f_profile: dict | None
    f_path: str | None
    omega_spec: dict
    invert_frequencies: bool
    tolerances: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def eps0(self) -> float:
        return self.eps0_scale * self.eps

    @property
    def mu_f(self) -> float:
        return float((self.f_profile or {}).get("mu_f", math.nan))

    def as_dict(self) -> dict:
        out = {k: copy.deepcopy(getattr(self, k)) for k in DEFAULTS}
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def parse_config(data: dict | str | None = None, *, overrides: dict | None = None) -> RunConfig:
    """Build a validated :class:`RunConfig` from a dict or JSON text.

    Unknown keys raise :class:`ConfigError` naming the key and, for JSON
    text, its line.  ``overrides`` (for example CLI flags) are applied last.
    """
    text = None
    if isinstance(data, str):
        text = data
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    data = dict(data or {})
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in data:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key '{key}'{_line_of(text, key)}")
    merged = copy.deepcopy(DEFAULTS)
    merged.update(copy.deepcopy(data))
    for k, v in (overrides or {}).items():
        if k not in DEFAULTS:
            raise ConfigError(f"unknown config key '{k}'")
        if v is not None:
            merged[k] = v
    given = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    if given.get("f_path") is not None and "f_profile" not in given:
        merged["f_profile"] = None
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in (merged["tolerances"] or {}).items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown config key 'tolerances.{k}'{_line_of(text, k)}")
        tol[k] = v
    merged["tolerances"] = tol
    if merged["omega_spec"] is not None:
        om = dict(DEFAULTS["omega_spec"])
        for k, v in merged["omega_spec"].items():
            if k not in _OMEGA_KEYS:
                raise ConfigError(f"unknown config key 'omega_spec.{k}'{_line_of(text, k)}")
            om[k] = v
        merged["omega_spec"] = om
    if merged["f_profile"] is not None:
        for k in merged["f_profile"]:
            if k not in _PROFILE_KEYS:
                raise ConfigError(f"unknown config key 'f_profile.{k}'{_line_of(text, k)}")
    if merged["r"] is None:
        merged["r"] = 20.0 * merged["rho0"]
    if merged["mu0"] is None:
        merged["mu0"] = 2.0 * merged["r"]
    cfg = RunConfig(**merged)
    validate(cfg, text)
    return cfg


def validate(cfg: RunConfig, text: str | None = None) -> None:
    def fail(key, msg):
        raise ConfigError(f"{key}{_line_of(text, key)}: {msg}")

    if not 0 < cfg.theta < 1:
        fail("theta", "must lie in (0, 1)")
    for key in ("rho0", "r", "mu0", "eps0_scale", "C_theta"):
        if not getattr(cfg, key) > 0:
            fail(key, "must be positive")
    if not cfg.eps >= 0:
        fail("eps", "must be nonnegative")
    if not cfg.gamma >= 0:
        fail("gamma", "must be nonnegative")
    for key, low in (("mode_cap", 1), ("degree_cap", 6), ("steps", 0)):
        v = getattr(cfg, key)
        if not isinstance(v, int) or isinstance(v, bool) or v < low:
            fail(key, f"must be an integer >= {low}")
    if cfg.f_profile is None and not cfg.f_path:
        fail("f_profile", "either f_profile or f_path is required")
    two = 2.0 - 2.0 ** cfg.theta
    h6 = (1.0 / two + 3.0) * cfg.rho0
    if not cfg.r > h6:
        fail("r", f"must exceed (1/(2-2^theta) + 3) rho0 = {h6:.6g}")
    notes = []
    setup = 100.0 * cfg.rho0 / two
    if cfg.r < setup:
        notes.append(f"r = {cfg.r:g} is below 100 rho0/(2-2^theta) = {setup:.6g}")
    if cfg.mu0 < 2 * cfg.r:
        notes.append(f"mu0 = {cfg.mu0:g} is below 2 r = {2 * cfg.r:g}")
    if cfg.f_profile is not None and "mu_f" in cfg.f_profile and cfg.mu0 > cfg.f_profile["mu_f"]:
        fail("mu0", "must not exceed the profile width mu_f")
    for n in notes:
        warnings.warn(n, stacklevel=3)
    cfg.warnings = notes
