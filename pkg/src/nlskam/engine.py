"""The KAM iteration: schedule, step, frequency inversion and full runs.

Step ``s >= 1`` maps state ``s - 1`` to state ``s``.  It solves the
homological equation with the current frequencies and composes with the
time-1 map of the generator.  It then certifies the new remainder at the
exit weights ``(rho_{s+1}, mu_{s+1})`` against

    ||R_0||+ <= eps_s,   ||R_1||+ <= eps_s^0.6,   ||R_2||+ <= (1 + d_s) eps_0,

with ``eps_s = eps_0^((3/2)^s)``.  The seed is state 0, certified at
``(rho_1, mu_1) = (rho_0, mu_0)`` against ``eps_0``, ``eps_0^0.6`` and ``eps_0``.

The new remainder comes from the regrouped Lie series.  With ``S`` the
solved part of ``R`` and ``ad(X) = {X, F}``,

    H o Phi_F = N + [R] + (R - S - [R])
                + sum_{m>=1} ad^m(R)/m! - sum_{m>=1} ad^m(S)/(m+1)!,

which uses ``{N, F} = -S`` to eliminate every bracket involving ``N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import RunConfig
from .errors import (CertificationFailure, ConfigError, NlsKamError, NoConvergence,
                     ScheduleViolation)
from .hamiltonian import (Hamiltonian, NormalForm, NormWeights, TorusSpec, expand_j,
                          plus_norm, resonant_project, split)
from .homological import FrequencyVector, default_floor, diophantine_check, solve
from .lattice import rearrangement, momentum_star
from .poisson import Caps, ad_series
from .seed import GevreyProfile, build_seed, gevrey_sample, seed_norm_certificate

TELEMETRY_COLUMNS = [
    "step", "rho_s", "mu_s", "delta_s", "eps_s_target", "norm_R0_plus", "norm_R1_plus",
    "norm_R2_plus", "n_terms", "n_solved", "n_deferred", "min_divisor", "max_freq_shift",
    "lie_orders_used", "tail_norm",
]


# -- schedule ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    rho0: float
    r: float
    mu0: float
    theta: float
    eps0: float
    gamma: float
    C_theta: float = 1.0
    eta0: float = 1.0
    mode_cap: int | None = None


class StepParams(NamedTuple):
    delta: float
    rho: float
    mu: float
    eps: float
    eps_next: float
    lam: float
    eta: float
    d: float


def _eps(sch: Schedule, s: int) -> float:
    return sch.eps0 ** (1.5 ** s)


def _lam(sch: Schedule, s: int) -> float:
    e = _eps(sch, s + 1)
    if e <= 0 or e >= 1:
        return 1.0 if e >= 1 else 0.0
    return math.exp(-sch.C_theta * math.log(1.0 / e) ** (4.0 / (sch.theta + 4.0)))


def schedule_at(sch: Schedule, s: int) -> StepParams:
    """Parameters of step ``s`` (1-based; ``rho_1 = rho_0``, ``mu_1 = mu_0``)."""
    if s < 1:
        raise ValueError("steps are numbered from 1")
    rho, mu, eta, d = sch.rho0, sch.mu0, sch.eta0, 0.0
    for j in range(1, s):
        delta_j = sch.rho0 / j ** 2
        rho += 3 * delta_j
        mu -= 6 * delta_j
        eta = _lam(sch, j) * eta / 20.0
    for j in range(1, s + 1):
        d += 1.0 / (math.pi ** 2 * j ** 2)
    if rho >= sch.r / 2:
        raise ScheduleViolation(f"rho_{s} = {rho:g} >= r/2 = {sch.r / 2:g}")
    if mu <= 0:
        raise ScheduleViolation(f"mu_{s} = {mu:g} <= 0")
    return StepParams(sch.rho0 / s ** 2, rho, mu, _eps(sch, s), _eps(sch, s + 1),
                      _lam(sch, s), eta, d)


def truncation_threshold(sch: Schedule, s: int) -> float:
    """Largest ``sum_{i>=3} n_i*^theta + m*^theta`` of a term solved at step ``s``.

    Terms above it are already below the step target in weight and are
    deferred.
    """
    e = _eps(sch, s)
    if e >= 1:
        return 0.0
    if e <= 0:
        return math.inf
    return s ** 2 / ((2.0 - 2.0 ** sch.theta) * sch.rho0) * math.log(1.0 / e)


def mode_cutoff(sch: Schedule, s: int) -> tuple[int, int]:
    """Return ``(N_s, clamped N_s)`` where ``N_s = ceil(B_s^(2/theta))``."""
    e = _eps(sch, s)
    if e <= 0:
        return math.inf, int(sch.mode_cap) if sch.mode_cap is not None else math.inf
    B = 3.0 * 6.0 ** (sch.theta / 2) * s ** 2 / ((2.0 - 2.0 ** sch.theta) * sch.rho0) * math.log(1.0 / e)
    raw = math.inf if B ** (2.0 / sch.theta) > 1e300 else math.ceil(B ** (2.0 / sch.theta))
    cap = raw if sch.mode_cap is None else min(raw, sch.mode_cap)
    return raw, int(cap)


def deferral_measure(mono, theta: float) -> float:
    stars = rearrangement(mono).nstars
    return sum(float(w) ** theta for w in stars[2:]) + float(momentum_star(mono.k, mono.kp)) ** theta


# -- state ------------------------------------------------------------------------------------

@dataclass
class KamState:
    step: int
    nf: NormalForm
    R: Hamiltonian
    torus: TorusSpec
    norms: tuple = (0.0, 0.0, 0.0, 0.0)
    generators: list = field(default_factory=list)
    V: np.ndarray | None = None
    telemetry: list = field(default_factory=list)
    divisor_reports: list = field(default_factory=list)
    shifts: list = field(default_factory=list)


@dataclass(frozen=True)
class StepSettings:
    degree_cap: int
    drop_tol: float = 1e-30
    lie_tol_factor: float = 1e-2
    lie_max_order: int = 12
    divisor_abs_floor: float = 1e-12
    reality_tol: float = 1e-12
    certify: bool = True


def frequency_shift(R1_res: Hamiltonian, I0) -> np.ndarray:
    """Per-mode shift ``sum_a B^(n)_a prod I_m(0)^a_m`` from resonant class-1 terms."""
    M = R1_res.mode_cap
    act = I0.I0[I0.mode_cap - M: I0.mode_cap + M + 1] if isinstance(I0, TorusSpec) else np.asarray(I0)
    shift = np.zeros(2 * M + 1, dtype=complex)
    for mono, c in R1_res.items():
        if len(mono.j) != 1 or mono.k or mono.kp:
            raise ValueError("frequency shifts come from resonant class-1 terms only")
        val = c
        for n, e in mono.a:
            val *= act[n + M] ** e
        shift[mono.j[0] + M] += val
    if np.any(np.abs(shift.imag) > 1e-12 * np.maximum(1.0, np.abs(shift.real))):
        raise ValueError("resonant class-1 part is not real")
    return shift.real


def _constant_value(R0_res: Hamiltonian, act: np.ndarray) -> float:
    M = R0_res.mode_cap
    tot = 0j
    for mono, c in R0_res.items():
        val = c
        for n, e in mono.a:
            val *= act[n + M] ** e
        tot += val
    return float(tot.real)


def _certify(step: int, norms, bounds, shift_max: float | None = None, shift_bound: float | None = None):
    names = ("||R0||+", "||R1||+", "||R2||+")
    for name, val, b in zip(names, norms[:3], bounds):
        if val > b:
            raise CertificationFailure(step, name, val, b)
    if shift_bound is not None and shift_max > shift_bound:
        raise CertificationFailure(step, "frequency shift", shift_max, shift_bound)


def kam_step(state: KamState, sch: Schedule, settings: StepSettings) -> KamState:
    """One Newton step; returns the next state (the input is not modified)."""
    s = state.step + 1
    p = schedule_at(sch, s)
    pn = schedule_at(sch, s + 1)
    theta = sch.theta
    w_out = NormWeights(pn.rho, pn.mu, theta)
    M = state.R.mode_cap
    R = state.R
    act = state.torus.I0[state.torus.mode_cap - M: state.torus.mode_cap + M + 1]

    low = R.like({m: c for m, c in R.items() if len(m.j) < 2}, tail=np.zeros(3))
    R2 = R.by_class(2)
    res, non = resonant_project(low)
    thr = truncation_threshold(sch, s)
    solve_terms, deferred = {}, {}
    for mono, c in non.items():
        (solve_terms if deferral_measure(mono, theta) <= thr else deferred)[mono] = c
    S = R.like(solve_terms, tail=np.zeros(3))
    D = R.like(deferred, tail=np.zeros(3))

    freq = FrequencyVector(state.nf.vtilde, M, sch.gamma)
    floor = default_floor(S.terms, sch.gamma, settings.divisor_abs_floor)
    F, reports = solve(S.by_class(0), S.by_class(1), freq, floor)

    caps = Caps(M, settings.degree_cap, settings.drop_tol, w_out)
    tol = settings.lie_tol_factor * p.eps
    Fp = expand_j(F)
    A = ad_series(expand_j(R), Fp, caps, tol, shift=0, max_order=settings.lie_max_order)
    B = ad_series(expand_j(S), Fp, caps, tol, shift=1, max_order=settings.lie_max_order)
    series = A.value - B.value
    series = series.like(series.terms, tail=np.zeros(3))
    R_new = (D + R2 + split(series)).pruned(settings.drop_tol, w_out)

    res1 = res.by_class(1)
    shift = frequency_shift(res1, act)
    const = state.nf.const + _constant_value(res.by_class(0), act) - float(shift @ act)
    nf_new = NormalForm(state.nf.vtilde + shift, M, const)

    norms = plus_norm(R_new, w_out)
    tail = A.tail_norm_by_class + B.tail_norm_by_class + R_new.tail
    scale = max(R.max_abs_coeff(), 1e-300)
    reality = R_new.reality_defect() / scale if len(R_new) else 0.0
    if reality > settings.reality_tol:
        raise CertificationFailure(s, "reality defect", reality, settings.reality_tol)
    shift_max = float(np.abs(shift).max()) if shift.size else 0.0
    if settings.certify:
        _certify(s, norms, (p.eps, p.eps ** 0.6, (1 + p.d) * sch.eps0), shift_max, p.eps ** 0.5)

    row = {
        "step": s, "rho_s": pn.rho, "mu_s": pn.mu, "delta_s": p.delta, "eps_s_target": p.eps,
        "norm_R0_plus": norms[0], "norm_R1_plus": norms[1], "norm_R2_plus": norms[2],
        "n_terms": len(R_new), "n_solved": len(S), "n_deferred": len(D),
        "min_divisor": min((abs(r.divisor) for r in reports), default=math.nan),
        "max_freq_shift": shift_max,
        "lie_orders_used": max(A.orders_used, B.orders_used),
        "tail_norm": float(tail.sum()),
    }
    R_new.tail = tail
    return KamState(s, nf_new, R_new, state.torus, norms, state.generators + [F],
                    state.V, state.telemetry + [row], state.divisor_reports + [reports],
                    state.shifts + [shift])


# -- setup --------------------------------------------------------------------------------------

def make_schedule(cfg: RunConfig, eta0: float = 1.0) -> Schedule:
    return Schedule(cfg.rho0, cfg.r, cfg.mu0, cfg.theta, cfg.eps0, cfg.gamma, cfg.C_theta,
                    eta0, cfg.mode_cap)


def make_settings(cfg: RunConfig, certify: bool = True) -> StepSettings:
    t = cfg.tolerances
    return StepSettings(cfg.degree_cap, t["drop_tol"], t["lie_tol_factor"], int(t["lie_max_order"]),
                        t["divisor_abs_floor"], t["reality_tol"], certify)


def load_profile(cfg: RunConfig) -> GevreyProfile:
    if cfg.f_path:
        import json
        with open(cfg.f_path) as fh:
            return GevreyProfile.from_json_obj(json.load(fh))
    spec = cfg.f_profile
    if "coeffs" in spec:
        return GevreyProfile.from_json_obj({"theta": cfg.theta, **spec})
    reach = int(spec.get("reach", 6 * cfg.mode_cap))
    return gevrey_sample(float(spec["mu_f"]), float(spec.get("theta", cfg.theta)),
                         float(spec.get("C", 1.0)), reach, cfg.rng_seed)


def sample_omega(cfg: RunConfig) -> tuple[np.ndarray, dict]:
    """Frequencies ``omega`` on modes ``-M..M``: given explicitly or drawn by rejection."""
    spec = cfg.omega_spec
    M = cfg.mode_cap
    if spec.get("values") is not None:
        om = np.asarray(spec["values"], dtype=float)
        if om.shape != (2 * M + 1,):
            raise ConfigError("omega_spec.values needs one entry per mode")
        ok, worst = diophantine_check(FrequencyVector(om, M), cfg.gamma,
                                      int(spec["support_cap"]), int(spec["coeff_cap"]))
        return om, {"tries": 0, "diophantine_ok": ok, "worst_l": worst.key,
                    "worst_dist": worst.divisor, "worst_bound": worst.threshold}
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 1]))
    amp = float(spec["amplitude"])
    for tries in range(1, int(spec["max_tries"]) + 1):
        om = rng.uniform(-amp, amp, size=2 * M + 1)
        ok, worst = diophantine_check(FrequencyVector(om, M), cfg.gamma,
                                      int(spec["support_cap"]), int(spec["coeff_cap"]))
        if ok:
            return om, {"tries": tries, "diophantine_ok": True, "worst_l": worst.key,
                        "worst_dist": worst.divisor, "worst_bound": worst.threshold}
    raise NoConvergence(f"no Diophantine frequency vector within {spec['max_tries']} draws")


def seed_state(cfg: RunConfig, profile: GevreyProfile, V: np.ndarray, torus: TorusSpec,
               sch: Schedule, certify: bool = True) -> KamState:
    nf, R = build_seed(profile, V, cfg.eps, cfg.mode_cap, cfg.degree_cap)
    R_split = split(R)
    p1 = schedule_at(sch, 1)
    w = NormWeights(p1.rho, p1.mu, cfg.theta)
    norms = plus_norm(R_split, w)
    if certify:
        _certify(0, norms, (sch.eps0, sch.eps0 ** 0.6, sch.eps0))
    row = {
        "step": 0, "rho_s": p1.rho, "mu_s": p1.mu, "delta_s": 0.0, "eps_s_target": sch.eps0,
        "norm_R0_plus": norms[0], "norm_R1_plus": norms[1], "norm_R2_plus": norms[2],
        "n_terms": len(R_split), "n_solved": 0, "n_deferred": 0, "min_divisor": math.nan,
        "max_freq_shift": 0.0, "lie_orders_used": 0, "tail_norm": 0.0,
    }
    return KamState(0, nf, R_split, torus, norms, [], np.asarray(V, dtype=float).copy(), [row])


def run_pipeline(cfg: RunConfig, profile: GevreyProfile, V: np.ndarray, torus: TorusSpec,
                 sch: Schedule, certify: bool = True) -> KamState:
    state = seed_state(cfg, profile, V, torus, sch, certify)
    settings = make_settings(cfg, certify)
    for _ in range(cfg.steps):
        state = kam_step(state, sch, settings)
    return state


def invert_frequency_map(pipeline, V0: np.ndarray, target_omega: np.ndarray, tol: float,
                         max_outer: int):
    """Picard iteration ``V <- V - (vtilde(V) - omega)``.

    ``pipeline(V)`` must return the final :class:`KamState` for potential
    ``V``.  Returns ``(V_star, final_state, history)``, where history holds
    the sup-norm residual of each outer iteration.
    """
    V = np.asarray(V0, dtype=float).copy()
    history = []
    for it in range(1, max_outer + 1):
        state = pipeline(V)
        resid = state.nf.vtilde - target_omega
        err = float(np.abs(resid).max())
        history.append(err)
        if err <= tol:
            return V, state, history
        V = V - resid
    raise NoConvergence(f"frequency inversion residuals {history} after {max_outer} iterations")


@dataclass
class RunReport:
    config: RunConfig
    omega: np.ndarray
    omega_info: dict
    profile: GevreyProfile
    state: KamState | None
    V_star: np.ndarray
    inversion: list
    seed_norm: float
    ok: bool
    failure: dict | None = None
    final_bound: float | None = None


def run(cfg: RunConfig, certify: bool = True) -> RunReport:
    """Execute the configured number of steps, with optional frequency inversion.

    Step errors are caught and reported in ``failure`` rather than raised.
    """
    profile = load_profile(cfg)
    omega, info = sample_omega(cfg)
    torus = TorusSpec.default(cfg.r, cfg.theta, cfg.mode_cap)
    sch = make_schedule(cfg, eta0=1.0 - float(np.abs(omega).max()))
    state, V_star, history, failure, final_bound = None, omega.copy(), [], None, None
    seed_norm = math.nan
    try:
        _, R = build_seed(profile, omega, cfg.eps, cfg.mode_cap, cfg.degree_cap)
        seed_norm = seed_norm_certificate(R, NormWeights(cfg.rho0, cfg.mu0, cfg.theta), profile)

        def pipeline(V):
            return run_pipeline(cfg, profile, V, torus, sch, certify)

        if cfg.invert_frequencies:
            t = cfg.tolerances
            V_star, state, history = invert_frequency_map(pipeline, omega, omega, t["invert_tol"],
                                                          int(t["invert_max_outer"]))
        else:
            state = pipeline(omega)
        final_bound = 7.0 / 6.0 * cfg.eps0
        if certify and state.norms[2] > final_bound:
            raise CertificationFailure(state.step, "final ||R2||+", state.norms[2], final_bound)
    except NlsKamError as exc:
        failure = {"error": type(exc).__name__, "message": str(exc)}
    return RunReport(cfg, omega, info, profile, state, V_star, history, seed_norm,
                     failure is None, failure, final_bound)
