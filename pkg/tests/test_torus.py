import warnings

import numpy as np
import pytest

from helpers import random_hamiltonian
from nlskam.config import parse_config
from nlskam.engine import load_profile, make_schedule, run_pipeline, sample_omega
from nlskam.errors import IntegratorFailure
from nlskam.hamiltonian import Hamiltonian, NormalForm, TorusSpec
from nlskam.lattice import Monomial
from nlskam.poisson import PolyEvaluator
from nlskam.seed import build_seed
from nlskam.torus import (check_torus, integrate_seed, to_normal, to_original, torus_point,
                          trajectory)


def small_state(eps):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = parse_config({"mode_cap": 1, "degree_cap": 12, "eps": eps, "steps": 1})
    prof = load_profile(cfg)
    om, _ = sample_omega(cfg)
    torus = TorusSpec.default(cfg.r, cfg.theta, cfg.mode_cap)
    st = run_pipeline(cfg, prof, om, torus, make_schedule(cfg), certify=False)
    _, R = build_seed(prof, om, cfg.eps, cfg.mode_cap, cfg.degree_cap)
    return cfg, om, torus, st, R


def test_torus_point_lies_on_torus():
    t = TorusSpec.default(1.0, 0.5, 2)
    p = torus_point(t, 3)
    assert np.allclose(np.abs(p) ** 2, t.I0, rtol=1e-14)
    assert np.array_equal(p, torus_point(t, 3))


def test_linear_flow_conserves_actions_exactly():
    om = np.array([0.11, -0.3, 0.27])
    nf = NormalForm(om, 1)
    t = TorusSpec.default(1.0, 0.5, 1)
    chk = check_torus(nf, Hamiltonian({}, mode_cap=1), [], t, T=200.0, tol=1e-12, n_samples=20)
    assert chk.transformed.energy_drift <= 1e-14
    assert chk.transformed.normal_action_drift <= 1e-15 * t.I0.max()
    assert chk.ok


def test_action_dependent_term_keeps_actions_fixed():
    # |q_0|^4 + |q_0|^2 |q_1|^2 commutes with every action
    R = Hamiltonian({Monomial.make(k={0: 2}, kp={0: 2}): 0.3,
                     Monomial.make(k={0: 1, 1: 1}, kp={0: 1, 1: 1}): -0.2}, mode_cap=1)
    nf = NormalForm(np.array([0.11, -0.3, 0.27]), 1)
    t = TorusSpec.default(0.5, 0.5, 1)
    q0 = torus_point(t, 1)
    times = np.linspace(0, 100, 11)
    for method in ("DOP853", "midpoint"):
        Q, _ = integrate_seed(nf, PolyEvaluator(R), q0, 100.0, times, 1e-12, method, dt=0.05)
        assert np.abs(np.abs(Q) ** 2 - np.abs(q0) ** 2).max() <= 1e-11


def test_midpoint_agrees_with_dop853():
    rng = np.random.default_rng(4)
    R = random_hamiltonian(rng, 1, 4, 6, real=True, min_degree=3) * 0.05
    nf = NormalForm(np.array([0.2, -0.1, 0.35]), 1)
    q0 = 0.3 * np.exp(1j * rng.uniform(0, 6, 3))
    times = np.linspace(0, 5, 6)
    a, _ = integrate_seed(nf, PolyEvaluator(R), q0, 5.0, times, 1e-12, "DOP853")
    b, _ = integrate_seed(nf, PolyEvaluator(R), q0, 5.0, times, 1e-12, "midpoint", dt=1e-3)
    assert np.abs(a - b).max() <= 1e-6


def test_unknown_method():
    nf = NormalForm(np.zeros(3), 1)
    with pytest.raises(ValueError):
        integrate_seed(nf, PolyEvaluator(Hamiltonian({}, mode_cap=1)), np.ones(3), 1.0, np.zeros(1), 1e-10,
                       "euler")


def test_generator_flows_invert():
    _, _, torus, st, _ = small_state(1e-3)
    gens = [PolyEvaluator(F, torus) for F in st.generators]
    p = torus_point(torus, 0)
    q = to_original(gens, p)
    assert np.abs(q - p).max() > 0
    assert np.abs(to_normal(gens, q) - p).max() <= 1e-12 * np.abs(p).max()


def test_paired_run_small_system():
    cfg, om, torus, st, R = small_state(1e-3)
    chk = check_torus(NormalForm(om, 1), R, st.generators, torus, T=100.0, tol=1e-12, n_samples=20)
    tr, un = chk.transformed, chk.untransformed
    assert tr.energy_drift <= 1e-10 and un.energy_drift <= 1e-10
    assert tr.normal_action_drift < un.normal_action_drift
    assert set(chk.to_json_obj()) == {"T", "integrator_tol", "checks", "transformed", "untransformed"}


def test_trajectory_reports_window_exit():
    t = TorusSpec.default(1.0, 0.5, 1)
    nf = NormalForm(np.array([0.1, 0.2, 0.3]), 1)
    rec = trajectory(nf, Hamiltonian({}, mode_cap=1), [], t, 10 * torus_point(t, 0), 1.0, 1e-10, 4)
    assert not rec.window_ok and rec.window_margin < 0


def test_integrator_failure_is_raised():
    # |q|^6 with a huge coefficient blows up the step control
    R = Hamiltonian({Monomial.make(k={0: 3}, kp={0: 1}): 1e30,
                     Monomial.make(k={0: 1}, kp={0: 3}): 1e30}, mode_cap=1)
    nf = NormalForm(np.zeros(3), 1)
    with pytest.raises(IntegratorFailure):
        integrate_seed(nf, PolyEvaluator(R), np.array([0, 1.0, 0], complex), 10.0,
                       np.array([0.0, 10.0]), 1e-12, "DOP853")
