"""Trajectory checks on the constructed torus.

A point ``p`` on the target torus (``|p_n|^2 = I_n(0)``) is written in the
coordinates of the final normal form.  Its original coordinates are
``q = Phi_1(Phi_2(... Phi_S(p)))``, where ``Phi_s`` is the time-1 flow of
``dq/dt = -(i/2) dF_s/dqbar``.  The seed system is integrated from ``q``.
Pulling samples back through the inverse flows tracks the actions in the
normal-form chart, where they should stay frozen.  The same is done for the
untransformed start ``q(0) = p`` as a control.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegratorFailure
from .hamiltonian import Hamiltonian, NormalForm, TorusSpec
from .lattice import weights_array
from .poisson import PolyEvaluator


def generator_flow(F: PolyEvaluator, q0: np.ndarray, t: float, rtol: float = 1e-13,
                   atol: float = 1e-18) -> np.ndarray:
    """Time-``t`` map of ``dq/dt = -(i/2) dF/dqbar`` for a real generator."""
    if not F.coeff.size:
        return np.asarray(q0, dtype=complex).copy()

    def rhs(_, q):
        return -0.5j * F.gradients(q)[1]

    sol = solve_ivp(rhs, (0.0, t), np.asarray(q0, dtype=complex), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegratorFailure(sol.message)
    return sol.y[:, -1]


def to_original(gens: list[PolyEvaluator], p: np.ndarray) -> np.ndarray:
    q = np.asarray(p, dtype=complex)
    for F in reversed(gens):
        q = generator_flow(F, q, 1.0)
    return q


def to_normal(gens: list[PolyEvaluator], q: np.ndarray) -> np.ndarray:
    p = np.asarray(q, dtype=complex)
    for F in gens:
        p = generator_flow(F, p, -1.0)
    return p


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    actions: np.ndarray          # |q_n(t)|^2, shape (nt, modes)
    energy: np.ndarray
    energy_drift: float          # max |H(t) - H(0)| / |H(0)|
    action_drift: float          # sup |(|q_n(t)|^2 - |q_n(0)|^2)|, original coordinates
    normal_action_drift: float   # sup |(|p_n(t)|^2 - I_n(0))| in the normal-form chart
    window_ok: bool
    window_margin: float         # min over samples of the log distance to the window edges
    nfev: int = 0
    runtime: float = 0.0
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "energy_drift": self.energy_drift, "action_drift": self.action_drift,
            "normal_action_drift": self.normal_action_drift, "window_ok": self.window_ok,
            "window_margin": self.window_margin, "nfev": self.nfev, "runtime": self.runtime,
            **self.extras,
        }


def integrate_seed(nf: NormalForm, R: PolyEvaluator, q0: np.ndarray, T: float, times: np.ndarray,
                   tol: float, method: str = "DOP853", dt: float = 1e-2):
    """Integrate ``dq/dt = i dH/dqbar`` for ``H = N + R`` and sample at ``times``.

    ``DOP853`` runs in the interaction picture ``q = exp(i Omega t) z``, which
    removes the fast linear rotation.  ``midpoint`` is the fixed-step
    implicit midpoint rule (symplectic) in the original variables.
    """
    Om = nf.frequencies
    if method == "DOP853":
        def rhs(t, z):
            ph = np.exp(1j * Om * t)
            q = ph * z
            return np.conj(ph) * (1j * R.gradients(q)[1])

        sol = solve_ivp(rhs, (0.0, T), np.asarray(q0, dtype=complex), method="DOP853",
                        t_eval=times, rtol=tol, atol=tol * 1e-3)
        if not sol.success:
            raise IntegratorFailure(sol.message)
        Q = (np.exp(1j * np.outer(sol.t, Om)) * sol.y.T)
        return Q, int(sol.nfev)
    if method == "midpoint":
        def f(q):
            return 1j * (Om * q + R.gradients(q)[1])

        q = np.asarray(q0, dtype=complex).copy()
        out = np.empty((times.size, q.size), dtype=complex)
        t, k, nfev = 0.0, 0, 0
        while k < times.size and times[k] <= 0.0:
            out[k] = q
            k += 1
        nsteps = int(np.ceil(T / dt))
        h = T / nsteps
        for i in range(nsteps):
            nxt = q + h * f(q)
            for _ in range(50):
                new = q + h * f(0.5 * (q + nxt))
                nfev += 1
                if np.max(np.abs(new - nxt)) <= 1e-15 * max(1.0, np.max(np.abs(new))):
                    nxt = new
                    break
                nxt = new
            else:
                raise IntegratorFailure("implicit midpoint iteration did not converge")
            q = nxt
            t = (i + 1) * h
            while k < times.size and times[k] <= t + 1e-12:
                out[k] = q
                k += 1
        return out, nfev
    raise ValueError(f"unknown integrator {method!r}")


def torus_point(torus: TorusSpec, rng_seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([rng_seed, 2]))
    phases = rng.uniform(0.0, 2 * np.pi, size=torus.I0.size)
    return np.sqrt(torus.I0) * np.exp(1j * phases)


def trajectory(nf: NormalForm, R_seed: Hamiltonian, gens: list[PolyEvaluator], torus: TorusSpec,
               q0: np.ndarray, T: float, tol: float, n_samples: int = 200,
               method: str = "DOP853") -> TrajectoryRecord:
    start = time.perf_counter()
    times = np.linspace(0.0, T, n_samples + 1)
    R = PolyEvaluator(R_seed)
    Q, nfev = integrate_seed(nf, R, q0, T, times, tol, method)
    H = nf.as_hamiltonian() + R_seed if len(R_seed) else nf.as_hamiltonian()
    Hev = PolyEvaluator(H)
    energy = np.array([Hev.value(q).real for q in Q])
    e0 = abs(energy[0]) if energy[0] != 0 else 1.0
    actions = np.abs(Q) ** 2
    pulled = np.array([to_normal(gens, q) for q in Q]) if gens else Q
    I0 = torus.I0
    amp = np.exp(-torus.r * weights_array(torus.modes) ** torus.theta)
    lo, hi = np.abs(Q) / (0.5 * amp), (2.0 * amp) / np.abs(Q)
    margin = float(np.log(np.minimum(lo, hi)).min())
    return TrajectoryRecord(
        times, actions, energy,
        float(np.abs(energy - energy[0]).max() / e0),
        float(np.abs(actions - actions[0]).max()),
        float(np.abs(np.abs(pulled) ** 2 - I0).max()),
        bool(margin >= 0), margin, nfev, time.perf_counter() - start,
    )


@dataclass
class TorusCheck:
    transformed: TrajectoryRecord
    untransformed: TrajectoryRecord
    T: float
    tol: float

    @property
    def checks(self) -> dict:
        tr, un = self.transformed, self.untransformed
        return {
            "energy": tr.energy_drift <= 10 * self.tol and un.energy_drift <= 10 * self.tol,
            "action_vs_control": tr.normal_action_drift <= un.normal_action_drift,
            "action_abs": tr.normal_action_drift <= 1e-4,
            "window": tr.window_ok,
        }

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json_obj(self) -> dict:
        return {"T": self.T, "integrator_tol": self.tol, "checks": self.checks,
                "transformed": self.transformed.summary(),
                "untransformed": self.untransformed.summary()}


def check_torus(nf: NormalForm, R_seed: Hamiltonian, generators: list[Hamiltonian],
                torus: TorusSpec, T: float = 1e3, tol: float = 1e-13, rng_seed: int = 0,
                n_samples: int = 200, method: str = "DOP853") -> TorusCheck:
    """Paired runs from the transformed and the untransformed torus point."""
    gens = [PolyEvaluator(F, torus) for F in generators if len(F)]
    p = torus_point(torus, rng_seed)
    q_tr = to_original(gens, p)
    tr = trajectory(nf, R_seed, gens, torus, q_tr, T, tol, n_samples, method)
    un = trajectory(nf, R_seed, gens, torus, p, T, tol, n_samples, method)
    tr.extras["initial_shift"] = float(np.abs(q_tr - p).max())
    return TorusCheck(tr, un, T, tol)
