"""Seed Hamiltonian of the quintic lattice NLS and Gevrey profiles.

The perturbation is

    eps * sum_n fhat(n) * sum q_{n1} qbar_{n2} q_{n3} qbar_{n4} q_{n5} qbar_{n6},

where the inner sum runs over ordered 6-tuples with
``n1 - n2 + n3 - n4 + n5 - n6 = -n``.  Ordered tuples are grouped by their
q-multiset and conj(q)-multiset.  Each group becomes one monomial whose
coefficient carries the number of orderings.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import CapTooSmall, NormDiverges
from .hamiltonian import (DenseTerms, Hamiltonian, NormalForm, NormWeights, TorusSpec,
                          log_term_weights, norm)
from .lattice import weight

__all__ = ["GevreyProfile", "TorusSpec", "gevrey_sample", "build_seed", "seed_norm_certificate"]


@dataclass
class GevreyProfile:
    """Fourier data ``fhat(n)`` with ``|fhat(n)| <= C exp(-mu_f w(n)^theta)``."""

    mu_f: float
    theta: float
    C: float
    coeffs: dict = field(default_factory=dict)  # n -> complex

    def __post_init__(self):
        if self.mu_f <= 0:
            raise ValueError("mu_f must be positive")
        self.coeffs = {int(n): complex(c) for n, c in self.coeffs.items()}
        for n, c in self.coeffs.items():
            if abs(c) > self.envelope(n) * (1 + 1e-12):
                raise ValueError(f"fhat({n}) violates the Gevrey bound")

    def envelope(self, n: int) -> float:
        return self.C * math.exp(-self.mu_f * weight(n) ** self.theta)

    def __call__(self, n: int) -> complex:
        return self.coeffs.get(int(n), 0j)

    @property
    def reach(self) -> int:
        return max((abs(n) for n in self.coeffs), default=0)

    def is_real(self, tol: float = 0.0) -> bool:
        return all(abs(self(-n) - c.conjugate()) <= tol for n, c in self.coeffs.items())

    def to_json_obj(self) -> dict:
        return {
            "theta": self.theta, "mu_f": self.mu_f, "C": self.C,
            "coeffs": [[n, float(c.real).hex(), float(c.imag).hex()]
                       for n, c in sorted(self.coeffs.items())],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "GevreyProfile":
        def num(x):
            return float.fromhex(x) if isinstance(x, str) else float(x)
        coeffs = {int(n): complex(num(re), num(im)) for n, re, im in obj["coeffs"]}
        return cls(float(obj["mu_f"]), float(obj["theta"]), float(obj["C"]), coeffs)

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def gevrey_sample(mu_f: float, theta: float, C: float, mode_cap: int,
                  rng_seed: int) -> GevreyProfile:
    """Random profile ``fhat(n) = C exp(-mu_f w(n)^theta) u_n`` on ``|n| <= mode_cap``.

    ``u_0`` is real in ``[-1, 1]``.  For ``n > 0``, ``u_n`` has uniform modulus
    in ``[0, 1]`` and uniform phase, and ``u_{-n} = conj(u_n)``, so the
    profile describes a real function.
    """
    rng = np.random.default_rng(rng_seed)
    u0 = rng.uniform(-1.0, 1.0)
    mods = rng.uniform(0.0, 1.0, size=mode_cap)
    phases = rng.uniform(0.0, 2 * np.pi, size=mode_cap)
    coeffs = {0: C * math.exp(-mu_f) * u0}
    for n in range(1, mode_cap + 1):
        u = mods[n - 1] * np.exp(1j * phases[n - 1])
        env = C * math.exp(-mu_f * weight(n) ** theta)
        coeffs[n] = env * u
        coeffs[-n] = env * np.conj(u)
    return GevreyProfile(mu_f, theta, C, {n: c for n, c in coeffs.items() if c != 0})


def _triples(mode_cap: int):
    """All 3-multisets of modes as dense count rows, with ordering counts and mode sums."""
    modes = range(-mode_cap, mode_cap + 1)
    L = 2 * mode_cap + 1
    rows, mult, sums = [], [], []
    for combo in itertools.combinations_with_replacement(modes, 3):
        row = np.zeros(L, dtype=np.int64)
        for n in combo:
            row[n + mode_cap] += 1
        rows.append(row)
        mult.append(6 // math.prod(math.factorial(v) for v in Counter(combo).values()))
        sums.append(sum(combo))
    return np.array(rows), np.array(mult, dtype=float), np.array(sums)


def _seed_dense(fhat, mode_cap: int, eps: float) -> DenseTerms:
    """Meet in the middle: pair every q-triple with every conj(q)-triple."""
    rows, mult, sums = _triples(mode_cap)
    # n = sum(conj side) - sum(q side), so the monomial momentum is -n
    nmat = sums[None, :] - sums[:, None]
    fvals = np.vectorize(lambda n: complex(fhat(int(n))), otypes=[complex])(np.arange(nmat.min(), nmat.max() + 1))
    coef = eps * fvals[nmat - nmat.min()] * np.outer(mult, mult)
    il, ir = np.nonzero(coef)
    L = 2 * mode_cap + 1
    T = il.size
    zero = np.zeros((T, L), dtype=np.int64)
    J = np.full((T, 2), -1, dtype=np.int64)
    return DenseTerms(zero, rows[il], rows[ir], J, coef[il, ir], mode_cap)


def build_seed(f: GevreyProfile, V, eps: float, mode_cap: int,
               degree_cap: int | None = None) -> tuple[NormalForm, Hamiltonian]:
    """Normal form ``sum (n^2 + V_n)|q_n|^2`` and the sextic perturbation.

    Raises :class:`CapTooSmall` when ``eps != 0`` but no tuple inside the
    mode cap meets a nonzero Fourier coefficient.
    """
    V = np.asarray(V, dtype=float)
    if V.shape != (2 * mode_cap + 1,):
        raise ValueError("V must have one entry per mode")
    if np.any(np.abs(V) > 1):
        raise ValueError("potential values must lie in [-1, 1]")
    if degree_cap is not None and degree_cap < 6:
        raise ValueError("degree cap below the sextic degree")
    nf = NormalForm(V, mode_cap)
    if eps == 0:
        return nf, Hamiltonian({}, mode_cap=mode_cap, degree_cap=degree_cap)
    dense = _seed_dense(f, mode_cap, eps)
    if not len(dense):
        raise CapTooSmall("no admissible sextic tuple inside the mode cap")
    return nf, Hamiltonian.from_dense(dense, degree_cap=degree_cap)


def _envelope_sup(f: GevreyProfile, mode_cap: int, w: NormWeights) -> float:
    def env(n):
        return f.envelope(n)

    d = _seed_dense(env, mode_cap, 1.0)
    return float((np.abs(d.coeff) * np.exp(log_term_weights(d, w))).max())


def seed_norm_certificate(R: Hamiltonian, w: NormWeights, f: GevreyProfile,
                          growth_tol: float = 0.05) -> float:
    """Weighted norm of the seed, checked for stability under mode-cap doubling.

    The probe compares the sup over the worst-case envelope profile
    ``C exp(-mu_f w(n)^theta)`` at the seed's mode cap and at twice that cap.
    Growth beyond ``growth_tol`` raises :class:`NormDiverges`.  This happens
    when ``w.mu`` exceeds ``mu_f``.
    """
    value = norm(R, w)
    if not np.isfinite(value):
        raise NormDiverges("seed norm is not finite")
    if f.C > 0 and len(R):
        M = R.mode_cap
        base = _envelope_sup(f, M, w)
        doubled = _envelope_sup(f, 2 * M, w)
        if doubled > base * (1 + growth_tol):
            raise NormDiverges(
                f"envelope sup grows from {base:.4e} (cap {M}) to {doubled:.4e} (cap {2 * M})")
    return value
