"""Shared test utilities: random Hamiltonians and independent oracles."""

from __future__ import annotations

import numpy as np

from nlskam.hamiltonian import Hamiltonian
from nlskam.lattice import Monomial


def random_monomial(rng, mode_cap: int, max_degree: int, allow_a: bool = False,
                    min_degree: int = 1) -> Monomial:
    """Random plain monomial with ``sum(2a + k + kp)`` in ``[min_degree, max_degree]``."""
    deg = int(rng.integers(min_degree, max_degree + 1))
    a, k, kp = {}, {}, {}
    left = deg
    while left > 0:
        n = int(rng.integers(-mode_cap, mode_cap + 1))
        kind = int(rng.integers(0, 3 if allow_a and left >= 2 else 2))
        if kind == 2:
            a[n] = a.get(n, 0) + 1
            left -= 2
        else:
            d = k if kind == 0 else kp
            d[n] = d.get(n, 0) + 1
            left -= 1
    return Monomial.make(a, k, kp)


def random_hamiltonian(rng, mode_cap: int, max_degree: int, n_terms: int, allow_a: bool = False,
                       real: bool = False, degree_cap=None, min_degree: int = 1) -> Hamiltonian:
    terms = {}
    for _ in range(n_terms):
        m = random_monomial(rng, mode_cap, max_degree, allow_a, min_degree)
        c = complex(rng.normal(), rng.normal())
        terms[m] = terms.get(m, 0) + c
        if real:
            terms[m.conjugate()] = terms.get(m.conjugate(), 0) + c.conjugate()
    return Hamiltonian(terms, mode_cap=mode_cap, degree_cap=degree_cap)


def fd_partials(H: Hamiltonian, q, qbar, I0=None, h: float = 1e-5):
    """Central differences of ``H(q, qbar)`` in each ``q_n`` and ``qbar_n`` separately."""
    L = q.size
    dq, dqb = np.zeros(L, complex), np.zeros(L, complex)
    for j in range(L):
        e = np.zeros(L)
        e[j] = h
        dq[j] = (H.evaluate(q + e, qbar, I0) - H.evaluate(q - e, qbar, I0)) / (2 * h)
        dqb[j] = (H.evaluate(q, qbar + e, I0) - H.evaluate(q, qbar - e, I0)) / (2 * h)
    return dq, dqb


def fd_bracket(F: Hamiltonian, G: Hamiltonian, q, qbar=None, I0=None) -> complex:
    """``(1/2i) sum (dF/dq dG/dqbar - dF/dqbar dG/dq)`` with numerical partials."""
    qbar = np.conj(q) if qbar is None else qbar
    Fq, Fqb = fd_partials(F, q, qbar, I0)
    Gq, Gqb = fd_partials(G, q, qbar, I0)
    return complex(np.sum(Fq * Gqb - Fqb * Gq) / 2j)


def random_point(rng, mode_cap: int, radius: float = 0.8):
    L = 2 * mode_cap + 1
    return radius * (rng.uniform(-1, 1, L) + 1j * rng.uniform(-1, 1, L)) / np.sqrt(2)
