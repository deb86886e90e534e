"""Poisson brackets, Lie series and Hamiltonian vector fields.

The bracket convention is

    {F, G} = (1/2i) sum_j (dF/dq_j dG/dqbar_j - dF/dqbar_j dG/dq_j),

which on monomials gives the coefficient ``(1/2i)(k_j K'_j - k'_j K_j) b B``.
With this convention ``A o Phi^t = exp(t {., F}) A`` where ``Phi^t`` is the
flow of ``dq/dt = -(i/2) dF/dqbar``.  The physical equations of motion of a
Hamiltonian ``H`` are ``dq/dt = i dH/dqbar``.

Brackets never create new modes.  The only truncation is the degree cap.
Output terms above the cap are not enumerated.  Their norm-weighted mass
is bounded by a factorised sum instead, which is valid because the output
weight of a pair is at most the product of the input weights.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MixedClassInput, NoDecay
from .hamiltonian import (DenseTerms, Hamiltonian, NormWeights, _actions, expand_j,
                          log_term_weights, norm)
from .lattice import weights_array

_PAIR_BLOCK = 2_000_000


@dataclass(frozen=True)
class Caps:
    """Truncation settings shared by bracket and Lie series."""

    mode_cap: int
    degree_cap: int | None = None
    drop_tol: float = 1e-30
    weights: NormWeights | None = None


@dataclass
class BracketResult:
    value: Hamiltonian
    tail_norm_by_class: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orders_used: int = 1
    term_norms: list = field(default_factory=list)


def _padded(d: DenseTerms, M: int) -> DenseTerms:
    if d.mode_cap == M:
        return d
    off = M - d.mode_cap
    if off < 0:
        raise ValueError("caps cover fewer modes than the input")

    def pad(X):
        return np.pad(X, ((0, 0), (off, off)))

    J = np.where(d.J >= 0, d.J + off, -1)
    return DenseTerms(pad(d.A), pad(d.K), pad(d.KP), J, d.coeff, M)


def _unit_weights(d: DenseTerms, w: NormWeights | None) -> np.ndarray:
    if w is None:
        return np.abs(d.coeff)
    return np.abs(d.coeff) * np.exp(log_term_weights(d, w))


def _reduce(rows: np.ndarray, coeff: np.ndarray):
    """Sum coefficients of identical exponent rows."""
    if rows.shape[0] == 0:
        return rows, coeff
    rows = np.ascontiguousarray(rows)
    view = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()
    _, first, inv = np.unique(view, return_index=True, return_inverse=True)
    re = np.bincount(inv, weights=coeff.real)
    im = np.bincount(inv, weights=coeff.imag)
    return rows[first], re + 1j * im


def _canonical_key(H: Hamiltonian) -> bytes:
    h = hashlib.sha256()
    for m in sorted(H.terms):
        c = H.terms[m]
        h.update(repr((m, c.real.hex(), c.imag.hex())).encode())
    return h.digest()


def bracket(H1: Hamiltonian, H2: Hamiltonian, caps: Caps) -> BracketResult:
    """Poisson bracket ``{H1, H2}`` of two plain Hamiltonians.

    Output terms whose degree exceeds ``caps.degree_cap`` are dropped.  Their
    total weighted mass is bounded and booked in class 0 of the tail.

    The operands are put in a canonical order before summation, and the
    result is negated when they were swapped.  Antisymmetry therefore holds
    bit for bit, and ``{H, H}`` is exactly zero, regardless of the order in
    which rounding errors accumulate.
    """
    if not (H1.is_plain and H2.is_plain):
        raise MixedClassInput("bracket expects plain terms; expand J factors first")
    if len(H1) and len(H2):
        k1, k2 = _canonical_key(H1), _canonical_key(H2)
        if k1 == k2:
            return BracketResult(Hamiltonian({}, mode_cap=caps.mode_cap, degree_cap=caps.degree_cap))
        if k1 > k2:
            res = _bracket(H2, H1, caps)
            res.value = res.value.scale(-1.0)
            return res
    return _bracket(H1, H2, caps)


def _bracket(H1: Hamiltonian, H2: Hamiltonian, caps: Caps) -> BracketResult:
    M = caps.mode_cap
    L = 2 * M + 1
    tail = np.zeros(3)
    empty = Hamiltonian({}, mode_cap=M, degree_cap=caps.degree_cap)
    if not len(H1) or not len(H2):
        return BracketResult(empty, tail)
    d1, d2 = _padded(H1.dense, M), _padded(H2.dense, M)
    deg1, deg2 = d1.degrees(), d2.degrees()
    cap = caps.degree_cap
    u1, u2 = _unit_weights(d1, caps.weights), _unit_weights(d2, caps.weights)
    E1, E2 = d1.K + d1.KP, d2.K + d2.KP
    W = 3 * L
    rows_out, coeff_out = [], []
    for j in range(L):
        i1 = np.nonzero(E1[:, j])[0]
        i2 = np.nonzero(E2[:, j])[0]
        if not i1.size or not i2.size:
            continue
        for da in np.unique(deg1[i1]):
            s1 = i1[deg1[i1] == da]
            for db in np.unique(deg2[i2]):
                s2 = i2[deg2[i2] == db]
                if cap is not None and da + db - 2 > cap:
                    tail[0] += 0.5 * float((E1[s1, j] * u1[s1]).sum()) * float((E2[s2, j] * u2[s2]).sum())
                    continue
                step = max(1, _PAIR_BLOCK // max(1, s2.size))
                for lo in range(0, s1.size, step):
                    a = s1[lo: lo + step]
                    fac = (np.outer(d1.K[a, j], d2.KP[s2, j]) - np.outer(d1.KP[a, j], d2.K[s2, j]))
                    ia, ib = np.nonzero(fac)
                    if not ia.size:
                        continue
                    ta, tb = a[ia], s2[ib]
                    c = fac[ia, ib] * d1.coeff[ta] * d2.coeff[tb] / 2j
                    block = np.empty((ta.size, W), dtype=np.int8)
                    block[:, :L] = d1.A[ta] + d2.A[tb]
                    block[:, L:2 * L] = d1.K[ta] + d2.K[tb]
                    block[:, 2 * L:] = d1.KP[ta] + d2.KP[tb]
                    block[:, L + j] -= 1
                    block[:, 2 * L + j] -= 1
                    r, cc = _reduce(block, c)
                    rows_out.append(r)
                    coeff_out.append(cc)
    if not rows_out:
        return BracketResult(empty, tail)
    rows, coeff = _reduce(np.concatenate(rows_out), np.concatenate(coeff_out))
    keep = coeff != 0
    rows, coeff = rows[keep].astype(np.int64), coeff[keep]
    J = np.full((rows.shape[0], 2), -1, dtype=np.int64)
    dense = DenseTerms(rows[:, :L], rows[:, L:2 * L], rows[:, 2 * L:], J, coeff, M)
    value = Hamiltonian.from_dense(dense, degree_cap=cap)
    value = value.pruned(caps.drop_tol, caps.weights)
    tail += value.tail
    value.tail = np.zeros(3)
    return BracketResult(value, tail)


def _size(H: Hamiltonian, w: NormWeights | None) -> float:
    if not len(H):
        return 0.0
    d = H.dense
    return float(_unit_weights(d, w).max())


def ad_series(X: Hamiltonian, F: Hamiltonian, caps: Caps, tol: float, *, shift: int = 0,
              max_order: int = 12) -> BracketResult:
    """``sum_{m>=1} ad^m(X) / (m + shift)!`` with ``ad(Y) = {Y, F}``.

    Terms are generated until one has weighted size below ``tol``.  The
    remaining series tail is then estimated geometrically from the last two
    term sizes.  Raises :class:`NoDecay` when sizes fail to decrease for three
    consecutive orders, or when the hard order cap is reached without decay.
    """
    M = caps.mode_cap
    total = Hamiltonian({}, mode_cap=M, degree_cap=caps.degree_cap)
    tail = np.zeros(3)
    sizes: list[float] = []
    if not len(F) or not len(X):
        return BracketResult(total, tail, 0, sizes)
    cur = X  # holds ad^m(X) / m!
    rises = 0
    order = 0
    for m in range(1, max_order + 1):
        br = bracket(cur, F, caps)
        cur = br.value.scale(1.0 / m)
        fac = math.factorial(m) / math.factorial(m + shift)
        tail += br.tail_norm_by_class * fac / m
        term = cur.scale(fac)
        total = total + term
        order = m
        t = _size(term, caps.weights)
        if sizes and t >= sizes[-1] and t > 0:
            rises += 1
            if rises >= 3:
                raise NoDecay(f"Lie series sizes rose for three orders: {sizes + [t]}")
        else:
            rises = 0
        sizes.append(t)
        if t < tol:
            break
    else:
        if len(sizes) >= 2 and sizes[-1] >= sizes[-2] > 0:
            raise NoDecay(f"Lie series did not decay within {max_order} orders: {sizes}")
    if len(sizes) >= 2 and sizes[-2] > 0 and sizes[-1] > 0:
        ratio = sizes[-1] / sizes[-2]
        if ratio < 1:
            tail[0] += sizes[-1] * ratio / (1 - ratio)
    total.tail = np.zeros(3)
    return BracketResult(total, tail, order, sizes)


def lie_transform(H: Hamiltonian, F: Hamiltonian, caps: Caps, tol: float,
                  max_order: int = 12) -> BracketResult:
    """``H o Phi_F = sum_n ad^n(H) / n!`` truncated as in :func:`ad_series`."""
    rest = ad_series(H, F, caps, tol, max_order=max_order)
    value = H.with_caps(max(caps.mode_cap, H.mode_cap), caps.degree_cap) + rest.value
    return BracketResult(value, rest.tail_norm_by_class, rest.orders_used, rest.term_norms)


# -- evaluation -----------------------------------------------------------------------------

class PolyEvaluator:
    """Compiled plain polynomial supporting values and first derivatives.

    Frozen-action powers and J factors are folded in numerically using
    ``I0``.  Terms are then grouped by their distinct q-exponent rows and
    conj(q)-exponent rows.  The polynomial becomes the bilinear form
    ``Qa^T C Qb`` with ``Qa = q^K`` and ``Qb = qbar^KP``, so each gradient is a
    pair of small matrix-vector products.
    """

    def __init__(self, H: Hamiltonian, I0=None):
        if not H.is_plain:
            H = expand_j(H)
        self.mode_cap = M = H.mode_cap
        self.L = L = 2 * M + 1
        if not len(H):
            K = KP = np.zeros((0, L), dtype=np.int64)
            coeff = np.zeros(0, dtype=complex)
        else:
            d = H.dense
            coeff = d.coeff.copy()
            if d.A.any():
                if I0 is None:
                    raise ValueError("frozen actions required for terms with a-exponents")
                act = _actions(I0, M)
                coeff = coeff * np.prod(act[None, :] ** d.A, axis=1)
            rows = np.concatenate([d.K, d.KP], axis=1).astype(np.int8)
            rows, coeff = _reduce(rows, coeff)
            rows = rows.astype(np.int64)
            K, KP = rows[:, :L], rows[:, L:]
        self.K, self.KP, self.coeff = K, KP, coeff
        self.UK, ia = np.unique(K, axis=0, return_inverse=True) if len(K) else (K, np.zeros(0, int))
        self.UKP, ib = np.unique(KP, axis=0, return_inverse=True) if len(KP) else (KP, np.zeros(0, int))
        ia, ib = np.ravel(ia), np.ravel(ib)
        shape = (len(self.UK), len(self.UKP))
        if shape[0] * shape[1] <= 4 * max(1, len(coeff)) + 1024:
            C = np.zeros(shape, dtype=complex)
            np.add.at(C, (ia, ib), coeff)
        else:
            from scipy.sparse import csr_matrix
            C = csr_matrix((coeff, (ia, ib)), shape=shape)
        self.C = C
        self.maxe = int(max(K.max(initial=0), KP.max(initial=0)))
        self._cols = np.arange(L)

    def _powers(self, x, E):
        """Row products ``x^E`` and their derivatives ``d/dx_j``, shapes (n,) and (n, L)."""
        n = E.shape[0]
        tab = x[None, :] ** np.arange(self.maxe + 1)[:, None]
        P = tab[E, self._cols]
        pre = np.ones((n, self.L + 1), dtype=complex)
        suf = np.ones((n, self.L + 1), dtype=complex)
        pre[:, 1:] = np.cumprod(P, axis=1)
        suf[:, :-1] = np.cumprod(P[:, ::-1], axis=1)[:, ::-1]
        D = E * tab[np.maximum(E - 1, 0), self._cols] * pre[:, :-1] * suf[:, 1:]
        return pre[:, -1], D

    def value(self, q, qbar=None) -> complex:
        q = np.asarray(q, dtype=complex)
        qbar = np.conj(q) if qbar is None else np.asarray(qbar, dtype=complex)
        if not self.coeff.size:
            return 0j
        Qa, _ = self._powers(q, self.UK)
        Qb, _ = self._powers(qbar, self.UKP)
        return complex(Qa @ (self.C @ Qb))

    def gradients(self, q, qbar=None) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(dH/dq, dH/dqbar)`` per mode, with q and qbar independent."""
        q = np.asarray(q, dtype=complex)
        qbar = np.conj(q) if qbar is None else np.asarray(qbar, dtype=complex)
        if not self.coeff.size:
            z = np.zeros(self.L, dtype=complex)
            return z, z.copy()
        Qa, DA = self._powers(q, self.UK)
        Qb, DB = self._powers(qbar, self.UKP)
        return (self.C @ Qb) @ DA, (self.C.T @ Qa) @ DB


def gradient(H: Hamiltonian, q, j: int, I0=None, qbar=None) -> complex:
    """Exact ``dH/dq_j`` at the phase point (``qbar`` defaults to ``conj(q)``)."""
    g, _ = PolyEvaluator(H, I0).gradients(q, qbar)
    return complex(g[j + H.mode_cap])


def vector_field(H: Hamiltonian, q, I0=None) -> np.ndarray:
    """Physical velocity ``dq_n/dt = i dH/dqbar_n``; ``H`` should include the normal form."""
    _, gb = PolyEvaluator(H, I0).gradients(q)
    return 1j * gb


def gradient_decay_ratio(H: Hamiltonian, q, r: float, w: NormWeights, I0=None) -> float:
    """``sup_j exp(r w(j)^theta) |dH/dq_j|`` divided by the weighted norm of ``H``.

    The ratio is reported for information only.  The constant bounding it
    depends on ``(r, rho, mu, theta)`` and is not known explicitly.
    """
    Hp = expand_j(H) if not H.is_plain else H
    nrm = norm(Hp, w)
    if nrm == 0:
        return 0.0
    g, _ = PolyEvaluator(Hp, I0).gradients(q)
    modes = np.arange(-H.mode_cap, H.mode_cap + 1)
    scale = np.exp(r * weights_array(modes) ** w.theta)
    return float(np.max(scale * np.abs(g)) / nrm)
