"""Sparse Hamiltonians, weighted norms and the J-regrouping.

A :class:`Hamiltonian` maps :class:`~nlskam.lattice.Monomial` keys to complex
coefficients.  Frozen actions ``I_n(0)`` stay symbolic: they live in the
``a`` exponents and only become numbers on evaluation.  So ``split`` and
``expand_j`` are exact algebraic rewrites that never see numeric action
values.

Numerical kernels run on a dense exponent layout (:class:`DenseTerms`).  Each
mode ``n`` in ``[-M, M]`` becomes column ``n + M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import DegreeOverflow, MixedClassInput, ModeOutOfRange
from .lattice import Monomial, expvec, weights_array

__all__ = [
    "NormWeights", "TorusSpec", "NormalForm", "DenseTerms", "Hamiltonian",
    "norm", "plus_norm", "term_norms", "split", "expand_j", "resonant_project",
]


@dataclass(frozen=True)
class NormWeights:
    rho: float
    mu: float
    theta: float

    def __post_init__(self):
        if not (self.rho > 0 and self.mu > 0):
            raise ValueError("rho and mu must be strictly positive")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")


@dataclass(frozen=True)
class TorusSpec:
    """Target torus: decay parameters and frozen actions ``I_n(0)`` on modes ``-M..M``."""

    r: float
    theta: float
    mode_cap: int
    I0: np.ndarray = field(repr=False)

    @classmethod
    def default(cls, r: float, theta: float, mode_cap: int, scale: float = 0.75) -> "TorusSpec":
        if not 0 < scale <= 1:
            raise ValueError("action scale must lie in (0, 1]")
        modes = np.arange(-mode_cap, mode_cap + 1)
        I0 = scale * np.exp(-2.0 * r * weights_array(modes) ** theta)
        return cls(r, theta, mode_cap, I0)

    def __post_init__(self):
        I0 = np.asarray(self.I0, dtype=float)
        if I0.shape != (2 * self.mode_cap + 1,):
            raise ValueError("I0 must have one entry per mode")
        ceiling = np.exp(-2.0 * self.r * weights_array(self.modes) ** self.theta)
        if np.any(I0 <= 0) or np.any(I0 > ceiling * (1 + 1e-12)):
            raise ValueError("frozen actions must satisfy 0 < I_n(0) <= exp(-2 r w(n)^theta)")
        object.__setattr__(self, "I0", I0)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.mode_cap, self.mode_cap + 1)

    def action(self, n: int) -> float:
        return float(self.I0[n + self.mode_cap])


@dataclass
class NormalForm:
    """Quadratic part ``sum (n^2 + vtilde_n) |q_n|^2`` plus a constant."""

    vtilde: np.ndarray
    mode_cap: int
    const: float = 0.0

    def __post_init__(self):
        self.vtilde = np.asarray(self.vtilde, dtype=float).copy()
        if self.vtilde.shape != (2 * self.mode_cap + 1,):
            raise ValueError("vtilde must have one entry per mode")

    @property
    def frequencies(self) -> np.ndarray:
        modes = np.arange(-self.mode_cap, self.mode_cap + 1)
        return modes.astype(float) ** 2 + self.vtilde

    def as_hamiltonian(self, degree_cap: int | None = None) -> "Hamiltonian":
        terms = {
            Monomial((), ((n, 1),), ((n, 1),), ()): complex(w)
            for n, w in zip(range(-self.mode_cap, self.mode_cap + 1), self.frequencies)
            if w != 0.0
        }
        if self.const:
            terms[Monomial()] = complex(self.const)
        return Hamiltonian(terms, mode_cap=self.mode_cap, degree_cap=degree_cap)


def _actions(I0, mode_cap: int) -> np.ndarray:
    if isinstance(I0, TorusSpec):
        if I0.mode_cap < mode_cap:
            raise ModeOutOfRange("torus spec covers fewer modes than the Hamiltonian")
        off = I0.mode_cap - mode_cap
        return I0.I0[off: off + 2 * mode_cap + 1]
    arr = np.asarray(I0, dtype=float)
    if arr.shape != (2 * mode_cap + 1,):
        raise ValueError("frozen actions must have one entry per mode")
    return arr


@dataclass
class DenseTerms:
    """Row-per-term exponent arrays.

    ``J`` holds column indices of J factors, padded with ``-1``.
    """

    A: np.ndarray
    K: np.ndarray
    KP: np.ndarray
    J: np.ndarray
    coeff: np.ndarray
    mode_cap: int

    def __len__(self) -> int:
        return len(self.coeff)

    @property
    def jcount(self) -> np.ndarray:
        return (self.J >= 0).sum(axis=1)

    def degrees(self) -> np.ndarray:
        return (2 * self.A + self.K + self.KP).sum(axis=1) + 2 * self.jcount

    def momenta(self) -> np.ndarray:
        modes = np.arange(-self.mode_cap, self.mode_cap + 1)
        return (self.K - self.KP) @ modes


def _rows_to_monomials(A, K, KP, J, mode_cap: int) -> list[Monomial]:
    """Convert dense exponent rows to canonical monomial keys."""
    T = A.shape[0]
    out_a: list[list] = [[] for _ in range(T)]
    out_k: list[list] = [[] for _ in range(T)]
    out_kp: list[list] = [[] for _ in range(T)]
    for arr, out in ((A, out_a), (K, out_k), (KP, out_kp)):
        rows, cols = np.nonzero(arr)
        vals = arr[rows, cols]
        # np.nonzero is row-major, so each row's entries come out sorted by mode
        for r, c, v in zip(rows.tolist(), (cols - mode_cap).tolist(), vals.tolist()):
            out[r].append((c, v))
    jl = J.tolist()
    monos = []
    for t in range(T):
        jj = tuple(sorted(c - mode_cap for c in jl[t] if c >= 0))
        monos.append(Monomial(tuple(out_a[t]), tuple(out_k[t]), tuple(out_kp[t]), jj))
    return monos


class Hamiltonian:
    """Finite sum of monomials with complex coefficients.

    Parameters
    ----------
    terms : mapping Monomial -> complex, optional
        Exact zeros are discarded.
    mode_cap : int
        Largest admissible ``|n|``.  Out-of-range modes raise
        :class:`~nlskam.errors.ModeOutOfRange`.
    degree_cap : int or None
        Largest admissible ``sum(2a + k + kp) + 2 * class``.
    tail : sequence of three floats
        Per-class norm-weighted mass of terms dropped on the way here.
    """

    __slots__ = ("terms", "mode_cap", "degree_cap", "tail", "_dense")

    def __init__(self, terms: Mapping[Monomial, complex] | None = None, *, mode_cap: int,
                 degree_cap: int | None = None, tail: Iterable[float] = (0.0, 0.0, 0.0),
                 check: bool = True):
        self.mode_cap = int(mode_cap)
        self.degree_cap = None if degree_cap is None else int(degree_cap)
        self.tail = np.array(list(tail), dtype=float)
        self._dense = None
        clean: dict[Monomial, complex] = {}
        for mono, c in (terms or {}).items():
            c = complex(c)
            if c == 0:
                continue
            if check:
                for n in mono.modes():
                    if abs(n) > self.mode_cap:
                        raise ModeOutOfRange(f"mode {n} exceeds mode cap {self.mode_cap}")
                if self.degree_cap is not None and mono.degree() > self.degree_cap:
                    raise DegreeOverflow(
                        f"term of degree {mono.degree()} exceeds degree cap {self.degree_cap}")
            clean[mono] = c
        self.terms = clean

    # -- construction helpers -------------------------------------------------
    def like(self, terms: Mapping[Monomial, complex] | None = None, tail=None,
             check: bool = False) -> "Hamiltonian":
        """New Hamiltonian with the same caps."""
        return Hamiltonian(terms, mode_cap=self.mode_cap, degree_cap=self.degree_cap,
                           tail=self.tail if tail is None else tail, check=check)

    @classmethod
    def from_dense(cls, dense: DenseTerms, degree_cap: int | None = None,
                   tail=(0.0, 0.0, 0.0)) -> "Hamiltonian":
        monos = _rows_to_monomials(dense.A, dense.K, dense.KP, dense.J, dense.mode_cap)
        terms: dict[Monomial, complex] = {}
        for m, c in zip(monos, dense.coeff.tolist()):
            terms[m] = terms.get(m, 0) + c
        return cls(terms, mode_cap=dense.mode_cap, degree_cap=degree_cap, tail=tail, check=False)

    @property
    def dense(self) -> DenseTerms:
        if self._dense is None:
            M, L, T = self.mode_cap, 2 * self.mode_cap + 1, len(self.terms)
            A = np.zeros((T, L), dtype=np.int64)
            K = np.zeros((T, L), dtype=np.int64)
            KP = np.zeros((T, L), dtype=np.int64)
            J = np.full((T, 2), -1, dtype=np.int64)
            coeff = np.empty(T, dtype=complex)
            for t, (m, c) in enumerate(self.terms.items()):
                for n, e in m.a:
                    A[t, n + M] = e
                for n, e in m.k:
                    K[t, n + M] = e
                for n, e in m.kp:
                    KP[t, n + M] = e
                for i, n in enumerate(m.j):
                    J[t, i] = n + M
                coeff[t] = c
            self._dense = DenseTerms(A, K, KP, J, coeff, M)
        return self._dense

    # -- container protocol -------------------------------------------------------
    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self.terms)

    def items(self):
        return self.terms.items()

    def __getitem__(self, mono: Monomial) -> complex:
        return self.terms.get(mono, 0j)

    def __repr__(self) -> str:
        return f"Hamiltonian({len(self.terms)} terms, mode_cap={self.mode_cap}, degree_cap={self.degree_cap})"

    @property
    def is_plain(self) -> bool:
        return all(not m.j for m in self.terms)

    def by_class(self, c: int) -> "Hamiltonian":
        return self.like({m: v for m, v in self.terms.items() if len(m.j) == c},
                         tail=np.where(np.arange(3) == c, self.tail, 0.0))

    def with_caps(self, mode_cap: int | None = None, degree_cap: int | None = None) -> "Hamiltonian":
        return Hamiltonian(self.terms, mode_cap=self.mode_cap if mode_cap is None else mode_cap,
                           degree_cap=degree_cap, tail=self.tail)

    # -- arithmetic --------------------------------------------------------------
    def __add__(self, other: "Hamiltonian") -> "Hamiltonian":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Hamiltonian(out, mode_cap=max(self.mode_cap, other.mode_cap),
                           degree_cap=_max_cap(self.degree_cap, other.degree_cap),
                           tail=self.tail + other.tail, check=False)

    def __neg__(self) -> "Hamiltonian":
        return self.scale(-1.0)

    def __sub__(self, other: "Hamiltonian") -> "Hamiltonian":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "Hamiltonian":
        return self.like({m: c * v for m, v in self.terms.items()}, tail=abs(c) * self.tail)

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def pruned(self, drop_tol: float, w: NormWeights | None = None) -> "Hamiltonian":
        """Drop terms with ``|coeff| <= drop_tol``; their weighted mass goes to the tail."""
        small = {m: c for m, c in self.terms.items() if abs(c) <= drop_tol}
        if not small:
            return self
        keep = {m: c for m, c in self.terms.items() if abs(c) > drop_tol}
        tail = self.tail.copy()
        dropped = self.like(small)
        tn = term_norms(dropped, w) if w is not None else np.abs(dropped.dense.coeff)
        cls = dropped.dense.jcount
        for c in range(3):
            if np.any(cls == c):
                tail[c] += float(tn[cls == c].sum())
        return self.like(keep, tail=tail)

    # -- comparisons ---------------------------------------------------------------
    def max_abs_diff(self, other: "Hamiltonian") -> float:
        keys = set(self.terms) | set(other.terms)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def reality_defect(self) -> float:
        """``max |B(conj key) - conj(B(key))|``, zero for a real-valued function."""
        return max((abs(self[m.conjugate()] - c.conjugate()) for m, c in self.terms.items()),
                   default=0.0)

    # -- evaluation -------------------------------------------------------------------
    def evaluate(self, q, qbar=None, I0=None) -> complex:
        """Value at the phase point ``q``.

        ``qbar`` defaults to ``conj(q)`` and may be given independently.
        ``I0`` (array over modes or :class:`TorusSpec`) is required when
        ``a`` exponents or J factors are present.
        """
        if not self.terms:
            return 0j
        d = self.dense
        q = np.asarray(q, dtype=complex)
        qbar = np.conj(q) if qbar is None else np.asarray(qbar, dtype=complex)
        L = 2 * self.mode_cap + 1
        cols = np.arange(L)
        maxe = int(max(d.K.max(), d.KP.max(), d.A.max(), 0))
        qp = q[None, :] ** np.arange(maxe + 1)[:, None]
        qbp = qbar[None, :] ** np.arange(maxe + 1)[:, None]
        vals = d.coeff * np.prod(qp[d.K, cols], axis=1) * np.prod(qbp[d.KP, cols], axis=1)
        if d.A.any() or (d.J >= 0).any():
            if I0 is None:
                raise ValueError("frozen actions required to evaluate this Hamiltonian")
            act = _actions(I0, self.mode_cap)
            ap = act[None, :] ** np.arange(int(d.A.max()) + 1)[:, None]
            vals = vals * np.prod(ap[d.A, cols], axis=1)
            Jval = np.append(q * qbar - act, 1.0)  # index -1 -> 1
            vals = vals * Jval[d.J[:, 0]] * Jval[d.J[:, 1]]
        return complex(vals.sum())

    # -- serialization ------------------------------------------------------------------
    def to_records(self) -> list[dict]:
        recs = []
        for m in sorted(self.terms):
            c = self.terms[m]
            recs.append({
                "coeff_re": float(c.real).hex(),
                "coeff_im": float(c.imag).hex(),
                "a": [list(p) for p in m.a],
                "k": [list(p) for p in m.k],
                "kp": [list(p) for p in m.kp],
                "j": list(m.j),
            })
        return recs

    def to_json_obj(self) -> dict:
        return {
            "mode_cap": self.mode_cap,
            "degree_cap": self.degree_cap,
            "tail": [float(x).hex() for x in self.tail],
            "terms": self.to_records(),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Hamiltonian":
        terms = {}
        for r in obj["terms"]:
            m = Monomial.make(r["a"], r["k"], r["kp"], r["j"])
            terms[m] = complex(float.fromhex(r["coeff_re"]), float.fromhex(r["coeff_im"]))
        tail = [float.fromhex(x) for x in obj.get("tail", ["0x0p+0"] * 3)]
        return cls(terms, mode_cap=obj["mode_cap"], degree_cap=obj["degree_cap"], tail=tail)


def _max_cap(a, b):
    if a is None or b is None:
        return None
    return max(a, b)


# -- norms --------------------------------------------------------------------------------

def log_term_weights(d: DenseTerms, w: NormWeights) -> np.ndarray:
    """Per-term log of the plus-norm weight.

    The norm of a term is ``|B| * exp(result)``.  For plain terms this is
    ``-rho (sum (2a+k+kp) w^theta - 2 n1*^theta) + mu m*^theta``.  Each J
    factor on mode ``m`` contributes an extra ``-2 rho w(m)^theta``.  An
    empty support contributes ``n1* = 0``.
    """
    modes = np.arange(-d.mode_cap, d.mode_cap + 1)
    wt = weights_array(modes) ** w.theta
    mult = 2 * d.A + d.K + d.KP
    total = mult @ wt
    n1 = np.where(mult > 0, wt[None, :], 0.0).max(axis=1) if mult.shape[1] else np.zeros(len(d))
    mstar = np.abs((d.K - d.KP) @ modes).astype(float) ** w.theta
    wt_pad = np.append(wt, 0.0)
    jsum = wt_pad[d.J[:, 0]] + wt_pad[d.J[:, 1]]
    return -w.rho * (total - 2.0 * n1 + 2.0 * jsum) + w.mu * mstar


def term_norms(H: Hamiltonian, w: NormWeights) -> np.ndarray:
    if not len(H):
        return np.zeros(0)
    d = H.dense
    return np.abs(d.coeff) * np.exp(log_term_weights(d, w))


def norm(H: Hamiltonian, w: NormWeights) -> float:
    """Weighted sup norm of a plain Hamiltonian (0 when empty)."""
    if not H.is_plain:
        raise MixedClassInput("norm expects plain terms; expand J factors first")
    tn = term_norms(H, w)
    return float(tn.max()) if tn.size else 0.0


def plus_norm(H: Hamiltonian, w: NormWeights) -> tuple[float, float, float, float]:
    """Per-class sup norms ``(r0, r1, r2, max)``."""
    if not len(H):
        return 0.0, 0.0, 0.0, 0.0
    tn = term_norms(H, w)
    cls = H.dense.jcount
    r = [float(tn[cls == c].max()) if np.any(cls == c) else 0.0 for c in range(3)]
    return r[0], r[1], r[2], max(r)


def argmax_term(H: Hamiltonian, w: NormWeights):
    """Monomial attaining the plus norm, or ``None`` when empty."""
    if not len(H):
        return None
    tn = term_norms(H, w)
    return list(H.terms)[int(np.argmax(tn))]


# -- J regrouping -------------------------------------------------------------------------

def _split_term(mono: Monomial, c: complex, out: dict) -> None:
    kd, kpd = dict(mono.k), dict(mono.kp)
    b = {n: min(kd[n], kpd[n]) for n in kd if n in kpd}
    if not b:
        out[mono] = out.get(mono, 0) + c
        return
    l = {n: e - b.get(n, 0) for n, e in kd.items()}
    lp = {n: e - b.get(n, 0) for n, e in kpd.items()}
    base_a = dict(mono.a)
    ms = sorted(b)

    def emit(coef, a_extra: dict, live: dict, jj: tuple):
        a = dict(base_a)
        for n, e in a_extra.items():
            a[n] = a.get(n, 0) + e
        k, kp = dict(l), dict(lp)
        for n, e in live.items():
            k[n] = k.get(n, 0) + e
            kp[n] = kp.get(n, 0) + e
        key = Monomial(expvec(a), expvec(k), expvec(kp), jj)
        out[key] = out.get(key, 0) + coef

    # (i) every live action frozen
    emit(c, b, {}, ())
    # (ii) exactly one J, linear
    for m in ms:
        a = dict(b)
        a[m] -= 1
        emit(c * b[m], a, {}, (m,))
    # (iii) J_m^2 with the remaining powers of I_m and all later actions live
    for i, m in enumerate(ms):
        for r in range(b[m] - 1):
            a = {n: b[n] for n in ms[:i]}
            a[m] = r
            live = {n: b[n] for n in ms[i + 1:]}
            live[m] = b[m] - 2 - r
            emit(c * (r + 1), a, live, (m, m))
    # (iv) J_m1 J_m2 cross terms, m1 < m2
    for i1, m1 in enumerate(ms):
        for i2 in range(i1 + 1, len(ms)):
            m2 = ms[i2]
            for r in range(b[m2]):
                a = {n: b[n] for n in ms[:i2] if n != m1}
                a[m1] = b[m1] - 1
                a[m2] = r
                live = {n: b[n] for n in ms[i2 + 1:]}
                live[m2] = b[m2] - 1 - r
                emit(c * b[m1], a, live, (m1, m2))


def split(H: Hamiltonian, I0=None) -> Hamiltonian:
    """Rewrite live actions ``I_n = I_n(0) + J_n`` into classes 0, 1, 2.

    ``b_n = min(k_n, kp_n)`` live actions are expanded around the frozen
    actions.  The output has disjoint q and conj(q) supports in classes 0
    and 1.  Class-2 terms may carry residual live actions inside ``k`` and
    ``kp``.  Frozen actions stay symbolic in ``a``, so ``I0`` is accepted for
    interface symmetry but not needed.
    """
    if not H.is_plain:
        raise MixedClassInput("split expects plain terms")
    out: dict[Monomial, complex] = {}
    for mono, c in H.terms.items():
        _split_term(mono, c, out)
    tail = np.array([H.tail.sum(), 0.0, 0.0])
    return Hamiltonian(out, mode_cap=H.mode_cap, degree_cap=H.degree_cap, tail=tail)


def expand_j(H: Hamiltonian, I0=None) -> Hamiltonian:
    """Substitute ``J_m = q_m conj(q_m) - I_m(0)`` everywhere; returns plain terms."""
    out: dict[Monomial, complex] = {}
    for mono, c in H.terms.items():
        if not mono.j:
            out[mono] = out.get(mono, 0) + c
            continue
        # each J factor picks either the live action (+) or the frozen one (-)
        parts = [(mono.a, mono.k, mono.kp, c)]
        for m in mono.j:
            nxt = []
            e = ((m, 1),)
            for a, k, kp, cc in parts:
                nxt.append((a, expvec(list(k) + list(e)), expvec(list(kp) + list(e)), cc))
                nxt.append((expvec(list(a) + list(e)), k, kp, -cc))
            parts = nxt
        for a, k, kp, cc in parts:
            key = Monomial(a, k, kp, ())
            out[key] = out.get(key, 0) + cc
    return Hamiltonian(out, mode_cap=H.mode_cap, degree_cap=H.degree_cap,
                       tail=(H.tail.sum(), 0.0, 0.0))


def resonant_project(H: Hamiltonian) -> tuple[Hamiltonian, Hamiltonian]:
    """Split classes 0 and 1 into the resonant part (``k = kp = 0``) and the rest."""
    if any(len(m.j) > 1 for m in H.terms):
        raise MixedClassInput("resonant projection is defined on classes 0 and 1")
    res = {m: c for m, c in H.terms.items() if not m.k and not m.kp}
    non = {m: c for m, c in H.terms.items() if m.k or m.kp}
    return H.like(res, tail=np.zeros(3)), H.like(non)
