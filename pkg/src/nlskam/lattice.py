"""Mode indices, exponent vectors and monomial combinatorics.

Modes are signed integers ``n``.  Every fractional power of a mode uses the
weight ``max(1, |n|)``, so mode 0 carries weight 1.  Momentum and small
divisors use the signed value ``n`` itself.

An exponent vector is stored canonically as a tuple of ``(mode, exponent)``
pairs sorted by mode with strictly positive exponents.  This makes monomials
hashable and gives each one a unique key.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from typing import NamedTuple, Union

import numpy as np

from .errors import DegenerateMonomial, ModeOutOfRange

ExponentVector = tuple  # tuple[tuple[int, int], ...], sorted, exponents > 0
ExpLike = Union[Mapping, Iterable, None]


def weight(n: int) -> int:
    """Return ``max(1, |n|)``."""
    return max(1, abs(int(n)))


def weights_array(modes) -> np.ndarray:
    """Vectorised :func:`weight` as a float array."""
    modes = np.asarray(modes)
    return np.maximum(1, np.abs(modes)).astype(float)


def expvec(data: ExpLike = None) -> ExponentVector:
    """Canonicalise ``data`` into an exponent vector.

    Accepts a mapping ``{n: e}``, an iterable of ``(n, e)`` pairs (repeated
    modes are summed) or ``None``.  Zero exponents are dropped; negative ones
    raise ``ValueError``.
    """
    if data is None:
        return ()
    items = data.items() if isinstance(data, Mapping) else data
    acc: dict[int, int] = {}
    for n, e in items:
        n, e = int(n), int(e)
        if e < 0:
            raise ValueError(f"negative exponent {e} at mode {n}")
        if e:
            acc[n] = acc.get(n, 0) + e
    return tuple(sorted(acc.items()))


def _ev(x: ExpLike) -> ExponentVector:
    return x if isinstance(x, tuple) else expvec(x)


def ev_add(u: ExponentVector, v: ExponentVector) -> ExponentVector:
    if not u:
        return v
    if not v:
        return u
    return expvec(list(u) + list(v))


def ev_degree(v: ExponentVector) -> int:
    return sum(e for _, e in v)


def ev_get(v: ExponentVector, n: int) -> int:
    for m, e in v:
        if m == n:
            return e
    return 0


class Monomial(NamedTuple):
    """Key of a Hamiltonian term.

    Represents ``J_{j[0]} J_{j[1]} prod I_n(0)^{a_n} q_n^{k_n} conj(q_n)^{kp_n}``.
    ``j`` holds zero, one or two J-factor modes in non-decreasing order; its
    length is the class of the monomial.
    """

    a: ExponentVector = ()
    k: ExponentVector = ()
    kp: ExponentVector = ()
    j: tuple = ()

    @classmethod
    def make(cls, a: ExpLike = None, k: ExpLike = None, kp: ExpLike = None,
             j: Iterable[int] = ()) -> "Monomial":
        jj = tuple(sorted(int(m) for m in j))
        if len(jj) > 2:
            raise ValueError("a monomial carries at most two J factors")
        return cls(expvec(a), expvec(k), expvec(kp), jj)

    @property
    def cls(self) -> int:
        return len(self.j)

    def degree(self) -> int:
        """Degree in the cap sense: ``sum(2a + k + kp) + 2 * class``."""
        return 2 * ev_degree(self.a) + ev_degree(self.k) + ev_degree(self.kp) + 2 * len(self.j)

    def support(self) -> set[int]:
        return {n for n, _ in self.a} | {n for n, _ in self.k} | {n for n, _ in self.kp}

    def modes(self) -> set[int]:
        """All modes touched, J factors included."""
        return self.support() | set(self.j)

    def is_split_form(self) -> bool:
        """True when the class constraints hold (q and conj(q) supports disjoint below class 2)."""
        if len(self.j) == 2:
            return True
        return not ({n for n, _ in self.k} & {n for n, _ in self.kp})

    def conjugate(self) -> "Monomial":
        """Key of the complex-conjugate monomial (q and conj(q) swapped)."""
        return Monomial(self.a, self.kp, self.k, self.j)


def check_modes(mono: Monomial, mode_cap: int) -> None:
    """Raise :class:`ModeOutOfRange` if ``mono`` touches a mode beyond the cap."""
    for n in mono.modes():
        if abs(n) > mode_cap:
            raise ModeOutOfRange(f"mode {n} exceeds mode cap {mode_cap}")


def momentum(k: ExpLike, kp: ExpLike) -> int:
    """Signed momentum ``sum((k_n - kp_n) * n)``."""
    k, kp = _ev(k), _ev(kp)
    return sum(e * n for n, e in k) - sum(e * n for n, e in kp)


def momentum_star(k: ExpLike, kp: ExpLike) -> int:
    return abs(momentum(k, kp))


class RearrangementView(NamedTuple):
    nstars: tuple  # non-increasing weights
    n1_star: int   # 0 when the support is empty


def rearrangement(m: Monomial) -> RearrangementView:
    """Non-increasing list of weights, mode ``n`` repeated ``2a_n + k_n + kp_n`` times.

    J-factor modes are not included.
    """
    mult: dict[int, int] = {}
    for n, e in m.a:
        mult[n] = mult.get(n, 0) + 2 * e
    for n, e in m.k:
        mult[n] = mult.get(n, 0) + e
    for n, e in m.kp:
        mult[n] = mult.get(n, 0) + e
    stars: list[int] = []
    for n, c in mult.items():
        stars.extend([weight(n)] * c)
    stars.sort(reverse=True)
    return RearrangementView(tuple(stars), stars[0] if stars else 0)


def lemma_h1_sides(m: Monomial, theta: float) -> tuple[float, float]:
    """Both sides of the rearrangement inequality behind the norm's sub-multiplicativity.

    ``lhs = sum (2a+k+kp) w^theta - 2 (n1*)^theta + (m*)^theta`` and
    ``rhs = (2 - 2^theta) * sum_{i>=3} (n_i*)^theta``.  The inequality
    ``lhs >= rhs`` is expected to hold for every monomial.
    """
    view = rearrangement(m)
    if len(view.nstars) < 2:
        raise DegenerateMonomial("need at least two rearrangement entries")
    powers = [float(w) ** theta for w in view.nstars]
    mstar = momentum_star(m.k, m.kp)
    lhs = sum(powers) - 2.0 * powers[0] + float(mstar) ** theta
    rhs = (2.0 - 2.0 ** theta) * sum(powers[2:])
    return lhs, rhs


def lemma_a1_sides(k: ExpLike, kp: ExpLike, theta: float) -> tuple[float, float]:
    """Both sides of the small-divisor counting inequality.

    ``lhs = sum |k_n - kp_n| w(n)^(theta/2)`` and
    ``rhs = 3 * 8^(theta/2) * (sum_{i>=3} (n_i*)^theta + (m*)^theta)``, where the
    rearrangement runs over ``k + kp``.  The inequality is claimed whenever
    ``|sum (k_n - kp_n)(n^2 + V_n)| <= 1`` for some ``|V_n| <= 2``.

    Raises :class:`DegenerateMonomial` when ``k + kp`` has fewer than three
    factors: the right-hand sum over ``i >= 3`` is then empty and the
    inequality admits counterexamples such as ``k = e_1 + e_{-1}``.
    """
    k, kp = _ev(k), _ev(kp)
    view = rearrangement(Monomial((), k, kp, ()))
    if len(view.nstars) < 3:
        raise DegenerateMonomial("need at least three factors")
    kd, kpd = dict(k), dict(kp)
    lhs = sum(abs(kd.get(n, 0) - kpd.get(n, 0)) * float(weight(n)) ** (theta / 2)
              for n in set(kd) | set(kpd))
    tail = sum(float(w) ** theta for w in view.nstars[2:])
    rhs = 3.0 * 8.0 ** (theta / 2) * (tail + float(momentum_star(k, kp)) ** theta)
    return lhs, rhs
