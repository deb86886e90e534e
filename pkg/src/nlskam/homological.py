"""Small divisors, Diophantine validation and the homological equation.

With the bracket convention of :mod:`nlskam.poisson`, a monomial ``M`` with
exponents ``(k, kp)`` satisfies ``{N, M} = (i/2) * div(k, kp) * M`` for the
quadratic normal form ``N = sum (n^2 + V_n) |q_n|^2``, where

    div(k, kp) = sum_n (k_n - kp_n)(n^2 + V_n).

The same holds with a J factor attached, because ``{N, J_m} = 0``.  The
generator coefficient solving ``{N, F} + R_nr = 0`` is therefore
``F = 2i B / div``.  This keeps ``F`` real whenever ``R`` is real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EnumerationTooLarge, ResonantLeak, SmallDivisorViolation
from .hamiltonian import Hamiltonian
from .lattice import ExpLike, Monomial, _ev, weight

DEFAULT_ENUM_BUDGET = 60_000_000


@dataclass(frozen=True)
class FrequencyVector:
    """Corrected normal frequencies ``vtilde_n`` on modes ``-M..M``."""

    vtilde: np.ndarray
    mode_cap: int
    gamma: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.vtilde, dtype=float)
        if v.shape != (2 * self.mode_cap + 1,):
            raise ValueError("vtilde must have one entry per mode")
        if np.any(np.abs(v) > 2):
            raise ValueError("corrected frequencies must satisfy |vtilde_n| <= 2")
        object.__setattr__(self, "vtilde", v)

    def __getitem__(self, n: int) -> float:
        if abs(n) > self.mode_cap:
            return 0.0
        return float(self.vtilde[n + self.mode_cap])


@dataclass
class DivisorReport:
    key: object            # monomial, or the integer vector l for Diophantine scans
    divisor: float
    threshold: float
    resonant: bool = False
    certified_bound: float = 0.0  # (gamma/2) * product lower bound
    case1: bool = False
    violation: bool = False


def divisor(k: ExpLike, kp: ExpLike, freq: FrequencyVector) -> float:
    """``sum (k_n - kp_n)(n^2 + vtilde_n)`` with the signed mode in ``n^2``."""
    k, kp = _ev(k), _ev(kp)
    tot = 0.0
    for n, e in k:
        tot += e * (n * n + freq[n])
    for n, e in kp:
        tot -= e * (n * n + freq[n])
    return tot


def _l_vector(k, kp) -> dict[int, int]:
    l: dict[int, int] = {}
    for n, e in _ev(k):
        l[n] = l.get(n, 0) + e
    for n, e in _ev(kp):
        l[n] = l.get(n, 0) - e
    return {n: v for n, v in l.items() if v}


def product_lower_bound(k: ExpLike, kp: ExpLike, mode_cap: int | None = None) -> float:
    """``prod_{|n| <= cap} 1 / (1 + (k_n - kp_n)^2 w(n)^4)``."""
    out = 1.0
    for n, l in _l_vector(k, kp).items():
        if mode_cap is not None and abs(n) > mode_cap:
            continue
        out /= 1.0 + l * l * float(weight(n)) ** 4
    return out


def dist_to_int(x):
    """``|x - round(x)|`` with numpy's half-to-even rounding."""
    return np.abs(x - np.round(x))


def diophantine_check(omega: FrequencyVector, gamma: float, support_cap: int, coeff_cap: int,
                      budget: int = DEFAULT_ENUM_BUDGET) -> tuple[bool, DivisorReport]:
    """Check ``||sum l_n omega_n|| >= gamma prod 1/(1 + l_n^2 w(n)^4)`` exhaustively.

    Every nonzero integer vector ``l`` with support in
    ``[-support_cap, support_cap]`` and ``|l_n| <= coeff_cap`` is checked.  The
    support is clipped to the modes ``omega`` actually carries.  The returned
    report holds the ``l`` with the smallest ratio of distance to bound.
    When ``gamma == 0`` the bound is vacuous and the report is flagged
    ``resonant`` to mark the degenerate input.
    """
    S = min(support_cap, omega.mode_cap)
    modes = np.arange(-S, S + 1)
    P = modes.size
    base = 2 * coeff_cap + 1
    total = base ** P
    if total - 1 > budget:
        raise EnumerationTooLarge(f"{total - 1} lattice vectors exceed budget {budget}")
    om = np.array([omega[int(n)] for n in modes])
    w4 = np.maximum(1, np.abs(modes)).astype(float) ** 4
    worst_ratio, worst = np.inf, None
    chunk = max(1, min(total, 2_000_000))
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        L = np.empty((idx.size, P), dtype=np.int64)
        rem = idx
        for c in range(P):
            L[:, c] = rem % base - coeff_cap
            rem = rem // base
        nz = np.any(L != 0, axis=1)
        L = L[nz]
        if not L.size:
            continue
        dist = dist_to_int(L @ om)
        bound = gamma / np.prod(1.0 + L.astype(float) ** 2 * w4, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bound > 0, dist / bound, np.where(dist > 0, np.inf, 0.0))
        i = int(np.argmin(ratio))
        if ratio[i] < worst_ratio or worst is None:
            worst_ratio = float(ratio[i])
            lvec = {int(n): int(v) for n, v in zip(modes, L[i]) if v}
            worst = DivisorReport(lvec, float(dist[i]), float(bound[i]))
    if worst is None:
        worst = DivisorReport({}, np.inf, 0.0)
    if gamma == 0:
        worst.resonant = True
        return bool(worst.divisor > 0), worst
    return bool(worst_ratio >= 1.0), worst


def case1_guard(k: ExpLike, kp: ExpLike) -> bool:
    """``|sum l_n n^2| > 10 sum |l_n|``: the integer part alone keeps the divisor >= 1."""
    l = _l_vector(k, kp)
    return abs(sum(v * n * n for n, v in l.items())) > 10 * sum(abs(v) for v in l.values())


def default_floor(terms, gamma: float, abs_floor: float = 1e-12) -> float:
    """``max((gamma/2) * min product_lower_bound, abs_floor)`` over the given monomials."""
    plbs = [product_lower_bound(m.k, m.kp) for m in terms]
    return max(0.5 * gamma * min(plbs, default=1.0), abs_floor)


def solve(R0_nr: Hamiltonian, R1_nr: Hamiltonian, freq: FrequencyVector,
          divisor_floor: float) -> tuple[Hamiltonian, list[DivisorReport]]:
    """Solve ``{N, F} + R0_nr + R1_nr = 0`` term by term.

    Returns the generator (classes 0 and 1) and one :class:`DivisorReport`
    per solved monomial.  ``violation`` in a report means the divisor broke
    the truncated Diophantine bound ``(gamma/2) * product_lower_bound``.  That
    bound is informational and is not enforced.  The hard floor is
    ``divisor_floor``.
    """
    out: dict[Monomial, complex] = {}
    reports: list[DivisorReport] = []
    half_gamma = 0.5 * freq.gamma
    for H in (R0_nr, R1_nr):
        for mono, B in H.items():
            if len(mono.j) > 1:
                raise ValueError("class-2 terms are not solved")
            if mono.k == mono.kp:
                raise ResonantLeak(f"resonant term {mono} reached the solver")
            d = divisor(mono.k, mono.kp, freq)
            cert = half_gamma * product_lower_bound(mono.k, mono.kp)
            rep = DivisorReport(mono, d, divisor_floor, False, cert, case1_guard(mono.k, mono.kp),
                                abs(d) < cert)
            if abs(d) < divisor_floor:
                raise SmallDivisorViolation(rep)
            reports.append(rep)
            out[mono] = 2j * B / d
    F = Hamiltonian(out, mode_cap=max(R0_nr.mode_cap, R1_nr.mode_cap),
                    degree_cap=R0_nr.degree_cap, check=False)
    return F, reports
