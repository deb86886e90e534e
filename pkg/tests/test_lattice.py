import math

import pytest
from hypothesis import given, strategies as st

from nlskam.errors import DegenerateMonomial, ModeOutOfRange
from nlskam.hamiltonian import Hamiltonian
from nlskam.lattice import (Monomial, check_modes, expvec, lemma_a1_sides, lemma_h1_sides,
                            momentum, momentum_star, rearrangement, weight)


def test_weight_convention():
    assert weight(0) == 1
    assert weight(1) == 1 and weight(-1) == 1
    assert weight(-7) == 7


def test_expvec_canonical():
    assert expvec({3: 1, -2: 2, 5: 0}) == ((-2, 2), (3, 1))
    assert expvec([(1, 1), (1, 2)]) == ((1, 3),)
    with pytest.raises(ValueError):
        expvec({1: -1})


@pytest.mark.parametrize("k,kp,expected", [
    ({1: 1}, {}, 1),
    ({1: 1, 3: 1, 6: 1}, {2: 1, 4: 1, 5: 1}, -1),
    ({2: 3}, {-1: 2}, 8),
])
def test_momentum_examples(k, kp, expected):
    assert momentum(k, kp) == expected


@pytest.mark.parametrize("k,kp,expected", [
    ({5: 1}, {2: 1, 3: 1}, 0),
    ({1: 1, 3: 1, 6: 1}, {2: 1, 4: 1, 5: 1}, 1),
    ({}, {}, 0),
])
def test_momentum_star_examples(k, kp, expected):
    assert momentum_star(k, kp) == expected


exp_st = st.dictionaries(st.integers(-6, 6), st.integers(1, 3), max_size=4)


@given(exp_st, exp_st, exp_st, exp_st)
def test_momentum_additive(k1, kp1, k2, kp2):
    k = expvec(list(k1.items()) + list(k2.items()))
    kp = expvec(list(kp1.items()) + list(kp2.items()))
    assert momentum(k, kp) == momentum(k1, kp1) + momentum(k2, kp2)


@pytest.mark.parametrize("a,k,kp,stars", [
    ({}, {5: 1}, {2: 1, 3: 1}, (5, 3, 2)),
    ({2: 1}, {}, {}, (2, 2)),
    ({}, {0: 1}, {0: 1}, (1, 1)),
])
def test_rearrangement_examples(a, k, kp, stars):
    assert rearrangement(Monomial.make(a, k, kp)).nstars == stars


def test_rearrangement_excludes_j_and_empty_support():
    view = rearrangement(Monomial.make({}, {1: 1}, {}, [4, 4]))
    assert view.nstars == (1,)
    assert rearrangement(Monomial.make(j=[2])).n1_star == 0


@given(exp_st, exp_st, exp_st)
def test_rearrangement_sorted_with_length(a, k, kp):
    view = rearrangement(Monomial.make(a, k, kp))
    assert list(view.nstars) == sorted(view.nstars, reverse=True)
    assert len(view.nstars) == sum(2 * e for e in a.values()) + sum(k.values()) + sum(kp.values())


def test_h1_worked_example():
    lhs, rhs = lemma_h1_sides(Monomial.make({}, {5: 1}, {2: 1, 3: 1}), 0.5)
    # both sides recomputed by hand: sqrt5+sqrt3+sqrt2 - 2 sqrt5 + 0 and (2-sqrt2) sqrt2
    assert lhs == pytest.approx(math.sqrt(3) + math.sqrt(2) - math.sqrt(5), abs=1e-15)
    assert rhs == pytest.approx((2 - math.sqrt(2)) * math.sqrt(2), abs=1e-15)
    assert lhs == pytest.approx(0.9102, abs=1e-4) and rhs == pytest.approx(0.8284, abs=1e-4)


def test_h1_diagonal_quadratic():
    lhs, rhs = lemma_h1_sides(Monomial.make({}, {3: 1}, {3: 1}), 0.5)
    assert lhs == pytest.approx(0.0, abs=1e-15) and rhs == 0.0


def test_h1_degenerate():
    with pytest.raises(DegenerateMonomial):
        lemma_h1_sides(Monomial.make({}, {3: 1}, {}), 0.5)


def test_a1_sides_direct():
    k, kp = {3: 1}, {1: 1, 2: 1}
    lhs, rhs = lemma_a1_sides(k, kp, 0.5)
    assert lhs == pytest.approx(3 ** 0.25 + 1 + 2 ** 0.25)
    assert rhs == pytest.approx(3 * 8 ** 0.25 * (1.0 + 0.0))


def test_a1_equal_exponents_gives_zero_lhs():
    lhs, rhs = lemma_a1_sides({1: 2, 2: 1}, {1: 2, 2: 1}, 0.5)
    assert lhs == 0.0 and rhs >= 0


def test_a1_degenerate_below_three_factors():
    with pytest.raises(DegenerateMonomial):
        lemma_a1_sides({1: 1, -1: 1}, {}, 0.5)


def test_mode_cap_rejects_out_of_range():
    m = Monomial.make({}, {4: 1}, {})
    with pytest.raises(ModeOutOfRange):
        check_modes(m, 3)
    with pytest.raises(ModeOutOfRange):
        Hamiltonian({m: 1.0}, mode_cap=3)


def test_monomial_class_and_degree():
    m = Monomial.make({1: 1}, {2: 1}, {0: 2}, [3, -1])
    assert m.cls == 2 and m.j == (-1, 3)
    assert m.degree() == 2 + 1 + 2 + 4
    assert not Monomial.make({}, {1: 1}, {1: 1}).is_split_form()
    with pytest.raises(ValueError):
        Monomial.make(j=[1, 2, 3])
