import random
from fractions import Fraction

import pytest

from shintani.modsym import cached_space, eigen_symbol
from shintani.quadforms import act, enumerate_heegner_classes, mat_mul
from shintani.thetalift import (
    JacobiTable,
    balance_r,
    hecke_source_keys,
    jacobi_hecke,
    lift_entries,
    lift_table,
    shintani_coeff,
)


@pytest.fixture(scope="module")
def fsym():
    return eigen_symbol(cached_space(37, 0), -1, {2: Fraction(-2)})


@pytest.fixture(scope="module")
def gsym():
    return eigen_symbol(cached_space(37, 0), -1, {2: Fraction(0)})


@pytest.fixture(scope="module")
def table4(fsym):
    return lift_table(fsym, -4, 12, 4)


# frozen after cross-checking against: Hecke equivariance at m = 2,3,7,11,
# proportionality with the (-7,17) table, transport invariance and the
# r -> -r symmetry; normalization is the content-1 eigensymbol
GOLDEN = {
    (1, 12): Fraction(2),    # D = -4
    (1, 9): Fraction(12),    # D = -67
    (1, 0): Fraction(-12),   # D = -148
    (2, 17): Fraction(-2),   # D = -7
    (2, 16): Fraction(4),    # D = -40
    (3, 21): Fraction(2),    # D = -3
    (2, 14): Fraction(-6),   # D = -100
    (3, 11): Fraction(-4),   # D = -323
}


def test_golden_coefficients(table4):
    for key, val in GOLDEN.items():
        if key[0] <= 4:
            assert table4[key] == val, key


def test_empty_class_set_gives_zero(fsym):
    # a key whose class set happens to be empty still returns a clean 0;
    # verify via a direct empty-sum check on some entry with no classes
    # (construct by searching)
    found = None
    for n in range(1, 4):
        for r in range(0, 38):
            D = r * r - 148 * n
            if D >= 0:
                continue
            if len(enumerate_heegner_classes(37, -4, 12, D, r)) == 0:
                found = (n, r)
                break
    if found is None:
        pytest.skip("no empty class set in range (fine)")
    assert shintani_coeff(fsym, -4, 12, *found) == 0


def test_sign_constraint(fsym, gsym):
    plus = eigen_symbol(cached_space(37, 0), +1, {2: Fraction(-2)})
    with pytest.raises(ValueError):
        shintani_coeff(plus, -4, 12, 1, 12)


def test_transport_and_enumeration_independence(fsym):
    # perturbed coset lifts must reproduce identical rationals
    for (n, r) in [(1, 12), (1, 9), (2, 17), (3, 21), (2, 0)]:
        c0 = shintani_coeff(fsym, -4, 12, n, r)
        assert shintani_coeff(fsym, -4, 12, n, r, coset_order=1) == c0
        assert shintani_coeff(fsym, -4, 12, n, r, coset_order=3) == c0


def test_r_class_collapse(fsym, table4):
    # same (D, r mod 2N) through a shifted representative: r -> r + 2N
    for (n, r) in list(table4.keys())[:25]:
        n2 = n + r + 37  # keeps D fixed for r -> r + 74
        c2 = shintani_coeff(fsym, -4, 12, n2, r + 74)
        assert c2 == table4[(n, r)]


def test_r_negation_symmetry(table4):
    for (n, r) in table4.keys():
        assert table4[(n, r)] == table4[(n, -r)]


def test_bilinearity(fsym, gsym):
    # lift of a linear combination = combination of lifts
    space = fsym.space
    combo = [3 * x + 5 * y for x, y in zip(fsym.vector, gsym.vector)]
    import shintani.modsym as modsym

    class Raw:
        sign = -1

        def __init__(self, vec, sp):
            self.vector = vec
            self.space = sp

        def eval_path(self, r, s, coeffs):
            return self.space.eval_path(self.vector, r, s, coeffs)

    mixed = Raw(combo, space)
    for (n, r) in [(1, 12), (1, 9), (2, 17)]:
        lhs = shintani_coeff(mixed, -4, 12, n, r)
        rhs = 3 * shintani_coeff(fsym, -4, 12, n, r) + 5 * shintani_coeff(gsym, -4, 12, n, r)
        assert lhs == rhs


def test_rank_zero_line_lift_vanishes(gsym):
    tab = lift_table(gsym, -4, 12, 4)
    assert all(v == 0 for v in tab.entries.values())


def test_proportionality_two_fundamental_pairs(fsym, table4):
    tab2 = lift_table(fsym, -7, 17, 4)
    ref = next(k for k in table4.keys() if table4[k] != 0 and tab2[k] != 0)
    for k in table4.keys():
        assert table4[k] * tab2[ref] == tab2[k] * table4[ref]


def test_jacobi_hecke_identity_m1(table4):
    out = jacobi_hecke(table4, 1, k=1)
    for key in out.keys():
        assert out[key] == table4[key]


def test_jacobi_hecke_requires_coprime(table4):
    with pytest.raises(ValueError):
        jacobi_hecke(table4, 37, k=1)


@pytest.mark.parametrize("m", [2, 3])
def test_hecke_equivariance_small(fsym, table4, m):
    need = hecke_source_keys(table4, [m])
    ext = lift_entries(fsym, -4, 12, set(table4.keys()) | need, n_max=4 * m * m)
    am = fsym.hecke_eigenvalue(m)
    heck = jacobi_hecke(ext, m, k=1)
    for key in table4.fundamental_keys():
        assert am * table4[key] == heck[key]


def test_table_json_roundtrip(table4):
    text = table4.to_json()
    back = JacobiTable.from_json(text)
    assert back.entries == table4.entries
    assert (back.N, back.D0, back.r0, back.weight_label) == (37, -4, 12, 2)


def test_balance_r():
    assert balance_r(42, 37) == -32
    assert balance_r(-51, 37) == 23
    assert balance_r(37, 37) == 37
    assert balance_r(38, 37) == -36
