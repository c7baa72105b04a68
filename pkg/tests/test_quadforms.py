import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from shintani.quadforms import (
    INF,
    ID,
    QForm,
    act,
    automorph,
    class_label,
    disc,
    enumerate_classes_box,
    enumerate_heegner_classes,
    gamma0n_equivalent,
    genus_char,
    genus_char_with_factorization,
    geodesic_endpoints,
    is_fundamental_disc,
    mat_det,
    mat_inv,
    mat_mul,
    moebius,
    normalize_rep_p,
    pell_fundamental,
    sl2_canonical,
    stabilizer_generator,
)

rng = random.Random(20260811)


def random_sl2(r, size=8):
    g = ID
    for _ in range(r.randint(1, size)):
        if r.random() < 0.5:
            g = mat_mul(g, (1, r.randint(-3, 3), 0, 1))
        else:
            g = mat_mul(g, (0, -1, 1, 0))
    return g


def random_gamma0(N, r, size=6):
    g = ID
    for _ in range(r.randint(1, size)):
        if r.random() < 0.5:
            g = mat_mul(g, (1, r.randint(-2, 2), 0, 1))
        else:
            g = mat_mul(g, (1, 0, N * r.randint(-1, 1), 1))
    return g


# ------------------------------------------------------------------ basics

def test_disc_examples():
    assert disc(QForm(1, 1, 1)) == -3
    assert disc(QForm(1, 0, 0)) == 0
    assert disc(QForm(37, 12, 1)) == -4


def test_act_identity_and_inverse():
    Q = QForm(3, 5, -7)
    assert act(Q, ID) == Q
    g = (2, 1, 1, 1)
    assert act(act(Q, g), mat_inv(g)) == Q


def test_act_substitution_example():
    assert act(QForm(1, 0, -1), (1, 1, 0, 1)) == QForm(1, 2, 0)


@given(st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9),
       st.integers(0, 10**6), st.integers(0, 10**6))
@settings(max_examples=60)
def test_act_right_action(a, b, c, s1, s2):
    r1, r2 = random.Random(s1), random.Random(s2)
    Q = QForm(a, b, c)
    g, h = random_sl2(r1), random_sl2(r2)
    assert act(Q, mat_mul(g, h)) == act(act(Q, g), h)
    assert disc(act(Q, g)) == disc(Q)


def test_fundamental_discriminants():
    assert is_fundamental_disc(-4)
    assert is_fundamental_disc(-3)
    assert is_fundamental_disc(-7)
    assert not is_fundamental_disc(-12)
    assert not is_fundamental_disc(-9)
    assert is_fundamental_disc(5)
    assert not is_fundamental_disc(1)


# ----------------------------------------------------------- reduction/pell

def brute_pell(Delta, umax=4000):
    for u in range(1, umax):
        t2 = 4 + Delta * u * u
        t = math.isqrt(t2)
        if t * t == t2:
            return t, u
    raise AssertionError("no pell solution in range")


@pytest.mark.parametrize("Delta", [5, 8, 12, 13, 16 * 5, 40, 148, 37 * 4])
def test_pell_fundamental_matches_brute_force(Delta):
    assert pell_fundamental(Delta) == brute_pell(Delta)


def test_automorph_fixes_form_and_det():
    for Q in [QForm(1, 1, -1), QForm(2, 3, -4), QForm(6, 5, -5), QForm(37, 12, -2)]:
        g = automorph(Q)
        assert act(Q, g) == Q
        assert mat_det(g) == 1
        assert abs(g[0] + g[3]) > 2  # hyperbolic, hence infinite order


def test_automorph_minimal_solution_delta5():
    # t=3, u=1 drives the matrix for [1,1,-1]
    g = automorph(QForm(1, 1, -1))
    assert g == ((3 + 1) // 2, -1, -1, (3 - 1) // 2)


def test_automorph_rejects_square_or_negative():
    with pytest.raises(ValueError):
        automorph(QForm(1, 0, 1))  # disc -4
    with pytest.raises(ValueError):
        automorph(QForm(0, 2, 1))  # disc 4, square


def test_sl2_canonical_transport_invariance():
    for seed in range(12):
        r = random.Random(seed)
        Q = QForm(r.randint(1, 6), r.randint(-5, 5), -r.randint(1, 6))
        if disc(Q) <= 0:
            continue
        R, g = sl2_canonical(Q)
        assert act(Q, g) == R
        Q2 = act(Q, random_sl2(r))
        R2, _ = sl2_canonical(Q2)
        assert R == R2


def test_sl2_canonical_square_disc_shape():
    for Q in [QForm(1, 0, -1), QForm(0, 4, 3), QForm(3, 8, 4), QForm(0, 6, -2)]:
        R, g = sl2_canonical(Q)
        m = math.isqrt(disc(Q))
        assert R.a == 0 and R.b == m and 0 <= R.c < m
        assert act(Q, g) == R


def test_stabilizer_generator_imprimitive_uses_primitive_part():
    Q = QForm(2, 2, -2)  # content 2, disc 4*5 -> primitive part disc 5
    g = stabilizer_generator(Q)
    assert act(Q, g) == Q


# --------------------------------------------------- class sets and labels

def test_class_label_constant_on_orbits():
    N = 37
    cs = enumerate_heegner_classes(N, -4, 12, -4, 12)
    assert len(cs) > 0
    for Q in cs:
        lab = class_label(Q, N)
        r = random.Random(Q.a + Q.b)
        for _ in range(5):
            assert class_label(act(Q, random_gamma0(N, r)), N) == lab


def test_enumerate_congruences_hold():
    N = 37
    for (D, r) in [(-4, 12), (-7, 17), (-139, 3)]:
        cs = enumerate_heegner_classes(N, -4, 12, D, r)
        for Q in cs:
            assert Q.a % N == 0
            assert (Q.b + 12 * r) % (2 * N) == 0
            assert disc(Q) == -4 * D


def test_enumerate_deterministic():
    a = enumerate_heegner_classes(37, -4, 12, -139, 3)
    b = enumerate_heegner_classes(37, -4, 12, -139, 3)
    assert a.reps == b.reps


def test_enumerate_reps_pairwise_inequivalent():
    cs = enumerate_heegner_classes(37, -4, 12, -139, 3)
    for i, Q1 in enumerate(cs):
        for Q2 in cs.reps[i + 1:]:
            assert gamma0n_equivalent(Q1, Q2, 37) is None


def test_gamma0n_equivalence_certificate():
    cs = enumerate_heegner_classes(37, -4, 12, -4, 12)
    r = random.Random(5)
    for Q in cs:
        Q2 = act(Q, random_gamma0(37, r))
        g = gamma0n_equivalent(Q, Q2, 37)
        assert g is not None and g[2] % 37 == 0
        assert act(Q, g) == Q2


@pytest.mark.parametrize("N,D0,r0,D,r", [
    (37, -4, 12, -4, 12),
    (37, -4, 12, -7, 17),
    (37, -4, 12, -139, 3),
    (37, -7, 17, -4, 12),
    (11, -7, 9, -7, 9),
])
def test_enumerate_matches_box_oracle(N, D0, r0, D, r):
    cs = enumerate_heegner_classes(N, D0, r0, D, r)
    Delta = D0 * D
    rho = (-r0 * r) % (2 * N)
    bb = math.isqrt(Delta) + 4 * N
    box = enumerate_classes_box(N, Delta, rho, a_bound=bb, b_bound=bb)
    assert set(box.keys()) == {class_label(Q, N) for Q in cs}
    assert len(box) == len(cs)


# ------------------------------------------------------------ p-normalizing

def test_normalize_rep_p_identity_when_clean():
    Q = QForm(37, 12, 1 - 38)  # a=37, c=-37+... ensure p-clean: use direct
    Q = QForm(37, 4, -3)
    R, g = normalize_rep_p(Q, 5, 37)
    assert R == Q and g == ID


def test_normalize_rep_p_translates():
    cs = enumerate_heegner_classes(37, -4, 12, -139, 3)
    for Q in cs:
        R, g = normalize_rep_p(Q, 5, 37)
        assert R.a % 5 != 0 and R.c % 5 != 0
        assert act(Q, g) == R and g[2] % 37 == 0


# ------------------------------------------------------------ genus char

def test_genus_char_vanishing_rule():
    # (a/N, b, c, D0) sharing a factor forces 0; here the shared factor 2
    # sits in the content, so the scaling rule (D0/2) = 0 carries it
    assert genus_char(-4, QForm(2 * 37, 2, -2), 37) == 0


def test_genus_char_trivial_value_one():
    # principal-like form representing 1 gives (D0/1) = 1
    cs = enumerate_heegner_classes(37, -4, 12, -4, 12)
    vals = [genus_char(-4, Q, 37) for Q in cs]
    assert all(v in (-1, 0, 1) for v in vals)
    assert any(v != 0 for v in vals)


def test_genus_char_factorization_independence_and_orbit_constancy():
    N = 37
    r = random.Random(99)
    checked = 0
    for (D, rr) in [(-4, 12), (-139, 3), (-67, 9), (-40, 16)]:
        cs = enumerate_heegner_classes(N, -4, 12, D, rr)
        for Q in cs:
            v1 = genus_char_with_factorization(-4, Q, N, 1, N)
            v2 = genus_char_with_factorization(-4, Q, N, N, 1)
            assert v1 == v2 == genus_char(-4, Q, N)
            for _ in range(4):
                Qt = act(Q, random_gamma0(N, r))
                assert genus_char(-4, Qt, N) == v1
            checked += 1
    assert checked >= 10


# ------------------------------------------------------------- geodesics

def test_geodesic_vertical_line():
    assert geodesic_endpoints(QForm(0, 1, 0)) == (Fraction(0), INF)
    assert geodesic_endpoints(QForm(0, -1, 0)) == (INF, Fraction(0))


def test_geodesic_square_disc():
    # the class-invariant orientation reverses the raw fixed-point ordering
    # (-b-m)/2a -> (-b+m)/2a; see SQUARE_CYCLE_ORIENTATION
    assert geodesic_endpoints(QForm(1, 0, -1)) == (Fraction(1), Fraction(-1))
    assert set(geodesic_endpoints(QForm(1, 0, -1))) == {Fraction(-1), Fraction(1)}


def test_geodesic_nonsquare_endpoints_rational():
    for Q in [QForm(1, 1, -1), QForm(37, 12, -2)]:
        rq, sq = geodesic_endpoints(Q)
        assert rq is INF
        assert isinstance(sq, Fraction)


def test_geodesic_rejects_nonpositive():
    with pytest.raises(ValueError):
        geodesic_endpoints(QForm(1, 1, 1))


def test_moebius_action():
    g = (2, 1, 1, 1)
    assert moebius(g, INF) == Fraction(2)
    assert moebius(g, Fraction(-1)) == INF
    assert moebius(g, Fraction(0)) == Fraction(1)
