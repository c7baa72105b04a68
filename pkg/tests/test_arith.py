from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from shintani.arith import (
    PadicInt,
    PadicSeries,
    agreement_valuation,
    angular_unit_split,
    from_rational,
    hensel_root_quadratic,
    hensel_sqrt,
    kronecker,
    one_unit_log,
    one_unit_power,
    teichmuller,
)


# ---------------------------------------------------------------- kronecker

def legendre_oracle(a, p):
    # Euler criterion for odd primes
    a %= p
    if a == 0:
        return 0
    r = pow(a, (p - 1) // 2, p)
    return -1 if r == p - 1 else r


def test_kronecker_one_numerator():
    for n in [-7, -2, -1, 2, 3, 10, 97]:
        assert kronecker(1, n) == 1


def test_kronecker_examples():
    assert kronecker(-4, 5) == 1
    assert kronecker(-3, 5) == -1


@given(st.integers(-300, 300), st.sampled_from([3, 5, 7, 11, 13, 37, 101]))
def test_kronecker_matches_legendre(a, p):
    assert kronecker(a, p) == legendre_oracle(a, p)


@given(st.integers(-120, 120), st.integers(-120, 120), st.integers(-60, 60))
@settings(max_examples=80)
def test_kronecker_multiplicative_top(a, b, n):
    assert kronecker(a * b, n) == kronecker(a, n) * kronecker(b, n)


@given(st.integers(-120, 120), st.integers(-60, 60), st.integers(-60, 60))
@settings(max_examples=80)
def test_kronecker_multiplicative_bottom(a, m, n):
    assert kronecker(a, m * n) == kronecker(a, m) * kronecker(a, n)


# ---------------------------------------------------------------- PadicInt

def test_padic_basics():
    x = PadicInt(5, 8, 7)
    y = PadicInt(5, 8, 3)
    assert (x + y).value == 10
    assert (x * y).value == 21
    assert (x - y).value == 4
    assert x.inverse() * x == PadicInt(5, 8, 1)


def test_cap_propagation_min():
    x = PadicInt(5, 8, 7)
    y = PadicInt(5, 3, 2)
    assert (x + y).cap == 3
    assert (x * y).cap == 3


def test_divide_exact_p_power_costs_cap():
    x = PadicInt(5, 6, 50)
    y = x.divide_exact_p_power(2)
    assert y.cap == 4 and y.value == 2
    with pytest.raises(ValueError):
        PadicInt(5, 6, 7).divide_exact_p_power(1)


def test_from_rational_and_back():
    x = from_rational(Fraction(3, 7), 5, 6)
    assert x * 7 == PadicInt(5, 6, 3)
    with pytest.raises(ValueError):
        from_rational(Fraction(1, 5), 5, 6)


# shadow computation: mirror a random op sequence on exact rationals and
# check the declared cap never exceeds what the rational value certifies
@given(st.lists(st.tuples(st.sampled_from("+-*"), st.integers(-50, 50)), min_size=1, max_size=12))
@settings(max_examples=60)
def test_precision_ledger_shadow(ops):
    p, M = 5, 7
    x = PadicInt(p, M, 3)
    shadow = Fraction(3)
    for op, k in ops:
        if k % p == 0:
            k += 1
        if op == "+":
            x = x + k
            shadow += k
        elif op == "-":
            x = x - k
            shadow -= k
        else:
            x = x * k
            shadow *= k
    mirror = from_rational(shadow, p, M)
    assert agreement_valuation(x, mirror) >= x.cap


# -------------------------------------------------------------- teichmuller

def test_teichmuller_fixed_point_one():
    assert teichmuller(PadicInt(5, 8, 1)) == PadicInt(5, 8, 1)


def test_teichmuller_hensel_example():
    # omega(2) mod 25 is 7: 7 = 2 mod 5 and 7^4 = 2401 = 1 mod 25
    w = teichmuller(PadicInt(5, 2, 2))
    assert w.value == 7


def test_teichmuller_nonunit_rejected():
    with pytest.raises(ValueError, match="not a p-adic unit"):
        teichmuller(PadicInt(5, 4, 5))


@given(st.integers(1, 10**6), st.sampled_from([5, 7, 11]))
@settings(max_examples=40)
def test_teichmuller_root_of_unity_and_split(u, p):
    if u % p == 0:
        u += 1
    x = PadicInt(p, 8, u)
    w = teichmuller(x)
    assert w ** (p - 1) == PadicInt(p, 8, 1)
    assert (w.value - u) % p == 0
    w2, one_unit = angular_unit_split(x)
    assert w2 * one_unit == x
    assert (one_unit.value - 1) % p == 0


# ----------------------------------------------------------- one-unit power

def test_one_unit_power_of_one():
    s = one_unit_power(PadicInt(5, 8, 1), 4)
    assert s.coeffs[0].value == 1
    assert all(c.value == 0 for c in s.coeffs[1:])


def test_one_unit_power_eval_matches_direct_squaring():
    u = PadicInt(5, 8, 6)  # 1 + p
    s = one_unit_power(u, 6)
    got = s.evaluate(2)
    direct = u * u
    assert agreement_valuation(got, direct) >= got.cap


def test_one_unit_power_zeroth():
    u = PadicInt(5, 8, 6)
    assert one_unit_power(u, 3).evaluate(0) == PadicInt(5, 8, 1)


def test_one_unit_power_rejects_non_one_unit():
    with pytest.raises(ValueError):
        one_unit_power(PadicInt(5, 8, 2), 3)


@given(st.integers(0, 5**4 - 1), st.integers(0, 4))
@settings(max_examples=40)
def test_one_unit_power_iterated_multiplication(k, t):
    u = PadicInt(5, 6, 1 + 5 * k)
    T = 6
    s = one_unit_power(u, T)
    got = s.evaluate(t)
    assert agreement_valuation(got, u**t) >= got.cap


def test_one_unit_log_loss_documented():
    # the n = p term only contributes once p - 1 < cap, so cap <= p - 1 is lossless
    u = PadicInt(5, 4, 1 + 5 * 3)
    assert one_unit_log(u).cap == 4
    # deeper caps lose one digit to the n = p, 2p, ... terms
    u2 = PadicInt(5, 10, 1 + 5 * 3)
    assert one_unit_log(u2).cap == 9


# ------------------------------------------------------------------ series

def test_series_arithmetic_caps():
    p = 5
    a = PadicSeries(p, 2, [PadicInt(p, 8, 1), PadicInt(p, 8, 2)])
    b = PadicSeries(p, 2, [PadicInt(p, 6, 3), PadicInt(p, 6, 4)])
    assert (a + b).cap == 6
    prod = a * b
    assert prod.coeffs[0].value == 3
    assert prod.coeffs[1] == PadicInt(p, 6, 4 + 6)


# ------------------------------------------------------------------ hensel

def test_hensel_sqrt():
    a = PadicInt(5, 8, 4)
    r = hensel_sqrt(a)
    assert r * r == a
    with pytest.raises(ValueError):
        hensel_sqrt(PadicInt(5, 8, 2))  # 2 is not a QR mod 5


def test_hensel_root_quadratic():
    # x^2 + 2x + 5 = 0 has a unit root = 3 mod 5
    r = hensel_root_quadratic(2, 5, 5, 10, 3)
    assert (r * r + 2 * r + 5).value == 0
    assert r.value % 5 == 3
