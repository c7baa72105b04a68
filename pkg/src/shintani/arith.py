"""Exact rational and capped-precision p-adic arithmetic.

Rationals are stdlib ``fractions.Fraction`` (aliased ``Rat``).  p-adic
integers are residues mod p^cap that track how many digits are actually
certified: every operation propagates cap = min of the operand caps minus
a documented loss, so a value never silently claims more precision than
the computation supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

Rat = Fraction

INERT, SPLIT, RAMIFIED = -1, 1, 0


def kronecker(a: int, n: int) -> int:
    """Extended Kronecker symbol (a/n), multiplicative in both arguments.

    Conventions: (a/2) is 0 for even a and (-1)^((a^2-1)/8) for odd a;
    (a/-1) = sign of a (with (0/-1)=1); (a/0) = 1 iff a = +-1.
    """
    if n == 0:
        return 1 if a in (1, -1) else 0
    sign = 1
    if n < 0:
        n = -n
        if a < 0:
            sign = -1
    # strip factors of 2 from n
    t = 0
    while n % 2 == 0:
        n //= 2
        t += 1
    if t:
        if a % 2 == 0:
            return 0
        if t % 2 == 1 and a % 8 in (3, 5):
            sign = -sign
    a %= n
    # now n odd positive, use quadratic reciprocity flips
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                sign = -sign
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            sign = -sign
        a %= n
    return sign if n == 1 else 0


@dataclass(frozen=True)
class PadicInt:
    """Element of Z_p known modulo p^cap.

    ``value`` is the canonical residue in [0, p^cap).  ``cap`` is the
    certified absolute precision; arithmetic takes the min of the operand
    caps and subtracts any documented loss (e.g. division by p).
    """

    p: int
    cap: int
    value: int

    def __post_init__(self):
        if self.cap < 0:
            raise ValueError("precision exhausted (cap < 0)")
        object.__setattr__(self, "value", int(self.value) % self.p**self.cap)

    # -- helpers -----------------------------------------------------------
    @property
    def modulus(self) -> int:
        return self.p**self.cap

    def _check(self, other: "PadicInt"):
        if self.p != other.p:
            raise ValueError("mixed primes")

    def with_cap(self, cap: int) -> "PadicInt":
        if cap > self.cap:
            raise ValueError("cannot raise certified precision")
        return PadicInt(self.p, cap, self.value)

    def valuation(self) -> int:
        """v_p(value), capped at ``cap`` (an exact zero only means 0 mod p^cap)."""
        if self.value == 0:
            return self.cap
        v, x = 0, self.value
        while x % self.p == 0:
            x //= self.p
            v += 1
        return v

    def is_unit(self) -> bool:
        return self.value % self.p != 0

    # -- ring operations ---------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        self._check(other)
        cap = min(self.cap, other.cap)
        return PadicInt(self.p, cap, self.value + other.value)

    __radd__ = __add__

    def __neg__(self):
        return PadicInt(self.p, self.cap, -self.value)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        self._check(other)
        cap = min(self.cap, other.cap)
        return PadicInt(self.p, cap, self.value * other.value)

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        return PadicInt(self.p, self.cap, pow(self.value, e, self.p**self.cap))

    def _coerce(self, other):
        if isinstance(other, PadicInt):
            return other
        if isinstance(other, int):
            return PadicInt(self.p, self.cap, other)
        if isinstance(other, Fraction):
            return from_rational(other, self.p, self.cap)
        return NotImplemented

    def inverse(self) -> "PadicInt":
        if not self.is_unit():
            raise ZeroDivisionError("not a p-adic unit")
        return PadicInt(self.p, self.cap, pow(self.value, -1, self.modulus))

    def unit_quotient(self, other: "PadicInt") -> "PadicInt":
        """self / other for a unit ``other``; no precision loss."""
        return self * other.inverse()

    def divide_exact_p_power(self, v: int) -> "PadicInt":
        """self / p^v, requiring p^v | value; costs v digits of absolute cap."""
        if self.value % self.p**v != 0:
            raise ValueError("value not divisible by p^%d" % v)
        return PadicInt(self.p, self.cap - v, self.value // self.p**v)

    def __eq__(self, other):
        if not isinstance(other, PadicInt):
            return NotImplemented
        cap = min(self.cap, other.cap)
        return self.p == other.p and (self.value - other.value) % self.p**cap == 0

    def __hash__(self):
        return hash((self.p, self.cap, self.value))

    def digits(self) -> list[int]:
        """Little-endian base-p digits, length = cap."""
        out, x = [], self.value
        for _ in range(self.cap):
            x, d = divmod(x, self.p)
            out.append(d)
        return out

    def __repr__(self):
        return f"{self.value} + O({self.p}^{self.cap})"


def from_rational(x: Fraction | int, p: int, cap: int) -> PadicInt:
    x = Fraction(x)
    if x.denominator % p == 0:
        raise ValueError("denominator not a p-adic unit")
    num = x.numerator % p**cap
    den_inv = pow(x.denominator, -1, p**cap)
    return PadicInt(p, cap, num * den_inv)


def agreement_valuation(x: PadicInt, y: PadicInt) -> int:
    """v_p(x - y), capped at the common certified precision."""
    return (x - y).valuation()


def teichmuller(u: PadicInt) -> PadicInt:
    """Teichmuller lift: the (p-1)-st root of unity congruent to u mod p.

    Iterating x -> x^p gains one digit per step, so cap iterations reach a
    fixed point mod p^cap.  No precision loss.
    """
    if not u.is_unit():
        raise ValueError("not a p-adic unit")
    m = u.modulus
    x = u.value
    for _ in range(u.cap):
        y = pow(x, u.p, m)
        if y == x:
            break
        x = y
    return PadicInt(u.p, u.cap, x)


def angular_unit_split(u: PadicInt) -> tuple[PadicInt, PadicInt]:
    """u = omega(u) * <u> with omega the Teichmuller lift and <u> a one-unit."""
    w = teichmuller(u)
    return w, u.unit_quotient(w)


def one_unit_log(u: PadicInt) -> PadicInt:
    """log of a one-unit via the alternating series log(1+x).

    Loss: the term x^n/n costs v_p(n) digits, so the result cap drops by
    max v_p(n) over contributing terms (0 for cap < p, at most log_p(cap)+1).
    """
    if not u.is_unit() or (u.value - 1) % u.p != 0:
        raise ValueError("not a one-unit")
    p, cap = u.p, u.cap
    m = u.modulus
    x = (u.value - 1) % m
    total = 0
    loss = 0
    term = 1
    n = 1
    # terms die once n - v_p(n) >= cap since v_p(x^n) >= n
    while n - _vp(n, p) < cap:
        term = term * x % m
        v = _vp(n, p)
        loss = max(loss, v)
        # x^n / n mod p^cap: n = p^v * n', invert n', shift by v
        contrib = term // p**v * pow(n // p**v, -1, m)
        if n % 2 == 0:
            contrib = -contrib
        total += contrib
        n += 1
    return PadicInt(p, cap - loss, total)


def exp_small(y: PadicInt) -> PadicInt:
    """exp of an element with v_p(y) >= 1 (converges for p >= 5).

    Loss: division by j! costs v_p(j!) digits at the deepest contributing j.
    """
    if y.is_unit():
        raise ValueError("exp requires v_p >= 1")
    p, cap = y.p, y.cap
    m = y.modulus
    total, term = 1, 1
    loss = 0
    j = 1
    fact_v = 0
    while True:
        # v_p(y^j / j!) >= j - v_p(j!) ; stop when beyond cap
        fact_v += _vp(j, p)
        if j - fact_v >= cap:
            break
        term = term * y.value % m
        jf = _factorial_unit_part(j, p, m)
        contrib = term // p**fact_v if term % p**fact_v == 0 else None
        if contrib is None:
            # y^j not divisible enough only if cap already ate the slack
            raise ValueError("exp precision underflow")
        total += contrib * pow(jf, -1, m)
        loss = max(loss, fact_v)
        j += 1
    return PadicInt(p, cap - loss, total)


def _vp(n: int, p: int) -> int:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _factorial_unit_part(j: int, p: int, m: int) -> int:
    out = 1
    for i in range(2, j + 1):
        out = out * (i // p**_vp(i, p)) % m
    return out


@dataclass
class PadicSeries:
    """Truncated series sum coeffs[j] t^j in the weight variable t.

    Represents a function on weights kappa = base_weight + 2t near the base;
    integer t = k - k0 recovers classical even weights 2k.  ``cap`` is the
    min certified cap of the coefficients.
    """

    p: int
    base_weight: int
    coeffs: list[PadicInt]

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def cap(self) -> int:
        return min(c.cap for c in self.coeffs)

    def __add__(self, other: "PadicSeries") -> "PadicSeries":
        self._compat(other)
        return PadicSeries(self.p, self.base_weight,
                           [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: "PadicSeries") -> "PadicSeries":
        self._compat(other)
        return PadicSeries(self.p, self.base_weight,
                           [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __mul__(self, other):
        if isinstance(other, PadicInt):
            return PadicSeries(self.p, self.base_weight,
                               [c * other for c in self.coeffs])
        self._compat(other)
        T = min(self.order, other.order)
        out = []
        for j in range(T):
            s = None
            for i in range(j + 1):
                term = self.coeffs[i] * other.coeffs[j - i]
                s = term if s is None else s + term
            out.append(s)
        return PadicSeries(self.p, self.base_weight, out)

    def scale(self, x: PadicInt) -> "PadicSeries":
        return self * x

    def evaluate(self, t: int) -> PadicInt:
        """Value at integer t.  The dropped tail of a T-term series whose j-th
        coefficient has valuation >= j - v_p(j!) (the one-unit-log shape) is
        bounded by T - v_p(T!), which caps the certified precision of the
        value; t = 0 reads the constant term exactly."""
        acc = self.coeffs[0]
        if t == 0:
            return acc
        tp = 1
        for c in self.coeffs[1:]:
            tp *= t
            acc = acc + c * tp
        tail = self.order - _vp_factorial(self.order, self.p)
        return acc.with_cap(min(acc.cap, tail))

    def _compat(self, other: "PadicSeries"):
        if (self.p, self.base_weight) != (other.p, other.base_weight):
            raise ValueError("incompatible series")
        if self.order != other.order:
            raise ValueError("mixed truncation orders")

    def __repr__(self):
        return f"PadicSeries(p={self.p}, 2k0={self.base_weight}, coeffs={self.coeffs})"


def series_one(p: int, base_weight: int, cap: int, order: int) -> PadicSeries:
    one = PadicInt(p, cap, 1)
    zero = PadicInt(p, cap, 0)
    return PadicSeries(p, base_weight, [one] + [zero] * (order - 1))


def one_unit_power(u: PadicInt, t_order: int, base_weight: int = 2) -> PadicSeries:
    """The series t -> <u>^t = exp(t log u), truncated at order t_order.

    Coefficients (log u)^j / j! are p-adic integers for p >= 5; division by
    j! costs v_p(j!) digits (zero for t_order <= p).
    """
    lg = one_unit_log(u)  # raises unless u is a one-unit
    p, cap = u.p, lg.cap
    coeffs = [PadicInt(p, cap, 1)]
    num = PadicInt(p, cap, 1)
    for j in range(1, t_order):
        num = num * lg
        v = _vp_factorial(j, p)
        c = num.divide_exact_p_power(v) if v else num
        jf_unit = _factorial_unit_part(j, p, p**cap)
        coeffs.append(c * PadicInt(p, c.cap, pow(jf_unit, -1, p**cap)))
    cap0 = min(c.cap for c in coeffs)
    return PadicSeries(p, base_weight, [c.with_cap(cap0) for c in coeffs])


def _vp_factorial(j: int, p: int) -> int:
    v, q = 0, p
    while q <= j:
        v += j // q
        q *= p
    return v


def hensel_sqrt(a: PadicInt) -> PadicInt:
    """Square root of a unit square in Z_p (p odd); root chosen with the
    least positive residue mod p that is a QR lift."""
    if not a.is_unit():
        raise ValueError("square root only for units here")
    p = a.p
    r0 = None
    for x in range(1, p):
        if (x * x - a.value) % p == 0:
            r0 = x
            break
    if r0 is None:
        raise ValueError("not a square mod p")
    m = a.modulus
    x = r0
    prec = 1
    while prec < a.cap:
        # Newton: x <- x - (x^2 - a)/(2x), doubles precision
        x = (x - (x * x - a.value) * pow(2 * x, -1, m)) % m
        prec *= 2
    return PadicInt(p, a.cap, x)


def hensel_root_quadratic(b: int, c: int, p: int, cap: int, r0: int) -> PadicInt:
    """Root of x^2 + b x + c = 0 in Z_p lifting the simple root r0 mod p."""
    f = lambda x, m: (x * x + b * x + c) % m
    df = lambda x: 2 * x + b
    if f(r0, p) != 0 or df(r0) % p == 0:
        raise ValueError("r0 must be a simple root mod p")
    m = p**cap
    x = r0 % m
    for _ in range(cap):  # linear convergence is plenty at desk scale
        x = (x - f(x, m) * pow(df(x), -1, m)) % m
        if f(x, m) == 0:
            break
    return PadicInt(p, cap, x)
