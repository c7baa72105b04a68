"""Modular symbols for Gamma_0(N) with dual-polynomial coefficients.

A symbol is determined by its values on the Manin generator paths
{g.0 -> g.oo}, g running over right-coset representatives of
Gamma_0(N)\\SL2(Z) (indexed by bottom rows in P^1(Z/N)), subject to the
two- and three-term relations.  Values live in the dual of the space of
homogeneous degree-w polynomials, stored on the monomial basis
X^(w-j) Y^j.  Transport convention: Phi{gr -> gs}(P) = Phi{r -> s}(P|g)
for g in Gamma_0(N), and Hecke operators act by
(T_m Phi){r -> s}(P) = sum_reps Phi{dr -> ds}(P|adj(d)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

from .quadforms import (
    ID,
    INF,
    Mat,
    S_MAT,
    _complete_to_sl2,
    mat_adj,
    mat_inv,
    mat_mul,
    moebius,
    p1_normalize,
    p1_points,
)

U_MAT: Mat = (-1, -1, 1, 0)  # order 3, drives the three-term relation
ETA: Mat = (1, 0, 0, -1)  # normalizer inducing the sign involution


# ----------------------------------------------------------- config counts

def gamma0_index(N: int) -> int:
    mu = N
    for p in _prime_divisors(N):
        mu = mu // p * (p + 1)
    return mu


def gamma0_ncusps(N: int) -> int:
    return sum(_euler_phi(math.gcd(d, N // d)) for d in _divisors(N))


def gamma0_genus(N: int) -> int:
    mu = gamma0_index(N)
    nu2 = 0 if N % 4 == 0 else _prod(1 + _kro4(-1, p) for p in _prime_divisors(N))
    nu3 = 0 if N % 9 == 0 else _prod(1 + _kro4(-3, p) for p in _prime_divisors(N))
    g12 = 12 + mu - 3 * nu2 - 4 * nu3 - 6 * gamma0_ncusps(N)
    assert g12 % 12 == 0
    return g12 // 12


def _kro4(d: int, p: int) -> int:
    from .arith import kronecker

    return kronecker(d, p)


def _prime_divisors(N: int) -> list[int]:
    out, q, n = [], 2, N
    while q * q <= n:
        if n % q == 0:
            out.append(q)
            while n % q == 0:
                n //= q
        q += 1
    if n > 1:
        out.append(n)
    return out


def _divisors(N: int) -> list[int]:
    return [d for d in range(1, N + 1) if N % d == 0]


def _euler_phi(n: int) -> int:
    out = n
    for p in _prime_divisors(n):
        out = out // p * (p - 1)
    return out


def _prod(it):
    out = 1
    for x in it:
        out *= x
    return out


# ----------------------------------------------------- polynomial machinery

def poly_act_matrix(g: Mat, w: int) -> list[list[int]]:
    """Row j is the expansion of (X^(w-j) Y^j)|g on the monomial basis."""
    a, b, c, d = g
    rows = []
    for j in range(w + 1):
        coeffs = [0] * (w + 1)
        # (aX+bY)^(w-j) (cX+dY)^j
        for s in range(w - j + 1):
            bin1 = math.comb(w - j, s) * a ** (w - j - s) * b**s
            for t in range(j + 1):
                bin2 = math.comb(j, t) * c ** (j - t) * d**t
                coeffs[s + t] += bin1 * bin2
        rows.append(coeffs)
    return rows


def poly_act(coeffs, g: Mat):
    """Substitute: (P|g) for P given on the monomial basis."""
    w = len(coeffs) - 1
    mat = poly_act_matrix(g, w)
    out = [0] * (w + 1)
    for j, cj in enumerate(coeffs):
        if cj:
            for k, m in enumerate(mat[j]):
                out[k] = out[k] + cj * m
    return out


def qform_power_coeffs(Q, k_minus_1: int) -> list[int]:
    """Monomial coefficients of Q(X,Y)^(k-1), homogeneous of degree 2(k-1)."""
    coeffs = [1]
    base = [Q.a, Q.b, Q.c]
    for _ in range(k_minus_1):
        new = [0] * (len(coeffs) + 2)
        for i, x in enumerate(coeffs):
            if x:
                for j, y in enumerate(base):
                    new[i + j] += x * y
        coeffs = new
    return coeffs


# ------------------------------------------------------------ Manin paths

def continued_fraction_path(x: Fraction) -> list[Mat]:
    """Unimodular matrices g with {oo -> x} = sum {g.0 -> g.oo}."""
    if x is INF:
        return []
    x = Fraction(x)
    p_prev, q_prev = 1, 0
    p_cur, q_cur = math.floor(x), 1
    mats = [(p_cur, -1, q_cur, 0)]  # {oo -> a0}
    frac = x - p_cur
    k = 1
    while frac != 0:
        x = 1 / frac
        a = math.floor(x)
        frac = x - a
        p_cur, p_prev = a * p_cur + p_prev, p_cur
        q_cur, q_prev = a * q_cur + q_prev, q_cur
        sgn = -1 if k % 2 == 0 else 1
        mats.append((p_cur, sgn * p_prev, q_cur, sgn * q_prev))
        k += 1
    for g in mats:
        assert g[0] * g[3] - g[1] * g[2] == 1
    return mats


def unimodular_path_decomposition(r, s) -> list[Mat]:
    """Matrices g with {r -> s} = sum {g.0 -> g.oo} (Manin's trick)."""
    out = []
    # {r -> s} = {oo -> s} - {oo -> r}
    for g in continued_fraction_path(s):
        out.append((g, 1))
    for g in continued_fraction_path(r):
        out.append((g, -1))
    return [(g, sgn) for g, sgn in out]


# ------------------------------------------------------------------ spaces

def p1_lift_row(pt: tuple[int, int], N: int) -> Mat:
    """SL2(Z) matrix whose bottom row is congruent to pt mod N."""
    c, d = pt
    if N == 1:
        return ID
    candidates = [(c, d)]
    for k in range(1, N + 2):
        candidates.append((c + k * N, d))
        candidates.append((c, d + k * N))
    for cc, dd in candidates:
        if math.gcd(cc, dd) == 1:
            return _row_matrix(cc, dd)
    raise RuntimeError("no coprime lift for bottom row")


def _row_matrix(c: int, d: int) -> Mat:
    g, x, y = _xgcd(c, d)
    assert g == 1
    # [[y', x'], [c, d]] with det = y'*d - x'*c = 1
    return (y, -x, c, d)


def _xgcd(a: int, b: int):
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def right_coset_label(g: Mat, N: int) -> tuple[int, int]:
    """Label of Gamma_0(N) g: the bottom row mod N, projectivized."""
    return p1_normalize(g[2], g[3], N)


@dataclass
class MSpace:
    """Solved Manin-relation presentation of Symb_{Gamma_0(N)}(V_w(Q))."""

    N: int
    w: int
    gens: list[Mat] = field(default_factory=list)
    label_index: dict = field(default_factory=dict)
    basis: list[list[Fraction]] = field(default_factory=list)  # raw vectors
    _free_cols: list[int] = field(default_factory=list)
    hecke_cache: dict = field(default_factory=dict)

    @property
    def ngens(self) -> int:
        return len(self.gens)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def raw_len(self) -> int:
        return self.ngens * (self.w + 1)

    def gen_index(self, g: Mat) -> tuple[int, Mat]:
        """Coset index i and gamma in Gamma_0(N) with g = gamma * gens[i]."""
        i = self.label_index[right_coset_label(g, self.N)]
        gamma = mat_mul(g, mat_inv(self.gens[i]))
        assert gamma[2] % self.N == 0
        return i, gamma

    # value of the raw vector on the pair (generator path of g, P)
    def eval_unimodular(self, raw, g: Mat, coeffs):
        i, gamma = self.gen_index(g)
        twisted = poly_act(coeffs, gamma)
        base = i * (self.w + 1)
        acc = None
        for j, cj in enumerate(twisted):
            if cj == 0:
                continue
            term = raw[base + j] * cj
            acc = term if acc is None else acc + term
        if acc is None:
            acc = raw[base] * 0
        return acc

    def eval_path(self, raw, r, s, coeffs):
        if len(coeffs) != self.w + 1:
            raise ValueError("polynomial degree must equal the coefficient weight")
        acc = None
        for g, sgn in unimodular_path_decomposition(r, s):
            v = self.eval_unimodular(raw, g, coeffs)
            v = v if sgn == 1 else -v
            acc = v if acc is None else acc + v
        if acc is None:
            acc = raw[0] * 0
        return acc


def build_space(N: int, w: int) -> MSpace:
    """Solve the (I+S) and (I+U+U^2) relations over Q and keep the nullspace."""
    if w % 2 != 0 or w < 0:
        raise ValueError("coefficient weight must be even and nonnegative")
    space = MSpace(N, w)
    space.gens = [p1_lift_row(pt, N) for pt in p1_points(N)]
    space.label_index = {right_coset_label(g, N): i for i, g in enumerate(space.gens)}
    rows = []
    wd = w + 1
    for i, g in enumerate(space.gens):
        for rel_mat, powers in ((S_MAT, (1,)), (U_MAT, (1, 2))):
            row_block = [[Fraction(0)] * (space.ngens * wd) for _ in range(wd)]
            for j in range(wd):
                row_block[j][i * wd + j] = Fraction(1)
            for e in powers:
                h = mat_mul(g, mat_pow_small(rel_mat, e))
                k, gamma = space.gen_index(h)
                amat = poly_act_matrix(gamma, w)
                for j in range(wd):
                    for t in range(wd):
                        row_block[j][k * wd + t] += amat[j][t]
            rows.extend(row_block)
    space.basis, space._free_cols = _nullspace(rows, space.ngens * wd)
    return space


def mat_pow_small(g: Mat, e: int) -> Mat:
    out = ID
    for _ in range(e):
        out = mat_mul(out, g)
    return out


def _nullspace(rows, ncols):
    """Exact nullspace basis of the row system; deterministic RREF order."""
    mat = [list(map(Fraction, r)) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(mat)) if mat[i][c] != 0), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        inv = 1 / mat[r][c]
        mat[r] = [x * inv for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -mat[i][fc]
        basis.append(vec)
    return basis, free


# ------------------------------------------------------------------- Hecke

def hecke_reps(m: int, N: int) -> list[Mat]:
    if math.gcd(m, N) == 1:
        reps = []
        for a in _divisors(m):
            d = m // a
            reps.extend((a, b, 0, d) for b in range(d))
        return reps
    if _is_prime(m) and N % m == 0:
        return [(1, b, 0, m) for b in range(m)]
    raise ValueError("Hecke operator needs gcd(m,N)=1 or a prime dividing N")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in range(2, math.isqrt(n) + 1):
        if n % q == 0:
            return False
    return True


def hecke_apply_raw(space: MSpace, raw, m: int, reps=None):
    """(T_m Phi) as a raw vector; raw must satisfy the relations."""
    reps = hecke_reps(m, space.N) if reps is None else reps
    out = []
    wd = space.w + 1
    for g in space.gens:
        r0, s0 = moebius(g, Fraction(0)), moebius(g, INF)
        for j in range(wd):
            coeffs = [Fraction(0)] * wd
            coeffs[j] = Fraction(1)
            acc = None
            for d in reps:
                pc = poly_act(coeffs, mat_adj(d))
                v = space.eval_path(raw, moebius(d, r0), moebius(d, s0), pc)
                acc = v if acc is None else acc + v
            out.append(acc)
    return out


def involution_apply_raw(space: MSpace, raw):
    """The eta = diag(1,-1) involution on symbols."""
    out = []
    wd = space.w + 1
    for g in space.gens:
        r0, s0 = moebius(g, Fraction(0)), moebius(g, INF)
        r1 = -r0 if r0 is not INF else INF
        s1 = -s0 if s0 is not INF else INF
        for j in range(wd):
            coeffs = [Fraction(0)] * wd
            coeffs[j] = Fraction(1)
            pc = poly_act(coeffs, ETA)
            out.append(space.eval_path(raw, r1, s1, pc))
    return out


def _coords_in_basis(space: MSpace, raw):
    """Coordinates of a raw symbol in the nullspace basis (pivot readoff)."""
    return [raw[c] for c in space._free_cols]


def _matrix_of(space: MSpace, op) -> list[list[Fraction]]:
    cols = []
    for v in space.basis:
        img = op(v)
        cols.append(_coords_in_basis(space, img))
    # column-major -> row-major
    n = space.dim
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def hecke_matrix(space: MSpace, m: int, reps=None) -> list[list[Fraction]]:
    """Matrix of T_m (or U_m for m | N prime) on the solved basis."""
    key = ("T", m) if reps is None else None
    if key and key in space.hecke_cache:
        return space.hecke_cache[key]
    mat = _matrix_of(space, lambda v: hecke_apply_raw(space, v, m, reps))
    if key:
        space.hecke_cache[key] = mat
    return mat


def involution_matrix(space: MSpace) -> list[list[Fraction]]:
    key = ("iota",)
    if key not in space.hecke_cache:
        space.hecke_cache[key] = _matrix_of(space, lambda v: involution_apply_raw(space, v))
    return space.hecke_cache[key]


# ------------------------------------------------------------ eigensymbols

@dataclass
class EigenSymbol:
    """Rational Hecke eigensymbol, scaled to integral values of content 1."""

    space: MSpace
    sign: int
    vector: list[Fraction]
    eigen: dict[int, Fraction]
    normalization: str = "integral generator values with content 1, first nonzero positive"

    def eval_path(self, r, s, coeffs) -> Fraction:
        return self.space.eval_path(self.vector, r, s, coeffs)

    def content(self) -> int:
        g = 0
        for x in self.vector:
            assert x.denominator == 1
            g = math.gcd(g, abs(x.numerator))
        return g

    def hecke_eigenvalue(self, m: int) -> Fraction:
        if m in self.eigen:
            return self.eigen[m]
        img = hecke_apply_raw(self.space, self.vector, m)
        a = _eigen_ratio(self.vector, img)
        self.eigen[m] = a
        return a


def _eigen_ratio(v, img):
    a = None
    for x, y in zip(v, img):
        if x != 0:
            cand = Fraction(y) / Fraction(x)
            if a is None:
                a = cand
            elif a != cand:
                raise ValueError("not an eigenvector")
        elif y != 0:
            raise ValueError("not an eigenvector")
    return a


def eigen_symbol(space: MSpace, sign: int, seed: dict[int, Fraction]) -> EigenSymbol:
    """Basis vector of the rational simultaneous eigenspace cut out by the
    seeded (m, a_m) pairs and the sign, normalized to content 1."""
    mats = [(hecke_matrix(space, m), Fraction(a)) for m, a in sorted(seed.items())]
    mats.append((involution_matrix(space), Fraction(sign)))
    n = space.dim
    rows = []
    for mat, a in mats:
        for i in range(n):
            rows.append([mat[i][j] - (a if i == j else 0) for j in range(n)])
    kernel, _ = _nullspace(rows, n)
    if len(kernel) != 1:
        raise ValueError(f"not rationally isolated (eigenspace dim {len(kernel)})")
    coords = kernel[0]
    raw = [sum((space.basis[j][i] * coords[j] for j in range(n)), Fraction(0))
           for i in range(space.raw_len())]
    den = 1
    for x in raw:
        den = den * x.denominator // math.gcd(den, x.denominator)
    ints = [x * den for x in raw]
    g = 0
    for x in ints:
        g = math.gcd(g, abs(x.numerator))
    ints = [x / g for x in ints]
    first = next(x for x in ints if x != 0)
    if first < 0:
        ints = [-x for x in ints]
    sym = EigenSymbol(space, sign, ints, dict(seed))
    # certify the sign and the seeded eigenvalues on the normalized vector
    iota = involution_apply_raw(space, sym.vector)
    assert all(y == sign * x for x, y in zip(sym.vector, iota))
    return sym


def rational_eigen_seeds(space: MSpace, ell: int = 2):
    """Rational eigenvalues of T_ell with multiplicity, from the charpoly."""
    import sympy

    mat = sympy.Matrix([[sympy.Rational(x) for x in row]
                        for row in hecke_matrix(space, ell)])
    poly = mat.charpoly()
    out = []
    for root, mult in sympy.roots(poly.as_expr(), multiple=False).items():
        if root.is_rational:
            out.append((Fraction(int(root.p), int(root.q)), mult))
    return sorted(out)


# ----------------------------------------------------------------- boundary

def cusp_class_invariant(N: int, cusp) -> tuple:
    """Canonical label of the Gamma_0(N)-class of a cusp (Cremona's test)."""
    if cusp is INF:
        p, q = 1, 0
    else:
        p, q = cusp.numerator, cusp.denominator
    # find the canonical (d, x) pair: d = gcd(q, N), x = s * q/d mod gcd(d, N/d)
    d = math.gcd(q, N) if q else N
    if q == 0:
        return (N, 0)
    g, s, _ = _xgcd(p, q)
    assert g == 1
    m = math.gcd(d, N // d)
    x = (s * (q // d)) % m if m > 1 else 0
    return (d, x)


def boundary_space(space: MSpace) -> list[list[Fraction]]:
    """Raw vectors of the boundary symbols h -> [h(s) - h(r)] (weight 0 only)."""
    if space.w != 0:
        raise ValueError("boundary symbols implemented for weight 0 only")
    classes = {}
    for g in space.gens:
        for x in (moebius(g, Fraction(0)), moebius(g, INF)):
            classes.setdefault(cusp_class_invariant(space.N, x), len(classes))
    vecs = []
    for label in sorted(classes):
        vec = []
        for g in space.gens:
            r0, s0 = moebius(g, Fraction(0)), moebius(g, INF)
            hr = 1 if cusp_class_invariant(space.N, r0) == label else 0
            hs = 1 if cusp_class_invariant(space.N, s0) == label else 0
            vec.append(Fraction(hs - hr))
        vecs.append(vec)
    return vecs


# -------------------------------------------------------------------- cache

def space_cache_payload(space: MSpace, hecke_upto: int = 20) -> dict:
    for m in range(1, hecke_upto + 1):
        if math.gcd(m, space.N) == 1:
            hecke_matrix(space, m)
    return {
        "N": space.N,
        "w": space.w,
        "basis": [[_fr(x) for x in v] for v in space.basis],
        "free_cols": space._free_cols,
        "hecke": {str(key[1]): [[_fr(x) for x in row] for row in mat]
                   for key, mat in space.hecke_cache.items()
                   if len(key) == 2 and key[0] == "T"},
    }


def save_space(space: MSpace, path: Path, hecke_upto: int = 20):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(space_cache_payload(space, hecke_upto), sort_keys=True))
    tmp.replace(path)


def load_space(path: Path) -> MSpace:
    data = json.loads(path.read_text())
    space = MSpace(data["N"], data["w"])
    space.gens = [p1_lift_row(pt, space.N) for pt in p1_points(space.N)]
    space.label_index = {right_coset_label(g, space.N): i for i, g in enumerate(space.gens)}
    space.basis = [[_unfr(x) for x in v] for v in data["basis"]]
    space._free_cols = data["free_cols"]
    for m, mat in data["hecke"].items():
        space.hecke_cache[("T", int(m))] = [[_unfr(x) for x in row] for row in mat]
    return space


def _fr(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _unfr(s: str) -> Fraction:
    num, den = s.split("/")
    return Fraction(int(num), int(den))


@lru_cache(maxsize=None)
def cached_space(N: int, w: int) -> MSpace:
    return build_space(N, w)
