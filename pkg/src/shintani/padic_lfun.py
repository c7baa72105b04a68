"""Measure-valued symbols at finite moment precision and the square-root
p-adic L-functions built from them.

The overconvergent avatar stores, for each level-N Manin generator, a
two-variable moment array over the radius-1/p cells of the primitive
vectors: m[v][i,j] = integral of x^i y^j over the congruence cell v.  The
operator U(p) is the full (p+1)-term double-coset operator with mass on
imprimitive vectors discarded; its extra term dies under the weight
specialization (which integrates over Z_p x Z_p^*), so specialization
intertwines it with the classical U_p at level Np.

Integration over the domains X_Q refines the cell cover into direction
tubes {x = theta*y (mod p^L)} via the U(p)-eigen equation, one rep at a
time; the weight kernel is Taylor-expanded on each tube against centered
moments, producing a truncated series in the weight variable t with
kappa = 2*k0 + 2*t.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .arith import (
    PadicInt,
    _vp,
    PadicSeries,
    agreement_valuation,
    from_rational,
    hensel_root_quadratic,
    hensel_sqrt,
    kronecker,
    one_unit_power,
    teichmuller,
    _vp_factorial,
)
from .modsym import (
    EigenSymbol,
    MSpace,
    cached_space,
    hecke_reps,
    poly_act,
    qform_power_coeffs,
    unimodular_path_decomposition,
)
from .quadforms import (
    INF,
    Mat,
    QForm,
    act,
    enumerate_heegner_classes,
    genus_char,
    geodesic_endpoints,
    mat_adj,
    mat_inv,
    mat_mul,
    moebius,
    normalize_rep_p,
)


# --------------------------------------------------------------------------
# p-stabilization of a classical eigensymbol
# --------------------------------------------------------------------------

def unit_root(ap: Fraction, p: int, two_k: int, cap: int) -> PadicInt:
    """Unit root of X^2 - a_p X + p^(2k-1), requiring ordinarity."""
    if ap.denominator != 1:
        raise ValueError("rational eigenvalue required")
    a = int(ap)
    if a % p == 0:
        raise ValueError("not ordinary")
    return hensel_root_quadratic(-a, p ** (two_k - 1), p, cap, a % p)


@dataclass
class StabilizedSymbol:
    """Level-Np p-stabilization of a level-N eigensymbol, p-adic valued.

    phi{r->s}(P) = I{r->s}(P) - alpha^{-1} I{pr->ps}(P(X, pY)); a U_p
    eigensymbol with the unit-root eigenvalue.
    """

    base: EigenSymbol
    p: int
    cap: int
    alpha: PadicInt

    @property
    def N(self) -> int:
        return self.base.space.N

    @property
    def weight(self) -> int:
        return self.base.space.w + 2

    def eval_path(self, r, s, coeffs) -> PadicInt:
        main = self.base.eval_path(r, s, coeffs)
        scaled = [c * self.p**j for j, c in enumerate(coeffs)]
        pr = INF if r is INF else self.p * r
        ps = INF if s is INF else self.p * s
        tail = self.base.eval_path(pr, ps, scaled)
        return from_rational(main, self.p, self.cap) - self.alpha.inverse() * from_rational(
            tail, self.p, self.cap)

    def u_p_apply(self, r, s, coeffs) -> PadicInt:
        acc = None
        for a in range(self.p):
            g = (1, a, 0, self.p)
            pc = poly_act(coeffs, mat_adj(g))
            v = self.eval_path(moebius(g, r), moebius(g, s), pc)
            acc = v if acc is None else acc + v
        return acc

    def recovers_base(self, r, s, coeffs) -> bool:
        """Degeneracy relation: I = phi + alpha^{-1} (p-rescaled I)."""
        scaled = [c * self.p**j for j, c in enumerate(coeffs)]
        pr = INF if r is INF else self.p * r
        ps = INF if s is INF else self.p * s
        lhs = from_rational(self.base.eval_path(r, s, coeffs), self.p, self.cap)
        rhs = self.eval_path(r, s, coeffs) + self.alpha.inverse() * from_rational(
            self.base.eval_path(pr, ps, scaled), self.p, self.cap)
        return lhs == rhs


def p_stabilize(sym: EigenSymbol, p: int, cap: int) -> StabilizedSymbol:
    """Ordinary p-stabilization with the unit-root U_p eigenvalue."""
    if sym.space.N % p == 0:
        raise ValueError("p must not divide the level")
    ap = sym.hecke_eigenvalue(p)
    alpha = unit_root(ap, p, sym.space.w + 2, cap)
    return StabilizedSymbol(sym, p, cap, alpha)


# --------------------------------------------------------------------------
# moment-cell machinery
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _cells(p: int) -> tuple:
    return tuple((v1, v2) for v1 in range(p) for v2 in range(p)
                 if (v1, v2) != (0, 0))


@lru_cache(maxsize=None)
def _moments(M: int) -> tuple:
    return tuple((i, j) for d in range(M) for i in range(d + 1) for j in [d - i])


@lru_cache(maxsize=None)
def _cell_index(p: int) -> dict:
    return {c: k for k, c in enumerate(_cells(p))}


@lru_cache(maxsize=None)
def _moment_index(M: int) -> dict:
    return {m: k for k, m in enumerate(_moments(M))}


@lru_cache(maxsize=16384)
def _subst_matrix(g: Mat, p: int, M: int, modulus: int) -> np.ndarray:
    """Moment mixing of the pushforward by (x,y) -> (a x + b y, c x + d y):
    row (i,j) holds the monomial expansion of (ax+by)^i (cx+dy)^j."""
    a, b, c, d = (x % modulus for x in g)
    moms = _moments(M)
    idx = _moment_index(M)
    n = len(moms)
    S = np.zeros((n, n), dtype=np.int64)
    for row, (i, j) in enumerate(moms):
        # expand (a x + b y)^i
        left = {}
        for s in range(i + 1):
            left[s] = math.comb(i, s) * pow(a, s, modulus) * pow(b, i - s, modulus) % modulus
        for t in range(j + 1):
            right = math.comb(j, t) * pow(c, t, modulus) * pow(d, j - t, modulus) % modulus
            for s, lv in left.items():
                col = idx[(s + t, i + j - s - t)]
                S[row, col] = (S[row, col] + lv * right) % modulus
    return S


def _cell_perm(g: Mat, p: int) -> np.ndarray:
    """source index for each target cell under the cell action of g
    (det g must be coprime to p; inversion happens mod p)."""
    cells = _cells(p)
    cidx = _cell_index(p)
    det = g[0] * g[3] - g[1] * g[2]
    dinv = pow(det % p, -1, p)
    ginv_mod = ((g[3] * dinv) % p, (-g[1] * dinv) % p,
                (-g[2] * dinv) % p, (g[0] * dinv) % p)
    out = np.zeros(len(cells), dtype=np.int64)
    for w_i, (w1, w2) in enumerate(cells):
        v1 = (ginv_mod[0] * w1 + ginv_mod[1] * w2) % p
        v2 = (ginv_mod[2] * w1 + ginv_mod[3] * w2) % p
        out[w_i] = cidx[(v1, v2)]
    return out


@dataclass
class OCSymbol:
    """Moment-truncated measure-valued symbol on the primitive vectors.

    data[i] is the (ncells x nmoments) array of the measure attached to the
    i-th level-N Manin generator path, residues mod p^M.
    """

    p: int
    N: int
    k0: int
    M: int
    space: MSpace
    alpha: PadicInt
    data: np.ndarray  # shape (ngens, ncells, nmom)
    loss: dict = field(default_factory=dict)
    refine_depth: int = 2

    @property
    def modulus(self) -> int:
        return self.p**self.M

    def copy_with(self, data) -> "OCSymbol":
        return OCSymbol(self.p, self.N, self.k0, self.M, self.space, self.alpha,
                        data, dict(self.loss), self.refine_depth)

    # ---------------------------------------------------------- path values
    def path_measure(self, r, s) -> np.ndarray:
        """Moment array of the measure Phi{r -> s} via Manin transport."""
        key = (None if r is INF else (r.numerator, r.denominator),
               None if s is INF else (s.numerator, s.denominator))
        cached = self._path_cache.get(key) if hasattr(self, "_path_cache") else None
        if cached is not None:
            return cached
        mod = self.modulus
        out = np.zeros_like(self.data[0])
        for g, sgn in unimodular_path_decomposition(r, s):
            i, gamma = self.space.gen_index(g)
            arr = _apply_gamma(self.data[i], gamma, self.p, self.M, mod)
            out = (out + sgn * arr) % mod
        if not hasattr(self, "_path_cache"):
            self._path_cache = {}
        self._path_cache[key] = out
        return out

    def clear_cache(self):
        self._path_cache = {}


def _apply_gamma(arr: np.ndarray, gamma: Mat, p: int, M: int, mod: int) -> np.ndarray:
    perm = _cell_perm(gamma, p)
    S = _subst_matrix(gamma, p, M, mod)
    return arr[perm] @ S.T % mod


# -------------------------------------------------------- Hecke on measures

def _star_reps(m: int, p: int, N: int) -> list[Mat]:
    """Left-coset representatives of the weight operator T_m (or the p+1
    double-coset reps for m = p at level prime to p)."""
    if m == p:
        return [(1, a, 0, p) for a in range(p)] + [(p, 0, 0, 1)]
    return hecke_reps(m, N)


@lru_cache(maxsize=None)
def _upstar_mix(aa: int, p: int, M: int, mod: int) -> np.ndarray:
    """Moment mixing of (x, y) -> (p x - aa y, y)."""
    moms = _moments(M)
    midx = _moment_index(M)
    S = np.zeros((len(moms), len(moms)), dtype=np.int64)
    for row, (i, j) in enumerate(moms):
        for s in range(i + 1):
            coeff = (math.comb(i, s) * pow(p, s, mod)
                     * pow((-aa) % mod, i - s, mod)) % mod
            S[row, midx[(s, i - s + j)]] = coeff
    return S


@lru_cache(maxsize=None)
def _vstar_mix(p: int, M: int, mod: int) -> np.ndarray:
    """Moment mixing of (x, y) -> (x, p y) (diagonal p^j)."""
    moms = _moments(M)
    S = np.zeros(len(moms), dtype=np.int64)
    for row, (i, j) in enumerate(moms):
        S[row] = pow(p, j, mod)
    return S


@lru_cache(maxsize=None)
def _cell_rows(p: int):
    """Cell index grid: rows[v1][v2] = flat index of cell (v1, v2)."""
    cidx = _cell_index(p)
    grid = -np.ones((p, p), dtype=np.int64)
    for (v1, v2), k in cidx.items():
        grid[v1, v2] = k
    return grid


def _pushforward_star(arr: np.ndarray, g: Mat, p: int, M: int, mod: int) -> np.ndarray:
    """(adj g)_* with restriction to primitive vectors, on a moment array."""
    astar = mat_adj(g)
    det = g[0] * g[3] - g[1] * g[2]
    out = np.zeros_like(arr)
    a, b, c, d = astar
    grid = _cell_rows(p)
    if (a % p, c % p) == (0, 0) and det % p == 0:
        # shape [[p, -aa], [0, 1]]: (x, y) -> (p x - aa y, y)
        aa = (-b) % mod
        S = _upstar_mix(aa, p, M, mod)
        for v2 in range(1, p):
            agg = arr[grid[:, v2]].sum(axis=0) % mod
            w1 = (-aa * v2) % p
            out[grid[w1, v2]] = S @ agg % mod
        return out
    if (b % p, c % p) == (0, 0) and det % p == 0:
        # shape [[1, 0], [0, p]]: (x, y) -> (x, p y)
        diag = _vstar_mix(p, M, mod)
        for v1 in range(1, p):
            agg = arr[grid[v1, :]].sum(axis=0) % mod
            out[grid[v1, 0]] = diag * agg % mod
        return out
    # determinant coprime to p: an invertible cell action, no mass loss
    return _apply_gamma(arr, astar, p, M, mod)


@lru_cache(maxsize=32)
def _hecke_plan(N: int, w: int, m: int, p: int):
    """Transport plan for T_m: per generator, per coset rep, the signed
    list of (source generator, gamma) pieces of the transported path."""
    space = cached_space(N, w)
    reps = _star_reps(m, p, N)
    plan = []
    for g0 in space.gens:
        r0, s0 = moebius(g0, Fraction(0)), moebius(g0, INF)
        rows = []
        for g in reps:
            pieces = []
            for h, sgn in unimodular_path_decomposition(moebius(g, r0), moebius(g, s0)):
                j, gamma = space.gen_index(h)
                pieces.append((sgn, j, gamma))
            rows.append((g, pieces))
        plan.append(rows)
    return plan


def hecke_measure_apply(phi: OCSymbol, m: int) -> OCSymbol:
    """T_m (or the (p+1)-term U(p) for m = p) on the measure symbol."""
    mod = phi.modulus
    plan = _hecke_plan(phi.N, phi.space.w, m, phi.p)
    new = np.zeros_like(phi.data)
    for i, rows in enumerate(plan):
        acc = np.zeros_like(phi.data[0])
        for g, pieces in rows:
            arr = np.zeros_like(phi.data[0])
            for sgn, j, gamma in pieces:
                arr = (arr + sgn * _apply_gamma(phi.data[j], gamma, phi.p,
                                                phi.M, mod)) % mod
            acc = (acc + _pushforward_star(arr, g, phi.p, phi.M, mod)) % mod
        new[i] = acc
    out = phi.copy_with(new)
    out.clear_cache()
    return out


# ----------------------------------------------------- build/lift machinery

def initial_lift(sym: EigenSymbol, p: int, M: int, k0: int,
                 jitter: int = 0) -> OCSymbol:
    """Cell-uniform moment pattern carrying the classical symbol: the
    degree-(2k0-2) moments are (p^2-1)^{-1} I{D}(x^i y^j) on every cell.
    ``jitter`` adds a multiple of an exact relation-compatible perturbation
    (for the uniqueness-of-lift tests)."""
    space = sym.space
    mod = p**M
    cells = _cells(p)
    moms = _moments(M)
    midx = _moment_index(M)
    w0 = 2 * k0 - 2
    if w0 != space.w:
        raise ValueError("base weight must match the symbol's weight")
    scale = pow(len(cells), -1, mod)
    data = np.zeros((space.ngens, len(cells), len(moms)), dtype=np.int64)
    for i in range(space.ngens):
        base = i * (space.w + 1)
        for j in range(space.w + 1):
            val = sym.vector[base + j]
            assert val.denominator == 1
            entry = int(val) % mod * scale % mod
            data[i, :, midx[(space.w - j, j)]] = entry
    alpha_seed = unit_root(sym.hecke_eigenvalue(p), p, 2 * k0, M)
    phi = OCSymbol(p, space.N, k0, M, space, alpha_seed, data)
    if jitter:
        # deterministic perturbation inside higher moments, uniform over
        # cells so the symbol relations survive (degree-preserving action)
        rng = np.random.default_rng(jitter)
        bump = np.zeros(len(moms), dtype=np.int64)
        for d in range(w0 + 1, min(w0 + 3, M)):
            for i in range(d + 1):
                bump[midx[(i, d - i)]] = int(rng.integers(0, mod))
        data = data.copy()
        data[:, :, :] = (data + bump) % mod
        phi = phi.copy_with(data)
    return phi


def _tame_cleanup_data(N: int, p: int, f_sym: EigenSymbol, M: int):
    """Separating (ell, eigenvalue, other-factor) data from the level-Np
    classical space, used to project away the other ordinary families."""
    import sympy

    from .modsym import hecke_matrix

    space_np = cached_space(N * p, 0)
    x = sympy.Symbol("x")
    ops = []
    for ell in (2, 3, 7, 11, 13):
        if (N * p) % ell == 0:
            continue
        a_f = f_sym.hecke_eigenvalue(ell)
        mat = sympy.Matrix([[sympy.Rational(v.numerator, v.denominator) for v in row]
                            for row in hecke_matrix(space_np, ell)])
        poly = sympy.Poly(mat.charpoly(x).as_expr(), x)
        factors = sympy.factor_list(poly.as_expr())[1]
        keep = []
        for fac, mult in factors:
            fp = sympy.Poly(fac, x)
            if fp.degree() == 1 and -fp.nth(0) / fp.nth(1) == sympy.Rational(
                    a_f.numerator, a_f.denominator):
                continue  # the eigenvalue of f itself
            val = fp.eval(sympy.Rational(a_f.numerator, a_f.denominator))
            num, den = sympy.fraction(sympy.together(val))
            if int(num) % p != 0:
                keep.append([int(c) for c in fp.all_coeffs()])
        if keep:
            ops.append((ell, int(a_f), keep))
        if len(ops) >= 2:
            break
    return ops


def _apply_poly_in_hecke(phi: OCSymbol, ell: int, coeffs: list[int]) -> OCSymbol:
    """h(T_ell) Phi for h given by integer coefficients (highest first),
    via Horner: h(T) v = (...((c0 T + c1) T + c2)...) v."""
    mod = phi.modulus
    acc = phi.copy_with((phi.data * (coeffs[0] % mod)) % mod)
    for c in coeffs[1:]:
        acc = hecke_measure_apply(acc, ell)
        acc = phi.copy_with((acc.data + (c % mod) * phi.data) % mod)
    return acc


def lift_overconvergent(stab: StabilizedSymbol, M: int, n_iter: int | None = None,
                        cleanup_rounds: int | None = None,
                        jitter: int = 0) -> OCSymbol:
    """Ordinary moment lift of a p-stabilized eigensymbol.

    Iterates alpha^{-1} U(p) from a cell-uniform initial pattern (killing
    the non-ordinary and beta-stabilized parts), interleaves tame Hecke
    projectors pushing the other ordinary families into deep weight
    filtration, and pins the weight-2k0 specialization to the stabilized
    symbol.  The equivariant initialization carries an intrinsic factor
    p/(p+1), so the computation runs one digit above M and divides the
    final arrays by p exactly.  Raises if the iteration fails to settle.
    """
    sym = stab.base
    p, N = stab.p, stab.N
    k0 = (sym.space.w + 2) // 2
    Mi = M + 1  # internal working precision
    n_iter = 2 * M if n_iter is None else n_iter
    cleanup_rounds = (M + 1) // 2 if cleanup_rounds is None else cleanup_rounds
    phi = initial_lift(sym, p, Mi, k0, jitter=jitter)
    alpha = unit_root(sym.hecke_eigenvalue(p), p, 2 * k0, Mi)
    ainv = int(alpha.inverse().value)
    mod = p**Mi

    def sweep(cur: OCSymbol) -> OCSymbol:
        nxt = hecke_measure_apply(cur, p)
        return cur.copy_with(nxt.data * ainv % mod)

    for _ in range(3):
        phi = sweep(phi)
    if cleanup_rounds:
        ops = _tame_cleanup_data(N, p, sym, Mi)
        for _ in range(cleanup_rounds):
            for ell, a_f, factors in ops:
                for coeffs in factors:
                    phi = _apply_poly_in_hecke(phi, ell, coeffs)
                    hval = 0
                    for c in coeffs:
                        hval = hval * a_f + c
                    phi = phi.copy_with(phi.data * pow(hval, -1, mod) % mod)
    prev = None
    for _ in range(n_iter):
        nxt = sweep(phi)
        diff = (nxt.data - phi.data) % mod
        val = _array_valuation(diff, p, Mi)
        prev = val
        phi = nxt
        if val >= Mi:
            break
    if prev is not None and prev < M - 2 * k0 - 4:
        raise RuntimeError(
            f"ordinary lift failed to converge (successive sweeps agree only "
            f"mod p^{prev})")
    # all entries carry the initialization factor p/(p+1): divide out the p,
    # then truncate to the delivered precision (degree-ordered moment axis)
    data = phi.data % mod
    if (data % p != 0).any():
        raise RuntimeError("lift lost the uniform p-divisibility certificate")
    data = data // p % p**M
    data = np.ascontiguousarray(data[:, :, :len(_moments(M))])
    phi = OCSymbol(p, N, k0, M, phi.space, stab.alpha.with_cap(M),
                   data, {"up_cauchy_valuation": prev}, phi.refine_depth)
    # pin the specialization: one global unit rescale onto the stabilized symbol
    ref = _reference_ratio(phi, stab)
    phi = phi.copy_with(phi.data * int(ref.value) % p**M)
    phi.clear_cache()
    return phi


def _array_valuation(arr: np.ndarray, p: int, M: int) -> int:
    """Minimum p-adic valuation over the array entries, capped at M."""
    nz = arr[arr % p**M != 0]
    if nz.size == 0:
        return M
    v = 0
    cur = nz
    while v < M and (cur % p == 0).all():
        cur = cur // p
        v += 1
    return v


def _reference_ratio(phi: OCSymbol, stab: StabilizedSymbol) -> PadicInt:
    """phi-target / rho(Phi) on a reference path with unit value."""
    w0 = phi.space.w
    for g in cached_space(phi.N * phi.p, 0).gens:
        r0, s0 = moebius(g, Fraction(0)), moebius(g, INF)
        for j in range(w0 + 1):
            coeffs = [Fraction(0)] * (w0 + 1)
            coeffs[j] = Fraction(1)
            target = stab.eval_path(r0, s0, coeffs)
            got = specialize_rho_value(phi, r0, s0, coeffs)
            if got.is_unit():
                return target.unit_quotient(got)
    raise RuntimeError("no unit reference value for the control rescale")


# ----------------------------------------------------------- specialization

def specialize_rho_value(phi: OCSymbol, r, s, coeffs) -> PadicInt:
    """rho_k(Phi){r->s}(P): pair P against the moments over Z_p x Z_p^*."""
    d = len(coeffs) - 1
    if d >= phi.M:
        raise ValueError("insufficient moments for this weight")
    arr = phi.path_measure(r, s)
    cells = _cells(phi.p)
    midx = _moment_index(phi.M)
    mod = phi.modulus
    total = 0
    for ci, (v1, v2) in enumerate(cells):
        if v2 % phi.p == 0:
            continue
        for j, c in enumerate(coeffs):
            if c == 0:
                continue
            cval = from_rational(Fraction(c), phi.p, phi.M).value
            total = (total + cval * arr[ci, midx[(d - j, j)]]) % mod
    return PadicInt(phi.p, phi.M, total)


@dataclass
class SpecializedSymbol:
    """rho_k image of a measure symbol: a level-Np classical-shaped symbol."""

    phi: OCSymbol
    k: int

    def eval_path(self, r, s, coeffs) -> PadicInt:
        if len(coeffs) != 2 * self.k - 1:
            raise ValueError("degree must be 2k-2")
        return specialize_rho_value(self.phi, r, s, coeffs)


def specialize_rho(phi: OCSymbol, k: int) -> SpecializedSymbol:
    if 2 * k - 2 >= phi.M:
        raise ValueError("insufficient moments for weight 2k")
    return SpecializedSymbol(phi, k)


# --------------------------------------------------------------- X_Q domains

@dataclass
class XQDomain:
    """Split: X_Q = Z_p^* v1 + Z_p^* v2 with v_i from the roots of Q(X,1);
    inert: all primitive vectors."""

    Q: QForm
    p: int
    split: bool
    alpha: PadicInt | None = None
    beta: PadicInt | None = None

    @classmethod
    def build(cls, Q: QForm, p: int, cap: int) -> "XQDomain":
        disc = Q.disc()
        if disc % p == 0:
            raise ValueError("p must not divide the discriminant (p | Delta)")
        if Q.a % p == 0 or Q.c % p == 0:
            raise ValueError("form must be p-normalized (p does not divide a, c)")
        chi = kronecker(disc, p)
        if chi == 1:
            s = hensel_sqrt(PadicInt(p, cap, disc))
            inv2a = PadicInt(p, cap, 2 * Q.a).inverse()
            alpha = (PadicInt(p, cap, -Q.b) + s) * inv2a
            beta = (PadicInt(p, cap, -Q.b) - s) * inv2a
            assert (alpha - beta).is_unit()
            return cls(Q, p, True, alpha, beta)
        return cls(Q, p, False)

    def tube_is_inside(self, chart: str, theta: int) -> bool:
        """Membership of the depth-1 direction in X_Q (a mod-p condition)."""
        if not self.split:
            return True
        if chart == "y":  # direction x = theta y, y a unit
            return (theta - self.alpha.value) % self.p != 0 and \
                   (theta - self.beta.value) % self.p != 0
        # x-unit chart, y = eta x with eta = 0 mod p: q_i = x(1 - alpha_i eta)
        return True


# ------------------------------------------------- tube moments and kernels

def _tube_base_moments(phi: OCSymbol, arr: np.ndarray, chart: str, theta: int,
                       unit_res: int, max_u: int, max_w: int) -> dict:
    """Centered moments over a depth-1 tube (= one cell).

    y-chart: cell ((theta*unit) mod p, unit), u = x - theta*y, w = y - unit.
    x-chart (theta = 0 at depth 1): cell (unit, 0), u = y, w = x - unit.
    """
    p, M = phi.p, phi.M
    mod = phi.modulus
    cidx = _cell_index(p)
    midx = _moment_index(M)
    if chart == "y":
        cell = ((theta * unit_res) % p, unit_res % p)
    else:
        cell = (unit_res % p, 0)
    row = arr[cidx[cell]]
    out = {}
    # expand (x - theta y)^a (y - v)^b  resp. y^a (x - v)^b in raw moments
    for aa in range(max_u + 1):
        for bb in range(max_w + 1):
            total = 0
            if chart == "y":
                for s in range(aa + 1):
                    c1 = math.comb(aa, s) * pow((-theta) % mod, aa - s, mod) % mod
                    for t in range(bb + 1):
                        c2 = math.comb(bb, t) * pow((-unit_res) % mod, bb - t, mod) % mod
                        i, j = s, (aa - s) + t
                        if i + j >= M:
                            continue
                        total = (total + c1 * c2 * row[midx[(i, j)]]) % mod
            else:
                for t in range(bb + 1):
                    c2 = math.comb(bb, t) * pow((-unit_res) % mod, bb - t, mod) % mod
                    i, j = t, aa
                    if i + j >= M:
                        continue
                    total = (total + c2 * row[midx[(i, j)]]) % mod
            out[(aa, bb)] = total
    return out


def _tube_moments(phi: OCSymbol, r, s, chart: str, theta: int, unit_res: int,
                  depth: int, max_u: int, max_w: int) -> dict:
    """Centered moments over a depth-``depth`` tube of Phi{r -> s}, computed
    through the U(p)-eigen recursion (one contributing coset rep per step)."""
    p = phi.p
    mod = phi.modulus
    if depth == 1:
        arr = phi.path_measure(r, s)
        return _tube_base_moments(phi, arr, chart, theta, unit_res, max_u, max_w)
    ainv = pow(int(phi.alpha.value), -1, mod)
    if chart == "y":
        a = (-theta) % p
        g = (1, a, 0, p)
        theta2 = (theta + a) // p
        r2, s2 = moebius(g, r), moebius(g, s)
        sub = _tube_moments(phi, r2, s2, "y", theta2, unit_res, depth - 1,
                            max_u, max_w)
        out = {}
        for (aa, bb), v in sub.items():
            out[(aa, bb)] = v * pow(p, aa, mod) % mod * ainv % mod
        return out
    # x-chart: only the [[p,0],[0,1]] rep contributes; eta = theta (p | eta)
    assert theta % p == 0
    g = (p, 0, 0, 1)
    eta2 = theta // p
    r2, s2 = moebius(g, r), moebius(g, s)
    if eta2 % p == 0 or depth - 1 == 1 and eta2 % p == 0:
        pass
    if eta2 % p != 0 and depth - 1 > 1:
        # unit direction: the sub-tube lives in the y-unit region; convert
        sub = _tube_moments_unit_eta(phi, r2, s2, eta2, unit_res, depth - 1,
                                     max_u, max_w)
    elif eta2 % p != 0:  # depth-1 base in the y-unit region
        arr = phi.path_measure(r2, s2)
        sub = _xchart_unit_eta_base(phi, arr, eta2, unit_res, max_u, max_w)
    else:
        sub = _tube_moments(phi, r2, s2, "x", eta2, unit_res, depth - 1,
                            max_u, max_w)
    out = {}
    for (aa, bb), v in sub.items():
        out[(aa, bb)] = v * pow(p, aa, mod) % mod * ainv % mod
    return out


def _xchart_unit_eta_base(phi: OCSymbol, arr, eta: int, v1: int,
                          max_u: int, max_w: int) -> dict:
    """Depth-1 x-chart moments with a unit direction: the set
    {y = eta x (p), x = v1 (p)} is the single cell (v1, eta*v1);
    u = y - eta x, w = x - v1."""
    p, M = phi.p, phi.M
    mod = phi.modulus
    cidx = _cell_index(p)
    midx = _moment_index(M)
    row = arr[cidx[(v1 % p, (eta * v1) % p)]]
    out = {}
    for aa in range(max_u + 1):
        for bb in range(max_w + 1):
            total = 0
            for s in range(aa + 1):
                c1 = math.comb(aa, s) * pow((-eta) % mod, aa - s, mod) % mod
                for t in range(bb + 1):
                    c2 = math.comb(bb, t) * pow((-v1) % mod, bb - t, mod) % mod
                    i, j = (aa - s) + t, s
                    if i + j >= M:
                        continue
                    total = (total + c1 * c2 * row[midx[(i, j)]]) % mod
            out[(aa, bb)] = total
    return out


def _tube_moments_unit_eta(phi: OCSymbol, r, s, eta: int, v1: int, depth: int,
                           max_u: int, max_w: int) -> dict:
    """Moments (y - eta x)^a (x - v1)^b over {y = eta x (p^depth), x = v1 (p)}
    with eta a unit: re-expressed through the y-chart tube of direction
    theta = eta^{-1} and converted back exactly."""
    p, M = phi.p, phi.M
    mod = phi.modulus
    pe = p**depth
    theta = pow(eta % pe, -1, pe)
    v2 = (eta * v1) % p
    # ask the y-chart for enough centered moments to convert
    sub = _tube_moments(phi, r, s, "y", theta, v2, depth, max_u, max_u + max_w)
    # u_x = y - eta x = -eta (x - theta y) + (1 - eta theta) y
    #     = -eta u_y + c1 (w_y + v2),  c1 = 1 - eta*theta (= 0 mod p^depth)
    # w_x = x - v1 = u_y + theta (w_y + v2) - v1
    c1 = (1 - eta * theta) % mod
    c2 = (theta * v2 - v1) % mod  # = 0 mod p
    out = {}
    for aa in range(max_u + 1):
        for bb in range(max_w + 1):
            # expand (-eta u + c1 w + c1 v2)^aa (u + theta w + c2)^bb
            poly = {(0, 0): 1}
            for _ in range(aa):
                poly = _poly_mul(poly, {(1, 0): (-eta) % mod, (0, 1): c1,
                                        (0, 0): c1 * v2 % mod}, mod)
            for _ in range(bb):
                poly = _poly_mul(poly, {(1, 0): 1, (0, 1): theta % mod,
                                        (0, 0): c2}, mod)
            total = 0
            for (ua, wb), cf in poly.items():
                if ua > max_u or wb > max_u + max_w:
                    continue  # beyond requested resolution: p-deep anyway
                total = (total + cf * sub[(ua, wb)]) % mod
            out[(aa, bb)] = total
    return out


def _poly_mul(f: dict, g: dict, mod: int) -> dict:
    out = {}
    for (a1, b1), c1 in f.items():
        for (a2, b2), c2 in g.items():
            k = (a1 + a2, b1 + b2)
            out[k] = (out.get(k, 0) + c1 * c2) % mod
    return out


# --------------------------------------------------------------- integration

def integrate_XQ(phi: OCSymbol, Q: QForm, t_order: int = 3,
                 depth: int | None = None) -> PadicSeries:
    """The weight-variable series of the integral of
    omega(Q(x,y))^(k0-1) <Q(x,y)>^((kappa-2)/2) over X_Q against the
    geodesic path measure of Q, computed on direction tubes at the given
    refinement depth."""
    p, M, k0 = phi.p, phi.M, phi.k0
    depth = phi.refine_depth if depth is None else depth
    mod = phi.modulus
    dom = XQDomain.build(Q, p, M)
    r_q, s_q = geodesic_endpoints(Q, phi.N)
    max_u = max(1, (M - 1) // depth)
    max_w = M - 1
    series_acc = None
    for chart, theta, unit_res in _tube_list(p, depth):
        if not dom.tube_is_inside(chart, theta % p if chart == "y" else 0):
            continue
        mom = _tube_moments(phi, r_q, s_q, chart, theta, unit_res, depth,
                            max_u, max_w)
        contrib = _tube_kernel_series(phi, Q, chart, theta, unit_res, depth,
                                      mom, t_order)
        series_acc = contrib if series_acc is None else series_acc + contrib
    assert series_acc is not None
    return series_acc


def _tube_list(p: int, depth: int):
    """Direction tubes covering the primitive vectors at the given depth."""
    pe = p**depth
    out = []
    for unit_res in range(1, p):
        for theta in range(pe):
            out.append(("y", theta, unit_res))
    for unit_res in range(1, p):
        for eta in range(0, pe, p):
            out.append(("x", eta, unit_res))
    return out


def _tube_kernel_series(phi: OCSymbol, Q: QForm, chart: str, theta: int,
                        unit_res: int, depth: int, mom: dict,
                        t_order: int) -> PadicSeries:
    """Taylor-expand the weight kernel on one tube and pair against the
    centered moments; returns the t-series of the tube's contribution."""
    p, M, k0 = phi.p, phi.M, phi.k0
    mod = phi.modulus
    # Q as a polynomial in the centered coordinates (u, w)
    if chart == "y":
        # x = u + theta (v + w), y = v + w
        xu = {(1, 0): 1, (0, 1): theta % mod, (0, 0): theta * unit_res % mod}
        yw = {(0, 1): 1, (0, 0): unit_res % mod}
    else:
        # y = u + eta x, x = v + w  ->  y = u + eta (v + w)
        xu = {(0, 1): 1, (0, 0): unit_res % mod}
        yw = {(1, 0): 1, (0, 1): theta % mod, (0, 0): theta * unit_res % mod}
    qpoly = _poly_scale(_poly_mul(xu, xu, mod), Q.a % mod, mod)
    qpoly = _poly_add(qpoly, _poly_scale(_poly_mul(xu, yw, mod), Q.b % mod, mod), mod)
    qpoly = _poly_add(qpoly, _poly_scale(_poly_mul(yw, yw, mod), Q.c % mod, mod), mod)
    c0 = qpoly.get((0, 0), 0) % mod
    assert c0 % p != 0, "kernel constant must be a unit on X_Q"
    c0inv = pow(c0, -1, mod)
    eps = {k: v * c0inv % mod for k, v in qpoly.items() if k != (0, 0)}

    def pair(poly: dict) -> int:
        total = 0
        for key, cf in poly.items():
            if key in mom:
                total = (total + cf * mom[key]) % mod
        return total

    def drop(poly: dict) -> dict:
        # monomials whose moment-valuation floor reaches the cap pair to 0
        return {k: v for k, v in poly.items()
                if depth * k[0] + k[1] < M and k in mom}

    # scaled log: Ltilde = p^e0 log(1+eps) has integer polynomial
    # coefficients since p^e0/m is integral for every contributing m
    e0 = 0
    q = p
    while q <= M:
        e0 += 1
        q *= p
    log_scaled = {}
    power = {(0, 0): 1}
    for m_i in range(1, M + 1):
        power = drop(_poly_mul(power, eps, mod))
        if not power:
            break
        sign = 1 if m_i % 2 == 1 else -1
        # p^e0 / m = p^(e0 - v_p(m)) * (unit part of m)^{-1}
        vm = _vp(m_i, p)
        unit = pow(m_i // p**vm, -1, mod)
        factor = sign * pow(p, e0 - vm, mod) * unit % mod
        for k, v in power.items():
            log_scaled[k] = (log_scaled.get(k, 0) + factor * v) % mod
    # (1 + eps)^(k0 - 1)
    boost = {(0, 0): 1}
    for _ in range(k0 - 1):
        boost = drop(_poly_add(_poly_mul(boost, eps, mod), boost, mod))
    # A_j = integral of boost * log^j / j! = pair(boost Ltilde^j) / (p^(j e0) j!)
    coeffs = []
    logpow = {(0, 0): 1}
    for j in range(t_order):
        if j:
            logpow = drop(_poly_mul(logpow, log_scaled, mod))
        paired = pair(_poly_mul(boost, logpow, mod))
        shift = j * e0 + _vp_factorial(j, p)
        val, penalty = _div_p_power(paired, shift, p, mod)
        unit_fact = 1
        for i in range(2, j + 1):
            unit_fact = unit_fact * (i // p**_vp(i, p)) % mod
        coeffs.append(PadicInt(p, M - shift - penalty, val * pow(unit_fact, -1, mod)))
    tube_series = PadicSeries(p, 2 * k0, coeffs)
    # prefactor omega(c0)^(k0-1) <c0>^(k0-1) <c0>^t
    c0p = PadicInt(p, M, c0)
    w0 = teichmuller(c0p)
    one_unit = c0p.unit_quotient(w0)
    pref = one_unit_power(one_unit, t_order, base_weight=2 * k0)
    scalar = (w0 * one_unit) ** (k0 - 1)
    return (tube_series * pref) * scalar


def _poly_add(f: dict, g: dict, mod: int) -> dict:
    out = dict(f)
    for k, v in g.items():
        out[k] = (out.get(k, 0) + v) % mod
    return out


def _poly_scale(f: dict, c: int, mod: int) -> dict:
    return {k: v * c % mod for k, v in f.items()}


def _div_p_power(x: int, v: int, p: int, mod: int) -> tuple[int, int]:
    """x / p^v as residues; returns (value, cap-penalty).

    The true kernel terms satisfy the valuation floor p^v | x; any
    non-divisible remainder measures junk in the stored moments above the
    certified filtration, and the result's precision is cut to the junk
    level rather than silently trusted."""
    if v == 0:
        return x % mod, 0
    q = p**v
    r = x % q
    if r == 0:
        return (x // q) % mod, 0
    vr = 0
    while r % p == 0:
        r //= p
        vr += 1
    # digits above the junk floor are meaningless after the division
    return ((x - x % q) // q) % mod, v - vr


# ------------------------------------------------------------ the L-function

def sqrt_plf(phi: OCSymbol, N: int, D0: int, r0: int, n: int, r: int,
             t_order: int = 3, depth: int | None = None,
             normalization_shift: int = 0) -> PadicSeries:
    """Genus-character-weighted sum of integrate_XQ over the p-normalized
    representatives of the class set of (D0, r0; D, r)."""
    p = phi.p
    D = r * r - 4 * N * n
    if D >= 0 or D % p == 0:
        raise ValueError("need an index pair with p not dividing D")
    if D0 % p == 0:
        raise ValueError("p must not divide D0")
    series = None
    for Q in enumerate_heegner_classes(N, D0, r0, D, r):
        chi = genus_char(D0, Q, N)
        if chi == 0:
            continue
        if normalization_shift:
            Q = act(Q, (1, normalization_shift, 0, 1))
        Qn, _ = normalize_rep_p(Q, p, N)
        contrib = integrate_XQ(phi, Qn, t_order, depth)
        if chi == -1:
            contrib = contrib * PadicInt(p, phi.M, -1)
        series = contrib if series is None else series + contrib
    if series is None:
        zero = PadicInt(p, phi.M, 0)
        series = PadicSeries(p, 2 * phi.k0, [zero] * t_order)
    return series


# -------------------------------------------------------------- Euler factors

def euler_Ep(ap_unit: PadicInt, p: int, k: int, split: bool) -> PadicInt:
    """(1 - p^(k-1)/a_p)^2 when p splits in the relevant quadratic field,
    1 - p^(2k-2)/a_p^2 when p is inert."""
    if not ap_unit.is_unit():
        raise ValueError("unit root required")
    one = PadicInt(p, ap_unit.cap, 1)
    if split:
        term = one - ap_unit.inverse() * p ** (k - 1)
        return term * term
    return one - (ap_unit * ap_unit).inverse() * p ** (2 * k - 2)


def euler_E2(ap_series: PadicSeries, p: int, k: int) -> PadicSeries:
    """1 - 2 p^(k-1)/a_p(kappa) - p^(2k-2)/a_p(kappa)^2 as a truncated series."""
    inv = _series_inverse(ap_series)
    inv2 = inv * inv
    one = PadicSeries(ap_series.p, ap_series.base_weight,
                      [PadicInt(p, ap_series.cap, 1)]
                      + [PadicInt(p, ap_series.cap, 0)] * (ap_series.order - 1))
    two = PadicInt(p, ap_series.cap, 2 * p ** (k - 1))
    return one - inv * two - inv2 * PadicInt(p, ap_series.cap, p ** (2 * k - 2))


def _series_inverse(s: PadicSeries) -> PadicSeries:
    if not s.coeffs[0].is_unit():
        raise ValueError("leading coefficient must be a unit")
    inv0 = s.coeffs[0].inverse()
    out = [inv0]
    for j in range(1, s.order):
        acc = None
        for i in range(1, j + 1):
            term = s.coeffs[i] * out[j - i]
            acc = term if acc is None else acc + term
        out.append(-(inv0 * acc))
    return PadicSeries(s.p, s.base_weight, out)


# ------------------------------------------------------------- interpolation

def interp_check(phi: OCSymbol, stab: StabilizedSymbol, table, n: int, r: int,
                 t_order: int = 3, depth: int | None = None,
                 threshold: int = 5) -> dict:
    """Base-weight interpolation report for one index pair.

    Per representative: valuation of L_Q(2k0) - E_p * I{r_Q->s_Q}(Q^(k0-1))
    with I the level-N newform symbol.  Aggregate: L_{n,r}(2k0) against
    both E_p * c(n,r) and E_p^2 * c(n,r), resolving the exponent.
    """
    p, M, k0 = phi.p, phi.M, phi.k0
    N = phi.N
    D = r * r - 4 * N * n
    split = kronecker(D * table.D0, p) == 1
    ep = euler_Ep(stab.alpha, p, k0, split)
    per_q = []
    agg = None
    for Q in enumerate_heegner_classes(N, table.D0, table.r0, D, r):
        chi = genus_char(table.D0, Q, N)
        Qn, _ = normalize_rep_p(Q, p, N)
        lq = integrate_XQ(phi, Qn, t_order, depth).evaluate(0)
        rq, sq = geodesic_endpoints(Qn, N)
        isharp = from_rational(
            stab.base.eval_path(rq, sq, qform_power_coeffs(Qn, k0 - 1)), p, M)
        val = agreement_valuation(lq, ep * isharp)
        per_q.append({"Q": (Qn.a, Qn.b, Qn.c), "chi": chi,
                      "valuation": val, "cap": min(lq.cap, M)})
        if chi != 0:
            term = lq if chi == 1 else -lq
            agg = term if agg is None else agg + term
    c_nr = from_rational(table[(n, r)], p, M)
    if agg is None:
        agg = PadicInt(p, M, 0)
    v1 = agreement_valuation(agg, ep * c_nr)
    v2 = agreement_valuation(agg, ep * ep * c_nr)
    cap = agg.cap
    if v1 >= cap and v2 >= cap:
        verdict = "inconclusive"
    elif v1 >= threshold and v2 < v1:
        verdict = "single"
    elif v2 >= threshold and v1 < v2:
        verdict = "squared"
    elif max(v1, v2) >= threshold:
        verdict = "single" if v1 >= v2 else "squared"
    else:
        verdict = "fail"
    return {
        "n": n, "r": r, "D": D, "split": split,
        "per_Q": per_q,
        "aggregate_valuation_single": v1,
        "aggregate_valuation_squared": v2,
        "attained_cap": cap,
        "exponent_verdict": verdict,
    }


# ------------------------------------------------------------------ storage

def series_to_json(s: PadicSeries) -> dict:
    return {
        "p": s.p,
        "cap": s.cap,
        "base_weight": s.base_weight,
        "coeffs": [",".join(str(d) for d in c.with_cap(s.cap).digits())
                   for c in s.coeffs],
    }


def series_from_json(data: dict) -> PadicSeries:
    p, cap = data["p"], data["cap"]
    coeffs = []
    for text in data["coeffs"]:
        digits = [int(x) for x in text.split(",")]
        value = sum(d * p**i for i, d in enumerate(digits))
        coeffs.append(PadicInt(p, cap, value))
    return PadicSeries(p, data["base_weight"], coeffs)


def checkpoint_key(N: int, p: int, k0: int, M: int, norm_tag: str) -> str:
    payload = json.dumps([N, p, k0, M, norm_tag], sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_checkpoint(phi: OCSymbol, path: Path, norm_tag: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "key": checkpoint_key(phi.N, phi.p, phi.k0, phi.M, norm_tag),
        "N": phi.N, "p": phi.p, "k0": phi.k0, "M": phi.M,
        "alpha": phi.alpha.value,
        "refine_depth": phi.refine_depth,
        "loss": phi.loss,
        "data": phi.data.reshape(-1).tolist(),
    }
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True))
    tmp.replace(path)


def load_checkpoint(path: Path, norm_tag: str) -> OCSymbol | None:
    path = Path(path)
    if not path.exists():
        return None
    data = json.loads(path.read_text())
    if data["key"] != checkpoint_key(data["N"], data["p"], data["k0"],
                                     data["M"], norm_tag):
        return None
    space = cached_space(data["N"], 2 * data["k0"] - 2)
    ncells = len(_cells(data["p"]))
    nmom = len(_moments(data["M"]))
    arr = np.array(data["data"], dtype=np.int64).reshape(space.ngens, ncells, nmom)
    phi = OCSymbol(data["p"], data["N"], data["k0"], data["M"], space,
                   PadicInt(data["p"], data["M"], data["alpha"]), arr,
                   data.get("loss", {}), data.get("refine_depth", 2))
    return phi
