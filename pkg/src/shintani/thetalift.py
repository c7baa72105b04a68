"""The theta lift: Jacobi-Fourier coefficients from weighted symbol periods.

For a sign -1 eigensymbol of weight 2k and level N, the coefficient at an
index pair (D, r), D = r^2 - 4Nn < 0, is the genus-character-weighted sum
of the symbol's periods over the geodesics of the classes of discriminant
D0*D with b = -r0*r mod 2N and N | a, paired against Q^(k-1).  The
resulting table is a Jacobi cusp form of weight k+1 and index N with the
same Hecke eigenvalues, which jacobi_hecke lets the tests verify.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .arith import kronecker
from .modsym import EigenSymbol, qform_power_coeffs
from .quadforms import (
    enumerate_heegner_classes,
    genus_char,
    geodesic_endpoints,
    is_fundamental_disc,
)


def balance_r(r: int, N: int) -> int:
    """Representative of r mod 2N in (-N, N] (minimizes r^2 in its class)."""
    r %= 2 * N
    return r - 2 * N if r > N else r


@dataclass
class JacobiTable:
    """Finite coefficient table of the lift.

    A coefficient is attached to the pair (D, r mod 2N) with D = r^2 - 4Nn;
    the stored key is the canonical representative: r balanced into
    (-N, N] and n recomputed so the discriminant is preserved.  Lookups
    with any (n, r) in the same class land on the same entry.
    """

    N: int
    weight_label: int  # k + 1 for a weight-2k input form
    D0: int
    r0: int
    n_max: int
    entries: dict = field(default_factory=dict)

    def canonical_key(self, n: int, r: int) -> tuple[int, int]:
        D = r * r - 4 * self.N * n
        if D >= 0:
            raise ValueError(f"({n},{r}) is not an index pair key")
        rb = balance_r(r, self.N)
        return ((rb * rb - D) // (4 * self.N), rb)

    @classmethod
    def from_items(cls, N, weight_label, D0, r0, n_max, items):
        """Collapse (n, r) keys onto canonical ones, checking consistency."""
        table = cls(N, weight_label, D0, r0, n_max)
        for (n, r), c in items:
            key = table.canonical_key(n, r)
            if key in table.entries and table.entries[key] != c:
                raise ValueError(f"inconsistent values for r-class collapse at {key}")
            table.entries[key] = c
        return table

    def discriminant(self, n: int, r: int) -> int:
        return r * r - 4 * self.N * n

    def __getitem__(self, key):
        return self.entries[self.canonical_key(*key)]

    def __contains__(self, key):
        try:
            return self.canonical_key(*key) in self.entries
        except ValueError:
            return False

    def keys(self):
        return sorted(self.entries)

    def fundamental_keys(self):
        return [k for k in self.keys() if is_fundamental_disc(self.discriminant(*k))]

    def to_json(self) -> str:
        return json.dumps(
            {
                "N": self.N,
                "D0": self.D0,
                "r0": self.r0,
                "k": self.weight_label,
                "entries": [
                    {"n": n, "r": r, "c": f"{c.numerator}/{c.denominator}"}
                    for (n, r), c in sorted(self.entries.items())
                ],
            },
            sort_keys=True,
        )

    def save(self, path: Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(self.to_json())
        tmp.replace(path)

    @classmethod
    def from_json(cls, text: str) -> "JacobiTable":
        data = json.loads(text)
        table = cls(data["N"], data["k"], data["D0"], data["r0"], 0)
        n_max = 0
        for e in data["entries"]:
            num, den = e["c"].split("/")
            table.entries[(e["n"], e["r"])] = Fraction(int(num), int(den))
            n_max = max(n_max, e["n"])
        table.n_max = n_max
        return table


def shintani_coeff(sym: EigenSymbol, D0: int, r0: int, n: int, r: int,
                   coset_order: int = 0) -> Fraction:
    """Coefficient c(n, r): sum over the class set of chi_{D0}(Q) times the
    period of the symbol over {r_Q -> s_Q} against Q^(k-1)."""
    if sym.sign != -1:
        raise ValueError("the lift is defined on sign -1 eigensymbols")
    N = sym.space.N
    D = r * r - 4 * N * n
    if D >= 0:
        raise ValueError("(n, r) must give a negative discriminant")
    k_minus_1 = sym.space.w // 2
    total = Fraction(0)
    classes = enumerate_heegner_classes(N, D0, r0, D, r, coset_order=coset_order)
    for Q in classes:
        chi = genus_char(D0, Q, N)
        if chi == 0:
            continue
        rq, sq = geodesic_endpoints(Q, N)
        total += chi * sym.eval_path(rq, sq, qform_power_coeffs(Q, k_minus_1))
    return total


def lift_entries(sym: EigenSymbol, D0: int, r0: int, keys, n_max: int) -> JacobiTable:
    """Table over an explicit set of (n, r) keys (canonicalized)."""
    N = sym.space.N
    k_plus_1 = sym.space.w // 2 + 2  # weight 2k form lifts to weight k+1
    probe = JacobiTable(N, k_plus_1, D0, r0, n_max)
    items = []
    for n, r in sorted({probe.canonical_key(n, r) for n, r in keys}):
        items.append(((n, r), shintani_coeff(sym, D0, r0, n, r)))
    return JacobiTable.from_items(N, k_plus_1, D0, r0, n_max, items)


def lift_table(sym: EigenSymbol, D0: int, r0: int, n_max: int) -> JacobiTable:
    """All coefficients with n <= n_max (and r^2 - 4Nn < 0)."""
    N = sym.space.N
    keys = [(n, r) for n in range(1, n_max + 1)
            for r in range(-N + 1, N + 1) if r * r - 4 * N * n < 0]
    return lift_entries(sym, D0, r0, keys, n_max)


def jacobi_hecke(table: JacobiTable, m: int, k: int) -> JacobiTable:
    """Hecke image c*(n,r) = sum_{d | m} d^(k-1) (D/d) c(n m^2/d^2, r m/d)
    on the fundamental-discriminant entries (where the formula applies);
    requires gcd(m, N) = 1 and a table containing the source entries."""
    import math

    N = table.N
    if math.gcd(m, N) != 1:
        raise ValueError("jacobi_hecke requires gcd(m, N) = 1")
    out = {}
    skipped = []
    for (n, r) in table.keys():
        D = table.discriminant(n, r)
        if not is_fundamental_disc(D):
            continue
        acc = Fraction(0)
        have_all = True
        for d in range(1, m + 1):
            if m % d != 0:
                continue
            if (n * m * m) % (d * d) != 0 or (r * m) % d != 0:
                continue
            src = (n * m * m // (d * d), r * m // d)
            if src not in table:
                have_all = False
                break
            acc += d ** (k - 1) * kronecker(D, d) * table[src]
        if have_all:
            out[(n, r)] = acc
        else:
            skipped.append((n, r))
    if not out:
        raise KeyError("no entry had all its source entries; extend the table")
    result = JacobiTable(N, table.weight_label, table.D0, table.r0, table.n_max)
    result.entries = out
    result.sources_out_of_range = skipped
    return result


def hecke_source_keys(table: JacobiTable, ms) -> set:
    """All (n, r) source keys jacobi_hecke will need for the given m values."""
    need = set()
    for (n, r) in table.keys():
        if not is_fundamental_disc(table.discriminant(n, r)):
            continue
        for m in ms:
            for d in range(1, m + 1):
                if m % d == 0 and (n * m * m) % (d * d) == 0 and (r * m) % d == 0:
                    need.add(table.canonical_key(n * m * m // (d * d), r * m // d))
    return need
