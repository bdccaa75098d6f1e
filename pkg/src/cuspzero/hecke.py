"""Miller (echelon) bases of cusp form spaces and exact Hecke operator matrices."""

from dataclasses import dataclass

from gmpy2 import mpz

from .errors import ExactnessError
from .qexp import QExpansion, dim_cusp_forms, delta_qexp, eisenstein_qexp


def miller_basis(k, nterms):
    """Echelonized integral basis g_1..g_d of weight-k cusp forms, a_{g_i}(j) = delta_ij for j <= d.

    Each g_i starts life as Delta^i * E4^a * E6^b of total weight k, then the leading
    d x d block is reduced to the identity.  All arithmetic is exact.
    """
    if k % 2 != 0 or k < 12:
        raise ValueError(f"weight must be even and >= 12, got {k}")
    d = dim_cusp_forms(k)
    if d == 0:
        return []
    if nterms < 2 * d + 2:
        raise ValueError(f"nterms={nterms} too small to echelonize dim {d} (need >= {2 * d + 2})")

    delta = delta_qexp(nterms)
    e4 = eisenstein_qexp(4, nterms)
    e6 = eisenstein_qexp(6, nterms)
    e4_cubed = e4 * e4 * e4

    # exponents for weight k - 12i: E6 appears at most once
    def exponents(i):
        r = k - 12 * i
        b = 0 if r % 4 == 0 else 1
        a = (r - 6 * b) // 4
        if a < 0:
            raise ExactnessError(f"no monomial of weight {r} at index {i}")
        return a, b

    # powers of Delta, ascending
    delta_pow = [None, delta]
    for i in range(2, d + 1):
        delta_pow.append(delta_pow[-1] * delta)

    # E4 powers needed, built incrementally along the +3 ladder
    need = sorted({exponents(i)[0] for i in range(1, d + 1)})
    e4_pow = {}
    for a in need:
        if a in e4_pow:
            continue
        if a == 0:
            e4_pow[0] = None
        elif a - 3 in e4_pow:
            base = e4_pow[a - 3]
            e4_pow[a] = e4_cubed if base is None else base * e4_cubed
        else:
            acc = e4
            for _ in range(a - 1):
                acc = acc * e4
            e4_pow[a] = acc

    forms = []
    for i in range(1, d + 1):
        a, b = exponents(i)
        g = delta_pow[i]
        if a > 0:
            g = g * e4_pow[a]
        if b:
            g = g * e6
        forms.append([g.coeff(n) for n in range(0, nterms + 1)])

    # echelonize the leading block; pivots are 1 so the reduction stays integral
    for i in range(d - 1, -1, -1):
        row = forms[i]
        if row[i + 1] != 1:
            raise ExactnessError(f"expected unit pivot at q^{i + 1}")
        for m in range(i + 1, d):
            c = row[m + 1]
            if c != 0:
                other = forms[m]
                for n in range(m + 1, nterms + 1):
                    row[n] -= c * other[n]
                row[m + 1] = mpz(0)

    out = []
    for i, row in enumerate(forms):
        if row[0] != 0:
            raise ExactnessError("cusp form acquired a constant term")
        for j in range(1, d + 1):
            if row[j] != (1 if j == i + 1 else 0):
                raise ExactnessError("echelonization failed to produce identity block")
        out.append(QExpansion(k, row[1:], a0=0))
    return out


@dataclass(frozen=True)
class HeckeMatrix:
    """Exact integer matrix of T_p on a Miller basis (column action: T_p g_j = sum_i M[i][j] g_i)."""

    weight: int
    p: int
    entries: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple(tuple(mpz(x) for x in row) for row in self.entries)
        )

    @property
    def dim(self):
        return len(self.entries)

    def trace(self):
        return sum(self.entries[i][i] for i in range(self.dim))

    def __matmul__(self, other):
        d = self.dim
        a, b = self.entries, other.entries
        prod = [
            [sum(a[i][t] * b[t][j] for t in range(d)) for j in range(d)]
            for i in range(d)
        ]
        return HeckeMatrix(self.weight, 0, prod)


def hecke_matrix(k, p, basis):
    """Matrix of the Hecke operator T_p in the given Miller basis.

    (T_p g)(n) = g(pn) + p^(k-1) g(n/p), read off at n = 1..d against the echelon block.
    """
    d = len(basis)
    if d == 0:
        return HeckeMatrix(k, p, ())
    need = p * (d + 1)
    if any(g.nterms < need for g in basis):
        raise ValueError(f"basis needs at least {need} coefficients for T_{p}")
    pk = mpz(p) ** (k - 1)
    cols = []
    for g in basis:
        col = []
        for n in range(1, d + 1):
            c = g.coeff(p * n)
            if n % p == 0:
                c = c + pk * g.coeff(n // p)
            col.append(c)
        cols.append(col)
    entries = [[cols[j][i] for j in range(d)] for i in range(d)]
    return HeckeMatrix(k, p, entries)
