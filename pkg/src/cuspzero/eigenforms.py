"""Hecke eigenform construction, eigenvalue tables, verification, and cache files.

Pipeline per weight: exact Miller basis -> exact integer T_2 matrix -> exact integer
characteristic polynomial -> certified real-root isolation and refinement -> mpfr
eigenvector solve -> normalized eigenvalue table lambda(n) = a(n) / n^((k-1)/2).
"""

import math
import os
import re
from dataclasses import dataclass, field

import numpy as np
import gmpy2
from gmpy2 import mpfr, mpz

from . import charpoly as cp
from .errors import (
    CacheFormatError,
    CuspZeroError,
    EigenvalueCollision,
    InsufficientCoefficients,
)
from .hecke import hecke_matrix, miller_basis
from .precision import (
    DEFAULT_PRECISION,
    ESCALATED_PRECISION,
    bits,
    decimal_digits,
    mpfr_to_str,
)
from .qexp import dim_cusp_forms

CACHE_MAGIC = "CUSPZERO-EIGEN"
CACHE_VERSION = "v1"


def default_nterms(k):
    """Coefficient count covering every evaluation regime down to the arc.

    The dominant index of the weight-k kernel at y ~ 1/2 is about k/(2 pi); the
    window allowance adds ~4 sqrt(k log k)/(2 pi).
    """
    return (
        math.ceil(k / (2 * math.pi))
        + math.ceil(4.0 * math.sqrt(k * math.log(k)) / (2 * math.pi))
        + 16
    )


@dataclass(frozen=True)
class Eigenform:
    """A normalized Hecke eigenform: weight, position, and eigenvalue table.

    lambdas[i] is lambda(i+1) as an mpfr at precision_bits; a_int holds the exact
    integer coefficients when the form is rational (one-dimensional weight).
    """

    weight: int
    dim_index: int
    lambdas: tuple
    precision_bits: int
    nterms: int = field(default=None)
    a_int: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(self.lambdas))
        object.__setattr__(self, "nterms", len(self.lambdas))
        if self.a_int is not None:
            object.__setattr__(self, "a_int", tuple(mpz(a) for a in self.a_int))
        arr = np.empty(self.nterms + 1)
        arr[0] = np.nan
        arr[1:] = [float(x) for x in self.lambdas]
        object.__setattr__(self, "_lam_f64", arr)
        object.__setattr__(self, "_assembled", {})

    @property
    def k(self):
        return self.weight

    @property
    def kprime(self):
        return (self.weight - 1) / 2.0

    def lam(self, n):
        """lambda(n), from the table or assembled by multiplicativity."""
        n = int(n)
        if n < 1:
            raise ValueError("lambda index must be positive")
        if n <= self.nterms:
            return self.lambdas[n - 1]
        got = self._assembled.get(n)
        if got is not None:
            return got
        with bits(self.precision_bits):
            val = mpfr(1)
            for p, e in _factorize(n):
                val = val * self._lam_prime_power(p, e)
        self._assembled[n] = val
        return val

    def _lam_prime_power(self, p, e):
        if p > self.nterms:
            raise InsufficientCoefficients(
                f"lambda({p}^{e}) needs the prime {p} beyond the stored table ({self.nterms})"
            )
        top_stored = 0
        pe = 1
        while pe * p <= self.nterms:
            pe *= p
            top_stored += 1
        vals = [mpfr(1), self.lambdas[p - 1]]
        q = p
        for j in range(2, e + 1):
            q *= p
            if j <= top_stored:
                vals.append(self.lambdas[q - 1])
            else:
                vals.append(vals[1] * vals[j - 1] - vals[j - 2])
        return vals[e]

    def lam_f64(self, n):
        """float64 view of lambda(n) for fast-path kernels."""
        if n <= self.nterms:
            return self._lam_f64[n]
        return float(self.lam(n))

    @property
    def lam_array(self):
        """float64 array L with L[n] = lambda(n) for 1 <= n <= nterms (L[0] is nan)."""
        return self._lam_f64


def _factorize(n):
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


@dataclass
class HeckeCheck:
    """Result of verify_hecke: worst residual over all testable relations."""

    max_residual: float
    worst: str
    deligne_violations: list
    n_relations: int
    tol: float

    @property
    def passed(self):
        return self.max_residual <= self.tol and not self.deligne_violations


def verify_hecke(f, tol):
    """Check multiplicativity, the prime-power recursion, and the |lambda(p)| <= 2 bound.

    Reporting only: never raises on a violation.
    """
    tol = float(tol)
    n = f.nterms
    worst = 0.0
    worst_what = "none"
    count = 0
    deligne = []
    with bits(f.precision_bits):
        r = abs(f.lambdas[0] - 1)
        if r > worst:
            worst, worst_what = float(r), "lambda(1) != 1"
        count += 1
        for p in _primes_upto(n):
            if abs(f.lambdas[p - 1]) > 2 + tol:
                deligne.append((p, float(f.lambdas[p - 1])))
            # lambda(p) lambda(p^e) = lambda(p^(e+1)) + lambda(p^(e-1))
            pe = p
            e = 1
            while pe * p <= n:
                lo = f.lambdas[pe // p - 1] if e > 1 else mpfr(1)
                r = abs(f.lambdas[p - 1] * f.lambdas[pe - 1] - f.lambdas[pe * p - 1] - lo)
                count += 1
                if r > worst:
                    worst, worst_what = float(r), f"recursion at {p}^{e + 1}"
                pe *= p
                e += 1
        for m in range(2, n + 1):
            for mult in range(2, n // m + 1):
                if math.gcd(m, mult) == 1 and mult >= m:
                    r = abs(
                        f.lambdas[m * mult - 1] - f.lambdas[m - 1] * f.lambdas[mult - 1]
                    )
                    count += 1
                    if r > worst:
                        worst, worst_what = float(r), f"multiplicativity {m}*{mult}"
    return HeckeCheck(worst, worst_what, deligne, count, tol)


def _primes_upto(n):
    sieve = bytearray([1]) * (n + 1)
    if n >= 0:
        sieve[0:2] = b"\x00\x00"[: min(2, n + 1)]
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = b"\x00" * len(sieve[p * p :: p])
    return [i for i in range(2, n + 1) if sieve[i]]


def _null_vector(entries, theta, prec):
    """Unit-a(1) kernel vector of (M - theta I) by mpfr elimination with partial pivoting.

    Rows and columns are first equilibrated by exact powers of two: the raw matrix is
    graded (row i scales like (2i)^((k-1)/2)), and unequilibrated pivoting would sink
    the small rows' information below the mantissa.
    """
    d = len(entries)
    if d == 1:
        return [mpfr(1)]
    with bits(prec):
        m = [[mpfr(entries[i][j]) for j in range(d)] for i in range(d)]
        for i in range(d):
            m[i][i] = m[i][i] - theta
        two = mpfr(2)
        for i in range(d):
            e = max(_exp2(x) for x in m[i])
            if e:
                sc = two ** (-e)
                m[i] = [x * sc for x in m[i]]
        col_shift = [0] * d
        for j in range(d):
            e = max(_exp2(m[i][j]) for i in range(d))
            if e:
                sc = two ** (-e)
                for i in range(d):
                    m[i][j] = m[i][j] * sc
                col_shift[j] = e
        for col in range(d - 1):
            piv = max(range(col, d), key=lambda r: abs(m[r][col]))
            if piv != col:
                m[piv], m[col] = m[col], m[piv]
            if m[col][col] == 0:
                continue
            for r in range(col + 1, d):
                fac = m[r][col] / m[col][col]
                if fac != 0:
                    row_r, row_c = m[r], m[col]
                    for c in range(col, d):
                        row_r[c] = row_r[c] - fac * row_c[c]
        x = [mpfr(0)] * d
        x[d - 1] = mpfr(1)
        for i in range(d - 2, -1, -1):
            s = mpfr(0)
            for j in range(i + 1, d):
                s += m[i][j] * x[j]
            if m[i][i] == 0:
                raise EigenvalueCollision("rank deficiency above the null direction")
            x[i] = -s / m[i][i]
        # undo the column scaling to return to original coordinates
        x = [xi * two ** (-col_shift[j]) for j, xi in enumerate(x)]
        scale = x[0]
        if scale == 0:
            raise CuspZeroError("eigenvector has vanishing leading coefficient")
        return [v / scale for v in x]


def _exp2(x):
    """Binary exponent of a nonzero mpfr; 0 for zero."""
    if x == 0:
        return 0
    return gmpy2.frexp(x)[0]


def _t2_seeds(coeffs, k, d):
    """Untrusted float64 root hints for T_2, as dyadic points at scale 2^((k-1)/2)."""
    with bits(64):
        half = gmpy2.exp2(mpfr(k - 1) / 2)
        scaled = [float(mpfr(c) / half ** (d - j)) for j, c in enumerate(reversed(coeffs))]
    scaled.reverse()
    roots = np.roots(np.array(scaled))
    seeds = []
    with bits(64):
        for r in sorted(roots, key=lambda z: z.real):
            t = mpfr(float(r.real)) * half
            seeds.append(cp.mpfr_to_dyadic(t, keep_bits=60))
    return seeds


def eigenforms(k, precision_bits=DEFAULT_PRECISION, nterms=None):
    """All Hecke eigenforms of weight k, ordered by ascending lambda(2).

    Every returned form passes verify_hecke at 2^(-precision_bits/2); a failing
    verification triggers one automatic rebuild at the escalated precision, after
    which failure is a hard error.
    """
    if k % 2 != 0 or k < 12:
        raise ValueError(f"weights must be even and >= 12; got {k}")
    if precision_bits < 64:
        raise ValueError("precision_bits must be >= 64")
    d = dim_cusp_forms(k)
    if d == 0:
        return []
    n = max(nterms or default_nterms(k), 2 * d + 2)

    forms = _build(k, d, n, precision_bits)
    tol = 2.0 ** (-(precision_bits // 2))
    if all(verify_hecke(f, tol).passed for f in forms):
        return forms
    if precision_bits < ESCALATED_PRECISION:
        forms = _build(k, d, n, ESCALATED_PRECISION)
        tol = 2.0 ** (-(ESCALATED_PRECISION // 2))
        if all(verify_hecke(f, tol).passed for f in forms):
            return forms
    raise CuspZeroError(f"weight {k}: Hecke verification failed even after escalation")


def _build(k, d, nterms, precision_bits):
    basis = miller_basis(k, nterms)
    t2 = hecke_matrix(k, 2, basis)
    coeffs = cp.charpoly(t2.entries, eig_abs_log2=1.0 + (k - 1) / 2.0)

    e = (k - 1) // 2
    lo, hi = (-3, e), (3, e)  # 3*2^e > 2*2^((k-1)/2), the Deligne bound with margin
    try:
        brackets = cp.isolate_real_roots(coeffs, lo, hi, _t2_seeds(coeffs, k, d))
    except EigenvalueCollision:
        # escalation: drop the hints and isolate by pure dyadic bisection
        brackets = cp.isolate_real_roots(coeffs, lo, hi, [], max_splits=512 * d)

    work = precision_bits + 96 + d  # d-bit margin for eigenbasis conditioning
    roots = [cp.refine_root(coeffs, br, precision_bits + 64) for br in brackets]

    basis_cols = [[g.coeff(j) for j in range(1, nterms + 1)] for g in basis]
    forms = []
    with bits(work):
        nk_sqrt = [None] * (nterms + 1)
        for j in range(1, nterms + 1):
            nk_sqrt[j] = gmpy2.sqrt(mpfr(mpz(j) ** (k - 1)))
        for idx, theta in enumerate(roots):
            v = _null_vector(t2.entries, mpfr(theta), work)
            lams = []
            for j in range(1, nterms + 1):
                if j <= d:
                    a_j = v[j - 1]
                else:
                    a_j = mpfr(0)
                    for i in range(d):
                        if basis_cols[i][j - 1]:
                            a_j += v[i] * mpfr(basis_cols[i][j - 1])
                lams.append(a_j / nk_sqrt[j])
            with bits(precision_bits):
                lams = [mpfr(x) for x in lams]
            a_int = tuple(basis_cols[0][:nterms]) if d == 1 else None
            forms.append(
                Eigenform(
                    weight=k,
                    dim_index=idx,
                    lambdas=lams,
                    precision_bits=precision_bits,
                    a_int=a_int,
                )
            )
    forms.sort(key=lambda f: (f.lambdas[1], f.lambdas[2]))
    forms = [
        Eigenform(
            weight=f.weight,
            dim_index=i,
            lambdas=f.lambdas,
            precision_bits=f.precision_bits,
            a_int=f.a_int,
        )
        for i, f in enumerate(forms)
    ]
    return forms


# ---------------------------------------------------------------------------
# cache files

_HEADER_RE = re.compile(
    r"^CUSPZERO-EIGEN (?P<ver>\S+) k=(?P<k>\d+) idx=(?P<idx>\d+) "
    r"prec=(?P<prec>\d+) nterms=(?P<nterms>\d+)$"
)
_VALUE_RE = re.compile(r"^-?\d\.(?P<frac>\d+)e[+-]\d+$")


def cache_path(cache_dir, k, idx):
    return os.path.join(cache_dir, f"k{k:05d}_i{idx:03d}.eigen")


def write_cache(f, path):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(
            f"{CACHE_MAGIC} {CACHE_VERSION} k={f.weight} idx={f.dim_index} "
            f"prec={f.precision_bits} nterms={f.nterms}\n"
        )
        for i, lam in enumerate(f.lambdas):
            fh.write(f"{i + 1} {mpfr_to_str(lam, f.precision_bits)}\n")
        if f.a_int is not None:
            fh.write("EXACT\n")
            for i, a in enumerate(f.a_int):
                fh.write(f"{i + 1} {int(a)}\n")
    os.replace(tmp, path)
    return path


def read_cache(path):
    """Parse and validate a cache file; raises CacheFormatError on any defect."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CacheFormatError(f"{path}: empty file")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise CacheFormatError(f"{path}: bad header")
    if m.group("ver") != CACHE_VERSION:
        raise CacheFormatError(f"{path}: unknown version {m.group('ver')!r}")
    k = int(m.group("k"))
    idx = int(m.group("idx"))
    prec = int(m.group("prec"))
    nterms = int(m.group("nterms"))
    digits = decimal_digits(prec)

    lams = []
    a_int = None
    i = 1
    with bits(prec):
        for n in range(1, nterms + 1):
            if i >= len(lines):
                raise CacheFormatError(f"{path}: truncated at n={n}")
            parts = lines[i].split()
            if len(parts) != 2 or parts[0] != str(n):
                raise CacheFormatError(f"{path}: bad index on line {i + 1}")
            vm = _VALUE_RE.match(parts[1])
            if not vm or len(vm.group("frac")) != digits:
                raise CacheFormatError(f"{path}: bad value format on line {i + 1}")
            lams.append(mpfr(parts[1]))
            i += 1
    if i < len(lines) and lines[i] == "EXACT":
        i += 1
        a_int = []
        for n in range(1, nterms + 1):
            if i >= len(lines):
                raise CacheFormatError(f"{path}: truncated EXACT section")
            parts = lines[i].split()
            if len(parts) != 2 or parts[0] != str(n):
                raise CacheFormatError(f"{path}: bad EXACT line {i + 1}")
            a_int.append(int(parts[1]))
            i += 1
    if i != len(lines):
        raise CacheFormatError(f"{path}: trailing data")
    return Eigenform(
        weight=k, dim_index=idx, lambdas=lams, precision_bits=prec, a_int=a_int
    )


def load_or_build(k, precision_bits=DEFAULT_PRECISION, nterms=None, cache_dir=None,
                  force=False):
    """Eigenforms for weight k, served from the cache when files validate.

    A corrupted or undersized cache file triggers a rebuild of the whole weight;
    cache hits and rebuilds produce bit-identical tables because values round-trip
    exactly through the decimal serialization.
    """
    d = dim_cusp_forms(k)
    want_n = max(nterms or default_nterms(k), 2 * d + 2) if d else 0
    if cache_dir is None:
        return eigenforms(k, precision_bits, nterms)
    os.makedirs(cache_dir, exist_ok=True)
    if d == 0:
        return []
    if not force:
        try:
            forms = [read_cache(cache_path(cache_dir, k, i)) for i in range(d)]
            if all(
                f.precision_bits == precision_bits and f.nterms >= want_n for f in forms
            ):
                return forms
        except (OSError, CacheFormatError):
            pass
    forms = eigenforms(k, precision_bits, nterms)
    for f in forms:
        write_cache(f, cache_path(cache_dir, k, f.dim_index))
    return forms
