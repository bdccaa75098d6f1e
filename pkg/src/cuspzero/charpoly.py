"""Exact integer characteristic polynomials and certified real root extraction.

The charpoly is computed by CRT over ~25-bit primes (vectorized Hessenberg reduction
plus the standard Hessenberg determinant recurrence, all in numpy int64), with the
prime count chosen from a rigorous bound on the coefficient sizes.  Root isolation
and refinement certify every sign with exact big-integer evaluation at dyadic points,
so no floating-point eigensolver output is ever trusted, only used to place probes.
"""

import functools

import numpy as np
import gmpy2
from gmpy2 import mpfr, mpz

from .errors import EigenvalueCollision, ExactnessError
from .precision import bits

LIMB_BITS = 25
_LIMB_MASK = (1 << LIMB_BITS) - 1

_prime_cache = []
_prime_frontier = 1 << 25  # everything in [_prime_frontier, 2^25) already sieved


def _primes_below_2p25(count):
    """Descending primes just below 2^25 (cached)."""
    global _prime_frontier
    span = 1 << 18
    while len(_prime_cache) < count:
        hi = _prime_frontier
        lo = max(hi - span, 1 << 24)
        if lo >= hi:
            raise ExactnessError("exhausted 25-bit prime supply")
        sieve = bytearray([1]) * (hi - lo)
        for p in _small_primes(int(hi ** 0.5) + 1):
            start = max(((lo + p - 1) // p) * p, p * p)
            if start < hi:
                sieve[start - lo :: p] = b"\x00" * len(sieve[start - lo :: p])
        _prime_cache.extend(lo + i for i in range(hi - lo - 1, -1, -1) if sieve[i])
        _prime_frontier = lo
    return _prime_cache[:count]


def _small_primes(n):
    sieve = bytearray([1]) * (n + 1)
    sieve[0:2] = b"\x00\x00"
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = b"\x00" * len(sieve[p * p :: p])
    return [i for i, v in enumerate(sieve) if v]


def _to_limbs(values):
    """Split |values| into base-2^25 limbs; returns (limbs int64 (n, L), signs (n,))."""
    signs = np.array([1 if v >= 0 else -1 for v in values], dtype=np.int64)
    mags = [int(abs(v)) for v in values]
    nlimbs = max(1, max((m.bit_length() for m in mags), default=1))
    nlimbs = (nlimbs + LIMB_BITS - 1) // LIMB_BITS
    if nlimbs << (LIMB_BITS + LIMB_BITS) >= 1 << 62:
        raise ExactnessError("entries too large for int64 limb accumulation")
    limbs = np.zeros((len(values), nlimbs), dtype=np.int64)
    for i, m in enumerate(mags):
        j = 0
        while m:
            limbs[i, j] = m & _LIMB_MASK
            m >>= LIMB_BITS
            j += 1
    return limbs, signs


def _reduce_mod(limbs, signs, pvec):
    """values mod p for each prime: (n_values, n_primes) int64 in [0, p)."""
    npr = len(pvec)
    L = limbs.shape[1]
    pow_table = np.zeros((L, npr), dtype=np.int64)
    pow_table[0] = 1
    base = (1 << LIMB_BITS) % pvec
    for j in range(1, L):
        pow_table[j] = (pow_table[j - 1] * base) % pvec
    acc = limbs @ pow_table
    return (signs[:, None] * acc) % pvec[None, :]


def _modinv_vec(a, pvec):
    """Vectorized modular inverse via Fermat; exponents differ per prime, so
    square-and-multiply runs over the max exponent with per-prime masks."""
    result = np.ones_like(a)
    base = a % pvec
    exps = pvec - 2
    bit = 1
    maxe = int(exps.max())
    while bit <= maxe:
        take = (exps & bit) != 0
        result = np.where(take, (result * base) % pvec, result)
        base = (base * base) % pvec
        bit <<= 1
    return result


def _hessenberg_charpoly_chunk(A, pvec):
    """Charpoly mod p for a chunk of primes. A: (P, d, d) int64 reduced mod pvec."""
    P, d, _ = A.shape
    A = A.copy()
    A0 = A.copy()
    pm = pvec[:, None]
    pmm = pvec[:, None, None]
    bad = np.zeros(P, dtype=bool)
    for j in range(d - 2):
        piv = A[:, j + 1, j]
        below = A[:, j + 2 :, j]
        need_swap = (piv == 0) & (below != 0).any(axis=1)
        bad |= need_swap
        inv = _modinv_vec(np.where(piv == 0, 1, piv), pvec)
        fac = (below * inv[:, None]) % pm
        if need_swap.any():
            fac[need_swap] = 0
        A[:, j + 2 :, :] = (A[:, j + 2 :, :] - fac[:, :, None] * A[:, j + 1 : j + 2, :]) % pmm
        A[:, :, j + 1] = (A[:, :, j + 1] + np.einsum("pi,pki->pk", fac, A[:, :, j + 2 :])) % pm

    coeffs = _charpoly_from_hessenberg(A, pvec)
    # primes whose pivot vanished get an exact scalar redo with row/column swaps
    for idx in np.nonzero(bad)[0]:
        coeffs[idx] = _charpoly_scalar_mod(A0[idx].tolist(), int(pvec[idx]))
    return coeffs


def _charpoly_from_hessenberg(H, pvec):
    """det(xI - H) mod p from an upper-Hessenberg stack; ascending coeffs (P, d+1)."""
    P, d, _ = H.shape
    pm = pvec[:, None]
    polys = [np.ones((P, 1), dtype=np.int64)]
    for m in range(1, d + 1):
        prev = polys[m - 1]
        cur = np.zeros((P, m + 1), dtype=np.int64)
        cur[:, 1:] = prev
        cur[:, :m] = (cur[:, :m] - H[:, m - 1, m - 1][:, None] * prev) % pm
        w = np.ones(P, dtype=np.int64)
        for i in range(1, m):
            w = (w * H[:, m - i, m - i - 1]) % pvec
            if not w.any():
                break
            coef = (w * H[:, m - 1 - i, m - 1]) % pvec
            cur[:, : m - i] = (cur[:, : m - i] - coef[:, None] * polys[m - 1 - i]) % pm
        polys.append(cur)
    return polys[d]


def _charpoly_scalar_mod(a, p):
    """Reference charpoly mod p with full pivoting on the Hessenberg pass (one prime)."""
    d = len(a)
    a = [[x % p for x in row] for row in a]
    for j in range(d - 2):
        piv_row = None
        for r in range(j + 1, d):
            if a[r][j] % p != 0:
                piv_row = r
                break
        if piv_row is None:
            continue
        if piv_row != j + 1:
            a[piv_row], a[j + 1] = a[j + 1], a[piv_row]
            for r in range(d):
                a[r][piv_row], a[r][j + 1] = a[r][j + 1], a[r][piv_row]
        inv = pow(a[j + 1][j], p - 2, p)
        for r in range(j + 2, d):
            f = (a[r][j] * inv) % p
            if f:
                for c in range(d):
                    a[r][c] = (a[r][c] - f * a[j + 1][c]) % p
                for r2 in range(d):
                    a[r2][j + 1] = (a[r2][j + 1] + f * a[r2][r]) % p
    polys = [[1]]
    for m in range(1, d + 1):
        prev = polys[m - 1]
        cur = [0] * (m + 1)
        for t, c in enumerate(prev):
            cur[t + 1] = (cur[t + 1] + c) % p
            cur[t] = (cur[t] - a[m - 1][m - 1] * c) % p
        w = 1
        for i in range(1, m):
            w = (w * a[m - i][m - i - 1]) % p
            if w == 0:
                break
            coef = (w * a[m - 1 - i][m - 1]) % p
            for t, c in enumerate(polys[m - 1 - i]):
                cur[t] = (cur[t] - coef * c) % p
        polys.append(cur)
    arr = np.array(polys[d], dtype=np.int64) % p
    return arr


def charpoly(entries, eig_abs_log2, chunk=512):
    """Exact char poly det(xI - M) of an integer matrix, descending coefficients.

    eig_abs_log2 bounds log2 of every eigenvalue's absolute value; the CRT modulus is
    sized from it, so the bound must be rigorous (Deligne supplies it for T_p).
    """
    d = len(entries)
    if d == 0:
        return [mpz(1)]
    if d == 1:
        return [mpz(1), -mpz(entries[0][0])]
    bound_bits = int(d * (eig_abs_log2 + 1.0) + d + 4)
    nprimes = bound_bits // (LIMB_BITS - 1) + 2
    primes = _primes_below_2p25(nprimes)
    # trim to the first prefix whose product clears the bound
    acc, used = 0.0, 0
    for p in primes:
        acc += np.log2(p)
        used += 1
        if acc > bound_bits + 1:
            break
    primes = primes[:used]

    flat = [entries[i][j] for i in range(d) for j in range(d)]
    limbs, signs = _to_limbs(flat)

    residues = np.zeros((len(primes), d + 1), dtype=np.int64)
    for lo in range(0, len(primes), chunk):
        pvec = np.array(primes[lo : lo + chunk], dtype=np.int64)
        red = _reduce_mod(limbs, signs, pvec)  # (d*d, P)
        A = np.ascontiguousarray(red.T.reshape(len(pvec), d, d))
        residues[lo : lo + len(pvec)] = _hessenberg_charpoly_chunk(A, pvec)

    coeffs_asc = []
    for t in range(d + 1):
        coeffs_asc.append(_crt_balanced(residues[:, t], primes))
    coeffs = list(reversed(coeffs_asc))
    if coeffs[0] != 1:
        raise ExactnessError("charpoly reconstruction lost monicity")
    tr = sum(mpz(entries[i][i]) for i in range(d))
    if coeffs[1] != -tr:
        raise ExactnessError("charpoly reconstruction failed the trace check")
    return [mpz(c) for c in coeffs]


def _crt_balanced(residues, primes):
    x, modulus = 0, 1
    for r, p in zip(residues.tolist(), primes):
        t = ((r - x) * pow(modulus, -1, p)) % p
        x += modulus * t
        modulus *= p
    if 2 * x > modulus:
        x -= modulus
    return x


# ---------------------------------------------------------------------------
# exact sign evaluation and certified root isolation / refinement


def eval_sign_dyadic(coeffs, man, exp):
    """Sign of p(man * 2^exp), exactly, for integer mantissa/exponent."""
    man = int(man)
    exp = int(exp)
    if exp >= 0:
        x = man << exp
        v = 0
        for c in coeffs:
            v = v * x + c
    else:
        e = -exp
        v = 0
        for t, c in enumerate(coeffs):
            v = v * man + (int(c) << (e * t))
    return (v > 0) - (v < 0)


def _mid(a, b):
    """Exact dyadic midpoint of dyadic points (man, exp)."""
    (m1, e1), (m2, e2) = a, b
    e = min(e1, e2) - 2  # both shifted mantissas even, so the halving is exact
    return ((m1 << (e1 - e)) + (m2 << (e2 - e))) >> 1, e


def _dy_cmp(a, b):
    (m1, e1), (m2, e2) = a, b
    e = min(e1, e2)
    v1, v2 = m1 << (e1 - e), m2 << (e2 - e)
    return (v1 > v2) - (v1 < v2)


def dyadic_to_mpfr(pt, precision):
    man, exp = pt
    with bits(precision):
        return mpfr(man) * mpfr(2) ** exp


def mpfr_to_dyadic(x, keep_bits=None):
    man, exp = x.as_mantissa_exp()
    man, exp = int(man), int(exp)
    if keep_bits is not None and abs(man).bit_length() > keep_bits:
        shift = abs(man).bit_length() - keep_bits
        man >>= shift
        exp += shift
    return man, exp


def isolate_real_roots(coeffs, lo, hi, seeds, max_splits=None):
    """Bracket all d real roots of the monic integer polynomial in (lo, hi).

    lo/hi/seeds are dyadic (mantissa, exponent) pairs; seeds are untrusted hints.
    Returns d certified brackets, each with exact opposite endpoint signs.  Raises
    EigenvalueCollision when d sign changes cannot be exhibited, which for Hecke
    charpolys means two eigenvalues coincide at the working resolution.
    """
    d = len(coeffs) - 1
    if eval_sign_dyadic(coeffs, *hi) <= 0 or eval_sign_dyadic(coeffs, *lo) != (-1) ** d:
        raise EigenvalueCollision("root bound endpoints do not enclose all roots")

    pts = [lo]
    inside = [s for s in seeds if _dy_cmp(lo, s) < 0 and _dy_cmp(s, hi) < 0]
    inside.sort(key=functools.cmp_to_key(_dy_cmp))
    prev = lo
    for i in range(len(inside) - 1):
        sep = _mid(inside[i], inside[i + 1])
        if _dy_cmp(prev, sep) < 0 and _dy_cmp(sep, hi) < 0:
            pts.append(sep)
            prev = sep
    pts.append(hi)

    signs = []
    for pt in pts:
        s = eval_sign_dyadic(coeffs, *pt)
        if s == 0:
            pt = (pt[0] + 1, pt[1])
            s = eval_sign_dyadic(coeffs, *pt)
            if s == 0:
                raise EigenvalueCollision("dyadic probe landed on a repeated root")
        signs.append(s)

    if max_splits is None:
        max_splits = 64 * d + 256

    def count_changes():
        return sum(1 for i in range(len(signs) - 1) if signs[i] != signs[i + 1])

    splits = 0
    while count_changes() < d:
        # split the widest same-sign gap (deterministic: leftmost on ties)
        best, best_w = None, None
        for i in range(len(pts) - 1):
            if signs[i] == signs[i + 1]:
                (m1, e1), (m2, e2) = pts[i], pts[i + 1]
                e = min(e1, e2)
                w = (m2 << (e2 - e)) - (m1 << (e1 - e))
                wlog = w.bit_length() + e
                if best is None or wlog > best_w:
                    best, best_w = i, wlog
        if best is None:
            raise EigenvalueCollision("sign pattern inconsistent with real spectrum")
        mid = _mid(pts[best], pts[best + 1])
        s = eval_sign_dyadic(coeffs, *mid)
        if s == 0:
            mid = (mid[0] + 1, mid[1])
            s = eval_sign_dyadic(coeffs, *mid)
        pts.insert(best + 1, mid)
        signs.insert(best + 1, s)
        splits += 1
        if splits > max_splits:
            raise EigenvalueCollision(
                f"could not separate {d} real roots within the split budget"
            )

    brackets = []
    for i in range(len(pts) - 1):
        if signs[i] != signs[i + 1]:
            brackets.append((pts[i], pts[i + 1]))
    if len(brackets) != d:
        raise EigenvalueCollision("more sign changes than roots; inconsistent data")
    return brackets


def refine_root(coeffs, bracket, out_prec):
    """Refine a certified bracket to an mpfr root at out_prec bits.

    Dyadic bisection narrows the bracket, mpfr Newton polishes, and the result is
    re-certified by exact signs at x(1 ± 2^-out_prec-2); on certification failure
    pure exact bisection finishes the job.
    """
    (a, b) = bracket
    sa = eval_sign_dyadic(coeffs, *a)
    for _ in range(18):
        m = _mid(a, b)
        sm = eval_sign_dyadic(coeffs, *m)
        if sm == 0:
            m = (m[0] + 1, m[1])
            sm = eval_sign_dyadic(coeffs, *m)
        if sm == sa:
            a = m
        else:
            b = m

    coeff_bits = max(int(abs(c)).bit_length() for c in coeffs)
    work = coeff_bits + out_prec + 64
    with bits(work):
        cs = [mpfr(c) for c in coeffs]
        x = (dyadic_to_mpfr(a, work) + dyadic_to_mpfr(b, work)) / 2
        tol_log2 = -(out_prec + 8)
        for _ in range(60):
            v = cs[0]
            dv = mpfr(0)
            for c in cs[1:]:
                dv = dv * x + v
                v = v * x + c
            if dv == 0:
                break
            step = v / dv
            x = x - step
            if step == 0 or (
                x != 0 and gmpy2.log2(abs(step)) < gmpy2.log2(abs(x)) + tol_log2
            ):
                break
        man, exp = mpfr_to_dyadic(x, keep_bits=out_prec + 4)

    lo_pt, hi_pt = (man - 2, exp), (man + 2, exp)
    inside = _dy_cmp(a, lo_pt) <= 0 and _dy_cmp(hi_pt, b) <= 0
    if inside and eval_sign_dyadic(coeffs, *lo_pt) * eval_sign_dyadic(coeffs, *hi_pt) < 0:
        return dyadic_to_mpfr((man, exp), out_prec + 16)

    # Newton drifted: finish by exact bisection inside the original bracket
    sa = eval_sign_dyadic(coeffs, *a)
    for _ in range(out_prec + 64):
        m = _mid(a, b)
        sm = eval_sign_dyadic(coeffs, *m)
        if sm == 0:
            return dyadic_to_mpfr(m, out_prec + 16)
        if sm == sa:
            a = m
        else:
            b = m
    return dyadic_to_mpfr(_mid(a, b), out_prec + 16)
