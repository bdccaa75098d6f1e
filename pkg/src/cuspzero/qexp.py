"""Exact integer q-expansions of level-one modular forms.

Coefficients are gmpy2 integers and every operation is exact; any division that
leaves a remainder raises ExactnessError instead of rounding.
"""

from dataclasses import dataclass, field

from gmpy2 import mpz

from .errors import ExactnessError

_ZERO = mpz(0)
_ONE = mpz(1)


def dim_cusp_forms(k):
    """Dimension of the space of level-one cusp forms of weight k."""
    if k % 2 == 1 or k < 12:
        return 0
    if k % 12 == 2:
        return k // 12 - 1
    return k // 12


def _sigma(n, power):
    """Divisor power sum sigma_power(n)."""
    total = _ZERO
    d = 1
    while d * d <= n:
        if n % d == 0:
            total += mpz(d) ** power
            q = n // d
            if q != d:
                total += mpz(q) ** power
        d += 1
    return total


@dataclass(frozen=True)
class QExpansion:
    """Truncated integer q-expansion: a0 + sum_{n=1}^{nterms} coeffs[n-1] q^n."""

    weight: int
    coeffs: tuple
    a0: int = 0
    nterms: int = field(default=None)

    def __post_init__(self):
        if self.weight % 2 != 0 or self.weight < 4:
            raise ValueError(f"weight must be even and >= 4, got {self.weight}")
        object.__setattr__(self, "coeffs", tuple(mpz(c) for c in self.coeffs))
        object.__setattr__(self, "a0", mpz(self.a0))
        object.__setattr__(self, "nterms", len(self.coeffs))

    def coeff(self, n):
        """Coefficient a(n), n = 0..nterms."""
        if n == 0:
            return self.a0
        if not 1 <= n <= self.nterms:
            raise IndexError(f"coefficient index {n} outside 0..{self.nterms}")
        return self.coeffs[n - 1]

    @property
    def is_cusp(self):
        return self.a0 == 0

    def __mul__(self, other):
        if isinstance(other, QExpansion):
            n = min(self.nterms, other.nterms)
            a = (self.a0,) + self.coeffs
            b = (other.a0,) + other.coeffs
            prod = _mul_trunc(a, b, n)
            return QExpansion(self.weight + other.weight, prod[1:], a0=prod[0])
        c = mpz(other)
        return QExpansion(self.weight, [c * x for x in self.coeffs], a0=c * self.a0)

    __rmul__ = __mul__

    def __sub__(self, other):
        if self.weight != other.weight:
            raise ValueError("cannot subtract expansions of different weights")
        n = min(self.nterms, other.nterms)
        return QExpansion(
            self.weight,
            [self.coeffs[i] - other.coeffs[i] for i in range(n)],
            a0=self.a0 - other.a0,
        )

    def exact_div(self, d):
        """Divide every coefficient by d, requiring exactness."""
        d = mpz(d)
        out = []
        for c in (self.a0,) + self.coeffs:
            q, r = divmod(c, d)
            if r != 0:
                raise ExactnessError(f"inexact division of coefficient {c} by {d}")
            out.append(q)
        return QExpansion(self.weight, out[1:], a0=out[0])

    def truncate(self, n):
        if n > self.nterms:
            raise ValueError("cannot extend an expansion by truncation")
        return QExpansion(self.weight, self.coeffs[:n], a0=self.a0)


def _mul_trunc(a, b, n):
    """Truncated Cauchy product of coefficient tuples indexed from q^0, length n+1."""
    out = [_ZERO] * (n + 1)
    for i, ai in enumerate(a):
        if i > n or ai == 0:
            continue
        top = n - i
        for j, bj in enumerate(b[: top + 1]):
            if bj != 0:
                out[i + j] += ai * bj
    return out


def eisenstein_qexp(weight, nterms):
    """Normalized Eisenstein series E4 or E6 to `nterms` coefficients past the constant."""
    if weight not in (4, 6):
        raise ValueError(f"only weights 4 and 6 are generators, got {weight}")
    if nterms < 0:
        raise ValueError("nterms must be non-negative")
    if weight == 4:
        mult, power = mpz(240), 3
    else:
        mult, power = mpz(-504), 5
    coeffs = [mult * _sigma(n, power) for n in range(1, nterms + 1)]
    return QExpansion(weight, coeffs, a0=1)


def delta_qexp(nterms):
    """The discriminant cusp form of weight 12, built as (E4^3 - E6^2)/1728."""
    if nterms < 1:
        raise ValueError("nterms must be >= 1")
    e4 = eisenstein_qexp(4, nterms)
    e6 = eisenstein_qexp(6, nterms)
    num = e4 * e4 * e4 - e6 * e6
    delta = num.exact_div(1728)
    if delta.a0 != 0 or delta.coeff(1) != 1:
        raise ExactnessError("discriminant normalization failed")
    return delta
