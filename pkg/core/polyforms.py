"""
Binary Forms Module
===================
Homogeneous integer forms in (t1, t2): content and primitive part, gcd,
resultants, exact and renormalized floating evaluation, and the text
serialization used by the cache.

Coefficient layout: c_k is the coefficient of t1^k * t2^(d-k), stored
low to high (k = 0..d). The dehomogenization is f(t, 1) = sum c_k t^k.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from sympy import Matrix
from sympy.polys.densearith import dup_div, dup_mul
from sympy.polys.domains import ZZ
from sympy.polys.euclidtools import dup_resultant, dup_rr_prs_gcd
from sympy.polys.galoistools import gf_degree, gf_from_int_poly, gf_gcd

from config import settings
from core.errors import CacheError, InvalidParameterError, ValuationError
from core.qfield import ARCHIMEDEAN, LogAbs, Place, int_valuation, to_rational

logger = logging.getLogger(__name__)

# Moduli for the coprimality early-out in form_gcd
_GCD_PRIMES = (2305843009213693951, 4611686018427387847, 9223372036854775783)

Number = Union[int, Fraction, float, complex]


def _zz(values: Sequence[int]) -> list:
    return [ZZ(int(c)) for c in values]


@dataclass(frozen=True)
class BinaryForm:
    """A homogeneous integer form; coeffs == () is the zero form."""
    coeffs: Tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(c) for c in self.coeffs)
        if not any(values):
            values = ()
        object.__setattr__(self, 'coeffs', values)

    @classmethod
    def zero(cls) -> 'BinaryForm':
        return cls(())

    @classmethod
    def one(cls) -> 'BinaryForm':
        return cls((1,))

    @classmethod
    def from_dup(cls, dup: Sequence[int], degree: int) -> 'BinaryForm':
        """Re-homogenize a dense high-first polynomial in t to the given degree."""
        low_first = [int(c) for c in reversed(list(dup))]
        if len(low_first) > degree + 1:
            raise InvalidParameterError(f"polynomial of degree {len(low_first) - 1} exceeds form degree {degree}")
        return cls(tuple(low_first) + (0,) * (degree + 1 - len(low_first)))

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> Optional[int]:
        return None if self.is_zero else len(self.coeffs) - 1

    @property
    def t1_degree(self) -> int:
        """Degree of the dehomogenization f(t, 1)."""
        self._require_nonzero()
        return max(k for k, c in enumerate(self.coeffs) if c)

    @property
    def t2_power(self) -> int:
        """Exponent of the largest power of t2 dividing the form."""
        return self.degree - self.t1_degree

    @property
    def leading_coefficient(self) -> int:
        return self.coeffs[self.t1_degree]

    def dehomogenize(self) -> List[int]:
        """f(t, 1) as a stripped high-first list (sympy dense layout)."""
        self._require_nonzero()
        return [c for c in reversed(self.coeffs[:self.t1_degree + 1])]

    def _require_nonzero(self):
        if self.is_zero:
            raise InvalidParameterError("operation undefined on the zero form")

    # -------------------------------------------------------------------------
    # arithmetic
    # -------------------------------------------------------------------------

    def __add__(self, other: 'BinaryForm') -> 'BinaryForm':
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.degree != other.degree:
            raise InvalidParameterError("forms of different degree")
        return BinaryForm(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> 'BinaryForm':
        return BinaryForm(tuple(-c for c in self.coeffs))

    def __sub__(self, other: 'BinaryForm') -> 'BinaryForm':
        return self + (-other)

    def __mul__(self, other: 'BinaryForm') -> 'BinaryForm':
        if self.is_zero or other.is_zero:
            return BinaryForm.zero()
        product = dup_mul(_zz(self.dehomogenize()), _zz(other.dehomogenize()), ZZ)
        return BinaryForm.from_dup(product, self.degree + other.degree)

    def scale(self, factor: int) -> 'BinaryForm':
        return BinaryForm(tuple(factor * c for c in self.coeffs))

    def times_t1(self) -> 'BinaryForm':
        return self if self.is_zero else BinaryForm((0,) + self.coeffs)

    def times_t2(self) -> 'BinaryForm':
        return self if self.is_zero else BinaryForm(self.coeffs + (0,))

    def exact_divide(self, divisor: 'BinaryForm') -> 'BinaryForm':
        """Quotient by a form that divides exactly, else ArithmeticError."""
        if divisor.is_zero:
            raise ZeroDivisionError("division by the zero form")
        if self.is_zero:
            return self
        if divisor.t2_power > self.t2_power:
            raise ArithmeticError("divisor does not divide the form (t2 power)")
        quotient, remainder = dup_div(_zz(self.dehomogenize()), _zz(divisor.dehomogenize()), ZZ)
        if remainder:
            raise ArithmeticError("divisor does not divide the form")
        return BinaryForm.from_dup(quotient, self.degree - divisor.degree)

    def divides(self, other: 'BinaryForm') -> bool:
        try:
            other.exact_divide(self)
        except ArithmeticError:
            return False
        return True

    # -------------------------------------------------------------------------
    # evaluation
    # -------------------------------------------------------------------------

    def evaluate(self, t1: Number, t2: Number):
        """Homogeneous Horner; exact for ints and Fractions."""
        if self.is_zero:
            return 0
        acc = self.coeffs[-1]
        t2_pow = 1
        for c in reversed(self.coeffs[:-1]):
            t2_pow = t2_pow * t2
            acc = acc * t1 + c * t2_pow
        return acc

    @cached_property
    def scaled_floats(self) -> Tuple[np.ndarray, int]:
        """Coefficients divided by 2**shift so the largest fits a double."""
        if self.is_zero:
            return np.zeros(0), 0
        bits = max(abs(c).bit_length() for c in self.coeffs)
        shift = max(0, bits - 60)
        scaled = np.array([c / (1 << shift) for c in self.coeffs], dtype=float)
        return scaled, shift

    def __str__(self) -> str:
        if self.is_zero:
            return '0'
        terms = []
        d = self.degree
        for k in range(d, -1, -1):
            c = self.coeffs[k]
            if not c:
                continue
            parts = []
            for var, power in (('t1', k), ('t2', d - k)):
                if power == 1:
                    parts.append(var)
                elif power > 1:
                    parts.append(f"{var}^{power}")
            monomial = '*'.join(parts)
            if not monomial:
                body = str(abs(c))
            elif abs(c) == 1:
                body = monomial
            else:
                body = f"{abs(c)}*{monomial}"
            sign = '-' if c < 0 else '+'
            terms.append((sign, body))
        first_sign, first_body = terms[0]
        text = ('-' if first_sign == '-' else '') + first_body
        for sign, body in terms[1:]:
            text += f" {sign} {body}"
        return text


@dataclass(frozen=True)
class BinaryFormPair:
    """Two forms of one shared degree d; houses the iterates F_n."""
    a: BinaryForm
    b: BinaryForm

    def __post_init__(self):
        if self.a.is_zero or self.b.is_zero:
            raise InvalidParameterError("pair components must be nonzero forms")
        if self.a.degree != self.b.degree:
            raise InvalidParameterError(f"degrees differ: {self.a.degree} != {self.b.degree}")

    @classmethod
    def from_coeffs(cls, a: Sequence[int], b: Sequence[int]) -> 'BinaryFormPair':
        return cls(BinaryForm(tuple(a)), BinaryForm(tuple(b)))

    @property
    def degree(self) -> int:
        return self.a.degree

    @property
    def max_coefficient_bits(self) -> int:
        return max(abs(c).bit_length() for c in self.a.coeffs + self.b.coeffs)

    def swapped(self) -> 'BinaryFormPair':
        return BinaryFormPair(self.b, self.a)

    def joint_content(self) -> int:
        return math.gcd(*(self.a.coeffs + self.b.coeffs))

    def is_reduced(self) -> bool:
        """Joint content 1 and no common form factor."""
        return self.joint_content() == 1 and form_gcd(self.a, self.b).degree == 0

    def evaluate(self, t1: Number, t2: Number) -> Tuple:
        return self.a.evaluate(t1, t2), self.b.evaluate(t1, t2)

    def to_text(self) -> str:
        """Canonical serialization: header plus one coefficient line per form."""
        return (
            f"BFP v1 deg={self.degree}\n"
            f"{' '.join(str(c) for c in self.a.coeffs)}\n"
            f"{' '.join(str(c) for c in self.b.coeffs)}\n"
        )

    @classmethod
    def from_lines(cls, lines: Sequence[str]) -> 'BinaryFormPair':
        if len(lines) < 3:
            raise CacheError("truncated form pair")
        header = lines[0].split()
        if len(header) != 3 or header[0] != 'BFP' or not header[2].startswith('deg='):
            raise CacheError(f"bad form pair header: {lines[0]!r}")
        if header[1] != 'v1':
            raise CacheError(f"unsupported form pair version {header[1]}")
        try:
            degree = int(header[2][4:])
            a = [int(tok) for tok in lines[1].split()]
            b = [int(tok) for tok in lines[2].split()]
        except ValueError as e:
            raise CacheError(f"malformed form pair: {e}") from None
        if len(a) != degree + 1 or len(b) != degree + 1:
            raise CacheError("coefficient count does not match degree")
        return cls.from_coeffs(a, b)

    @classmethod
    def from_text(cls, text: str) -> 'BinaryFormPair':
        return cls.from_lines(text.strip('\n').split('\n'))


# =============================================================================
# content, gcd
# =============================================================================

def content_and_primitive(f: BinaryForm) -> Tuple[int, BinaryForm]:
    """
    Positive gcd of the coefficients and the quotient.

    Args:
        f: nonzero form

    Returns:
        (content, primitive part); the primitive part keeps the sign of f
    """
    if f.is_zero:
        raise InvalidParameterError("content of the zero form")
    content = math.gcd(*f.coeffs)
    return content, BinaryForm(tuple(c // content for c in f.coeffs))


def _coprime_mod_prime(f: List[int], g: List[int]) -> bool:
    """True when gcd(f, g) mod p is constant for a prime not dividing both leading coefficients."""
    for p in _GCD_PRIMES:
        if f[0] % p == 0 or g[0] % p == 0:
            continue
        fp = gf_from_int_poly(f, p)
        gp = gf_from_int_poly(g, p)
        return gf_degree(gf_gcd(fp, gp, p, ZZ)) == 0
    return False


def _univariate_gcd(f: List[int], g: List[int]) -> List[int]:
    """Primitive gcd over Q[t] of two nonzero high-first integer polynomials."""
    if len(f) == 1 or len(g) == 1:
        return [1]
    if _coprime_mod_prime(f, g):
        return [1]
    h, _, _ = dup_rr_prs_gcd(_zz(f), _zz(g), ZZ)
    h = [int(c) for c in h]
    content = math.gcd(*h)
    h = [c // content for c in h]
    if h[0] < 0:
        h = [-c for c in h]
    return h


def form_gcd(f: BinaryForm, g: BinaryForm) -> BinaryForm:
    """
    Primitive common factor of maximal degree, leading coefficient positive.

    The t2-power is split off first; the rest is the univariate gcd of the
    dehomogenizations (subresultant PRS), re-homogenized.
    """
    if f.is_zero or g.is_zero:
        raise InvalidParameterError("gcd with the zero form")
    r = min(f.t2_power, g.t2_power)
    h = _univariate_gcd(f.dehomogenize(), g.dehomogenize())
    return BinaryForm.from_dup(h, r + len(h) - 1)


# =============================================================================
# resultants
# =============================================================================

def _univariate_resultant(f: List[int], g: List[int]) -> int:
    """Res(f, g) of high-first integer polynomials at their actual degrees."""
    m, n = len(f) - 1, len(g) - 1
    if m == 0:
        return f[0] ** n
    if n == 0:
        return g[0] ** m
    if m < n:
        sign = -1 if (m * n) % 2 else 1
        return sign * _univariate_resultant(g, f)
    return int(dup_resultant(_zz(f), _zz(g), ZZ))


@lru_cache(maxsize=64)
def _pair_resultant(a: BinaryForm, b: BinaryForm) -> int:
    d = a.degree
    e_a, e_b = a.t1_degree, b.t1_degree
    if e_a < d and e_b < d:
        return 0
    res = _univariate_resultant(a.dehomogenize(), b.dehomogenize())
    if e_b < d:
        return a.leading_coefficient ** (d - e_b) * res
    if e_a < d:
        sign = -1 if (d * (d - e_a)) % 2 else 1
        return sign * b.leading_coefficient ** (d - e_a) * res
    return res


def resultant(pair: BinaryFormPair) -> int:
    """
    Res_{d,d}(A, B): the Sylvester determinant of the full coefficient vectors.

    Computed through the univariate subresultant PRS of the
    dehomogenizations; a drop in t1-degree contributes a power of the other
    form's leading coefficient (and a sign when A drops).
    """
    if pair.degree < 1:
        raise InvalidParameterError("resultant needs degree >= 1")
    logger.debug(f"Resultant of degree {pair.degree} pair ({pair.max_coefficient_bits} bits)")
    return _pair_resultant(pair.a, pair.b)


def sylvester_matrix(pair: BinaryFormPair) -> List[List[int]]:
    """2d x 2d Sylvester matrix, rows of coefficients ordered c_d .. c_0."""
    d = pair.degree
    rows = []
    for form in (pair.a, pair.b):
        vector = list(reversed(form.coeffs))
        for i in range(d):
            rows.append([0] * i + vector + [0] * (d - 1 - i))
    return rows


def sylvester_determinant(pair: BinaryFormPair) -> int:
    """Fraction-free (Bareiss) determinant; slow, used as a cross-check."""
    return int(Matrix(sylvester_matrix(pair)).det(method='bareiss'))


# =============================================================================
# evaluation
# =============================================================================

def eval_exact(f: BinaryForm, t1, t2) -> Fraction:
    """Exact value of f at a rational point."""
    return Fraction(f.evaluate(to_rational(t1), to_rational(t2)))


def log_abs_rational(x: Fraction) -> float:
    """log|x| for a nonzero Fraction of any size."""
    return math.log(abs(x.numerator)) - math.log(x.denominator)


def _is_rational(value) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def _finite_lognorm(values: Sequence[Fraction], place: Place) -> LogAbs:
    nonzero = [x for x in values if x != 0]
    if not nonzero:
        return LogAbs(float('-inf'), place)
    lowest = min(
        int_valuation(x.numerator, place.prime) - int_valuation(x.denominator, place.prime)
        for x in nonzero
    )
    return LogAbs.finite(Fraction(-lowest), place)


def _archimedean_exact_lognorm(values: Sequence[Fraction]) -> float:
    nonzero = [x for x in values if x != 0]
    if not nonzero:
        return float('-inf')
    return max(log_abs_rational(x) for x in nonzero)


def _float_form_value(form: BinaryForm, u1: complex, u2: complex) -> Tuple[complex, int]:
    """Value of form / 2**shift at a point of max-norm 1."""
    scaled, shift = form.scaled_floats
    if abs(u2) >= abs(u1):
        w = u1 / u2
        value = np.polyval(scaled[::-1], w) * u2 ** form.degree
    else:
        w = u2 / u1
        value = np.polyval(scaled, w) * u1 ** form.degree
    return value, shift


def _mp_form_value(form: BinaryForm, u1, u2):
    coeffs = [mpmath.mpf(c) for c in form.coeffs]
    if abs(u2) >= abs(u1):
        return mpmath.polyval(coeffs[::-1], u1 / u2) * u2 ** form.degree
    return mpmath.polyval(coeffs, u2 / u1) * u1 ** form.degree


def eval_lognorm(pair: BinaryFormPair, point: Tuple, v: Place = ARCHIMEDEAN,
                 precision_digits: int = None) -> LogAbs:
    """
    log max(|A(point)|_v, |B(point)|_v).

    Rational points are evaluated exactly at every place. Complex points
    (archimedean only) are rescaled to unit max-norm, evaluated on scaled
    coefficients and shifted back by d*log||point||; above 16 digits the
    evaluation runs in mpmath at the requested precision.

    Args:
        pair: the form pair
        point: (t1, t2), not (0, 0)
        v: place
        precision_digits: working precision for complex points

    Returns:
        LogAbs (value -inf when the point is a common zero)
    """
    t1, t2 = point
    if t1 == 0 and t2 == 0:
        raise ValuationError("log-norm at the origin is undefined")

    if _is_rational(t1) and _is_rational(t2):
        values = [Fraction(x) for x in pair.evaluate(to_rational(t1), to_rational(t2))]
        if v.is_archimedean:
            return LogAbs(_archimedean_exact_lognorm(values), v)
        return _finite_lognorm(values, v)

    if not v.is_archimedean:
        raise InvalidParameterError("finite places need rational points")

    precision_digits = precision_digits or settings.DEFAULT_PRECISION_DIGITS
    d = pair.degree
    if precision_digits > settings.FLOAT_DIGITS:
        with mpmath.workdps(precision_digits):
            x1, x2 = mpmath.mpc(t1), mpmath.mpc(t2)
            norm = max(abs(x1), abs(x2))
            u1, u2 = x1 / norm, x2 / norm
            value = max(abs(_mp_form_value(pair.a, u1, u2)), abs(_mp_form_value(pair.b, u1, u2)))
            if value == 0:
                return LogAbs(float('-inf'), v)
            return LogAbs(float(mpmath.log(value) + d * mpmath.log(norm)), v)

    x1, x2 = complex(t1), complex(t2)
    norm = max(abs(x1), abs(x2))
    u1, u2 = x1 / norm, x2 / norm
    logs = []
    for form in (pair.a, pair.b):
        value, shift = _float_form_value(form, u1, u2)
        if value != 0:
            logs.append(math.log(abs(value)) + shift * math.log(2.0))
    if not logs:
        return LogAbs(float('-inf'), v)
    return LogAbs(max(logs) + d * math.log(norm), v)
