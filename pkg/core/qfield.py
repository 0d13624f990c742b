"""
Rational Places Module
======================
Exact arithmetic over Q and its places: valuations, absolute values,
the product formula and the logarithmic Weil height.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Union

from sympy import factorint, isprime, multiplicity, primerange

from core.errors import InvalidParameterError, ValuationError

logger = logging.getLogger(__name__)

Rational = Fraction
RationalLike = Union[int, Fraction, str]


def to_rational(x: RationalLike) -> Fraction:
    """Coerce ints, Fractions and "a/b" strings to a reduced Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise InvalidParameterError(f"not a rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rational(x)
    raise InvalidParameterError(f"not a rational: {x!r}")


def parse_rational(text: str) -> Fraction:
    """
    Parse "a/b" or "a" with an optional leading minus sign.

    The unicode minus sign is accepted; decimals and locale forms are not.
    """
    raw = text.strip().replace('−', '-')
    num, sep, den = raw.partition('/')
    try:
        numerator = int(num, 10)
        denominator = int(den, 10) if sep else 1
    except ValueError:
        raise InvalidParameterError(f"malformed rational: {text!r}") from None
    if denominator == 0:
        raise InvalidParameterError(f"zero denominator: {text!r}")
    return Fraction(numerator, denominator)


def format_rational(x: Fraction) -> str:
    """Print as "a/b", or "a" when the denominator is 1."""
    x = to_rational(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class Place:
    """The archimedean place (prime is None) or the p-adic place of Q."""
    prime: Optional[int] = None
    multiplicity: int = 1

    def __post_init__(self):
        if self.prime is not None:
            if not isinstance(self.prime, int) or self.prime < 2 or not isprime(self.prime):
                raise InvalidParameterError(f"place requires a prime, got {self.prime!r}")
        if self.multiplicity != 1:
            raise InvalidParameterError("N_v is 1 for every place of Q")

    @classmethod
    def archimedean(cls) -> 'Place':
        return cls(None)

    @classmethod
    def finite(cls, p: int) -> 'Place':
        return cls(int(p))

    @classmethod
    def from_label(cls, label: str) -> 'Place':
        """Inverse of `label`: "inf" or a decimal prime."""
        label = label.strip().lower()
        if label in ('inf', 'infinity', '∞'):
            return cls.archimedean()
        try:
            return cls.finite(int(label))
        except ValueError:
            raise InvalidParameterError(f"unknown place: {label!r}") from None

    @property
    def is_archimedean(self) -> bool:
        return self.prime is None

    @property
    def label(self) -> str:
        return 'inf' if self.prime is None else str(self.prime)

    @property
    def log_prime(self) -> float:
        if self.prime is None:
            raise InvalidParameterError("the archimedean place has no residue characteristic")
        return math.log(self.prime)

    def sort_key(self):
        return (0, 0) if self.prime is None else (1, self.prime)

    def __str__(self) -> str:
        return self.label


ARCHIMEDEAN = Place.archimedean()


@dataclass(frozen=True)
class LogAbs:
    """
    log|x|_v on the natural-log scale.

    At finite places `log_p_multiple` keeps the exact rational coefficient
    of log p, so sums stay exact; `value` is its float rendering.
    """
    value: float
    place: Place
    log_p_multiple: Optional[Fraction] = None

    @classmethod
    def finite(cls, multiple: Fraction, place: Place) -> 'LogAbs':
        multiple = Fraction(multiple)
        return cls(float(multiple) * place.log_prime, place, multiple)

    @property
    def is_exact(self) -> bool:
        return self.log_p_multiple is not None

    def __add__(self, other: 'LogAbs') -> 'LogAbs':
        if not isinstance(other, LogAbs) or other.place != self.place:
            return NotImplemented
        if self.is_exact and other.is_exact:
            return LogAbs.finite(self.log_p_multiple + other.log_p_multiple, self.place)
        return LogAbs(self.value + other.value, self.place)

    def to_dict(self) -> Dict:
        data = {'place': self.place.label, 'value': self.value}
        if self.is_exact:
            data['log_p_multiple'] = format_rational(self.log_p_multiple)
        return data


def int_valuation(n: int, p: int) -> int:
    """v_p of a nonzero integer."""
    if n == 0:
        raise ValuationError("valuation of zero undefined")
    return int(multiplicity(p, abs(n)))


def padic_val(x: RationalLike, p: int) -> int:
    """
    v_p(x) = v_p(numerator) - v_p(denominator).

    Raises:
        ValuationError: x is zero
        InvalidParameterError: p is not prime
    """
    x = to_rational(x)
    if x == 0:
        raise ValuationError("valuation of zero undefined")
    if not isprime(p):
        raise InvalidParameterError(f"{p} is not prime")
    return int_valuation(x.numerator, p) - int_valuation(x.denominator, p)


def log_abs(x: RationalLike, v: Place) -> LogAbs:
    """log|x|_v for nonzero rational x."""
    x = to_rational(x)
    if x == 0:
        raise ValuationError("valuation of zero undefined")
    if v.is_archimedean:
        return LogAbs(log_abs_int(x.numerator) - math.log(x.denominator), v)
    return LogAbs.finite(Fraction(-padic_val(x, v.prime)), v)


def log_abs_int(n: int) -> float:
    """Natural log of |n| for arbitrarily large integers."""
    if n == 0:
        raise ValuationError("valuation of zero undefined")
    return math.log(abs(n))


def support_places(x: RationalLike) -> List[Place]:
    """The archimedean place plus every prime with |x|_p != 1."""
    x = to_rational(x)
    if x == 0:
        raise ValuationError("valuation of zero undefined")
    primes = set(factorint(abs(x.numerator))) | set(factorint(x.denominator))
    primes.discard(1)
    return [ARCHIMEDEAN] + [Place.finite(p) for p in sorted(primes)]


@dataclass
class ProductFormulaCheck:
    """Formal sum of log|x|_v over all places, as coefficients of log p."""
    x: Fraction
    exponents: Dict[int, int]
    archimedean_coefficients: Dict[int, int]
    finite_coefficients: Dict[int, int]
    residual: Dict[int, int] = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.residual.values())

    def to_dict(self) -> Dict:
        return {
            'x': format_rational(self.x),
            'exponents': {str(p): e for p, e in sorted(self.exponents.items())},
            'residual': {str(p): c for p, c in sorted(self.residual.items())},
            'is_zero': self.is_zero,
        }


def product_formula_residual(x: RationalLike) -> ProductFormulaCheck:
    """
    Check sum_v log|x|_v = 0 by integer exponent bookkeeping.

    The archimedean term is decomposed through the factorization of |x|
    (verified by reconstructing |x| exactly); each finite term comes from
    an independent valuation. The residual is the coefficient of log p in
    the total and must vanish identically.
    """
    x = to_rational(x)
    if x == 0:
        raise ValuationError("valuation of zero undefined")

    exponents: Dict[int, int] = {}
    for p, e in factorint(abs(x.numerator)).items():
        exponents[p] = exponents.get(p, 0) + e
    for p, e in factorint(x.denominator).items():
        exponents[p] = exponents.get(p, 0) - e

    numerator, denominator = 1, 1
    for p, e in exponents.items():
        if e > 0:
            numerator *= p ** e
        else:
            denominator *= p ** (-e)
    if Fraction(numerator, denominator) != abs(x):
        raise ArithmeticError(f"factorization does not reconstruct {x}")

    archimedean = dict(exponents)
    finite = {p: -padic_val(x, p) for p in exponents}
    residual = {p: archimedean[p] + finite[p] for p in exponents}

    return ProductFormulaCheck(
        x=x,
        exponents=exponents,
        archimedean_coefficients=archimedean,
        finite_coefficients=finite,
        residual=residual,
    )


def weil_height(x: RationalLike) -> float:
    """h(a/b) = log max(|a|, |b|) in lowest terms; h(0) = 0."""
    x = to_rational(x)
    if x == 0:
        return 0.0
    return math.log(max(abs(x.numerator), x.denominator))


def primes_up_to(bound: int) -> List[int]:
    return list(primerange(2, int(bound) + 1))


def places_up_to(bound: int) -> List[Place]:
    """The archimedean place followed by the primes p <= bound."""
    return [ARCHIMEDEAN] + [Place.finite(p) for p in primes_up_to(bound)]


def strip_primes(n: int, primes: List[int]) -> int:
    """|n| with every prime in `primes` divided out."""
    n = abs(n)
    if n == 0:
        raise ValuationError("valuation of zero undefined")
    for p in primes:
        if n % p == 0:
            n //= p ** int_valuation(n, p)
    return n
