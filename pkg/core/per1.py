"""
Per1 Family Module
==================
The maps f_t(z) = lambda*z / (z^2 + t*z + 1) with critical points +1 and -1:
exact orbits, the reduced critical-orbit lifts F_n, and the polynomials whose
roots are the parameters with a periodic marked critical point.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from config import settings
from core.errors import DegenerateIterateError, InvalidParameterError, ResourceLimitError
from core.polyforms import (
    BinaryForm,
    BinaryFormPair,
    content_and_primitive,
    form_gcd,
    resultant,
)
from core.qfield import RationalLike, format_rational, to_rational, weil_height

logger = logging.getLogger(__name__)


class CriticalSign(Enum):
    """Marked critical point +1 or -1."""
    PLUS = 1
    MINUS = -1

    @property
    def symbol(self) -> str:
        return '+' if self is CriticalSign.PLUS else '-'

    @classmethod
    def parse(cls, text: Union[str, int, 'CriticalSign']) -> 'CriticalSign':
        if isinstance(text, CriticalSign):
            return text
        key = str(text).strip().lower().replace('−', '-')
        if key in ('+', '+1', '1', 'plus'):
            return cls.PLUS
        if key in ('-', '-1', 'minus'):
            return cls.MINUS
        raise InvalidParameterError(f"unknown critical sign: {text!r}")


class LiftVariant(Enum):
    """Homogeneous lift of the family; the first coordinate differs."""
    STANDARD = 'std'
    PAPER_LITERAL = 'paper-literal'


class OrbitStatus(Enum):
    PREPERIODIC = 'preperiodic'
    BUDGET_EXHAUSTED = 'budget-exhausted'
    HIT_POLE = 'hit-pole'


@dataclass(frozen=True)
class Lambda:
    """The multiplier; rational roots of unity are excluded."""
    value: Fraction

    def __post_init__(self):
        value = to_rational(self.value)
        if value in (0, 1, -1):
            raise InvalidParameterError(f"lambda = {value} is excluded (zero or a root of unity)")
        object.__setattr__(self, 'value', value)

    @classmethod
    def of(cls, value: Union['Lambda', RationalLike]) -> 'Lambda':
        return value if isinstance(value, Lambda) else cls(to_rational(value))

    @property
    def numerator(self) -> int:
        return self.value.numerator

    @property
    def denominator(self) -> int:
        return self.value.denominator

    @property
    def height_bound(self) -> int:
        """H(lambda) = max(|a|, b)."""
        return max(abs(self.numerator), self.denominator)

    def label(self) -> str:
        return f"{self.numerator}/{self.denominator}"

    def __str__(self) -> str:
        return format_rational(self.value)


class _Pole:
    """The point at infinity of an orbit."""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return '∞'


POLE = _Pole()
OrbitPoint = Union[Fraction, _Pole]


def f_apply(lam: Union[Lambda, RationalLike], t: RationalLike, z: OrbitPoint) -> OrbitPoint:
    """
    f_t(z) = lambda*z / (z^2 + t*z + 1), exactly.

    Returns POLE where the denominator vanishes; f_t(POLE) = 0.
    """
    lam = Lambda.of(lam)
    if z is POLE:
        return Fraction(0)
    t, z = to_rational(t), to_rational(z)
    denominator = z * z + t * z + 1
    if denominator == 0:
        return POLE
    return lam.value * z / denominator


@dataclass
class OrbitReport:
    """Exact forward orbit of a marked critical point."""
    points: List[OrbitPoint]
    status: OrbitStatus
    tail: Optional[int] = None
    period: Optional[int] = None
    height_blowup: bool = False

    @property
    def is_preperiodic(self) -> bool:
        return self.status is OrbitStatus.PREPERIODIC

    def to_dict(self) -> Dict:
        return {
            'points': ['inf' if z is POLE else format_rational(z) for z in self.points],
            'status': self.status.value,
            'tail': self.tail,
            'period': self.period,
            'height_blowup': self.height_blowup,
        }


def critical_orbit(lam, t: RationalLike, s: CriticalSign, budget: int,
                   through_poles: bool = True, height_bound: float = None) -> OrbitReport:
    """
    Iterate f_t from s*1 with exact cycle detection.

    Args:
        lam: multiplier
        t: parameter
        s: marked critical point
        budget: maximal number of iterations (>= 1)
        through_poles: continue through infinity instead of stopping
        height_bound: H0 of the blowup filter (default from settings)

    Returns:
        OrbitReport; BUDGET_EXHAUSTED with height_blowup set when
        h(z_n) > H0 + n*log(4)
    """
    if budget < 1:
        raise InvalidParameterError("orbit budget must be >= 1")
    lam = Lambda.of(lam)
    s = CriticalSign.parse(s)
    t = to_rational(t)
    h0 = settings.ORBIT_HEIGHT_BOUND if height_bound is None else height_bound

    z: OrbitPoint = Fraction(s.value)
    points: List[OrbitPoint] = [z]
    seen: Dict[OrbitPoint, int] = {z: 0}

    for n in range(1, budget + 1):
        z = f_apply(lam, t, z)
        points.append(z)
        if z is POLE and not through_poles:
            return OrbitReport(points, OrbitStatus.HIT_POLE)
        if z in seen:
            tail = seen[z]
            return OrbitReport(points, OrbitStatus.PREPERIODIC, tail=tail, period=n - tail)
        seen[z] = n
        if z is not POLE and weil_height(z) > h0 + n * math.log(4):
            logger.debug(f"Orbit of {s.symbol}1 at t={t} escaped the height bound at step {n}")
            return OrbitReport(points, OrbitStatus.BUDGET_EXHAUSTED, height_blowup=True)

    return OrbitReport(points, OrbitStatus.BUDGET_EXHAUSTED)


# =============================================================================
# HOMOGENEOUS LIFTS
# =============================================================================

def lift_step(lam: Lambda, pair: BinaryFormPair, lift: LiftVariant = LiftVariant.STANDARD) -> BinaryFormPair:
    """
    Apply the lift of the family to a pair (A, B), before any reduction.

    std:            (la*t2*A*B,  lb*(t2*A^2 + t1*A*B + t2*B^2))
    paper-literal:  (la*t2*A^2,  same second coordinate)
    where lambda = la/lb.
    """
    a, b = pair.a, pair.b
    ab = a * b
    aa = a * a
    if lift is LiftVariant.STANDARD:
        first = ab.times_t2().scale(lam.numerator)
    else:
        first = aa.times_t2().scale(lam.numerator)
    second = (aa.times_t2() + ab.times_t1() + (b * b).times_t2()).scale(lam.denominator)
    return BinaryFormPair(first, second)


def specialized_lift(lam, t: RationalLike, lift: LiftVariant = LiftVariant.STANDARD) -> BinaryFormPair:
    """
    Integer lift of the single map f_t, as a degree-2 pair in (z1, z2).

    The family lift at (t1, t2) = (a, b) with t = a/b, divided by its content.
    """
    lam = Lambda.of(lam)
    t = to_rational(t)
    a, b = t.numerator, t.denominator
    la, lb = lam.numerator, lam.denominator
    if lift is LiftVariant.STANDARD:
        first = (0, la * b, 0)
    else:
        first = (0, 0, la * b)
    second = (lb * b, lb * a, lb * b)
    content = math.gcd(*(first + second))
    return BinaryFormPair.from_coeffs([c // content for c in first], [c // content for c in second])


@dataclass(frozen=True)
class FnEntry:
    """One reduced iterate F_n with the factors removed to reach it."""
    n: int
    pair: BinaryFormPair
    removed_gcd: BinaryForm
    content: int

    @property
    def degree(self) -> int:
        return self.pair.degree

    @cached_property
    def resultant(self) -> int:
        start = time.time()
        value = resultant(self.pair)
        logger.info(f"Res(F_{self.n}) computed: degree {self.degree}, "
                    f"{abs(value).bit_length()} bits in {time.time() - start:.1f}s")
        if value == 0:
            raise DegenerateIterateError(f"degenerate iterate: Res(F_{self.n}) = 0")
        return value

    def to_lines(self) -> List[str]:
        """Form pair block followed by the removed-factor block."""
        lines = self.pair.to_text().rstrip('\n').split('\n')
        lines.append(f"GCD deg={self.removed_gcd.degree} content={self.content}")
        lines.append(' '.join(str(c) for c in self.removed_gcd.coeffs))
        return lines


@dataclass
class FnSequence:
    """Reduced lifts F_1..F_n of the orbit of the marked critical point."""
    lam: Lambda
    sign: CriticalSign
    lift: LiftVariant
    entries: List[FnEntry] = field(default_factory=list)

    @property
    def n_max(self) -> int:
        return len(self.entries)

    def entry(self, n: int) -> FnEntry:
        if not 1 <= n <= self.n_max:
            raise InvalidParameterError(f"F_{n} not available (depth {self.n_max})")
        return self.entries[n - 1]

    def degrees(self) -> List[int]:
        return [e.degree for e in self.entries]

    def truncated(self, n_max: int) -> 'FnSequence':
        return FnSequence(self.lam, self.sign, self.lift, self.entries[:n_max])

    def check_degree_law(self) -> bool:
        """d_n = 2*d_(n-1) + 1 - deg g_n at every step (d_0 = 0)."""
        previous = 0
        for e in self.entries:
            if e.degree != 2 * previous + 1 - e.removed_gcd.degree:
                return False
            previous = e.degree
        return True


def reduce_step(unreduced: BinaryFormPair) -> Tuple[BinaryFormPair, BinaryForm, int]:
    """Remove joint integer content, then the form gcd."""
    content = unreduced.joint_content()
    a = BinaryForm(tuple(c // content for c in unreduced.a.coeffs))
    b = BinaryForm(tuple(c // content for c in unreduced.b.coeffs))
    g = form_gcd(a, b)
    if g.degree > 0:
        a = a.exact_divide(g)
        b = b.exact_divide(g)
    return BinaryFormPair(a, b), g, content


def _next_entry(lam: Lambda, lift: LiftVariant, previous: BinaryFormPair, n: int) -> FnEntry:
    start = time.time()
    pair, g, content = reduce_step(lift_step(lam, previous, lift))
    bits = pair.max_coefficient_bits
    if bits > settings.MAX_COEFF_BITS:
        raise ResourceLimitError(f"F_{n} coefficients reach {bits} bits (guard {settings.MAX_COEFF_BITS})")
    logger.info(f"F_{n}: degree {pair.degree}, removed gcd degree {g.degree}, "
                f"content {content}, {bits} bits, {time.time() - start:.2f}s")
    return FnEntry(n=n, pair=pair, removed_gcd=g, content=content)


# In-process store of built sequences keyed by (lambda, sign, lift)
_sequences: Dict[Tuple[Fraction, CriticalSign, LiftVariant], FnSequence] = {}


def build_Fn(lam, s: CriticalSign, n_max: int, lift: LiftVariant = LiftVariant.STANDARD,
             cache=None) -> FnSequence:
    """
    Build F_1..F_{n_max} starting from the constant pair (s, 1).

    Args:
        lam: multiplier
        s: marked critical point
        n_max: depth, 1 <= n_max <= settings.N_MAX_CAP
        lift: homogeneous lift variant
        cache: optional store with load(lam, sign, lift, n) / store(lam, sign, lift, entry)

    Returns:
        FnSequence with n_max entries
    """
    lam = Lambda.of(lam)
    s = CriticalSign.parse(s)
    lift = LiftVariant(lift)
    if not 1 <= n_max <= settings.N_MAX_CAP:
        raise ResourceLimitError(f"n_max must lie in [1, {settings.N_MAX_CAP}], got {n_max}")

    key = (lam.value, s, lift)
    sequence = _sequences.get(key)
    if sequence is None:
        sequence = FnSequence(lam, s, lift)
        _sequences[key] = sequence

    previous = (sequence.entries[-1].pair if sequence.entries
                else BinaryFormPair.from_coeffs([s.value], [1]))
    for n in range(sequence.n_max + 1, n_max + 1):
        entry = cache.load(lam, s, lift, n) if cache is not None else None
        if entry is None:
            entry = _next_entry(lam, lift, previous, n)
            if cache is not None:
                cache.store(lam, s, lift, entry)
        sequence.entries.append(entry)
        previous = entry.pair

    return sequence.truncated(n_max)


def clear_fn_store():
    """Drop every in-process sequence."""
    _sequences.clear()


def periodic_parameter_poly(lam, s: CriticalSign, n: int,
                            lift: LiftVariant = LiftVariant.STANDARD, cache=None) -> Tuple[int, ...]:
    """
    P_n(t): primitive part of A_n(t,1) - s*B_n(t,1), leading coefficient positive.

    Coefficients are returned low to high. Its roots are the parameters
    where f_t^n(s) = s.
    """
    if n < 1:
        raise InvalidParameterError("level must be >= 1")
    s = CriticalSign.parse(s)
    pair = build_Fn(lam, s, n, lift, cache).entry(n).pair
    difference = pair.a - pair.b.scale(s.value)
    if difference.is_zero:
        raise DegenerateIterateError(f"P_{n} vanishes identically")
    _, primitive = content_and_primitive(difference)
    coeffs = list(reversed(primitive.dehomogenize()))
    if coeffs[-1] < 0:
        coeffs = [-c for c in coeffs]
    return tuple(coeffs)


@dataclass
class ParameterSet:
    """Roots of P_n with their certified residuals."""
    level: int
    lam: Lambda
    sign: CriticalSign
    poly: Tuple[int, ...]
    roots: np.ndarray
    residuals: np.ndarray
    eps_root: float

    @property
    def degree(self) -> int:
        return len(self.poly) - 1

    def __len__(self) -> int:
        return len(self.roots)

    def sorted_order(self) -> np.ndarray:
        """Indices sorting the roots lexicographically by (re, im)."""
        return np.lexsort((self.roots.imag, self.roots.real))

    def to_dict(self) -> Dict:
        order = self.sorted_order()
        return {
            'level': self.level,
            'lambda': str(self.lam),
            'sign': self.sign.symbol,
            'degree': self.degree,
            'eps_root': self.eps_root,
            'roots': [[float(self.roots[i].real), float(self.roots[i].imag)] for i in order],
            'max_residual': float(self.residuals.max()) if len(self.residuals) else 0.0,
        }
