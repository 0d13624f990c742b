"""
Potentials Module
=================
Local potential theory of the critical-orbit measures mu_v^+ and mu_v^-:
escape rates, the gamma_v series, capacities from resultants, radii,
Arakelov-Green kernels, discrete energies and the averaged-measure
constant L.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sympy.ntheory import n_order

from config import settings
from core.errors import DegenerateIterateError, InvalidParameterError
from core.per1 import (
    CriticalSign,
    FnSequence,
    Lambda,
    LiftVariant,
    ParameterSet,
    build_Fn,
    periodic_parameter_poly,
)
from core.polyforms import BinaryForm, eval_lognorm, log_abs_rational
from core.qfield import (
    ARCHIMEDEAN,
    LogAbs,
    Place,
    format_rational,
    int_valuation,
    padic_val,
    places_up_to,
    to_rational,
)
from core.roots import complex_roots

logger = logging.getLogger(__name__)


class ProvenanceTag(Enum):
    """Where a value's error bar comes from."""
    EXACT = 'exact'
    SERIES_TAIL = 'series-tail'
    STABILIZED = 'stabilized-valuation'
    EXTRAPOLATED = 'extrapolated'
    GRID = 'grid-scan'
    SAMPLED = 'sampled'
    ARCHIMEDEAN_EVIDENCE = 'archimedean-only lower-bound evidence'


class EscapeMode(Enum):
    """log of the iterate norm, with or without the clamp at 0."""
    LOG_PLAIN = 'log-plain'
    LOG_PLUS = 'log-plus'


@dataclass(frozen=True)
class PotentialValue:
    """
    A real value with a nonnegative error.

    At finite places `log_p_multiple` keeps value / log p exactly.
    """
    value: float
    error: float = 0.0
    tag: ProvenanceTag = ProvenanceTag.EXACT
    log_p_multiple: Optional[Fraction] = None

    def __post_init__(self):
        if not self.error >= 0:
            raise InvalidParameterError(f"error must be nonnegative, got {self.error}")

    @property
    def lower(self) -> float:
        return self.value - self.error

    @property
    def upper(self) -> float:
        return self.value + self.error

    def agrees_with(self, other: 'PotentialValue', slack: float = 0.0) -> bool:
        return abs(self.value - other.value) <= self.error + other.error + slack

    def to_dict(self) -> Dict:
        return {'value': self.value, 'error': self.error, 'tag': self.tag.value}


@dataclass(frozen=True)
class MeasureSpec:
    """
    A convex combination of mu^+ and mu^-, or the reference measure.

    The reference measure (no lambda, no weights) has potential
    log max(|x1|, |x2|).
    """
    lam: Optional[Lambda] = None
    weights: Tuple[Tuple[CriticalSign, Fraction], ...] = ()

    def __post_init__(self):
        if self.lam is None:
            if self.weights:
                raise InvalidParameterError("the reference measure takes no weights")
            return
        signs = [s for s, _ in self.weights]
        if len(set(signs)) != len(signs):
            raise InvalidParameterError("a sign appears twice in the weights")
        weights = tuple((CriticalSign.parse(s), Fraction(w)) for s, w in self.weights)
        if any(w < 0 for _, w in weights):
            raise InvalidParameterError("weights must be nonnegative")
        if sum(w for _, w in weights) != 1:
            raise InvalidParameterError("weights must sum to 1 exactly")
        object.__setattr__(self, 'weights', weights)

    @classmethod
    def pure(cls, lam, s: CriticalSign) -> 'MeasureSpec':
        return cls(Lambda.of(lam), ((CriticalSign.parse(s), Fraction(1)),))

    @classmethod
    def average(cls, lam) -> 'MeasureSpec':
        half = Fraction(1, 2)
        return cls(Lambda.of(lam), ((CriticalSign.PLUS, half), (CriticalSign.MINUS, half)))

    @classmethod
    def from_weights(cls, lam, plus, minus) -> 'MeasureSpec':
        return cls(Lambda.of(lam), ((CriticalSign.PLUS, to_rational(plus)),
                                    (CriticalSign.MINUS, to_rational(minus))))

    @classmethod
    def reference(cls) -> 'MeasureSpec':
        return cls()

    @property
    def is_reference(self) -> bool:
        return self.lam is None

    @property
    def active(self) -> List[Tuple[CriticalSign, Fraction]]:
        return [(s, w) for s, w in self.weights if w > 0]

    @property
    def is_mixed(self) -> bool:
        return len(self.active) > 1

    def weight(self, s: CriticalSign) -> Fraction:
        return dict(self.weights).get(CriticalSign.parse(s), Fraction(0))

    def label(self) -> str:
        if self.is_reference:
            return 'reference'
        return ' + '.join(f"{format_rational(w)}*mu{s.symbol}" for s, w in self.active)


@dataclass
class CapacitySequence:
    """c_n = |Res(F_n)|_v^(-1/d_n^2) along the computed levels."""
    place: Place
    sign: CriticalSign
    levels: List[int]
    log_capacities: List[float]
    log_p_multiples: List[Optional[Fraction]] = field(default_factory=list)

    @property
    def capacities(self) -> List[float]:
        return [math.exp(c) for c in self.log_capacities]

    @property
    def log_value(self) -> PotentialValue:
        last = self.log_capacities[-1]
        error = abs(last - self.log_capacities[-2]) if len(self.log_capacities) > 1 else abs(last)
        multiple = self.log_p_multiples[-1] if self.log_p_multiples else None
        return PotentialValue(last, error, ProvenanceTag.STABILIZED, multiple)

    @property
    def value(self) -> PotentialValue:
        caps = self.capacities
        error = abs(caps[-1] - caps[-2]) if len(caps) > 1 else caps[-1]
        return PotentialValue(caps[-1], error, ProvenanceTag.STABILIZED)

    def to_dict(self) -> Dict:
        return {
            'place': self.place.label,
            'sign': self.sign.symbol,
            'levels': self.levels,
            'capacities': self.capacities,
            'capacity': self.value.to_dict(),
        }


@dataclass
class RadiiReport:
    """
    Radii of M_v = {G_v <= 0} on the unit max-norm sphere.

    r_in <= sqrt(cap) <= r_out; the normalized radii divide by sqrt(cap).
    """
    place: Place
    sign: CriticalSign
    r_in: float
    r_out: float
    capacity: PotentialValue
    error: float = 0.0
    method: str = 'grid'
    grid: Optional[int] = None
    n_max: Optional[int] = None

    @property
    def sqrt_capacity(self) -> float:
        return math.sqrt(self.capacity.value)

    @property
    def normalized_r_in(self) -> float:
        return self.r_in / self.sqrt_capacity

    @property
    def normalized_r_out(self) -> float:
        return self.r_out / self.sqrt_capacity

    def sandwich_holds(self) -> bool:
        """r_in <= sqrt(cap) <= r_out, with the capacity error folded in."""
        low = math.sqrt(max(self.capacity.value - self.capacity.error, 0.0))
        high = math.sqrt(self.capacity.value + self.capacity.error)
        return self.r_in <= high and low <= self.r_out

    def to_dict(self) -> Dict:
        return {
            'place': self.place.label,
            'sign': self.sign.symbol,
            'method': self.method,
            'grid': self.grid,
            'n_max': self.n_max,
            'r_in': self.r_in,
            'r_out': self.r_out,
            'normalized_r_in': self.normalized_r_in,
            'normalized_r_out': self.normalized_r_out,
            'log_error': self.error,
            'capacity': self.capacity.to_dict(),
            'sandwich_holds': self.sandwich_holds(),
        }


@dataclass
class WitnessReport:
    """Evidence that mu_p is not the Gauss measure at one prime."""
    prime: int
    gamma: PotentialValue
    potential_at_zero: PotentialValue
    first_index: Optional[int]
    expected_index: Optional[int]
    differs: bool

    def to_dict(self) -> Dict:
        return {
            'prime': self.prime,
            'G(1,0)': self.gamma.to_dict(),
            'G(0,1)': self.potential_at_zero.to_dict(),
            'first_index': self.first_index,
            'expected_index': self.expected_index,
            'differs': self.differs,
        }


# =============================================================================
# gamma_v(lambda)
# =============================================================================

def gamma_tail_bound(lam: Lambda, n: int) -> float:
    """Bound on the gamma series after n terms: 1/2 (1 + log H) (n + 2) 2^-n."""
    return 0.5 * (1.0 + math.log(lam.height_bound)) * (n + 2) * 2.0 ** (-n)


def escape_tail_envelope(lam: Lambda, n: int) -> float:
    """Envelope on the remaining escape-rate increments after level n."""
    return (1.0 + math.log(lam.height_bound)) * 2.0 * n * 2.0 ** (-n)


def gamma_series(lam, v: Place, tol: float = None) -> PotentialValue:
    """
    gamma_v(lambda) = 1/2 sum_{i>=1} 2^-i log|1 + lambda + ... + lambda^i|_v.

    Exact when |lambda|_p != 1. Otherwise the partial sum is taken to at
    least p terms (so a full period of lambda mod p is included) and until
    the tail bound drops below tol.

    Args:
        lam: multiplier
        v: place
        tol: target tail bound

    Returns:
        PotentialValue (SERIES_TAIL, or EXACT)
    """
    tol = settings.DEFAULT_TOL if tol is None else tol
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    lam = Lambda.of(lam)

    if not v.is_archimedean:
        vp = padic_val(lam.value, v.prime)
        if vp > 0:
            return PotentialValue(0.0, 0.0, ProvenanceTag.EXACT, Fraction(0))
        if vp < 0:
            # v_p(S_i) = i * v_p(lambda) and sum i 2^-i = 2
            multiple = Fraction(-vp)
            return PotentialValue(float(multiple) * v.log_prime, 0.0, ProvenanceTag.EXACT, multiple)

    n_terms = 1
    while gamma_tail_bound(lam, n_terms) > tol:
        n_terms += 1
    if not v.is_archimedean:
        n_terms = max(n_terms, v.prime)

    partial = Fraction(1)
    power = Fraction(1)
    total = 0.0
    multiple = Fraction(0)
    for i in range(1, n_terms + 1):
        power *= lam.value
        partial += power
        if v.is_archimedean:
            total += 0.5 * 2.0 ** (-i) * log_abs_rational(partial)
        else:
            multiple -= Fraction(padic_val(partial, v.prime), 2 ** (i + 1))

    if not v.is_archimedean:
        total = float(multiple) * v.log_prime
    return PotentialValue(total, gamma_tail_bound(lam, n_terms), ProvenanceTag.SERIES_TAIL)


def gamma_table(lam, prime_bound: int = None, tol: float = None) -> pd.DataFrame:
    """gamma_v(lambda) for v = inf and every prime up to the bound."""
    prime_bound = prime_bound or settings.DEFAULT_PRIME_BOUND
    rows = []
    for v in places_up_to(prime_bound):
        g = gamma_series(lam, v, tol)
        rows.append({'place': v.label, 'value': g.value, 'error': g.error, 'tag': g.tag.value})
    return pd.DataFrame(rows, columns=['place', 'value', 'error', 'tag'])


# =============================================================================
# HELPERS
# =============================================================================

def _is_rational_point(point) -> bool:
    return all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for x in point)


def _point_key(point) -> Tuple:
    if _is_rational_point(point):
        return tuple(to_rational(x) for x in point)
    return tuple(complex(x) for x in point)


def point_lognorm(point, v: Place) -> LogAbs:
    """log max(|x1|_v, |x2|_v) of a lift."""
    x1, x2 = point
    if x1 == 0 and x2 == 0:
        raise InvalidParameterError("the origin has no projective class")
    if _is_rational_point(point):
        values = [to_rational(x) for x in point if x != 0]
        if v.is_archimedean:
            return LogAbs(max(log_abs_rational(x) for x in values), v)
        lowest = min(padic_val(x, v.prime) for x in values)
        return LogAbs.finite(Fraction(-lowest), v)
    if not v.is_archimedean:
        raise InvalidParameterError("finite places need rational points")
    return LogAbs(math.log(max(abs(complex(x1)), abs(complex(x2)))), v)


def _form_values(form: BinaryForm, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    d = form.degree
    acc = np.zeros_like(x1)
    for k, c in enumerate(form.coeffs):
        if c:
            acc = acc + float(c) * x1 ** k * x2 ** (d - k)
    return acc


def _apply_mode(log_value: float, multiple: Optional[Fraction], degree: int,
                mode: EscapeMode) -> Tuple[float, Optional[Fraction]]:
    if mode is EscapeMode.LOG_PLUS:
        log_value = max(0.0, log_value)
        if multiple is not None:
            multiple = max(Fraction(0), multiple)
    return log_value / degree, (multiple / degree if multiple is not None else None)


def _weighted_energy(t: np.ndarray, omega: np.ndarray, potential: np.ndarray) -> float:
    """
    1/2 sum_{i != j} w_i w_j g(t_i, t_j) / (1 - sum of excluded weights).

    Coincident points are treated as diagonal.
    """
    diff = np.abs(t[:, None] - t[None, :])
    scale = np.maximum(1.0, np.abs(t))
    coincident = diff <= 1e-9 * scale[:, None]
    weights = np.outer(omega, omega)
    with np.errstate(divide='ignore'):
        kernel = -np.log(np.where(coincident, 1.0, diff)) + potential[:, None] + potential[None, :]
    excluded = weights[coincident].sum()
    if excluded >= 1.0:
        return 0.0
    return 0.5 * float((np.where(coincident, 0.0, weights * kernel)).sum()) / (1.0 - excluded)


def _diagonal_share(omega: np.ndarray, owner: np.ndarray) -> float:
    """
    Diagonal term the discrete energy misses, for evenly spread points.

    N points of weight w/N at the roots of unity miss w^2 log N / (2N)
    each; the share is renormalized like `_weighted_energy`.
    """
    share, excluded = 0.0, float((omega ** 2).sum())
    if excluded >= 1.0:
        return 0.0
    for label in np.unique(owner):
        mask = (owner == label) & (omega > 0)
        size = int(mask.sum())
        if size > 1:
            weight = float(omega[mask].sum())
            share += weight * weight * math.log(size) / (2.0 * size)
    return share / (1.0 - excluded)


# =============================================================================
# CALCULATOR
# =============================================================================

class PotentialCalculator:
    """
    Evaluates potentials of mu_v^+ and mu_v^- from the iterates F_n.

    Rational points are evaluated exactly at every place. Complex points
    at the archimedean place follow the renormalized orbit of the map,
    F_n(x) = Phi_x(F_(n-1)(x)) / (c_n g_n(x)), which avoids evaluating the
    high degree forms directly.
    """

    def __init__(self, lift: str = None, escape: str = None, n_max: int = None,
                 cache=None, precision_digits: int = None):
        self.lift = LiftVariant(lift or settings.DEFAULT_LIFT)
        self.escape = EscapeMode(escape or settings.DEFAULT_ESCAPE)
        self.n_max = n_max or settings.DEFAULT_N_MAX
        self.cache = cache
        self.precision_digits = precision_digits or settings.DEFAULT_PRECISION_DIGITS
        self._levels_memo: Dict[Tuple, Dict[int, LogAbs]] = {}
        self._proxy_memo: Dict[Tuple, np.ndarray] = {}

        logger.info(f"PotentialCalculator initialized (lift={self.lift.value}, "
                    f"escape={self.escape.value}, n_max={self.n_max})")

    def sequence(self, lam, s: CriticalSign, n_max: int = None) -> FnSequence:
        return build_Fn(lam, s, n_max or self.n_max, self.lift, self.cache)

    # -------------------------------------------------------------------------
    # level log-norms
    # -------------------------------------------------------------------------

    def _phi(self, la: float, lb: float, x1, x2, u1, u2):
        second = lb * (x2 * u1 * u1 + x1 * u1 * u2 + x2 * u2 * u2)
        if self.lift is LiftVariant.STANDARD:
            return la * x2 * u1 * u2, second
        return la * x2 * u1 * u1, second

    def iterate_lognorms(self, lam, s: CriticalSign, points, n_max: int = None) -> np.ndarray:
        """
        log||F_k(x)|| for k = 1..n_max at complex points, archimedean place.

        Args:
            points: array of shape (M, 2) of lifts (x1, x2)

        Returns:
            array of shape (n_max, M)
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        n_max = n_max or self.n_max
        seq = self.sequence(lam, s, n_max)
        pts = np.asarray(points, dtype=complex).reshape(-1, 2)
        x1, x2 = pts[:, 0], pts[:, 1]
        la, lb = float(lam.numerator), float(lam.denominator)

        u1 = np.full(len(pts), float(s.value), dtype=complex)
        u2 = np.ones(len(pts), dtype=complex)
        logs = np.zeros(len(pts))
        out = np.empty((n_max, len(pts)))
        with np.errstate(all='ignore'):
            for k, entry in enumerate(seq.entries, start=1):
                w1, w2 = self._phi(la, lb, x1, x2, u1, u2)
                norm = np.maximum(np.abs(w1), np.abs(w2))
                divisor = np.abs(_form_values(entry.removed_gcd, x1, x2))
                logs = 2.0 * logs + np.log(norm) - np.log(divisor) - math.log(entry.content)
                u1, u2 = w1 / norm, w2 / norm
                out[k - 1] = logs

        bad = np.flatnonzero(~np.all(np.isfinite(out), axis=0))
        if len(bad):
            logger.debug(f"{len(bad)} degenerate orbit points, evaluating F_k directly")
        for j in bad:
            out[:, j] = self._direct_lognorms(seq, complex(x1[j]), complex(x2[j]))
        return out

    def _direct_lognorms(self, seq: FnSequence, x1: complex, x2: complex) -> np.ndarray:
        values = np.empty(seq.n_max)
        for k, entry in enumerate(seq.entries):
            if x2 == 0:
                value = eval_lognorm(entry.pair, (1, 0)).value + entry.degree * math.log(abs(x1))
            elif x1 == 0:
                value = eval_lognorm(entry.pair, (0, 1)).value + entry.degree * math.log(abs(x2))
            else:
                digits = max(self.precision_digits, 2 * settings.FLOAT_DIGITS)
                value = eval_lognorm(entry.pair, (x1, x2), ARCHIMEDEAN, digits).value
            if value == float('-inf'):
                raise DegenerateIterateError(f"({x1}, {x2}) is a common zero of F_{entry.n}")
            values[k] = value
        return values

    def _level_logs(self, lam: Lambda, s: CriticalSign, v: Place, point, n: int) -> Dict[int, LogAbs]:
        """log||F_k(point)||_v for k in {n-1, n}."""
        key = (lam.value, s, self.lift, v, _point_key(point), n)
        if key in self._levels_memo:
            return self._levels_memo[key]

        seq = self.sequence(lam, s, n)
        levels = [k for k in (n - 1, n) if k >= 1]
        logs: Dict[int, LogAbs] = {}
        exact = _is_rational_point(point) or self.precision_digits > settings.FLOAT_DIGITS
        if exact or not v.is_archimedean:
            for k in levels:
                value = eval_lognorm(seq.entry(k).pair, point, v, self.precision_digits)
                if value.value == float('-inf'):
                    raise DegenerateIterateError(f"{point} is a common zero of F_{k}")
                logs[k] = value
        else:
            values = self.iterate_lognorms(lam, s, [point], n)[:, 0]
            for k in levels:
                logs[k] = LogAbs(float(values[k - 1]), v)

        self._levels_memo[key] = logs
        return logs

    def _escape_levels(self, lam: Lambda, s: CriticalSign, v: Place, point, n: int,
                       mode: EscapeMode) -> Dict[int, Tuple[float, Optional[Fraction]]]:
        seq = self.sequence(lam, s, n)
        logs = self._level_logs(lam, s, v, point, n)
        return {k: _apply_mode(value.value, value.log_p_multiple, seq.entry(k).degree, mode)
                for k, value in logs.items()}

    # -------------------------------------------------------------------------
    # escape rates and capacities
    # -------------------------------------------------------------------------

    def escape_rate(self, lam, s: CriticalSign, v: Place, point, n_max: int = None,
                    escape: str = None, envelope: bool = True) -> PotentialValue:
        """
        G_v^s(point) ~ log||F_n(point)||_v / d_n at n = n_max.

        Error: |value(n) - value(n-1)| plus, when `envelope` is set, the
        envelope of the remaining increments. Not a certified bound.
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        if point[0] == 0 and point[1] == 0:
            raise InvalidParameterError("escape rate at (0, 0) is undefined")
        n = n_max or self.n_max
        mode = EscapeMode(escape) if escape else self.escape

        levels = self._escape_levels(lam, s, v, point, n, mode)
        value, multiple = levels[n]
        error = abs(value - levels[n - 1][0]) if n > 1 else 0.0
        if envelope:
            error += escape_tail_envelope(lam, n)
        tag = ProvenanceTag.EXTRAPOLATED if v.is_archimedean else ProvenanceTag.STABILIZED
        return PotentialValue(value, error, tag, None if v.is_archimedean else multiple)

    def _log_capacity(self, lam: Lambda, s: CriticalSign, v: Place, n: int) -> Tuple[float, Optional[Fraction]]:
        entry = self.sequence(lam, s, n).entry(n)
        res = entry.resultant
        d2 = entry.degree ** 2
        if v.is_archimedean:
            return -math.log(abs(res)) / d2, None
        multiple = Fraction(int_valuation(res, v.prime), d2)
        return float(multiple) * v.log_prime, multiple

    def capacity_estimate(self, lam, s: CriticalSign, v: Place, n_max: int = None) -> CapacitySequence:
        """
        c_n = |Res(F_n)|_v^(-1/d_n^2) for n = 1..n_max.

        Raises:
            DegenerateIterateError: some Res(F_n) vanishes
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        n_max = n_max or self.n_max
        if n_max < 1:
            raise InvalidParameterError("capacity needs n_max >= 1")
        logs, multiples = [], []
        for n in range(1, n_max + 1):
            value, multiple = self._log_capacity(lam, s, v, n)
            logs.append(value)
            multiples.append(multiple)
        return CapacitySequence(v, s, list(range(1, n_max + 1)), logs, multiples)

    def normalized_potential(self, lam, s: CriticalSign, v: Place, point, n_max: int = None,
                             envelope: bool = True) -> PotentialValue:
        """
        G_{mu_v}(x) = G_v^s(x) + 1/2 log cap(M_v), both at level n.

        At level n this is log||F_n(x)||_v / d_n - log|Res(F_n)|_v / (2 d_n^2),
        whose sum over all places is the height of F_n(x) over d_n.
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        n = n_max or self.n_max
        levels = self._escape_levels(lam, s, v, point, n, self.escape)

        def at(k: int) -> Tuple[float, Optional[Fraction]]:
            g, g_mult = levels[k]
            c, c_mult = self._log_capacity(lam, s, v, k)
            multiple = g_mult + c_mult / 2 if g_mult is not None and c_mult is not None else None
            return g + c / 2, multiple

        value, multiple = at(n)
        if multiple is not None:
            value = float(multiple) * v.log_prime
        error = abs(value - at(n - 1)[0]) if n > 1 else 0.0
        if envelope:
            error += escape_tail_envelope(lam, n)
        tag = ProvenanceTag.EXTRAPOLATED if v.is_archimedean else ProvenanceTag.STABILIZED
        return PotentialValue(value, error, tag, multiple)

    def normalized_values(self, lam, s: CriticalSign, t: np.ndarray, n_max: int = None) -> np.ndarray:
        """Normalized archimedean potential at (t, 1) for an array of complex t."""
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        n = n_max or self.n_max
        t = np.asarray(t, dtype=complex)
        points = np.stack([t, np.ones_like(t)], axis=1)
        logs = self.iterate_lognorms(lam, s, points, n)[n - 1]
        if self.escape is EscapeMode.LOG_PLUS:
            logs = np.maximum(logs, 0.0)
        degree = self.sequence(lam, s, n).entry(n).degree
        return logs / degree + self._log_capacity(lam, s, ARCHIMEDEAN, n)[0] / 2

    # -------------------------------------------------------------------------
    # radii
    # -------------------------------------------------------------------------

    def _raw_grid(self, lam: Lambda, s: CriticalSign, points: np.ndarray, n: int) -> np.ndarray:
        logs = self.iterate_lognorms(lam, s, points, n)[n - 1]
        if self.escape is EscapeMode.LOG_PLUS:
            logs = np.maximum(logs, 0.0)
        return logs / self.sequence(lam, s, n).entry(n).degree

    def radii_arch(self, lam, s: CriticalSign, grid_size: int = None, n_max: int = None,
                   extra_points: Sequence = ()) -> RadiiReport:
        """
        Inner and outer radius of M_inf on the unit max-norm sphere.

        The sphere is covered by the pieces (1, w) and (w, 1) with |w| <= 1
        (unit rotations leave G unchanged), scanned on a grid of moduli and
        arguments. Each grid level widens its extrema by the largest jump
        between neighbouring cells; the bracket is the intersection over
        the levels grid, grid/2, ... down to the minimum grid, so it can
        only shrink when the grid is doubled.
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        grid_size = grid_size or settings.DEFAULT_GRID
        if grid_size < settings.MIN_GRID:
            raise InvalidParameterError(f"grid must be >= {settings.MIN_GRID}")
        n = n_max or self.n_max

        levels = [grid_size]
        while levels[-1] % 2 == 0 and levels[-1] // 2 >= settings.MIN_GRID:
            levels.append(levels[-1] // 2)

        start = time.time()
        r_in, r_out, widest = 0.0, float('inf'), 0.0
        for size in levels:
            rho = np.linspace(0.0, 1.0, size)
            phi = 2.0 * math.pi * np.arange(size) / size
            w = (rho[:, None] * np.exp(1j * phi)[None, :]).ravel()
            ones = np.ones_like(w)
            pieces = [
                self._raw_grid(lam, s, np.stack([ones, w], axis=1), n).reshape(size, size),
                self._raw_grid(lam, s, np.stack([w, ones], axis=1), n).reshape(size, size),
            ]
            jump = max(
                max(np.abs(np.diff(g, axis=0)).max(),
                    np.abs(np.diff(np.concatenate([g, g[:, :1]], axis=1), axis=1)).max())
                for g in pieces
            )
            low = min(g.min() for g in pieces) - jump
            high = max(g.max() for g in pieces) + jump
            r_in = max(r_in, math.exp(-high))
            r_out = min(r_out, math.exp(-low))
            widest = max(widest, jump)

        for point in extra_points:
            g = self.escape_rate(lam, s, ARCHIMEDEAN, point, n, envelope=False).value
            g -= point_lognorm(point, ARCHIMEDEAN).value
            r_in = min(r_in, math.exp(-g))
            r_out = max(r_out, math.exp(-g))

        capacity = self.capacity_estimate(lam, s, ARCHIMEDEAN, n).value
        logger.info(f"Radii at inf for sign {s.symbol}: [{r_in:.6f}, {r_out:.6f}] "
                    f"(grid {grid_size}, {time.time() - start:.1f}s)")
        return RadiiReport(ARCHIMEDEAN, s, r_in, r_out, capacity, widest, 'grid', grid_size, n)

    def radii_finite(self, lam, s: CriticalSign, p: int, n_max: int = None,
                     extra_points: Sequence = ()) -> RadiiReport:
        """
        Radii of M_p from potentials at representatives of P^1(F_p) and
        any extra points, widened by the capacity sandwich.

        Sampled radii are inner bounds: the true r_in is at most, and the
        true r_out at least, the reported value.
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        v = Place.finite(p)
        n = n_max or self.n_max
        samples = [(k, 1) for k in range(p)] + [(1, 0)] + list(extra_points)
        values = []
        for point in samples:
            g = self.escape_rate(lam, s, v, point, n, envelope=False).value
            values.append(g - point_lognorm(point, v).value)

        capacity = self.capacity_estimate(lam, s, v, n).value
        root_cap = math.sqrt(capacity.value)
        r_in = min(math.exp(-max(values)), root_cap)
        r_out = max(math.exp(-min(values)), root_cap)
        return RadiiReport(v, s, r_in, r_out, capacity, 0.0, 'sampled', None, n)

    def radii(self, lam, s: CriticalSign, v: Place, n_max: int = None, grid_size: int = None,
              extra_points: Sequence = ()) -> RadiiReport:
        if v.is_archimedean:
            return self.radii_arch(lam, s, grid_size, n_max, extra_points)
        return self.radii_finite(lam, s, v.prime, n_max, extra_points)

    # -------------------------------------------------------------------------
    # measures, kernels, energies
    # -------------------------------------------------------------------------

    def combined_potential(self, spec: MeasureSpec, v: Place, point, n_max: int = None,
                           envelope: bool = True) -> PotentialValue:
        """sum_i w_i G_{mu_i,v}(point); not renormalized."""
        if spec.is_reference:
            norm = point_lognorm(point, v)
            return PotentialValue(norm.value, 0.0, ProvenanceTag.EXACT, norm.log_p_multiple)

        value, error, multiple = 0.0, 0.0, Fraction(0)
        tag = None
        for s, w in spec.active:
            g = self.normalized_potential(spec.lam, s, v, point, n_max, envelope)
            value += float(w) * g.value
            error += float(w) * g.error
            tag = tag or g.tag
            multiple = multiple + w * g.log_p_multiple if multiple is not None and g.log_p_multiple is not None else None
        if multiple is not None and not v.is_archimedean:
            value = float(multiple) * v.log_prime
        return PotentialValue(value, error, tag, multiple if not v.is_archimedean else None)

    def combined_values(self, spec: MeasureSpec, t: np.ndarray, n_max: int = None) -> np.ndarray:
        """Archimedean combined potential at (t, 1) for an array of complex t."""
        t = np.asarray(t, dtype=complex)
        if spec.is_reference:
            return np.log(np.maximum(1.0, np.abs(t)))
        total = np.zeros(len(t))
        for s, w in spec.active:
            total = total + float(w) * self.normalized_values(spec.lam, s, t, n_max)
        return total

    def green(self, spec: MeasureSpec, v: Place, x, y, n_max: int = None) -> float:
        """
        g(x, y) = -log|x ^ y|_v + G(x) + G(y) for lifts x, y.

        Returns +inf on the diagonal. Exact at finite places.
        """
        x1, x2 = x
        y1, y2 = y
        wedge = x1 * y2 - x2 * y1
        if wedge == 0:
            return float('inf')
        gx = self.combined_potential(spec, v, x, n_max, envelope=False)
        gy = self.combined_potential(spec, v, y, n_max, envelope=False)
        if not v.is_archimedean and gx.log_p_multiple is not None and gy.log_p_multiple is not None:
            multiple = Fraction(padic_val(wedge, v.prime)) + gx.log_p_multiple + gy.log_p_multiple
            return float(multiple) * v.log_prime
        if _is_rational_point((wedge, 1)):
            return -log_abs_rational(to_rational(wedge)) + gx.value + gy.value
        return -math.log(abs(complex(wedge))) + gx.value + gy.value

    def pair_energy(self, points: Sequence, spec: MeasureSpec, v: Place = ARCHIMEDEAN,
                    n_max: int = None) -> float:
        """
        ([S], [S])_v = 1/(2|S|^2) sum_{x != y} g(x, y) over parameters t, lifted to (t, 1).

        Index pairs are summed in a fixed order.
        """
        points = list(points)
        if not points:
            raise InvalidParameterError("energy of an empty set")
        size = len(points)
        if size == 1:
            return 0.0

        if v.is_archimedean and not all(_is_rational_point((p, 1)) for p in points):
            t = np.asarray(points, dtype=complex)
            potential = self.combined_values(spec, t, n_max)
            upper = np.triu_indices(size, 1)
            with np.errstate(divide='ignore'):
                logs = np.log(np.abs(t[:, None] - t[None, :])[upper])
            total = -2.0 * logs.sum() + 2.0 * (size - 1) * potential.sum()
            return float(total) / (2.0 * size * size)

        total = 0.0
        for i in range(size):
            for j in range(i + 1, size):
                total += 2.0 * self.green(spec, v, (points[i], 1), (points[j], 1), n_max)
        return total / (2.0 * size * size)

    # -------------------------------------------------------------------------
    # L constant
    # -------------------------------------------------------------------------

    def proxy_roots(self, lam, s: CriticalSign, level: int, eps_root: float = None,
                    seed: int = None) -> np.ndarray:
        """Roots of P_level^s, used as a sample of mu^s."""
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        key = (lam.value, s, self.lift, level, eps_root, seed)
        if key not in self._proxy_memo:
            poly = periodic_parameter_poly(lam, s, level, self.lift, self.cache)
            self._proxy_memo[key] = complex_roots(poly, eps_root=eps_root, seed=seed).roots
        return self._proxy_memo[key]

    def _l_sample(self, spec: MeasureSpec, proxies: Mapping[CriticalSign, np.ndarray],
                  n_max: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        points, omega, owner = [], [], []
        for s, w in spec.active:
            roots = np.asarray(proxies[s], dtype=complex)
            if len(roots) == 0:
                raise InvalidParameterError(f"empty proxy set for sign {s.symbol}")
            points.append(roots)
            omega.append(np.full(len(roots), float(w) / len(roots)))
            owner.append(np.full(len(roots), s.value))
        t = np.concatenate(points)
        return t, np.concatenate(omega), np.concatenate(owner), self.combined_values(spec, t, n_max)

    def _l_value(self, spec: MeasureSpec, t, omega, owner, potential, keep=None) -> float:
        if keep is not None:
            omega = omega.copy()
            for s, w in spec.active:
                mask = keep & (owner == s.value)
                omega[owner == s.value] = 0.0
                omega[mask] = float(w) / mask.sum()
            t, omega, owner, potential = t[keep], omega[keep], owner[keep], potential[keep]
        return _weighted_energy(t, omega, potential) + _diagonal_share(omega, owner)

    def L_estimate(self, lam, spec: MeasureSpec = None, v: Place = ARCHIMEDEAN,
                   proxy_level: int = None, proxies: Mapping[CriticalSign, ParameterSet] = None,
                   groups: int = None, n_max: int = None, eps_root: float = None,
                   seed: int = None) -> PotentialValue:
        """
        L_inf = 1/2 double integral of sum_i w_i g_{mu_i} against mu = sum_i w_i mu_i.

        mu is sampled by the roots of P_n^+ and P_n^- (weight w_i spread
        evenly over each root set), with the diagonal share of evenly
        spread points added back. The error is a leave-one-group-out
        jackknife plus the change from level n-1 to level n and its
        geometric tail, the ratio taken from levels n-2, n-1, n.

        Returns:
            PotentialValue tagged as archimedean-only evidence
        """
        if not v.is_archimedean:
            raise InvalidParameterError("L is only estimated at the archimedean place")
        lam = Lambda.of(lam)
        spec = spec or MeasureSpec.average(lam)
        groups = groups or settings.JACKKNIFE_GROUPS
        n_pot = n_max or self.n_max

        if proxies is not None:
            if not proxies:
                raise InvalidParameterError("empty proxy")
            level = next(iter(proxies.values())).level
            roots = {s: ps.roots for s, ps in proxies.items()}
        else:
            level = proxy_level or settings.DEFAULT_PROXY_LEVEL
            roots = {s: self.proxy_roots(lam, s, level, eps_root, seed) for s, _ in spec.active}

        start = time.time()
        t, omega, owner, potential = self._l_sample(spec, roots, n_pot)
        estimate = self._l_value(spec, t, omega, owner, potential)

        labels = np.arange(len(t)) % groups
        jackknife = []
        for g in range(groups):
            keep = labels != g
            if all((keep & (owner == s.value)).any() for s, _ in spec.active):
                jackknife.append(self._l_value(spec, t, omega, owner, potential, keep))
        spread = 0.0
        if len(jackknife) > 1:
            values = np.asarray(jackknife)
            spread = math.sqrt((len(values) - 1) / len(values) * float(((values - values.mean()) ** 2).sum()))

        drift, tail = 0.0, 0.0
        if level > 1:
            lower = self._l_level(lam, spec, level - 1, n_pot, eps_root, seed)
            drift = abs(estimate - lower)
            if level > 2:
                lowest = self._l_level(lam, spec, level - 2, n_pot, eps_root, seed)
                if lower != lowest:
                    ratio = min(drift / abs(lower - lowest), settings.L_TAIL_RATIO_CAP)
                    tail = drift * ratio / (1.0 - ratio)
        error = spread + drift + tail

        logger.info(f"L estimate ({spec.label()}, proxy level {level}): {estimate:.6f} "
                    f"+/- {error:.6f} from {len(t)} points in {time.time() - start:.1f}s")
        return PotentialValue(estimate, error, ProvenanceTag.ARCHIMEDEAN_EVIDENCE)

    def _l_level(self, lam: Lambda, spec: MeasureSpec, level: int, n_pot: int,
                 eps_root: float, seed: int) -> float:
        roots = {s: self.proxy_roots(lam, s, level, eps_root, seed) for s, _ in spec.active}
        return self._l_value(spec, *self._l_sample(spec, roots, n_pot))

    # -------------------------------------------------------------------------
    # non-adelic witnesses
    # -------------------------------------------------------------------------

    def nonadelic_witness(self, lam, p: int, n_max: int = None, s: CriticalSign = CriticalSign.PLUS,
                          tol: float = None) -> WitnessReport:
        """
        Compare G_p(1,0) = gamma_p(lambda) with G_p(0,1).

        When they differ the potential is not log||x|| plus a constant,
        so mu_p is not the Gauss measure.
        """
        lam = Lambda.of(lam)
        v = Place.finite(p)
        gamma = gamma_series(lam, v, tol)
        at_zero = self.escape_rate(lam, s, v, (0, 1), n_max, envelope=False)

        first_index = None
        partial, power = Fraction(1), Fraction(1)
        for i in range(1, p + 1):
            power *= lam.value
            partial += power
            if partial != 0 and padic_val(partial, p) > 0:
                first_index = i
                break

        expected = None
        a, b = lam.numerator, lam.denominator
        if a % p and b % p and (a - b) % p:
            expected = n_order(a * pow(b, -1, p) % p, p) - 1

        differs = abs(gamma.value - at_zero.value) > gamma.error + at_zero.error
        return WitnessReport(p, gamma, at_zero, first_index, expected, differs)

    def witness_table(self, lam, prime_bound: int = None, n_max: int = None) -> pd.DataFrame:
        rows = []
        for v in places_up_to(prime_bound or settings.DEFAULT_PRIME_BOUND)[1:]:
            w = self.nonadelic_witness(lam, v.prime, n_max)
            rows.append({'prime': w.prime, 'gamma': w.gamma.value, 'G01': w.potential_at_zero.value,
                         'first_index': w.first_index, 'differs': w.differs})
        return pd.DataFrame(rows, columns=['prime', 'gamma', 'G01', 'first_index', 'differs'])


# Singleton instance
_potential_calculator = None


def get_potential_calculator() -> PotentialCalculator:
    """Get or create the potential calculator singleton."""
    global _potential_calculator
    if _potential_calculator is None:
        _potential_calculator = PotentialCalculator()
    return _potential_calculator


def set_potential_calculator(calculator: PotentialCalculator):
    """Replace the singleton (the CLI installs one built from its Config)."""
    global _potential_calculator
    _potential_calculator = calculator
