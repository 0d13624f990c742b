"""
Heights Module
==============
Canonical heights of rational parameters: the Call-Silverman heights of
the two critical points (directly and by local decomposition), the
quasi-adelic heights from the potentials of mu^+ and mu^-, their
average minus L, PCF detection and the Weil-height sandwich.
"""

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from sympy import factorint

from config import settings
from core.errors import DegenerateIterateError, DegenerateParameterError, InvalidParameterError
from core.per1 import CriticalSign, Lambda, LiftVariant, critical_orbit, specialized_lift
from core.polyforms import BinaryFormPair, resultant
from core.potentials import (
    MeasureSpec,
    PotentialCalculator,
    PotentialValue,
    ProvenanceTag,
    RadiiReport,
    get_potential_calculator,
)
from core.qfield import (
    ARCHIMEDEAN,
    Place,
    format_rational,
    int_valuation,
    places_up_to,
    primes_up_to,
    strip_primes,
    to_rational,
    weil_height,
)

logger = logging.getLogger(__name__)


class PcfStatus(Enum):
    PCF = 'PCF'
    NOT_PCF = 'NOT_PCF'
    UNKNOWN = 'UNKNOWN'


@dataclass
class HeightReport:
    """
    A height as a sum of local terms over {inf} and the primes up to P.

    `tail` bounds the places above P; `tail_value` is their exact
    contribution at the computed level when it is known.
    """
    t: Fraction
    sign: CriticalSign
    method: str
    contributions: List[Tuple[Place, PotentialValue]]
    total: PotentialValue
    prime_bound: Optional[int] = None
    tail: float = 0.0
    tail_value: float = 0.0
    n_max: Optional[int] = None

    @property
    def local_error(self) -> float:
        return sum(value.error for _, value in self.contributions)

    @property
    def full(self) -> PotentialValue:
        """Sum over every place, the tail taken exactly."""
        return PotentialValue(self.total.value + self.tail_value, self.local_error, self.total.tag)

    def contribution(self, v: Place) -> PotentialValue:
        for place, value in self.contributions:
            if place == v:
                return value
        return PotentialValue(0.0, 0.0, ProvenanceTag.EXACT)

    def to_dict(self) -> Dict:
        return {
            't': format_rational(self.t),
            'sign': self.sign.symbol,
            'method': self.method,
            'places': [{'place': v.label, 'value': g.value, 'error': g.error}
                       for v, g in self.contributions],
            'P': self.prime_bound,
            'n_max': self.n_max,
            'tail': self.tail,
            'tail_value': self.tail_value,
            'total': self.total.value,
            'total_error': self.total.error,
        }


@dataclass
class SandwichReport:
    """h(t) - h_mu(t) against log prod r_in and log prod r_out."""
    t: Fraction
    sign: CriticalSign
    weil_height: float
    canonical: PotentialValue
    low: float
    high: float

    @property
    def difference(self) -> float:
        return self.weil_height - self.canonical.value

    @property
    def holds(self) -> bool:
        return self.low <= self.difference <= self.high

    def to_dict(self) -> Dict:
        return {
            't': format_rational(self.t),
            'sign': self.sign.symbol,
            'weil_height': self.weil_height,
            'canonical': self.canonical.to_dict(),
            'difference': self.difference,
            'log_r_in_sum': self.low,
            'log_r_out_sum': self.high,
            'holds': self.holds,
        }


@dataclass
class _Tail:
    value: float
    bound: float
    log_denominator: float


def stern_brocot(bound: int) -> List[Fraction]:
    """
    Every rational of naive height max(|a|, b) <= bound, with 0 and negatives.

    Positive rationals come from the Stern-Brocot tree, pruned once a
    mediant exceeds the bound. Ordered by Weil height, then |t|, then sign.
    """
    if bound < 1:
        raise InvalidParameterError("enumeration bound must be >= 1")
    positive = []
    stack = [((0, 1), (1, 0))]
    while stack:
        (a, b), (c, d) = stack.pop()
        num, den = a + c, b + d
        if max(num, den) > bound:
            continue
        positive.append(Fraction(num, den))
        stack.append(((a, b), (num, den)))
        stack.append(((num, den), (c, d)))
    values = [Fraction(0)] + positive + [-x for x in positive]
    return sorted(values, key=lambda x: (weil_height(x), abs(x), x < 0))


class HeightCalculator:
    """Heights of rational parameters of the family."""

    def __init__(self, potentials: PotentialCalculator = None, prime_bound: int = None,
                 n_max: int = None):
        self.potentials = potentials or get_potential_calculator()
        self.prime_bound = prime_bound or settings.DEFAULT_PRIME_BOUND
        self.n_max = n_max or self.potentials.n_max
        self._tail_memo: Dict[Tuple, int] = {}

    @property
    def lift(self) -> LiftVariant:
        return self.potentials.lift

    # -------------------------------------------------------------------------
    # Call-Silverman heights
    # -------------------------------------------------------------------------

    def callsilverman_direct(self, lam, t, s: CriticalSign, n: int = None,
                             budget: int = None) -> PotentialValue:
        """
        h^s(t) = lim 2^-n h(f_t^n(s)).

        Exactly 0 when the orbit is detected preperiodic. Otherwise the
        orbit is iterated on primitive integer lifts (poles are the lift
        (1, 0)) and 2^-n h(z_n) is returned with error |e_n - e_(n-1)|.
        """
        n = n or settings.DIRECT_HEIGHT_LEVEL
        if n < 4:
            raise InvalidParameterError("direct height needs n >= 4")
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        t = to_rational(t)

        orbit = critical_orbit(lam, t, s, budget or settings.DEFAULT_ORBIT_BUDGET)
        if orbit.is_preperiodic:
            return PotentialValue(0.0, 0.0, ProvenanceTag.EXACT)

        phi = specialized_lift(lam, t, self.lift)
        z1, z2 = s.value, 1
        heights = []
        for _ in range(n):
            w1, w2 = phi.evaluate(z1, z2)
            g = math.gcd(w1, w2)
            z1, z2 = w1 // g, w2 // g
            heights.append(math.log(max(abs(z1), abs(z2))))
        value = heights[-1] / 2 ** n
        error = abs(value - heights[-2] / 2 ** (n - 1))
        return PotentialValue(value, error, ProvenanceTag.STABILIZED)

    def _local_archimedean(self, phi: BinaryFormPair, s: CriticalSign, res: int,
                           steps: int) -> PotentialValue:
        a = [float(c) for c in phi.a.coeffs]
        b = [float(c) for c in phi.b.coeffs]
        u1, u2 = float(s.value), 1.0
        total, last = 0.0, 0.0
        for k in range(1, steps + 1):
            w1 = a[0] * u2 * u2 + a[1] * u1 * u2 + a[2] * u1 * u1
            w2 = b[0] * u2 * u2 + b[1] * u1 * u2 + b[2] * u1 * u1
            norm = max(abs(w1), abs(w2))
            last = 2.0 ** (-k) * math.log(norm)
            total += last
            u1, u2 = w1 / norm, w2 / norm
        scale = math.log(sum(abs(c) for c in a + b)) + abs(math.log(abs(res)))
        return PotentialValue(total, abs(last) * 2.0 ** (-steps) + scale * 2.0 ** (-steps),
                              ProvenanceTag.STABILIZED)

    def _local_finite(self, phi: BinaryFormPair, s: CriticalSign, p: int, v_res: int,
                      steps: int) -> PotentialValue:
        """Sum of -2^-k v_p(Phi(U_(k-1))) on p-adically primitive lifts, mod p^precision."""
        place = Place.finite(p)
        precision = (steps + 1) * v_res + 2
        z1, z2 = s.value % p ** precision, 1
        multiple = Fraction(0)
        for k in range(1, steps + 1):
            modulus = p ** precision
            w1, w2 = phi.evaluate(z1, z2)
            w1, w2 = w1 % modulus, w2 % modulus
            e = min(int_valuation(w, p) if w else precision for w in (w1, w2))
            multiple -= Fraction(e, 2 ** k)
            precision -= e
            z1, z2 = (w1 // p ** e) % p ** precision, (w2 // p ** e) % p ** precision
        tail = 2.0 ** (-steps) * v_res * place.log_prime
        return PotentialValue(float(multiple) * place.log_prime, tail, ProvenanceTag.STABILIZED, multiple)

    def callsilverman_local(self, lam, t, s: CriticalSign, steps: int = None) -> HeightReport:
        """
        h^s(t) as a sum of local canonical heights of the lift (s, 1).

        Bad places are inf, the primes of Res(Phi_t) and those of the
        denominator of t; every other place contributes 0.

        Raises:
            DegenerateParameterError: Res(Phi_t) = 0
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        t = to_rational(t)
        steps = steps or settings.LOCAL_HEIGHT_STEPS

        phi = specialized_lift(lam, t, self.lift)
        res = resultant(phi)
        if res == 0:
            raise DegenerateParameterError(f"degenerate parameter t = {format_rational(t)}")
        bad = sorted(set(factorint(abs(res))) | set(factorint(t.denominator)))

        contributions = [(ARCHIMEDEAN, self._local_archimedean(phi, s, res, steps))]
        for p in bad:
            v_res = int_valuation(res, p)
            if v_res == 0:
                contributions.append((Place.finite(p), PotentialValue(0.0, 0.0, ProvenanceTag.EXACT, Fraction(0))))
                continue
            contributions.append((Place.finite(p), self._local_finite(phi, s, p, v_res, steps)))

        total = PotentialValue(sum(g.value for _, g in contributions),
                               sum(g.error for _, g in contributions), ProvenanceTag.STABILIZED)
        return HeightReport(t, s, 'callsilverman-local', contributions, total)

    # -------------------------------------------------------------------------
    # quasi-adelic heights
    # -------------------------------------------------------------------------

    def _tail(self, lam: Lambda, s: CriticalSign, t: Fraction, prime_bound: int, n: int) -> _Tail:
        """
        Exact contribution of the primes above the bound at level n.

        With t = a/b, G(t, 1) at p is (-v_p(gcd(A_n(a,b), B_n(a,b))) + d v_p(b)) log p / d
        plus v_p(Res_n) log p / (2 d^2); the primes up to the bound are divided out.
        """
        entry = self.potentials.sequence(lam, s, n).entry(n)
        d = entry.degree
        primes = primes_up_to(prime_bound)
        a, b = t.numerator, t.denominator
        values = entry.pair.evaluate(a, b)
        common = math.gcd(*values)
        if common == 0:
            raise DegenerateIterateError(f"t = {format_rational(t)} is a common zero of F_{n}")

        key = (lam.value, s, self.lift, n, prime_bound)
        if key not in self._tail_memo:
            self._tail_memo[key] = strip_primes(entry.resultant, primes)
        res_cofactor = self._tail_memo[key]

        log_gcd = math.log(strip_primes(common, primes)) / d
        log_den = math.log(strip_primes(b, primes))
        log_res = math.log(res_cofactor) / (2 * d * d)
        return _Tail(value=-log_gcd + log_den + log_res, bound=log_gcd + log_den + log_res,
                     log_denominator=log_den)

    def quasi_adelic_height(self, lam, t, s: CriticalSign, prime_bound: int = None,
                            n_max: int = None) -> HeightReport:
        """
        h_{mu^s}(t) = sum over places of the normalized potential at (t, 1).

        The sum runs over inf and the primes up to the bound; the rest is
        reported as the tail. Local errors are stabilization errors.
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        t = to_rational(t)
        prime_bound = prime_bound or self.prime_bound
        n = n_max or self.n_max
        point = (t, 1)

        start = time.time()
        contributions = [(v, self.potentials.normalized_potential(lam, s, v, point, n, envelope=False))
                         for v in places_up_to(prime_bound)]
        tail = self._tail(lam, s, t, prime_bound, n)
        value = sum(g.value for _, g in contributions)
        error = sum(g.error for _, g in contributions) + tail.bound
        logger.info(f"Quasi-adelic height {s.symbol} at t={format_rational(t)}: {value:.6f} "
                    f"+/- {error:.6f} (P={prime_bound}, n={n}, {time.time() - start:.1f}s)")
        return HeightReport(t, s, 'quasi-adelic', contributions,
                            PotentialValue(value, error, ProvenanceTag.STABILIZED),
                            prime_bound, tail.bound, tail.value, n)

    def combined_height(self, lam, t, spec: MeasureSpec = None, prime_bound: int = None,
                        n_max: int = None, L_hat: PotentialValue = None) -> PotentialValue:
        """
        h_mu(t) = sum_i w_i h_{mu_i}(t) - L, with L subtracted only for a genuine mixture.

        Args:
            L_hat: estimate of L (computed when omitted and needed)
        """
        lam = Lambda.of(lam)
        spec = spec or MeasureSpec.average(lam)
        value, error = 0.0, 0.0
        for s, w in spec.active:
            full = self.quasi_adelic_height(lam, t, s, prime_bound, n_max).full
            value += float(w) * full.value
            error += float(w) * full.error
        if spec.is_mixed:
            if L_hat is None:
                L_hat = self.potentials.L_estimate(lam, spec)
            value -= L_hat.value
            error += L_hat.error
        return PotentialValue(value, error, ProvenanceTag.STABILIZED)

    def set_height(self, lam, points: Sequence, s: CriticalSign, prime_bound: int = None,
                   n_max: int = None) -> PotentialValue:
        """Height of a finite set of rational parameters: the mean over its points."""
        points = [to_rational(x) for x in points]
        if not points:
            raise InvalidParameterError("height of an empty set")
        fulls = [self.quasi_adelic_height(lam, x, s, prime_bound, n_max).full for x in points]
        return PotentialValue(sum(f.value for f in fulls) / len(fulls),
                              sum(f.error for f in fulls) / len(fulls), ProvenanceTag.STABILIZED)

    # -------------------------------------------------------------------------
    # scans
    # -------------------------------------------------------------------------

    def pcf_scan(self, lam, ts: Sequence, budget: int = None) -> List[Tuple[Fraction, PcfStatus]]:
        """
        PCF only when both critical orbits are exactly preperiodic;
        NOT_PCF when either orbit escapes the height filter.
        """
        budget = budget or settings.DEFAULT_ORBIT_BUDGET
        results = []
        for t in ts:
            t = to_rational(t)
            orbits = [critical_orbit(lam, t, s, budget) for s in CriticalSign]
            if all(o.is_preperiodic for o in orbits):
                status = PcfStatus.PCF
            elif any(o.height_blowup for o in orbits):
                status = PcfStatus.NOT_PCF
            else:
                status = PcfStatus.UNKNOWN
            results.append((t, status))
        logger.info(f"PCF scan over {len(results)} parameters: "
                    f"{sum(1 for _, st in results if st is PcfStatus.PCF)} PCF")
        return results

    def sandwich_check(self, lam, s: CriticalSign, ts: Sequence, prime_bound: int = None,
                       n_max: int = None, grid_size: int = None) -> List[SandwichReport]:
        """
        Check log prod r_in <= h(t) - h_mu(t) <= log prod r_out.

        Radii use the normalized potentials at inf and the primes up to the
        bound, with the sample points included in every scan. The places
        above the bound enter through their exact difference.
        """
        lam = Lambda.of(lam)
        s = CriticalSign.parse(s)
        prime_bound = prime_bound or self.prime_bound
        n = n_max or self.n_max
        ts = [to_rational(t) for t in ts]
        extra = [(t, 1) for t in ts]

        radii: List[RadiiReport] = [
            self.potentials.radii(lam, s, v, n, grid_size, extra) for v in places_up_to(prime_bound)
        ]
        log_in = sum(math.log(r.normalized_r_in) for r in radii)
        log_out = sum(math.log(r.normalized_r_out) for r in radii)

        reports = []
        for t in ts:
            report = self.quasi_adelic_height(lam, t, s, prime_bound, n)
            tail = self._tail(lam, s, t, prime_bound, n)
            beyond = tail.log_denominator - tail.value
            slack = report.local_error + 1e-9
            reports.append(SandwichReport(
                t=t,
                sign=s,
                weil_height=weil_height(t),
                canonical=report.full,
                low=log_in + min(0.0, beyond) - slack,
                high=log_out + max(0.0, beyond) + slack,
            ))
        return reports

    def finiteness_scan(self, lam, delta: float, bound: int, spec: MeasureSpec = None,
                        prime_bound: int = None, n_max: int = None,
                        L_hat: PotentialValue = None) -> List[Tuple[Fraction, PotentialValue]]:
        """
        Rationals of naive height <= bound whose combined height is below -delta.
        """
        if delta <= 0:
            raise InvalidParameterError("delta must be positive")
        lam = Lambda.of(lam)
        spec = spec or MeasureSpec.average(lam)
        if spec.is_mixed and L_hat is None:
            L_hat = self.potentials.L_estimate(lam, spec)

        hits = []
        candidates = stern_brocot(bound)
        for t in candidates:
            h = self.combined_height(lam, t, spec, prime_bound, n_max, L_hat)
            if h.value < -delta:
                hits.append((t, h))
        logger.info(f"Finiteness scan (delta={delta:.4f}, bound={bound}): "
                    f"{len(hits)} of {len(candidates)} below -delta")
        return hits


def pcf_table(results: List[Tuple[Fraction, PcfStatus]]) -> pd.DataFrame:
    return pd.DataFrame([{'t': format_rational(t), 'status': st.value} for t, st in results],
                        columns=['t', 'status'])


def weil_sandwich_report(reports: List[SandwichReport]) -> Dict:
    """JSON view of a sandwich check."""
    return {
        'samples': [r.to_dict() for r in reports],
        'all_hold': all(r.holds for r in reports),
    }


# Singleton instance
_height_calculator = None


def get_height_calculator() -> HeightCalculator:
    """Get or create the height calculator singleton."""
    global _height_calculator
    if _height_calculator is None:
        _height_calculator = HeightCalculator()
    return _height_calculator
