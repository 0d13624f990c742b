"""Tests for canonical and quasi-adelic heights, scans and the sandwich."""

import math
import random
from fractions import Fraction

import pytest

from core.errors import InvalidParameterError
from core.heights import PcfStatus, pcf_table, stern_brocot, weil_sandwich_report
from core.per1 import CriticalSign
from core.potentials import MeasureSpec, PotentialValue
from core.qfield import ARCHIMEDEAN, Place

PLUS, MINUS = CriticalSign.PLUS, CriticalSign.MINUS


def _reduced_height(potentials, s, t, n):
    """h(F_n(t)) / d_n straight from the integer values of the forms."""
    entry = potentials.sequence(2, s, n).entry(n)
    t = Fraction(t)
    a, b = entry.pair.evaluate(t.numerator, t.denominator)
    g = math.gcd(a, b)
    return math.log(max(abs(a), abs(b)) // g) / entry.degree


class TestCallSilverman:
    @pytest.mark.parametrize('s', [PLUS, MINUS])
    def test_zero_at_pcf_parameter(self, heights, s):
        value = heights.callsilverman_direct(2, 0, s)
        assert value.value == 0.0
        assert value.error == 0.0

    def test_level_too_small(self, heights):
        with pytest.raises(InvalidParameterError):
            heights.callsilverman_direct(2, 1, PLUS, n=3)

    @pytest.mark.parametrize('s', [PLUS, MINUS])
    def test_direct_matches_local(self, heights, s):
        rng = random.Random(2024)
        for _ in range(20):
            t = Fraction(rng.randint(-20, 20), rng.randint(1, 20))
            direct = heights.callsilverman_direct(2, t, s)
            local = heights.callsilverman_local(2, t, s)
            assert direct.value == pytest.approx(local.total.value, abs=1e-3), t

    def test_local_places(self, heights):
        report = heights.callsilverman_local(2, Fraction(2, 5), PLUS)
        places = [v for v, _ in report.contributions]
        assert places[0] == ARCHIMEDEAN
        assert Place.finite(5) in places
        assert report.method == 'callsilverman-local'

    def test_zero_on_period_two_orbit(self, heights):
        assert heights.callsilverman_direct(2, Fraction(-4, 3), PLUS).value == 0.0

    def test_local_sum_vanishes_at_pcf_parameter(self, heights):
        report = heights.callsilverman_local(2, 0, PLUS)
        assert abs(report.total.value) <= report.total.error + 1e-12


class TestQuasiAdelic:
    @pytest.mark.parametrize('s', [PLUS, MINUS])
    def test_vanishes_at_pcf_parameter(self, heights, s):
        report = heights.quasi_adelic_height(2, 0, s)
        assert abs(report.full.value) <= 1e-9

    def test_vanishes_on_period_two_orbit(self, heights):
        report = heights.quasi_adelic_height(2, Fraction(-4, 3), PLUS, n_max=4)
        assert abs(report.full.value) <= 1e-9

    @pytest.mark.parametrize('t', [Fraction(1, 31), Fraction(3, 7), -5])
    def test_full_height_is_height_of_iterate(self, heights, potentials, t):
        report = heights.quasi_adelic_height(2, t, PLUS)
        assert report.full.value == pytest.approx(_reduced_height(potentials, PLUS, t, 5), abs=1e-9)

    def test_tail_covers_large_primes(self, heights):
        report = heights.quasi_adelic_height(2, Fraction(1, 31), PLUS)
        assert report.tail >= math.log(31) - 1e-12
        assert report.contribution(Place.finite(31)).value == 0.0

    def test_report_dict(self, heights):
        data = heights.quasi_adelic_height(2, 1, PLUS).to_dict()
        assert set(data) == {'t', 'sign', 'method', 'places', 'P', 'n_max', 'tail',
                             'tail_value', 'total', 'total_error'}
        assert data['places'][0]['place'] == 'inf'
        assert data['P'] == 30

    def test_full_height_independent_of_prime_bound(self, heights):
        t = Fraction(3, 7)
        small = heights.quasi_adelic_height(2, t, PLUS, prime_bound=30)
        large = heights.quasi_adelic_height(2, t, PLUS, prime_bound=50)
        assert small.full.value == pytest.approx(large.full.value, abs=1e-9)
        assert large.tail <= small.tail + 1e-12

    @pytest.mark.slow
    @pytest.mark.parametrize('s', [PLUS, MINUS])
    @pytest.mark.parametrize('t', [0, 1, Fraction(1, 2), -2, Fraction(-4, 3)])
    def test_twice_the_canonical_height(self, deep_heights, s, t):
        report = deep_heights.quasi_adelic_height(2, t, s)
        direct = deep_heights.callsilverman_direct(2, t, s)
        slack = report.total.error + 2 * direct.error + 1e-9
        assert report.full.value == pytest.approx(2 * direct.value, abs=slack)
        assert report.prime_bound == 100

    @pytest.mark.slow
    def test_deep_identity(self, heights, potentials):
        t = Fraction(5, 3)
        report = heights.quasi_adelic_height(2, t, MINUS, n_max=8)
        assert report.full.value == pytest.approx(_reduced_height(potentials, MINUS, t, 8), abs=1e-8)


class TestCombinedHeights:
    def test_pure_measure(self, heights):
        pure = heights.combined_height(2, Fraction(1, 2), MeasureSpec.pure(2, PLUS))
        full = heights.quasi_adelic_height(2, Fraction(1, 2), PLUS).full
        assert pure.value == pytest.approx(full.value)

    def test_mixture_subtracts_L(self, heights):
        L_hat = PotentialValue(0.3, 0.01)
        combined = heights.combined_height(2, 0, MeasureSpec.average(2), L_hat=L_hat)
        assert combined.value == pytest.approx(-0.3, abs=1e-9)
        assert combined.error >= 0.01

    def test_set_height(self, heights):
        value = heights.set_height(2, [0, Fraction(-4, 3)], PLUS, n_max=4)
        assert abs(value.value) <= 1e-9
        with pytest.raises(InvalidParameterError):
            heights.set_height(2, [], PLUS)

    @pytest.mark.slow
    def test_negative_at_pcf_parameter(self, heights, potentials):
        L_hat = potentials.L_estimate(2, MeasureSpec.average(2), proxy_level=7, n_max=8, seed=7)
        assert heights.combined_height(2, 0, L_hat=L_hat).value < 0


class TestScans:
    def test_pcf_scan(self, heights):
        results = heights.pcf_scan(2, [0, Fraction(-4, 3)])
        assert [status for _, status in results] == [PcfStatus.PCF, PcfStatus.NOT_PCF]
        table = pcf_table(results)
        assert list(table['t']) == ['0', '-4/3']
        assert list(table['status']) == ['PCF', 'NOT_PCF']

    def test_stern_brocot_order(self):
        assert stern_brocot(2) == [0, 1, -1, Fraction(1, 2), Fraction(-1, 2), 2, -2]
        assert len(stern_brocot(3)) == 2 * 7 + 1

    def test_stern_brocot_bound(self):
        with pytest.raises(InvalidParameterError):
            stern_brocot(0)

    def test_sandwich(self, heights):
        reports = heights.sandwich_check(2, PLUS, [0, 1, Fraction(1, 2)], prime_bound=7, n_max=4)
        assert all(r.holds for r in reports)
        summary = weil_sandwich_report(reports)
        assert summary['all_hold']
        assert summary['samples'][2]['t'] == '1/2'

    def test_finiteness_delta(self, heights):
        with pytest.raises(InvalidParameterError):
            heights.finiteness_scan(2, 0.0, 3)

    def test_finiteness_pure_measure(self, heights):
        hits = heights.finiteness_scan(2, 10.0, 2, MeasureSpec.pure(2, PLUS))
        assert hits == []
