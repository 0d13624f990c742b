"""Tests for escape rates, capacities, radii, kernels and L."""

import math
from fractions import Fraction

import numpy as np
import pytest

from core.errors import InvalidParameterError
from core.per1 import CriticalSign
from core.polyforms import eval_lognorm
from core.potentials import (
    MeasureSpec,
    PotentialValue,
    ProvenanceTag,
    _diagonal_share,
    _weighted_energy,
    gamma_series,
    gamma_table,
)
from core.qfield import ARCHIMEDEAN, Place

PLUS, MINUS = CriticalSign.PLUS, CriticalSign.MINUS


class TestPotentialValue:
    def test_bounds(self):
        value = PotentialValue(1.0, 0.25)
        assert (value.lower, value.upper) == (0.75, 1.25)
        assert value.agrees_with(PotentialValue(1.5, 0.25))
        assert not value.agrees_with(PotentialValue(1.6, 0.25))

    def test_negative_error(self):
        with pytest.raises(InvalidParameterError):
            PotentialValue(0.0, -1.0)


class TestMeasureSpec:
    def test_constructors(self):
        assert not MeasureSpec.pure(2, PLUS).is_mixed
        average = MeasureSpec.average(2)
        assert average.is_mixed
        assert average.weight(MINUS) == Fraction(1, 2)
        assert average.label() == '1/2*mu+ + 1/2*mu-'
        assert MeasureSpec.reference().is_reference

    def test_zero_weight_is_inactive(self):
        spec = MeasureSpec.from_weights(2, 1, 0)
        assert [s for s, _ in spec.active] == [PLUS]
        assert not spec.is_mixed

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            MeasureSpec.from_weights(2, Fraction(1, 2), Fraction(1, 3))
        with pytest.raises(InvalidParameterError):
            MeasureSpec.from_weights(2, 2, -1)


class TestGammaSeries:
    def test_exact_when_lambda_divisible(self):
        gamma = gamma_series(2, Place.finite(2))
        assert gamma.value == 0.0
        assert gamma.tag is ProvenanceTag.EXACT

    def test_exact_when_lambda_has_pole(self):
        gamma = gamma_series(Fraction(1, 3), Place.finite(3))
        assert gamma.tag is ProvenanceTag.EXACT
        assert gamma.value == pytest.approx(math.log(3))

    def test_three_adic(self):
        assert gamma_series(2, Place.finite(3)).value < -0.27

    def test_odd_primes_negative(self):
        table = gamma_table(2, 97)
        odd = table[~table['place'].isin(['inf', '2'])]
        assert len(odd) == 24
        assert (odd['value'] < 0).all()

    def test_archimedean(self):
        gamma = gamma_series(2, ARCHIMEDEAN, tol=1e-12)
        direct = 0.5 * sum(2.0 ** (-i) * math.log(2 ** (i + 1) - 1) for i in range(1, 120))
        assert gamma.error <= 1e-12
        assert gamma.value == pytest.approx(direct, abs=1e-11)

    def test_tol_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            gamma_series(2, ARCHIMEDEAN, tol=0)


class TestEscapeRates:
    @pytest.mark.parametrize('label', ['inf', '3', '5', '7', '11'])
    def test_matches_gamma_at_infinity_point(self, potentials, label):
        v = Place.from_label(label)
        rate = potentials.escape_rate(2, PLUS, v, (1, 0), n_max=6)
        assert rate.agrees_with(gamma_series(2, v))

    @pytest.mark.parametrize('p', [3, 5, 7])
    def test_vanishes_at_zero_point(self, potentials, p):
        rate = potentials.escape_rate(2, PLUS, Place.finite(p), (0, 1), n_max=6)
        assert abs(rate.value) <= rate.error

    def test_origin(self, potentials):
        with pytest.raises(InvalidParameterError):
            potentials.escape_rate(2, PLUS, ARCHIMEDEAN, (0, 0))

    def test_renormalized_iteration_matches_direct(self, potentials):
        points = [(0.3 + 0.2j, 1), (1, -0.7 + 0.1j), (1, 0)]
        logs = potentials.iterate_lognorms(2, PLUS, points, 4)
        seq = potentials.sequence(2, PLUS, 4)
        for k in range(1, 5):
            for j, point in enumerate(points):
                exact = eval_lognorm(seq.entry(k).pair, point, ARCHIMEDEAN, 30).value
                assert logs[k - 1, j] == pytest.approx(exact, abs=1e-9)

    def test_log_plus_clamps(self, potentials):
        plain = potentials.escape_rate(2, PLUS, Place.finite(3), (1, 0), n_max=4, envelope=False)
        clamped = potentials.escape_rate(2, PLUS, Place.finite(3), (1, 0), n_max=4,
                                         escape='log-plus', envelope=False)
        assert clamped.value == max(0.0, plain.value)

    def test_scaling_a_lift(self, potentials):
        v = Place.finite(3)
        base = potentials.escape_rate(2, PLUS, v, (1, 1), n_max=4, envelope=False)
        scaled = potentials.escape_rate(2, PLUS, v, (3, 3), n_max=4, envelope=False)
        assert scaled.log_p_multiple == base.log_p_multiple - 1
        assert scaled.value - base.value == pytest.approx(-math.log(3), abs=1e-12)


class TestCapacity:
    def test_archimedean_first_terms(self, potentials):
        sequence = potentials.capacity_estimate(2, PLUS, ARCHIMEDEAN, 2)
        assert sequence.capacities == pytest.approx([0.5, 192 ** -0.25])

    def test_three_adic_first_terms(self, potentials):
        sequence = potentials.capacity_estimate(2, PLUS, Place.finite(3), 2)
        assert sequence.log_p_multiples == [Fraction(0), Fraction(1, 4)]
        assert sequence.capacities[1] == pytest.approx(3 ** 0.25)

    def test_normalized_potential_exact_at_finite_place(self, potentials):
        value = potentials.normalized_potential(2, PLUS, Place.finite(3), (Fraction(1, 2), 1), 4)
        assert isinstance(value.log_p_multiple, Fraction)
        assert value.value == float(value.log_p_multiple) * math.log(3)

    def test_vectorized_potential(self, potentials):
        t = 0.3 + 0.2j
        vector = potentials.normalized_values(2, PLUS, np.array([t]), 4)[0]
        scalar = potentials.normalized_potential(2, PLUS, ARCHIMEDEAN, (t, 1), 4).value
        assert vector == pytest.approx(scalar, abs=1e-10)


class TestRadii:
    @pytest.mark.parametrize('s', [PLUS, MINUS])
    @pytest.mark.parametrize('p', [3, 5])
    def test_finite_sandwich(self, potentials, s, p):
        radii = potentials.radii(2, s, Place.finite(p), n_max=4)
        assert radii.r_in <= radii.sqrt_capacity <= radii.r_out
        assert radii.sandwich_holds()
        assert radii.method == 'sampled'

    @pytest.mark.parametrize('s', [PLUS, MINUS])
    def test_archimedean_sandwich(self, potentials, s):
        radii = potentials.radii(2, s, ARCHIMEDEAN, n_max=4, grid_size=64)
        assert 0 < radii.r_in <= radii.r_out
        assert radii.sandwich_holds()
        assert radii.to_dict()['grid'] == 64

    def test_refined_grid_narrows(self, potentials):
        coarse = potentials.radii_arch(2, PLUS, grid_size=64, n_max=4)
        fine = potentials.radii_arch(2, PLUS, grid_size=128, n_max=4)
        assert coarse.r_in <= fine.r_in <= fine.r_out <= coarse.r_out

    def test_grid_too_small(self, potentials):
        with pytest.raises(InvalidParameterError):
            potentials.radii_arch(2, PLUS, grid_size=16)

    def test_extra_points_widen(self, potentials):
        point = (Fraction(1, 2), 1)
        radii = potentials.radii(2, PLUS, Place.finite(3), n_max=4, extra_points=[point])
        g = potentials.escape_rate(2, PLUS, Place.finite(3), point, 4, envelope=False).value
        assert radii.r_in <= math.exp(-g) <= radii.r_out


class TestGreen:
    def test_diagonal(self, potentials):
        spec = MeasureSpec.pure(2, PLUS)
        assert potentials.green(spec, ARCHIMEDEAN, (1, 1), (2, 2)) == math.inf

    def test_reference_kernel(self, potentials):
        assert potentials.green(MeasureSpec.reference(), ARCHIMEDEAN, (0, 1), (1, 0)) == 0.0

    def test_symmetric(self, potentials):
        spec = MeasureSpec.pure(2, PLUS)
        x, y = (Fraction(1, 2), 1), (3, 1)
        assert potentials.green(spec, ARCHIMEDEAN, x, y, 4) == pytest.approx(
            potentials.green(spec, ARCHIMEDEAN, y, x, 4))

    def test_lift_invariance_exact_at_finite_place(self, potentials):
        spec = MeasureSpec.pure(2, PLUS)
        v = Place.finite(3)
        base = potentials.green(spec, v, (1, 1), (0, 1), 4)
        assert potentials.green(spec, v, (3, 3), (0, 1), 4) == base
        assert potentials.green(spec, v, (2, 2), (0, 1), 4) == base

    def test_lift_invariance_archimedean(self, potentials):
        spec = MeasureSpec.average(2)
        base = potentials.green(spec, ARCHIMEDEAN, (1, 1), (0, 1), 4)
        assert potentials.green(spec, ARCHIMEDEAN, (5, 5), (0, 1), 4) == pytest.approx(base, abs=1e-9)

    @pytest.mark.parametrize('label', ['inf', '3'])
    def test_average_of_signs(self, potentials, label):
        v = Place.from_label(label)
        plus = potentials.normalized_potential(2, PLUS, v, (1, 0), 4, envelope=False)
        minus = potentials.normalized_potential(2, MINUS, v, (1, 0), 4, envelope=False)
        combined = potentials.combined_potential(MeasureSpec.average(2), v, (1, 0), 4, envelope=False)
        assert combined.value == pytest.approx((plus.value + minus.value) / 2, abs=1e-12)


class TestEnergy:
    def test_trivial_sets(self, potentials):
        spec = MeasureSpec.pure(2, PLUS)
        assert potentials.pair_energy([0], spec) == 0.0
        with pytest.raises(InvalidParameterError):
            potentials.pair_energy([], spec)

    def test_rational_pair(self, potentials):
        spec = MeasureSpec.pure(2, PLUS)
        g = potentials.green(spec, ARCHIMEDEAN, (0, 1), (1, 1), 4)
        assert potentials.pair_energy([0, 1], spec, ARCHIMEDEAN, 4) == pytest.approx(g / 4)

    def test_vectorized_pair(self, potentials):
        spec = MeasureSpec.pure(2, PLUS)
        x, y = 0.3 + 0.1j, -0.5 + 0.2j
        g = potentials.green(spec, ARCHIMEDEAN, (x, 1), (y, 1), 4)
        assert potentials.pair_energy([x, y], spec, ARCHIMEDEAN, 4) == pytest.approx(g / 4, abs=1e-9)

    def test_relabeling(self, potentials):
        spec = MeasureSpec.average(2)
        points = [0, 1, Fraction(1, 2), -2]
        shuffled = [Fraction(1, 2), -2, 0, 1]
        assert potentials.pair_energy(shuffled, spec, ARCHIMEDEAN, 4) == pytest.approx(
            potentials.pair_energy(points, spec, ARCHIMEDEAN, 4), abs=1e-12)


class TestWitness:
    def test_five_adic(self, potentials):
        witness = potentials.nonadelic_witness(2, 5, n_max=5)
        assert witness.first_index == 3
        assert witness.expected_index == 3
        assert witness.differs

    def test_dividing_prime_has_no_index(self, potentials):
        witness = potentials.nonadelic_witness(2, 2, n_max=4)
        assert witness.first_index is None
        assert witness.expected_index is None

    def test_table(self, potentials):
        table = potentials.witness_table(2, 7, 4)
        assert list(table['prime']) == [2, 3, 5, 7]
        assert list(table.columns) == ['prime', 'gamma', 'G01', 'first_index', 'differs']


@pytest.mark.slow
class TestLConstant:
    def test_positive_with_margin(self, potentials):
        L_hat = potentials.L_estimate(2, MeasureSpec.average(2), proxy_level=7, n_max=8, seed=7)
        assert L_hat.tag is ProvenanceTag.ARCHIMEDEAN_EVIDENCE
        assert L_hat.value > 3 * L_hat.error

    def test_pure_measure_vanishes_within_error(self, potentials):
        L_hat = potentials.L_estimate(2, MeasureSpec.pure(2, PLUS), proxy_level=6, n_max=8, seed=7)
        assert abs(L_hat.value) <= L_hat.error

    def test_stable_under_next_proxy_level(self, potentials):
        lower = potentials.L_estimate(2, MeasureSpec.average(2), proxy_level=6, n_max=8, seed=7)
        upper = potentials.L_estimate(2, MeasureSpec.average(2), proxy_level=7, n_max=8, seed=7)
        assert abs(upper.value - lower.value) <= 2 * lower.error

    def test_finite_place_rejected(self, potentials):
        with pytest.raises(InvalidParameterError):
            potentials.L_estimate(2, v=Place.finite(3))


@pytest.mark.parametrize('size', [2, 8, 64])
def test_diagonal_share_on_roots_of_unity(size):
    t = np.exp(2j * np.pi * np.arange(size) / size)
    omega = np.full(size, 1.0 / size)
    owner = np.ones(size)
    energy = _weighted_energy(t, omega, np.zeros(size))
    assert energy + _diagonal_share(omega, owner) == pytest.approx(0.0, abs=1e-12)
