"""Tests for the Aberth root finder."""

import math

import mpmath
import numpy as np
import pytest

from core.errors import InvalidParameterError, RootFindingError
from core.per1 import CriticalSign, periodic_parameter_poly
from core.roots import certify_residuals, complex_roots, polish_roots, roots_sum_defect


def _sorted(roots):
    return sorted(roots, key=lambda z: (round(z.real, 9), round(z.imag, 9)))


def test_exact_zero_and_linear():
    result = complex_roots([0, 4, 3])
    roots = _sorted(result.roots)
    assert roots[0] == pytest.approx(-4 / 3, abs=1e-12)
    assert roots[1] == 0
    assert np.all(result.residuals <= 1e-10)


def test_gaussian_integers():
    result = complex_roots([1, 0, 1])
    roots = _sorted(result.roots)
    assert roots[0] == pytest.approx(-1j, abs=1e-10)
    assert roots[1] == pytest.approx(1j, abs=1e-10)


def test_triple_root():
    result = complex_roots([-1, 3, -3, 1])
    assert len(result.roots) == 3
    assert np.all(np.abs(result.roots - 1.0) < 1e-3)
    assert np.all(result.residuals <= 1e-10)


def test_wide_coefficients():
    # (t - 1)(t - 2)...(t - 8)
    poly = [1]
    for k in range(1, 9):
        poly = [(poly[i - 1] if i > 0 else 0) - k * (poly[i] if i < len(poly) else 0)
                for i in range(len(poly) + 1)]
    result = complex_roots(poly)
    assert sorted(z.real for z in result.roots) == pytest.approx([float(k) for k in range(1, 9)], abs=1e-3)
    assert np.all(np.abs(result.roots.imag) < 1e-3)


def test_deterministic():
    poly = [3, -1, 4, 1, -5, 9, 2]
    first = complex_roots(poly, seed=7)
    second = complex_roots(poly, seed=7)
    assert np.array_equal(first.roots, second.roots)


def test_constant_rejected():
    with pytest.raises(InvalidParameterError):
        complex_roots([5])


def test_non_convergence():
    poly = [1]
    for k in range(1, 21):
        poly = [(poly[i - 1] if i > 0 else 0) - k * (poly[i] if i < len(poly) else 0)
                for i in range(len(poly) + 1)]
    with pytest.raises(RootFindingError) as info:
        complex_roots(poly, max_iter=1, restarts=0)
    assert isinstance(info.value.partial_roots, list)


def test_certify_exact_root():
    residuals = certify_residuals([-2, 1], np.array([2.0 + 0j]))
    assert residuals[0] == 0.0
    assert certify_residuals([-2, 1], np.array([2.5 + 0j]))[0] == pytest.approx(0.5 / 4.5)
    assert math.isfinite(certify_residuals([1, 0, 1], np.array([1j]))[0])


def test_far_point_is_not_certified():
    # 3t^2 + 4t vanishes only at 0 and -4/3
    assert certify_residuals([0, 4, 3], np.array([-11.81 - 8.01j]))[0] > 0.5


def test_polish_reaches_working_precision():
    rough = np.array([1.4142 + 0j, -1.4142 + 0j])
    polished = polish_roots([-2, 0, 1], rough)
    assert polished == pytest.approx([math.sqrt(2), -math.sqrt(2)], abs=1e-15)
    assert np.all(certify_residuals([-2, 0, 1], polished) <= 1e-15)


def test_duplicated_root_has_sum_defect():
    assert roots_sum_defect([2, -3, 1], np.array([1.0 + 0j, 2.0 + 0j])) == pytest.approx(0.0, abs=1e-15)
    assert roots_sum_defect([2, -3, 1], np.array([1.0 + 0j, 1.0 + 0j])) > 0.1


def _match(found, exact, tol):
    remaining = list(found)
    for root in exact:
        distances = [abs(root - z) for z in remaining]
        best = int(np.argmin(distances))
        assert distances[best] <= tol
        remaining.pop(best)


def _reference_roots(poly, digits):
    with mpmath.workdps(digits):
        return [complex(r) for r in mpmath.polyroots(list(reversed(poly)), maxsteps=800, extraprec=4 * digits)]


@pytest.mark.parametrize('sign', list(CriticalSign))
def test_periodic_parameters_level_five(sign):
    poly = periodic_parameter_poly(2, sign, 5)
    result = complex_roots(poly, seed=7)
    assert len(result.roots) == len(poly) - 1
    assert np.all(result.residuals <= 1e-10)
    assert roots_sum_defect(poly, result.roots) <= 1e-5
    _match(result.roots, _reference_roots(poly, 60), 1e-8)


@pytest.mark.slow
@pytest.mark.parametrize('sign', list(CriticalSign))
def test_periodic_parameters_level_seven(sign):
    poly = periodic_parameter_poly(2, sign, 7)
    result = complex_roots(poly, seed=7)
    assert np.all(np.abs(result.roots) <= 2.0)
    _match(result.roots, _reference_roots(poly, 200), 1e-8)
