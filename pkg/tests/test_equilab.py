"""Tests for S_n, energies, point clouds and annulus histograms."""

import numpy as np
import pandas as pd
import pytest

from core.equilab import (
    annulus_histogram,
    build_Sn,
    energy_table,
    energy_trend,
    pointcloud_export,
    pointcloud_frame,
)
from core.errors import InvalidParameterError
from core.per1 import CriticalSign
from core.qfield import Place

PLUS, MINUS = CriticalSign.PLUS, CriticalSign.MINUS


@pytest.fixture(scope='module')
def s2(potentials):
    return build_Sn(2, PLUS, 2, potentials, seed=7)


def test_build_level_two(s2):
    roots = sorted(s2.roots, key=lambda z: z.real)
    assert roots[0] == pytest.approx(-4 / 3, abs=1e-10)
    assert roots[1] == pytest.approx(0, abs=1e-10)
    assert np.all(s2.residuals <= 1e-10)
    assert s2.poly == (0, 4, 3)


def test_level_must_be_positive(potentials):
    with pytest.raises(InvalidParameterError):
        build_Sn(2, PLUS, 0, potentials)


def test_annulus_masses(s2):
    table = annulus_histogram(s2, 0, [1.0, 2.0])
    assert list(table['mass']) == [0.5, 0.5, 0.0]
    assert table['mass'].sum() == 1.0
    assert table['outer'].iloc[-1] == np.inf


def test_annulus_half_unit_bins(s2):
    table = annulus_histogram(s2, 0, [0.5, 2.0])
    assert list(table['mass']) == [0.5, 0.5, 0.0]


def test_roots_closed_under_conjugation(potentials):
    points = build_Sn(2, MINUS, 4, potentials, seed=7)
    for z in points.roots:
        assert np.min(np.abs(points.roots - np.conj(z))) <= 1e-8


@pytest.mark.parametrize('bins', [[], [2.0, 1.0], [0.0, 1.0], [1.0, 1.0]])
def test_annulus_invalid_bins(s2, bins):
    with pytest.raises(InvalidParameterError):
        annulus_histogram(s2, 0, bins)


def test_pointcloud_order(s2):
    frame = pointcloud_frame(s2)
    assert list(frame.columns) == ['re', 'im', 'residual']
    assert frame['re'].iloc[0] == pytest.approx(-4 / 3)


def test_pointcloud_export_deterministic(potentials, tmp_path):
    points = build_Sn(2, PLUS, 4, potentials, seed=7)
    first = pointcloud_export(points, str(tmp_path / 'a' / 's4.csv'))
    second = pointcloud_export(build_Sn(2, PLUS, 4, potentials, seed=7), str(tmp_path / 'b' / 's4.csv'))
    with open(first, 'rb') as f, open(second, 'rb') as g:
        assert f.read() == g.read()
    frame = pd.read_csv(first)
    assert len(frame) == points.degree
    assert list(frame['re']) == sorted(frame['re'])


def test_energy_trend(potentials):
    trend = energy_trend(2, PLUS, [1, 2, 3], potentials=potentials, seed=7)
    assert trend.levels == [1, 2, 3]
    assert trend.sizes[0] == 1
    assert trend.energies[0] == 0.0
    assert all(np.isfinite(trend.energies))
    table = energy_table(trend)
    assert list(table.columns) == ['n', 'size', 'energy']
    assert trend.to_dict()['place'] == 'inf'


def test_energy_levels_ascending(potentials):
    with pytest.raises(InvalidParameterError):
        energy_trend(2, PLUS, [3, 2], potentials=potentials)
    with pytest.raises(InvalidParameterError):
        energy_trend(2, PLUS, [], potentials=potentials)


def test_energy_finite_place_rejected(potentials):
    with pytest.raises(InvalidParameterError):
        energy_trend(2, PLUS, [1, 2], Place.finite(3), potentials=potentials)


@pytest.mark.slow
@pytest.mark.parametrize('s', [PLUS, MINUS])
def test_energy_decreases(deep_potentials, s):
    trend = energy_trend(2, s, [3, 5, 7], potentials=deep_potentials, seed=7)
    assert trend.is_decreasing_in_magnitude()


@pytest.mark.slow
def test_energy_baselines(deep_potentials):
    trend = energy_trend(2, PLUS, [3, 5, 7], potentials=deep_potentials, seed=7)
    assert trend.energies == pytest.approx([-0.09374, -0.07458, -0.02901], abs=5e-4)
    assert trend.is_decreasing_in_magnitude()
    assert all(e < 0 for e in trend.energies)


@pytest.mark.slow
def test_level_seven_set_is_bounded(potentials):
    points = build_Sn(2, PLUS, 7, potentials, seed=7)
    assert np.all(np.abs(points.roots) <= 2.0)
    assert np.all(points.residuals <= 1e-10)
