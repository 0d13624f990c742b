"""Shared fixtures for the height lab tests."""

import os
import sys
from fractions import Fraction

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.fn_cache import FnCache
from core.heights import HeightCalculator
from core.per1 import Lambda, clear_fn_store
from core.potentials import PotentialCalculator


@pytest.fixture(scope='session')
def lam():
    return Lambda(Fraction(2))


@pytest.fixture(scope='session')
def potentials():
    """Calculator at depth 5 without a disk cache."""
    return PotentialCalculator(lift='std', escape='log-plain', n_max=5)


@pytest.fixture(scope='session')
def heights(potentials):
    return HeightCalculator(potentials, prime_bound=30, n_max=5)


@pytest.fixture
def fn_cache(tmp_path):
    return FnCache(str(tmp_path / 'cache'))


@pytest.fixture
def fresh_store():
    """Empty in-process F_n store (forces cache reads)."""
    clear_fn_store()
    yield
    clear_fn_store()


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    monkeypatch.setenv('HEIGHTLAB_CACHE', str(tmp_path / 'env-cache'))


@pytest.fixture(scope='session')
def deep_potentials():
    """Calculator at depth 8, for the slow cases."""
    return PotentialCalculator(lift='std', escape='log-plain', n_max=8)


@pytest.fixture(scope='session')
def deep_heights(deep_potentials):
    return HeightCalculator(deep_potentials, prime_bound=100, n_max=8)
