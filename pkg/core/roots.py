"""
Root Finder Module
==================
Simultaneous (Aberth) iteration for all complex roots of an integer
polynomial. Roots are polished by Newton steps in extended precision
and certified by their backward error.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import mpmath
import numpy as np

from config import settings
from core.errors import InvalidParameterError, RootFindingError

logger = logging.getLogger(__name__)


@dataclass
class RootResult:
    """Roots (with multiplicity) and their backward errors."""
    roots: np.ndarray
    residuals: np.ndarray


def certify_residuals(poly: Sequence[int], roots: np.ndarray, digits: int = None) -> np.ndarray:
    """
    Backward error |P(z)| / sum_k |c_k| |z|^k of each root, in mpmath.

    Args:
        poly: integer coefficients, low to high
        roots: candidate roots
        digits: working precision in decimal digits
    """
    digits = digits or settings.ROOT_CERTIFY_DIGITS
    residuals = np.empty(len(roots))
    with mpmath.workdps(digits):
        coeffs = [mpmath.mpf(c) for c in reversed(poly)]
        magnitudes = [abs(c) for c in coeffs]
        for i, z in enumerate(roots):
            zm = mpmath.mpc(complex(z))
            value = abs(mpmath.polyval(coeffs, zm))
            scale = mpmath.polyval(magnitudes, abs(zm))
            residuals[i] = float(value / scale)
    return residuals


def polish_roots(poly: Sequence[int], roots: np.ndarray, digits: int = None,
                 steps: int = None) -> np.ndarray:
    """Newton steps on the exact coefficients; a step is kept only if |P| drops."""
    digits = digits or settings.ROOT_CERTIFY_DIGITS
    steps = settings.ROOT_POLISH_STEPS if steps is None else steps
    polished = np.empty(len(roots), dtype=complex)
    with mpmath.workdps(digits):
        coeffs = [mpmath.mpf(c) for c in reversed(poly)]
        tiny = mpmath.mpf(10) ** (5 - digits)
        for i, z in enumerate(roots):
            zm = mpmath.mpc(complex(z))
            value, slope = mpmath.polyval(coeffs, zm, derivative=True)
            for _ in range(steps):
                if value == 0 or slope == 0:
                    break
                step = value / slope
                candidate = zm - step
                new_value, new_slope = mpmath.polyval(coeffs, candidate, derivative=True)
                if abs(new_value) >= abs(value):
                    break
                zm, value, slope = candidate, new_value, new_slope
                if abs(step) <= tiny * max(1, abs(zm)):
                    break
            polished[i] = complex(zm)
    return polished


def roots_sum_defect(poly: Sequence[int], roots: np.ndarray) -> float:
    """
    |sum z_i + c_(n-1)/c_n| relative to sum max(1, |z_i|).

    A root found twice while another is missed shows up here even when
    every backward error is small.
    """
    with mpmath.workdps(settings.ROOT_CERTIFY_DIGITS):
        expected = -mpmath.mpf(poly[-2]) / mpmath.mpf(poly[-1])
        total = mpmath.fsum(mpmath.mpc(complex(z)) for z in roots)
        defect = abs(total - expected)
    return float(defect) / float(np.maximum(1.0, np.abs(roots)).sum())


def _initial_guesses(coeffs_hi: np.ndarray, rng: np.random.Generator = None) -> np.ndarray:
    """Points on the circle of radius |c_0/c_n|^(1/n)."""
    n = len(coeffs_hi) - 1
    radius = math.exp((math.log(abs(coeffs_hi[-1])) - math.log(abs(coeffs_hi[0]))) / n)
    angles = 2.0 * math.pi * np.arange(n) / n + 0.4
    z = radius * np.exp(1j * angles)
    if rng is not None:
        z = z * (1.0 + 0.05 * rng.standard_normal(n)) * np.exp(1j * 0.05 * rng.standard_normal(n))
    return z


def _backward_errors(coeffs_hi: np.ndarray, z: np.ndarray) -> np.ndarray:
    with np.errstate(all='ignore'):
        values = np.abs(np.polyval(coeffs_hi, z))
        scale = np.polyval(np.abs(coeffs_hi), np.abs(z))
        return values / scale


def _aberth(coeffs_hi: np.ndarray, z: np.ndarray, eps_root: float, max_iter: int):
    """Run Aberth sweeps until every float backward error is well below eps_root."""
    deriv = np.polyder(coeffs_hi)
    target = eps_root * 1e-2
    for iteration in range(max_iter):
        p = np.polyval(coeffs_hi, z)
        dp = np.polyval(deriv, z)
        with np.errstate(all='ignore'):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            repulsion = (1.0 / diff).sum(axis=1)
            step = ratio / (1.0 - ratio * repulsion)
        step = np.where(np.isfinite(step), step, 0.0)
        z = z - step
        if np.all(_backward_errors(coeffs_hi, z) <= target):
            return z, iteration + 1
        if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(z))):
            return z, iteration + 1
    return z, max_iter


def complex_roots(poly: Sequence[int], eps_root: float = None, seed: int = None,
                  max_iter: int = None, restarts: int = None) -> RootResult:
    """
    All complex roots of an integer polynomial.

    Exact zero roots are split off first; linear remainders are solved
    directly. Every returned root has backward error
    |P(z)| / sum_k |c_k| |z|^k <= eps_root after polishing, and the roots
    sum to -c_(n-1)/c_n.

    Args:
        poly: integer coefficients, low to high, degree >= 1
        eps_root: backward error bound
        seed: seed of the restart perturbations
        max_iter: Aberth sweeps per attempt
        restarts: perturbed restarts after the first attempt

    Returns:
        RootResult

    Raises:
        RootFindingError: roots still uncertified after all restarts
    """
    poly = [int(c) for c in poly]
    while len(poly) > 1 and poly[-1] == 0:
        poly.pop()
    if len(poly) < 2:
        raise InvalidParameterError("root finding needs degree >= 1")
    eps_root = eps_root or settings.ROOT_EPS
    seed = settings.DEFAULT_SEED if seed is None else seed
    max_iter = max_iter or settings.ROOT_MAX_ITER
    restarts = settings.ROOT_RESTARTS if restarts is None else restarts

    zeros = 0
    while poly[zeros] == 0:
        zeros += 1
    reduced = poly[zeros:]
    roots: List[complex] = [0j] * zeros

    if len(reduced) == 2:
        roots.append(complex(-reduced[0] / reduced[1]))
    elif len(reduced) > 2:
        bits = max(abs(c).bit_length() for c in reduced)
        shift = max(0, bits - 60)
        coeffs_hi = np.array([c / (1 << shift) for c in reversed(reduced)], dtype=complex)
        rng = np.random.default_rng(seed)
        z = _initial_guesses(coeffs_hi)
        sum_tol = math.sqrt(eps_root)
        for attempt in range(restarts + 1):
            z, sweeps = _aberth(coeffs_hi, z, eps_root, max_iter)
            if np.all(np.isfinite(z)):
                z = polish_roots(reduced, z)
                residuals = certify_residuals(reduced, z)
                defect = roots_sum_defect(reduced, z)
                if np.all(residuals <= eps_root) and defect <= sum_tol:
                    logger.debug(f"Degree {len(reduced) - 1}: certified after {sweeps} sweeps "
                                 f"(attempt {attempt + 1})")
                    break
                logger.warning(f"Degree {len(reduced) - 1}: restart {attempt + 1} "
                               f"(max backward error {residuals.max():.3e}, root sum defect {defect:.3e})")
                candidates = z
                z = z * (1.0 + 1e-3 * rng.standard_normal(len(z)))
            else:
                candidates, residuals = z, np.full(len(z), np.inf)
                logger.warning(f"Degree {len(reduced) - 1}: restart {attempt + 1} (iterates diverged)")
                z = _initial_guesses(coeffs_hi, rng)
        else:
            good = [complex(w) for w, r in zip(candidates, residuals) if r <= eps_root]
            raise RootFindingError(
                f"no convergence for degree {len(reduced) - 1} after {restarts} restarts", good)
        roots.extend(complex(w) for w in z)

    roots_array = np.array(roots, dtype=complex)
    return RootResult(roots=roots_array, residuals=certify_residuals(poly, roots_array))
