"""
Equidistribution Lab
====================
Small-height parameter sets S_n (roots of P_n), their discrete energies
against mu_inf^+ and mu_inf^-, point-cloud export and annulus histograms.
"""

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from config import settings
from core.errors import InvalidParameterError
from core.per1 import CriticalSign, Lambda, ParameterSet, periodic_parameter_poly
from core.potentials import MeasureSpec, PotentialCalculator, get_potential_calculator
from core.qfield import ARCHIMEDEAN, Place
from core.roots import complex_roots

logger = logging.getLogger(__name__)


@dataclass
class EnergyTrend:
    """Discrete energies of S_n against one measure, level by level."""
    lam: Lambda
    sign: CriticalSign
    place: Place
    levels: List[int] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)
    sizes: List[int] = field(default_factory=list)

    def is_decreasing_in_magnitude(self) -> bool:
        """|energy| strictly decreases over the levels with more than one point."""
        magnitudes = [abs(e) for e, size in zip(self.energies, self.sizes) if size > 1]
        return all(b < a for a, b in zip(magnitudes, magnitudes[1:]))

    def to_dict(self) -> Dict:
        return {
            'n': self.levels,
            'energy': self.energies,
            'place': self.place.label,
            'sign': self.sign.symbol,
        }


def build_Sn(lam, s: CriticalSign, n: int, potentials: PotentialCalculator = None,
             eps_root: float = None, seed: int = None) -> ParameterSet:
    """
    Parameters where the marked critical point has period dividing n.

    Raises:
        RootFindingError: the roots of P_n could not be certified
    """
    if n < 1:
        raise InvalidParameterError("level must be >= 1")
    lam = Lambda.of(lam)
    s = CriticalSign.parse(s)
    potentials = potentials or get_potential_calculator()
    eps_root = eps_root or settings.ROOT_EPS

    start = time.time()
    poly = periodic_parameter_poly(lam, s, n, potentials.lift, potentials.cache)
    result = complex_roots(poly, eps_root=eps_root, seed=seed)
    logger.info(f"S_{n}^{s.symbol}: {len(result.roots)} roots, max residual "
                f"{result.residuals.max():.2e} in {time.time() - start:.2f}s")
    return ParameterSet(level=n, lam=lam, sign=s, poly=poly, roots=result.roots,
                        residuals=result.residuals, eps_root=eps_root)


def energy_trend(lam, s: CriticalSign, levels: Sequence[int], v: Place = ARCHIMEDEAN,
                 potentials: PotentialCalculator = None, seed: int = None) -> EnergyTrend:
    """([S_n], [S_n])_v against the normalized potential of mu_v^s for each n."""
    levels = list(levels)
    if levels != sorted(levels) or not levels:
        raise InvalidParameterError("levels must be nonempty and ascending")
    if not v.is_archimedean:
        raise InvalidParameterError("energies are computed at the archimedean place only")
    lam = Lambda.of(lam)
    s = CriticalSign.parse(s)
    potentials = potentials or get_potential_calculator()
    spec = MeasureSpec.pure(lam, s)

    trend = EnergyTrend(lam, s, v)
    for n in levels:
        points = build_Sn(lam, s, n, potentials, seed=seed)
        energy = potentials.pair_energy(points.roots, spec, v)
        trend.levels.append(n)
        trend.energies.append(energy)
        trend.sizes.append(len(points))
        logger.info(f"Energy of S_{n}^{s.symbol}: {energy:.6e} ({len(points)} points)")
    return trend


def energy_table(trend: EnergyTrend) -> pd.DataFrame:
    return pd.DataFrame({'n': trend.levels, 'size': trend.sizes, 'energy': trend.energies},
                        columns=['n', 'size', 'energy'])


def pointcloud_frame(points: ParameterSet) -> pd.DataFrame:
    order = points.sorted_order()
    return pd.DataFrame({
        're': points.roots.real[order],
        'im': points.roots.imag[order],
        'residual': points.residuals[order],
    }, columns=['re', 'im', 'residual'])


def pointcloud_export(points: ParameterSet, path: str) -> str:
    """Write re,im,residual per root, sorted by (re, im)."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    pointcloud_frame(points).to_csv(path, index=False, float_format='%.17g')
    logger.info(f"Wrote {len(points)} points to {path}")
    return path


def annulus_histogram(points: ParameterSet, center: complex, bins: Sequence[float]) -> pd.DataFrame:
    """
    Fraction of roots in each annulus around center.

    With radii r_1 < ... < r_k the annuli are [0, r_1), [r_1, r_2), ...,
    [r_k, inf); the masses sum to 1.
    """
    bins = [float(b) for b in bins]
    if not bins or any(b <= 0 for b in bins) or bins != sorted(bins) or len(set(bins)) != len(bins):
        raise InvalidParameterError("bins must be positive and strictly ascending")
    distances = np.abs(points.roots - complex(center))
    edges = [0.0] + bins + [np.inf]
    counts = np.bincount(np.searchsorted(bins, distances, side='right'), minlength=len(edges) - 1)
    return pd.DataFrame({
        'inner': edges[:-1],
        'outer': edges[1:],
        'mass': counts / len(distances),
    }, columns=['inner', 'outer', 'mass'])
