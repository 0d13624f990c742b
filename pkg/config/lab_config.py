"""
Run Configuration
=================
The Config record shared by every subcommand: defaults from settings,
then a "key = value" file, then command-line flags.
"""

import logging
import os
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Dict, Mapping, Optional

from config import settings
from core.errors import ConfigError, HeightLabError
from core.qfield import format_rational, parse_rational

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Config:
    """Validated run parameters."""
    lam: Fraction = Fraction(2)
    lift: str = settings.DEFAULT_LIFT
    escape: str = settings.DEFAULT_ESCAPE
    prime_bound: int = settings.DEFAULT_PRIME_BOUND
    n_max: int = settings.DEFAULT_N_MAX
    grid: int = settings.DEFAULT_GRID
    tol: float = settings.DEFAULT_TOL
    seed: int = settings.DEFAULT_SEED
    precision_digits: int = settings.DEFAULT_PRECISION_DIGITS
    cache_dir: str = settings.CACHE_DIR

    def __post_init__(self):
        if self.lam in (0, 1, -1):
            raise ConfigError(f"lambda = {format_rational(self.lam)} is excluded (zero or a root of unity)")
        if self.lift not in settings.SUPPORTED_LIFTS:
            raise ConfigError(f"lift must be one of {settings.SUPPORTED_LIFTS}, got {self.lift!r}")
        if self.escape not in settings.SUPPORTED_ESCAPES:
            raise ConfigError(f"escape must be one of {settings.SUPPORTED_ESCAPES}, got {self.escape!r}")
        if self.prime_bound < 2:
            raise ConfigError("P must be >= 2")
        if not 1 <= self.n_max <= settings.N_MAX_CAP:
            raise ConfigError(f"n_max must lie in [1, {settings.N_MAX_CAP}], got {self.n_max}")
        if self.grid < settings.MIN_GRID:
            raise ConfigError(f"grid must be >= {settings.MIN_GRID}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.precision_digits < 1:
            raise ConfigError("precision_digits must be positive")

    def to_dict(self) -> Dict:
        """Convert to dictionary."""
        return {
            'lambda': format_rational(self.lam),
            'lift': self.lift,
            'escape': self.escape,
            'P': self.prime_bound,
            'n_max': self.n_max,
            'grid': self.grid,
            'tol': self.tol,
            'seed': self.seed,
            'precision_digits': self.precision_digits,
            'cache_dir': self.cache_dir,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> 'Config':
        """Create from a mapping of raw (string or typed) values."""
        values = {}
        for raw_key, raw in data.items():
            key = _canonical_key(raw_key)
            if raw is None:
                continue
            values[key] = _convert(key, raw)
        try:
            return cls(**values)
        except HeightLabError as e:
            raise ConfigError(str(e)) from None


# Accepted spellings -> field name
_ALIASES = {
    'lambda': 'lam',
    'lam': 'lam',
    'lift': 'lift',
    'escape': 'escape',
    'p': 'prime_bound',
    'prime_bound': 'prime_bound',
    'n_max': 'n_max',
    'grid': 'grid',
    'tol': 'tol',
    'seed': 'seed',
    'precision_digits': 'precision_digits',
    'cache_dir': 'cache_dir',
}


def _canonical_key(key: str) -> str:
    normalized = key.strip().lower().replace('-', '_')
    if normalized not in _ALIASES:
        raise ConfigError(f"unknown configuration key: {key!r}")
    return _ALIASES[normalized]


def _convert(key: str, raw):
    types = {f.name: f.type for f in fields(Config)}
    try:
        if key == 'lam':
            return raw if isinstance(raw, Fraction) else parse_rational(str(raw))
        if types[key] in (int, 'int'):
            return int(raw)
        if types[key] in (float, 'float'):
            return float(raw)
        return str(raw).strip()
    except (ValueError, HeightLabError):
        raise ConfigError(f"malformed value for {key}: {raw!r}") from None


def read_config_file(path: str) -> Dict[str, str]:
    """Parse "key = value" lines; '#' starts a comment."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    entries = {}
    with open(path, 'r') as f:
        for number, line in enumerate(f, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition('=')
            if not sep or not key.strip():
                raise ConfigError(f"{path}:{number}: expected 'key = value'")
            entries[key.strip()] = value.strip()
    return entries


def parse_config(path: Optional[str] = None, overrides: Optional[Mapping] = None) -> Config:
    """
    Defaults <- file <- flags.

    Args:
        path: optional "key = value" file
        overrides: flag values; None entries are ignored

    Raises:
        ConfigError: unknown key, malformed value or invalid parameter
    """
    merged: Dict[str, object] = {
        'lam': settings.DEFAULT_LAMBDA,
        'cache_dir': os.getenv('HEIGHTLAB_CACHE', settings.CACHE_DIR),
    }
    if path:
        for key, value in read_config_file(path).items():
            merged[_canonical_key(key)] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[_canonical_key(key)] = value
    config = Config.from_dict(merged)
    logger.debug(f"Configuration: {config.to_dict()}")
    return config
