"""
Fn Cache Module
===============
On-disk store of reduced iterates F_n, one text file per
(lambda, sign, n, lift). Writes go to a temp file and are renamed
into place, so readers only ever see complete files.
"""

import logging
import os
import tempfile
from typing import List, Optional

from config import settings
from core.errors import CacheError
from core.per1 import CriticalSign, FnEntry, Lambda, LiftVariant
from core.polyforms import BinaryForm, BinaryFormPair

logger = logging.getLogger(__name__)


class FnCache:
    """Directory of PER1FN files."""

    def __init__(self, cache_dir: str = None):
        self.cache_dir = cache_dir or os.getenv('HEIGHTLAB_CACHE', settings.CACHE_DIR)
        self.hits = 0
        self.misses = 0

    @staticmethod
    def header(lam: Lambda, sign: CriticalSign, lift: LiftVariant, n: int) -> str:
        return (f"PER1FN {settings.CACHE_VERSION} lambda={lam.numerator}/{lam.denominator} "
                f"sign={sign.symbol} n={n} lift={lift.value}")

    def path_for(self, lam: Lambda, sign: CriticalSign, lift: LiftVariant, n: int) -> str:
        lam_key = f"{lam.numerator}_{lam.denominator}".replace('-', 'm')
        sign_key = 'p' if sign is CriticalSign.PLUS else 'm'
        return os.path.join(self.cache_dir, f"F{n}_{lam_key}_{sign_key}_{lift.value}.per1fn")

    def store(self, lam: Lambda, sign: CriticalSign, lift: LiftVariant, entry: FnEntry):
        """Write one entry atomically."""
        os.makedirs(self.cache_dir, exist_ok=True)
        path = self.path_for(lam, sign, lift, entry.n)
        text = '\n'.join([self.header(lam, sign, lift, entry.n)] + entry.to_lines()) + '\n'
        fd, tmp_path = tempfile.mkstemp(dir=self.cache_dir, suffix='.tmp')
        try:
            with os.fdopen(fd, 'w') as f:
                f.write(text)
            os.replace(tmp_path, path)
        except OSError as e:
            logger.warning(f"Failed to cache F_{entry.n}: {e}")
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            return
        logger.debug(f"Cached F_{entry.n} -> {path}")

    def load(self, lam: Lambda, sign: CriticalSign, lift: LiftVariant, n: int) -> Optional[FnEntry]:
        """
        Read one entry, or None when absent, stale or corrupt.

        Stale and corrupt files are reported and left for the next store
        to overwrite.
        """
        path = self.path_for(lam, sign, lift, n)
        if not os.path.exists(path):
            self.misses += 1
            return None
        try:
            with open(path, 'r') as f:
                lines = f.read().strip('\n').split('\n')
            entry = self._parse(lines, self.header(lam, sign, lift, n), n)
        except CacheError as e:
            logger.warning(f"Ignoring cache file {path}: {e}")
            self.misses += 1
            return None
        except OSError as e:
            logger.warning(f"Failed to read cache file {path}: {e}")
            self.misses += 1
            return None
        self.hits += 1
        return entry

    @staticmethod
    def _parse(lines: List[str], expected_header: str, n: int) -> FnEntry:
        if not lines or not lines[0].startswith('PER1FN '):
            raise CacheError("missing PER1FN header")
        version = lines[0].split()[1]
        if version != settings.CACHE_VERSION:
            raise CacheError(f"stale version {version} (reader is {settings.CACHE_VERSION})")
        if lines[0] != expected_header:
            raise CacheError(f"header mismatch: {lines[0]!r}")
        if len(lines) != 6:
            raise CacheError(f"expected 6 lines, found {len(lines)}")

        pair = BinaryFormPair.from_lines(lines[1:4])
        fields = lines[4].split()
        if len(fields) != 3 or fields[0] != 'GCD' or not fields[1].startswith('deg=') \
                or not fields[2].startswith('content='):
            raise CacheError(f"bad GCD line: {lines[4]!r}")
        try:
            gcd_degree = int(fields[1][4:])
            content = int(fields[2][8:])
            gcd_coeffs = tuple(int(tok) for tok in lines[5].split())
        except ValueError as e:
            raise CacheError(f"malformed GCD block: {e}") from None
        removed = BinaryForm(gcd_coeffs)
        if removed.is_zero or removed.degree != gcd_degree or content < 1:
            raise CacheError("inconsistent GCD block")
        return FnEntry(n=n, pair=pair, removed_gcd=removed, content=content)

    def clear(self):
        """Remove every cache file in the directory."""
        if not os.path.isdir(self.cache_dir):
            return
        for name in os.listdir(self.cache_dir):
            if name.endswith('.per1fn'):
                os.remove(os.path.join(self.cache_dir, name))


# Singleton instance
_fn_cache = None


def get_fn_cache(cache_dir: str = None) -> FnCache:
    """Get or create the cache singleton; a new directory replaces it."""
    global _fn_cache
    if _fn_cache is None or (cache_dir is not None and cache_dir != _fn_cache.cache_dir):
        _fn_cache = FnCache(cache_dir)
    return _fn_cache
