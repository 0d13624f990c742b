"""
Reporting Module
================
JSON and CSV rendering for the command-line reports. Output is sorted
and fixed-format so that equal inputs give byte-identical files.
"""

import json
import logging
import math
import os
import sys
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from core.qfield import Place, format_rational

logger = logging.getLogger(__name__)


def to_jsonable(obj: Any) -> Any:
    """
    Recursively convert a report into plain JSON types.

    Fractions become "a/b" strings, complex numbers [re, im] pairs and
    non-finite floats the strings "inf", "-inf" or "nan".
    """
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(value) for value in obj.tolist()]
    if isinstance(obj, pd.DataFrame):
        return frame_records(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return format_rational(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, Place):
        return obj.label
    if isinstance(obj, Enum):
        return obj.value
    if hasattr(obj, 'to_dict'):
        return to_jsonable(obj.to_dict())
    return obj


def frame_records(frame: pd.DataFrame) -> List[Dict]:
    """DataFrame -> list of row dicts in column order."""
    return [to_jsonable(dict(zip(frame.columns, row))) for row in frame.itertuples(index=False, name=None)]


def dump_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + '\n'


def write_report(obj: Any, out: Optional[str] = None) -> str:
    """
    Write a JSON report to the file `out`, or to stdout when out is None.

    Returns:
        The rendered text
    """
    text = dump_json(obj)
    if out:
        directory = os.path.dirname(out)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(out, 'w') as f:
            f.write(text)
        logger.info(f"Report written to {out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    return text
