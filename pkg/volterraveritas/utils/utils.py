import csv
import math
from pathlib import Path
from typing import Dict, Iterable, Sequence, TextIO, Union

import numpy as np


def str_missing_key(error):
    """Return the name of a missing key from KeyError exceptions."""
    e = str(error)
    e = e[1:]
    e = e[:-1]
    return e


def is_finite_number(value) -> bool:
    """
    Helper function that checks if the input is a real, finite number (bools are not numbers here).
    Args:
        value: Anything you want to know is usable as a numeric parameter.

    Returns:
        bool: Is value a finite real number?
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False
    return math.isfinite(value)


def format_float(value) -> str:
    """
    Renders a number for CSV output. Uses the shortest round-tripping representation so that two runs
    producing the same floats produce the same bytes, independent of locale.
    Args:
        value: int, float or anything else (rendered with str).

    Returns:
        The string written into the CSV cell.
    """
    if isinstance(value, (bool, np.bool_)):
        return '1' if value else '0'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return repr(float(value))
    try:
        return repr(float(value))
    except (TypeError, ValueError):
        return str(value)


def dict_to_csv(rows: Iterable[Dict], columns: Sequence[str], target: Union[str, Path, TextIO]) -> int:
    """
    Writes rows to a csv with a single header row. Values are passed through format_float.
    Args:
        rows: dicts keyed by column name. Keys not in columns are an error.
        columns: header, in output order.
        target: filepath, or an already open text stream such as sys.stdout.

    Returns:
        Number of data rows written.
    """
    if isinstance(target, (str, Path)):
        with open(target, 'w', newline='') as csvfile:
            return _write_rows(rows, columns, csvfile)
    return _write_rows(rows, columns, target)


def _write_rows(rows, columns, stream) -> int:
    writer = csv.DictWriter(stream, fieldnames=list(columns), lineterminator='\n')
    writer.writeheader()
    count = 0
    for row in rows:
        writer.writerow({k: format_float(v) for k, v in row.items()})
        count += 1
    stream.flush()
    return count
