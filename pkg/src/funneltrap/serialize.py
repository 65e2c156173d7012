"""CSV and summary writing shared by the record types.

Numbers are printed with repr, the shortest string that parses back to the
exact float ('.' decimal, no grouping, scientific notation where repr uses
it), so identical data always serializes to identical bytes and every value
round-trips at full precision.
"""

import json

import numpy as np


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))    # numpy scalars repr as np.float64(...)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows, metadata=None):
    """Write rows of mixed scalars as CSV.

    columns : sequence of column names
    rows : iterable of row sequences
    metadata : optional mapping, written as leading '# key = value' lines
    """
    with open(path, "w", newline="") as fh:
        if metadata:
            for k in sorted(metadata):
                fh.write(f"# {k} = {format_value(metadata[k])}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_summary(path, payload: dict):
    """Write a key-value summary as sorted strict JSON."""
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
