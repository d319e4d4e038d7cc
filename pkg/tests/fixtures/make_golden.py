"""Regenerate channel_golden.csv from the independent quad-based oracles.

Run from the repository root:

    python3 tests/fixtures/make_golden.py

The frozen values are what the test suite asserts against; regenerate only
when the oracle definitions themselves change, and review the diff.
"""

import csv
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1]))

import numpy as np

from oracles import (
    binary_info_quad,
    binary_info_via_mmse,
    binary_mmse_quad,
    grid_minimize_scalar,
)

OUT = pathlib.Path(__file__).with_name("channel_golden.csv")


def main():
    rows = [("quantity", "param", "value")]

    for s in (0.25, 0.5, 1.0, 2.0, 4.0):
        rows.append(("binary_info", f"{s}", f"{binary_info_quad(s):.12f}"))
        rows.append(("binary_mmse", f"{s}", f"{binary_mmse_quad(s):.12f}"))
    rows.append(("binary_info_immse_route", "1.0",
                 f"{binary_info_via_mmse(1.0):.12f}"))

    # Skew prior spot value exercises the non-symmetric embedding.
    rows.append(("binary_info_p0.1", "1.0",
                 f"{binary_info_quad(1.0, p1=0.1):.12f}"))
    rows.append(("binary_mmse_p0.1", "1.0",
                 f"{binary_mmse_quad(1.0, p1=0.1):.12f}"))

    for lam in np.arange(0.25, 2.51, 0.25):
        u, f = grid_minimize_scalar(float(lam))
        rows.append(("grid_u_star", f"{lam:.2f}", f"{u:.12f}"))
        rows.append(("grid_f_star", f"{lam:.2f}", f"{f:.12f}"))

    with OUT.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    print(f"wrote {OUT} ({len(rows) - 1} values)")


if __name__ == "__main__":
    main()
