#!/usr/bin/env python3
"""Plot the modal-reconstruction convergence recorded by the sweep.

Reads <results>/convergence.csv and renders one decay curve per structure
length on a log error axis."""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("results", nargs="?", default="results", help="sweep output directory")
    ap.add_argument("--out", default=None, help="output image (default: <results>/convergence.png)")
    args = ap.parse_args(argv)

    table = Path(args.results) / "convergence.csv"
    if not table.is_file():
        print(f"error: {table} not found; run the sweep first", file=sys.stderr)
        return 1

    curves: dict[float, list[tuple[int, float]]] = defaultdict(list)
    with open(table, newline="") as fh:
        for row in csv.DictReader(fh):
            curves[float(row["length_lambda0"])].append(
                (int(row["n_modes"]), float(row["relative_error_dimensionless"]))
            )

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for length in sorted(curves):
        pts = sorted(curves[length])
        ax.semilogy([n for n, _ in pts], [e for _, e in pts], marker="o", ms=3,
                    label=f"l = {length:g}")
    ax.set_xlabel("modes used")
    ax.set_ylabel("relative field error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()

    out = Path(args.out) if args.out else Path(args.results) / "convergence.png"
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
