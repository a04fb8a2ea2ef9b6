#!/usr/bin/env python3
"""End-to-end dipole experiment: modal extraction, nested-length sweep,
reconstruction comparison, and cross-basis matrix dump, all from one config.

Equivalent to running the four `wirecm` subcommands by hand; kept as a script
so the whole experiment is one command and one exit code."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from wirecm.cli import main as cli_main  # noqa: E402

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "dipole.ini"


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(DEFAULT_CONFIG), help="experiment INI file")
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="sweep worker threads")
    ap.add_argument(
        "--length",
        type=float,
        default=1.0,
        help="length (in wavelengths) for the reconstruction and matrix dump",
    )
    args = ap.parse_args(argv)

    common = ["--config", args.config, "--out", args.out]
    worst = 0

    print("== extracting reference modes ==")
    worst = max(worst, cli_main(["modes", *common]))
    if worst:
        return worst

    print("== nested-length sweep ==")
    worst = max(worst, cli_main(["sweep", *common, "--threads", str(args.threads)]))

    bundle = str(Path(args.out) / "reference_modes.bundle")
    print(f"== reconstruction at l = {args.length:g} ==")
    worst = max(
        worst,
        cli_main(["reconstruct", *common, "--bundle", bundle, "--length", str(args.length)]),
    )

    print(f"== cross-basis matrices at l = {args.length:g} ==")
    worst = max(worst, cli_main(["xform", *common, "--length", str(args.length)]))

    print(f"done; outputs in {args.out} (exit {worst})")
    return worst


if __name__ == "__main__":
    sys.exit(run())
