"""Command-line front end for the dipole experiment.

Four subcommands: `modes` extracts and stores the reference modal basis,
`sweep` runs the nested-length experiment with its self-check report,
`reconstruct` compares field reconstructions against the direct solve at one
length, and `xform` dumps the cross-basis matrices for one length.

Exit codes: 0 on success, 1 when inputs fail validation, 2 when a numerical
self-check fails.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import NumericalError, ValidationError
from .modes import load_bundle, save_bundle
from .pipeline import (
    build_reference,
    run_reconstruct,
    run_sweep,
    run_xform,
    write_csv,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; bad arguments are validation
    failures here, so remap them to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _report_failures(checks) -> int:
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(c.line())
    if failed:
        print("failed checks:", file=sys.stderr)
        for c in failed:
            print(f"  {c.line()}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else Path(cfg.output_dir)


def cmd_modes(args) -> int:
    cfg = load_config(args.config)
    state = build_reference(cfg)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_bundle(state.basis, out / "reference_modes.bundle")
    rows = [(n + 1, lam) for n, lam in enumerate(state.basis.eigenvalues)]
    write_csv(out / "eigenvalues.csv", "mode,eigenvalue_dimensionless", rows)
    print(
        f"retained {state.basis.mode_count} modes on {state.basis.basis_size} unknowns; "
        f"wrote {out / 'reference_modes.bundle'} and {out / 'eigenvalues.csv'}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    state = build_reference(cfg)
    out = _out_dir(args, cfg)
    checks = run_sweep(state, out, threads=max(1, args.threads))
    print(f"swept {len(cfg.sweep_lengths)} lengths into {out}")
    return _report_failures(checks)


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    basis = load_bundle(args.bundle)
    state = build_reference(cfg)
    out = _out_dir(args, cfg)
    checks = run_reconstruct(state, basis, args.length, out, n_modes=args.modes)
    print(f"wrote {out / f'reconstruct_{args.length:g}.csv'}")
    return _report_failures(checks)


def cmd_xform(args) -> int:
    cfg = load_config(args.config)
    state = build_reference(cfg)
    out = _out_dir(args, cfg)
    checks = run_xform(state, args.length, out)
    print(f"wrote cross-basis matrices for l={args.length:g} into {out}")
    return _report_failures(checks)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="wirecm",
        description="Characteristic-mode scattering experiments on nested wire dipoles.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config file (INI)")
        p.add_argument("--out", default=None, help="output directory (default: config [output])")
        p.set_defaults(func=func)
        return p

    add("modes", cmd_modes, "extract the reference modal basis to a bundle + CSV")

    p_sweep = add("sweep", cmd_sweep, "run the nested-length sweep with self-checks")
    p_sweep.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")

    p_rec = add("reconstruct", cmd_reconstruct, "compare reconstructions against the direct solve")
    p_rec.add_argument("--bundle", required=True, help="modal bundle of the reference structure")
    p_rec.add_argument("--length", type=float, required=True, help="structure length in lambda0")
    p_rec.add_argument("--modes", type=int, default=None, help="mode truncation (default: all)")

    p_x = add("xform", cmd_xform, "dump cross-basis matrices for one length")
    p_x.add_argument("--length", type=float, required=True, help="structure length in lambda0")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical check failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
