"""Command-line front end: ``mixsio <subcommand> [options]``.

Exit status is 0 on success, 1 when any sweep row failed, 2 on bad
configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, MixsioError
from .grid import grid_preset, sample, save_grid_function
from .lemma import LemmaParams, young_bound_constant
from .norms import NormParams, weighted_mixed_norm
from .sio import apply_spectral, check_kernel_conditions, kernel_by_label
from .sweep import FAMILIES, SweepConfig, blowup_probe, emit_reports, make_test_function, run_sweep

EXIT_OK, EXIT_FAILED_ROWS, EXIT_CONFIG = 0, 1, 2


def _emit(args, name, payload):
    """Print ``payload`` as JSON and store it under ``--out`` when given."""
    text = json.dumps(payload, indent=1, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text + "\n")


def _exponents(args, n):
    return NormParams(args.p, args.p_tilde, args.alpha, n)


def cmd_norm(args):
    spec = grid_preset(args.grid_preset, args.n)
    phi = make_test_function(args.family, args.param, args.n)
    polar = spec.scaled(phi.length_scale).polar()
    value = weighted_mixed_norm(sample(phi, polar), _exponents(args, args.n))
    _emit(args, "norm", {"family": args.family, "param": args.param, "p": args.p, "p_tilde": args.p_tilde,
                         "alpha": args.alpha, "n": args.n, "norm": value})
    return EXIT_OK


def cmd_riesz(args):
    spec = grid_preset(args.grid_preset, args.n)
    phi = make_test_function(args.family, args.param, args.n)
    K = kernel_by_label(args.kernel, args.n)
    cart = spec.scaled(phi.length_scale).cartesian()
    out, info = apply_spectral(K, sample(phi, cart), return_info=True)
    if args.dump_field:
        save_grid_function(args.dump_field, out)
    _emit(args, "riesz", {"kernel": K.label, "family": args.family, "param": args.param,
                          "sup": float(np.abs(out.values).max()), **info})
    return EXIT_OK


def cmd_lemma(args):
    rep = young_bound_constant(LemmaParams(args.n, args.p, args.alpha), args.delta, args.M)
    _emit(args, "lemma", rep.to_dict())
    return EXIT_OK


def cmd_sharpness(args):
    spec = grid_preset(args.grid_preset, args.n)
    deltas = np.logspace(math.log10(args.delta_max), math.log10(args.delta_min), args.count)
    fit = blowup_probe(_exponents(args, args.n), kernel_by_label(args.kernel, args.n), deltas, spec)
    _emit(args, "sharpness", fit.to_dict())
    if args.plot_data and args.out:
        inv = 1.0 / np.asarray(fit.deltas)
        np.savetxt(Path(args.out) / "sharpness.dat", np.column_stack([inv, fit.ratios])[np.argsort(inv)],
                   fmt="%.17g", header="inv_delta truncated_ratio (log-log)")
    return EXIT_OK


def cmd_check_kernel(args):
    K = kernel_by_label(args.kernel, args.n)
    radii = np.logspace(math.log10(args.r_min), math.log10(args.r_max), args.n_radii)
    rep = check_kernel_conditions(K, radii, cap=args.cap)
    _emit(args, "check_kernel", {"kernel": K.label, **rep.to_dict(), "is_cz": bool(rep.is_cz)})
    return EXIT_OK


def cmd_sweep(args):
    config = SweepConfig.from_json(args.config)
    if args.grid_preset_given:
        config.grid_preset = args.grid_preset
    out = args.out or config.output_dir
    reports = run_sweep(config)
    emit_reports(reports, out, args.format, args.plot_data)
    failures = sum(len(r.failures) for r in reports)
    print(f"{len(reports)} parameter points, {sum(len(r.rows) for r in reports)} rows, "
          f"{failures} failures -> {out}")
    return EXIT_FAILED_ROWS if failures else EXIT_OK


def _global_flags(suppress):
    """Global flags; the per-subcommand copy suppresses defaults so it never
    overrides values given before the subcommand."""
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--out", metavar="DIR", help="output directory", **(kw or {"default": None}))
    g.add_argument("--format", choices=("csv", "json"), **(kw or {"default": "csv"}))
    g.add_argument("--plot-data", action="store_true", help="also write two-column .dat files", **kw)
    g.add_argument("--grid-preset", choices=("default", "fine"), **(kw or {"default": None}))
    g.add_argument("--n", type=int, choices=(2, 3), help="dimension", **(kw or {"default": 2}))
    return g


def build_parser():
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="mixsio", description=__doc__.splitlines()[0], parents=[_global_flags(False)])
    sub = parser.add_subparsers(dest="command", required=True)

    def exps(sp, alpha_default=0.0):
        sp.add_argument("--p", type=float, default=2.0)
        sp.add_argument("--p-tilde", type=float, default=2.0)
        sp.add_argument("--alpha", type=float, default=alpha_default)

    sp = sub.add_parser("norm", parents=[common], help="weighted mixed norm of a family member")
    sp.add_argument("--family", choices=FAMILIES, default="gaussian_dilations")
    sp.add_argument("--param", type=float, default=1.0)
    exps(sp)
    sp.set_defaults(func=cmd_norm)

    sp = sub.add_parser("riesz", parents=[common], help="apply a kernel spectrally")
    sp.add_argument("--family", choices=FAMILIES, default="gaussian_dilations")
    sp.add_argument("--param", type=float, default=1.0)
    sp.add_argument("--kernel", default="riesz", help="riesz, riesz:a,b[,c] or power:s")
    sp.add_argument("--dump-field", metavar="PATH", help="write the transformed field as a text table")
    sp.set_defaults(func=cmd_riesz)

    sp = sub.add_parser("lemma", parents=[common], help="I/II/III split of the bound constant")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--delta", type=float, default=1e-3)
    sp.add_argument("--M", type=float, default=1e3)
    sp.set_defaults(func=cmd_lemma)

    sp = sub.add_parser("sweep", parents=[common], help="ratio sweep from a JSON config")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("sharpness", parents=[common], help="blow-up probe at a boundary point")
    exps(sp, alpha_default=-1.25)
    sp.add_argument("--kernel", default="riesz")
    sp.add_argument("--delta-min", type=float, default=1e-4)
    sp.add_argument("--delta-max", type=float, default=1e-2)
    sp.add_argument("--count", type=int, default=9)
    sp.set_defaults(func=cmd_sharpness)

    sp = sub.add_parser("check-kernel", parents=[common], help="size/smoothness/Fourier report")
    sp.add_argument("--kernel", default="riesz")
    sp.add_argument("--cap", type=float, default=1.0)
    sp.add_argument("--r-min", type=float, default=1e-2)
    sp.add_argument("--r-max", type=float, default=1e2)
    sp.add_argument("--n-radii", type=int, default=41)
    sp.set_defaults(func=cmd_check_kernel)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    args.grid_preset_given = args.grid_preset is not None
    if args.grid_preset is None:
        args.grid_preset = "default"
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MixsioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
