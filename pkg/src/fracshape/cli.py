"""fracshape command line.

Subcommands read transfer functions and loops as JSON, write CSV/JSON, and
exit with 0 on success, 2 on parse errors, 3 on numeric singularities,
4 when reproduction checks fail and 5 for unsupported factors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .approx import BandSpec, approximate_tf, oustaloup
from .compensate import plan_cancellation
from .errors import FracshapeError, ParseError, ReproductionError
from .focore import FactoredTf, Monomial, PseudoPolynomial, eval_freq, log_grid, matignon_stable, pseudo_rational
from .loopshape import DEFAULT_BAND, POINTS_PER_DECADE, LoopSpec, margins
from .reproduce import FIGURES, bode_csv, dump_json, reproduce, write_atomic
from .simtime import response_metrics, step_response

OUT_ENV = "FRACSHAPE_OUT_DIR"
TARGET_ALIASES = {"zero": None, "real": "real", "pair": "pair", "pole-pair": "stable_pair",
                  "stable_pair": "stable_pair"}


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError("cannot read %s: %s" % (path, exc.strerror)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError("%s: invalid JSON (%s)" % (path, exc)) from exc


def _read_tf(path: str) -> FactoredTf:
    return FactoredTf.from_dict(_read_json(path))


def _read_loop(path: str) -> LoopSpec:
    return LoopSpec.from_dict(_read_json(path))


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _out_dir(arg: str | None) -> str:
    return arg or os.environ.get(OUT_ENV) or "fracshape_out"


def _band(args) -> BandSpec:
    return BandSpec(args.wl, args.wh, args.N)


def cmd_bode(args) -> int:
    tf = _read_tf(args.tf)
    grid = log_grid(args.wmin, args.wmax, args.points) if args.points_per_decade else \
        np.geomspace(args.wmin, args.wmax, args.points)
    _emit(bode_csv(eval_freq(tf, grid)), args.out)
    return 0


def cmd_margins(args) -> int:
    report = margins(_read_loop(args.loop), args.wmin, args.wmax, args.ppd)
    _emit(dump_json(report.to_dict()), args.out)
    return 0


def cmd_stability(args) -> int:
    d = _read_json(args.tf)
    if isinstance(d, dict) and "coeffs" in d:
        den = PseudoPolynomial.from_dict(d)
    else:
        _, den_c, alpha = pseudo_rational(FactoredTf.from_dict(d))
        den = PseudoPolynomial(alpha, tuple(den_c))
    _emit(dump_json(matignon_stable(den).to_dict()), args.out)
    return 0


def cmd_compensate(args) -> int:
    target = TARGET_ALIASES[args.target]
    z = complex(args.z, args.zi)
    if target is None:
        target = "pair" if args.zi else "real"
    if target == "real":
        z = z.real
    plan = plan_cancellation(target, z, args.nu, args.method, args.k)
    out = _out_dir(args.out_dir)
    write_atomic(os.path.join(out, "compensator.json"), plan.compensator_tf().to_json())
    write_atomic(os.path.join(out, "residual.json"), plan.residual_tf().to_json())
    summary = {"target": target, "method": args.method, "nu": args.nu, "k": plan.k,
               "z": {"re": plan.z.real, "im": plan.z.imag}, "warnings": list(plan.warnings)}
    if args.plant:
        compensated = _read_tf(args.plant) * plan.compensator_tf()
        write_atomic(os.path.join(out, "compensated_plant.json"), compensated.to_json())
    write_atomic(os.path.join(out, "plan.json"), dump_json(summary))
    for w in plan.warnings:
        print("warning: %s" % w, file=sys.stderr)
    print(out)
    return 0


def cmd_approx(args) -> int:
    band = _band(args)
    if args.tf:
        r = approximate_tf(_read_tf(args.tf), band)
    elif args.alpha is not None:
        r = oustaloup(args.alpha, band) if 0 < args.alpha < 1 else approximate_tf(FactoredTf((Monomial(args.alpha),)), band)
    else:
        raise ParseError("give a transfer-function file or --alpha")
    _emit(dump_json({"band": [band.wl, band.wh], "N": band.N, **r.to_dict()}), args.out)
    return 0


def cmd_step(args) -> int:
    loop = _read_loop(args.loop)
    ts = step_response(loop, args.input, args.solver, args.T, args.dt, _band(args))
    _emit(ts.to_csv(), args.out)
    if args.metrics:
        final = 1.0 if args.input == "reference" else 0.0
        m = response_metrics(ts, final)
        write_atomic(args.metrics, dump_json({**m.to_dict(), "warnings": list(ts.warnings)}))
    for w in ts.warnings:
        print("warning: %s" % w, file=sys.stderr)
    return 0


def cmd_reproduce(args) -> int:
    rep = reproduce(args.figure, args.T, args.dt)
    out = _out_dir(args.out)
    rep.write(out)
    for c in rep.checks:
        print("%s %-24s %s" % ("PASS" if c.passed else "FAIL", c.name, c.detail))
    if rep.failed:
        raise ReproductionError(rep.failed)
    return 0


def _add_band(p) -> None:
    p.add_argument("--wl", type=float, default=DEFAULT_BAND[0], help="Oustaloup band lower edge (rad/s)")
    p.add_argument("--wh", type=float, default=DEFAULT_BAND[1], help="Oustaloup band upper edge (rad/s)")
    p.add_argument("--N", type=int, default=5, help="Oustaloup order (2N+1 corner pairs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracshape", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bode", help="frequency response CSV of a transfer function")
    p.add_argument("tf")
    p.add_argument("--wmin", type=float, default=DEFAULT_BAND[0])
    p.add_argument("--wmax", type=float, default=DEFAULT_BAND[1])
    p.add_argument("--points", type=int, default=601, help="total number of grid points")
    p.add_argument("--points-per-decade", action="store_true",
                   help="interpret --points per decade instead of in total")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bode)

    p = sub.add_parser("margins", help="gain/phase margins of a loop")
    p.add_argument("loop")
    p.add_argument("--wmin", type=float, default=DEFAULT_BAND[0])
    p.add_argument("--wmax", type=float, default=DEFAULT_BAND[1])
    p.add_argument("--ppd", type=int, default=POINTS_PER_DECADE, help="grid points per decade")
    p.add_argument("--out")
    p.set_defaults(func=cmd_margins)

    p = sub.add_parser("stability", help="Matignon test of a pseudo polynomial or a transfer-function denominator")
    p.add_argument("tf")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("compensate", help="build a fractional-order partial cancellation")
    p.add_argument("--plant", help="optional plant file; writes plant*compensator as well")
    p.add_argument("--target", choices=sorted(TARGET_ALIASES), default="zero")
    p.add_argument("--z", type=float, required=True, help="real part of the zero/pole")
    p.add_argument("--zi", type=float, default=0.0, help="imaginary part (pairs)")
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--k", type=int, default=1, choices=(-1, 1))
    p.add_argument("--method", choices=("explicit", "implicit", "mirror"), default="explicit")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_compensate)

    p = sub.add_parser("approx", help="Oustaloup rational approximation")
    p.add_argument("tf", nargs="?")
    p.add_argument("--alpha", type=float, help="approximate s**alpha instead of a file")
    _add_band(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("step", help="closed-loop step response CSV")
    p.add_argument("loop")
    p.add_argument("--solver", choices=("oustaloup", "gl"), default="oustaloup")
    p.add_argument("--input", choices=("reference", "disturbance"), default="reference")
    p.add_argument("--T", type=float, default=60.0, help="end time (s)")
    p.add_argument("--dt", type=float, default=1e-3)
    _add_band(p)
    p.add_argument("--out")
    p.add_argument("--metrics", help="also write response metrics JSON here")
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("reproduce", help="regenerate the worked example data and checks")
    p.add_argument("--figure", choices=FIGURES, default="all")
    p.add_argument("--out", help="output directory (default $%s or ./fracshape_out)" % OUT_ENV)
    p.add_argument("--T", type=float, default=60.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FracshapeError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
