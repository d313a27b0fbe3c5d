"""mgl: sharp moment constants and inequality checks for sums of two independent variables.

Exit codes: 0 success, 1 inequality violation or sharpness not attained,
2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings

from . import conditions, decompose, distributions, verifier
from .constants import Extremum, VarClass, sharp_bounds
from .errors import MomentGapError
from .functions import parse_function

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _default_seed():
    raw = os.environ.get("MGL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MGL_SEED must be an integer, got {raw!r}")


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _parse_range(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"range must look like LO:HI, got {text!r}")
    if not lo < hi:
        raise UsageError(f"empty range {text!r}")
    return lo, hi


def _rho_values(start, stop, step):
    if not step > 0:
        raise UsageError("--step must be positive")
    n = int(round((stop - start) / step)) + 1
    if n < 1:
        raise UsageError("empty rho range")
    return [round(start + i * step, 12) for i in range(n)]


# ---------------------------------------------------------------------------
# subcommands; each returns (exit code, text to emit)


def cmd_constants(args):
    report = sharp_bounds(args.rho, args.var_class, allow_trivial=args.allow_trivial)
    if args.json or args.format == "json":
        return EXIT_OK, _dump_json(report.to_json_dict())
    z = "" if report.psi_argopt is None else f"z_argopt={_fmt(report.psi_argopt)}\n"
    text = (
        f"rho={_fmt(report.rho)} class={report.var_class.value}\n"
        f"lower={_fmt(report.lower)} ({report.lower_regime.value})\n"
        f"upper={_fmt(report.upper)} ({report.upper_regime.value})\n" + z
    )
    return EXIT_OK, text


TABLE_COLUMNS = ["rho", "class", "lower", "upper", "lower_regime", "upper_regime", "z_argopt"]


def cmd_table(args):
    classes = [VarClass.CENTERED, VarClass.SYMMETRIC] if args.var_class == "both" else [VarClass(args.var_class)]
    rhos = _rho_values(args.rho_from, args.rho_to, args.step)
    if VarClass.CENTERED in classes and min(rhos) < 1.0:
        raise UsageError("centered constants need rho >= 1")
    rows = []
    for c in classes:
        for rho in rhos:
            r = sharp_bounds(rho, c)
            rows.append(r.to_json_dict())
    if args.format == "json":
        return EXIT_OK, _dump_json(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        z = "" if r["z_argopt"] is None else _fmt(r["z_argopt"])
        w.writerow([_fmt(r["rho"]), r["class"], _fmt(r["lower"]), _fmt(r["upper"]),
                    r["lower_regime"], r["upper_regime"], z])
    return EXIT_OK, buf.getvalue()


def cmd_check_fn(args):
    f = parse_function(args.fn)
    lo, hi = _parse_range(args.range)
    cond = args.cond
    if cond == "convex":
        v = conditions.check_convex_second_derivative(f, (lo, hi, args.points))
    elif cond == "symsum":
        if hi <= 0:
            raise UsageError("symsum needs a positive upper end")
        v = conditions.check_symmetric_sum_nondecreasing(f, hi, n=args.points)
    elif cond == "cross":
        v = conditions.check_cross_condition(f, lo, hi, n=args.samples, seed=args.seed)
    else:
        v = conditions.check_sqrt_convex(f, (max(lo, 0.0), hi, args.points))
    out = v.to_json_dict()
    out["function"] = f.label
    return EXIT_OK, _dump_json(out)


def cmd_fuzz(args):
    report = verifier.fuzz_inequality(args.rho, args.var_class, args.trials, seed=args.seed,
                                      workers=args.workers)
    return (EXIT_OK if report.ok else EXIT_VIOLATION), _dump_json(report.to_json_dict())


def cmd_sharpness(args):
    res = verifier.ratio_extremize(args.rho, args.var_class, args.side, seed=args.seed)
    return (EXIT_OK if res.attained else EXIT_VIOLATION), _dump_json(res.to_json_dict())


def cmd_gap(args):
    f = parse_function(args.fn)
    d1 = distributions.load(args.d1)
    d2 = distributions.load(args.d2)
    return EXIT_OK, _dump_json(verifier.gap(f, d1, d2).to_json_dict())


def cmd_decompose(args):
    d = distributions.load(args.input)
    m = decompose.decompose_symmetric(d) if args.symmetric else decompose.decompose_centered(d)
    return EXIT_OK, _dump_json(m.to_json_dict())


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=["json", "csv", "text"], default=None)
    common.add_argument("--seed", type=int, default=None, help="defaults to $MGL_SEED, then 0")
    common.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(prog="mgl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, parents=[common], **kw)
        p.set_defaults(func=fn)
        return p

    p = add("constants", cmd_constants, help="sharp constants for one rho")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--class", dest="var_class", choices=["centered", "symmetric"], required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--allow-trivial", action="store_true",
                   help="return (0, 1) for centered 0 < rho < 1")

    p = add("table", cmd_table, help="constants over a rho range as CSV")
    p.add_argument("--rho-from", type=float, required=True)
    p.add_argument("--rho-to", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--class", dest="var_class", choices=["centered", "symmetric", "both"], default="both")

    p = add("check-fn", cmd_check_fn, help="check a function-class condition")
    p.add_argument("--fn", required=True, help="e.g. abs_pow:2.5, poly:0,0,1, sawtooth, table:f.json")
    p.add_argument("--cond", choices=["convex", "symsum", "cross", "sqrt"], required=True)
    p.add_argument("--range", default="-10:10", help="LO:HI")
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--samples", type=int, default=20000)

    p = add("fuzz", cmd_fuzz, help="random search for envelope violations")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--class", dest="var_class", choices=["centered", "symmetric"], required=True)
    p.add_argument("--trials", type=int, default=10000)

    p = add("sharpness", cmd_sharpness, help="optimize the ratio towards a sharp constant")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--class", dest="var_class", choices=["centered", "symmetric"], required=True)
    p.add_argument("--side", choices=["min", "max"], required=True)

    p = add("gap", cmd_gap, help="exact gap E f(X+Y) - E f(X) - E f(Y)")
    p.add_argument("--fn", required=True)
    p.add_argument("--d1", required=True)
    p.add_argument("--d2", required=True)

    p = add("decompose", cmd_decompose, help="two-point mixture decomposition")
    p.add_argument("--input", required=True)
    p.add_argument("--symmetric", action="store_true", help="symmetric instead of centered pieces")
    return parser


_VALUE_FLAGS = {"--range"}


def _glue_negative_values(argv):
    """Turn ``--range -10:10`` into ``--range=-10:10`` so argparse accepts it."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.seed is None:
            args.seed = _default_seed()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            code, text = args.func(args)
    except (UsageError, MomentGapError, OSError) as exc:
        print(f"mgl {args.command}: error: {exc}", file=stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main():
    sys.exit(run())
