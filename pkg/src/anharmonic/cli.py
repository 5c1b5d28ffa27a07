"""Command-line front end.

Exit status: 0 success, 1 failed validation or computation, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from . import __version__, hypalg, oracle, thermo, validation, vpt
from .amplitude import AmplitudeSeries, amplitude_breakdown
from .bwrec import N_MAX, CoeffKey, cached_table, coefficient_stats
from .errors import AnharmonicError
from .params import ModelParams, default_precision


class UsageError(Exception):
    pass


def _positive(name):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} expects a number, got {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive, got {text}")
        return v
    return parse


def _nonneg(name):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} expects a number, got {text!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"{name} must be non-negative, got {text}")
        return v
    return parse


def _order(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--order expects an integer, got {text!r}") from None
    if not 0 <= n <= N_MAX:
        raise argparse.ArgumentTypeError(f"--order must lie in 0..{N_MAX}, got {n}")
    return n


def _range(name, integer_steps=True):
    def parse(text):
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"{name} expects lo:hi:steps, got {text!r}")
        try:
            lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} expects lo:hi:steps, got {text!r}") from None
        if not (0 < lo < hi) or steps < 2:
            raise argparse.ArgumentTypeError(f"{name} needs 0 < lo < hi and steps >= 2, got {text!r}")
        return lo, hi, steps
    return parse


def _key(text):
    try:
        n, k, l = (int(v) for v in text.split(","))
        return CoeffKey.checked(n, k, l)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--key expects n,k,l: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anharmonic",
                                 description="Perturbative and variational thermodynamics "
                                             "of the quartic anharmonic oscillator.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-o", "--output", help="write to this file instead of stdout")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="coefficient table of the amplitude")
    p.add_argument("--order", type=_order, required=True)
    p.add_argument("--key", type=_key, help="single entry n,k,l")
    p.add_argument("--format", choices=("json", "latex", "text"), default="json")

    p = sub.add_parser("amplitude", help="imaginary-time amplitude (x_b hbar beta | x_a 0)")
    p.add_argument("--xa", type=float, required=True)
    p.add_argument("--xb", type=float, required=True)
    p.add_argument("--beta", type=_positive("--beta"), required=True)
    p.add_argument("--g", type=_nonneg("--g"), default=0.0)
    p.add_argument("--omega", type=_positive("--omega"), default=1.0)
    p.add_argument("--order", type=_order, default=1)

    p = sub.add_parser("free-energy", help="truncated weak-coupling free energy")
    p.add_argument("--order", type=_order, required=True)
    p.add_argument("--beta", type=_positive("--beta"))
    p.add_argument("--sweep", type=_range("--sweep"), help="beta grid b0:b1:steps")
    p.add_argument("--g", type=_nonneg("--g"), default=0.0)
    p.add_argument("--omega", type=_positive("--omega"), default=1.0)
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("vpt", help="variationally resummed free energy")
    p.add_argument("--order", type=_order, required=True)
    p.add_argument("--beta", type=_positive("--beta"))
    p.add_argument("--sweep", type=_range("--sweep"), help="beta grid b0:b1:steps (continuation)")
    p.add_argument("--g", type=_nonneg("--g"), required=True)
    p.add_argument("--scan", type=_range("--scan"), default=vpt.SCAN_DEFAULT,
                   help="Omega window in units of omega, lo:hi:steps")
    p.add_argument("--tol", type=_positive("--tol"), default=1e-10)
    p.add_argument("--report", type=float, metavar="REFERENCE",
                   help="convergence table against this reference value")
    p.add_argument("--format", choices=("json", "csv"))

    p = sub.add_parser("spectrum", help="energy levels by the shooting method")
    p.add_argument("--g", type=_nonneg("--g"), required=True)
    p.add_argument("--levels", type=int, default=10)
    p.add_argument("--tol", type=_positive("--tol"), default=oracle.TOL)
    p.add_argument("--x-max", type=_positive("--x-max"), default=oracle.X_MAX)
    p.add_argument("--step", type=_positive("--step"), default=oracle.STEP)
    p.add_argument("--beta", type=_positive("--beta"), help="also report the spectral free energy")

    p = sub.add_parser("classical", help="classical partition function")
    p.add_argument("--beta", type=_positive("--beta"), required=True)
    p.add_argument("--g", type=_positive("--g"), required=True)

    p = sub.add_parser("validate", help="run the cross-check battery")
    p.add_argument("--suite", choices=validation.SUITES, default="all")
    return ap


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        raise TypeError(f"not serializable: {type(o)}")
    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _grid(args):
    if args.sweep is not None and args.beta is not None:
        raise UsageError("--beta and --sweep are mutually exclusive")
    if args.sweep is not None:
        lo, hi, steps = args.sweep
        return [float(b) for b in np.linspace(lo, hi, steps)]
    if args.beta is None:
        raise UsageError("one of --beta or --sweep is required")
    return [args.beta]


def cmd_coeffs(args, params):
    table = cached_table(max(args.order, 0))
    if args.key is not None:
        if args.key.n > args.order:
            raise UsageError(f"--key {tuple(args.key)} lies above --order {args.order}")
        expr = table[args.key]
        if args.format == "latex":
            return hypalg.to_latex(expr) + "\n", 0
        if args.format == "text":
            return hypalg.to_text(expr) + "\n", 0
        return _json({"key": list(args.key), "expr": hypalg.expr_to_json(expr),
                      "text": hypalg.to_text(expr), "latex": hypalg.to_latex(expr)}), 0
    keys = table.keys_of_order(args.order)
    if args.format == "json":
        data = table.to_json(args.order)
        data["stats"] = coefficient_stats(args.order)
        return _json(data), 0
    render = hypalg.to_latex if args.format == "latex" else hypalg.to_text
    lines = [f"c[{k.n},{k.k},{k.l}] = {render(table[k])}" for k in keys]
    return "\n".join(lines) + "\n", 0


def cmd_amplitude(args, params):
    p = params.replace(g=args.g, omega=args.omega)
    series = AmplitudeSeries.build(args.order, p)
    return _json(amplitude_breakdown(series, args.xb, args.xa, args.beta)), 0


def cmd_free_energy(args, params):
    p = params.replace(omega=args.omega)
    series = thermo.z_series(cached_table(args.order), args.order)
    rows = []
    results = []
    for b in _grid(args):
        res = thermo.f_series_eval(series, b, args.omega, args.g, args.order, p)
        partial = 0.0
        for n, v in enumerate(res["perOrder"]):
            partial += v
            rows.append((b, n, v, partial))
        results.append({"beta": b, **res})
    if args.format == "csv":
        return _csv(("beta", "order", "F_n", "F_truncated"), rows), 0
    payload = results[0] if len(results) == 1 else {"sweep": results}
    payload = dict(payload, order=args.order, g=args.g, omega=args.omega)
    return _json(payload), 0


def cmd_vpt(args, params):
    if args.order < 1:
        raise UsageError("--order must be >= 1 for vpt")
    series = vpt.VptSeries.build(args.order)
    kw = dict(scan=args.scan, tol=args.tol, params=params)
    if args.report is not None:
        if args.beta is None:
            raise UsageError("--report needs --beta")
        rep = vpt.convergence_report(series, args.beta, args.g, args.order, args.report, **kw)
        if args.format == "json":
            return _json(rep), 0
        rows = [(r["N"], r["omegaStar"], r["criterionOrder"], r["F"], r["error"]) for r in rep["perOrder"]]
        return _csv(("N", "omegaStar", "criterionOrder", "F", "error"), rows), 0
    betas = _grid(args)
    if len(betas) > 1:
        sols = vpt.sweep(series, betas, args.g, N=args.order, **kw)
        if args.format == "json":
            return _json({"sweep": [s.to_json() for s in sols]}), 0
        rows = [(s.beta, s.N, s.omegaStar, s.criterionOrder, s.value) for s in sols]
        return _csv(("beta", "N", "omegaStar", "criterionOrder", "F"), rows), 0
    sol = vpt.optimize_omega(series, betas[0], args.g, N=args.order, **kw)
    if args.format == "csv":
        return _csv(("beta", "N", "omegaStar", "criterionOrder", "F"),
                    [(sol.beta, sol.N, sol.omegaStar, sol.criterionOrder, sol.value)]), 0
    return _json(sol.to_json()), 0


def cmd_spectrum(args, params):
    if args.levels < 1:
        raise UsageError("--levels must be >= 1")
    spec = oracle.shoot_eigenvalues(args.g, args.levels, args.tol, x_max=args.x_max,
                                    step=args.step, params=params)
    text = _csv(("n", "E_n"), list(enumerate(spec.energies)))
    if args.beta is not None:
        text += f"# F({args.beta!r}) = {oracle.spectral_free_energy(spec, args.beta)!r}\n"
    return text, 0


def cmd_classical(args, params):
    res = oracle.classical_partition(args.beta, args.g, params)
    res["freeEnergy"] = oracle.classical_free_energy(args.beta, args.g, params)
    return _json(res), 0


def cmd_validate(args, params):
    checks = validation.run_suite(args.suite, params)
    ok = validation.passed(checks)
    lines = [c.line() for c in checks]
    lines.append(f"{'OK' if ok else 'FAILED'}: {sum(c.ok for c in checks if not c.informational)}"
                 f"/{sum(not c.informational for c in checks)} checks passed")
    return "\n".join(lines) + "\n", 0 if ok else 1


COMMANDS = {
    "coeffs": cmd_coeffs, "amplitude": cmd_amplitude, "free-energy": cmd_free_energy,
    "vpt": cmd_vpt, "spectrum": cmd_spectrum, "classical": cmd_classical,
    "validate": cmd_validate,
}


def run_command(args) -> tuple:
    """Dispatch parsed arguments; returns (text, exit status)."""
    try:
        params = ModelParams(precision=default_precision())
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return COMMANDS[args.command](args, params)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text, status = run_command(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (AnharmonicError, ValueError) as exc:
        print(f"anharmonic: error: {exc}", file=sys.stderr)
        return 1
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
