"""Command-line entry point: ``cbplab <command> [flags]``.

Every command writes one record per result, as JSON lines or CSV. Floats are
printed with 17 significant digits. Each record carries the command, the body
hashes, the seed and the flags it was produced with.

Exit status: 0 success, 2 domain or validation error, 3 precision loss or an
indeterminate certificate, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from cbplab.bodies import CounterexampleParams, load_body, make_body, volume
from cbplab.counterexample import CERT_COLUMNS, geometric_grid, lemma4_certificate, scaling_study
from cbplab.errors import CbpError, DomainError, PrecisionError
from cbplab.fractional import (
    brunn_report,
    frac_action_estimate,
    frac_laplace_section,
    ft_weighted_norm,
    parseval_residual,
    posdef_scan,
)
from cbplab.numerics import QuadratureConfig
from cbplab.sections import a_function_mc, canonical_direction, hyperplane_frame, section_profile, section_volume
from cbplab.theorems import mixed_spherical_integral, theorem_neg_report, theorem_pos_check

EXIT_OK, EXIT_DOMAIN, EXIT_PRECISION, EXIT_USAGE = 0, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


# ---------------------------------------------------------------- serialization


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def to_json(obj) -> str:
    """JSON text with every float at 17 significant digits; keys keep their order."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(to_json(v) for v in obj) + "]"
    if hasattr(obj, "record"):
        return to_json(obj.record())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return format(x, ".17g") if math.isfinite(x) else ""
    return to_json(v)


def write_records(records: list[dict], fmt: str, fh, columns: list[str] | None = None):
    if fmt == "json":
        for r in records:
            fh.write(to_json(r) + "\n")
        return
    if columns is None:
        columns = []
        for r in records:
            columns.extend(k for k in r if k not in columns)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_csv_cell(r.get(c)) for c in columns])


# ---------------------------------------------------------------- argument helpers


def _body(text: str):
    t = text.strip()
    if t.startswith("{"):
        try:
            spec = json.loads(t)
        except json.JSONDecodeError as exc:
            raise DomainError(f"inline body spec is not valid JSON ({exc})") from None
        return make_body(spec)
    if not Path(t).exists():
        raise DomainError(f"body file {t!r} not found")
    return load_body(t)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _direction(args, body):
    if getattr(args, "xi", None):
        return np.asarray(args.xi, dtype=float)
    return canonical_direction(body.n, args.psi)


def _psi_grid(args) -> list[float]:
    if args.psi_grid:
        return list(args.psi_grid)
    k = args.psi_points
    return list(np.linspace(0.0, math.pi / 2, k))


def _cfg(args) -> QuadratureConfig:
    return QuadratureConfig.from_env(
        rel_tol=args.rel_tol, abs_tol=args.abs_tol, mc_samples=args.mc_samples, rng_seed=args.seed
    )


def _common(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--output", default=None, help="write records here instead of stdout")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rel-tol", type=float, default=None)
    p.add_argument("--abs-tol", type=float, default=None)
    p.add_argument("--mc-samples", type=int, default=None)


def _dir_flags(p):
    p.add_argument("--psi", type=float, default=math.pi / 2, help="direction cos(psi) e_1 + sin(psi) e_{2n-1}")
    p.add_argument("--xi", type=_floats, default=None, help="explicit unit direction, comma separated")


def _grid_flags(p):
    p.add_argument("--psi-grid", type=_floats, default=None)
    p.add_argument("--psi-points", type=int, default=9)


# ---------------------------------------------------------------- commands


def cmd_volume(args, cfg):
    b = _body(args.body)
    est = volume(b, cfg)
    return [{"body": b.hash, "value": est.value, "err": est.err, "method": est.method}], 0


def cmd_section(args, cfg):
    b = _body(args.body)
    xi = _direction(args, b)
    est = section_volume(b, xi, cfg, route=args.route)
    return [{"body": b.hash, "xi": xi, "value": est.value, "err": est.err, "method": est.method}], 0


def cmd_afunction(args, cfg):
    b = _body(args.body)
    xi = _direction(args, b)
    recs = []
    try:
        prof = section_profile(b, xi, args.p, cfg)
    except DomainError:
        prof = None
    frame = hyperplane_frame(xi)
    for i, t in enumerate(args.t):
        if prof is not None and not args.mc:
            recs.append({"body": b.hash, "p": args.p, "t": t, "value": float(prof.value(t)),
                         "err": float(prof.sigma(t)), "method": prof.backend})
        else:
            est = a_function_mc(b, frame, args.p, t, cfg, index=i)
            recs.append({"body": b.hash, "p": args.p, "t": t, "value": est.value, "err": est.err, "method": est.method})
    return recs, 0


def cmd_frac_action(args, cfg):
    b = _body(args.body)
    prof = section_profile(b, _direction(args, b), args.p, cfg)
    val, err = frac_action_estimate(prof, args.q, cfg)
    return [{"body": b.hash, "p": args.p, "q": args.q, "value": val, "err": err, "backend": prof.backend}], 0


def cmd_ft_norm(args, cfg):
    b = _body(args.body)
    xi = _direction(args, b)
    ft = ft_weighted_norm(b, xi, args.p, args.q, cfg, route=args.route)
    return [{"body": b.hash, "p": args.p, "q": args.q, "xi": xi, "value": ft.value, "err": ft.error,
             "route": ft.route, "warnings": list(ft.warnings)}], 0


def cmd_frac_laplace(args, cfg):
    b = _body(args.body)
    xi = _direction(args, b)
    ft = frac_laplace_section(b, xi, args.alpha, cfg, route=args.route)
    return [{"body": b.hash, "alpha": args.alpha, "xi": xi, "value": ft.value, "err": ft.error, "route": ft.route}], 0


def cmd_posdef_scan(args, cfg):
    b = _body(args.body)
    rep = posdef_scan(b, args.p, args.q, _psi_grid(args), cfg, threads=args.threads)
    recs = [
        {"body": b.hash, "p": args.p, "q": args.q, "psi": ps, "value": v, "err": e, "route": r,
         "scan_min": rep["min"], "argmin_psi": rep["argmin_psi"]}
        for ps, v, e, r in zip(rep["psi"], rep["values"], rep["errors"], rep["routes"])
    ]
    return recs, 0


def cmd_brunn(args, cfg):
    b = _body(args.body)
    rep = brunn_report(b, _direction(args, b), args.p, args.q, samples=args.samples, cfg=cfg)
    rec = {"body": b.hash}
    rec.update(rep)
    return [rec], 0


def cmd_parseval(args, cfg):
    K, L = _body(args.K), _body(args.L)
    rep = parseval_residual(K, L, args.p, cfg, psi_order=args.psi_order, threads=args.threads)
    rec = {"K": K.hash, "L": L.hash}
    rec.update(rep)
    return [rec], 0


def _n_values(args) -> list[float]:
    if args.grid:
        lo, hi, per = args.grid
        return geometric_grid(lo, hi, int(per))
    return list(args.N)


def cmd_lemma4(args, cfg):
    recs, code = [], 0
    for N in _n_values(args):
        c = lemma4_certificate(CounterexampleParams(args.n, args.alpha, N), cfg, a1_source=args.a1_source)
        r = c.record()
        recs.append({k: r[k] for k in CERT_COLUMNS} | {"status": c.status, "a1_source": c.a1_source})
        if c.status == "indeterminate":
            code = EXIT_PRECISION
    return recs, code


LEMMA4_COLUMNS = CERT_COLUMNS + ["status", "a1_source"]


def cmd_scaling(args, cfg):
    grid = geometric_grid(args.lo, args.hi, args.per_decade)
    st = scaling_study(args.n, args.alpha, grid, cfg, threads=args.threads)
    recs = []
    for f in st["fits"]:
        recs.append({"n": args.n, "alpha": args.alpha, "quantity": f.quantity, "exponent": f.exponent,
                     "reference": f.reference, "residual": f.residual, "N_lo": f.N_grid[0], "N_hi": f.N_grid[-1],
                     "warnings": list(f.warnings)})
    return recs, 0


def cmd_mixed_integral(args, cfg):
    K, L = _body(args.K), _body(args.L)
    est = mixed_spherical_integral(K, L, args.a, args.b, cfg)
    return [{"K": K.hash, "L": L.hash, "a": args.a, "b": args.b, "value": est.value, "err": est.err,
             "method": est.method, "warnings": list(est.warnings)}], 0


def cmd_theorem_pos(args, cfg):
    K, L = _body(args.K), _body(args.L)
    rep = theorem_pos_check(K, L, args.alpha, _psi_grid(args), cfg, override=args.override, threads=args.threads)
    if args.grid_csv:
        rep.write_grid_csv(args.grid_csv)
    return [json.loads(rep.to_json())], 0


def cmd_theorem_neg(args, cfg):
    rec = theorem_neg_report(CounterexampleParams(args.n, args.alpha, args.N), cfg)
    return [rec], (EXIT_PRECISION if rec["status"] == "indeterminate" else 0)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="cbplab", description="Numerical experiments on sections of complex convex bodies.")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_, body=True, direction=False):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if body:
            p.add_argument("--body", required=True, help="body spec file or inline JSON")
        if direction:
            _dir_flags(p)
        p.set_defaults(fn=fn)
        return p

    add("volume", cmd_volume, "volume of a body")
    p = add("section", cmd_section, "central hyperplane section volume", direction=True)
    p.add_argument("--route", choices=("direct", "ft"), default="direct")
    p = add("afunction", cmd_afunction, "parallel section function A(t)", direction=True)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--t", type=_floats, required=True)
    p.add_argument("--mc", action="store_true", help="force the Monte Carlo estimator")
    p = add("frac-action", cmd_frac_action, "regularized q-moment of A", direction=True)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--q", type=float, required=True)
    p = add("ft-norm", cmd_ft_norm, "Fourier transform of |x|^-p ||x||^-(2n-q-p-2)", direction=True)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--route", choices=("closed_form", "a_route", "sphere_route"), default=None)
    p = add("frac-laplace", cmd_frac_laplace, "fractional Laplacian of the section function", direction=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--route", choices=("closed_form", "a_route", "sphere_route"), default=None)
    p = add("posdef-scan", cmd_posdef_scan, "transform values over a direction grid")
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--q", type=float, required=True)
    _grid_flags(p)
    p = add("brunn", cmd_brunn, "decay of A and sign of the q-action", direction=True)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=100)
    p = add("parseval", cmd_parseval, "both sides of the Parseval identity", body=False)
    p.add_argument("--K", required=True)
    p.add_argument("--L", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--psi-order", type=int, default=32)
    for name, fn, help_ in (("lemma4", cmd_lemma4, "sign certificate of the pole integral"),
                            ("theorem-neg", cmd_theorem_neg, "negative-direction report")):
        p = add(name, fn, help_, body=False)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--alpha", type=float, required=True)
        if name == "lemma4":
            p.add_argument("--N", type=_floats, default=None)
            p.add_argument("--grid", type=float, nargs=3, metavar=("LO", "HI", "PER_DECADE"), default=None)
            p.add_argument("--a1-source", choices=("closed_form", "taylor"), default="closed_form")
        else:
            p.add_argument("--N", type=float, required=True)
    p = add("scaling", cmd_scaling, "log-log exponents in N", body=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lo", type=float, default=1.0)
    p.add_argument("--hi", type=float, default=1e8)
    p.add_argument("--per-decade", type=int, default=4)
    p = add("mixed-integral", cmd_mixed_integral, "int ||x||_K^-a ||x||_L^-b over the sphere", body=False)
    p.add_argument("--K", required=True)
    p.add_argument("--L", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p = add("theorem-pos", cmd_theorem_pos, "affirmative comparison chain for a pair", body=False)
    p.add_argument("--K", required=True)
    p.add_argument("--L", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--override", action="store_true", help="allow alpha outside the affirmative window")
    p.add_argument("--grid-csv", default=None)
    _grid_flags(p)
    return top


_DEFAULT_FORMAT = {"lemma4": "csv"}
_COLUMNS = {"lemma4": LEMMA4_COLUMNS}


def _flags(args) -> dict:
    skip = {"fn", "format", "output", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv=None, stdout=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    if args.command == "lemma4" and not (args.N or args.grid):
        parser.print_usage(sys.stderr)
        sys.stderr.write("cbplab lemma4: error: one of --N or --grid is required\n")
        return EXIT_USAGE
    try:
        cfg = _cfg(args)
        records, code = args.fn(args, cfg)
    except PrecisionError as exc:
        sys.stderr.write(f"cbplab: precision: {exc}\n")
        return EXIT_PRECISION
    except (DomainError, CbpError) as exc:
        sys.stderr.write(f"cbplab: {exc}\n")
        return EXIT_DOMAIN
    stamp = {"command": args.command, "seed": cfg.rng_seed, "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol,
             "mc_samples": cfg.mc_samples, "flags": _flags(args)}
    out = []
    for r in records:
        rec = dict(stamp)
        rec.update(r)
        out.append(rec)
    fmt = args.format or _DEFAULT_FORMAT.get(args.command, "json")
    cols = _COLUMNS.get(args.command)
    if cols is not None:
        cols = list(stamp) + cols
    buf = io.StringIO()
    write_records(out, fmt, buf, cols)
    if args.output:
        Path(args.output).write_text(buf.getvalue())
    else:
        stdout.write(buf.getvalue())
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
