"""Command-line interface.

Results go to stdout, diagnostics to stderr. Exit codes: 0 pass, 1 check
failure, 2 usage or parse error, 3 evaluation domain error, 4 violated
theorem hypothesis.
"""

import argparse
import json
import sys

import numpy as np

from . import identities as ids
from . import integrals as itg
from .builtins import builtin
from .errors import (DomainError, FlatnessError, GeometryError, HypothesisViolation, JetError,
                     ParseError)
from .geometry import GraphMap, build_point_geometry
from .report import rows_to_csv, to_json

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN, EXIT_HYPOTHESIS = 0, 1, 2, 3, 4

DEFAULT_EPS = (0.1, 0.5, 1.0, 5.0)


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def load_graph(source):
    if source.startswith("builtin:"):
        try:
            return builtin(source[len("builtin:"):])
        except KeyError as err:
            raise UsageError(str(err.args[0])) from None
    try:
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as err:
        raise UsageError(f"cannot read graph file {source!r}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise UsageError(f"graph file {source!r} is not valid JSON: {err}") from None
    try:
        return GraphMap.from_dict(data)
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise UsageError(f"invalid graph file {source!r}: {err}") from None


def _point(graph, values, what):
    if values is None:
        if graph.domain is None:
            return np.zeros(graph.n)
        return np.array([(lo + hi) / 2 for lo, hi in graph.domain])
    if len(values) != graph.n:
        raise UsageError(f"{what} needs {graph.n} coordinates, got {len(values)}")
    return np.asarray(values, dtype=np.float64)


def _emit(text):
    sys.stdout.write(text)
    if not text.endswith("\n"):
        sys.stdout.write("\n")


# -- subcommands ---------------------------------------------------------------------


def cmd_point(args, graph):
    x = _point(graph, args.at, "--at")
    pg = build_point_geometry(graph, x, args.depth)
    out = {"graph": graph.to_dict(), "depth": args.depth}
    out.update(pg.as_dict())
    for k, v in pg.extras.items():
        out[k] = v
    _emit(to_json(out))
    return EXIT_PASS


def verify_points(graph, per_axis, shrink=0.2):
    """Uniform grid over the domain box shrunk by ``shrink`` of its width on each side."""
    if graph.domain is None:
        axes = [np.linspace(-0.5, 0.5, per_axis)] * graph.n
    else:
        axes = [np.linspace(lo + shrink * (hi - lo), hi - shrink * (hi - lo), per_axis)
                for lo, hi in graph.domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], -1)


def run_verify(graph, per_axis=5, eps_values=DEFAULT_EPS, require_flat=False, h_step=1e-3,
               tol=None, jobs=1):
    """All pointwise checks on the verification grid; returns (report dict, failures)."""
    X = verify_points(graph, per_axis)
    F = itg.evaluate_fields(graph, X, 1, jobs)  # surfaces domain errors early
    del F
    pgs = [build_point_geometry(graph, X[i:i + itg.CHUNK], 4) for i in range(0, len(X), itg.CHUNK)]
    points = [pg[j] for pg in pgs for j in range(pg.batch_shape[0])]
    tt = ids.TENSOR_TOL if tol is None else tol
    ft = ids.FD_TOL if tol is None else tol
    checks = {
        "gauss": [ids.check_gauss(pg, tt) for pg in points],
        "codazzi": [ids.check_codazzi(pg, tt) for pg in points],
        "ricci": [ids.check_ricci(pg, tt) for pg in points],
        "simons_identity": [ids.check_simons_identity(graph, x, h_step, ft) for x in X],
        "jacobi": [ids.check_jacobi(graph, x, h_step, ft) for x in X],
        "k2_bound": [_k2_bound(pg) for pg in points],
    }
    flat = ids.check_flatness(graph, X)
    checks["flatness"] = [flat]
    counted = {k for k in checks if k != "flatness"}
    if require_flat:
        counted.add("flatness")
    if flat.passed:
        for eps in eps_values:
            checks[f"simons_inequality_eps_{eps:g}"] = [ids.check_simons_inequality(pg, eps)
                                                       for pg in points]
            counted.add(f"simons_inequality_eps_{eps:g}")
        checks["subsolution"] = [ids.check_subsolution(pg) for pg in points]
        counted.add("subsolution")
    failures = []
    for name, reps in checks.items():
        bad = [r for r in reps if not r.passed]
        if bad and name in counted:
            worst = max(bad, key=lambda r: r.rel_residual if np.isfinite(r.rel_residual) else np.inf)
            failures.append((name, worst))
    return {"graph": graph.to_dict(), "flat_normal_bundle": flat.passed,
            "require_flat": require_flat,
            "checks": {k: [r.as_dict() for r in v] for k, v in checks.items()}}, failures


def _k2_bound(pg):
    """K2 <= |nabla nabla H| at a point."""
    left = float(pg.K2)
    right = float(np.sqrt(pg.normHessH2))
    scale = max(right, 1e-300)
    margin = right - left
    return ids.ResidualReport("k2_bound", np.asarray(pg.x).tolist(), left, right,
                              max(-margin, 0.0), max(-margin, 0.0) / scale, ids.MARGIN_TOL,
                              margin >= -ids.MARGIN_TOL * scale, margin=margin)


def cmd_verify(args, graph):
    report, failures = run_verify(graph, args.grid or 5, args.eps or DEFAULT_EPS,
                                  args.require_flat, tol=args.tol, jobs=args.jobs)
    _emit(to_json(report))
    if failures:
        name, worst = failures[0] if len(failures) == 1 else max(
            failures, key=lambda f: f[1].rel_residual / f[1].tolerance
            if np.isfinite(f[1].rel_residual) else np.inf)
        label = "check_flatness" if name == "flatness" else f"check_{name}"
        print(f"FAIL: {len(failures)} check(s) failed; worst {label} at x={worst.x} "
              f"(relative residual {worst.rel_residual:.3g}, tolerance {worst.tolerance:g})",
              file=sys.stderr)
        return EXIT_FAIL
    print("PASS: all checks within tolerance", file=sys.stderr)
    return EXIT_PASS


def _test_function(args, graph):
    center = _point(graph, args.center, "--center")
    rho = args.rho if args.rho is not None else 0.5
    return itg.TestFunction(tuple(center), rho, args.s)


def cmd_stability(args, graph):
    phi = _test_function(args, graph)
    rep = itg.check_stability(graph, phi, args.grid or 8, args.gauss or 4, jobs=args.jobs,
                              **({"tol": args.tol} if args.tol else {}))
    _emit(to_json(rep))
    print(f"{'PASS' if rep.passed else 'FAIL'}: left {rep.left:.6g} <= right {rep.right:.6g}"
          f" (drift {rep.drift:.2g})", file=sys.stderr)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_integral_estimate(args, graph):
    if args.p is None:
        raise UsageError("integral-estimate needs --p")
    phi = _test_function(args, graph)
    rep = itg.check_integral_estimate(graph, args.p, phi, args.grid or 8, args.gauss or 4, jobs=args.jobs)
    _emit(to_json(rep))
    print(f"ratio {rep.ratio:.6g} (constant unspecified; reported, not asserted)", file=sys.stderr)
    return EXIT_PASS


def _radii(args, allow_many=True):
    vals = args.radii if args.radii else ([args.R] if args.R is not None else None)
    if not vals:
        raise UsageError("need --R or --radii")
    if not allow_many and len(vals) != 1:
        raise UsageError("expected a single radius")
    if any(not r > 0 for r in vals):
        raise UsageError("radii must be positive")
    return vals


def cmd_area_ratio(args, graph):
    x0 = _point(graph, args.center, "--center")
    rows = []
    for R in _radii(args):
        ar = itg.area_ratio(graph, x0, R, args.grid or 8, args.area_depth, args.gauss or 3, jobs=args.jobs)
        rows.append({"R": R, "lower": ar.lower, "estimate": ar.estimate, "upper": ar.upper})
    if args.format == "csv":
        _emit(rows_to_csv(rows, ("R", "lower", "estimate", "upper")))
    else:
        _emit(to_json({"center": x0.tolist(), "rows": rows}))
    return EXIT_PASS


def cmd_sup_sweep(args, graph):
    x0 = _point(graph, args.center, "--center")
    rep = itg.sup_sweep(graph, x0, _radii(args), args.grid or 33, args.area_depth, jobs=args.jobs)
    if args.format == "csv":
        _emit(rows_to_csv(rep.rows, itg.SWEEP_COLUMNS + itg.SWEEP_EXTRA))
    else:
        _emit(to_json(rep))
    for row in rep.rows:
        if not row["hypothesis_4R"]:
            print(f"warning: R={row['R']:g}: Sigma cap B_4R not compactly contained in the chart; "
                  "row reported without the theorem hypothesis", file=sys.stderr)
    return EXIT_PASS


def cmd_mean_value(args, graph):
    x0 = _point(graph, args.center, "--center")
    (R,) = _radii(args, allow_many=False)
    p = args.p if args.p is not None else 8.0
    rep = itg.mean_value_data(graph, x0, R, p, args.grid or 8, args.gauss or 3, jobs=args.jobs)
    _emit(to_json(rep))
    return EXIT_PASS if rep.passed else EXIT_FAIL


COMMANDS = {
    "point": cmd_point,
    "verify": cmd_verify,
    "stability": cmd_stability,
    "integral-estimate": cmd_integral_estimate,
    "area-ratio": cmd_area_ratio,
    "sup-sweep": cmd_sup_sweep,
    "mean-value": cmd_mean_value,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="pmcgraph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--graph", required=True, help="graph file or builtin:NAME")
        sp.add_argument("--at", type=_floats, help="chart point x1,...,xn")
        sp.add_argument("--center", type=_floats, help="chart center x1,...,xn")
        sp.add_argument("--rho", type=_positive, help="test-function radius")
        sp.add_argument("--s", type=int, default=3, help="test-function exponent (>= 3)")
        sp.add_argument("--p", type=float, help="exponent")
        sp.add_argument("--R", type=_positive, help="ball radius")
        sp.add_argument("--radii", type=_floats, help="comma-separated ball radii")
        sp.add_argument("--grid", type=int, help="cells or samples per axis (>= 2)")
        sp.add_argument("--gauss", type=int, help="Gauss-Legendre order per axis")
        sp.add_argument("--tol", type=_positive, help="tolerance override")
        sp.add_argument("--eps", type=_floats, help="epsilon values for the Simons inequality")
        sp.add_argument("--depth", type=int, default=4, choices=(1, 2, 3, 4),
                        help="derivative depth for point")
        sp.add_argument("--area-depth", type=int, help="bisection depth of ball-boundary cells")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads")
        sp.add_argument("--require-flat", action="store_true",
                        help="count a non-flat normal bundle as a failure")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.grid is not None and args.grid < 2:
            raise UsageError("--grid must be at least 2")
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if args.gauss is not None and args.gauss < 1:
            raise UsageError("--gauss must be at least 1")
        if args.eps and any(not e > 0 for e in args.eps):
            raise UsageError("--eps values must be positive")
        graph = load_graph(args.graph)
        return COMMANDS[args.command](args, graph)
    except (UsageError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, GeometryError, JetError) as err:
        msg = str(err)
        if not msg.startswith("domain error"):
            msg = f"domain error: {msg}"
        print(msg, file=sys.stderr)
        return EXIT_DOMAIN
    except (HypothesisViolation, FlatnessError) as err:
        print(f"hypothesis violated: {err}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
