"""Command line driver.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
import argparse
import io
import json
import os
import sys

import numpy as np

from .harness import StudyConfig, _mesh, _problem, _spectral_mesh, run_study
from .numerics import ConvergenceError, PivotError

SOLVERS = ("spectral-sinc", "extension", "integral", "dt-integral")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _levels(text):
    try:
        return [float(t) if "." in t else int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level list {text!r}")


def _common(p):
    p.add_argument("--s", type=float, required=True, help="fractional order in (0, 1)")
    p.add_argument("--domain", choices=("interval", "square", "disk"), default="interval")
    p.add_argument("--graded", type=float, default=None, metavar="MU",
                   help="boundary grading exponent of the mesh")
    p.add_argument("--gamma", type=float, default=None, help="extension grading in y")
    p.add_argument("--k", type=float, default=None, help="sinc spacing")
    p.add_argument("--M", type=float, default=None,
                   help="y-elements (extension) or truncation parameter (dt-integral)")
    p.add_argument("--beta", type=float, default=None, help="regularity index (dt-integral)")
    p.add_argument("--metric", choices=("l2", "energy"), default="l2")
    p.add_argument("--out", default=None, help="output path, default stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser():
    parser = _Parser(prog="fraclap", description="Finite element solvers for fractional Laplacians.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in SOLVERS:
        p = sub.add_parser(name, help=f"single {name} solve, dumps interior nodal values")
        _common(p)
        p.add_argument("--n", type=int, required=True,
                       help="elements per side (interval, square) or rings (disk)")
    p = sub.add_parser("study", help="convergence ladder with fitted rate")
    _common(p)
    p.add_argument("--method", choices=SOLVERS, default="integral")
    p.add_argument("--levels", type=_levels, required=True,
                   help="comma separated element counts, or mesh sizes for the disk")
    p.add_argument("--abscissa", choices=("h", "dofs"), default=None,
                   help="fit against h or 1/dofs; dofs is the default for extension")
    return parser


def _solve(args):
    from .dunford_integral import default_config, normalize_mesh, solve_dt_integral
    from .extension import solve_extension
    from .integral_fem import solve_integral
    from .mesh import disk_tri_mesh
    from .spectral_sinc import solve_spectral_sinc

    name = args.command
    if args.domain == "disk":
        if name not in ("integral",):
            raise UsageError(f"{name} does not support the disk domain")
        mesh = disk_tri_mesh(1.0, args.n, args.graded or 1.0)
    elif name in ("spectral-sinc", "extension"):
        mesh = _spectral_mesh(args.domain, args.n, args.graded)
    else:
        if args.domain != "interval":
            raise UsageError(f"{name} supports the interval and disk domains")
        mesh = _mesh("interval", args.n, args.graded)
    try:
        f, _, _ = _problem(name, args.domain, args.s, args.metric)
    except ValueError as exc:
        raise UsageError(str(exc))
    if name == "spectral-sinc":
        U = solve_spectral_sinc(mesh, args.s, f, k=args.k, threads=args.threads)
    elif name == "extension":
        M = None if args.M is None else int(args.M)
        _, U = solve_extension(mesh, args.s, f, M=M, gamma=args.gamma)
    elif name == "integral":
        U = solve_integral(mesh, args.s, f, threads=args.threads)
    else:
        nm = normalize_mesh(mesh)[0]
        cfg = default_config(args.s, nm.h_max, k=args.k, M=args.M, beta=args.beta)
        U = solve_dt_integral(mesh, args.s, f, cfg, threads=args.threads)
    free = mesh.free
    V = np.asarray(mesh.vertices, dtype=float)
    X = V[free][:, None] if V.ndim == 1 else V[free]
    vals = U.values[free]
    if args.format == "json":
        return json.dumps({"points": X.tolist(), "values": vals.tolist()}) + "\n"
    buf = io.StringIO()
    for x, v in zip(X, vals):
        buf.write(",".join(f"{c:.12g}" for c in x) + f",{v:.12e}\n")
    return buf.getvalue()


def _study(args):
    absc = args.abscissa or ("dofs" if args.method == "extension" else "h")
    cfg = StudyConfig(method=args.method, domain=args.domain, s=args.s, levels=args.levels,
                      metric=args.metric, graded=args.graded, gamma=args.gamma, k=args.k,
                      M=args.M, beta=args.beta, threads=args.threads, abscissa=absc)
    try:
        rep = run_study(cfg)
    except ValueError as exc:
        raise UsageError(str(exc))
    return rep.to_json() + "\n" if args.format == "json" else rep.to_csv()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().rstrip())
        if not 0 < args.s < 1:
            raise UsageError("--s must lie in (0, 1)")
        if args.threads < 1:
            raise UsageError("--threads must be positive")
        text = _study(args) if args.command == "study" else _solve(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ConvergenceError, PivotError, np.linalg.LinAlgError, RuntimeError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
