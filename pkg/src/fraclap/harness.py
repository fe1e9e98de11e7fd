"""Error norms, convergence ladders and rate fits."""
import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analytic
from .extension import extension_energy_error, solve_extension
from .fem_core import FeFunction, element_quadrature
from .integral_fem import energy_error_galerkin_integral, solve_integral
from .mesh import (boundary_graded_interval_mesh, disk_layers_for_h, disk_tri_mesh,
                   uniform_interval_mesh, unit_square_tri_mesh)
from .spectral_sinc import solve_spectral_sinc

METHODS = ("spectral-sinc", "extension", "integral", "dt-integral")
DOMAINS = ("interval", "square", "disk")


def l2_error(U: FeFunction, exact, quad_order: int = 6) -> float:
    """L2 norm of U - exact by elementwise Gauss quadrature."""
    m = U.mesh
    x, w, phi = element_quadrature(m, quad_order)
    Uq = np.einsum("qk,ek->eq", phi, U.values[m.elements])
    return float(np.sqrt(np.sum(w * (Uq - exact(x)) ** 2)))


def estimate_rate(points):
    """Least-squares slope of log(error) against log(h).

    Parameters
    ----------
    points : sequence of (h, error)

    Returns
    -------
    rate : float
        Positive when the error decays as h decreases.
    r_squared : float
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (h, error) points")
    if np.any(pts[:, 1] <= 0) or np.any(pts[:, 0] <= 0):
        raise ValueError("h and errors must be positive")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(r2)


@dataclass
class StudyConfig:
    """A refinement ladder for one method.

    ``levels`` are element counts per side (interval, square) or target
    mesh sizes (disk).  ``abscissa`` selects the fit variable: ``h`` or
    ``dofs`` (the latter fits against 1/dofs so rates stay positive).
    """

    method: str
    domain: str
    s: float
    levels: list
    metric: str = "l2"
    graded: float | None = None
    gamma: float | None = None
    k: float | None = None
    M: float | None = None
    beta: float | None = None
    threads: int = 1
    abscissa: str = "h"


@dataclass
class ConvergenceReport:
    method: str
    s: float
    metric: str
    abscissa: str
    rows: list = field(default_factory=list)
    fitted_rate: float = float("nan")
    r_squared: float = float("nan")
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {json.dumps(self.config, sort_keys=True)}\n")
        buf.write(f"# fitted_rate={self.fitted_rate:.6f} r_squared={self.r_squared:.6f}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "h", "dofs", "metric", "error", "seconds"])
        for r in self.rows:
            w.writerow([r["level"], f"{r['h']:.10g}", r["dofs"], r["metric"],
                        f"{r['error']:.10e}", f"{r['seconds']:.3f}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _mesh(domain, level, graded):
    if domain == "interval":
        n = int(level)
        if graded:
            return boundary_graded_interval_mesh(-1.0, 1.0, n, graded)
        return uniform_interval_mesh(-1.0, 1.0, n)
    if domain == "square":
        return unit_square_tri_mesh(int(level))
    if domain == "disk":
        L = disk_layers_for_h(float(level), 1.0, graded or 1.0)
        return disk_tri_mesh(1.0, L, graded or 1.0)
    raise ValueError(f"unknown domain {domain!r}")


def _problem(method, domain, s, metric="l2"):
    """Right hand side and exact solution for a method and domain.

    Integral problems use f = 1, except L2 studies on the disk which use
    the Jacobi example.  Returns (f, u, energy_sq) with energy_sq = <f, u>
    or None.
    """
    if method in ("integral", "dt-integral"):
        if domain == "interval" or (domain == "disk" and metric == "energy"):
            d = 1 if domain == "interval" else 2

            def one(x):
                x = np.asarray(x)
                return np.ones(x.shape if d == 1 else x.shape[:-1])
            return (one, lambda x: analytic.getoor_solution(d, s, x), analytic.getoor_energy(d, s))
        if domain == "disk":
            return (lambda x: analytic.jacobi_solution(s, x)[0],
                    lambda x: analytic.jacobi_solution(s, x)[1], analytic.jacobi_energy(s))
        raise ValueError(f"{method} supports interval and disk domains")
    if domain == "interval":
        _, f, u = analytic.interval_eigen_data(s, 1, 0.0, 1.0)
        return f, u, None
    if domain == "square":
        _, f, u, _ = analytic.square_eigen_data(s, 1, 1)
        return f, u, None
    raise ValueError(f"{method} supports interval and square domains")


def _spectral_mesh(domain, level, graded):
    # spectral problems use the unit interval and unit square
    if domain == "interval":
        n = int(level)
        if graded:
            return boundary_graded_interval_mesh(0.0, 1.0, n, graded)
        return uniform_interval_mesh(0.0, 1.0, n)
    return _mesh(domain, level, graded)


def run_level(cfg: StudyConfig, level):
    """Solve one level; returns (h, dofs, error)."""
    s = cfg.s
    f, u, energy = _problem(cfg.method, cfg.domain, s, cfg.metric)
    if cfg.method in ("spectral-sinc", "extension"):
        mesh = _spectral_mesh(cfg.domain, level, cfg.graded)
    else:
        mesh = _mesh(cfg.domain, level, cfg.graded)
    if cfg.method == "spectral-sinc":
        U = solve_spectral_sinc(mesh, s, f, k=cfg.k, threads=cfg.threads)
        if cfg.metric != "l2":
            raise ValueError("spectral-sinc supports the l2 metric")
        return mesh.h_max, mesh.free.size, l2_error(U, u)
    if cfg.method == "extension":
        M = None if cfg.M is None else int(cfg.M)
        cyl, tr = solve_extension(mesh, s, f, M=M, gamma=cfg.gamma)
        dofs = cyl.mesh.free.size
        if cfg.metric == "energy":
            return mesh.h_max, dofs, extension_energy_error(cyl, s, f, u)
        return mesh.h_max, dofs, l2_error(tr, u)
    if cfg.method == "integral":
        U, A = solve_integral(mesh, s, f, threads=cfg.threads, return_matrix=True)
        if cfg.metric == "energy":
            return mesh.h_max, A.n, energy_error_galerkin_integral(U, s, f, energy, A=A)
        return mesh.h_max, A.n, l2_error(U, u)
    if cfg.method == "dt-integral":
        from .dunford_integral import default_config, normalize_mesh, solve_dt_integral
        if cfg.domain != "interval":
            raise ValueError("dt-integral supports the interval domain only")
        if cfg.metric != "l2":
            raise ValueError("dt-integral supports the l2 metric")
        nm = normalize_mesh(mesh)[0]
        dcfg = default_config(s, nm.h_max, k=cfg.k, M=cfg.M, beta=cfg.beta)
        U = solve_dt_integral(mesh, s, f, dcfg, threads=cfg.threads)
        return mesh.h_max, mesh.free.size, l2_error(U, u)
    raise ValueError(f"unknown method {cfg.method!r}")


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Run a refinement ladder and fit the convergence rate."""
    if not config.levels:
        raise ValueError("empty refinement ladder")
    if config.method not in METHODS:
        raise ValueError(f"unknown method {config.method!r}")
    rep = ConvergenceReport(config.method, config.s, config.metric, config.abscissa,
                            config=asdict(config))
    failures = []
    for level in config.levels:
        t0 = time.perf_counter()
        try:
            h, dofs, err = run_level(config, level)
        except Exception as exc:  # aggregated and re-raised below
            failures.append(f"level {level}: {exc}")
            continue
        rep.rows.append(dict(level=level, h=h, dofs=int(dofs), metric=config.metric,
                             error=err, seconds=time.perf_counter() - t0))
    if failures:
        raise RuntimeError("study failed: " + "; ".join(failures))
    if len(rep.rows) >= 3:
        if config.abscissa == "dofs":
            pts = [(1.0 / r["dofs"], r["error"]) for r in rep.rows]
        else:
            pts = [(r["h"], r["error"]) for r in rep.rows]
        rep.fitted_rate, rep.r_squared = estimate_rate(pts)
    return rep
