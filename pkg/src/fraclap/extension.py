"""Extension method: a weighted local problem on the truncated cylinder
Omega x (0, Y) whose trace at y = 0 approximates the spectral fractional
Laplacian solution."""
import warnings

import numpy as np
import scipy.sparse.linalg as spla

from .analytic import frac_order
from .fem_core import (FeFunction, assemble_cylinder_full, cylinder_load, element_quadrature,
                       trace_at_zero)
from .mesh import IntervalMesh, cylinder_mesh, graded_y_partition
from .numerics import cg_solve


def choose_truncation(num_base_cells: int) -> float:
    """Truncation height Y = 1 + ln(#cells)/3."""
    if num_base_cells < 1:
        raise ValueError("need at least one base cell")
    return 1.0 + np.log(num_base_cells) / 3.0


def choose_gamma(s) -> float:
    """Grading exponent 1.05 * 3/(2s), just above the optimal threshold."""
    s = frac_order(s).s
    return 1.05 * 3.0 / (2.0 * s)


def default_M(base_mesh, c: float = 1.0) -> int:
    d = 1 if isinstance(base_mesh, IntervalMesh) else 2
    return max(1, int(round(c * base_mesh.n_elements ** (1.0 / d))))


def solve_extension(base_mesh, s, f, M: int | None = None, Y: float | None = None,
                    gamma: float | None = None, solver: str = "direct", tol: float = 1e-12,
                    quad_order: int = 4):
    """Galerkin solution of the truncated extension problem.

    Parameters
    ----------
    base_mesh : IntervalMesh or TriMesh
    s : float or FracOrder
    f : callable
    M, Y, gamma : optional
        Number of y-elements, truncation height and grading exponent;
        defaults from :func:`default_M`, :func:`choose_truncation` and
        :func:`choose_gamma`.
    solver : {"direct", "cg"}

    Returns
    -------
    cyl : FeFunction
        Solution on the cylinder mesh.
    trace : FeFunction
        Its restriction to y = 0.
    """
    s = frac_order(s)
    if M is None:
        M = default_M(base_mesh)
    if Y is None:
        Y = choose_truncation(base_mesh.n_elements)
    if gamma is None:
        gamma = choose_gamma(s)
    cm = cylinder_mesh(base_mesh, graded_y_partition(Y, M, gamma))
    S = assemble_cylinder_full(cm, s)
    b = cylinder_load(cm, s, f, quad_order)
    free = cm.free
    Sf = S[free][:, free].tocsc()
    if solver == "direct":
        x = spla.spsolve(Sf, b[free])
    elif solver == "cg":
        x = cg_solve(Sf, b[free], tol=tol)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    V = np.zeros(cm.n_dofs)
    V[free] = x
    cyl = FeFunction(cm, V)
    return cyl, trace_at_zero(cyl)


def discrete_energy(cyl: FeFunction, s) -> float:
    """Weighted Dirichlet energy V^T S V of a cylinder function."""
    S = assemble_cylinder_full(cyl.mesh, s)
    return float(cyl.values @ (S @ cyl.values))


def load_pairing(mesh, f, u, quad_order: int = 8) -> float:
    """Integral of f*u over the mesh domain by element quadrature."""
    x, w, _ = element_quadrature(mesh, quad_order)
    return float(np.sum(w * f(x) * u(x)))


def extension_energy_error(cyl_solution: FeFunction, s, f, exact_u, quad_order: int = 8) -> float:
    """Energy error from the Galerkin identity.

    The exact weighted energy equals d_s <f, u>.  Galerkin orthogonality
    then gives the error as sqrt(d_s <f, u> - V^T S V).  A negative
    radicand (possible only through rounding or inexact data) is clamped
    to zero with a warning.
    """
    s = frac_order(s)
    exact = s.d_s * load_pairing(cyl_solution.mesh.base, f, exact_u, quad_order)
    diff = exact - discrete_energy(cyl_solution, s)
    if diff < 0:
        warnings.warn(f"negative energy defect {diff:.3e} clamped to zero", RuntimeWarning)
        return 0.0
    return float(np.sqrt(diff))
