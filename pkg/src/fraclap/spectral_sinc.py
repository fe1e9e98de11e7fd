"""Sinc quadrature of the Balakrishnan integral for the spectral fractional
Laplacian.

For the discrete operator L with mass M and stiffness A the solution
U = L^{-s} f is approximated by

    U^k = sin(s pi)/pi * k * sum_l exp((1-s) y_l) v_l,   (exp(y_l) M + A) v_l = b,

with b the load vector of f and y_l = k l, l = -N_minus .. N_plus.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import frac_order
from .fem_core import FeFunction, apply_dirichlet, assemble_p1, extend_free, load_vector
from .numerics import ConvergenceError, cg_solve


@dataclass(frozen=True)
class SincGrid:
    """Equispaced nodes y_l = k l for l = -N_minus, ..., N_plus."""

    k: float
    N_plus: int
    N_minus: int

    @property
    def nodes(self):
        return self.k * np.arange(-self.N_minus, self.N_plus + 1)


def sinc_grid(s, k: float) -> SincGrid:
    s = frac_order(s).s
    if k <= 0:
        raise ValueError("sinc spacing must be positive")
    N_plus = int(np.ceil(np.pi ** 2 / (4 * s * k * k)))
    N_minus = int(np.ceil(np.pi ** 2 / (4 * (1 - s) * k * k)))
    return SincGrid(float(k), N_plus, N_minus)


def scalar_sinc_power(s, lam: float, k: float) -> float:
    """Sinc approximation of lam**(-s), summed in increasing order of l."""
    s = frac_order(s).s
    if lam <= 0:
        raise ValueError("lam must be positive")
    g = sinc_grid(s, k)
    total = 0.0
    for y in g.nodes:
        total += np.exp((1 - s) * y) / (np.exp(y) + lam)
    return np.sin(s * np.pi) / np.pi * k * total


def auto_spacing(s, h: float) -> float:
    """Spacing that balances exp(-pi^2/(2k)) with h^2."""
    if not (0 < h < 1):
        raise ValueError("h must lie in (0, 1)")
    return np.pi ** 2 / (4 * np.log(1 / h))


def sinc_apply(M, A, b, s, k: float, tol: float = 1e-12, threads: int = 1):
    """Sinc approximation of L^{-s} applied to the functional b.

    ``M`` and ``A`` are the mass and stiffness on free dofs (any form
    accepted by :func:`cg_solve`).
    """
    s = frac_order(s).s
    g = sinc_grid(s, k)
    ys = g.nodes
    Md = M.tocsr() if hasattr(M, "tocsr") else M
    Ad = A.tocsr() if hasattr(A, "tocsr") else A

    def solve(y):
        try:
            return cg_solve(np.exp(y) * Md + Ad, b, tol=tol)
        except ConvergenceError as exc:
            raise ConvergenceError(f"sinc node y={y:.4g}: {exc}", exc.residual) from exc

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            sols = list(ex.map(solve, ys))
    else:
        sols = [solve(y) for y in ys]
    U = np.zeros_like(np.asarray(b, dtype=float))
    for y, v in zip(ys, sols):
        U += np.exp((1 - s) * y) * v
    return np.sin(s * np.pi) / np.pi * k * U


def solve_spectral_sinc(mesh, s, f, k: float | None = None, tol: float = 1e-12,
                        quad_order: int = 4, threads: int = 1) -> FeFunction:
    """Spectral fractional Poisson problem with homogeneous Dirichlet data.

    Parameters
    ----------
    mesh : IntervalMesh or TriMesh
    s : float or FracOrder
    f : callable
        Right hand side evaluated at points.
    k : float, optional
        Sinc spacing; defaults to :func:`auto_spacing` at the mesh size.
    """
    s = frac_order(s)
    if k is None:
        k = auto_spacing(s, min(mesh.h_max, 0.5))
    M, A = assemble_p1(mesh)
    b = load_vector(mesh, f, quad_order)
    Mf, bf, free = apply_dirichlet(M, b, mesh)
    Af = A.restrict(free)
    U = sinc_apply(Mf, Af, bf, s, k, tol=tol, threads=threads)
    return FeFunction(mesh, extend_free(U, free, mesh.n_vertices))
