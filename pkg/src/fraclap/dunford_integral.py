"""Dunford-Taylor sinc method for the integral fractional Laplacian in 1D.

The bilinear form is written as an integral over y of screened problems
with parameter mu = exp(-y/2),

    a(X, T) = sin(s pi)/pi * k * sum_l exp(s y_l) int (X + V_l) T,

where V_l solves (M + mu^2 A) V = -M X on a dilated interval with zero
boundary values.  Writing X + V = S^{-1} mu^2 A X with S = M + mu^2 A shows
each term is symmetric and avoids the cancellation in X + V.

All computations run on the domain scaled to diameter one and centered at
the origin; nodal values carry over unchanged.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .analytic import frac_order
from .fem_core import FeFunction, assemble_p1, load_vector
from .mesh import IntervalMesh, dilated_domain_1d, nested_dilated_mesh_1d, omega_slice
from .numerics import ConvergenceError, cg_solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DtConfig:
    """Sinc spacing and counts, truncation parameter and regularity index."""

    k: float
    N_plus: int
    N_minus: int
    M: float
    beta: float
    delta: float

    @property
    def nodes(self):
        return self.k * np.arange(-self.N_minus, self.N_plus + 1)


def dt_config(s, k: float, M: float, beta: float | None = None) -> DtConfig:
    """Counts N_plus = ceil(pi^2/(2 k^2 (delta-s))), N_minus = ceil(pi^2/(4 s k^2))."""
    s = frac_order(s).s
    if beta is None:
        beta = s + 0.49
    if not (s < beta < 1.5):
        raise ValueError("beta must lie in (s, 3/2)")
    delta = min(2.0 - s, beta)
    if delta - s < 1e-3:
        raise ValueError("delta - s too small, sinc counts diverge")
    if k <= 0 or M <= 0:
        raise ValueError("k and M must be positive")
    N_plus = int(np.ceil(np.pi ** 2 / (2 * k * k * (delta - s))))
    N_minus = int(np.ceil(np.pi ** 2 / (4 * s * k * k)))
    return DtConfig(float(k), N_plus, N_minus, float(M), float(beta), float(delta))


def default_M(h: float) -> float:
    return max(4.0, float(np.log(1.0 / h)))


def default_k(s, h: float, beta: float | None = None, c: float = 0.05) -> float:
    """Spacing with exp(-pi^2/(4k)) h^(s-delta) = c."""
    s = frac_order(s).s
    if beta is None:
        beta = s + 0.49
    delta = min(2.0 - s, beta)
    return np.pi ** 2 / (4.0 * (np.log(1.0 / c) + (delta - s) * np.log(1.0 / h)))


def default_config(s, h: float, k: float | None = None, M: float | None = None,
                   beta: float | None = None) -> DtConfig:
    """Configuration with the documented defaults for a normalized mesh size h."""
    s = frac_order(s).s
    if beta is None:
        beta = s + 0.49
    if k is None:
        k = default_k(s, h, beta)
    if M is None:
        M = default_M(h)
    return dt_config(s, k, M, beta)


def check_ellipticity(cfg: DtConfig, h: float, s, c_thresh: float = 0.1) -> bool:
    """True iff exp(-pi^2/(4k)) h^(s-delta) <= c_thresh."""
    s = frac_order(s).s
    lhs = np.exp(-np.pi ** 2 / (4 * cfg.k)) * h ** (s - cfg.delta)
    if lhs > c_thresh:
        log.warning("ellipticity condition violated: %.3e > %.3e", lhs, c_thresh)
        return False
    return True


def dt_scalar_symbol(s, xi, k: float, N_plus: int, N_minus: int):
    """Sinc sum applied to the scalar symbol; approximates |xi|^(2s)."""
    s = frac_order(s).s
    xi2 = np.asarray(xi, dtype=float) ** 2
    out = np.zeros_like(xi2)
    for y in k * np.arange(-N_minus, N_plus + 1):
        t = np.exp(-y) * xi2
        out += np.exp(s * y) * t / (1.0 + t)
    return np.sin(s * np.pi) / np.pi * k * out


def normalize_mesh(mesh: IntervalMesh):
    """Affine image of the mesh in (-1/2, 1/2); returns (mesh, center, scale)."""
    a, b = mesh.nodes[0], mesh.nodes[-1]
    lam = b - a
    c = 0.5 * (a + b)
    return IntervalMesh((mesh.nodes - c) / lam, mesh.boundary_flags), c, lam


def solve_screened(dilated_mesh: IntervalMesh, mu: float, psi_dofs, omega_mesh: IntervalMesh):
    """Solve (M + mu^2 A) v = -M psi on the dilated mesh, v = 0 at its ends.

    ``psi_dofs`` are nodal values on ``omega_mesh`` (zero extended).
    """
    sl = omega_slice(dilated_mesh, omega_mesh)
    M, A = assemble_p1(dilated_mesh)
    psi = np.zeros(dilated_mesh.n_vertices)
    psi[sl] = psi_dofs
    inner = dilated_mesh.free
    S = (M.tocsr() + mu * mu * A.tocsr())[inner][:, inner].tocsc()
    rhs = -(M.matvec(psi))[inner]
    v = np.zeros(dilated_mesh.n_vertices)
    v[inner] = spla.splu(S).solve(rhs)
    return FeFunction(dilated_mesh, v)


class _Node:
    """Factorized screened system for one sinc node."""

    def __init__(self, omega_mesh, y, M, embed=None):
        self.y = y
        mu = np.exp(-0.5 * y)
        self.mesh = nested_dilated_mesh_1d(omega_mesh, dilated_domain_1d(M, mu), embed=embed)
        sl = omega_slice(self.mesh, omega_mesh)
        Md, Ad = assemble_p1(self.mesh)
        inner = self.mesh.free
        pos = np.full(self.mesh.n_vertices, -1)
        pos[inner] = np.arange(inner.size)
        # free Omega dofs inside the interior numbering of the dilated mesh
        self.idx = pos[np.arange(sl.start, sl.stop)[omega_mesh.free]]
        self.M = Md.tocsr()[inner][:, inner]
        self.A = (mu * mu) * Ad.tocsr()[inner][:, inner]
        self.lu = spla.splu((self.M + self.A).tocsc())
        self.n = inner.size

    def apply(self, x):
        z = np.zeros(self.n)
        z[self.idx] = x
        w = self.lu.solve(self.A @ z)
        return (self.M @ w)[self.idx]


class DtOperator:
    """Matrix-free fully discrete form on the free dofs of a normalized mesh.

    Parameters
    ----------
    mesh : IntervalMesh
        Mesh of the normalized domain, contained in (-1/2, 1/2).
    cfg : DtConfig
    s : float or FracOrder
    nest_with : DtConfig, optional
        Smaller truncation whose dilated meshes are embedded node for node,
        giving nested discrete spaces for every sinc node.
    threads : int
    """

    def __init__(self, mesh, cfg: DtConfig, s, nest_with: DtConfig | None = None,
                 threads: int = 1):
        self.s = frac_order(s).s
        self.cfg = cfg
        self.mesh = mesh
        self.threads = threads
        self.nodes = []
        for y in cfg.nodes:
            embed = None
            if nest_with is not None:
                inner = nested_dilated_mesh_1d(
                    mesh, dilated_domain_1d(nest_with.M, np.exp(-0.5 * y)))
                embed = inner.nodes
            self.nodes.append(_Node(mesh, y, cfg.M, embed))
        self.weights = np.sin(self.s * np.pi) / np.pi * cfg.k * np.exp(self.s * cfg.nodes)
        self.n = mesh.free.size

    def _term(self, args):
        node, x = args
        try:
            return node.apply(x)
        except RuntimeError as exc:
            raise ConvergenceError(f"screened solve failed at sinc node y={node.y:.4g}: {exc}")

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                terms = list(ex.map(self._term, [(nd, x) for nd in self.nodes]))
        else:
            terms = [self._term((nd, x)) for nd in self.nodes]
        out = np.zeros(self.n)
        for wgt, t in zip(self.weights, terms):
            out += wgt * t
        return out

    __call__ = matvec


def apply_dt_form(Xi: FeFunction, cfg: DtConfig, s, nest_with=None):
    """Vector of a(Xi, phi) over the free basis functions of Xi's mesh.

    The mesh must already lie in (-1/2, 1/2).
    """
    op = DtOperator(Xi.mesh, cfg, s, nest_with=nest_with)
    return op.matvec(Xi.values[Xi.mesh.free])


def solve_dt_integral(mesh: IntervalMesh, s, f, cfg: DtConfig | None = None, tol: float = 1e-10,
                      quad_order: int = 4, threads: int = 1) -> FeFunction:
    """Galerkin solution of the fully discrete Dunford-Taylor problem.

    ``mesh`` may be any interval mesh; it is scaled to (-1/2, 1/2) with the
    right hand side scaled accordingly.  ``cfg`` defaults to
    :func:`default_config` at the normalized mesh size.
    """
    s = frac_order(s).s
    nmesh, c, lam = normalize_mesh(mesh)
    if cfg is None:
        cfg = default_config(s, nmesh.h_max)
    check_ellipticity(cfg, nmesh.h_max, s)
    b = load_vector(nmesh, lambda x: lam ** (2 * s) * f(c + lam * x), quad_order)[nmesh.free]
    op = DtOperator(nmesh, cfg, s, threads=threads)
    M, _ = assemble_p1(nmesh)
    diag = M.diagonal()[nmesh.free]
    x = cg_solve(op.matvec, b, tol=tol, diag=diag) if np.any(b) else np.zeros_like(b)
    U = np.zeros(mesh.n_vertices)
    U[mesh.free] = x
    return FeFunction(mesh, U)
