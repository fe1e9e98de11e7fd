"""P1 finite elements on interval and triangle meshes, and the weighted
tensor product system of the extension problem."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy import special

from .analytic import frac_order
from .mesh import CylinderMesh, GradedYPartition, IntervalMesh
from .numerics import SymmetricMatrix, cg_solve, interval_rule, triangle_rule


@dataclass
class FeFunction:
    """Nodal values of a continuous piecewise linear function."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.mesh.n_dofs if isinstance(self.mesh, CylinderMesh) else self.mesh.n_vertices
        if self.values.shape != (n,):
            raise ValueError(f"expected {n} values, got {self.values.shape}")


@dataclass(frozen=True)
class WeightedYMatrices:
    """Mass and stiffness matrices in y with weight y**alpha."""

    M_alpha: sparse.csr_matrix
    A_alpha: sparse.csr_matrix


def _element_data(mesh):
    """Gradients of barycentric coordinates and element measures."""
    if isinstance(mesh, IntervalMesh):
        h = mesh.sizes
        grads = np.stack([-1.0 / h, 1.0 / h], axis=1)[:, :, None]
        return grads, h
    P = mesh.vertices[mesh.triangles]
    J = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # columns are edges
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1] / det
    Jinv[:, 1, 1] = J[:, 0, 0] / det
    Jinv[:, 0, 1] = -J[:, 0, 1] / det
    Jinv[:, 1, 0] = -J[:, 1, 0] / det
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.einsum("ij,ejk->eik", ref, Jinv)
    return grads, 0.5 * det


def _scatter(mesh, local):
    E = mesh.elements
    k = E.shape[1]
    rows = np.repeat(E, k, axis=1).ravel()
    cols = np.tile(E, (1, k)).ravel()
    n = mesh.n_vertices
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_p1(mesh):
    """P1 mass and stiffness matrices over all nodes, no boundary conditions."""
    grads, meas = _element_data(mesh)
    k = mesh.elements.shape[1]
    K = np.einsum("eid,ejd->eij", grads, grads) * meas[:, None, None]
    if k == 2:
        ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Mloc = meas[:, None, None] * ref[None]
    return SymmetricMatrix(_scatter(mesh, Mloc)), SymmetricMatrix(_scatter(mesh, K))


def element_quadrature(mesh, order: int):
    """Physical quadrature points, weights and shape values per element.

    Returns
    -------
    x : ndarray, shape (E, Q) or (E, Q, 2)
    w : ndarray, shape (E, Q)
    phi : ndarray, shape (Q, k)
        Barycentric coordinates at the reference points.
    """
    if isinstance(mesh, IntervalMesh):
        t, wt = interval_rule(order)
        a = mesh.nodes[:-1]
        h = mesh.sizes
        x = a[:, None] + h[:, None] * t[None, :]
        phi = np.stack([1 - t, t], axis=1)
        return x, h[:, None] * wt[None, :], phi
    pts, wt = triangle_rule(order)
    P = mesh.vertices[mesh.triangles]
    phi = np.stack([1 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=1)
    x = np.einsum("qk,ekd->eqd", phi, P)
    area = mesh.areas
    return x, 2.0 * area[:, None] * wt[None, :], phi


def load_vector(mesh, f, quad_order: int = 4):
    """Vector of integrals of f against the nodal basis functions."""
    x, w, phi = element_quadrature(mesh, quad_order)
    fx = np.asarray(f(x), dtype=float) * w
    loc = np.einsum("eq,qk->ek", np.broadcast_to(fx, w.shape), phi)
    return np.bincount(mesh.elements.ravel(), weights=loc.ravel(), minlength=mesh.n_vertices)


def l2_project(mesh, f, quad_order: int = 4, tol: float = 1e-13) -> FeFunction:
    """L2 projection onto the P1 space (all nodes, no boundary condition)."""
    M, _ = assemble_p1(mesh)
    b = load_vector(mesh, f, quad_order)
    return FeFunction(mesh, cg_solve(M, b, tol=tol))


def apply_dirichlet(A, b, mesh):
    """Eliminate flagged degrees of freedom.

    Returns
    -------
    A_free : SymmetricMatrix or None
        ``None`` when every dof is constrained.
    b_free : ndarray
    free : ndarray
        Indices of the retained dofs.
    """
    flags = mesh.dirichlet if isinstance(mesh, CylinderMesh) else mesh.boundary_flags
    free = np.flatnonzero(~np.asarray(flags))
    b = np.asarray(b, dtype=float)
    if free.size == 0:
        return None, b[free], free
    if not isinstance(A, SymmetricMatrix):
        A = SymmetricMatrix(A)
    return A.restrict(free), b[free], free


def extend_free(values, free, n):
    out = np.zeros(n)
    out[free] = values
    return out


def weighted_y_matrices(ypart: GradedYPartition, alpha: float) -> WeightedYMatrices:
    """1D P1 matrices with weight y**alpha, integrated exactly.

    On an element (a, b) with r = a/b the integrals reduce to
    b**(alpha+1) * J_k where J_k = int_r^1 t**alpha (1-t)**k dt, which are
    complete-minus-incomplete beta functions and carry no cancellation.
    """
    if not (-1.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (-1, 1)")
    y = ypart.nodes
    a, b = y[:-1], y[1:]
    r = a / b
    p = alpha + 1.0
    J = [special.beta(p, k + 1.0) * special.betaincc(p, k + 1.0, r) for k in range(3)]
    om = 1.0 - r
    scale = b ** p
    mLL = scale * J[2] / om ** 2
    mLR = scale * (om * J[1] - J[2]) / om ** 2
    mRR = scale * (om ** 2 * J[0] - 2 * om * J[1] + J[2]) / om ** 2
    kk = scale * J[0] / (b - a) ** 2
    n = y.size
    i = np.arange(n - 1)
    rows = np.concatenate([i, i, i + 1, i + 1])
    cols = np.concatenate([i, i + 1, i, i + 1])
    M = sparse.coo_matrix((np.concatenate([mLL, mLR, mLR, mRR]), (rows, cols)), shape=(n, n))
    A = sparse.coo_matrix((np.concatenate([kk, -kk, -kk, kk]), (rows, cols)), shape=(n, n))
    return WeightedYMatrices(M.tocsr(), A.tocsr())


def assemble_cylinder_full(cmesh: CylinderMesh, s):
    """Weighted stiffness over all cylinder dofs (no boundary conditions)."""
    s = frac_order(s)
    W = weighted_y_matrices(cmesh.ypart, s.alpha)
    Mb, Ab = assemble_p1(cmesh.base)
    return (sparse.kron(W.M_alpha, Ab.tocsr()) + sparse.kron(W.A_alpha, Mb.tocsr())).tocsr()


def assemble_cylinder(cmesh: CylinderMesh, s) -> SymmetricMatrix:
    """Weighted stiffness restricted to the free cylinder dofs."""
    S = assemble_cylinder_full(cmesh, s)
    free = cmesh.free
    return SymmetricMatrix(S[free][:, free])


def cylinder_load(cmesh: CylinderMesh, s, f, quad_order: int = 4):
    """Right hand side d_s <f, tr W>: the base load vector on layer 0."""
    s = frac_order(s)
    b = np.zeros(cmesh.n_dofs)
    b[:cmesh.n_base] = s.d_s * load_vector(cmesh.base, f, quad_order)
    return b


def trace_at_zero(v: FeFunction) -> FeFunction:
    """Restriction of a cylinder function to the layer y = 0."""
    cm = v.mesh
    return FeFunction(cm.base, v.values[:cm.n_base].copy())
