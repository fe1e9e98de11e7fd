"""Quadrature rules, symmetric matrices and linear solvers.

The pair rules in this module integrate

    F(u, v) = (phi_a(x(u)) - phi_a(x'(v))) (phi_b(x(u)) - phi_b(x'(v))) / |x(u) - x'(v)|^(d+2s)

over a product of two reference simplices that touch.  Shared vertices are
numbered first in both elements, so ``x(u) - x'(v)`` and the differences of
P1 functions are linear in the homogeneous coordinates around the shared
vertex (or the shared edge, or the whole element).  In polar coordinates
around the touching set the integrand is homogeneous, so the radial
integral is done in closed form and only the angular part is left to Gauss
rules.  Every rule is applied as

    I = |J_K| |J_K'| * sum_q w_q F(u_q, v_q)

with |J| the Jacobian determinant of the affine element map.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy import special


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver misses its tolerance."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class PivotError(np.linalg.LinAlgError):
    """Raised by :func:`cholesky_solve` when a pivot is not positive."""

    def __init__(self, index):
        super().__init__(f"matrix is not positive definite: pivot {index} failed")
        self.index = index


@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights of a quadrature rule."""

    points: np.ndarray
    weights: np.ndarray

    def integrate(self, f):
        return np.sum(self.weights * f(self.points))


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1], exact up to degree 2n-1."""
    if not (1 <= n <= 64):
        raise ValueError("gauss_legendre supports 1 <= n <= 64")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(x, w)


def gauss_jacobi(n: int, a: float) -> QuadratureRule:
    """n-point rule on [0, 1] for the weight t**a, exact up to degree 2n-1.

    Nodes come from the eigenvalues of the Jacobi matrix of the
    three-term recurrence (scipy's ``roots_jacobi``).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if a <= -1:
        raise ValueError("Jacobi exponent must exceed -1")
    x, w = special.roots_jacobi(n, 0.0, a)
    return QuadratureRule(0.5 * (x + 1.0), w / 2.0 ** (a + 1.0))


def _gl01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def interval_rule(n: int):
    """Gauss-Legendre rule on [0, 1]; returns (points, weights)."""
    return _gl01(n)


def triangle_rule(n: int):
    """Collapsed Gauss rule with n*n points on the triangle (0,0), (1,0), (0,1).

    Exact for polynomials of total degree 2n-1; weights sum to 1/2.
    """
    t, wt = _gl01(n)
    # Gauss-Jacobi in the collapsed direction absorbs the Jacobian
    xj, wj = special.roots_jacobi(n, 0.0, 1.0)
    r = 0.5 * (xj + 1.0)
    wr = wj / 4.0
    a = r[:, None] * np.ones(n)[None, :]
    b = r[:, None] * t[None, :]
    pts = np.stack([(a - b).ravel(), b.ravel()], axis=1)
    w = (wr[:, None] * wt[None, :]).ravel()
    return pts, w


def _subtriangle_rule(n, P0, P1, P2):
    """Collapsed Gauss rule mapped to the triangle P0, P1, P2 in the plane."""
    pts, w = triangle_rule(n)
    P0, P1, P2 = (np.asarray(P, float) for P in (P0, P1, P2))
    J = np.column_stack([P1 - P0, P2 - P0])
    return P0 + pts @ J.T, w * abs(np.linalg.det(J))


@dataclass(frozen=True)
class DuffyPairRule:
    """Quadrature rule on a product of two reference simplices.

    Attributes
    ----------
    config : str
        ``identical``, ``edge``, ``vertex`` or ``disjoint`` (d = 2);
        ``identical``, ``adjacent`` or ``disjoint`` (d = 1).
    u, v : ndarray
        Reference coordinates in the first and second element, shape (Q, d).
    weights : ndarray
        Positive weights, shape (Q,).
    """

    config: str
    d: int
    u: np.ndarray
    v: np.ndarray
    weights: np.ndarray

    @property
    def points(self):
        return np.concatenate([self.u, self.v], axis=1)


PAIR_CONFIGS = {1: ("identical", "adjacent", "disjoint"),
                2: ("identical", "edge", "vertex", "disjoint")}


def duffy_pair_rule(config: str, order: int, s, d: int) -> DuffyPairRule:
    """Quadrature rule for a touching (or disjoint) pair of simplices.

    Parameters
    ----------
    config : str
        Pair configuration, see :data:`PAIR_CONFIGS`.  Shared vertices are
        local vertex 0 (and 1 for an edge) in both elements.
    order : int
        Gauss order per direction of the angular integrals.
    s : float or FracOrder
        Fractional order; enters the closed-form radial factors.
    d : {1, 2}
    """
    s = getattr(s, "s", s)
    if d not in PAIR_CONFIGS or config not in PAIR_CONFIGS[d]:
        raise ValueError(f"unsupported pair configuration {config!r} for d={d}")
    if order < 1:
        raise ValueError("order must be positive")
    if d == 1:
        u, v, w = _pair_rule_1d(config, order, s)
    else:
        u, v, w = _pair_rule_2d(config, order, s)
    return DuffyPairRule(config, d, u, v, w)


def _pair_rule_1d(config, n, s):
    if config == "identical":
        # z = u - v = +-xi, weight 1 - |z|; radial factor in closed form
        w = 1.0 / ((2 - 2 * s) * (3 - 2 * s))
        return (np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]),
                np.array([w, w]))
    if config == "adjacent":
        t, wt = _gl01(n)
        ts = np.concatenate([0.5 * t, 0.5 + 0.5 * t])
        ws = np.concatenate([0.5 * wt, 0.5 * wt])
        c = np.maximum(ts, 1 - ts)
        w = ws * c ** (-(3 - 2 * s)) / (3 - 2 * s)
        return (1 - ts)[:, None], ts[:, None], w
    t, wt = _gl01(n)
    U, V = np.meshgrid(t, t, indexing="ij")
    return U.reshape(-1, 1), V.reshape(-1, 1), np.outer(wt, wt).ravel()


def _pair_rule_2d(config, n, s):
    if config == "identical":
        t, wt = _gl01(n)
        rad = 1.0 / ((2 - 2 * s) * (3 - 2 * s) * (4 - 2 * s))
        Z, W = [], []
        # the L1 unit circle, split where the overlap length has a kink
        full = (t, wt)
        lo = (0.5 * t, 0.5 * wt)
        hi = (0.5 + 0.5 * t, 0.5 * wt)
        segs = [
            (lambda t: np.stack([1 - t, t], 1), lambda t: np.ones_like(t), [full]),
            (lambda t: np.stack([-t, 1 - t], 1), lambda t: np.maximum(t, 1 - t), [lo, hi]),
            (lambda t: np.stack([t - 1, -t], 1), lambda t: np.ones_like(t), [full]),
            (lambda t: np.stack([t, t - 1], 1), lambda t: np.maximum(t, 1 - t), [lo, hi]),
        ]
        for omega, cfun, parts in segs:
            for tt, ww in parts:
                Z.append(omega(tt))
                W.append(ww * cfun(tt) ** (-(2 - 2 * s)) * rad)
        z = np.concatenate(Z)
        return z, np.zeros_like(z), np.concatenate(W)
    if config == "edge":
        rad = 1.0 / ((3 - 2 * s) * (4 - 2 * s))
        tris_pos = [((0, 0), (0.5, 0), (0, 0.5)),
                    ((0.5, 0), (1, 0), (0, 1)),
                    ((0.5, 0), (0, 1), (0, 0.5))]
        tris_neg = [((0, 0), (1, 0), (0.5, 0.5)),
                    ((0, 0), (0.5, 0.5), (0, 0.5)),
                    ((0, 0.5), (0.5, 0.5), (0, 1))]
        U, V, W = [], [], []
        for sign, tris in ((1.0, tris_pos), (-1.0, tris_neg)):
            for tri in tris:
                ab, w = _subtriangle_rule(n, *tri)
                a, b = ab[:, 0], ab[:, 1]
                z1 = sign * a
                u2, v2 = b, 1 - a - b
                c = np.maximum(u2, v2 - z1) + np.maximum(z1, 0.0)
                U.append(np.stack([np.maximum(z1, 0.0), u2], 1))
                V.append(np.stack([np.maximum(-z1, 0.0), v2], 1))
                W.append(w * c ** (-(3 - 2 * s)) * rad)
        return np.concatenate(U), np.concatenate(V), np.concatenate(W)
    if config == "vertex":
        t, wt = _gl01(n)
        A, B, C = np.meshgrid(t, t, t, indexing="ij")
        A, B, C = A.ravel(), B.ravel(), C.ravel()
        w = np.einsum("i,j,k->ijk", wt, wt, wt).ravel() * B / (4 - 2 * s)
        big = np.stack([1 - A, A], 1)
        small = B[:, None] * np.stack([1 - C, C], 1)
        return (np.concatenate([big, small]), np.concatenate([small, big]),
                np.concatenate([w, w]))
    pts, w = triangle_rule(n)
    Q = len(w)
    iu, iv = np.meshgrid(np.arange(Q), np.arange(Q), indexing="ij")
    return pts[iu.ravel()], pts[iv.ravel()], np.outer(w, w).ravel()


class SymmetricMatrix:
    """Symmetric matrix stored through its lower triangle.

    Parameters
    ----------
    data : ndarray or sparse matrix
        Either a full symmetric matrix or a lower triangle.  Only the lower
        triangle is kept, so symmetry holds by construction.
    """

    def __init__(self, data):
        if sparse.issparse(data):
            self.lower = sparse.tril(data, format="csr")
            self.is_sparse = True
        else:
            data = np.asarray(data, dtype=float)
            if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] < 1:
                raise ValueError("SymmetricMatrix needs a nonempty square array")
            self.lower = np.tril(data)
            self.is_sparse = False
        self.shape = self.lower.shape

    @property
    def n(self):
        return self.shape[0]

    def diagonal(self):
        return self.lower.diagonal() if self.is_sparse else np.diag(self.lower).copy()

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        L = self.lower
        return L @ x + L.T @ x - self.diagonal() * x if x.ndim == 1 else (
            L @ x + L.T @ x - self.diagonal()[:, None] * x)

    __matmul__ = matvec

    def toarray(self):
        L = self.lower.toarray() if self.is_sparse else self.lower
        return L + L.T - np.diag(np.diag(L))

    def tocsr(self):
        if self.is_sparse:
            L = self.lower
            return (L + L.T - sparse.diags(L.diagonal())).tocsr()
        return sparse.csr_matrix(self.toarray())

    def restrict(self, idx):
        """Principal submatrix on the index set ``idx``."""
        idx = np.asarray(idx)
        if self.is_sparse:
            return SymmetricMatrix(self.tocsr()[idx][:, idx])
        return SymmetricMatrix(self.toarray()[np.ix_(idx, idx)])

    def aslinearoperator(self):
        return spla.LinearOperator(self.shape, matvec=self.matvec, dtype=float)


def _as_operator(A):
    if isinstance(A, SymmetricMatrix):
        diag = A.diagonal()
        return (A.tocsr() if A.is_sparse else A.toarray()), diag
    if sparse.issparse(A):
        return A.tocsr(), A.diagonal()
    if isinstance(A, np.ndarray):
        return A, np.diag(A).copy()
    if isinstance(A, spla.LinearOperator):
        return A, None
    if callable(A):
        return A, None
    raise TypeError("unsupported operator type")


def cg_solve(A, b, tol: float = 1e-12, maxit: int | None = None,
             n: int | None = None, diag=None, x0=None):
    """Conjugate gradients with diagonal scaling.

    Parameters
    ----------
    A : SymmetricMatrix, sparse matrix, ndarray, LinearOperator or callable
        Symmetric positive definite operator.  A callable is treated as the
        matrix-vector product.
    b : ndarray
    tol : float
        Relative residual target ``||Ax - b|| <= tol ||b||``.
    maxit : int, optional
        Iteration cap, default ``max(1000, 10 n)``.
    diag : ndarray, optional
        Diagonal for scaling; taken from ``A`` when available.

    Raises
    ------
    ConvergenceError
        If the relative residual target is not met.
    """
    b = np.asarray(b, dtype=float)
    op, d = _as_operator(A)
    if diag is not None:
        d = np.asarray(diag, dtype=float)
    N = b.shape[0]
    if callable(op) and not isinstance(op, spla.LinearOperator):
        op = spla.LinearOperator((N, N), matvec=op, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    if maxit is None:
        maxit = max(1000, 10 * N)
    M = None
    if d is not None:
        if np.any(d <= 0):
            raise ConvergenceError("non-positive diagonal entry; operator is not SPD")
        M = sparse.diags(1.0 / d)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    res = np.inf
    for _ in range(4):
        x, info = spla.cg(op, b, x0=x, rtol=0.5 * tol, atol=0.0, maxiter=maxit, M=M)
        res = np.linalg.norm(b - op @ x) / bnorm
        if not np.all(np.isfinite(x)):
            raise ConvergenceError("conjugate gradients broke down", res)
        if res <= tol:
            return x
        if info > 0 and res > 1e3 * tol:
            break
    raise ConvergenceError(
        f"conjugate gradients did not converge: relative residual {res:.3e} > {tol:.1e}", res)


def cholesky_solve(A, b):
    """Direct solve of a dense symmetric positive definite system.

    Raises
    ------
    PivotError
        With the (zero based) index of the first failing pivot.
    """
    if isinstance(A, SymmetricMatrix):
        A = A.toarray()
    A = np.array(A, dtype=float)
    c, info = scipy.linalg.lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise PivotError(info - 1)
    if info < 0:
        raise ValueError("invalid argument to dpotrf")
    x, info = scipy.linalg.lapack.dpotrs(c, np.asarray(b, dtype=float), lower=1)
    return x
