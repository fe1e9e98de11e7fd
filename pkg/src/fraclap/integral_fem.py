"""Galerkin discretization of the integral fractional Laplacian with P1
elements.

The bilinear form C(d,s)/2 * int int (u(x)-u(y))(w(x)-w(y)) |x-y|^(-d-2s) is
split over pairs of elements of an auxiliary mesh covering a ball B around
the domain, plus a tail term int u w rho with rho(x) = int_{B^c} |x-y|^(-d-2s).
Touching pairs use the rules of :func:`fraclap.numerics.duffy_pair_rule`;
separated pairs use tensor Gauss rules whose order grows as the pair gets
closer.  Only pairs with at least one element inside the domain contribute.
"""
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sparse

from .analytic import frac_order
from .fem_core import FeFunction, load_vector
from .mesh import IntervalMesh, TriMesh, disk_aux_mesh, interval_aux_mesh, outer_boundary_edges
from .numerics import SymmetricMatrix, cg_solve, cholesky_solve, duffy_pair_rule, interval_rule, \
    triangle_rule

DENSE_LIMIT = 5000


def _ref_rule(d, n):
    if d == 1:
        t, w = interval_rule(n)
        return t[:, None], w
    return triangle_rule(n)


def _bary(d, u):
    """Barycentric coordinates at reference points u of shape (Q, d)."""
    return np.concatenate([1.0 - u.sum(axis=1, keepdims=True), u], axis=1)


def separation_order(eta, tol, d):
    """Gauss order per direction for a pair with separation ratio eta.

    eta is a lower bound of dist(K, K') / max(diam K, diam K').  The
    integrand is analytic inside a Bernstein ellipse of parameter
    rho = a + sqrt(a^2 - 1) with a = 1 + 2 eta, so n points per
    direction give an error of order rho^(-2n).
    """
    a = 1.0 + 2.0 * np.maximum(eta, 1e-3)
    rho = a + np.sqrt(a * a - 1.0)
    n = np.ceil(np.log(1.0 / tol) / (2.0 * np.log(rho))) + 2
    return np.clip(n, 1, 24).astype(int)


class _Geometry:
    """Per-element data of the auxiliary mesh."""

    def __init__(self, aux):
        m = aux.mesh
        self.d = m.dim
        self.E = np.asarray(m.elements)
        V = np.asarray(m.vertices, dtype=float)
        self.V = V[:, None] if self.d == 1 else V
        self.P = self.V[self.E]                       # (E, d+1, d)
        if self.d == 1:
            self.jac = np.abs(self.P[:, 1, 0] - self.P[:, 0, 0])
        else:
            e1 = self.P[:, 1] - self.P[:, 0]
            e2 = self.P[:, 2] - self.P[:, 0]
            self.jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        self.centroid = self.P.mean(axis=1)
        self.radius = np.linalg.norm(self.P - self.centroid[:, None], axis=2).max(axis=1)
        self.diam = np.max([np.linalg.norm(self.P[:, i] - self.P[:, j], axis=1)
                            for i in range(self.d + 1) for j in range(i)], axis=0)
        self.dof = aux.dof
        self.in_omega = aux.in_omega
        self._rules = {}

    def rule(self, n):
        """Physical points, weights and shape values of order n on all elements."""
        if n not in self._rules:
            u, w = _ref_rule(self.d, n)
            lam = _bary(self.d, u)
            x = np.einsum("qk,ekd->eqd", lam, self.P)
            self._rules[n] = (x, self.jac[:, None] * w[None, :], lam)
        return self._rules[n]


class _Accumulator:
    """Collects local matrices and scatters them into a dense free-dof matrix."""

    def __init__(self, n):
        self.n = n
        self.rows, self.cols, self.vals = [], [], []

    def add(self, dofs, local):
        """dofs (P, k) global free indices (or -1), local (P, k, k)."""
        k = dofs.shape[1]
        r = np.repeat(dofs, k, axis=1).ravel()
        c = np.tile(dofs, (1, k)).ravel()
        v = local.reshape(-1)
        keep = (r >= 0) & (c >= 0)
        self.rows.append(r[keep])
        self.cols.append(c[keep])
        self.vals.append(v[keep])

    def matrix(self):
        if not self.vals:
            return np.zeros((self.n, self.n))
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        A = np.bincount(r * self.n + c, weights=v, minlength=self.n * self.n)
        return A.reshape(self.n, self.n)


def _touch_matrix(E, nv):
    ne = E.shape[0]
    inc = sparse.csr_matrix((np.ones(E.size), (np.repeat(np.arange(ne), E.shape[1]), E.ravel())),
                            shape=(ne, nv))
    return (inc @ inc.T).tocsr()


def _order_pairs(E, i, j, nshared):
    """Reorder local vertices so shared ones come first, in the same order."""
    Ki, Kj = E[i], E[j]
    eq = Ki[:, :, None] == Kj[:, None, :]
    oi = np.argsort(~eq.any(axis=2), axis=1, kind="stable")
    Ki2 = np.take_along_axis(Ki, oi, axis=1)
    others = Kj[~eq.any(axis=1)].reshape(len(Kj), -1)
    return Ki2, np.concatenate([Ki2[:, :nshared], others], axis=1)


def _touching_contrib(geo, acc, config, i, j, rule, factor, s, chunk=4_000_000):
    """Local matrices of touching pairs (i, j) with the given pair rule."""
    d = geo.d
    nshared = {"identical": d + 1, "edge": 2, "vertex": 1, "adjacent": 1}[config]
    if config == "identical":
        Ki = Kj = geo.E[i]
        union = Ki
    else:
        Ki, Kj = _order_pairs(geo.E, i, j, nshared)
        union = np.concatenate([Ki, Kj[:, nshared:]], axis=1)
    lam_u = _bary(d, rule.u)
    lam_v = _bary(d, rule.v)
    k = d + 1
    nU = union.shape[1]
    D = np.zeros((len(rule.weights), nU))
    D[:, :k] += lam_u
    if config == "identical":
        D[:, :k] -= lam_v
    else:
        D[:, :nshared] -= lam_v[:, :nshared]
        D[:, k:] -= lam_v[:, nshared:]
    DD = np.einsum("qa,qb->qab", D, D).reshape(len(D), -1)
    step = max(1, chunk // len(D))
    for a in range(0, len(i), step):
        sl = slice(a, a + step)
        # x - y is linear in the vertex coordinates of both elements
        diff = np.matmul(lam_u, geo.V[Ki[sl]]) - np.matmul(lam_v, geo.V[Kj[sl]])
        r2 = (diff * diff).sum(axis=2)
        kern = rule.weights[None, :] * r2 ** (-(d + 2 * s) / 2.0)
        kern *= (factor * geo.jac[i[sl]] * geo.jac[j[sl]])[:, None]
        local = (kern @ DD).reshape(-1, nU, nU)
        acc.add(geo.dof[union[sl]], local)


def _disjoint_contrib(geo, acc, i, j, na, nb, factor, s, chunk=3_000_000):
    """Local matrices of separated pairs with tensor Gauss rules.

    Orders ``na`` and ``nb`` (per direction) are used on the first and
    second element of each pair.
    """
    d = geo.d
    k = d + 1
    ua, wa = _ref_rule(d, na)
    ub, wb = _ref_rule(d, nb)
    la, lb = _bary(d, ua), _bary(d, ub)
    LLa = np.einsum("qk,ql->qkl", la, la).reshape(len(wa), k * k)
    LLb = np.einsum("qk,ql->qkl", lb, lb).reshape(len(wb), k * k)
    step = max(1, chunk // (len(wa) * len(wb)))
    expo = -(d + 2 * s) / 2.0
    for a in range(0, len(i), step):
        ii, jj = i[a:a + step], j[a:a + step]
        # shift by the first centroid so that differences do not cancel
        c = geo.centroid[ii][:, None, :]
        X = np.matmul(la, geo.P[ii]) - c
        Y = np.matmul(lb, geo.P[jj]) - c
        r2 = (X[:, :, None, 0] - Y[:, None, :, 0]) ** 2
        for dd in range(1, d):
            r2 += (X[:, :, None, dd] - Y[:, None, :, dd]) ** 2
        kern = np.power(r2, expo, out=r2)
        wX = (factor * geo.jac[ii])[:, None] * wa
        wY = geo.jac[jj][:, None] * wb
        rX = np.matmul(kern, wY[:, :, None])[:, :, 0] * wX
        rY = np.matmul(wX[:, None, :], kern)[:, 0, :] * wY
        kern *= wX[:, :, None]
        kern *= wY[:, None, :]
        Kxy = -np.matmul(np.matmul(la.T, kern), lb)
        local = np.zeros((len(ii), 2 * k, 2 * k))
        local[:, :k, :k] = (rX @ LLa).reshape(-1, k, k)
        local[:, k:, k:] = (rY @ LLb).reshape(-1, k, k)
        local[:, :k, k:] = Kxy
        local[:, k:, :k] = np.transpose(Kxy, (0, 2, 1))
        dofs = geo.dof[np.concatenate([geo.E[ii], geo.E[jj]], axis=1)]
        acc.add(dofs, local)


def _segment_distance(p, a, b):
    """Distance from points p to segments (a, b), all of shape (P, 2)."""
    ab = b - a
    t = np.einsum("pd,pd->p", p - a, ab) / np.einsum("pd,pd->p", ab, ab)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(p - a - t[:, None] * ab, axis=1)


def element_distance(geo, i, j):
    """Exact distance between disjoint elements i and j."""
    Pi, Pj = geo.P[i], geo.P[j]
    if geo.d == 1:
        return np.maximum(Pj.min(axis=1) - Pi.max(axis=1), Pi.min(axis=1) - Pj.max(axis=1))[:, 0]
    out = np.full(len(i), np.inf)
    for A, B in ((Pi, Pj), (Pj, Pi)):
        for v in range(3):
            for e in range(3):
                out = np.minimum(out, _segment_distance(A[:, v], B[:, e], B[:, (e + 1) % 3]))
    return out


def polygon_tail(points, vertices_ccw, s, n_gauss=12):
    """Integral of |x - y|^(-2-2s) over the exterior of a convex polygon.

    Uses rho(x) = 1/(2s) * sum_edges d_e^(-2s) int cos(phi)^(2s) dphi, with
    d_e the distance from x to the edge line and phi the angle from the
    edge normal.
    """
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    A = np.asarray(vertices_ccw, dtype=float)
    B = np.roll(A, -1, axis=0)
    t = B - A
    t /= np.linalg.norm(t, axis=1)[:, None]
    nrm = np.stack([t[:, 1], -t[:, 0]], axis=1)        # outward for ccw order
    g, wg = np.polynomial.legendre.leggauss(n_gauss)
    out = np.zeros(len(x))
    for e in range(len(A)):
        pa = A[e] - x
        pb = B[e] - x
        de = pa @ nrm[e]
        phia = np.arctan2(pa @ t[e], de)
        phib = np.arctan2(pb @ t[e], de)
        half = 0.5 * (phib - phia)
        mid = 0.5 * (phib + phia)
        phi = mid[:, None] + half[:, None] * g[None, :]
        out += de ** (-2 * s) * half * (np.cos(phi) ** (2 * s) @ wg)
    return out / (2 * s)


def _tail_contrib(geo, acc, aux, s, factor, order=6):
    omega = np.flatnonzero(geo.in_omega)
    x, w, lam = geo.rule(order)
    xo = x[omega]
    if geo.d == 1:
        c, R = aux.center[0], aux.R
        z = xo[..., 0] - c
        rho = ((R - z) ** (-2 * s) + (R + z) ** (-2 * s)) / (2 * s)
    else:
        be = outer_boundary_edges(aux.mesh)
        # chain boundary edges into a ccw polygon
        nxt = dict(zip(be[:, 0], be[:, 1]))
        start = be[0, 0]
        poly = [start]
        while nxt[poly[-1]] != start:
            poly.append(nxt[poly[-1]])
        rho = polygon_tail(xo.reshape(-1, 2), aux.mesh.vertices[poly], s).reshape(xo.shape[:2])
    local = np.einsum("eq,qk,ql->ekl", factor * w[omega] * rho, lam, lam)
    acc.add(geo.dof[geo.E[omega]], local)


def make_aux(mesh, R_aux=None):
    if isinstance(mesh, IntervalMesh):
        radius = 0.5 * (mesh.nodes[-1] - mesh.nodes[0])
        return interval_aux_mesh(mesh, 2.0 * radius if R_aux is None else R_aux)
    if isinstance(mesh, TriMesh):
        V = mesh.vertices[mesh.boundary_flags]
        radius = float(np.hypot(V[:, 0], V[:, 1]).max())
        return disk_aux_mesh(mesh, 2.0 * radius if R_aux is None else R_aux)
    raise TypeError("unsupported mesh type")


def assemble_integral_stiffness(mesh, s, R_aux: float | None = None, tol: float = 1e-9,
                                touch_order: int | None = None, threads: int = 1,
                                return_aux: bool = False):
    """Dense stiffness matrix of the integral fractional Laplacian on free dofs.

    Parameters
    ----------
    mesh : IntervalMesh or TriMesh
        Interval, or disk mesh from :func:`fraclap.mesh.disk_tri_mesh`.
    s : float or FracOrder
    R_aux : float, optional
        Radius of the auxiliary ball; default twice the domain radius.
    tol : float
        Target relative accuracy of each pair integral.
    touch_order : int, optional
        Gauss order of the angular rules for touching pairs.
    threads : int
        Worker threads for the separated pairs; the result does not depend
        on this value.
    """
    s = frac_order(s)
    sv = s.s
    aux = make_aux(mesh, R_aux)
    geo = _Geometry(aux)
    d = geo.d
    C = s.C_ds(d)
    if touch_order is None:
        touch_order = int(np.clip(np.ceil(4 + 1.3 * np.log10(1.0 / tol)), 6, 24))
    nf = aux.n_free
    acc = _Accumulator(nf)
    E = geo.E
    ne = E.shape[0]
    omega = geo.in_omega

    # identical pairs: only domain elements carry nonzero functions
    idx = np.flatnonzero(omega)
    _touching_contrib(geo, acc, "identical", idx, idx,
                      duffy_pair_rule("identical", touch_order, sv, d), 0.5 * C, sv)

    T = sparse.triu(_touch_matrix(E, aux.mesh.n_vertices), k=1).tocoo()
    ti, tj, tc = T.row, T.col, T.data.astype(int)
    keep = omega[ti] | omega[tj]
    ti, tj, tc = ti[keep], tj[keep], tc[keep]
    if d == 1:
        configs = {1: "adjacent"}
    else:
        configs = {2: "edge", 1: "vertex"}
    for nsh, cfg in configs.items():
        sel = tc == nsh
        if np.any(sel):
            _touching_contrib(geo, acc, cfg, ti[sel], tj[sel],
                              duffy_pair_rule(cfg, touch_order, sv, d), C, sv)

    # separated pairs, row by row over domain elements
    touch = _touch_matrix(E, aux.mesh.n_vertices)
    blocks = []
    rows = np.flatnonzero(omega)
    jall = np.arange(ne)
    for i in rows:
        cand = jall[(jall > i) | ~omega]
        cand = cand[cand != i]
        tnz = touch.indices[touch.indptr[i]:touch.indptr[i + 1]]
        cand = np.setdiff1d(cand, tnz, assume_unique=False)
        blocks.append((np.full(cand.size, i), cand))
    pi = np.concatenate([b[0] for b in blocks]) if blocks else np.zeros(0, int)
    pj = np.concatenate([b[1] for b in blocks]) if blocks else np.zeros(0, int)
    dist = (np.linalg.norm(geo.centroid[pi] - geo.centroid[pj], axis=1)
            - geo.radius[pi] - geo.radius[pj])
    near = np.flatnonzero(dist < 3.0 * np.maximum(geo.diam[pi], geo.diam[pj]))
    dist[near] = element_distance(geo, pi[near], pj[near])
    na = separation_order(dist / geo.diam[pi], tol, d)
    nb = separation_order(dist / geo.diam[pj], tol, d)

    key = na * 100 + nb
    order = np.argsort(key, kind="stable")
    bounds = np.flatnonzero(np.diff(key[order])) + 1
    jobs = []
    for grp in np.split(order, bounds):
        for a in range(0, grp.size, 200000):
            sel = grp[a:a + 200000]
            jobs.append((na[sel[0]], nb[sel[0]], sel))

    def run(job):
        n1, n2, sel = job
        sub = _Accumulator(nf)
        _disjoint_contrib(geo, sub, pi[sel], pj[sel], int(n1), int(n2), C, sv)
        return sub.matrix()

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]

    _tail_contrib(geo, acc, aux, sv, C)
    A = acc.matrix()
    for part in parts:
        A += part
    A = 0.5 * (A + A.T)
    out = SymmetricMatrix(A)
    if return_aux:
        return out, aux
    return out


def solve_integral(mesh, s, f, R_aux: float | None = None, tol: float = 1e-9,
                   quad_order: int = 4, threads: int = 1, return_matrix: bool = False):
    """Galerkin solution with zero exterior data.

    Returns
    -------
    FeFunction, and the stiffness matrix if ``return_matrix``.
    """
    A = assemble_integral_stiffness(mesh, s, R_aux, tol=tol, threads=threads)
    free = mesh.free
    b = load_vector(mesh, f, quad_order)[free]
    if A.n <= DENSE_LIMIT:
        x = cholesky_solve(A, b)
    else:
        x = cg_solve(A, b, tol=1e-12)
    U = np.zeros(mesh.n_vertices)
    U[free] = x
    sol = FeFunction(mesh, U)
    return (sol, A) if return_matrix else sol


def energy_error_galerkin_integral(U: FeFunction, s, f, exact_energy_sq: float, A=None,
                                   R_aux=None, tol: float = 1e-9) -> float:
    """Energy error sqrt(<f, u> - U^T A U) by Galerkin orthogonality."""
    if A is None:
        A = assemble_integral_stiffness(U.mesh, s, R_aux, tol=tol)
    x = U.values[U.mesh.free]
    diff = exact_energy_sq - float(x @ A.matvec(x))
    if diff < 0:
        warnings.warn(f"negative energy defect {diff:.3e} clamped to zero", RuntimeWarning)
        return 0.0
    return float(np.sqrt(diff))


def write_lower_triangle(path, A):
    """Write a symmetric matrix as its dimension followed by the row-major lower triangle."""
    L = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
    n = L.shape[0]
    with open(path, "w") as fh:
        fh.write(f"{n}\n")
        for i in range(n):
            fh.write(" ".join(f"{v:.17e}" for v in L[i, :i + 1]) + "\n")


def read_lower_triangle(path) -> SymmetricMatrix:
    """Inverse of :func:`write_lower_triangle`."""
    with open(path) as fh:
        n = int(fh.readline())
        vals = np.array(fh.read().split(), dtype=float)
    if vals.size != n * (n + 1) // 2:
        raise ValueError(f"expected {n * (n + 1) // 2} entries, found {vals.size}")
    L = np.zeros((n, n))
    L[np.tril_indices(n)] = vals
    return SymmetricMatrix(L)
