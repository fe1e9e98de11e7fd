"""Interval, triangle, cylinder and dilated meshes.

Meshes are plain immutable containers.  Triangles are stored with
counterclockwise orientation; boundary markers are per vertex.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class IntervalMesh:
    """Partition of an interval.

    Attributes
    ----------
    nodes : ndarray
        Strictly increasing coordinates.
    boundary_flags : ndarray of bool
        Dirichlet markers; first and last node are always flagged.
    """

    nodes: np.ndarray
    boundary_flags: np.ndarray = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("an interval mesh needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        flags = self.boundary_flags
        if flags is None:
            flags = np.zeros(nodes.size, dtype=bool)
        flags = np.array(flags, dtype=bool)
        flags[0] = flags[-1] = True
        nodes.setflags(write=False)
        flags.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "boundary_flags", flags)

    dim = 1

    @property
    def vertices(self):
        return self.nodes

    @property
    def n_vertices(self):
        return self.nodes.size

    @property
    def elements(self):
        i = np.arange(self.nodes.size - 1)
        return np.stack([i, i + 1], axis=1)

    @property
    def n_elements(self):
        return self.nodes.size - 1

    @property
    def sizes(self):
        return np.diff(self.nodes)

    @property
    def h_max(self):
        return float(self.sizes.max())

    @property
    def free(self):
        """Indices of non-Dirichlet nodes."""
        return np.flatnonzero(~self.boundary_flags)


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation with counterclockwise triangles."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray

    dim = 2

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        T = np.asarray(self.triangles, dtype=np.int64)
        area = signed_areas(V, T)
        if np.any(area <= 0):
            raise ValueError("triangles must have positive signed area")
        flags = np.asarray(self.boundary_flags, dtype=bool)
        for a in (V, T, flags):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", T)
        object.__setattr__(self, "boundary_flags", flags)

    @property
    def elements(self):
        return self.triangles

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.triangles.shape[0]

    @property
    def areas(self):
        return signed_areas(self.vertices, self.triangles)

    def _edge_lengths(self):
        P = self.vertices[self.triangles]
        return np.stack([np.linalg.norm(P[:, (i + 1) % 3] - P[:, i], axis=1)
                         for i in range(3)], axis=1)

    @property
    def diameters(self):
        return self._edge_lengths().max(axis=1)

    @property
    def h_max(self):
        return float(self.diameters.max())

    @property
    def sigma(self):
        """Largest ratio of element diameter to inradius."""
        e = self._edge_lengths()
        inrad = 2.0 * self.areas / e.sum(axis=1)
        return float(np.max(e.max(axis=1) / inrad))

    @property
    def free(self):
        return np.flatnonzero(~self.boundary_flags)

    def edges(self):
        """Unique edges as sorted vertex pairs, and per-edge element counts."""
        T = self.triangles
        E = np.sort(np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(E, axis=0, return_counts=True)
        return uniq, counts


def signed_areas(V, T):
    P = np.asarray(V)[np.asarray(T)]
    d1 = P[:, 1] - P[:, 0]
    d2 = P[:, 2] - P[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True)
class GradedYPartition:
    """Partition y_m = (m/M)**gamma * Y of the extended variable."""

    Y: float
    M: int
    gamma: float
    nodes: np.ndarray = field(repr=False)

    @property
    def sizes(self):
        return np.diff(self.nodes)


@dataclass(frozen=True)
class CylinderMesh:
    """Tensor product of a base mesh with a partition of (0, Y).

    The degree of freedom of base vertex v on layer m is ``m * n_base + v``.
    """

    base: object
    ypart: GradedYPartition

    @property
    def n_base(self):
        return self.base.n_vertices

    @property
    def n_dofs(self):
        return self.n_base * (self.ypart.M + 1)

    def dof(self, v, m):
        return m * self.n_base + v

    @property
    def dirichlet(self):
        """Boolean mask: lateral boundary at every level plus the top layer."""
        M = self.ypart.M
        mask = np.tile(self.base.boundary_flags, M + 1)
        mask[M * self.n_base:] = True
        return mask

    @property
    def free(self):
        return np.flatnonzero(~self.dirichlet)


@dataclass(frozen=True)
class DilatedDomain:
    """Dilated interval scale * B for the truncated screened problems."""

    mu: float
    M: float
    bounds: tuple
    scale: float


def uniform_interval_mesh(a: float, b: float, n: int) -> IntervalMesh:
    """n equal elements on [a, b]."""
    if not a < b:
        raise ValueError("need a < b")
    if n < 1:
        raise ValueError("need at least one element")
    return IntervalMesh(np.linspace(a, b, n + 1))


def boundary_graded_interval_mesh(a: float, b: float, n: int, mu_grade: float) -> IntervalMesh:
    """Mesh graded toward both endpoints.

    The left half uses t -> (2t)**mu / 2 on a uniform parameter grid and the
    right half is its mirror image.
    """
    if n < 2 or n % 2:
        raise ValueError("graded meshes need an even number of elements")
    if mu_grade < 1:
        raise ValueError("grading exponent must be >= 1")
    t = np.arange(n // 2 + 1) / n
    left = (2 * t) ** mu_grade / 2
    ref = np.concatenate([left, 1.0 - left[-2::-1]])
    return IntervalMesh(a + (b - a) * ref)


def unit_square_tri_mesh(n: int) -> TriMesh:
    """Structured mesh of (0,1)^2; each cell is cut along its rising diagonal."""
    if n < 1:
        raise ValueError("n must be positive")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    V = np.stack([X.ravel(), Y.ravel()], axis=1)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    T = np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])
    flags = ((V[:, 0] == 0) | (V[:, 0] == 1) | (V[:, 1] == 0) | (V[:, 1] == 1))
    return TriMesh(V, T, flags)


def _zip_rings(inner, outer, th_in, th_out):
    """Triangulate the annulus between two rings of vertices.

    ``inner`` and ``outer`` are vertex index arrays with angles ``th_*``
    increasing from the same origin.  Walks both rings, always advancing
    the ring whose next vertex has the smaller angle.
    """
    tris = []
    ni, no = len(inner), len(outer)
    if ni == 1:
        for k in range(no):
            tris.append((inner[0], outer[k], outer[(k + 1) % no]))
        return tris
    ai = np.append(th_in, th_in[0] + 2 * np.pi)
    ao = np.append(th_out, th_out[0] + 2 * np.pi)
    i = k = 0
    while i < ni or k < no:
        if k < no and (i >= ni or ao[k + 1] <= ai[i + 1]):
            tris.append((inner[i % ni], outer[k], outer[(k + 1) % no]))
            k += 1
        else:
            tris.append((inner[i % ni], outer[k % no], inner[(i + 1) % ni]))
            i += 1
    return tris


def _ring_angles(N, j):
    # stagger successive rings by half a step to avoid aligned spokes
    return 2 * np.pi * (np.arange(N) + 0.5 * (j % 2)) / N


def _polar_mesh(radii, counts, center=(0.0, 0.0)):
    """Triangulate concentric rings; ``counts[0] == 1`` means a center point."""
    verts, rings, angles = [], [], []
    start = 0
    for j, (r, N) in enumerate(zip(radii, counts)):
        if N == 1:
            th = np.zeros(1)
            pts = np.array([[center[0], center[1]]])
        else:
            th = _ring_angles(N, j)
            pts = np.stack([center[0] + r * np.cos(th), center[1] + r * np.sin(th)], 1)
        verts.append(pts)
        rings.append(np.arange(start, start + N))
        angles.append(th)
        start += N
    tris = []
    for j in range(len(radii) - 1):
        tris += _zip_rings(rings[j], rings[j + 1], angles[j], angles[j + 1])
    V = np.concatenate(verts)
    T = np.array(tris, dtype=np.int64)
    neg = signed_areas(V, T) < 0
    T[neg] = T[neg][:, [0, 2, 1]]
    return V, T, rings


def _disk_counts(radii):
    # tangential spacing close to 2/sqrt(3) times the radial spacing
    counts = [1]
    for j in range(1, len(radii)):
        dr = radii[j] - radii[j - 1]
        N = max(6, int(np.ceil(2 * np.pi * radii[j] / (1.15 * dr))))
        N = min(max(N, counts[-1]), 2 * counts[-1]) if counts[-1] > 1 else N
        counts.append(N)
    return counts


def disk_radii(radius, n_layers, mu_grade):
    j = np.arange(n_layers + 1)
    return radius * (1.0 - (1.0 - j / n_layers) ** mu_grade)


def disk_tri_mesh(radius: float, n_layers: int, mu_grade: float = 1.0) -> TriMesh:
    """Polar layered triangulation of the disk of given radius.

    Layer radii are r_j = radius (1 - (1 - j/n)**mu), so the layers
    concentrate at the boundary for mu > 1.  Ring vertex counts follow the
    local radial spacing, which keeps elements close to equilateral.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n_layers < 1:
        raise ValueError("need at least one layer")
    if mu_grade < 1:
        raise ValueError("grading exponent must be >= 1")
    radii = disk_radii(radius, n_layers, mu_grade)
    counts = _disk_counts(radii)
    V, T, rings = _polar_mesh(radii, counts)
    flags = np.zeros(len(V), dtype=bool)
    flags[rings[-1]] = True
    return TriMesh(V, T, flags)


def disk_layers_for_h(h: float, radius: float = 1.0, mu_grade: float = 1.0) -> int:
    """Smallest layer count whose disk mesh has h_max <= h."""
    n = 1
    while disk_tri_mesh(radius, n, mu_grade).h_max > h:
        n += 1
    return n


def graded_y_partition(Y: float, M: int, gamma: float) -> GradedYPartition:
    """Partition of [0, Y] with nodes (m/M)**gamma * Y."""
    if Y <= 0 or M < 1:
        raise ValueError("need Y > 0 and M >= 1")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    nodes = Y * (np.arange(M + 1) / M) ** gamma
    nodes[-1] = Y
    nodes.setflags(write=False)
    return GradedYPartition(float(Y), int(M), float(gamma), nodes)


def cylinder_mesh(base, ypart: GradedYPartition) -> CylinderMesh:
    if not isinstance(base, (IntervalMesh, TriMesh)):
        raise TypeError("base must be an IntervalMesh or TriMesh")
    if not isinstance(ypart, GradedYPartition):
        raise TypeError("ypart must be a GradedYPartition")
    return CylinderMesh(base, ypart)


def dilated_domain_1d(M: float, mu: float, B=(-0.5, 0.5)) -> DilatedDomain:
    """Dilation of the reference interval B (diameter 1, containing 0)."""
    if M <= 0:
        raise ValueError("truncation parameter M must be positive")
    if mu <= 0:
        raise ValueError("mu must be positive")
    lo, hi = B
    if not (lo <= 0 <= hi) or abs((hi - lo) - 1.0) > 1e-12:
        raise ValueError("B must contain 0 and have diameter 1")
    scale = 1.0 + mu * (1.0 + M) if mu >= 1 else 2.0 + M
    return DilatedDomain(float(mu), float(M), (scale * lo, scale * hi), float(scale))


def _exterior_nodes(h0, length, ratio=2.0, cap=np.inf):
    """Distances from the domain edge of a geometric exterior partition.

    Element sizes start at ``h0`` and grow by ``ratio``; the last element
    ends exactly at ``length``.  Returns the positive distances, excluding 0.
    """
    if length <= 0:
        return np.zeros(0)
    sizes = []
    pos, hk = 0.0, h0
    while pos + hk < length * (1 - 1e-12):
        sizes.append(min(hk, cap))
        pos += sizes[-1]
        hk = min(hk * ratio, cap)
    g = length - pos
    if sizes and g < sizes[-1] / ratio:
        # merge the short tail into the previous element, then halve
        last = sizes.pop() + g
        sizes += [last / 2, last / 2]
    else:
        sizes.append(g)
    return np.cumsum(sizes)


def nested_dilated_mesh_1d(omega_mesh: IntervalMesh, dom: DilatedDomain,
                           ratio: float = 2.0, embed=None) -> IntervalMesh:
    """Mesh of ``dom.bounds`` that contains ``omega_mesh`` node for node.

    Outside of Omega the element sizes grow geometrically from the boundary
    element sizes of ``omega_mesh``.  Element sizes never exceed a quarter
    of the dilated diameter.

    Parameters
    ----------
    embed : array_like, optional
        Extra exterior nodes to include, e.g. the nodes of a mesh for a
        smaller dilation so that the two discrete spaces are nested.
    """
    if not (1.0 < ratio <= 2.0):
        raise ValueError("growth ratio must lie in (1, 2]")
    lo, hi = dom.bounds
    x = omega_mesh.nodes
    if x[0] < lo or x[-1] > hi:
        raise ValueError("Omega mesh is not contained in the dilated domain")
    cap = (hi - lo) / 4.0
    h = omega_mesh.sizes
    left = x[0] - _exterior_nodes(h[0], x[0] - lo, ratio, cap)[::-1]
    right = x[-1] + _exterior_nodes(h[-1], hi - x[-1], ratio, cap)
    nodes = np.concatenate([left, x, right])
    if embed is not None:
        e = np.asarray(embed, dtype=float)
        e = e[((e > lo) & (e < x[0])) | ((e > x[-1]) & (e < hi))]
        nodes = np.union1d(nodes, e)
    nodes[0], nodes[-1] = lo, hi
    return IntervalMesh(nodes)


def omega_slice(dilated: IntervalMesh, omega_mesh: IntervalMesh):
    """Index range of the Omega nodes inside a nested dilated mesh."""
    i0 = int(np.searchsorted(dilated.nodes, omega_mesh.nodes[0]))
    sl = slice(i0, i0 + omega_mesh.n_vertices)
    if not np.array_equal(dilated.nodes[sl], omega_mesh.nodes):
        raise ValueError("dilated mesh does not nest the Omega mesh")
    return sl


# auxiliary meshes for the singular kernel assembly --------------------------

@dataclass(frozen=True)
class AuxMesh:
    """Domain mesh extended to a ball of radius R around ``center``.

    Vertices and elements of the domain come first.  ``in_omega`` marks
    the domain elements; ``dof`` maps each vertex to its free index in the
    domain system, or -1.
    """

    mesh: object
    in_omega: np.ndarray
    dof: np.ndarray
    n_free: int
    R: float
    center: np.ndarray


def interval_aux_mesh(mesh: IntervalMesh, R: float, ratio: float = 2.0) -> AuxMesh:
    """Extend an interval mesh by geometric elements up to radius R."""
    x = mesh.nodes
    c = 0.5 * (x[0] + x[-1])
    if c - R >= x[0] or c + R <= x[-1]:
        raise ValueError("auxiliary radius must exceed the domain radius")
    h = mesh.sizes
    left = x[0] - _exterior_nodes(h[0], x[0] - (c - R), ratio)[::-1]
    right = x[-1] + _exterior_nodes(h[-1], (c + R) - x[-1], ratio)
    nodes = np.concatenate([left, x, right])
    nl = left.size
    flags = np.zeros(nodes.size, dtype=bool)
    full = IntervalMesh(nodes, flags)
    in_omega = np.zeros(full.n_elements, dtype=bool)
    in_omega[nl:nl + mesh.n_elements] = True
    dof = -np.ones(nodes.size, dtype=np.int64)
    free = mesh.free
    dof[nl + free] = np.arange(free.size)
    return AuxMesh(full, in_omega, dof, free.size, float(R), np.array([c]))


def disk_aux_mesh(mesh: TriMesh, R: float, ratio: float = 1.5) -> AuxMesh:
    """Extend a polar disk mesh by an annulus of polar layers out to radius R.

    The boundary ring of ``mesh`` must be the set of its flagged vertices
    (all at the same radius, as produced by :func:`disk_tri_mesh`).  Layer
    thickness grows geometrically and ring counts may halve outward.
    """
    V = mesh.vertices
    bidx = np.flatnonzero(mesh.boundary_flags)
    r0 = np.hypot(V[bidx, 0], V[bidx, 1])
    rb = float(r0.mean())
    if R <= rb:
        raise ValueError("auxiliary radius must exceed the domain radius")
    th = np.mod(np.arctan2(V[bidx, 1], V[bidx, 0]), 2 * np.pi)
    order = np.argsort(th)
    ring = bidx[order]
    th = th[order]
    N = ring.size
    # boundary layer thickness of the domain mesh
    inner = ~mesh.boundary_flags
    rin = np.hypot(V[inner, 0], V[inner, 1])
    dr = rb - rin.max() if rin.size else rb / 2
    radii, counts = [rb], [N]
    while radii[-1] < R * (1 - 1e-12):
        dr = dr * ratio
        r = radii[-1] + dr
        if R - r < 0.5 * dr:
            r = R
        radii.append(min(r, R))
        Nn = max(6, int(np.ceil(2 * np.pi * radii[-1] / (1.15 * dr))))
        Nn = max(min(Nn, counts[-1]), (counts[-1] + 1) // 2)
        counts.append(Nn)
    verts = [V]
    rings = [ring]
    angles = [th - th[0]]
    start = V.shape[0]
    for j in range(1, len(radii)):
        a = th[0] + 2 * np.pi * (np.arange(counts[j]) + 0.5 * (j % 2)) / counts[j]
        verts.append(np.stack([radii[j] * np.cos(a), radii[j] * np.sin(a)], 1))
        rings.append(np.arange(start, start + counts[j]))
        angles.append(a - th[0])
        start += counts[j]
    tris = []
    for j in range(len(radii) - 1):
        tris += _zip_rings(rings[j], rings[j + 1], angles[j], angles[j + 1])
    Vall = np.concatenate(verts)
    Taux = np.array(tris, dtype=np.int64)
    neg = signed_areas(Vall, Taux) < 0
    Taux[neg] = Taux[neg][:, [0, 2, 1]]
    T = np.concatenate([mesh.triangles, Taux])
    flags = np.zeros(len(Vall), dtype=bool)
    flags[rings[-1]] = True
    full = TriMesh(Vall, T, flags)
    in_omega = np.zeros(len(T), dtype=bool)
    in_omega[:mesh.n_elements] = True
    dof = -np.ones(len(Vall), dtype=np.int64)
    free = mesh.free
    dof[free] = np.arange(free.size)
    return AuxMesh(full, in_omega, dof, free.size, float(R), np.zeros(2))


def outer_boundary_edges(mesh: TriMesh):
    """Boundary edges of a triangulation, oriented counterclockwise."""
    T = mesh.triangles
    E = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    key = np.sort(E, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return E[counts[inv.ravel()] == 1]


# plain-text serialization ----------------------------------------------------

def write_mesh(path, mesh):
    """Write ``dim npoints nelems``, coordinates, connectivity and flags."""
    V = np.asarray(mesh.vertices, dtype=float).reshape(mesh.n_vertices, -1)
    E = np.asarray(mesh.elements)
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}\n")
        for row in V:
            fh.write(" ".join(repr(float(c)) for c in row) + "\n")
        for row in E:
            fh.write(" ".join(str(int(i)) for i in row) + "\n")
        fh.write(" ".join(str(int(f)) for f in mesh.boundary_flags) + "\n")


def read_mesh(path):
    with open(path) as fh:
        dim, nv, ne = (int(t) for t in fh.readline().split())
        V = np.array([[float(t) for t in fh.readline().split()] for _ in range(nv)])
        E = np.array([[int(t) for t in fh.readline().split()] for _ in range(ne)])
        flags = np.array([int(t) for t in fh.readline().split()], dtype=bool)
    if dim == 1:
        return IntervalMesh(V[:, 0], flags)
    return TriMesh(V, E, flags)
