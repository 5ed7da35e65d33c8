"""Triangulated compact spacelike submanifolds of R^{n,1}.

The central object is :class:`SpacelikeMesh`. Derived geometry (tangent
patches, normal frame, curvature) is computed lazily, once, and then shared
read-only.

Conventions
-----------
* ``nu`` is the past-pointing unit timelike normal (``nu0 < 0``).
* The second fundamental form follows the Gauss formula
  ``Dbar_Y Z = D_Y Z - h(Y, Z)``, so ``h = -(d^2 X)^perp`` in a normal chart.
  On the hyperboloid this gives ``h(Y, Z) = -<Y, Z> X`` and ``H = -n X``.
"""
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
import json
import math

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import (
    DegenerateVertexStar,
    DimensionMismatch,
    InsufficientNeighbors,
    NonSpacelikeSimplex,
    WrongCodimension,
)
from .lorentz import gram_schmidt, lower, mink_inner


def _quadratic_terms(m):
    return [(i, j) for i in range(m) for j in range(i, m)]


def n_fit_unknowns(m):
    return m + m * (m + 1) // 2


def _design_matrix(s):
    """Columns s_i, then s_i s_j (i < j) and s_i^2 / 2, so coefficients are derivatives."""
    m = s.shape[-1]
    cols = [s[..., i] for i in range(m)]
    for i, j in _quadratic_terms(m):
        cols.append(0.5 * s[..., i] ** 2 if i == j else s[..., i] * s[..., j])
    return np.stack(cols, axis=-1)


def _coefficients_to_hessian(coef, m):
    """Split fit coefficients (..., nu, *rest) into gradient (..., m, *rest) and Hessian (..., m, m, *rest)."""
    grad = coef[:, :m]
    hess = np.zeros((coef.shape[0], m, m) + coef.shape[2:])
    for k, (i, j) in enumerate(_quadratic_terms(m)):
        hess[:, i, j] = coef[:, m + k]
        hess[:, j, i] = coef[:, m + k]
    return grad, hess


def _batched_gram_schmidt(T):
    """Lorentzian Gram-Schmidt over rows of a stack (G, m, n+1) of spacelike vectors."""
    out = np.empty_like(T)
    for i in range(T.shape[1]):
        w = T[:, i].copy()
        for j in range(i):
            w -= mink_inner(w, out[:, j])[:, None] * out[:, j]
        q = mink_inner(w, w)
        if np.any(q <= 0):
            raise DegenerateVertexStar("tangent estimate is not spacelike or is rank deficient")
        out[:, i] = w / np.sqrt(q)[:, None]
    return out


@dataclass(frozen=True)
class LocalPatches:
    """Per-vertex weighted quadratic fitting stencils.

    ``tangent[v]`` is a Lorentz-orthonormal basis of the estimated tangent
    space, ``fit[v]`` maps stencil differences ``w[stencil[v]] - w[v]`` to the
    coefficients of ``w`` in the chart ``s = <X - X_v, tangent>``.
    """

    stencil: list
    fit: list
    tangent: np.ndarray
    local_coords: list

    def derivatives(self, values):
        """Gradient (N, m) and Hessian (N, m, m) of a vertex field in the patch charts.

        ``values`` may carry trailing axes (e.g. ambient coordinates).
        """
        values = np.asarray(values, dtype=float)
        m = self.tangent.shape[1]
        N = len(self.stencil)
        coef = np.empty((N, n_fit_unknowns(m)) + values.shape[1:])
        for v in range(N):
            coef[v] = np.tensordot(self.fit[v], values[self.stencil[v]] - values[v], axes=(1, 0))
        return _coefficients_to_hessian(coef, m)


@dataclass(frozen=True)
class NormalFrame:
    """Per-vertex tangent basis, past unit timelike normal, and spacelike normals."""

    tangent: np.ndarray  # (N, m, n+1)
    nu: np.ndarray  # (N, n+1)
    spacelike_normals: np.ndarray  # (N, n-m, n+1)

    def tangent_coords(self, q, v=None):
        """Components <q, e_i> of ambient vectors in the tangent basis."""
        T = self.tangent if v is None else self.tangent[v]
        return np.einsum("...i,...ki->...k", lower(q), T)

    def tangent_part(self, q, v=None):
        T = self.tangent if v is None else self.tangent[v]
        return np.einsum("...k,...ki->...i", self.tangent_coords(q, v), T)

    def normal_part(self, q, v=None):
        return np.asarray(q, dtype=float) - self.tangent_part(q, v)


@dataclass(frozen=True)
class CurvatureData:
    """Second fundamental form in the orthonormal tangent basis, and mean curvature."""

    h: np.ndarray  # (N, m, m, n+1), normal-vector valued
    H: np.ndarray  # (N, n+1)
    H_perp1: np.ndarray
    H_perp2: np.ndarray

    @property
    def H_norm(self):
        """||H|| = sqrt(|<H, H>|)."""
        return np.sqrt(np.abs(mink_inner(self.H, self.H)))


class SpacelikeMesh:
    """Simplicial m-submanifold with boundary in R^{n,1} with Riemannian induced metric.

    Parameters
    ----------
    vertices : array (N, n+1)
    simplices : int array (F, m+1)
    tol : float
        Simplices whose induced Gram matrix has smallest eigenvalue below
        ``tol * (longest edge)^2`` are rejected as not spacelike.
    """

    def __init__(self, vertices, simplices, tol=1e-10):
        vertices = np.array(vertices, dtype=float)
        simplices = np.array(simplices, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] < 2:
            raise DimensionMismatch("vertices must have shape (N, n+1) with n >= 1")
        if simplices.ndim != 2 or simplices.shape[1] < 2:
            raise DimensionMismatch("simplices must have shape (F, m+1) with m >= 1")
        if simplices.min() < 0 or simplices.max() >= len(vertices):
            raise IndexError("simplex refers to a vertex that does not exist")
        if not np.all(np.isfinite(vertices)):
            raise ValueError("vertex coordinates must be finite")
        self.vertices = vertices
        self.simplices = simplices
        self.n = vertices.shape[1] - 1
        self.m = simplices.shape[1] - 1
        if self.m > self.n:
            raise DimensionMismatch(f"intrinsic dimension {self.m} exceeds ambient dimension {self.n}")
        self.tol = tol
        self.vertices.setflags(write=False)
        self.simplices.setflags(write=False)
        self._check_spacelike()
        self._build_boundary()

    # -- construction ---------------------------------------------------

    def _check_spacelike(self):
        G = self.gram
        eig = np.linalg.eigvalsh(G)[:, 0]
        E = self.edge_vectors
        longest = np.max(np.einsum("fki,fki->fk", E, E), axis=1)
        bad = np.flatnonzero(eig <= self.tol * longest)
        if bad.size:
            raise NonSpacelikeSimplex(
                f"{bad.size} simplices are not spacelike (first: {int(bad[0])}, "
                f"smallest eigenvalue {eig[bad[0]]:.3e})"
            )

    def _build_boundary(self):
        m = self.m
        facets = np.concatenate(
            [self.simplices[:, list(c)] for c in combinations(range(m + 1), m)]
        )
        facets = np.sort(facets, axis=1)
        uniq, counts = np.unique(facets, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise ValueError("mesh is not a manifold: a facet is shared by more than two simplices")
        self.boundary_facets = uniq[counts == 1]
        self.boundary_vertices = np.unique(self.boundary_facets)
        mask = np.zeros(len(self.vertices), dtype=bool)
        mask[self.boundary_vertices] = True
        self.is_boundary = mask

    # -- basic measures ---------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @cached_property
    def edge_vectors(self):
        V = self.vertices
        return V[self.simplices[:, 1:]] - V[self.simplices[:, :1]]

    @cached_property
    def gram(self):
        E = self.edge_vectors
        return np.einsum("fki,fli->fkl", lower(E), E)

    @cached_property
    def volumes(self):
        return np.sqrt(np.linalg.det(self.gram)) / math.factorial(self.m)

    @cached_property
    def vertex_areas(self):
        """Lumped (barycentric) vertex measures."""
        a = np.zeros(self.n_vertices)
        np.add.at(a, self.simplices, (self.volumes / (self.m + 1))[:, None])
        return a

    def vertex_average(self, face_values):
        """Simplex-volume-weighted average of per-simplex data at each vertex."""
        face_values = np.asarray(face_values, dtype=float)
        w = self.volumes.reshape((-1,) + (1,) * (face_values.ndim - 1))
        acc = np.zeros((self.n_vertices,) + face_values.shape[1:])
        np.add.at(acc, self.simplices, (face_values * w)[:, None])
        wsum = np.zeros(self.n_vertices)
        np.add.at(wsum, self.simplices, self.volumes[:, None])
        return acc / wsum.reshape((-1,) + (1,) * (face_values.ndim - 1))

    @property
    def area(self):
        return float(self.volumes.sum())

    @cached_property
    def boundary_facet_measures(self):
        F = self.boundary_facets
        if self.m == 1:
            return np.ones(len(F))
        E = self.vertices[F[:, 1:]] - self.vertices[F[:, :1]]
        G = np.einsum("fki,fli->fkl", lower(E), E)
        return np.sqrt(np.abs(np.linalg.det(G))) / math.factorial(self.m - 1)

    @cached_property
    def boundary_vertex_weights(self):
        """Lumped boundary measure per vertex (zero in the interior)."""
        w = np.zeros(self.n_vertices)
        if len(self.boundary_facets):
            np.add.at(w, self.boundary_facets, (self.boundary_facet_measures / self.m)[:, None])
        return w

    @property
    def boundary_measure(self):
        return float(self.boundary_facet_measures.sum())

    def gradient(self, values):
        """Exact piecewise-linear gradient per simplex: ambient tangent vectors (F, n+1) and |grad|^2."""
        values = np.asarray(values, dtype=float)
        d = values[self.simplices[:, 1:]] - values[self.simplices[:, :1]]
        c = np.linalg.solve(self.gram, d[..., None])[..., 0]
        vec = np.einsum("fk,fki->fi", c, self.edge_vectors)
        sq = np.einsum("fk,fk->f", c, d)
        return vec, np.maximum(sq, 0.0)

    @cached_property
    def adjacency(self):
        i, j = [], []
        for a, b in combinations(range(self.m + 1), 2):
            i.append(self.simplices[:, a])
            j.append(self.simplices[:, b])
        i = np.concatenate(i)
        j = np.concatenate(j)
        N = self.n_vertices
        A = sparse.coo_matrix((np.ones(2 * len(i)), (np.r_[i, j], np.r_[j, i])), shape=(N, N))
        A = A.tocsr()
        A.data[:] = 1.0
        return A

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @cached_property
    def diameter(self):
        """Euclidean diameter of the vertex set (bounding-box diagonal for large meshes)."""
        V = self.vertices
        if len(V) <= 3000:
            d = V[:, None, :] - V[None, :, :]
            return float(np.sqrt(np.max(np.einsum("abi,abi->ab", d, d))))
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def mean_edge_length(self):
        A = sparse.triu(self.adjacency).tocoo()
        d = self.vertices[A.row] - self.vertices[A.col]
        return float(np.mean(np.sqrt(np.abs(mink_inner(d, d)))))

    # -- derived geometry --------------------------------------------------

    @cached_property
    def patches(self):
        return build_patches(self)

    @cached_property
    def wide_patches(self):
        """Three-ring charts, used to recover Hessians of computed (noisier) fields."""
        return build_patches(self, rings=3)

    @cached_property
    def frame(self):
        return normal_frame(self)

    @cached_property
    def curvature(self):
        return second_fundamental_form(self, self.frame)

    @cached_property
    def boundary_conormals(self):
        return estimate_conormals(self, self.frame)

    # -- transforms and I/O ------------------------------------------------

    def transformed(self, matrix, translation=None):
        """Image under the affine map X -> matrix @ X + translation."""
        V = self.vertices @ np.asarray(matrix, dtype=float).T
        if translation is not None:
            V = V + np.asarray(translation, dtype=float)
        return SpacelikeMesh(V, self.simplices, tol=self.tol)

    def to_dict(self):
        return {
            "n": int(self.n),
            "m": int(self.m),
            "vertices": self.vertices.tolist(),
            "simplices": self.simplices.tolist(),
        }

    @classmethod
    def from_dict(cls, data, tol=1e-10):
        mesh = cls(data["vertices"], data["simplices"], tol=tol)
        if mesh.n != data.get("n", mesh.n) or mesh.m != data.get("m", mesh.m):
            raise DimensionMismatch("declared n/m do not match the vertex and simplex arrays")
        return mesh

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def __repr__(self):
        return (
            f"SpacelikeMesh(n={self.n}, m={self.m}, vertices={self.n_vertices}, "
            f"simplices={len(self.simplices)}, boundary_vertices={len(self.boundary_vertices)})"
        )


def induced_metric(mesh, simplex):
    """Gram matrix of the edge vectors of one simplex (the pulled-back metric)."""
    V = mesh.vertices
    idx = mesh.simplices[simplex]
    E = V[idx[1:]] - V[idx[0]]
    return np.einsum("ki,li->kl", lower(E), E)


def _stencils(mesh, rings):
    A = mesh.adjacency
    R = A.copy()
    reach = A.copy()
    for _ in range(rings - 1):
        R = R @ A
        reach = reach + R
    reach = reach.tocsr()
    reach.setdiag(0)
    reach.eliminate_zeros()
    return [reach.indices[reach.indptr[v]:reach.indptr[v + 1]] for v in range(mesh.n_vertices)]


def build_patches(mesh, rings=2, iterations=3):
    """Fit weighted local quadratic charts around every vertex.

    The tangent plane starts from a Euclidean SVD of the stencil offsets and
    is refined by re-fitting the embedding and taking the linear coefficients.
    """
    m, n = mesh.m, mesh.n
    nu = n_fit_unknowns(m)
    stencil = _stencils(mesh, rings)
    N = mesh.n_vertices
    fit = [None] * N
    coords = [None] * N
    tangent = np.empty((N, m, n + 1))
    sizes = np.array([len(s) for s in stencil])
    V = mesh.vertices
    for k in np.unique(sizes):
        group = np.flatnonzero(sizes == k)
        if k < nu + 1:
            raise InsufficientNeighbors(
                f"vertex {int(group[0])} has {k} stencil points; the quadratic fit needs {nu + 1}"
            )
        idx = np.stack([stencil[v] for v in group])
        D = V[idx] - V[group][:, None, :]
        _, _, Vt = np.linalg.svd(D, full_matrices=False)
        T = _batched_gram_schmidt(Vt[:, :m, :])
        dist2 = np.einsum("gki,gki->gk", D, D)
        rho2 = np.max(dist2, axis=1, keepdims=True)
        sw = np.sqrt(np.exp(-dist2 / rho2))
        for it in range(iterations + 1):
            s = np.einsum("gki,gli->gkl", lower(D), T)
            A = _design_matrix(s) * sw[..., None]
            U, sv, Wt = np.linalg.svd(A, full_matrices=False)
            if np.any(sv[:, -1] <= 1e-10 * sv[:, 0]):
                bad = group[np.argmax(sv[:, -1] <= 1e-10 * sv[:, 0])]
                raise InsufficientNeighbors(f"stencil of vertex {int(bad)} is degenerate for a quadratic fit")
            P = np.einsum("gji,gj,gkj->gik", Wt, 1.0 / sv, U) * sw[:, None, :]
            if it == iterations:
                break
            C = np.einsum("gak,gki->gai", P, D)
            T = _batched_gram_schmidt(C[:, :m, :])
        tangent[group] = T
        for a, v in enumerate(group):
            fit[v] = P[a]
            coords[v] = s[a]
    tangent.setflags(write=False)
    return LocalPatches(stencil=stencil, fit=fit, tangent=tangent, local_coords=coords)


def _complement_projector(T, nu, q):
    """Project ambient vectors q onto the orthogonal complement of span(T) + span(nu)."""
    w = q - np.einsum("...k,...ki->...i", np.einsum("...i,...ki->...k", lower(q), T), T)
    return w + mink_inner(w, nu)[..., None] * nu


def normal_frame(mesh, patches=None):
    """Past-pointing unit timelike normal and orthonormal spacelike normals per vertex.

    ``nu`` is the normalized normal projection of ``-e0``; among all unit
    timelike normals at a point it has the smallest ``|nu0|``, and it is
    unique when m = n. Spacelike normals are propagated along a breadth-first
    traversal so neighbouring frames stay aligned.
    """
    patches = patches or mesh.patches
    T = patches.tangent
    N, m, dim = T.shape
    n = dim - 1
    e0 = np.zeros(dim)
    e0[0] = -1.0
    c = np.einsum("i,vki->vk", lower(e0), T)
    w = e0 - np.einsum("vk,vki->vi", c, T)
    q = mink_inner(w, w)
    if np.any(q >= 0):
        raise DegenerateVertexStar("normal space contains no timelike direction")
    nu = w / np.sqrt(-q)[:, None]
    k = n - m
    spacelike = np.zeros((N, k, dim))
    if k:
        axes = np.eye(dim)[1:]
        seen = np.zeros(N, dtype=bool)
        for root in range(N):
            if seen[root]:
                continue
            order, parents = csgraph.breadth_first_order(mesh.adjacency, root, directed=False)
            for v in order:
                seen[v] = True
                p = parents[v]
                seeds = axes if p < 0 else np.vstack([spacelike[p], axes])
                proj = _complement_projector(T[v], nu[v], seeds)
                if p < 0:
                    proj = proj[np.argsort(-np.einsum("ai,ai->a", proj, proj), kind="stable")]
                basis = gram_schmidt(proj, tol=1e-10)
                basis = basis[mink_inner(basis, basis) > 0][:k]
                if len(basis) < k:
                    raise DegenerateVertexStar(f"could not complete the normal frame at vertex {int(v)}")
                spacelike[v] = basis
    return NormalFrame(tangent=T, nu=nu, spacelike_normals=spacelike)


def second_fundamental_form(mesh, frame=None, patches=None):
    """Vector-valued h and mean curvature H = tr_g h from the quadratic charts."""
    patches = patches or mesh.patches
    frame = frame or mesh.frame
    _, d2X = patches.derivatives(mesh.vertices)  # (N, m, m, n+1)
    T = frame.tangent
    tang = np.einsum("vabi,vki->vabk", lower(d2X), T)
    normal = d2X - np.einsum("vabk,vki->vabi", tang, T)
    h = -normal
    H = np.einsum("vaai->vi", h)
    nu = frame.nu
    H2 = -mink_inner(H, nu)[:, None] * nu
    H1 = H - H2
    return CurvatureData(h=h, H=H, H_perp1=H1, H_perp2=H2)


def maximal_slope(mesh, frame=None):
    """tau = max |nu0| over vertices (>= 1 for unit timelike nu)."""
    frame = frame or mesh.frame
    return float(max(1.0, np.max(np.abs(frame.nu[:, 0]))))


def is_mean_convex(mesh, curvature=None, tol=1e-6):
    """True iff H vanishes or is past-pointing timelike at every vertex."""
    if mesh.m != mesh.n:
        raise WrongCodimension("mean convexity is defined here for hypersurfaces only")
    curvature = curvature or mesh.curvature
    H = curvature.H
    zero = np.sqrt(np.einsum("vi,vi->v", H, H)) <= tol
    past = (mink_inner(H, H) < -tol) & (H[:, 0] < 0)
    return bool(np.all(zero | past))


def estimate_conormals(mesh, frame=None):
    """Outward unit tangent conormal eta at each boundary vertex, keyed by vertex index.

    The outward direction (away from the centroid of the vertex's other
    neighbours) is projected to the tangent plane with the boundary's own
    tangent directions removed.
    """
    frame = frame or mesh.frame
    V = mesh.vertices
    A = mesh.adjacency
    bfacets_of = {int(v): [] for v in mesh.boundary_vertices}
    for f in mesh.boundary_facets:
        for v in f:
            bfacets_of[int(v)].append(f)
    out = {}
    for v in mesh.boundary_vertices:
        v = int(v)
        nbrs = A.indices[A.indptr[v]:A.indptr[v + 1]]
        inner = nbrs[~mesh.is_boundary[nbrs]]
        ref = inner if len(inner) else nbrs
        o = V[v] - V[ref].mean(axis=0)
        o = frame.tangent_part(o, v)
        along = []
        for f in bfacets_of[v]:
            for w in f:
                if w != v:
                    along.append(frame.tangent_part(V[w] - V[v], v))
        if along:
            B = gram_schmidt(np.array(along), tol=1e-10)
            B = B[mink_inner(B, B) > 0]
            for b in B[: mesh.m - 1]:
                o = o - mink_inner(o, b) * b
        q = mink_inner(o, o)
        if q <= 0:
            raise DegenerateVertexStar(f"cannot orient the conormal at boundary vertex {v}")
        out[v] = o / math.sqrt(q)
    return out


def hessian_identity_check(mesh, w, grad_w, hess_w, interior_only=True):
    """Worst relative deviation between the fitted intrinsic Hessian of w o X and
    the ambient prediction  Dbar^2 w |_T - <h, Dbar w>.

    ``w``, ``grad_w`` and ``hess_w`` are callables on (N, n+1) arrays
    returning values, coordinate partials (N, n+1), and partial Hessians
    (N, n+1, n+1). The deviation at a vertex is normalized by the sum of the
    magnitudes of the two predicted terms.
    """
    frame = mesh.frame
    curv = mesh.curvature
    V = mesh.vertices
    _, fitted = mesh.patches.derivatives(w(V))
    T = frame.tangent
    ambient = np.einsum("vai,vij,vbj->vab", T, hess_w(V), T)
    # <h, Dbar w> with Dbar w = eta^{-1} dw is the Euclidean pairing of h with dw
    curvature_term = np.einsum("vabi,vi->vab", curv.h, grad_w(V))
    predicted = ambient - curvature_term
    err = np.linalg.norm(fitted - predicted, axis=(1, 2))
    scale = np.linalg.norm(ambient, axis=(1, 2)) + np.linalg.norm(curvature_term, axis=(1, 2))
    rel = err / np.maximum(scale, 1e-300)
    if interior_only:
        rel = rel[~mesh.is_boundary]
    return float(np.max(rel))
