"""Weighted Neumann problems  div(f grad u) = g,  <grad u, eta> = 1  on a spacelike mesh.

Three source variants are supported (``thm1.1``, ``thm1.2``, ``thm1.3``),
differing in the curvature/gradient term S subtracted from ``m f^{m/(m-1)}``.
Discretization: conforming P1 elements, mass-lumped loads, and
Jacobi-preconditioned conjugate gradients on the singular consistent system.
"""
from dataclasses import dataclass, field
from functools import cached_property
import json
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import (
    DegenerateDensity,
    EmptyBoundary,
    IncompatibleSystem,
    MeanConvexityViolated,
    NonpositiveDensity,
    SolverDiverged,
    WrongCodimension,
)
from .lorentz import mink_inner
from .mesh import is_mean_convex

VARIANTS = ("thm1.1", "thm1.2", "thm1.3")


@dataclass(frozen=True)
class PdeVariant:
    tag: str
    m: int
    n: int

    def __post_init__(self):
        if self.tag not in VARIANTS:
            raise ValueError(f"unknown variant {self.tag!r}; expected one of {VARIANTS}")
        if self.m < 2:
            raise WrongCodimension("the inequalities need intrinsic dimension m >= 2")
        if self.tag in ("thm1.1", "thm1.2") and self.m != self.n:
            raise WrongCodimension(f"{self.tag} is stated for hypersurfaces (m = n)")
        if self.tag == "thm1.3" and not self.m < self.n:
            raise WrongCodimension("thm1.3 needs higher codimension (m < n)")

    @classmethod
    def for_mesh(cls, tag, mesh):
        return cls(tag, mesh.m, mesh.n)


class DensityField:
    """Positive vertex field f with its piecewise-linear gradient.

    ``power_integral(exact=False)`` uses the lumped vertex weights of the FE
    load vector (so the normalization makes the discrete system exactly
    compatible); ``exact=True`` integrates the P1 interpolant per simplex.
    """

    def __init__(self, mesh, values, spec=None):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_vertices,):
            raise ValueError(f"density needs one value per vertex ({mesh.n_vertices}), got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise NonpositiveDensity("density values must be finite and strictly positive")
        self.mesh = mesh
        self.values = values
        self.spec = spec

    def scaled(self, factor):
        return DensityField(self.mesh, factor * self.values, spec=self.spec)

    @cached_property
    def _face_gradient(self):
        return self.mesh.gradient(self.values)

    @property
    def gradient(self):
        """Per-simplex ambient gradient vectors (F, n+1)."""
        return self._face_gradient[0]

    @property
    def face_grad_norm(self):
        return np.sqrt(self._face_gradient[1])

    @cached_property
    def vertex_grad_norm(self):
        """|grad f| at vertices by simplex-volume-weighted averaging."""
        return self.mesh.vertex_average(self.face_grad_norm)

    @cached_property
    def vertex_gradient(self):
        """Averaged gradient vectors projected to the vertex tangent planes."""
        return self.mesh.frame.tangent_part(self.mesh.vertex_average(self.gradient))

    def power_integral(self, exact=True):
        """Integral of f^{m/(m-1)}."""
        p = self.mesh.m / (self.mesh.m - 1)
        if not exact:
            return float(np.dot(self.mesh.vertex_areas, self.values**p))
        return simplex_quadrature(self.mesh, self.values, lambda f: f**p)

    def boundary_integral(self):
        """Integral of f over the boundary (trapezoid rule, exact for P1 on each facet)."""
        return float(np.dot(self.mesh.boundary_vertex_weights, self.values))


def simplex_quadrature(mesh, values, func):
    """Integrate func(interpolant) with a rule exact for quadratics on triangles.

    Triangles use the edge-midpoint rule; other simplices fall back to the
    vertex rule.
    """
    vals = values[mesh.simplices]
    if mesh.m == 2:
        mids = 0.5 * (vals[:, [0, 1, 2]] + vals[:, [1, 2, 0]])
        return float(np.dot(mesh.volumes, func(mids).mean(axis=1)))
    return float(np.dot(mesh.volumes, func(vals).mean(axis=1)))


def curvature_weight(variant, curvature):
    """Per-vertex c such that S = sqrt(|grad f|^2 + f^2 c^2)."""
    if variant.tag == "thm1.1":
        return None
    if variant.tag == "thm1.2":
        return curvature.H_norm
    H1, H2 = curvature.H_perp1, curvature.H_perp2
    c2 = mink_inner(H1, H1) + np.abs(mink_inner(H2, H2))
    return np.sqrt(np.maximum(c2, 0.0))


def source_s_vertex(variant, density, curvature=None):
    """The subtracted term S(x) at vertices."""
    grad = density.vertex_grad_norm
    c = curvature_weight(variant, curvature) if variant.tag != "thm1.1" else None
    if c is None:
        return grad
    return np.sqrt(grad**2 + (density.values * c) ** 2)


def source_term(variant, mesh, curvature, density):
    """g = m f^{m/(m-1)} - S at every vertex.

    For ``thm1.1`` the mean convexity hypothesis is enforced.
    """
    if isinstance(variant, str):
        variant = PdeVariant.for_mesh(variant, mesh)
    if curvature is None and variant.tag != "thm1.1":
        curvature = mesh.curvature
    if variant.tag == "thm1.1" and not is_mean_convex(mesh, curvature or mesh.curvature):
        raise MeanConvexityViolated("thm1.1 requires H to be zero or past-pointing timelike everywhere")
    m = variant.m
    f = density.values
    return m * f ** (m / (m - 1)) - source_s_vertex(variant, density, curvature)


@dataclass(frozen=True)
class Normalization:
    density: DensityField
    factor: float


def normalize_density(variant, mesh, density, curvature=None):
    """Scale f so that the lumped source integrates to the boundary flux.

    With lumped quadrature the discrete compatibility condition
    ``sum(load) = 0`` then holds up to round-off.
    """
    if isinstance(variant, str):
        variant = PdeVariant.for_mesh(variant, mesh)
    if len(mesh.boundary_facets) == 0:
        raise EmptyBoundary("the Neumann normalization needs a nonempty boundary")
    if curvature is None and variant.tag != "thm1.1":
        curvature = mesh.curvature
    m = variant.m
    A = mesh.vertex_areas
    boundary = density.boundary_integral()
    s_int = float(np.dot(A, source_s_vertex(variant, density, curvature)))
    power = density.power_integral(exact=False)
    top = boundary + s_int
    if top <= 0 or power <= 0:
        raise DegenerateDensity("boundary integral plus source integral vanishes")
    factor = (top / (m * power)) ** (m - 1)
    return Normalization(density.scaled(factor), factor)


def stiffness_matrix(mesh, weight=None):
    """P1 stiffness matrix of  int weight <grad u, grad phi>  (weight per simplex)."""
    m = mesh.m
    Ginv = np.linalg.inv(mesh.gram)
    D = np.hstack([-np.ones((m, 1)), np.eye(m)])  # barycentric derivatives
    K = np.einsum("ka,fkl,lb->fab", D, Ginv, D) * mesh.volumes[:, None, None]
    if weight is not None:
        K = K * weight[:, None, None]
    S = mesh.simplices
    rows = np.repeat(S, m + 1, axis=1).ravel()
    cols = np.tile(S, (1, m + 1)).ravel()
    N = mesh.n_vertices
    return sparse.csr_matrix((K.ravel(), (rows, cols)), shape=(N, N))


@dataclass
class NeumannSolution:
    u: np.ndarray
    grad_u: np.ndarray  # per simplex, ambient tangent vectors
    residual_norm: float
    compat_defect: float
    iterations: int
    factor: float = 1.0
    density: DensityField = None
    variant: PdeVariant = None
    source: np.ndarray = None
    _mesh: object = field(default=None, repr=False)

    @cached_property
    def grad_u_vertex(self):
        """Vertex gradients: simplex-volume-weighted average, projected to the tangent plane."""
        mesh = self._mesh
        return mesh.frame.tangent_part(mesh.vertex_average(self.grad_u))

    @cached_property
    def hess_u(self):
        return hessian_of_u(self._mesh, self)

    def to_dict(self):
        return {
            "u": self.u.tolist(),
            "residual_norm": float(self.residual_norm),
            "lambda": float(self.factor),
            "compat_defect": float(self.compat_defect),
            "iterations": int(self.iterations),
            "variant": None if self.variant is None else self.variant.tag,
        }

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def _load_vector(mesh, density, source):
    return -source * mesh.vertex_areas + density.values * mesh.boundary_vertex_weights


def solve_neumann(variant, mesh, density, source=None, curvature=None, rtol=1e-10, compat_tol=1e-8,
                  maxiter=None, factor=1.0):
    """Solve the weak problem  int f <grad u, grad phi> = -int g phi + int_bdry f phi.

    ``source`` overrides g (e.g. for manufactured solutions); by default g is
    the variant's source term for ``density``. The density must already be
    normalized: a load whose sum exceeds ``compat_tol * ||load||_1`` is
    rejected. The solution is returned in the zero-mean gauge.
    """
    if isinstance(variant, str):
        variant = PdeVariant.for_mesh(variant, mesh)
    if source is None:
        source = source_term(variant, mesh, curvature, density)
    source = np.broadcast_to(np.asarray(source, dtype=float), (mesh.n_vertices,))
    b = _load_vector(mesh, density, source)
    l1 = float(np.abs(b).sum())
    defect = abs(float(b.sum())) / l1 if l1 > 0 else 0.0
    if compat_tol is not None and defect > compat_tol:
        raise IncompatibleSystem(f"load does not integrate to zero (relative defect {defect:.3e})")
    f_face = density.values[mesh.simplices].mean(axis=1)
    K = stiffness_matrix(mesh, f_face)
    N = mesh.n_vertices
    b = b - b.sum() / N
    diag = K.diagonal()
    M = spla.LinearOperator((N, N), matvec=lambda x: x / diag, dtype=float)
    if maxiter is None:
        maxiter = int(50 * math.sqrt(N) + 1000)
    count = [0]

    def _tick(_):
        count[0] += 1

    u, info = spla.cg(K, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=_tick)
    if info > 0:
        raise SolverDiverged(f"conjugate gradients stopped after {info} iterations without converging")
    if info < 0:
        raise SolverDiverged("conjugate gradients broke down")
    A = mesh.vertex_areas
    u = u - np.dot(A, u) / A.sum()
    bnorm = np.linalg.norm(b)
    res = float(np.linalg.norm(K @ u - b) / bnorm) if bnorm > 0 else 0.0
    grad, _ = mesh.gradient(u)
    return NeumannSolution(
        u=u, grad_u=grad, residual_norm=res, compat_defect=defect, iterations=count[0], factor=factor,
        density=density, variant=variant, source=np.array(source), _mesh=mesh,
    )


def solve_variant(variant, mesh, density, curvature=None, **kwargs):
    """Normalize ``density`` for ``variant`` and solve the Neumann problem."""
    if isinstance(variant, str):
        variant = PdeVariant.for_mesh(variant, mesh)
    norm = normalize_density(variant, mesh, density, curvature)
    return solve_neumann(variant, mesh, norm.density, curvature=curvature, factor=norm.factor, **kwargs)


def hessian_of_u(mesh, solution):
    """Intrinsic Hessian of u per vertex (orthonormal tangent basis), by quadratic fit."""
    u = solution.u if hasattr(solution, "u") else np.asarray(solution, dtype=float)
    _, hess = mesh.wide_patches.derivatives(u)
    return 0.5 * (hess + np.swapaxes(hess, 1, 2))
