"""scikit-learn style wrappers around the solver, verifier and transport map.

``fit`` takes a mesh (object, spec string or ``(vertices, simplices)``) and
a density; fitted state ends with an underscore.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import abp
from .pde import solve_variant
from .validation import check_density, check_mesh, check_points, check_r, check_variant
from .verify import evaluate_inequality


class NeumannSolver(BaseEstimator):
    """Normalize the density and solve the variant's Neumann problem."""

    def __init__(self, variant="thm1.1", rtol=1e-10):
        self.variant = variant
        self.rtol = rtol

    def fit(self, mesh, density=1.0):
        tag = check_variant(self.variant)
        self.mesh_ = check_mesh(mesh)
        f = check_density(density, self.mesh_)
        self.solution_ = solve_variant(tag, self.mesh_, f, rtol=self.rtol)
        self.factor_ = self.solution_.factor
        return self

    def predict(self, vertices=None):
        """u at the given vertex indices (all vertices by default)."""
        check_is_fitted(self, "solution_")
        u = self.solution_.u
        return u if vertices is None else u[np.asarray(vertices)]


class SobolevVerifier(BaseEstimator):
    """Evaluate one inequality; ``score`` is lhs / rhs."""

    def __init__(self, variant="thm1.1"):
        self.variant = variant

    def fit(self, mesh, density=1.0):
        tag = check_variant(self.variant)
        self.mesh_ = check_mesh(mesh)
        self.report_ = evaluate_inequality(tag, self.mesh_, check_density(density, self.mesh_))
        return self

    def score(self, mesh=None, density=None):
        if mesh is not None:
            return SobolevVerifier(self.variant).fit(mesh, 1.0 if density is None else density).report_.ratio
        check_is_fitted(self, "report_")
        return self.report_.ratio


class ABPVolumeEstimator(BaseEstimator):
    """Monte Carlo estimates of r^{-(n+1)} |A_r| for a fitted mesh."""

    def __init__(self, variant="thm1.1", n_samples=100000, seed=0, confidence=0.95):
        self.variant = variant
        self.n_samples = n_samples
        self.seed = seed
        self.confidence = confidence

    def fit(self, mesh, y=None):
        tag = check_variant(self.variant)
        self.mesh_ = check_mesh(mesh)
        self.geometry_ = abp.RegionGeometry(tag, self.mesh_)
        self.tau_ = abp.maximal_slope(self.mesh_)
        self.constant_ = abp.asymptotic_constant(tag, self.mesh_.n, self.tau_)
        return self

    def predict(self, r_values):
        """Array of (estimate, ci_low, ci_high) rows, one per r."""
        check_is_fitted(self, "geometry_")
        rows = []
        for r in np.atleast_1d(r_values):
            est = abp.estimate_volume_A(self.variant, self.mesh_, check_r(r), self.n_samples, seed=self.seed,
                                        confidence=self.confidence, geometry=self.geometry_)
            rows.append(est.scaled(self.mesh_.n + 1))
        return np.array(rows, dtype=float)

    def contains(self, points, r):
        check_is_fitted(self, "geometry_")
        return self.geometry_.contains(check_points(points, self.mesh_.n + 1), check_r(r))


class TransportMap(BaseEstimator):
    """The map (x, y) -> X(x) + r (grad u(x) + y) and its vertex-minimizer inverse.

    ``transform`` takes rows ``[x_index, y_0, ..., y_n]``; ``inverse_transform``
    takes ambient points and returns rows of the same layout.
    """

    def __init__(self, variant="thm1.1", r=10.0):
        self.variant = variant
        self.r = r

    def fit(self, mesh, density=1.0):
        tag = check_variant(self.variant)
        self.mesh_ = check_mesh(mesh)
        self.solution_ = solve_variant(tag, self.mesh_, check_density(density, self.mesh_))
        return self

    def transform(self, coords):
        check_is_fitted(self, "solution_")
        coords = check_points(coords, self.mesh_.n + 2)
        r = check_r(self.r)
        out = [abp.transport_map(self.mesh_, self.solution_, abp.NormalCoordinates(int(c[0]), c[1:]), r)
               for c in coords]
        return np.array(out)

    def inverse_transform(self, points):
        check_is_fitted(self, "solution_")
        points = check_points(points, self.mesh_.n + 1)
        r = check_r(self.r)
        rows = []
        for p in points:
            w = abp.inclusion_check(self.variant, self.mesh_, self.solution_, p, r, raise_on_failure=False)
            rows.append(np.concatenate([[w.x], w.y]))
        return np.array(rows)

    def jacobian(self, coords):
        check_is_fitted(self, "solution_")
        coords = check_points(coords, self.mesh_.n + 2)
        r = check_r(self.r)
        return np.array([abp.jacobian(self.variant, self.mesh_, self.solution_,
                                      abp.NormalCoordinates(int(c[0]), c[1:]), r) for c in coords])
