"""The transport construction: regions Lambda_r(x) and A_r, the sets U and B_r,
the map Phi_r(x, y) = X(x) + r (grad u(x) + y), its Jacobian and determinant
bound, and the blow-down cone constants.

Orientation: for hypersurfaces the slab direction is d = H / ||H|| (or the
past normal nu where H vanishes), and the displayed inequality
``-r <= <p - X, d> <= 0`` is applied literally. With d past-pointing this
places A_r on the past side of the surface, matching the cone vertex
``a = (-tau, ...)`` of the blow-down argument.
"""
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import asdict, dataclass
import json
import math
import os

import numpy as np
from scipy import stats

from .errors import BoundaryMinimizer, NotInBr, WitnessOutsideBr, ZeroSamples
from .lorentz import lower, mink_inner, unit_ball_volume
from .mesh import maximal_slope

H_ZERO = 1e-8
PSD_TOL = 1e-8

# (tangent radius, slab low, slab high, |grad u| bound, fiber low, fiber high), all in units of r
_SHAPES = {
    "thm1.1": (1.0, -1.0, 0.0),
    "thm1.2": (0.5, -0.5, 0.5),
    "thm1.3": (0.5, -0.5, 0.5),
}


def _tag(variant):
    return getattr(variant, "tag", variant)


@dataclass(frozen=True)
class RegionVariant:
    tag: str
    r: float

    def __post_init__(self):
        if self.tag not in _SHAPES:
            raise ValueError(f"unknown variant {self.tag!r}")
        if self.r < 0:
            raise ValueError("r must be nonnegative")


def slab_direction(variant, mesh):
    """Unit timelike direction of the slab constraint at each vertex."""
    frame = mesh.frame
    if _tag(variant) == "thm1.3":
        return frame.nu
    curv = mesh.curvature
    norm = curv.H_norm
    d = frame.nu.copy()
    big = norm >= H_ZERO
    d[big] = curv.H[big] / norm[big, None]
    return d


class RegionGeometry:
    """Precomputed linear functionals describing every Lambda_r(x) of a mesh.

    A point p lies in Lambda_r(x) iff the ``radial`` coordinates of p - X(x)
    have squared length below (rad r)^2 and the ``slab`` coordinate lies in
    [lo r, hi r].
    """

    def __init__(self, variant, mesh):
        self.tag = _tag(variant)
        self.mesh = mesh
        frame = mesh.frame
        X = mesh.vertices
        radial = frame.tangent
        if self.tag == "thm1.3":
            radial = np.concatenate([radial, frame.spacelike_normals], axis=1)
        self.d = slab_direction(self.tag, mesh)
        self.rad, self.lo, self.hi = _SHAPES[self.tag]
        N, k, dim = radial.shape
        self.k = k
        # one matrix product evaluates every functional: columns [radial..., slab] per vertex
        W = np.concatenate([radial, self.d[:, None, :]], axis=1)  # (N, k+1, dim)
        self.W = lower(W).reshape(N * (k + 1), dim).T.copy()
        self.offsets = np.einsum("vai,vi->va", lower(W), X).reshape(-1)
        self.N = N
        order = np.argsort(~mesh.is_boundary, kind="stable")  # boundary vertices reject most points
        self.order = order

    def contains(self, points, r, block=64):
        """Boolean mask of points (M, n+1) lying in every Lambda_r(x)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        alive = np.ones(len(points), dtype=bool)
        if r <= 0:
            return ~alive
        k1 = self.k + 1
        rad2 = (self.rad * r) ** 2
        for start in range(0, self.N, block):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            verts = self.order[start:start + block]
            cols = (verts[:, None] * k1 + np.arange(k1)).ravel()
            Z = points[idx] @ self.W[:, cols] - self.offsets[cols]
            Z = Z.reshape(len(idx), len(verts), k1)
            radial = np.einsum("pvk,pvk->pv", Z[..., :-1], Z[..., :-1])
            slab = Z[..., -1]
            ok = (radial < rad2) & (slab >= self.lo * r) & (slab <= self.hi * r)
            alive[idx] = ok.all(axis=1)
        return alive

    def bounding_box(self, r):
        lo, hi = self.mesh.bbox
        return lo - r, hi + r


def lambda_contains(variant, mesh, x, p, r):
    """Membership of p in the single region Lambda_r(x)."""
    tag = _tag(variant)
    frame = mesh.frame
    q = np.asarray(p, dtype=float) - mesh.vertices[x]
    radial = float(np.sum(frame.tangent_coords(q, x) ** 2))
    if tag == "thm1.3":
        radial += float(np.sum(np.einsum("i,ki->k", lower(q), frame.spacelike_normals[x]) ** 2))
    d = slab_direction(tag, mesh)[x]
    rad, lo, hi = _SHAPES[tag]
    s = float(mink_inner(q, d))
    return radial < (rad * r) ** 2 and lo * r <= s <= hi * r


def region_A_contains(variant, mesh, p, r, geometry=None):
    """Membership of p (or an array of points) in A_r = intersection of all Lambda_r(x)."""
    geometry = geometry or RegionGeometry(variant, mesh)
    p = np.asarray(p, dtype=float)
    mask = geometry.contains(p, r)
    return bool(mask[0]) if p.ndim == 1 else mask


@dataclass
class VolumeEstimate:
    r: float
    estimate: float
    ci_low: float
    ci_high: float
    hits: int
    samples: int
    seed: int
    box_volume: float
    confidence: float

    def scaled(self, power):
        """Estimate and interval divided by r^power."""
        s = self.r**power if self.r > 0 else 1.0
        return self.estimate / s, self.ci_low / s, self.ci_high / s


def thread_count():
    """Worker thread cap from MINKSOB_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("MINKSOB_THREADS", "1")))
    except ValueError:
        return 1


CHUNK = 8192


def estimate_volume_A(variant, mesh, r, n_samples, seed=0, confidence=0.95, geometry=None):
    """Monte Carlo estimate of |A_r| over the mesh bounding box inflated by r.

    Sampling is split into fixed-size chunks, each with its own generator
    seeded by (seed, chunk index), so results do not depend on the number of
    worker threads. The interval is a Wilson binomial interval.
    """
    if n_samples <= 0:
        raise ZeroSamples("need at least one sample")
    if r <= 0:
        return VolumeEstimate(r, 0.0, 0.0, 0.0, 0, n_samples, seed, 0.0, confidence)
    geometry = geometry or RegionGeometry(variant, mesh)
    lo, hi = geometry.bounding_box(r)
    box = float(np.prod(hi - lo))
    sizes = [CHUNK] * (n_samples // CHUNK)
    if n_samples % CHUNK:
        sizes.append(n_samples % CHUNK)

    def run(i):
        rng = np.random.default_rng([seed, i])
        pts = lo + (hi - lo) * rng.random((sizes[i], len(lo)))
        return int(geometry.contains(pts, r).sum())

    threads = thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            hits = sum(pool.map(run, range(len(sizes))))
    else:
        hits = sum(run(i) for i in range(len(sizes)))
    ci = stats.binomtest(hits, n_samples).proportion_ci(confidence_level=confidence, method="wilson")
    return VolumeEstimate(
        r=r, estimate=box * hits / n_samples, ci_low=float(box * ci.low), ci_high=float(box * ci.high), hits=hits,
        samples=n_samples, seed=seed, box_volume=box, confidence=confidence,
    )


def sample_A(variant, mesh, r, count, seed=0, max_draws=None, geometry=None):
    """Rejection-sample ``count`` points of A_r (fewer if the draw budget runs out)."""
    geometry = geometry or RegionGeometry(variant, mesh)
    lo, hi = geometry.bounding_box(r)
    rng = np.random.default_rng(seed)
    out = []
    have = 0
    draws = 0
    max_draws = max_draws or 1000 * count
    while have < count and draws < max_draws:
        pts = lo + (hi - lo) * rng.random((CHUNK, len(lo)))
        draws += CHUNK
        good = pts[geometry.contains(pts, r)]
        out.append(good)
        have += len(good)
    pts = np.concatenate(out) if out else np.empty((0, len(lo)))
    return pts[:count]


# -- blow-down constants ------------------------------------------------------


def _check_tau(tau):
    if not tau >= 1:
        raise ValueError(f"maximal slope must satisfy tau >= 1, got {tau}")


def asymptotic_constant(variant, n, tau):
    """Lower bound for liminf r^{-(n+1)} |A_r|."""
    _check_tau(tau)
    tag = _tag(variant)
    w = unit_ball_volume(n)
    lift = tau + math.sqrt(tau * tau - 1)
    base = w / ((n + 1) * tau * lift**n)
    if tag == "thm1.1":
        return base
    if tag in ("thm1.2", "thm1.3"):
        return base / 2**n
    raise ValueError(f"unknown variant {tag!r}")


@dataclass(frozen=True)
class ConeGeometry:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    volume: float


def cone_vertices(variant, tau, n=2):
    """Vertices a, b, c of the blow-down double cone in the x0-x1 plane, and its volume.

    The double cone is the body of revolution (about the x0 axis) of the
    kite with vertices 0, c, b and the mirror image of c; its base is the
    n-ball of radius c1 and its total height is |b0|.
    """
    _check_tau(tau)
    tag = _tag(variant)
    root = math.sqrt(tau * tau - 1)
    scale = 1.0 if tag == "thm1.1" else 0.5
    a = np.zeros(n + 1)
    b = np.zeros(n + 1)
    c = np.zeros(n + 1)
    a[:2] = -tau, -root
    b[0] = -1.0 / tau
    c[:2] = -tau + root, tau - root
    a, b, c = scale * a, scale * b, scale * c
    radius = c[1]
    height = -b[0]
    volume = unit_ball_volume(n) * radius**n * height / (n + 1)
    if tag != "thm1.1":
        volume *= 2
    return ConeGeometry(a=a, b=b, c=c, volume=volume)


# -- transport map --------------------------------------------------------------


@dataclass(frozen=True)
class NormalCoordinates:
    """A base vertex x and a normal vector y (ambient coordinates)."""

    x: int
    y: np.ndarray

    @classmethod
    def from_components(cls, mesh, x, t, y1=None):
        """y = t nu(x) + sum_a y1_a e_a(x) in the vertex normal frame."""
        frame = mesh.frame
        y = t * frame.nu[x]
        if y1 is not None and len(y1):
            y = y + np.einsum("a,ai->i", np.asarray(y1, dtype=float), frame.spacelike_normals[x])
        return cls(int(x), y)


def transport_map(mesh, solution, coords, r):
    """Phi_r(x, y) = X(x) + r (grad u(x) + y)."""
    x = coords.x
    return mesh.vertices[x] + r * (solution.grad_u_vertex[x] + coords.y)


def _fiber_values(tag, mesh, solution, x, y):
    """Quantities constrained by U: |grad u|^2, |y^{perp,1}|^2 and the slab coordinate."""
    frame = mesh.frame
    g = solution.grad_u_vertex[x]
    grad2 = float(mink_inner(g, g))
    if tag == "thm1.3":
        y1 = np.einsum("i,ki->k", lower(y), frame.spacelike_normals[x])
        return grad2, float(np.dot(y1, y1)), float(mink_inner(y, frame.nu[x]))
    d = slab_direction(tag, mesh)[x]
    return grad2, 0.0, float(mink_inner(y, d))


def in_U(variant, mesh, solution, coords, slack=0.0):
    tag = _tag(variant)
    x = coords.x
    if mesh.is_boundary[x]:
        return False
    grad2, y12, s = _fiber_values(tag, mesh, solution, x, coords.y)
    rad, lo, hi = _SHAPES[tag]
    return (
        math.sqrt(grad2 + y12) < rad + slack
        and lo - slack <= s <= hi + slack
    )


def transported_matrix(mesh, solution, coords, r):
    """r hess u + r <h, y> + g in the orthonormal tangent basis (g = identity)."""
    x = coords.x
    hy = np.einsum("abi,i->ab", lower(mesh.curvature.h[x]), coords.y)
    return r * solution.hess_u[x] + r * hy + np.eye(mesh.m)


def in_B_r(variant, mesh, solution, coords, r, slack=0.0, tol=PSD_TOL):
    """(x, y) in U and r hess u + r <h, y> + g positive semidefinite."""
    if not in_U(variant, mesh, solution, coords, slack=slack):
        return False
    M = transported_matrix(mesh, solution, coords, r)
    return bool(np.linalg.eigvalsh(M)[0] >= -tol * np.max(np.abs(M)))


def jacobian(variant, mesh, solution, coords, r):
    """Invariant Jacobian r^{n+1} det(hess u + <y, h> + I / r).

    The normal directions contribute a factor r each, so the power is the
    ambient n + 1 in every codimension.
    """
    M = transported_matrix(mesh, solution, coords, r) / r
    return r ** (mesh.n + 1) * float(np.linalg.det(M))


@dataclass
class DetBound:
    lhs: float
    rhs: float
    ok: bool
    tol_discrete: float
    amgm: float
    defect: float


def pde_residual(mesh, solution):
    """Pointwise strong residual f lap u + <grad f, grad u> - g at vertices."""
    f = solution.density
    lap = np.trace(solution.hess_u, axis1=1, axis2=2)
    cross = mink_inner(f.vertex_gradient, solution.grad_u_vertex)
    return f.values * lap + cross - solution.source


def det_bound_check(variant, mesh, solution, coords, r, residual=None):
    """Compare det(hess u + <y, h> + I/r) with (f^{1/(m-1)} + 1/r)^m at a point of B_r.

    The bound combines AM-GM with the pointwise PDE. The discrete PDE only
    holds weakly, so the strong residual at the vertex is turned into an
    allowance ``tol_discrete`` on the right-hand side.
    """
    if not in_B_r(variant, mesh, solution, coords, r):
        raise NotInBr(f"(x={coords.x}, y) is not in B_r")
    m = mesh.m
    x = coords.x
    M = transported_matrix(mesh, solution, coords, r) / r
    lhs = float(np.linalg.det(M))
    amgm = (np.trace(M) / m) ** m
    f = solution.density.values[x]
    root = f ** (1.0 / (m - 1))
    rhs = (root + 1.0 / r) ** m
    if residual is None:
        residual = pde_residual(mesh, solution)
    res = max(float(residual[x]), 0.0)
    tol = ((root + res / (m * f) + 1.0 / r) / (root + 1.0 / r)) ** m - 1.0
    return DetBound(
        lhs=lhs, rhs=rhs, ok=lhs <= rhs * (1 + tol) * (1 + 1e-12), tol_discrete=tol, amgm=float(amgm),
        defect=lhs / rhs - 1.0,
    )


def sample_B_r(variant, mesh, solution, r, count, seed=0, max_draws=None):
    """Draw (x, y) uniformly over interior vertices and the U fiber, keeping points of B_r."""
    tag = _tag(variant)
    rng = np.random.default_rng(seed)
    interior = np.flatnonzero(~mesh.is_boundary)
    rad, lo, hi = _SHAPES[tag]
    k = mesh.n - mesh.m
    d = slab_direction(tag, mesh)
    out = []
    draws = 0
    max_draws = max_draws or 100 * count
    while len(out) < count and draws < max_draws:
        draws += 1
        x = int(rng.choice(interior))
        s = rng.uniform(lo, hi)
        if tag == "thm1.3":
            z = rng.normal(size=k)
            z *= rad * rng.random() ** (1.0 / k) / np.linalg.norm(z)
            coords = NormalCoordinates.from_components(mesh, x, -s, z)
        else:
            # y = -s d gives <y, d> = s
            coords = NormalCoordinates(x, -s * d[x])
        if in_B_r(tag, mesh, solution, coords, r):
            out.append(coords)
    return out


# -- inclusion Phi_r(B_r) >= A_r ------------------------------------------------


@dataclass
class Witness:
    x: int
    y: np.ndarray
    p: np.ndarray
    r: float
    transport_error: float
    stationarity_defect: float
    in_B_r: bool
    boundary: bool

    def to_dict(self):
        out = asdict(self)
        out["y"] = self.y.tolist()
        out["p"] = self.p.tolist()
        return out


def inclusion_check(variant, mesh, solution, p, r, raise_on_failure=True):
    """Find a preimage of p in B_r by minimizing F(x) = r u(x) + 1/2 <p - X, p - X>.

    The minimum is taken over vertices. An interior minimizer x gives
    y = (p - X(x))^perp / r; the transport error is |Phi_r(x, y) - p|_E / r,
    which equals the discrete stationarity defect |r grad u - (p - X)^T|_E / r.
    Membership in B_r is tested with the U bounds relaxed by that defect.
    """
    tag = _tag(variant)
    p = np.asarray(p, dtype=float)
    Q = p - mesh.vertices
    F = r * solution.u + 0.5 * mink_inner(Q, Q)
    x = int(np.argmin(F))
    frame = mesh.frame
    q = Q[x]
    y = frame.normal_part(q, x) / r
    coords = NormalCoordinates(x, y)
    miss = transport_map(mesh, solution, coords, r) - p
    err = float(np.linalg.norm(miss)) / r
    stationarity = r * solution.grad_u_vertex[x] - frame.tangent_part(q, x)
    defect = float(np.linalg.norm(stationarity)) / r
    boundary = bool(mesh.is_boundary[x])
    inside = (not boundary) and in_B_r(tag, mesh, solution, coords, r, slack=defect)
    w = Witness(x=x, y=y, p=p, r=r, transport_error=err, stationarity_defect=defect, in_B_r=inside,
                boundary=boundary)
    if raise_on_failure:
        if boundary:
            raise BoundaryMinimizer(f"minimizer of F lies on the boundary (vertex {x})", w.to_dict())
        if not inside:
            raise WitnessOutsideBr(f"witness at vertex {x} is outside B_r", w.to_dict())
    return w


def transport_bound(variant, mesh, solution, r):
    """Right side of |A_r| / r^{n+1} <= int (f^{1/(m-1)} + 1/r)^m."""
    from .pde import simplex_quadrature

    m = mesh.m
    f = solution.density.values
    return simplex_quadrature(mesh, f, lambda v: (v ** (1.0 / (m - 1)) + 1.0 / r) ** m)


VOLUME_CSV_COLUMNS = (
    "r", "estimate", "ci_low", "ci_high", "samples", "seed", "scaled_estimate", "scaled_ci_low",
    "scaled_ci_high", "c_tilde",
)


def write_volume_csv(fh, estimates, power, c_tilde):
    """One row per VolumeEstimate plus a closing row holding the asymptotic constant."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(VOLUME_CSV_COLUMNS)
    for est in estimates:
        scaled = est.scaled(power)
        writer.writerow([repr(float(v)) for v in (est.r, est.estimate, est.ci_low, est.ci_high)]
                        + [est.samples, est.seed] + [repr(float(v)) for v in (*scaled, c_tilde)])
    writer.writerow(["inf", "", "", "", "", "", repr(float(c_tilde)), "", "", repr(float(c_tilde))])


def dump_witnesses(path, witnesses):
    """Write witness reports (Witness objects or failure-report dicts) as JSON."""
    rows = [w.to_dict() if isinstance(w, Witness) else w for w in witnesses]
    with open(path, "w") as fh:
        json.dump(rows, fh, sort_keys=True, indent=2)
