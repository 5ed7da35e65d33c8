"""Evaluation of the three Sobolev inequalities, their constants, and a
seeded falsification fuzzer."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
import json
import math

import numpy as np

from .abp import asymptotic_constant, thread_count
from .errors import HypothesisViolation, MeanConvexityViolated
from .lorentz import unit_ball_volume
from .mesh import is_mean_convex, maximal_slope
from .pde import PdeVariant, curvature_weight, simplex_quadrature

IDENTITY_RTOL = 1e-12


def margin(h):
    """Discretization allowance used when judging a computed ratio."""
    return 10.0 * h


def _check_dims(tag, n, m):
    PdeVariant(tag, m, n)


def constant_C(variant, n, m=None, tau=1.0):
    """The explicit constant of each inequality.

    The closed form is cross-checked against m * asymptotic_constant^{1/m}.
    """
    tag = getattr(variant, "tag", variant)
    m = n if m is None else m
    _check_dims(tag, n, m)
    if not tau >= 1:
        raise ValueError(f"maximal slope must satisfy tau >= 1, got {tau}")
    w = unit_ball_volume(n)
    lift = tau + math.sqrt(tau * tau - 1)
    if tag == "thm1.1":
        C = n * w ** (1 / n) * (n + 1) ** (-1 / n) * tau ** (-1 / n) / lift
    elif tag == "thm1.2":
        C = 0.5 * n * w ** (1 / n) * (n + 1) ** (-1 / n) * tau ** (-1 / n) / lift
    else:
        C = m * 2 ** (-n / m) * (n + 1) ** (-1 / m) * w ** (1 / m) * tau ** (-1 / m) * lift ** (-n / m)
    via_volume = m * asymptotic_constant(tag, n, tau) ** (1 / m)
    if abs(C - via_volume) > IDENTITY_RTOL * C:
        raise ArithmeticError(f"constant identity failed: {C!r} vs {via_volume!r}")
    return C


@dataclass
class VerificationReport:
    variant: str
    n: int
    m: int
    tau: float
    lhs: float
    rhs: float
    ratio: float
    constant: float
    mesh_spec: str = None
    density_spec: str = None
    resolution: float = None
    seed: int = None
    margins: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.ratio >= 1.0 - self.margins.get("ratio", 0.0)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def gradient_term(variant, mesh, density, curvature=None):
    """Integral of S over the mesh with face-exact gradients.

    For the curvature variants the vertex weight c is interpolated linearly
    and S = sqrt(|grad f|^2 + f^2 c^2) is integrated with the edge-midpoint
    rule on triangles.
    """
    grad = density.face_grad_norm
    if variant.tag == "thm1.1":
        return float(np.dot(mesh.volumes, grad))
    c = curvature_weight(variant, curvature or mesh.curvature)
    fc = density.values * c
    F = fc[mesh.simplices]
    if mesh.m == 2:
        F = 0.5 * (F[:, [0, 1, 2]] + F[:, [1, 2, 0]])
    S = np.sqrt(grad[:, None] ** 2 + F**2).mean(axis=1)
    return float(np.dot(mesh.volumes, S))


def _parts(variant, mesh, density, curvature):
    m = variant.m
    grad_term = gradient_term(variant, mesh, density, curvature)
    boundary = density.boundary_integral()
    power = simplex_quadrature(mesh, density.values, lambda f: f ** (m / (m - 1)))
    return grad_term, boundary, power


def evaluate_inequality(variant, mesh, density, curvature=None, frame=None, mesh_spec=None, seed=None,
                        resolution=None):
    """Both sides of the inequality for ``density`` on ``mesh``."""
    if isinstance(variant, str):
        variant = PdeVariant.for_mesh(variant, mesh)
    curvature = curvature or mesh.curvature
    if variant.tag == "thm1.1" and not is_mean_convex(mesh, curvature):
        raise MeanConvexityViolated("thm1.1 requires H to be zero or past-pointing timelike everywhere")
    tau = maximal_slope(mesh, frame)
    n, m = variant.n, variant.m
    C = constant_C(variant.tag, n, m, tau)
    grad_term, boundary, power = _parts(variant, mesh, density, curvature)
    lhs = grad_term + boundary
    rhs = C * power ** ((m - 1) / m)
    h = resolution if resolution is not None else mesh.mean_edge_length
    return VerificationReport(
        variant=variant.tag, n=n, m=m, tau=tau, lhs=lhs, rhs=rhs, ratio=lhs / rhs, constant=C,
        mesh_spec=None if mesh_spec is None else str(mesh_spec),
        density_spec=None if density.spec is None else str(density.spec), resolution=float(h), seed=seed,
        margins={"ratio": margin(h)},
    )


def normalization_identity_check(variant, mesh, density, curvature=None):
    """Relative gap |int_bdry f + int S - m int f^{m/(m-1)}| / (m int f^{m/(m-1)})."""
    if isinstance(variant, str):
        variant = PdeVariant.for_mesh(variant, mesh)
    grad_term, boundary, power = _parts(variant, mesh, density, curvature)
    m = variant.m
    return abs(boundary + grad_term - m * power) / (m * power)


# -- fuzzing -----------------------------------------------------------------------


def _random_density(rng):
    kind = rng.choice(["constant", "radial_bump", "random_trig"])
    if kind == "constant":
        return f"constant:c={rng.uniform(0.1, 10.0):.6g}"
    if kind == "radial_bump":
        cx, cy = rng.uniform(-0.5, 0.5, size=2)
        return (f"radial_bump:cx={cx:.6g},cy={cy:.6g},w={rng.uniform(0.2, 1.0):.6g},"
                f"floor={rng.uniform(0.01, 0.5):.6g}")
    return (f"random_trig:seed={int(rng.integers(0, 2**31))},floor={rng.uniform(0.01, 0.5):.6g},"
            f"amp={rng.uniform(0.1, 3.0):.6g},terms={int(rng.integers(1, 5))}")


def random_case(tag, rng):
    """A (surface, density) spec pair satisfying the variant's hypotheses."""
    if tag == "thm1.1":
        kind = rng.choice(["flat_disk", "hyperboloid_cap", "tilted_disk"])
    elif tag == "thm1.2":
        kind = rng.choice(["flat_disk", "hyperboloid_cap", "tilted_disk", "spacelike_graph", "random_graph"])
    else:
        kind = rng.choice(["codim_disk", "cylinder", "random_graph"])
    if kind == "flat_disk":
        surface = f"flat_disk:R={rng.uniform(0.5, 1.5):.6g}"
    elif kind == "hyperboloid_cap":
        surface = f"hyperboloid_cap:d={rng.uniform(0.3, 1.5):.6g},a={rng.uniform(0.5, 1.5):.6g}"
    elif kind == "tilted_disk":
        surface = f"tilted_disk:k={rng.uniform(-0.8, 0.8):.6g}"
    elif kind == "spacelike_graph":
        eps = rng.uniform(0.0, 0.3)
        surface = f"spacelike_graph:eps={eps:.6g},w={rng.uniform(0.5, 2.0):.6g},k={rng.uniform(-0.3, 0.3):.6g}"
    elif kind == "random_graph":
        n = 3 if tag == "thm1.3" else 2
        surface = (f"random_graph:n={n},seed={int(rng.integers(0, 2**31))},"
                   f"slope={rng.uniform(0.0, 0.7):.6g},amp={rng.uniform(0.0, 0.5):.6g}")
    elif kind == "codim_disk":
        surface = f"codim_disk:eps={rng.uniform(-0.5, 0.5):.6g},delta={rng.uniform(-0.7, 0.7):.6g}"
    else:
        surface = f"cylinder:radius={rng.uniform(0.5, 1.5):.6g},length={rng.uniform(0.5, 1.5):.6g}"
    return surface, _random_density(rng)


def run_trial(tag, seed, trial, resolution):
    """Evaluate one seeded case. Returns None when the case breaks a hypothesis."""
    from .generators import build_density, build_surface, parse_density_spec, parse_surface_spec

    rng = np.random.default_rng([seed, trial])
    surface, density = random_case(tag, rng)
    spec = parse_surface_spec(surface, resolution=resolution)
    try:
        mesh = build_surface(spec)
        f = build_density(parse_density_spec(density), mesh)
        return evaluate_inequality(tag, mesh, f, mesh_spec=spec, seed=seed, resolution=resolution)
    except HypothesisViolation:
        return None


def fuzz(variant, trials, seed=0, resolution=0.05, reports=False):
    """Seeded random search for cases with ratio < 1 - margin(h).

    Returns the violating reports (all evaluated reports if ``reports``),
    ordered by trial index.
    """
    tag = getattr(variant, "tag", variant)
    if trials < 0:
        raise ValueError("trials must be nonnegative")

    def one(i):
        return run_trial(tag, seed, i, resolution)

    threads = thread_count()
    if threads > 1 and trials > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(i) for i in range(trials)]
    results = [r for r in results if r is not None]
    if reports:
        return results
    return [r for r in results if not r.passed]
