"""Deterministic test surfaces and densities.

Spec strings look like ``"hyperboloid_cap:n=2,d=1.0,h=0.05"`` or
``"constant:1"``; see :func:`parse_surface_spec` and
:func:`parse_density_spec`.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import NotSpacelike, SpecParseError
from .mesh import SpacelikeMesh
from .pde import DensityField

SURFACE_KINDS = (
    "flat_disk", "hyperboloid_cap", "spacelike_graph", "tilted_disk", "codim_disk", "random_graph", "cylinder",
)
DENSITY_KINDS = ("constant", "radial_bump", "random_trig")

_INT_PARAMS = {"n", "seed", "terms"}

_SURFACE_DEFAULTS = {
    "flat_disk": {"n": 2, "R": 1.0},
    "hyperboloid_cap": {"n": 2, "d": 1.0, "a": 1.0},
    "spacelike_graph": {"n": 2, "R": 1.0, "eps": 0.1, "w": 1.0, "k": 0.0},
    "tilted_disk": {"n": 2, "R": 1.0, "k": 0.5},
    "codim_disk": {"n": 3, "R": 1.0, "eps": 0.0, "delta": 0.0},
    "random_graph": {"n": 2, "R": 1.0, "seed": 0, "slope": 0.5, "amp": 0.3, "terms": 3},
    "cylinder": {"n": 3, "radius": 1.0, "length": 1.0},
}
_DENSITY_DEFAULTS = {
    "constant": {"c": 1.0},
    "radial_bump": {"cx": 0.0, "cy": 0.0, "w": 0.5, "floor": 0.1},
    "random_trig": {"seed": 0, "floor": 0.1, "amp": 1.0, "terms": 3},
}


@dataclass
class SurfaceSpec:
    kind: str
    params: dict = field(default_factory=dict)
    resolution: float = 0.1
    margin: float = 1e-2

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise SpecParseError(f"unknown surface kind {self.kind!r}")
        unknown = set(self.params) - set(_SURFACE_DEFAULTS[self.kind])
        if unknown:
            raise SpecParseError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        self.params = {**_SURFACE_DEFAULTS[self.kind], **self.params}
        if not self.resolution > 0:
            raise SpecParseError("resolution h must be positive")

    def __str__(self):
        body = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}:{body},h={self.resolution}"


@dataclass
class DensitySpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DENSITY_KINDS:
            raise SpecParseError(f"unknown density kind {self.kind!r}")
        unknown = set(self.params) - set(_DENSITY_DEFAULTS[self.kind])
        if unknown:
            raise SpecParseError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        self.params = {**_DENSITY_DEFAULTS[self.kind], **self.params}

    def __str__(self):
        return f"{self.kind}:" + ",".join(f"{k}={v}" for k, v in self.params.items())


def _parse(text, defaults):
    kind, _, body = text.strip().partition(":")
    kind = kind.strip()
    if kind not in defaults:
        raise SpecParseError(f"unknown kind {kind!r} in spec {text!r}")
    params = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            # a single bare value names the first parameter, e.g. "constant:1"
            if params or len(defaults[kind]) == 0:
                raise SpecParseError(f"malformed parameter {item!r} in spec {text!r}")
            key, value = next(iter(defaults[kind])), key
        key = key.strip()
        try:
            params[key] = int(value) if key in _INT_PARAMS else float(value)
        except ValueError:
            raise SpecParseError(f"parameter {key!r} has non-numeric value {value!r}") from None
    return kind, params


def parse_surface_spec(text, resolution=None):
    kind, params = _parse(text, _SURFACE_DEFAULTS)
    h = params.pop("h", None)
    margin = params.pop("margin", None)
    spec_kwargs = {}
    if margin is not None:
        spec_kwargs["margin"] = margin
    res = resolution if resolution is not None else (h if h is not None else 0.1)
    return SurfaceSpec(kind, params, resolution=res, **spec_kwargs)


def parse_density_spec(text):
    kind, params = _parse(text, _DENSITY_DEFAULTS)
    return DensitySpec(kind, params)


# -- meshing ----------------------------------------------------------------


def _zip_rings(a, b):
    """Triangulate the annulus between two closed vertex rings (index arrays)."""
    tris = []
    na, nb = len(a), len(b)
    i = j = 0
    while i < na or j < nb:
        if j >= nb or (i < na and (i + 1) / na < (j + 1) / nb):
            tris.append((a[i % na], a[(i + 1) % na], b[j % nb]))
            i += 1
        else:
            tris.append((a[i % na], b[(j + 1) % nb], b[j % nb]))
            j += 1
    return tris


def polar_disk(radius, h, circumference=lambda rho: rho):
    """Concentric-ring triangulation of a polar disk.

    Returns polar parameters (rho, theta) per vertex, the triangles, and the
    ring radii. ``circumference(rho)`` is the metric length of the ring
    divided by 2 pi, so ring vertex counts follow the target edge length.
    """
    K = max(2, int(math.ceil(radius / h - 1e-9)))
    step = radius / K
    params = [(0.0, 0.0)]
    rings = [np.array([0])]
    for k in range(1, K + 1):
        rho = k * step
        count = max(6, int(round(2 * math.pi * circumference(rho) / step)))
        theta = 2 * math.pi * np.arange(count) / count
        start = len(params)
        params.extend((rho, t) for t in theta)
        rings.append(np.arange(start, start + count))
    tris = []
    for j in range(len(rings[1])):
        tris.append((0, rings[1][j], rings[1][(j + 1) % len(rings[1])]))
    for k in range(1, K):
        tris.extend(_zip_rings(rings[k], rings[k + 1]))
    return np.array(params), np.array(tris, dtype=np.int64)


def _embed(n, x0, spatial):
    """Assemble ambient coordinates from x0 and a list of spatial columns."""
    V = np.zeros((len(x0), n + 1))
    V[:, 0] = x0
    for i, col in enumerate(spatial, start=1):
        V[:, i] = col
    return V


def _check_slope(kind, bound, margin):
    if bound > 1 - margin:
        raise NotSpacelike(f"{kind}: slope bound {bound:.4g} violates |D phi| <= 1 - {margin}")


def _random_trig(rng, terms, dim, freq=(0.5, 2.0)):
    w = rng.normal(size=(terms, dim))
    w *= rng.uniform(*freq, size=(terms, 1)) / np.linalg.norm(w, axis=1, keepdims=True)
    phase = rng.uniform(0, 2 * math.pi, size=terms)
    amp = rng.uniform(0.2, 1.0, size=terms) * rng.choice([-1.0, 1.0], size=terms)
    return w, phase, amp


def build_surface(spec):
    """Mesh a :class:`SurfaceSpec` (or spec string)."""
    if isinstance(spec, str):
        spec = parse_surface_spec(spec)
    p = spec.params
    h = spec.resolution
    kind = spec.kind
    n = int(p["n"])
    if kind in ("flat_disk", "tilted_disk", "spacelike_graph", "random_graph"):
        if n < 2:
            raise SpecParseError(f"{kind} needs n >= 2")
        pr, tris = polar_disk(p["R"], h)
        x1 = pr[:, 0] * np.cos(pr[:, 1])
        x2 = pr[:, 0] * np.sin(pr[:, 1])
        extra = []
        if kind == "flat_disk":
            x0 = np.zeros_like(x1)
        elif kind == "tilted_disk":
            _check_slope(kind, abs(p["k"]), spec.margin)
            x0 = p["k"] * x1
        elif kind == "spacelike_graph":
            _check_slope(kind, abs(p["k"]) + abs(p["eps"] * p["w"]), spec.margin)
            x0 = p["k"] * x1 + p["eps"] * np.sin(p["w"] * x1)
        else:
            rng = np.random.default_rng(int(p["seed"]))
            w, phase, amp = _random_trig(rng, int(p["terms"]), 2)
            # sum |a_k| |w_k| = slope bounds |D phi| analytically
            amp *= p["slope"] / np.sum(np.abs(amp) * np.linalg.norm(w, axis=1))
            _check_slope(kind, p["slope"], spec.margin)
            xy = np.stack([x1, x2], axis=1)
            x0 = np.cos(xy @ w.T + phase) @ amp
            if n >= 3:
                w3, phase3, amp3 = _random_trig(rng, int(p["terms"]), 2)
                amp3 *= p["amp"] / np.sum(np.abs(amp3))
                extra = [np.cos(xy @ w3.T + phase3) @ amp3]
        V = _embed(n, x0, [x1, x2, *extra])
    elif kind == "codim_disk":
        if n < 3:
            raise SpecParseError("codim_disk needs n >= 3")
        _check_slope(kind, abs(p["delta"]) * p["R"], spec.margin)
        pr, tris = polar_disk(p["R"], h)
        x1 = pr[:, 0] * np.cos(pr[:, 1])
        x2 = pr[:, 0] * np.sin(pr[:, 1])
        r2 = 0.5 * pr[:, 0] ** 2
        V = _embed(n, p["delta"] * r2, [x1, x2, p["eps"] * r2])
    elif kind == "hyperboloid_cap":
        if n < 2:
            raise SpecParseError("hyperboloid_cap needs n >= 2")
        a, d = p["a"], p["d"]
        if not (a > 0 and d > 0):
            raise SpecParseError("hyperboloid_cap needs a > 0 and d > 0")
        pr, tris = polar_disk(d, h / a, circumference=math.sinh)
        rho, th = pr[:, 0], pr[:, 1]
        V = _embed(n, a * np.cosh(rho), [a * np.sinh(rho) * np.cos(th), a * np.sinh(rho) * np.sin(th)])
    elif kind == "cylinder":
        if n < 3:
            raise SpecParseError("cylinder needs n >= 3")
        R, L = p["radius"], p["length"]
        nt = max(6, int(round(2 * math.pi * R / h)))
        nz = max(2, int(math.ceil(L / h - 1e-9)))
        th = 2 * math.pi * np.arange(nt) / nt
        z = np.linspace(0.0, L, nz + 1)
        TH, Z = np.meshgrid(th, z)
        V = _embed(n, np.zeros(TH.size), [R * np.cos(TH.ravel()), R * np.sin(TH.ravel()), Z.ravel()])
        tris = []
        for k in range(nz):
            for j in range(nt):
                a0, a1 = k * nt + j, k * nt + (j + 1) % nt
                b0, b1 = a0 + nt, a1 + nt
                tris += [(a0, a1, b1), (a0, b1, b0)]
        tris = np.array(tris, dtype=np.int64)
    else:  # pragma: no cover - guarded by SurfaceSpec
        raise SpecParseError(kind)
    return SpacelikeMesh(V, tris)


def build_density(spec, mesh):
    """Evaluate a :class:`DensitySpec` (or spec string) at the mesh vertices."""
    if isinstance(spec, str):
        spec = parse_density_spec(spec)
    p = spec.params
    X = mesh.vertices[:, 1:]
    if spec.kind == "constant":
        if not p["c"] > 0:
            raise SpecParseError("constant density must be positive")
        values = np.full(mesh.n_vertices, float(p["c"]))
    elif spec.kind == "radial_bump":
        center = np.zeros(mesh.n)
        center[:2] = p["cx"], p["cy"]
        dist2 = np.sum((X - center) ** 2, axis=1)
        values = p["floor"] + np.exp(-dist2 / p["w"] ** 2)
    else:
        rng = np.random.default_rng(int(p["seed"]))
        w, phase, amp = _random_trig(rng, int(p["terms"]), mesh.n, freq=(0.5, 3.0))
        amp /= np.sum(np.abs(amp))
        s = np.cos(X @ w.T + phase) @ amp  # |s| <= 1
        values = p["floor"] + p["amp"] * 0.5 * (1.0 + s)
    if p.get("floor", 1.0) <= 0:
        raise SpecParseError("density floor must be positive")
    return DensityField(mesh, values, spec=str(spec))
