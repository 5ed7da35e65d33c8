"""Linear algebra on Minkowski space R^{n,1}.

Vectors are plain numpy arrays whose last axis holds ``(x0, x1, ..., xn)``;
index 0 is the timelike coordinate. All functions broadcast over leading
axes.
"""
from enum import Enum
import math

import numpy as np

from .errors import DimensionMismatch


class CausalClass(str, Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"


def metric(n):
    """Diagonal Gram matrix diag(-1, 1, ..., 1) of R^{n,1}."""
    eta = np.ones(n + 1)
    eta[0] = -1.0
    return np.diag(eta)


def mink_inner(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(
            f"vectors live in different spaces: {a.shape[-1]} vs {b.shape[-1]} coordinates"
        )
    return np.einsum("...i,...i->...", a[..., 1:], b[..., 1:]) - a[..., 0] * b[..., 0]


def lower(v):
    """Apply the metric: the covector <v, .> as a coordinate array."""
    v = np.array(v, dtype=float, copy=True)
    v[..., 0] *= -1.0
    return v


def causal_class(v, tol=None):
    """Classify ``v`` by the sign of <v, v>.

    The default tolerance is ``1e-10 * |v|_E^2`` so that lightlike detection
    does not depend on the scale of ``v``.
    """
    v = np.asarray(v, dtype=float)
    q = float(mink_inner(v, v))
    if tol is None:
        tol = 1e-10 * float(np.dot(v, v))
    if q > tol:
        return CausalClass.SPACELIKE
    if q < -tol:
        return CausalClass.TIMELIKE
    return CausalClass.LIGHTLIKE


def signature(v, tol=None):
    """sigma(v): +1, -1 or 0 for spacelike, timelike, lightlike."""
    return {CausalClass.SPACELIKE: 1, CausalClass.TIMELIKE: -1, CausalClass.LIGHTLIKE: 0}[
        causal_class(v, tol)
    ]


def mink_norm(v):
    """||v|| = sqrt(sigma(v) <v, v>), i.e. sqrt(|<v, v>|); zero on the light cone."""
    q = mink_inner(v, v)
    return np.sqrt(np.abs(q))


def unit_ball_volume(k):
    """Lebesgue volume of the Euclidean unit ball in R^k."""
    if int(k) != k or k < 1:
        raise ValueError(f"unit ball volume needs an integer dimension >= 1, got {k!r}")
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def boost(n, velocity, axis=1):
    """Lorentz boost of R^{n,1} with speed ``velocity`` along spatial ``axis``."""
    if not 1 <= axis <= n:
        raise ValueError(f"boost axis must be a spatial index in [1, {n}]")
    if abs(velocity) >= 1:
        raise ValueError("boost velocity must satisfy |v| < 1")
    gamma = 1.0 / math.sqrt(1.0 - velocity**2)
    L = np.eye(n + 1)
    L[0, 0] = L[axis, axis] = gamma
    L[0, axis] = L[axis, 0] = gamma * velocity
    return L


def rotation(n, angle, axes=(1, 2)):
    """Spatial rotation in the plane of two spatial coordinate axes."""
    i, j = axes
    if not (1 <= i <= n and 1 <= j <= n and i != j):
        raise ValueError("rotation axes must be two distinct spatial indices")
    R = np.eye(n + 1)
    c, s = math.cos(angle), math.sin(angle)
    R[i, i] = R[j, j] = c
    R[i, j], R[j, i] = -s, s
    return R


def gram_schmidt(vectors, tol=1e-12):
    """Lorentzian Gram-Schmidt on the rows of ``vectors``.

    Each output row is unit (<e, e> = +-1) and mutually orthogonal. Rows whose
    residual is null or vanishing are dropped.
    """
    basis = []
    for v in np.atleast_2d(np.asarray(vectors, dtype=float)):
        w = v.copy()
        for e in basis:
            w = w - mink_inner(w, e) / mink_inner(e, e) * e
        q = mink_inner(w, w)
        if abs(q) <= tol * max(float(np.dot(v, v)), 1.0):
            continue
        basis.append(w / math.sqrt(abs(q)))
    return np.array(basis).reshape(len(basis), -1)
