"""Input coercion shared by the estimator wrappers and the CLI."""
import numpy as np

from .errors import DimensionMismatch, SpecParseError
from .mesh import SpacelikeMesh
from .pde import VARIANTS, DensityField


def check_variant(variant):
    tag = getattr(variant, "tag", variant)
    if tag not in VARIANTS:
        raise ValueError(f"unknown variant {tag!r}; expected one of {VARIANTS}")
    return tag


def check_mesh(mesh):
    """Accept a SpacelikeMesh, a surface spec string, or a (vertices, simplices) pair."""
    if isinstance(mesh, SpacelikeMesh):
        return mesh
    if isinstance(mesh, str):
        from .generators import build_surface

        return build_surface(mesh)
    if isinstance(mesh, (tuple, list)) and len(mesh) == 2:
        return SpacelikeMesh(*mesh)
    raise TypeError(f"cannot interpret {type(mesh).__name__} as a mesh")


def check_density(density, mesh):
    """Accept a DensityField, a density spec string, a scalar, or vertex values."""
    if isinstance(density, DensityField):
        if density.mesh is not mesh and density.values.shape != (mesh.n_vertices,):
            raise DimensionMismatch("density was built for a different mesh")
        return density if density.mesh is mesh else DensityField(mesh, density.values, density.spec)
    if isinstance(density, str):
        from .generators import build_density

        return build_density(density, mesh)
    values = np.asarray(density, dtype=float)
    if values.ndim == 0:
        values = np.full(mesh.n_vertices, float(values))
    return DensityField(mesh, values)


def check_points(points, dim):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.ndim != 2 or points.shape[1] != dim:
        raise DimensionMismatch(f"expected points of shape (k, {dim}), got {points.shape}")
    return points


def check_r(r):
    r = float(r)
    if not np.isfinite(r) or r < 0:
        raise ValueError(f"r must be finite and nonnegative, got {r}")
    return r


__all__ = ["check_variant", "check_mesh", "check_density", "check_points", "check_r", "SpecParseError"]
