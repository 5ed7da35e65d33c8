import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minksob import abp
from minksob.errors import MeanConvexityViolated, WrongCodimension
from minksob.generators import build_density, build_surface, parse_surface_spec
from minksob.lorentz import boost, rotation
from minksob.pde import DensityField, solve_variant
from minksob.verify import (
    VerificationReport, constant_C, evaluate_inequality, fuzz, normalization_identity_check, random_case,
)

from conftest import surface

SCHEMA = {"variant", "n", "m", "tau", "lhs", "rhs", "ratio", "constant", "mesh_spec", "density_spec",
          "resolution", "seed", "margins"}


@pytest.mark.parametrize("variant, n, m, expected", [
    ("thm1.1", 2, 2, 2 * math.sqrt(math.pi / 3)),
    ("thm1.2", 2, 2, math.sqrt(math.pi / 3)),
    ("thm1.3", 3, 2, 2 ** -1.5 * math.sqrt(4 * math.pi / 3)),
])
def test_constant_examples(variant, n, m, expected):
    assert constant_C(variant, n, m, 1.0) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=60)
@given(st.sampled_from([("thm1.1", 0), ("thm1.2", 0), ("thm1.3", 1), ("thm1.3", 2)]), st.integers(2, 5),
       st.floats(1.0, 5.0))
def test_constant_identity(case, n, tau):
    variant, k = case
    m = n - k
    if m < 2:
        return
    C = constant_C(variant, n, m, tau)
    assert C == pytest.approx(m * abp.asymptotic_constant(variant, n, tau) ** (1 / m), rel=1e-12)


def test_constant_errors():
    with pytest.raises(ValueError):
        constant_C("thm1.1", 2, 2, 0.99)
    with pytest.raises(WrongCodimension):
        constant_C("thm1.1", 3, 2, 1.0)
    with pytest.raises(WrongCodimension):
        constant_C("thm1.3", 3, 3, 1.0)


@pytest.mark.parametrize("text, variant, expected", [
    ("flat_disk", "thm1.1", math.sqrt(3)),
    ("flat_disk", "thm1.2", 2 * math.sqrt(3)),
    ("codim_disk", "thm1.3", 2 * math.pi / (0.72360125 * math.sqrt(math.pi))),
])
def test_closed_form_ratios(text, variant, expected):
    mesh = surface(text, 0.05)
    rep = evaluate_inequality(variant, mesh, build_density("constant:1", mesh))
    assert rep.ratio == pytest.approx(expected, rel=0.01)
    assert rep.lhs == pytest.approx(2 * math.pi, rel=0.01)


def test_thm11_guard():
    mesh = surface("spacelike_graph:eps=0.3,w=2", 0.1)
    with pytest.raises(MeanConvexityViolated):
        evaluate_inequality("thm1.1", mesh, build_density("constant:1", mesh))


@pytest.mark.parametrize("text, variant, density", [
    ("hyperboloid_cap", "thm1.2", "random_trig:seed=2"),
    ("flat_disk", "thm1.1", "radial_bump:cx=0.3"),
    ("cylinder", "thm1.3", "random_trig:seed=8"),
])
def test_homogeneity_and_rotation(text, variant, density):
    mesh = surface(text, 0.1)
    f = build_density(density, mesh)
    base = evaluate_inequality(variant, mesh, f).ratio
    for lam in (0.1, 1.0, 10.0):
        assert evaluate_inequality(variant, mesh, f.scaled(lam)).ratio == pytest.approx(base, rel=1e-10)
    R = rotation(mesh.n, 1.1, axes=(1, 2))
    turned = mesh.transformed(R)
    # density specs are evaluated in ambient coordinates, so carry the values over
    ratio = evaluate_inequality(variant, turned, DensityField(turned, f.values)).ratio
    assert ratio == pytest.approx(base, rel=1e-8)


def test_boost_weakens_constant():
    mesh = surface("flat_disk", 0.1)
    f = build_density("radial_bump", mesh)
    before = evaluate_inequality("thm1.2", mesh, f)
    moved = mesh.transformed(boost(2, 0.6))
    after = evaluate_inequality("thm1.2", moved, DensityField(moved, f.values))
    assert after.tau == pytest.approx(1.25)
    assert after.rhs <= before.rhs
    assert after.ratio >= 1


def test_report_round_trip():
    mesh = surface("flat_disk", 0.1)
    rep = evaluate_inequality("thm1.1", mesh, build_density("constant:1", mesh), mesh_spec="flat_disk", seed=3)
    data = json.loads(rep.to_json())
    assert set(data) == SCHEMA
    assert VerificationReport.from_json(rep.to_json()) == rep
    assert rep.ratio == rep.lhs / rep.rhs


def test_normalization_identity():
    mesh = surface("flat_disk", 1 / 40)
    assert normalization_identity_check("thm1.1", mesh, build_density("constant:1", mesh)) < 1e-3
    # for constant f = c on the unit disk the gap is |1/c - 1|, i.e. lambda^{1/(m-1)} - 1 with lambda = 1/c
    for c in (0.5, 2.0, 4.0):
        gap = normalization_identity_check("thm1.1", mesh, build_density(f"constant:{c}", mesh))
        assert gap == pytest.approx(abs(1 / c - 1), abs=2e-3)


def test_fuzz_basics():
    assert fuzz("thm1.2", 0, seed=7) == []
    a = fuzz("thm1.1", 6, seed=3, resolution=0.1, reports=True)
    b = fuzz("thm1.1", 6, seed=3, resolution=0.1, reports=True)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    assert len(a) == 6 and all(r.ratio >= 1 for r in a)


def test_fuzz_respects_mean_convexity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        text, _ = random_case("thm1.1", rng)
        assert text.split(":")[0] in ("flat_disk", "hyperboloid_cap", "tilted_disk")


@pytest.mark.parametrize("variant", ["thm1.1", "thm1.2", "thm1.3"])
def test_end_to_end_chain(variant):
    rng = np.random.default_rng(11)
    for _ in range(2):
        text, density = random_case(variant, rng)
        mesh = build_surface(parse_surface_spec(text, resolution=0.1))
        f = build_density(density, mesh)
        rep = evaluate_inequality(variant, mesh, f)
        assert rep.ratio >= 1 - rep.margins["ratio"]
        sol = solve_variant(variant, mesh, f)
        r = 10 * mesh.diameter
        est = abp.estimate_volume_A(variant, mesh, r, 50000, seed=1)
        value, lo, hi = est.scaled(mesh.n + 1)
        eps = (hi - lo) / max(value, 1e-300) + 0.05
        assert value <= (1 + eps) * abp.transport_bound(variant, mesh, sol, r)
