from functools import lru_cache

import pytest

from minksob.generators import build_density, build_surface, parse_surface_spec
from minksob.pde import solve_variant


@lru_cache(maxsize=None)
def surface(text, h):
    return build_surface(parse_surface_spec(text, resolution=h))


@lru_cache(maxsize=None)
def solved(text, h, variant, density="constant:1"):
    mesh = surface(text, h)
    return mesh, solve_variant(variant, mesh, build_density(density, mesh))


@pytest.fixture
def flat():
    return surface("flat_disk", 0.1)


@pytest.fixture
def cap():
    return surface("hyperboloid_cap", 0.1)


@pytest.fixture
def codim():
    return surface("codim_disk:eps=0.3,delta=0.2", 0.1)


ACCEPTANCE = {}


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
