import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_tri():
    from tetrecon.geom import build_delaunay
    rng = np.random.default_rng(7)
    return build_delaunay(rng.random((300, 3)))


@pytest.fixture(scope="session")
def sphere_scene():
    """LR scan of the sphere with its prepared scene and ground-truth occupancy."""
    from tetrecon.pipeline import prepare_scene, scan_shape, scene_occupancy
    from tetrecon.scanner import preset
    sc, mesh = scan_shape("sphere", preset("LR", seed=0))
    prep = prepare_scene(sc.points, sc.sighting_cameras())
    occ = scene_occupancy(prep, mesh, samples=100, seed=0)
    return sc, mesh, prep, occ


ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def _verdict(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return _verdict


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
