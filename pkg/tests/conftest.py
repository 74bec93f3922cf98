"""Shared fixtures and independent oracles for the test suite."""

import math

import numpy as np
import pytest

from xslit import XSlitCamera


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def rel_err(got, want):
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    return np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-12))


def random_camera(rng, oblique=True, signed=False) -> XSlitCamera:
    """A non-degenerate camera with well-separated slit depths."""
    while True:
        z1 = rng.uniform(0.5, 5.0)
        z2 = rng.uniform(0.5, 5.0)
        if signed:
            z1 *= rng.choice([-1.0, 1.0])
            z2 *= rng.choice([-1.0, 1.0])
        if abs(z1 - z2) > 0.2:
            break
    theta1 = rng.uniform(0.0, math.pi) if oblique else 0.0
    while True:
        theta2 = rng.uniform(0.0, math.pi) if oblique else math.pi / 2
        if abs(math.sin(theta2 - theta1)) > 0.2:
            break
    return XSlitCamera(z1, z2, theta1, theta2)


def ray_projection_oracle(p, cam: XSlitCamera):
    """Project by explicit ray construction, independent of the slit basis.

    Finds the points A on slit 1 and B on slit 2 whose joining line passes
    through p, then intersects that line with the sensor plane z = 0.
    Assumes z is not at a slit depth (t away from 0 and 1).
    """
    x, y, z = p
    v1 = np.array([math.cos(cam.theta1), math.sin(cam.theta1)])
    v2 = np.array([math.cos(cam.theta2), math.sin(cam.theta2)])
    t = (z - cam.z1) / (cam.z2 - cam.z1)
    # p_xy = (1-t)*a*v1 + t*b*v2 with A = (a*v1, z1), B = (b*v2, z2)
    m = np.stack([(1.0 - t) * v1, t * v2], axis=1)
    a, b = np.linalg.solve(m, np.array([x, y], dtype=float))
    A = np.array([a * v1[0], a * v1[1], cam.z1])
    B = np.array([b * v2[0], b * v2[1], cam.z2])
    s = (0.0 - cam.z1) / (cam.z2 - cam.z1)
    return (A + s * (B - A))[:2]
