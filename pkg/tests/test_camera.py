"""Tests for the XSlit camera model and projection."""

import math

import numpy as np
import pytest

from xslit import (
    DegenerateBasis,
    InvalidInput,
    OnSlitPlane,
    SlitBasis,
    SlitCoords,
    XSlitCamera,
    camera_from_dict,
    camera_to_dict,
    decompose,
    depth_scaling_matrix,
    is_pinhole_degenerate,
    project_point,
    project_segment,
    recompose,
)
from xslit.scene import fit_line

from conftest import random_camera, ray_projection_oracle, rel_err


class TestDecompose:
    def test_orthonormal_axes(self):
        basis = SlitBasis.from_angles(0.0, math.pi / 2)
        assert decompose((1.0, 1.0), basis) == pytest.approx((1.0, 1.0))

    def test_zero_vector(self):
        basis = SlitBasis.from_angles(0.3, 2.0)
        assert decompose((0.0, 0.0), basis) == pytest.approx((0.0, 0.0))

    def test_diagonal_basis(self):
        # hand-solved 2x2 system: (1,1) on the 45/135 degree basis
        basis = SlitBasis.from_angles(math.pi / 4, 3 * math.pi / 4)
        a, b = decompose((1.0, 1.0), basis)
        assert a == pytest.approx(math.sqrt(2.0))
        assert b == pytest.approx(0.0, abs=1e-12)
        assert recompose(SlitCoords(a, b), basis) == pytest.approx((1.0, 1.0))

    def test_round_trip_random(self, rng):
        for _ in range(10_000):
            theta1 = rng.uniform(0, math.pi)
            theta2 = rng.uniform(0, math.pi)
            if abs(math.sin(theta2 - theta1)) <= 1e-3:
                continue
            basis = SlitBasis.from_angles(theta1, theta2)
            xy = rng.uniform(-10, 10, size=2)
            back = recompose(decompose(xy, basis), basis)
            assert rel_err(back, xy) < 1e-9

    def test_parallel_slits_rejected(self):
        with pytest.raises(DegenerateBasis):
            SlitBasis.from_angles(0.2, 0.2 + math.pi)


class TestCameraValidation:
    def test_equal_depths_need_explicit_constructor(self):
        with pytest.raises(InvalidInput):
            XSlitCamera(1.0, 1.0)
        cam = XSlitCamera.pinhole_degenerate(1.0)
        assert cam.is_pinhole_degenerate

    def test_slit_on_sensor_plane_rejected(self):
        with pytest.raises(InvalidInput):
            XSlitCamera(0.0, 2.0)

    def test_parallel_slit_angles_rejected(self):
        with pytest.raises(DegenerateBasis):
            XSlitCamera(1.0, 2.0, 0.5, 0.5)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInput):
            XSlitCamera(math.nan, 2.0)


class TestProjectPoint:
    def test_hand_example(self):
        # ray-construction check: slit hits (-1/2, 0, 1) and (0, 1/3, 2)
        cam = XSlitCamera(1.0, 2.0)
        assert project_point((1.0, 1.0, 4.0), cam) == pytest.approx([-1.0, -1.0 / 3.0])

    def test_degenerate_axis_point(self):
        cam = XSlitCamera.pinhole_degenerate(1.5)
        assert project_point((0.0, 0.0, 3.0), cam) == pytest.approx([0.0, 0.0])

    def test_origin_column(self):
        cam = XSlitCamera(1.0, 2.0)
        assert project_point((0.0, 0.0, 5.0), cam) == pytest.approx([0.0, 0.0])

    def test_on_slit_plane_raises(self):
        cam = XSlitCamera(1.0, 2.0)
        with pytest.raises(OnSlitPlane):
            project_point((0.5, 0.5, 2.0), cam)
        with pytest.raises(OnSlitPlane):
            project_point((0.5, 0.5, 1.0), cam)

    def test_matches_ray_oracle(self, rng):
        for _ in range(10_000):
            cam = random_camera(rng, signed=True)
            z = rng.uniform(-8, 8)
            if min(abs(z - cam.z1), abs(z - cam.z2)) < 0.05 or abs(z) < 0.05:
                continue
            p = (rng.uniform(-5, 5), rng.uniform(-5, 5), z)
            assert rel_err(project_point(p, cam), ray_projection_oracle(p, cam)) < 1e-7

    def test_degeneracy_limit_converges_to_perspective(self):
        # as z2 -> z1 the projection approaches the pinhole through (0, 0, z1)
        z1 = 1.0
        p = np.array([0.7, -0.4, 5.0])
        perspective = -z1 / (p[2] - z1) * p[:2]
        errors = []
        for k in range(1, 9):
            cam = XSlitCamera(z1, z1 + 10.0**-k, 0.3, 1.9)
            errors.append(float(np.abs(project_point(p, cam) - perspective).max()))
        assert all(e2 < e1 for e1, e2 in zip(errors, errors[1:]))
        assert errors[-1] < 1e-7

    def test_linear_in_xy_at_fixed_depth(self, rng):
        for _ in range(200):
            cam = random_camera(rng)
            z = rng.uniform(6, 12)
            xy1 = rng.uniform(-3, 3, size=2)
            xy2 = rng.uniform(-3, 3, size=2)
            al, be = rng.uniform(-2, 2, size=2)
            combo = al * xy1 + be * xy2
            lhs = project_point((combo[0], combo[1], z), cam)
            rhs = al * project_point((xy1[0], xy1[1], z), cam) + be * project_point(
                (xy2[0], xy2[1], z), cam
            )
            assert np.allclose(lhs, rhs, atol=1e-9)
            m = depth_scaling_matrix(cam, z)
            assert np.allclose(m @ combo, lhs, atol=1e-9)


class TestProjectSegment:
    def test_frontal_parallel_is_collinear(self):
        cam = XSlitCamera(1.0, 2.0)
        pts = project_segment((0.0, 0.0, 4.0), (2.0, 1.0, 4.0), cam, samples=17)
        chord = pts[-1] - pts[0]
        normal = np.array([-chord[1], chord[0]]) / np.linalg.norm(chord)
        assert np.abs((pts - pts[0]) @ normal).max() < 1e-9

    def test_depth_spanning_is_curved(self):
        cam = XSlitCamera(1.0, 2.0)
        pts = project_segment((0.0, 0.0, 3.0), (1.0, 1.0, 5.0), cam, samples=33)
        chord = pts[-1] - pts[0]
        normal = np.array([-chord[1], chord[0]]) / np.linalg.norm(chord)
        deviation = np.abs((pts - pts[0]) @ normal).max()
        assert deviation > 1e-4
        _, residual = fit_line(pts)
        assert residual > 1e-6

    def test_identical_endpoints(self):
        cam = XSlitCamera(1.0, 2.0)
        pts = project_segment((1.0, 1.0, 4.0), (1.0, 1.0, 4.0), cam, samples=5)
        assert np.allclose(pts, pts[0])

    def test_on_slit_plane_reports_parameter(self):
        cam = XSlitCamera(1.0, 2.0)
        with pytest.raises(OnSlitPlane) as excinfo:
            project_segment((0.0, 0.0, 1.5), (0.0, 0.0, 2.5), cam, samples=3)
        assert excinfo.value.t == pytest.approx(0.5)

    def test_too_few_samples(self):
        cam = XSlitCamera(1.0, 2.0)
        with pytest.raises(InvalidInput):
            project_segment((0, 0, 3), (1, 1, 4), cam, samples=1)


class TestDegeneracyPredicate:
    def test_equal_depths(self):
        assert is_pinhole_degenerate(XSlitCamera.pinhole_degenerate(1.0))

    def test_distinct_depths(self):
        assert not is_pinhole_degenerate(XSlitCamera(1.0, 2.0))

    def test_arch_scene_camera(self):
        # panorama-style rig with both slits behind the sensor
        assert not is_pinhole_degenerate(XSlitCamera(-3.2, -346.7))


class TestCameraJson:
    def test_round_trip_degrees(self):
        cam = XSlitCamera(-3.2, -346.7, math.radians(45.0), math.radians(135.0))
        doc = camera_to_dict(cam)
        assert doc["theta1_deg"] == pytest.approx(45.0)
        back = camera_from_dict(doc)
        assert back == cam

    def test_degenerate_document_allowed(self):
        cam = camera_from_dict({"z1": 1.5, "z2": 1.5, "theta1_deg": 0, "theta2_deg": 90})
        assert cam.is_pinhole_degenerate

    def test_malformed_document(self):
        with pytest.raises(InvalidInput):
            camera_from_dict({"z1": 1.0})
