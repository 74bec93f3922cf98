"""Crossed-slit (XSlit) camera model and exact projection.

Geometry conventions
--------------------
The sensor plane is ``z = 0`` and both slits are horizontal 3D lines
parallel to it: slit ``i`` sits at signed depth ``z_i`` with in-plane
direction ``v_i = (cos(theta_i), sin(theta_i))``.  The coordinate origin is
the intersection of the two slits' orthogonal projections onto the sensor
plane; off-origin slit placement is not supported.  Image coordinates are
scene units on the sensor plane (pixel mapping is a rasterization concern,
see :mod:`xslit.raster`).

Projection of a point ``p = (x, y, z)`` factors through the slit basis:
write ``(x, y) = a*v1 + b*v2``, scale each coefficient by the pinhole-like
factor of the *other* slit,

    u = -z2 / (z - z2) * a,      v = -z1 / (z - z1) * b,

and recompose ``p' = u*v1 + v*v2``.  At fixed depth the map is linear in
``(x, y)``, which is what makes aspect-ratio analysis tractable.

Slit depths are signed and unordered; the only hard constraints are
non-parallel slits, slits off the sensor plane, and (unless explicitly
requested via :meth:`XSlitCamera.pinhole_degenerate`) distinct slit depths.
All degeneracy checks use a relative tolerance of 1e-12 scaled by the
largest participating magnitude.

All types are immutable and all functions are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateBasis, InvalidInput, OnSlitPlane

REL_EPS = 1e-12


class SlitCoords(NamedTuple):
    """Coefficients of a 2D vector on the slit basis (a*v1 + b*v2)."""

    a: float
    b: float


@dataclass(frozen=True)
class SlitBasis:
    """Unit slit directions v1, v2 and their determinant sin(theta2 - theta1)."""

    v1: tuple[float, float]
    v2: tuple[float, float]
    det: float

    @classmethod
    def from_angles(cls, theta1: float, theta2: float) -> "SlitBasis":
        det = math.sin(theta2 - theta1)
        if abs(det) <= REL_EPS:
            raise DegenerateBasis(
                f"slit angles {theta1} and {theta2} are parallel (mod pi)"
            )
        return cls(
            v1=(math.cos(theta1), math.sin(theta1)),
            v2=(math.cos(theta2), math.sin(theta2)),
            det=det,
        )


def _as_xy(xy) -> np.ndarray:
    arr = np.asarray(xy, dtype=float)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise InvalidInput(f"expected a finite 2-vector, got {xy!r}")
    return arr


def _as_xyz(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise InvalidInput(f"expected a finite 3-vector, got {p!r}")
    return arr


def decompose(xy, basis: SlitBasis) -> SlitCoords:
    """Write a 2-vector as a*v1 + b*v2 (Cramer's rule on the slit basis)."""
    x, y = _as_xy(xy)
    c1, s1 = basis.v1
    c2, s2 = basis.v2
    a = (x * s2 - y * c2) / basis.det
    b = (y * c1 - x * s1) / basis.det
    return SlitCoords(a, b)


def recompose(coords: SlitCoords, basis: SlitBasis) -> np.ndarray:
    """Inverse of :func:`decompose`: a*v1 + b*v2 as an xy vector."""
    a, b = coords
    return np.array(
        [a * basis.v1[0] + b * basis.v2[0], a * basis.v1[1] + b * basis.v2[1]]
    )


@dataclass(frozen=True)
class XSlitCamera:
    """Two-slit camera: slit depths z1, z2 and slit angles theta1, theta2 (radians).

    ``allow_degenerate`` admits z1 == z2, which collapses the model to a
    perspective camera projecting through the slit intersection point; use
    :meth:`pinhole_degenerate` rather than passing the flag directly.
    """

    z1: float
    z2: float
    theta1: float = 0.0
    theta2: float = math.pi / 2
    allow_degenerate: bool = False

    def __post_init__(self):
        for name in ("z1", "z2", "theta1", "theta2"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInput(f"camera field {name} must be finite")
        SlitBasis.from_angles(self.theta1, self.theta2)  # rejects parallel slits
        scale = max(abs(self.z1), abs(self.z2))
        if scale == 0.0 or min(abs(self.z1), abs(self.z2)) <= REL_EPS * scale:
            raise InvalidInput("slit depths must be nonzero (slits off the sensor plane)")
        if not self.allow_degenerate and abs(self.z1 - self.z2) <= REL_EPS * scale:
            raise InvalidInput(
                "z1 == z2 is the pinhole-degenerate case; "
                "construct it via XSlitCamera.pinhole_degenerate"
            )

    @classmethod
    def pinhole_degenerate(
        cls, focal_depth: float, theta1: float = 0.0, theta2: float = math.pi / 2
    ) -> "XSlitCamera":
        """Perspective camera expressed as an XSlit with intersecting slits."""
        return cls(focal_depth, focal_depth, theta1, theta2, allow_degenerate=True)

    @property
    def basis(self) -> SlitBasis:
        return SlitBasis.from_angles(self.theta1, self.theta2)

    @property
    def is_pinhole_degenerate(self) -> bool:
        return abs(self.z1 - self.z2) <= REL_EPS * max(abs(self.z1), abs(self.z2))

    def depth_tolerance(self) -> float:
        """Absolute tolerance for 'on a slit plane' tests."""
        return REL_EPS * max(abs(self.z1), abs(self.z2))


def is_pinhole_degenerate(cam: XSlitCamera) -> bool:
    """True iff the two slits share a depth (perspective special case)."""
    return cam.is_pinhole_degenerate


def _check_off_slit_planes(z: float, cam: XSlitCamera, t: float | None = None) -> None:
    tol = cam.depth_tolerance()
    if abs(z - cam.z1) <= tol or abs(z - cam.z2) <= tol:
        raise OnSlitPlane(f"point depth {z} lies on a slit plane", t=t)


def project_point(p, cam: XSlitCamera) -> np.ndarray:
    """Project a 3D point onto the sensor plane; returns image xy.

    Raises :class:`OnSlitPlane` when the point depth coincides with either
    slit depth (within the camera's relative tolerance).
    """
    p = _as_xyz(p)
    z = p[2]
    _check_off_slit_planes(z, cam)
    basis = cam.basis
    a, b = decompose(p[:2], basis)
    u = -cam.z2 / (z - cam.z2) * a
    v = -cam.z1 / (z - cam.z1) * b
    return recompose(SlitCoords(u, v), basis)


def depth_scaling_matrix(cam: XSlitCamera, z: float) -> np.ndarray:
    """2x2 linear map sending xy at depth z to image xy.

    The projection at fixed depth is linear, so whole frontal-parallel
    shapes project through this single matrix.
    """
    _check_off_slit_planes(z, cam)
    basis = cam.basis
    B = np.array([basis.v1, basis.v2]).T
    su = -cam.z2 / (z - cam.z2)
    sv = -cam.z1 / (z - cam.z1)
    return B @ np.diag([su, sv]) @ np.linalg.inv(B)


def project_segment(p0, p1, cam: XSlitCamera, samples: int = 33) -> np.ndarray:
    """Project a 3D segment as a sampled polyline, shape (samples, 2).

    Frontal-parallel segments (equal endpoint depths) project to straight
    lines; depth-spanning segments project to curved polylines.  Raises
    :class:`OnSlitPlane` with the offending parameter t if any sample depth
    hits a slit plane.
    """
    p0 = _as_xyz(p0)
    p1 = _as_xyz(p1)
    if samples < 2:
        raise InvalidInput(f"need at least 2 samples, got {samples}")
    ts = np.linspace(0.0, 1.0, samples)
    out = np.empty((samples, 2))
    for i, t in enumerate(ts):
        p = (1.0 - t) * p0 + t * p1
        try:
            out[i] = project_point(p, cam)
        except OnSlitPlane as exc:
            raise OnSlitPlane(str(exc), t=float(t)) from None
    return out


def camera_to_dict(cam: XSlitCamera) -> dict:
    """Camera as its JSON document (angles in degrees on disk)."""
    return {
        "z1": cam.z1,
        "z2": cam.z2,
        "theta1_deg": math.degrees(cam.theta1),
        "theta2_deg": math.degrees(cam.theta2),
    }


def camera_from_dict(doc: dict) -> XSlitCamera:
    """Parse the camera JSON document {"z1", "z2", "theta1_deg", "theta2_deg"}."""
    try:
        z1 = float(doc["z1"])
        z2 = float(doc["z2"])
        theta1 = math.radians(float(doc.get("theta1_deg", 0.0)))
        theta2 = math.radians(float(doc.get("theta2_deg", 90.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed camera document: {exc}") from None
    scale = max(abs(z1), abs(z2))
    degenerate = scale > 0 and abs(z1 - z2) <= REL_EPS * scale
    return XSlitCamera(z1, z2, theta1, theta2, allow_degenerate=degenerate)


def load_camera(path) -> XSlitCamera:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"camera file {path} is not valid JSON: {exc}") from None
    return camera_from_dict(doc)


def save_camera(cam: XSlitCamera, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(camera_to_dict(cam), fh, indent=2)
        fh.write("\n")
