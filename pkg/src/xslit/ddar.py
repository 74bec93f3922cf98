"""Depth-dependent aspect ratio (DDAR) calculus.

A frontal-parallel object with base aspect ratio ``r_o`` (ratio of its side
components on the slit basis) projects in an XSlit camera to aspect ratio

    r_i = z2 * (z - z1) / (z1 * (z - z2)) * r_o,

so unlike the perspective case the observed ratio encodes depth.  This
module implements the forward map, its inverse, both derivatives, the
attainable AR range, measurement sensitivity, and the maximum discernible
depth for a given AR resolution.

Pinhole-degenerate cameras (z1 == z2) keep ``r_i == r_o`` at every depth:
forward-direction operations return the degenerate values (r_o, zero
derivative, zero sensitivity) while inversions raise
:class:`~xslit.errors.DegenerateCamera`, since the ratio then carries no
depth information.  Whether a camera is degenerate is visible on
``cam.is_pinhole_degenerate``.

Monotonicity claims (AR strictly decreasing in depth, and the classical
min/max labels in :func:`ar_range`) hold for the canonical configuration
0 < z1 < z2 with r_o > 0 and z > z2; for general signed slit depths the
derivative sign is reported by :func:`dri_dz` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .camera import REL_EPS, XSlitCamera
from .errors import AtSlitPole, DegenerateCamera, InvalidInput, OnSlitPlane, UnresolvableAR


@dataclass(frozen=True)
class AnalysisConfig:
    """AR resolution model: smallest discernible AR change ``epsilon``.

    When only an image extent ``L`` (pixels) is supplied, epsilon defaults
    to its lower bound 1/L; an explicit epsilon below 1/L is rejected.
    """

    epsilon: float | None = None
    image_extent: int | None = None

    def __post_init__(self):
        eps = self.epsilon
        if self.image_extent is not None and self.image_extent <= 0:
            raise InvalidInput("image extent must be positive")
        if eps is None:
            if self.image_extent is None:
                raise InvalidInput("epsilon must be explicit when no image extent is given")
            eps = 1.0 / self.image_extent
            object.__setattr__(self, "epsilon", eps)
        if not math.isfinite(eps) or eps <= 0:
            raise InvalidInput(f"epsilon must be positive and finite, got {eps}")
        if self.image_extent is not None and eps < 1.0 / self.image_extent:
            raise InvalidInput(
                f"epsilon {eps} is below the 1/L resolution floor for L={self.image_extent}"
            )


class ArRange(NamedTuple):
    """Attainable projected-AR interval for a fixed camera and base ratio."""

    r_i_at_infinity: float  # (z2/z1) * r_o, approached as z -> inf
    pole_depth: float  # z2; |r_i| grows without bound as z -> z2


def _check_ratio(name: str, value: float, nonzero: bool = True) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidInput(f"{name} must be finite, got {value}")
    if nonzero and value == 0.0:
        raise InvalidInput(f"{name} must be nonzero")
    return value


def ar_forward(z: float, r_o: float, cam: XSlitCamera) -> float:
    """Projected aspect ratio of a frontal-parallel object at depth z.

    Degenerate cameras return r_o unchanged.  Raises
    :class:`~xslit.errors.AtSlitPole` at the far-slit pole z == z2 and
    :class:`~xslit.errors.OnSlitPlane` at z == z1, where the object is
    unobservable.
    """
    r_o = _check_ratio("r_o", r_o)
    if cam.is_pinhole_degenerate:
        return r_o
    tol = cam.depth_tolerance()
    if abs(z - cam.z2) <= tol:
        raise AtSlitPole(f"aspect ratio diverges at the far-slit depth z2={cam.z2}")
    if abs(z - cam.z1) <= tol:
        raise OnSlitPlane(f"depth {z} lies on slit 1; projection is undefined")
    return cam.z2 * (z - cam.z1) / (cam.z1 * (z - cam.z2)) * r_o


def depth_from_ar(r_i: float, r_o: float, cam: XSlitCamera) -> float:
    """Invert the aspect-ratio map: depth at which r_o projects to r_i.

    ``r_i == r_o`` legitimately maps to z = 0, the sensor plane.  Raises
    :class:`~xslit.errors.UnresolvableAR` when r_i sits at the
    infinite-depth limit (z2/z1)*r_o, and
    :class:`~xslit.errors.DegenerateCamera` for pinhole-degenerate cameras.
    """
    r_i = _check_ratio("r_i", r_i, nonzero=False)
    r_o = _check_ratio("r_o", r_o)
    if cam.is_pinhole_degenerate:
        raise DegenerateCamera(
            "aspect ratio carries no depth information when the slits intersect"
        )
    denom = cam.z1 * r_i - cam.z2 * r_o
    if abs(denom) <= REL_EPS * abs(cam.z2 * r_o):
        raise UnresolvableAR(
            f"aspect ratio {r_i} is at the infinite-depth limit {cam.z2 / cam.z1 * r_o}"
        )
    return cam.z1 * cam.z2 * (r_i - r_o) / denom


def dz_dri(r_i: float, r_o: float, cam: XSlitCamera) -> float:
    """Derivative of recovered depth with respect to the projected AR."""
    r_i = _check_ratio("r_i", r_i, nonzero=False)
    r_o = _check_ratio("r_o", r_o)
    if cam.is_pinhole_degenerate:
        return 0.0
    denom = cam.z1 * r_i - cam.z2 * r_o
    if abs(denom) <= REL_EPS * abs(cam.z2 * r_o):
        raise UnresolvableAR(
            f"depth derivative diverges at the infinite-depth limit ratio {r_i}"
        )
    return cam.z1 * cam.z2 * (cam.z1 - cam.z2) * r_o / denom**2


def dri_dz(z: float, r_o: float, cam: XSlitCamera) -> float:
    """Signed derivative of the projected AR with respect to depth."""
    r_o = _check_ratio("r_o", r_o)
    if cam.is_pinhole_degenerate:
        return 0.0
    if abs(z - cam.z2) <= cam.depth_tolerance():
        raise AtSlitPole(f"AR derivative diverges at the far-slit depth z2={cam.z2}")
    return cam.z2 * (cam.z1 - cam.z2) * r_o / (cam.z1 * (z - cam.z2) ** 2)


def sensitivity(z: float, r_o: float, cam: XSlitCamera) -> float:
    """|d r_i / d z|: how fast the observed AR moves per unit depth."""
    return abs(dri_dz(z, r_o, cam))


def ar_range(r_o: float, cam: XSlitCamera) -> ArRange:
    """Attainable projected-AR interval: infinite-depth limit and pole depth."""
    r_o = _check_ratio("r_o", r_o)
    return ArRange(cam.z2 / cam.z1 * r_o, cam.z2)


def max_discernible_depth(
    r_o: float,
    cfg: AnalysisConfig,
    cam: XSlitCamera,
    literal_formula: bool = False,
) -> float:
    """Largest depth whose AR differs from the infinite-depth limit by epsilon.

    Computed by substituting r_i = (z2/z1)*r_o + epsilon into the depth
    inversion, which simplifies to ``z2 * (1 + (z2 - z1) * r_o / (z1 * eps))``.
    ``literal_formula=True`` instead evaluates the compatibility form
    ``(z2/z1) * (1 + (z2 - z1) * r_o / eps)``; the two agree only when
    z1 == 1 (or in the degenerate z1 == z2 case) and the literal form is
    provided for comparison output only.
    """
    r_o = _check_ratio("r_o", r_o)
    eps = cfg.epsilon
    if literal_formula:
        return cam.z2 / cam.z1 * (1.0 + (cam.z2 - cam.z1) * r_o / eps)
    return cam.z2 * (1.0 + (cam.z2 - cam.z1) * r_o / (cam.z1 * eps))
