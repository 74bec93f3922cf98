"""Synthetic Manhattan-style scenes and measurement extraction.

Scenes are lists of labeled primitives with ground-truth depths:

* ``FrontalRect`` -- frontal-parallel parallelogram whose sides run along
  the slit directions (side components kappa_x, kappa_y on the slit basis);
* ``FrontalCircle`` -- frontal-parallel circle (projects to an ellipse);
* ``FrontalLine`` -- frontal-parallel line segment given by point,
  direction angle and length;
* ``Segment3`` -- arbitrary 3D segment (projects to a curve when its
  endpoints span depths).

:func:`render_vector` projects every primitive exactly and keeps the
ground truth attached, so solver pipelines can score themselves.
Measurement operators (:func:`measure_ellipse_ar`, :func:`fit_line`) work
on point samples and are deliberately independent of the projection code
they are used to check.  :func:`perturb` adds seeded Gaussian noise using
numpy's default PCG64 generator; identical seeds give identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .camera import SlitBasis, XSlitCamera, decompose, project_point, project_segment
from .errors import (
    DegenerateEllipse,
    DegeneratePoints,
    InvalidInput,
    OnSlitPlane,
)

Color = tuple[int, int, int]
_DEFAULT_COLOR: Color = (255, 255, 255)


@dataclass(frozen=True)
class FrontalRect:
    """Frontal-parallel parallelogram with sides kappa_x*v1 and kappa_y*v2."""

    center: tuple[float, float]
    kappa_x: float
    kappa_y: float
    depth: float
    color: Color = _DEFAULT_COLOR
    id: str = ""
    shape_group: str = ""  # rects sharing a group are identically sized

    kind = "frontal_rect"


@dataclass(frozen=True)
class FrontalCircle:
    center: tuple[float, float]
    radius: float
    depth: float
    color: Color = _DEFAULT_COLOR
    id: str = ""

    kind = "frontal_circle"

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidInput(f"circle radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class FrontalLine:
    """Frontal-parallel segment: midpoint, direction angle (radians), length."""

    point: tuple[float, float]
    direction_angle: float
    depth: float
    length: float
    color: Color = _DEFAULT_COLOR
    id: str = ""

    kind = "frontal_line"

    def __post_init__(self):
        if self.length <= 0:
            raise InvalidInput(f"line length must be positive, got {self.length}")


@dataclass(frozen=True)
class Segment3:
    p0: tuple[float, float, float]
    p1: tuple[float, float, float]
    color: Color = _DEFAULT_COLOR
    id: str = ""

    kind = "segment3"


Primitive = FrontalRect | FrontalCircle | FrontalLine | Segment3


@dataclass(frozen=True)
class Scene:
    primitives: tuple[Primitive, ...]
    extent: tuple[float, float, float, float] | None = None  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian observation noise: std in scene units plus a 64-bit seed."""

    sigma_obs: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_obs < 0:
            raise InvalidInput(f"noise sigma must be >= 0, got {self.sigma_obs}")


@dataclass(frozen=True)
class VectorObservation:
    """Projected outline of one primitive with its ground truth attached."""

    points: np.ndarray  # (N, 2) image coordinates
    primitive_id: str
    kind: str
    depth: float  # representative depth (mean for depth-spanning segments)
    color: Color
    closed: bool  # True: filled region boundary; False: stroked polyline

    def replace_points(self, points: np.ndarray) -> "VectorObservation":
        return replace(self, points=np.asarray(points, dtype=float))


def _primitive_depths(prim: Primitive) -> tuple[float, ...]:
    if isinstance(prim, Segment3):
        return (prim.p0[2], prim.p1[2])
    return (prim.depth,)


def render_vector(
    scene: Scene, cam: XSlitCamera, curve_samples: int = 256, line_samples: int = 33
):
    """Project every primitive exactly; returns a list of VectorObservation.

    Curve primitives (circles, depth-spanning segments) are sampled with
    ``curve_samples`` boundary points; frontal lines with ``line_samples``;
    parallelograms by their four corners.  Primitives sitting on a slit
    plane are collected and reported together in one
    :class:`~xslit.errors.OnSlitPlane` error.
    """
    observations: list[VectorObservation] = []
    on_slit: list[str] = []
    basis = cam.basis
    v1 = np.array(basis.v1)
    v2 = np.array(basis.v2)

    for idx, prim in enumerate(scene.primitives):
        label = prim.id or f"{prim.kind}#{idx}"
        try:
            if isinstance(prim, FrontalRect):
                c = np.array(prim.center, dtype=float)
                a = 0.5 * prim.kappa_x * v1
                b = 0.5 * prim.kappa_y * v2
                corners = [c - a - b, c + a - b, c + a + b, c - a + b]
                pts = np.array(
                    [project_point((p[0], p[1], prim.depth), cam) for p in corners]
                )
                obs = VectorObservation(pts, label, prim.kind, prim.depth, prim.color, True)
            elif isinstance(prim, FrontalCircle):
                t = np.linspace(0.0, 2.0 * math.pi, curve_samples, endpoint=False)
                ring = np.stack(
                    [
                        prim.center[0] + prim.radius * np.cos(t),
                        prim.center[1] + prim.radius * np.sin(t),
                    ],
                    axis=1,
                )
                pts = np.array(
                    [project_point((p[0], p[1], prim.depth), cam) for p in ring]
                )
                obs = VectorObservation(pts, label, prim.kind, prim.depth, prim.color, True)
            elif isinstance(prim, FrontalLine):
                h = 0.5 * prim.length
                d = np.array(
                    [math.cos(prim.direction_angle), math.sin(prim.direction_angle)]
                )
                p0 = np.array(prim.point) - h * d
                p1 = np.array(prim.point) + h * d
                pts = project_segment(
                    (p0[0], p0[1], prim.depth),
                    (p1[0], p1[1], prim.depth),
                    cam,
                    samples=line_samples,
                )
                obs = VectorObservation(pts, label, prim.kind, prim.depth, prim.color, False)
            elif isinstance(prim, Segment3):
                pts = project_segment(prim.p0, prim.p1, cam, samples=curve_samples)
                depth = 0.5 * (prim.p0[2] + prim.p1[2])
                obs = VectorObservation(pts, label, prim.kind, depth, prim.color, False)
            else:  # pragma: no cover - union is closed
                raise InvalidInput(f"unknown primitive kind {prim!r}")
        except OnSlitPlane:
            on_slit.append(label)
            continue
        observations.append(obs)

    if on_slit:
        raise OnSlitPlane(
            f"primitives lie on a slit plane of the camera: {', '.join(on_slit)}"
        )
    return observations


def measure_ellipse_ar(samples, basis: SlitBasis) -> float:
    """Aspect ratio of an ellipse boundary from second central moments.

    Sample coordinates are first decomposed on the slit basis, so the
    returned ratio is the spread along v1 over the spread along v2 -- for
    orthogonal slits this equals the classical major/minor axis ratio up to
    orientation.  Needs at least 8 non-collinear samples.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
        raise InvalidInput("ellipse samples must be a finite (N, 2) array")
    if pts.shape[0] < 8:
        raise DegenerateEllipse(f"need at least 8 boundary samples, got {pts.shape[0]}")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / pts.shape[0]
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] <= 1e-12 * max(eigvals[1], 1e-300):
        raise DegenerateEllipse("boundary samples are collinear")

    c1, s1 = basis.v1
    c2, s2 = basis.v2
    a = (pts[:, 0] * s2 - pts[:, 1] * c2) / basis.det
    b = (pts[:, 1] * c1 - pts[:, 0] * s1) / basis.det
    var_a = np.var(a)
    var_b = np.var(b)
    if var_b <= 0.0:
        raise DegenerateEllipse("no spread along the second slit direction")
    return float(math.sqrt(var_a / var_b))


def fit_line(samples) -> tuple[float, float]:
    """Total-least-squares line fit: (direction angle in [0, pi), RMS residual).

    The direction is the principal eigenvector of the sample covariance;
    the residual is the RMS orthogonal distance to the fitted line.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
        raise InvalidInput("line samples must be a finite (N, 2) array")
    if pts.shape[0] < 2:
        raise DegeneratePoints(f"need at least 2 points, got {pts.shape[0]}")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / pts.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[1] <= 0.0:
        raise DegeneratePoints("all points coincide; direction is undefined")
    direction = eigvecs[:, 1]  # eigh sorts ascending
    angle = math.atan2(direction[1], direction[0]) % math.pi
    if angle >= math.pi:
        angle = 0.0
    normal = np.array([-direction[1], direction[0]])
    residual = math.sqrt(float(np.mean((centered @ normal) ** 2)))
    return angle, residual


def perturb(observations, noise: NoiseSpec):
    """Add i.i.d. Gaussian offsets to every observation point.

    Uses ``numpy.random.default_rng`` (PCG64) seeded with ``noise.seed``;
    observation order fixes the draw order, so identical inputs give
    identical outputs.
    """
    rng = np.random.default_rng(noise.seed)
    out = []
    for obs in observations:
        offsets = rng.normal(0.0, noise.sigma_obs, size=obs.points.shape)
        out.append(obs.replace_points(obs.points + offsets))
    return out


def rect_side_observation(obs: VectorObservation, basis: SlitBasis):
    """Projected side components (kappa_u, kappa_v) from a parallelogram outline.

    Uses the first two edges of the 4-corner observation; exact for
    projected FrontalRect outlines and the natural estimator for noisy ones.
    """
    pts = np.asarray(obs.points, dtype=float)
    if pts.shape[0] != 4:
        raise InvalidInput("rectangle observations carry exactly 4 corners")
    side_u = pts[1] - pts[0]  # along v1 before projection
    side_v = pts[2] - pts[1]  # along v2 before projection
    ku = decompose(side_u, basis).a
    kv = decompose(side_v, basis).b
    return ku, kv


# --- scene JSON ------------------------------------------------------------

def _color_from(doc, default=_DEFAULT_COLOR) -> Color:
    raw = doc.get("color", default)
    try:
        r, g, b = (int(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed color {raw!r}: {exc}") from None
    for v in (r, g, b):
        if not 0 <= v <= 255:
            raise InvalidInput(f"color channel {v} outside [0, 255]")
    return (r, g, b)


def primitive_from_dict(doc: dict) -> Primitive:
    kind = doc.get("kind")
    color = _color_from(doc)
    pid = str(doc.get("id", ""))
    try:
        if kind == "frontal_rect":
            return FrontalRect(
                center=tuple(float(v) for v in doc["center"]),
                kappa_x=float(doc["kappa_x"]),
                kappa_y=float(doc["kappa_y"]),
                depth=float(doc["depth"]),
                color=color,
                id=pid,
                shape_group=str(doc.get("shape_group", "")),
            )
        if kind == "frontal_circle":
            return FrontalCircle(
                center=tuple(float(v) for v in doc["center"]),
                radius=float(doc["radius"]),
                depth=float(doc["depth"]),
                color=color,
                id=pid,
            )
        if kind == "frontal_line":
            return FrontalLine(
                point=tuple(float(v) for v in doc["point"]),
                direction_angle=math.radians(float(doc["angle_deg"])),
                depth=float(doc["depth"]),
                length=float(doc["length"]),
                color=color,
                id=pid,
            )
        if kind == "segment3":
            return Segment3(
                p0=tuple(float(v) for v in doc["p0"]),
                p1=tuple(float(v) for v in doc["p1"]),
                color=color,
                id=pid,
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed {kind} primitive: {exc}") from None
    raise InvalidInput(f"unknown primitive kind {kind!r}")


def primitive_to_dict(prim: Primitive) -> dict:
    doc: dict = {"kind": prim.kind, "id": prim.id, "color": list(prim.color)}
    if isinstance(prim, FrontalRect):
        doc.update(
            center=list(prim.center),
            kappa_x=prim.kappa_x,
            kappa_y=prim.kappa_y,
            depth=prim.depth,
        )
        if prim.shape_group:
            doc["shape_group"] = prim.shape_group
    elif isinstance(prim, FrontalCircle):
        doc.update(center=list(prim.center), radius=prim.radius, depth=prim.depth)
    elif isinstance(prim, FrontalLine):
        doc.update(
            point=list(prim.point),
            angle_deg=math.degrees(prim.direction_angle),
            depth=prim.depth,
            length=prim.length,
        )
    elif isinstance(prim, Segment3):
        doc.update(p0=list(prim.p0), p1=list(prim.p1))
    return doc


def scene_from_dict(doc: dict) -> Scene:
    prims = doc.get("primitives")
    if not isinstance(prims, list):
        raise InvalidInput('scene document needs a "primitives" array')
    extent = doc.get("extent")
    if extent is not None:
        extent = tuple(float(v) for v in extent)
        if len(extent) != 4:
            raise InvalidInput("scene extent must be [xmin, ymin, xmax, ymax]")
    return Scene(
        primitives=tuple(primitive_from_dict(p) for p in prims),
        extent=extent,
    )


def scene_to_dict(scene: Scene) -> dict:
    doc: dict = {"primitives": [primitive_to_dict(p) for p in scene.primitives]}
    if scene.extent is not None:
        doc["extent"] = list(scene.extent)
    return doc


def load_scene(path) -> tuple[Scene, dict]:
    """Load a scene file; returns (scene, raw document) so callers can read
    optional blocks like "raster"."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"scene file {path} is not valid JSON: {exc}") from None
    return scene_from_dict(doc), doc
