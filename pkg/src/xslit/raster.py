"""Deterministic rasterization and image I/O.

Rasterization is intentionally plain: even-odd scanline fill sampled at
pixel centers, 1-pixel DDA strokes, no anti-aliasing, painter's ordering
by primitive depth (far to near).  Given identical inputs the output bytes
are identical, which is what the golden-file and determinism tests pin.

Images travel as binary netpbm files: P6 PPM for 8-bit RGB, P5 PGM with
maxval 65535 (big-endian) for 16-bit grayscale depth maps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ColumnOutOfRange, InvalidInput


class OutOfFrameWarning(UserWarning):
    """A primitive's projection falls partly or fully outside the image."""


@dataclass(frozen=True)
class ImageSpec:
    """Raster geometry: size in pixels plus the world-to-pixel map.

    ``scale`` is pixels per scene unit; ``center`` is the world point mapped
    to the image center.  Leave both unset to auto-fit the observations
    being rasterized (5% margin, aspect preserved).
    """

    width: int
    height: int
    scale: float | None = None
    center: tuple[float, float] | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidInput("image dimensions must be positive")
        if self.scale is not None and self.scale <= 0:
            raise InvalidInput("pixels-per-unit scale must be positive")

    def fitted(self, observations) -> "ImageSpec":
        """Resolve scale/center against observations when unset."""
        if self.scale is not None and self.center is not None:
            return self
        pts = np.concatenate([np.asarray(o.points, float) for o in observations])
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        center = self.center if self.center is not None else tuple(0.5 * (lo + hi))
        scale = self.scale
        if scale is None:
            span = np.maximum(hi - lo, 1e-12)
            scale = 0.9 * min(self.width / span[0], self.height / span[1])
        return ImageSpec(self.width, self.height, float(scale), tuple(map(float, center)))

    def world_to_pixel(self, xy) -> np.ndarray:
        """Map world xy to continuous pixel (col, row); y points up in world."""
        if self.scale is None or self.center is None:
            raise InvalidInput("image spec is not fitted; call fitted() first")
        xy = np.asarray(xy, dtype=float)
        col = (xy[..., 0] - self.center[0]) * self.scale + 0.5 * self.width
        row = (self.center[1] - xy[..., 1]) * self.scale + 0.5 * self.height
        return np.stack([col, row], axis=-1)

    def pixel_to_world(self, colrow) -> np.ndarray:
        cr = np.asarray(colrow, dtype=float)
        x = (cr[..., 0] - 0.5 * self.width) / self.scale + self.center[0]
        y = self.center[1] - (cr[..., 1] - 0.5 * self.height) / self.scale
        return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class RasterImage:
    """Pixel data plus the world-to-pixel map it was rendered with."""

    pixels: np.ndarray  # (H, W, 3) uint8 or (H, W) uint16
    spec: ImageSpec

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def _fill_polygon(target: np.ndarray, poly_px: np.ndarray, value) -> bool:
    """Even-odd scanline fill sampled at pixel centers; True if any pixel set."""
    h, w = target.shape[:2]
    ys = poly_px[:, 1]
    row_lo = max(0, int(math.floor(ys.min() - 0.5)))
    row_hi = min(h - 1, int(math.ceil(ys.max())))
    x0 = poly_px[:, 0]
    y0 = poly_px[:, 1]
    x1 = np.roll(x0, -1)
    y1 = np.roll(y0, -1)
    touched = False
    for row in range(row_lo, row_hi + 1):
        yc = row + 0.5
        crosses = (y0 <= yc) != (y1 <= yc)
        if not crosses.any():
            continue
        xs = x0[crosses] + (yc - y0[crosses]) * (x1[crosses] - x0[crosses]) / (
            y1[crosses] - y0[crosses]
        )
        xs.sort()
        for xa, xb in zip(xs[0::2], xs[1::2]):
            ca = max(0, int(math.ceil(xa - 0.5)))
            cb = min(w - 1, int(math.ceil(xb - 0.5)) - 1)
            if cb >= ca:
                target[row, ca : cb + 1] = value
                touched = True
    return touched


def _stroke_polyline(target: np.ndarray, pts_px: np.ndarray, value) -> bool:
    """1-pixel DDA stroke; True if any pixel set."""
    h, w = target.shape[:2]
    touched = False
    for p, q in zip(pts_px[:-1], pts_px[1:]):
        steps = int(max(abs(q[0] - p[0]), abs(q[1] - p[1]))) + 1
        ts = np.linspace(0.0, 1.0, steps + 1)
        cols = np.floor(p[0] + ts * (q[0] - p[0])).astype(int)
        rows = np.floor(p[1] + ts * (q[1] - p[1])).astype(int)
        ok = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
        if ok.any():
            target[rows[ok], cols[ok]] = value
            touched = True
    return touched


def _paint(observations, spec: ImageSpec, target: np.ndarray, value_of) -> None:
    ordered = sorted(
        enumerate(observations), key=lambda io: (-io[1].depth, io[0])
    )  # far to near; index breaks depth ties deterministically
    h, w = target.shape[:2]
    for _, obs in ordered:
        px = spec.world_to_pixel(obs.points)
        inside = (
            (px[:, 0] >= 0) & (px[:, 0] < w) & (px[:, 1] >= 0) & (px[:, 1] < h)
        )
        if not inside.all():
            warnings.warn(
                f"observation {obs.primitive_id!r} extends outside the frame",
                OutOfFrameWarning,
                stacklevel=3,
            )
        if obs.closed and px.shape[0] >= 3:
            _fill_polygon(target, px, value_of(obs))
        else:
            _stroke_polyline(target, px, value_of(obs))


def rasterize(observations, spec: ImageSpec, background: tuple[int, int, int] = (0, 0, 0)):
    """Render vector observations to an RGB raster (painter's order by depth)."""
    if not observations:
        raise InvalidInput("nothing to rasterize: empty observation list")
    spec = spec.fitted(observations)
    img = np.empty((spec.height, spec.width, 3), dtype=np.uint8)
    img[:] = np.asarray(background, dtype=np.uint8)
    _paint(observations, spec, img, lambda obs: np.asarray(obs.color, dtype=np.uint8))
    return RasterImage(img, spec)


def rasterize_depth(observations, spec: ImageSpec) -> RasterImage:
    """Render ground-truth depth per pixel (float32, NaN where nothing projects)."""
    if not observations:
        raise InvalidInput("nothing to rasterize: empty observation list")
    spec = spec.fitted(observations)
    depth = np.full((spec.height, spec.width), np.nan, dtype=np.float32)
    _paint(observations, spec, depth, lambda obs: np.float32(obs.depth))
    return RasterImage(depth, spec)


# --- netpbm I/O -------------------------------------------------------------

def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise InvalidInput("PPM writer needs an (H, W, 3) uint8 array")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def write_pgm16(path, gray: np.ndarray) -> None:
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint16:
        raise InvalidInput("PGM writer needs an (H, W) uint16 array")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(gray.astype(">u2").tobytes())


def _read_pnm_header(fh, magic: bytes):
    if fh.read(2) != magic:
        raise InvalidInput(f"not a {magic.decode()} netpbm file")

    def next_token() -> bytes:
        tok = b""
        while True:
            ch = fh.read(1)
            if ch == b"":
                raise InvalidInput("truncated netpbm header")
            if ch == b"#":
                while ch not in (b"\n", b""):
                    ch = fh.read(1)
                continue
            if ch.isspace():
                if tok:
                    return tok
                continue
            tok += ch

    w = int(next_token())
    h = int(next_token())
    maxval = int(next_token())
    return w, h, maxval


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        w, h, maxval = _read_pnm_header(fh, b"P6")
        if maxval != 255:
            raise InvalidInput(f"unsupported PPM maxval {maxval}")
        data = fh.read(w * h * 3)
    if len(data) != w * h * 3:
        raise InvalidInput("truncated PPM pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as fh:
        w, h, maxval = _read_pnm_header(fh, b"P5")
        if maxval != 65535:
            raise InvalidInput(f"unsupported PGM maxval {maxval}")
        data = fh.read(w * h * 2)
    if len(data) != w * h * 2:
        raise InvalidInput("truncated PGM pixel data")
    return np.frombuffer(data, dtype=">u2").reshape(h, w).astype(np.uint16)


# --- panorama stitching -----------------------------------------------------

def stitch_panorama(frames, column_start: float, rate: float) -> RasterImage:
    """Build a panorama by taking column round(start + rate*f) from frame f.

    Output width equals the frame count; all frames must share dimensions
    and every selected column must exist.  ``rate = 0`` is the pushbroom
    special case (same column from every frame).
    """
    arrays = [f.pixels if isinstance(f, RasterImage) else np.asarray(f) for f in frames]
    if not arrays:
        raise InvalidInput("no frames to stitch")
    shape = arrays[0].shape
    for i, arr in enumerate(arrays):
        if arr.shape != shape:
            raise InvalidInput(
                f"frame {i} has shape {arr.shape}, expected {shape} like frame 0"
            )
    h, w = shape[0], shape[1]
    out = np.empty((h, len(arrays)) + shape[2:], dtype=arrays[0].dtype)
    for f, arr in enumerate(arrays):
        col = int(math.floor(column_start + rate * f + 0.5))
        if not 0 <= col < w:
            raise ColumnOutOfRange(
                f"frame {f} selects column {col} outside [0, {w})", frame_index=f
            )
        out[:, f] = arr[:, col]
    spec = ImageSpec(len(arrays), h, scale=1.0, center=(0.0, 0.0))
    return RasterImage(out, spec)
