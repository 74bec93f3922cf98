"""Depth solvers built on DDAR: shape prior, equal-distance prior, line slopes.

Two multi-object solvers recover depth without knowing the objects' true
size or aspect ratio:

* identical-shape prior: K rectangles share unknown side components
  (kappa_x, kappa_y); each observed projection contributes two linear
  equations, giving a joint linear system in (z^1..z^K, kappa_x, kappa_y);
* equal-distance prior: K objects share an unknown base ratio r_o and are
  evenly spaced in depth, reducing to a scalar solve for r_o.

Frontal-parallel lines get the same treatment through their slopes
(depth-dependent slope, DDS): a line direction decomposed on the slit
basis yields a component ratio that plays the role of an aspect ratio, so
the depth inversion applies unchanged.

Lines are carried as direction angles in [0, pi), never as raw slopes, so
vertical lines need no special casing; slopes appear only in the
compatibility form :func:`slope_to_base_ratio_printed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import XSlitCamera, decompose
from .ddar import ar_range, depth_from_ar
from .errors import (
    AmbiguousRoot,
    DegenerateCamera,
    InvalidInput,
    NoRootInBracket,
    ParallelToSlit,
    RankDeficient,
    UnresolvableAR,
)

_ROOT_TOL = 1e-12  # relative tolerance on recovered r_o
_SLIT_ALIGN_TOL = 1e-12  # unit-direction component treated as slit-parallel


@dataclass(frozen=True)
class RectObservation:
    """Projected side components of one rectangle on the slit basis."""

    kappa_u: float
    kappa_v: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa_u) and math.isfinite(self.kappa_v)):
            raise InvalidInput("rectangle observation components must be finite")

    @property
    def r_i(self) -> float:
        if self.kappa_v == 0.0:
            raise InvalidInput("kappa_v is zero; the projected aspect ratio is undefined")
        return self.kappa_u / self.kappa_v


@dataclass(frozen=True)
class ShapePriorSolution:
    """Joint depth+size recovery result for identical rectangles."""

    depths: tuple[float, ...]
    kappa_x: float
    kappa_y: float
    residual: float

    @property
    def side_lengths(self) -> tuple[float, float]:
        """Physical side lengths along the two slit directions."""
        return (abs(self.kappa_x), abs(self.kappa_y))

    @property
    def base_ar(self) -> float:
        return self.kappa_x / self.kappa_y


@dataclass(frozen=True)
class EqualDistanceSolution:
    """Recovered base ratio and evenly spaced depths."""

    r_o: float
    depths: tuple[float, ...]
    spacing_residual: float


def normalize_angle(angle: float) -> float:
    """Fold a direction angle into [0, pi)."""
    if not math.isfinite(angle):
        raise InvalidInput(f"direction angle must be finite, got {angle}")
    a = math.fmod(angle, math.pi)
    if a < 0.0:
        a += math.pi
    if a >= math.pi:  # fmod rounding at the seam
        a = 0.0
    return a


@dataclass(frozen=True)
class LineObs:
    """An observed 2D line: image-space direction angle, optional depth."""

    direction_angle: float
    depth_estimate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "direction_angle", normalize_angle(self.direction_angle))


def solve_shape_prior(observations, cam: XSlitCamera) -> ShapePriorSolution:
    """Recover per-object depths and the shared side components.

    Each observation j contributes the two equations

        kappa_u^j * z^j + z2 * kappa_x = z2 * kappa_u^j
        kappa_v^j * z^j + z1 * kappa_y = z1 * kappa_v^j

    solved jointly as one least-squares system (minimum-norm, SVD-backed)
    with rows scaled by 1/max(|coef|, 1) for conditioning.  Needs K >= 2;
    raises :class:`~xslit.errors.RankDeficient` when the system has a
    solution family instead of a point (all objects at one depth, or a
    pinhole-degenerate camera).
    """
    obs = [
        o if isinstance(o, RectObservation) else RectObservation(*o) for o in observations
    ]
    K = len(obs)
    if K < 2:
        raise InvalidInput(f"shape prior needs at least 2 rectangles, got {K}")

    A = np.zeros((2 * K, K + 2))
    b = np.zeros(2 * K)
    for j, o in enumerate(obs):
        wu = 1.0 / max(abs(o.kappa_u), 1.0)
        wv = 1.0 / max(abs(o.kappa_v), 1.0)
        A[2 * j, j] = o.kappa_u * wu
        A[2 * j, K] = cam.z2 * wu
        b[2 * j] = cam.z2 * o.kappa_u * wu
        A[2 * j + 1, j] = o.kappa_v * wv
        A[2 * j + 1, K + 1] = cam.z1 * wv
        b[2 * j + 1] = cam.z1 * o.kappa_v * wv

    x, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < K + 2:
        raise RankDeficient(
            f"shape-prior system has rank {rank} < {K + 2}; depth and scale "
            "are only determined up to a family",
            rank=int(rank),
            required=K + 2,
        )
    residual = float(np.linalg.norm(A @ x - b))
    return ShapePriorSolution(
        depths=tuple(float(v) for v in x[:K]),
        kappa_x=float(x[K]),
        kappa_y=float(x[K + 1]),
        residual=residual,
    )


def _depths_for_ro(r_i_values, r_o: float, cam: XSlitCamera):
    try:
        return [depth_from_ar(r, r_o, cam) for r in r_i_values]
    except (UnresolvableAR, InvalidInput):
        return None


def _all_valid(depths, cam: XSlitCamera) -> bool:
    if depths is None:
        return False
    floor = max(cam.z1, cam.z2)
    tol = cam.depth_tolerance()
    return all(math.isfinite(z) and z > floor + tol for z in depths)


def _feasible_segments(r_i_values, cam: XSlitCamera):
    """Open r_o intervals on which every observation maps to a depth beyond both slits."""
    poles = [cam.z1 / cam.z2 * r for r in r_i_values]
    # depths cross the far-slit boundary where z(r_o) == max(z1, z2)
    zb = max(cam.z1, cam.z2)
    boundaries = []
    for r in r_i_values:
        den = cam.z2 * (zb - cam.z1)
        if den != 0.0:
            boundaries.append(cam.z1 * r * (zb - cam.z2) / den)
    pts = sorted(set(poles + boundaries + [0.0]))
    span = max(1.0, max(abs(p) for p in pts), max(abs(r) for r in r_i_values))
    knots = [pts[0] - 10.0 * span] + pts + [pts[-1] + 10.0 * span]
    segments = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        if hi - lo <= 1e-15 * span:
            continue
        pad = 1e-9 * max(span, abs(lo), abs(hi))
        a, b = lo + pad, hi - pad
        if a >= b:
            continue
        mid = 0.5 * (a + b)
        if _all_valid(_depths_for_ro(r_i_values, mid, cam), cam):
            segments.append((a, b))
    return segments


def _bisect_secant(g, lo: float, hi: float) -> float:
    """Root of g on a sign-change bracket: bisection with secant refinement."""
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    scale = max(abs(lo), abs(hi), 1.0)
    for _ in range(200):
        if hi - lo <= _ROOT_TOL * scale:
            break
        mid = 0.5 * (lo + hi)
        gmid = g(mid)
        if gmid == 0.0:
            return mid
        if (glo < 0.0) != (gmid < 0.0):
            hi, ghi = mid, gmid
        else:
            lo, glo = mid, gmid
        # secant step, kept only if it stays inside the bracket
        if ghi != glo:
            s = hi - ghi * (hi - lo) / (ghi - glo)
            if lo < s < hi:
                gs = g(s)
                if gs == 0.0:
                    return s
                if (glo < 0.0) != (gs < 0.0):
                    hi, ghi = s, gs
                else:
                    lo, glo = s, gs
    return 0.5 * (lo + hi)


def _golden_min(f, lo: float, hi: float) -> float:
    """Golden-section minimum of a unimodal f on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    scale = max(abs(lo), abs(hi), 1.0)
    while b - a > _ROOT_TOL * scale:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def solve_equal_distance_prior(r_i_values, cam: XSlitCamera) -> EqualDistanceSolution:
    """Recover (r_o, depths) for equally spaced objects of one base ratio.

    K = 3 is solved exactly by scalar root finding on the spacing mismatch
    g(r_o) = z^1 + z^3 - 2 z^2; K > 3 minimizes the sum of squared spacing
    residuals over r_o.  The search runs on the feasible r_o intervals where
    every observation inverts to a depth beyond both slits.  Raises
    :class:`~xslit.errors.NoRootInBracket` when no solution exists there and
    :class:`~xslit.errors.AmbiguousRoot` (with all roots) when several do.
    """
    r_i = [float(r) for r in r_i_values]
    K = len(r_i)
    if K < 3:
        raise InvalidInput(f"equal-distance prior needs at least 3 objects, got {K}")
    if any(not math.isfinite(r) for r in r_i):
        raise InvalidInput("projected aspect ratios must be finite")
    for i in range(K):
        for j in range(i + 1, K):
            if abs(r_i[i] - r_i[j]) <= 1e-12 * max(abs(r_i[i]), abs(r_i[j]), 1.0):
                raise InvalidInput(
                    "projected aspect ratios must be distinct; equal ratios mean "
                    "equal depths and the spacing constraint is vacuous"
                )
    if cam.is_pinhole_degenerate:
        raise DegenerateCamera(
            "the equal-distance prior degenerates when the slits intersect"
        )

    def spacing_residuals(r_o: float):
        depths = _depths_for_ro(r_i, r_o, cam)
        if depths is None or not _all_valid(depths, cam):
            return None
        return [depths[j - 1] + depths[j + 1] - 2.0 * depths[j] for j in range(1, K - 1)]

    segments = _feasible_segments(r_i, cam)
    if not segments:
        raise NoRootInBracket("no feasible r_o interval places all objects beyond both slits")

    roots: list[float] = []
    if K == 3:

        def g(r_o: float) -> float:
            res = spacing_residuals(r_o)
            return res[0] if res is not None else math.nan

        for lo, hi in segments:
            xs = np.linspace(lo, hi, 129)
            vals = [g(x) for x in xs]
            for x0, x1, v0, v1 in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
                if math.isnan(v0) or math.isnan(v1):
                    continue
                if v0 == 0.0:
                    roots.append(float(x0))
                elif (v0 < 0.0) != (v1 < 0.0):
                    roots.append(_bisect_secant(g, float(x0), float(x1)))
            if vals and not math.isnan(vals[-1]) and vals[-1] == 0.0:
                roots.append(float(xs[-1]))
    else:

        def cost(r_o: float) -> float:
            res = spacing_residuals(r_o)
            if res is None:
                return math.inf
            return sum(v * v for v in res)

        for lo, hi in segments:
            xs = np.linspace(lo, hi, 257)
            vals = [cost(x) for x in xs]
            for i in range(1, len(xs) - 1):
                if vals[i] < math.inf and vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
                    roots.append(_golden_min(cost, float(xs[i - 1]), float(xs[i + 1])))

    # dedupe nearby candidates
    unique: list[float] = []
    for r in sorted(roots):
        if not unique or abs(r - unique[-1]) > 1e-9 * max(abs(r), abs(unique[-1]), 1.0):
            unique.append(r)
    if K > 3 and len(unique) > 1:
        # keep minima whose cost is indistinguishable from the best
        def cost_of(r):
            res = spacing_residuals(r)
            return math.inf if res is None else sum(v * v for v in res)

        costs = [cost_of(r) for r in unique]
        best = min(costs)
        tol = max(1e-18, 1e-6 * best)
        unique = [r for r, c in zip(unique, costs) if c <= best + tol]

    if not unique:
        raise NoRootInBracket(
            "spacing constraint has no solution in the feasible r_o intervals "
            f"{[(round(a, 6), round(b, 6)) for a, b in segments]}"
        )
    if len(unique) > 1:
        raise AmbiguousRoot(
            f"equal-distance prior admits {len(unique)} base ratios", roots=unique
        )

    r_o = unique[0]
    depths = _depths_for_ro(r_i, r_o, cam)
    res = spacing_residuals(r_o)
    return EqualDistanceSolution(
        r_o=float(r_o),
        depths=tuple(float(z) for z in depths),
        spacing_residual=float(max(abs(v) for v in res)) if res else 0.0,
    )


def slope_to_base_ratio(direction_angle: float, cam: XSlitCamera) -> float:
    """Component ratio of a line direction on the slit basis.

    Decomposes the unit direction (cos phi, sin phi) as a*v1 + b*v2 and
    returns a/b, the quantity that plays the role of an aspect ratio in the
    depth inversion.  Raises :class:`~xslit.errors.ParallelToSlit` when the
    direction aligns with either slit.
    """
    phi = normalize_angle(direction_angle)
    a, b = decompose((math.cos(phi), math.sin(phi)), cam.basis)
    if abs(a) < _SLIT_ALIGN_TOL or abs(b) < _SLIT_ALIGN_TOL:
        raise ParallelToSlit(
            f"direction angle {phi:.6f} rad aligns with a slit; its component "
            "ratio is zero or a pole"
        )
    return a / b


def slope_to_base_ratio_printed(slope: float, cam: XSlitCamera) -> float:
    """Closed-form variant (sin t2 - s sin t1) / (s cos t1 - cos t2).

    Compatibility surface only: it matches :func:`slope_to_base_ratio` for
    axis-aligned orthogonal slits but diverges from the basis decomposition
    for general slit angles; prefer :func:`slope_to_base_ratio`.
    """
    if not math.isfinite(slope):
        raise InvalidInput(f"slope must be finite, got {slope}")
    den = slope * math.cos(cam.theta1) - math.cos(cam.theta2)
    if abs(den) < _SLIT_ALIGN_TOL:
        raise ParallelToSlit(f"slope {slope} puts the closed form at a pole")
    return (math.sin(cam.theta2) - slope * math.sin(cam.theta1)) / den


def depth_from_slope(
    observed_angle: float, true_angle: float, cam: XSlitCamera
) -> float:
    """Depth of a frontal-parallel line from its projected direction.

    The observed direction gives the projected component ratio, the true 3D
    direction gives the base ratio, and the standard depth inversion does
    the rest.  Matching angles legitimately map to depth 0 (sensor plane).
    """
    r_i = slope_to_base_ratio(observed_angle, cam)
    r_o = slope_to_base_ratio(true_angle, cam)
    return depth_from_ar(r_i, r_o, cam)


@dataclass(frozen=True)
class ClassifiedLine:
    line: LineObs
    group: str
    depth: float


@dataclass(frozen=True)
class UnclassifiedLine:
    line: LineObs
    reason: str


@dataclass(frozen=True)
class LineClassification:
    groups: dict[str, tuple[ClassifiedLine, ...]] = field(default_factory=dict)
    unclassifiable: tuple[UnclassifiedLine, ...] = ()

    def all_classified(self) -> tuple[ClassifiedLine, ...]:
        out: list[ClassifiedLine] = []
        for members in self.groups.values():
            out.extend(members)
        return tuple(out)


DEFAULT_MANHATTAN_ANGLES = {"horizontal": 0.0, "vertical": math.pi / 2}


def classify_line_groups(
    lines,
    cam: XSlitCamera,
    manhattan_angles: dict[str, float] | None = None,
) -> LineClassification:
    """Assign each observed line to the Manhattan direction that explains it.

    A hypothesis (group name -> true 3D direction angle) explains a line
    when the implied depth lands beyond both slits, which is exactly the
    condition that the measured component ratio falls inside the attainable
    range for that group's base ratio.  When both hypotheses explain a
    line, the group whose infinite-depth ratio limit is closer to the
    measured ratio wins; exact ties and inexplicable lines are reported as
    unclassifiable rather than dropped.
    """
    angles = dict(DEFAULT_MANHATTAN_ANGLES if manhattan_angles is None else manhattan_angles)
    if not angles:
        raise InvalidInput("need at least one Manhattan direction hypothesis")
    if cam.is_pinhole_degenerate:
        raise DegenerateCamera("line slopes carry no depth when the slits intersect")

    base_ratios: dict[str, float] = {}
    for name, true_angle in angles.items():
        try:
            base_ratios[name] = slope_to_base_ratio(true_angle, cam)
        except ParallelToSlit:
            pass  # hypothesis unusable with this camera orientation
    if not base_ratios:
        raise InvalidInput(
            "every Manhattan direction aligns with a slit; rotate the camera"
        )

    groups: dict[str, list[ClassifiedLine]] = {name: [] for name in angles}
    unclassifiable: list[UnclassifiedLine] = []

    for raw in lines:
        line = raw if isinstance(raw, LineObs) else LineObs(float(raw))
        try:
            r_i = slope_to_base_ratio(line.direction_angle, cam)
        except ParallelToSlit:
            unclassifiable.append(UnclassifiedLine(line, "aligned with a slit"))
            continue

        candidates: list[tuple[str, float, float]] = []  # (group, depth, tiebreak)
        for name, r_o in base_ratios.items():
            try:
                z = depth_from_ar(r_i, r_o, cam)
            except UnresolvableAR:
                continue
            if not _all_valid([z], cam):
                continue
            limit = ar_range(r_o, cam).r_i_at_infinity
            candidates.append((name, z, abs(r_i - limit)))

        if not candidates:
            unclassifiable.append(
                UnclassifiedLine(line, "no Manhattan hypothesis yields a valid depth")
            )
            continue
        candidates.sort(key=lambda c: c[2])
        if len(candidates) > 1 and math.isclose(
            candidates[0][2], candidates[1][2], rel_tol=1e-12, abs_tol=1e-15
        ):
            unclassifiable.append(
                UnclassifiedLine(line, "hypotheses tie; assignment would be arbitrary")
            )
            continue
        name, z, _ = candidates[0]
        groups[name].append(ClassifiedLine(line, name, z))

    return LineClassification(
        groups={name: tuple(members) for name, members in groups.items()},
        unclassifiable=tuple(unclassifiable),
    )


def rect_obs_from_dicts(docs) -> list[RectObservation]:
    """Parse [{"kappa_u": ..., "kappa_v": ...}] observation arrays."""
    out = []
    for i, doc in enumerate(docs):
        try:
            out.append(RectObservation(float(doc["kappa_u"]), float(doc["kappa_v"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed rectangle observation #{i}: {exc}") from None
    return out


def line_obs_from_dicts(docs) -> list[LineObs]:
    """Parse [{"angle_deg": ...}] line observation arrays."""
    out = []
    for i, doc in enumerate(docs):
        try:
            out.append(LineObs(math.radians(float(doc["angle_deg"]))))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed line observation #{i}: {exc}") from None
    return out


def classification_to_dicts(result: LineClassification) -> list[dict]:
    """Serialize a classification as [{"angle_deg", "group", "depth"}]."""
    docs = []
    for cl in result.all_classified():
        docs.append(
            {
                "angle_deg": math.degrees(cl.line.direction_angle),
                "group": cl.group,
                "depth": cl.depth,
            }
        )
    for uc in result.unclassifiable:
        docs.append(
            {
                "angle_deg": math.degrees(uc.line.direction_angle),
                "group": None,
                "depth": None,
                "reason": uc.reason,
            }
        )
    return docs
