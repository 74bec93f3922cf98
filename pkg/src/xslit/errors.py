"""Exception hierarchy shared by all xslit modules.

Every error carries a stable machine-readable ``code`` so the CLI can emit
JSON diagnostics without string matching.  Validation problems (bad inputs,
unmet preconditions) derive from :class:`InvalidInput`; everything else is a
numerical/geometric failure raised by an otherwise valid computation.
"""


class XSlitError(Exception):
    """Base class for all xslit errors."""

    code = "xslit-error"


class InvalidInput(XSlitError):
    """Precondition violation: malformed or insufficient input."""

    code = "invalid-input"


class DegenerateBasis(InvalidInput):
    """Slit directions are (numerically) parallel and span no basis."""

    code = "degenerate-basis"


class OnSlitPlane(XSlitError):
    """A point to be projected lies on one of the slit planes."""

    code = "on-slit-plane"

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t  # segment parameter of the offending sample, if any


class AtSlitPole(XSlitError):
    """Depth coincides with the far-slit pole of the aspect-ratio map."""

    code = "at-slit-pole"


class DegenerateCamera(XSlitError):
    """Operation is undefined for a pinhole-degenerate camera."""

    code = "degenerate-camera"


class UnresolvableAR(XSlitError):
    """Aspect ratio sits at or beyond its infinite-depth limit."""

    code = "unresolvable-ar"


class RankDeficient(XSlitError):
    """Prior-based linear system has a solution family, not a point."""

    code = "rank-deficient"

    def __init__(self, message, rank=None, required=None):
        super().__init__(message)
        self.rank = rank
        self.required = required


class NoRootInBracket(XSlitError):
    """Scalar solve found no sign change in the feasible interval."""

    code = "no-root-in-bracket"


class AmbiguousRoot(XSlitError):
    """Scalar solve found several roots; all are reported."""

    code = "ambiguous-root"

    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = tuple(roots)


class ParallelToSlit(XSlitError):
    """Line direction aligns with a slit; its aspect ratio is 0 or a pole."""

    code = "parallel-to-slit"


class DegenerateEllipse(InvalidInput):
    """Boundary samples are too few or collinear for moment analysis."""

    code = "degenerate-ellipse"


class DegeneratePoints(InvalidInput):
    """Point set does not determine a line direction."""

    code = "degenerate-points"


class NoAnchors(XSlitError):
    """No depth anchors are available to blend or propagate from."""

    code = "no-anchors"


class ColumnOutOfRange(InvalidInput):
    """Panorama stitching selected a column outside a frame."""

    code = "column-out-of-range"

    def __init__(self, message, frame_index=None):
        super().__init__(message)
        self.frame_index = frame_index
