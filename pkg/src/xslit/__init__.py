"""Crossed-slit (XSlit) camera geometry toolkit.

An XSlit camera collects the rays that pass through two oblique slit lines
instead of a single center of projection.  That breaks the perspective
aspect-ratio invariance: projected aspect ratios and line slopes become
monotone functions of depth, so a single image carries usable depth cues.
This package implements the exact projection model, the aspect-ratio
calculus and its inversions, prior-based multi-object depth solvers,
synthetic scene simulation with measurement extraction, and sparse-to-dense
depth propagation via graph-cut MRF, plus the ``xslit`` CLI.
"""

__version__ = "0.1.0"

from .camera import (
    SlitBasis,
    SlitCoords,
    XSlitCamera,
    camera_from_dict,
    camera_to_dict,
    decompose,
    depth_scaling_matrix,
    is_pinhole_degenerate,
    load_camera,
    project_point,
    project_segment,
    recompose,
    save_camera,
)
from .ddar import (
    AnalysisConfig,
    ArRange,
    ar_forward,
    ar_range,
    depth_from_ar,
    dri_dz,
    dz_dri,
    max_discernible_depth,
    sensitivity,
)
from .errors import (
    AmbiguousRoot,
    AtSlitPole,
    ColumnOutOfRange,
    DegenerateBasis,
    DegenerateCamera,
    DegenerateEllipse,
    DegeneratePoints,
    InvalidInput,
    NoAnchors,
    NoRootInBracket,
    OnSlitPlane,
    ParallelToSlit,
    RankDeficient,
    UnresolvableAR,
    XSlitError,
)
from .inference import (
    ClassifiedLine,
    EqualDistanceSolution,
    LineClassification,
    LineObs,
    RectObservation,
    ShapePriorSolution,
    UnclassifiedLine,
    classify_line_groups,
    depth_from_slope,
    slope_to_base_ratio,
    slope_to_base_ratio_printed,
    solve_equal_distance_prior,
    solve_shape_prior,
)
from .propagation import (
    BlendResult,
    DepthAnchor,
    MrfProblem,
    SuperpixelGraph,
    blend_initial,
    default_labels,
    expand_to_pixels,
    export_depth_map,
    load_depth_map,
    mrf_energy,
    segment_superpixels,
    solve_mrf,
)
from .raster import (
    ImageSpec,
    OutOfFrameWarning,
    RasterImage,
    rasterize,
    rasterize_depth,
    read_pgm16,
    read_ppm,
    stitch_panorama,
    write_pgm16,
    write_ppm,
)
from .scene import (
    FrontalCircle,
    FrontalLine,
    FrontalRect,
    NoiseSpec,
    Scene,
    Segment3,
    VectorObservation,
    fit_line,
    load_scene,
    measure_ellipse_ar,
    perturb,
    rect_side_observation,
    render_vector,
    scene_from_dict,
    scene_to_dict,
)
