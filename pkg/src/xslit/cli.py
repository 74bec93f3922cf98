"""Command-line interface: project, analyze, infer, pipeline, stitch.

All angles are degrees at the CLI boundary (radians in memory).  Flag
precedence is flags > config file > defaults.  Failures print a
machine-readable JSON object on stderr and exit with 2 (validation) or 3
(numerical failure); every run that writes files also writes a
``manifest.json`` (or ``<out>.manifest.json``) next to them, atomically.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .camera import load_camera, project_point
from .ddar import AnalysisConfig, ar_forward, depth_from_ar, max_discernible_depth, sensitivity
from .errors import InvalidInput, NoAnchors, XSlitError
from .inference import (
    LineObs,
    classification_to_dicts,
    classify_line_groups,
    line_obs_from_dicts,
    rect_obs_from_dicts,
    solve_equal_distance_prior,
    solve_shape_prior,
)
from .propagation import (
    DepthAnchor,
    MrfProblem,
    blend_initial,
    default_labels,
    expand_to_pixels,
    export_depth_map,
    mrf_energy,
    segment_superpixels,
    solve_mrf,
)
from .raster import ImageSpec, rasterize, rasterize_depth, read_ppm, stitch_panorama, write_ppm
from .scene import (
    FrontalCircle,
    FrontalLine,
    FrontalRect,
    NoiseSpec,
    fit_line,
    load_scene,
    measure_ellipse_ar,
    perturb,
    rect_side_observation,
    render_vector,
)

METRICS_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
SIGMA_COLOR = 15.0  # 8-bit color units, smoothness weight falloff


def _write_json_atomic(path: Path, doc: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _write_manifest(path: Path, subcommand: str, inputs: dict, outputs: list, started: float) -> None:
    _write_json_atomic(
        path,
        {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "subcommand": subcommand,
            "tool_version": __version__,
            "inputs": inputs,
            "outputs": [str(p) for p in outputs],
            "wall_time_s": time.monotonic() - started,
        },
    )


def _parse_range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidInput(f"range must be 'start:stop:count', got {text!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
        n = int(parts[2])
    except ValueError as exc:
        raise InvalidInput(f"malformed range {text!r}: {exc}") from None
    if n < 1:
        raise InvalidInput(f"range count must be >= 1, got {n}")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def _load_json(path) -> object:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path} is not valid JSON: {exc}") from None


def _emit(text: str, out: str | None) -> list[Path]:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        return [Path(out)]
    sys.stdout.write(text)
    return []


def _observations_to_dicts(observations) -> list[dict]:
    return [
        {
            "id": obs.primitive_id,
            "kind": obs.kind,
            "depth": obs.depth,
            "closed": obs.closed,
            "color": list(obs.color),
            "points": np.asarray(obs.points).tolist(),
        }
        for obs in observations
    ]


# --- project ----------------------------------------------------------------

def cmd_project(args) -> int:
    started = time.monotonic()
    cam = load_camera(args.camera)
    if (args.point is None) == (args.scene is None):
        raise InvalidInput("project needs exactly one of --point or --scene")
    if args.point is not None:
        try:
            x, y, z = (float(v) for v in args.point.split(","))
        except ValueError as exc:
            raise InvalidInput(f"--point must be 'x,y,z', got {args.point!r}: {exc}") from None
        uv = project_point((x, y, z), cam)
        text = json.dumps({"u": uv[0], "v": uv[1]}) + "\n"
        inputs = {"camera": str(args.camera), "point": args.point}
    else:
        scene, _ = load_scene(args.scene)
        observations = render_vector(scene, cam)
        text = json.dumps(_observations_to_dicts(observations), indent=2) + "\n"
        inputs = {"camera": str(args.camera), "scene": str(args.scene)}
    outputs = _emit(text, args.out)
    if outputs:
        _write_manifest(
            outputs[0].with_name(outputs[0].name + ".manifest.json"),
            "project",
            inputs,
            outputs,
            started,
        )
    return 0


# --- analyze ----------------------------------------------------------------

def cmd_analyze(args) -> int:
    started = time.monotonic()
    cam = load_camera(args.camera)
    if (args.z_range is None) == (args.epsilon_sweep is None):
        raise InvalidInput("analyze needs exactly one of --z-range or --epsilon-sweep")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if args.z_range is not None:
        writer.writerow(["z", "r_i", "sensitivity"])
        for z in _parse_range(args.z_range):
            writer.writerow([repr(float(z)), repr(float(ar_forward(z, args.r_o, cam))),
                             repr(float(sensitivity(z, args.r_o, cam)))])
        inputs = {"camera": str(args.camera), "r_o": args.r_o, "z_range": args.z_range}
    else:
        header = ["epsilon", "z_max"]
        if args.compat_z_max:
            header.append("z_max_literal")
        writer.writerow(header)
        for eps in _parse_range(args.epsilon_sweep):
            cfg = AnalysisConfig(epsilon=float(eps), image_extent=args.image_extent)
            row = [repr(float(eps)), repr(float(max_discernible_depth(args.r_o, cfg, cam)))]
            if args.compat_z_max:
                row.append(
                    repr(float(max_discernible_depth(args.r_o, cfg, cam, literal_formula=True)))
                )
            writer.writerow(row)
        inputs = {
            "camera": str(args.camera),
            "r_o": args.r_o,
            "epsilon_sweep": args.epsilon_sweep,
            "image_extent": args.image_extent,
        }
    outputs = _emit(buf.getvalue(), args.out)
    if outputs:
        _write_manifest(
            outputs[0].with_name(outputs[0].name + ".manifest.json"),
            "analyze",
            inputs,
            outputs,
            started,
        )
    return 0


# --- infer ------------------------------------------------------------------

def _equal_distance_ratios(docs) -> list[float]:
    ratios = []
    for i, doc in enumerate(docs):
        if isinstance(doc, (int, float)):
            ratios.append(float(doc))
        elif isinstance(doc, dict) and "r_i" in doc:
            ratios.append(float(doc["r_i"]))
        elif isinstance(doc, dict) and {"kappa_u", "kappa_v"} <= doc.keys():
            kv = float(doc["kappa_v"])
            if kv == 0.0:
                raise InvalidInput(f"observation #{i} has kappa_v = 0; no aspect ratio")
            ratios.append(float(doc["kappa_u"]) / kv)
        else:
            raise InvalidInput(f"cannot read an aspect ratio from observation #{i}")
    return ratios


def cmd_infer(args) -> int:
    started = time.monotonic()
    cam = load_camera(args.camera)
    docs = _load_json(args.obs)
    if not isinstance(docs, list):
        raise InvalidInput("observation file must hold a JSON array")

    if args.mode == "shape-prior":
        solution = solve_shape_prior(rect_obs_from_dicts(docs), cam)
        doc = {
            "depths": list(solution.depths),
            "kappa_x": solution.kappa_x,
            "kappa_y": solution.kappa_y,
            "base_ar": solution.base_ar,
            "side_lengths": list(solution.side_lengths),
            "residual": solution.residual,
        }
    elif args.mode == "equal-distance":
        solution = solve_equal_distance_prior(_equal_distance_ratios(docs), cam)
        doc = {
            "r_o": solution.r_o,
            "depths": list(solution.depths),
            "spacing_residual": solution.spacing_residual,
        }
    else:  # lines
        manhattan = None
        if args.manhattan:
            try:
                h_deg, v_deg = (float(v) for v in args.manhattan.split(","))
            except ValueError as exc:
                raise InvalidInput(
                    f"--manhattan must be 'h_deg,v_deg', got {args.manhattan!r}: {exc}"
                ) from None
            manhattan = {
                "horizontal": math.radians(h_deg),
                "vertical": math.radians(v_deg),
            }
        result = classify_line_groups(line_obs_from_dicts(docs), cam, manhattan)
        doc = {"lines": classification_to_dicts(result)}

    text = json.dumps(doc, indent=2) + "\n"
    outputs = _emit(text, args.out)
    if outputs:
        _write_manifest(
            outputs[0].with_name(outputs[0].name + ".manifest.json"),
            "infer",
            {"camera": str(args.camera), "obs": str(args.obs), "mode": args.mode},
            outputs,
            started,
        )
    return 0


# --- pipeline ---------------------------------------------------------------

def _image_spec_from(doc: dict, args) -> ImageSpec:
    raster_doc = doc.get("raster", {}) if isinstance(doc, dict) else {}
    width = args.width or int(raster_doc.get("width", 640))
    height = args.height or int(raster_doc.get("height", 480))
    scale = raster_doc.get("scale")
    center = raster_doc.get("center")
    return ImageSpec(
        width,
        height,
        scale=float(scale) if scale is not None else None,
        center=tuple(float(v) for v in center) if center is not None else None,
    )


def _manhattan_from(doc: dict) -> dict[str, float] | None:
    block = doc.get("manhattan_angles_deg") if isinstance(doc, dict) else None
    if block is None:
        return None
    return {str(name): math.radians(float(deg)) for name, deg in block.items()}


def _measure_anchors(scene, cam, observations, manhattan):
    """Measured depth per primitive: circles by ellipse AR, lines by slope
    classification, identically sized rect groups by the shape prior.

    Returns (records, failures); records are dicts carrying the ground
    truth alongside the estimate.
    """
    basis = cam.basis
    by_id = {obs.primitive_id: obs for obs in observations}
    labels = {}
    for idx, prim in enumerate(scene.primitives):
        labels[prim.id or f"{prim.kind}#{idx}"] = prim

    records = []
    failures = []

    line_ids = []
    line_obs = []
    for label, prim in labels.items():
        obs = by_id.get(label)
        if obs is None:
            continue
        if isinstance(prim, FrontalCircle):
            try:
                r_i = measure_ellipse_ar(obs.points, basis)
                est = depth_from_ar(r_i, 1.0, cam)
            except XSlitError as exc:
                failures.append({"id": label, "stage": "ellipse", "error": exc.code})
                continue
            records.append(_anchor_record(label, prim, obs, est))
        elif isinstance(prim, FrontalLine):
            try:
                angle, _ = fit_line(obs.points)
            except XSlitError as exc:
                failures.append({"id": label, "stage": "fit-line", "error": exc.code})
                continue
            line_ids.append(label)
            line_obs.append(angle)

    if line_obs:
        line_objects = [LineObs(angle) for angle in line_obs]
        result = classify_line_groups(line_objects, cam, manhattan)
        assignment = {}
        for name, members in result.groups.items():
            for member in members:
                assignment[id(member.line)] = (name, member.depth)
        for label, obj in zip(line_ids, line_objects):
            hit = assignment.get(id(obj))
            if hit is not None:
                name, est = hit
                records.append(_anchor_record(label, labels[label], by_id[label], est, group=name))
            else:
                failures.append({"id": label, "stage": "classify", "error": "unclassifiable"})

    groups: dict[str, list[str]] = {}
    for label, prim in labels.items():
        if isinstance(prim, FrontalRect) and prim.shape_group and label in by_id:
            groups.setdefault(prim.shape_group, []).append(label)
    for group_name, members in sorted(groups.items()):
        if len(members) < 2:
            failures.append(
                {"id": group_name, "stage": "shape-prior", "error": "needs-2-members"}
            )
            continue
        try:
            rect_obs = [rect_side_observation(by_id[m], basis) for m in members]
            solution = solve_shape_prior(rect_obs, cam)
        except XSlitError as exc:
            failures.append({"id": group_name, "stage": "shape-prior", "error": exc.code})
            continue
        for label, est in zip(members, solution.depths):
            records.append(_anchor_record(label, labels[label], by_id[label], est))

    return records, failures


def _anchor_record(label, prim, obs, est, group=None):
    centroid = np.asarray(obs.points, float).mean(axis=0)
    rec = {
        "id": label,
        "kind": prim.kind,
        "true_depth": float(prim.depth),
        "est_depth": float(est),
        "rel_err": abs(float(est) - prim.depth) / max(abs(prim.depth), 1e-300),
        "centroid_world": [float(centroid[0]), float(centroid[1])],
    }
    if group is not None:
        rec["group"] = group
    return rec


def cmd_pipeline(args) -> int:
    started = time.monotonic()
    cam = load_camera(args.camera)
    scene, doc = load_scene(args.scene)
    if not scene.primitives:
        raise InvalidInput("pipeline needs a scene with at least one primitive")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    exact = render_vector(scene, cam)
    noisy = perturb(exact, NoiseSpec(sigma_obs=args.noise_sigma, seed=args.seed))
    spec = _image_spec_from(doc, args).fitted(exact)

    color = rasterize(noisy, spec)
    gt_depth = rasterize_depth(exact, spec)

    records, failures = _measure_anchors(scene, cam, noisy, _manhattan_from(doc))
    if not records:
        raise NoAnchors("no primitive produced a usable depth measurement")

    graph = segment_superpixels(color.pixels, k=args.seg_k, min_size=args.seg_min_size)
    anchors = []
    kept_records = []
    h, w = graph.labels.shape
    for rec in records:
        col, row = spec.world_to_pixel(np.array(rec["centroid_world"])).tolist()
        irow, icol = int(row), int(col)
        if not (0 <= irow < h and 0 <= icol < w):
            failures.append({"id": rec["id"], "stage": "anchor", "error": "outside-frame"})
            continue
        anchors.append(DepthAnchor(depth=rec["est_depth"], pixel=(irow, icol)))
        kept_records.append(rec)
    if not anchors:
        raise NoAnchors("every measured anchor fell outside the frame")

    blend = blend_initial(graph, anchors, sigma_g=args.sigma_g)
    labels = default_labels([a.depth for a in anchors], count=args.labels)
    color_diff = np.linalg.norm(
        graph.mean_color[graph.edges[:, 0]] - graph.mean_color[graph.edges[:, 1]], axis=1
    )
    weights = graph.boundary_length * np.exp(-(color_diff**2) / (2.0 * SIGMA_COLOR**2))
    problem = MrfProblem(
        v_init=blend.v_init,
        edges=graph.edges,
        weights=weights,
        labels=labels,
        lam=args.smoothness,
        data_weight=np.where(blend.low_confidence, 0.0, 1.0),
    )
    u = solve_mrf(problem)
    depth_map = expand_to_pixels(graph, u)

    image_path = out_dir / "image.ppm"
    depth_path = out_dir / "depth.pgm"
    sidecar_path = out_dir / "depth.json"
    metrics_path = out_dir / "metrics.json"
    write_ppm(image_path, color.pixels)
    export_depth_map(depth_map, depth_path, sidecar_path)

    gt = gt_depth.pixels.astype(float)
    valid = np.isfinite(gt)
    rel = np.abs(depth_map[valid] - gt[valid]) / np.maximum(np.abs(gt[valid]), 1e-300)
    metrics = {
        "schema_version": METRICS_SCHEMA_VERSION,
        "anchors": kept_records,
        "failures": failures,
        "dense": {
            "gt_coverage": float(valid.mean()),
            "frac_within_5pct": float((rel <= 0.05).mean()) if rel.size else None,
            "mean_abs_rel_err": float(rel.mean()) if rel.size else None,
        },
        "n_regions": graph.n_regions,
        "n_labels": int(labels.shape[0]),
        "energy": mrf_energy(problem, u),
    }
    _write_json_atomic(metrics_path, metrics)

    outputs = [image_path, depth_path, sidecar_path, metrics_path]
    _write_manifest(
        out_dir / "manifest.json",
        "pipeline",
        {
            "camera": str(args.camera),
            "scene": str(args.scene),
            "noise_sigma": args.noise_sigma,
            "seed": args.seed,
            "labels": args.labels,
            "seg_k": args.seg_k,
            "seg_min_size": args.seg_min_size,
            "smoothness": args.smoothness,
            "sigma_g": args.sigma_g,
        },
        outputs,
        started,
    )
    return 0


# --- stitch -----------------------------------------------------------------

def _natural_key(name: str):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", name)]


def cmd_stitch(args) -> int:
    started = time.monotonic()
    frames_dir = Path(args.frames)
    if not frames_dir.is_dir():
        raise InvalidInput(f"--frames {frames_dir} is not a directory")
    paths = sorted(frames_dir.glob("*.ppm"), key=lambda p: _natural_key(p.name))
    if not paths:
        raise InvalidInput(f"no .ppm frames found in {frames_dir}")
    frames = [read_ppm(p) for p in paths]
    pano = stitch_panorama(frames, args.start, args.rate)
    write_ppm(args.out, pano.pixels)
    out = Path(args.out)
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "stitch",
        {
            "frames": [str(p) for p in paths],
            "start": args.start,
            "rate": args.rate,
        },
        [out],
        started,
    )
    return 0


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xslit",
        description="Crossed-slit camera toolkit: projection, depth-from-AR "
        "analysis, prior-based depth solvers, synthetic scenes, and dense "
        "depth reconstruction.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("project", help="project a point or a whole scene")
    p.add_argument("--camera", required=True)
    p.add_argument("--point", help="x,y,z in scene units")
    p.add_argument("--scene", help="scene JSON file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("analyze", help="emit AR/sensitivity or depth-range CSV curves")
    p.add_argument("--camera", required=True)
    p.add_argument("--r-o", type=float, default=1.0, dest="r_o")
    p.add_argument("--z-range", help="start:stop:count depth sweep")
    p.add_argument("--epsilon-sweep", help="start:stop:count epsilon sweep")
    p.add_argument("--image-extent", type=int, help="pixels; floor for epsilon")
    p.add_argument("--compat-z-max", action="store_true",
                   help="also emit the literal closed-form depth-range column")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("infer", help="run a depth solver on observation JSON")
    p.add_argument("--mode", required=True, choices=["shape-prior", "equal-distance", "lines"])
    p.add_argument("--obs", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--manhattan", help="h_deg,v_deg true 3D line directions")
    p.add_argument("--out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("pipeline", help="render, measure, infer, and densify depth")
    p.add_argument("--scene", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--labels", type=int, default=64)
    p.add_argument("--seg-k", type=float, default=500.0)
    p.add_argument("--seg-min-size", type=int, default=20)
    p.add_argument("--smoothness", type=float, default=0.5)
    p.add_argument("--sigma-g", type=float, default=30.0)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("stitch", help="stitch linearly varying columns from frames")
    p.add_argument("--frames", required=True, help="directory of numbered .ppm frames")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stitch)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInput as exc:
        _print_error(exc.code, str(exc), 2)
        return 2
    except OSError as exc:
        _print_error("io-error", str(exc), 2)
        return 2
    except XSlitError as exc:
        _print_error(exc.code, str(exc), 3)
        return 3


def _print_error(code: str, message: str, exit_code: int) -> None:
    json.dump({"error": code, "message": message, "exit_code": exit_code}, sys.stderr)
    sys.stderr.write("\n")


if __name__ == "__main__":
    sys.exit(main())
