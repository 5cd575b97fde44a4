"""Command-line front end: reproducible pipelines over the library.

Every run writes ``manifest.json`` into its output directory recording
the tool version and the fully resolved options (sorted keys, no
timestamps), so rerunning the same subcommand with
``--config <manifest.json>`` reproduces the outputs bit-exactly.
Config files are plain ``key=value`` lines (``#`` comments allowed) or a
previous manifest; explicit flags override file values.

Exit codes: 0 success; 2 config error (bad flags or config file);
3 data error (missing or malformed files, inputs failing the
consistency gate, steps exceeding the transport reach); 4 numerical
failure (demanded convergence not reached, degenerate geometry).
Errors print a single line ``ofmkit: <category>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

import numpy as np

from . import __version__
from .errors import NumericalError
from .flow import FlowConfig, flow_pair
from .formats import (
    FormatError,
    read_flo,
    read_image,
    read_matrix_csv,
    write_flo,
    write_image,
    write_matrix_csv,
)
from .graph import ambient_metric, build_graph, flow_metric
from .image import FlowField, Image
from .manifold import (
    TemplateSet,
    embed,
    estimate_parameter,
    interpolate,
    karcher_mean,
    linear_blend,
    procrustes_residual,
)
from .scenes import crop_image, disk_image, make_texture, textured_disk
from . import curves as cv

_CATEGORY = {2: "config-error", 3: "data-error", 4: "numerical-error"}


class CliError(Exception):
    """Error with a fixed exit code and stderr category."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse that reports problems through the exit-code contract."""

    def error(self, message: str):  # noqa: A003 - argparse API
        raise CliError(2, message)


def _emit(code: int, message: str) -> None:
    one_line = " ".join(str(message).split())
    print(f"ofmkit: {_CATEGORY.get(code, 'error')}: {one_line}", file=sys.stderr)


# --------------------------------------------------------------------------
# small shared helpers


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    return float(parts[0]), float(parts[1])


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _flow_config(args: argparse.Namespace) -> FlowConfig:
    try:
        return FlowConfig(
            alpha=args.alpha,
            iterations=args.iterations,
            levels=args.levels,
            downscale=args.downscale,
            epsilon=args.epsilon,
        )
    except ValueError as exc:
        raise CliError(2, str(exc)) from exc


def _add_flow_flags(sp: argparse.ArgumentParser) -> None:
    d = FlowConfig()
    grp = sp.add_argument_group("flow estimator")
    grp.add_argument("--alpha", type=float, default=d.alpha, help="smoothness weight")
    grp.add_argument("--iterations", type=int, default=d.iterations, help="sweeps per level")
    grp.add_argument("--levels", type=int, default=d.levels, help="pyramid depth cap")
    grp.add_argument("--downscale", type=float, default=d.downscale, help="per-level shrink")
    grp.add_argument(
        "--epsilon", type=float, default=d.epsilon, help="consistency gate, px"
    )


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--config", default=None, help="key=value file or a previous manifest.json")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(args: argparse.Namespace) -> None:
    options = {
        k: _jsonable(v) for k, v in vars(args).items() if k not in ("func", "subcommand", "config")
    }
    _write_json(
        os.path.join(args.out, "manifest.json"),
        {"tool": "ofmkit", "version": __version__, "subcommand": args.subcommand, "options": options},
    )


def _outdir(args: argparse.Namespace) -> str:
    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args)
    return args.out


def _load_images(paths: list[str]) -> list[Image]:
    return [read_image(p) for p in paths]


def _columns_csv(path: str, columns: list[np.ndarray]) -> None:
    write_matrix_csv(path, np.column_stack([np.asarray(c, dtype=np.float64) for c in columns]))


# --------------------------------------------------------------------------
# config files


def _load_mapping(path: str, subcommand: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(2, f"cannot read config {path}: {exc.strerror}") from exc
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(2, f"{path}: bad manifest JSON ({exc})") from exc
        if doc.get("subcommand") not in (None, subcommand):
            raise CliError(
                2, f"{path}: manifest is for {doc.get('subcommand')!r}, not {subcommand!r}"
            )
        options = doc.get("options")
        if not isinstance(options, dict):
            raise CliError(2, f"{path}: manifest has no options table")
        return options
    mapping: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(2, f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _config_argv(sub: argparse.ArgumentParser, mapping: dict, path: str) -> list[str]:
    """Turn a config mapping into flag tokens the subparser understands."""
    by_dest = {}
    for action in sub._actions:  # noqa: SLF001 - argparse has no public registry
        if action.option_strings:
            by_dest[action.dest] = action
    argv: list[str] = []
    for key in sorted(mapping):
        dest = key.replace("-", "_")
        if dest == "config":
            continue
        action = by_dest.get(dest)
        if action is None:
            raise CliError(2, f"{path}: unknown option {key!r}")
        value = mapping[key]
        flag = action.option_strings[0]
        if isinstance(action, argparse.BooleanOptionalAction) or isinstance(
            action.const, bool
        ):
            if isinstance(value, str):
                low = value.lower()
                if low in _TRUE:
                    value = True
                elif low in _FALSE:
                    value = False
                else:
                    raise CliError(2, f"{path}: {key} must be boolean, got {value!r}")
            if value:
                argv.append(flag)
            elif isinstance(action, argparse.BooleanOptionalAction):
                argv.append(f"--no-{flag[2:]}")
            continue
        if value is None:
            continue
        argv.append(flag)
        if isinstance(value, (list, tuple)):
            if action.nargs is None or action.nargs == "?":
                argv.append(",".join(str(v) for v in value))
            else:
                argv.extend(str(v) for v in value)
        else:
            argv.append(str(value))
    return argv


# --------------------------------------------------------------------------
# gen


_GRID_RE = re.compile(r"^grid(\d+)x(\d+)$")


def _parse_centers(args: argparse.Namespace) -> list[tuple[float, float]]:
    if args.origin is not None:
        ox, oy = args.origin
    else:
        ox, oy = (args.width - 1) / 2.0, (args.height - 1) / 2.0
    m = _GRID_RE.match(args.centers)
    if m:
        cols, rows = int(m.group(1)), int(m.group(2))
        if cols < 1 or rows < 1:
            raise CliError(2, f"empty grid {args.centers!r}")
        return [
            (ox + (i - (cols - 1) / 2.0) * args.spacing, oy + (j - (rows - 1) / 2.0) * args.spacing)
            for j in range(rows)
            for i in range(cols)
        ]
    try:
        return [_pair(tok) for tok in args.centers.split(";") if tok.strip()]
    except argparse.ArgumentTypeError as exc:
        raise CliError(2, f"bad --centers {args.centers!r}: {exc}") from exc


def _frame_path(out: str, index: int, fmt: str) -> str:
    return os.path.join(out, f"frame_{index:03d}.{fmt}")


def cmd_gen(args: argparse.Namespace) -> None:
    if args.width < 1 or args.height < 1:
        raise CliError(2, f"bad canvas {args.width}x{args.height}")
    out = _outdir(args)
    frames: list[Image] = []
    rows: list[list[float]] = []
    if args.kind == "disk-video":
        if args.dt <= 0 or args.count < 2:
            raise CliError(2, "disk-video needs --dt > 0 and --count >= 2")
        c0 = args.origin if args.origin is not None else (
            (args.width - 1) / 2.0,
            (args.height - 1) / 2.0,
        )
        for i in range(args.count):
            t = i * args.dt
            cx = c0[0] + args.velocity[0] * t + 0.5 * args.accel[0] * t * t
            cy = c0[1] + args.velocity[1] * t + 0.5 * args.accel[1] * t * t
            frames.append(
                textured_disk(args.width, args.height, cx, cy, args.r, seed=args.seed, bg=args.bg)
            )
            rows.append([float(i), t, cx, cy])
    else:
        centers = _parse_centers(args)
        if args.kind == "crop":
            texture = make_texture(args.texture_size, args.texture_size, seed=args.seed)
        for i, (cx, cy) in enumerate(centers):
            if args.kind == "disk":
                frames.append(
                    disk_image(
                        args.width, args.height, cx, cy, args.r,
                        antialias=args.antialias, fg=args.fg, bg=args.bg,
                    )
                )
            elif args.kind == "textured-disk":
                frames.append(
                    textured_disk(args.width, args.height, cx, cy, args.r, seed=args.seed, bg=args.bg)
                )
            else:
                frames.append(crop_image(texture, cx, cy, args.width, args.height))
            rows.append([float(i), cx, cy])
    for i, frame in enumerate(frames):
        write_image(_frame_path(out, i, args.format), frame, maxval=args.maxval)
    write_matrix_csv(os.path.join(out, "params.csv"), np.array(rows))


# --------------------------------------------------------------------------
# flow / graph / metric


def cmd_flow(args: argparse.Namespace) -> None:
    cfg = _flow_config(args)
    a, b = _load_images(args.frames)
    out = _outdir(args)
    try:
        fwd, bwd = flow_pair(a, b, cfg)
    except ValueError as exc:
        raise CliError(3, str(exc)) from exc
    write_flo(os.path.join(out, "flow.flo"), fwd.flow)
    write_flo(os.path.join(out, "flow_back.flo"), bwd.flow)
    consistent = fwd.consistent and bwd.consistent
    _write_json(
        os.path.join(out, "report.json"),
        {
            "consistent": consistent,
            "fb_error_forward": fwd.fb_error,
            "fb_error_backward": bwd.fb_error,
            "oob_fraction_forward": fwd.oob_fraction,
            "oob_fraction_backward": bwd.oob_fraction,
        },
    )
    if args.require_consistent and not consistent:
        raise CliError(
            3,
            f"frames fail the consistency gate (forward-backward error "
            f"{max(fwd.fb_error, bwd.fb_error):.3g} > epsilon {cfg.epsilon:g})",
        )


def _build_graph_cli(args: argparse.Namespace):
    cfg = _flow_config(args)
    images = _load_images(args.inputs)
    if len(images) < 2:
        raise CliError(2, "need at least two --inputs")
    try:
        return build_graph(images, cfg)
    except ValueError as exc:
        raise CliError(3, str(exc)) from exc


def cmd_graph(args: argparse.Namespace) -> None:
    graph = _build_graph_cli(args)
    out = _outdir(args)
    write_matrix_csv(os.path.join(out, "weights.csv"), graph.weight_matrix())
    edges = []
    for (i, j), e in sorted(graph.edges.items()):
        fwd_name = f"edge_{i:03d}_{j:03d}.flo"
        bwd_name = f"edge_{i:03d}_{j:03d}_back.flo"
        write_flo(os.path.join(out, fwd_name), e.flow_fwd)
        write_flo(os.path.join(out, bwd_name), e.flow_bwd)
        edges.append(
            {
                "i": i,
                "j": j,
                "weight": e.weight,
                "asymmetry": e.asymmetry,
                "fb_forward": e.fb_fwd,
                "fb_backward": e.fb_bwd,
                "flow_forward": fwd_name,
                "flow_backward": bwd_name,
            }
        )
    _write_json(
        os.path.join(out, "graph.json"),
        {"n_nodes": graph.n_nodes, "nodes": list(args.inputs), "edges": edges},
    )


def cmd_metric(args: argparse.Namespace) -> None:
    graph = _build_graph_cli(args)
    out = _outdir(args)
    d = flow_metric(graph)
    write_matrix_csv(os.path.join(out, "metric.csv"), d)
    report = {
        "n_nodes": graph.n_nodes,
        "n_edges": len(graph.edges),
        "connected": bool(np.all(np.isfinite(d))),
    }
    if args.ambient:
        write_matrix_csv(os.path.join(out, "ambient.csv"), ambient_metric(graph))
    _write_json(os.path.join(out, "report.json"), report)


# --------------------------------------------------------------------------
# embed / interp / karcher / estimate


def cmd_embed(args: argparse.Namespace) -> None:
    distances = read_matrix_csv(args.distances)
    if distances.ndim != 2 or distances.shape[0] != distances.shape[1]:
        raise CliError(3, f"{args.distances}: distance matrix must be square, got {distances.shape}")
    if not 1 <= args.dim <= distances.shape[0]:
        raise CliError(2, f"--dim must be in [1, {distances.shape[0]}], got {args.dim}")
    try:
        emb = embed(distances, args.dim)
    except ValueError as exc:
        raise CliError(3, f"{args.distances}: {exc}") from exc
    out = _outdir(args)
    write_matrix_csv(os.path.join(out, "coords.csv"), emb.coords)
    write_matrix_csv(os.path.join(out, "eigenvalues.csv"), emb.eigenvalues.reshape(-1, 1))
    report = {"n_positive": emb.n_positive, "dim": args.dim}
    if args.reference is not None:
        ref = read_matrix_csv(args.reference)
        try:
            report["procrustes_residual"] = procrustes_residual(emb.coords, ref)
        except ValueError as exc:
            raise CliError(3, f"{args.reference}: {exc}") from exc
    _write_json(os.path.join(out, "report.json"), report)


def cmd_interp(args: argparse.Namespace) -> None:
    cfg = _flow_config(args)
    a, b = _load_images(args.frames)
    if args.steps is not None and args.steps < 2:
        raise CliError(2, f"--steps must be >= 2, got {args.steps}")
    if not 0.0 <= args.t <= 1.0:
        raise CliError(2, f"--t must lie in [0, 1], got {args.t}")
    ts = (
        [k / (args.steps - 1) for k in range(args.steps)]
        if args.steps is not None
        else [args.t]
    )
    out = _outdir(args)
    for i, t in enumerate(ts):
        if args.blend:
            frame = linear_blend(a, b, t)
        else:
            try:
                frame = interpolate(a, b, t, cfg)
            except ValueError as exc:
                raise CliError(3, str(exc)) from exc
        write_image(_frame_path(out, i, args.format), frame, maxval=args.maxval)


def cmd_karcher(args: argparse.Namespace) -> None:
    cfg = _flow_config(args)
    images = _load_images(args.inputs)
    try:
        res = karcher_mean(
            images, cfg, step=args.step, tol=args.tol, max_iters=args.max_iters, init=args.init
        )
    except ValueError as exc:
        raise CliError(3, str(exc)) from exc
    out = _outdir(args)
    write_image(os.path.join(out, f"mean.{args.format}"), res.mean, maxval=args.maxval)
    _columns_csv(
        os.path.join(out, "trace.csv"),
        [np.arange(1, len(res.trace) + 1), np.asarray(res.trace)],
    )
    _write_json(
        os.path.join(out, "report.json"),
        {
            "iterations": res.iterations,
            "converged": res.converged,
            "final_norm": res.final_norm,
            "init_index": res.init_index,
        },
    )
    if args.require_converged and not res.converged:
        raise NumericalError(
            f"mean-flow norm {res.final_norm:.4g} still above tol {args.tol:g} "
            f"after {res.iterations} iterations"
        )


def cmd_estimate(args: argparse.Namespace) -> None:
    cfg = _flow_config(args)
    query = read_image(args.query)
    templates = _load_images(args.templates)
    thetas = read_matrix_csv(args.thetas)
    try:
        tset = TemplateSet(tuple(templates), thetas, args.kind)
        res = estimate_parameter(tset, query, cfg)
    except ValueError as exc:
        raise CliError(3, str(exc)) from exc
    out = _outdir(args)
    _write_json(
        os.path.join(out, "report.json"),
        {
            "theta": res.theta,
            "template_index": res.template_index,
            "distance": res.distance,
            "kind": args.kind,
        },
    )


# --------------------------------------------------------------------------
# curve / fields / resample


def cmd_curve(args: argparse.Namespace) -> None:
    cfg = _flow_config(args)
    if len(args.inputs) < 2:
        raise CliError(2, "need at least two --inputs")
    frames = _load_images(args.inputs)
    if args.times is not None:
        times = read_matrix_csv(args.times).ravel()
    else:
        if args.dt <= 0:
            raise CliError(2, f"--dt must be positive, got {args.dt}")
        times = args.t0 + args.dt * np.arange(len(frames))
    try:
        curve = cv.build_curve(frames, times, cfg, foreground_threshold=args.foreground_threshold)
    except ValueError as exc:
        raise CliError(3, str(exc)) from exc
    out = _outdir(args)
    hop_names = []
    for i, flow in enumerate(curve.hop_flows):
        name = f"hop_{i:03d}.flo"
        write_flo(os.path.join(out, name), flow)
        hop_names.append(name)
    _write_json(
        os.path.join(out, "curve.json"),
        {
            "frames": list(args.inputs),
            "times": curve.times,
            "arc": curve.arc,
            "radius": curve.radius,
            "hop_flows": hop_names,
            "foreground_threshold": args.foreground_threshold,
        },
    )


def _load_curve(path: str, with_frames: bool) -> cv.Curve:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad curve JSON ({exc})") from exc
    try:
        times = np.asarray(doc["times"], dtype=np.float64)
        arc = np.asarray(doc["arc"], dtype=np.float64)
        radius = np.asarray(doc["radius"], dtype=np.float64)
        frame_paths = list(doc["frames"])
        hop_names = list(doc["hop_flows"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: curve manifest is missing {exc}") from exc
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.exists(p) else os.path.join(base, p)

    frames = hops = None
    if with_frames:
        frames = tuple(read_image(resolve(p)) for p in frame_paths)
        hops = tuple(read_flo(resolve(p)) for p in hop_names)
    try:
        return cv.Curve(times, arc, radius, frames, hops)
    except ValueError as exc:
        raise FormatError(f"{path}: inconsistent curve manifest ({exc})") from exc


def _load_motion(path: str) -> cv.MotionFunction:
    table = read_matrix_csv(path)
    if table.shape[1] != 2:
        raise FormatError(f"{path}: motion CSV needs two columns (t, h), got {table.shape[1]}")
    try:
        return cv.MotionFunction(table[:, 0], table[:, 1])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _write_motion(path: str, motion: cv.MotionFunction) -> None:
    _columns_csv(path, [motion.times, motion.values])


def cmd_fields(args: argparse.Namespace) -> None:
    curve = _load_curve(args.curve, with_frames=False)
    ops = [
        name
        for name in ("translate", "motion", "add", "conjugate", "approx", "quantize")
        if getattr(args, name) is not None
    ]
    if len(ops) != 1:
        raise CliError(2, f"need exactly one operation, got {ops or 'none'}")
    op = ops[0]
    report: dict = {"operation": op}
    try:
        if op == "translate":
            field = cv.parallel_translate(curve, args.translate, start=args.start)
        elif op == "motion":
            field = cv.field_from_motion(curve, _load_motion(args.motion))
        elif op == "add":
            a = cv.field_from_motion(curve, _load_motion(args.add[0]))
            b = cv.field_from_motion(curve, _load_motion(args.add[1]))
            field = cv.monoid_add(a, b)
        elif op == "conjugate":
            field = cv.conjugate(cv.field_from_motion(curve, _load_motion(args.conjugate)))
        elif op == "approx":
            src = cv.field_from_motion(curve, _load_motion(args.approx))
            best = cv.best_parallel_approx(src, reach_tol=args.reach_tol)
            field = best.field
            report.update(
                {"level": best.level, "median": best.median, "lower_bound": best.lower_bound}
            )
        else:
            src = cv.field_from_motion(curve, _load_motion(args.quantize))
            quant = cv.multiscale_quantize(src, args.n, args.k)
            field = quant.field
            report.update({"index": quant.index, "step": quant.step, "error": quant.error})
    except ValueError as exc:
        raise CliError(3, str(exc)) from exc
    report["parallel"] = cv.is_parallel(field, tol=1e-12)
    report["n_field"] = field.n_field
    out = _outdir(args)
    _write_motion(os.path.join(out, "motion.csv"), cv.motion_of_field(field))
    _write_json(os.path.join(out, "report.json"), report)


def cmd_resample(args: argparse.Namespace) -> None:
    curve = _load_curve(args.curve, with_frames=True)
    try:
        res = cv.resample_uniform(curve, args.step)
    except ValueError as exc:
        raise CliError(3, str(exc)) from exc
    out = _outdir(args)
    for i, frame in enumerate(res.frames):
        write_image(_frame_path(out, i, args.format), frame, maxval=args.maxval)
    _columns_csv(
        os.path.join(out, "stamps.csv"),
        [np.arange(res.times.size), res.times, res.arcs],
    )
    _write_json(
        os.path.join(out, "report.json"),
        {"n_frames": int(res.times.size), "leftover": res.leftover, "step": args.step},
    )


# --------------------------------------------------------------------------
# verify-analytic / figures


def cmd_verify_analytic(args: argparse.Namespace) -> None:
    from . import articulation as art

    out = _outdir(args)
    report: dict = {}
    if args.model in ("affine", "both"):
        rep = art.verify_affine_isometry(
            n_pairs=args.pairs,
            resolution=args.resolution,
            sigma_resolution=args.sigma_resolution,
            seed=args.seed,
        )
        write_matrix_csv(os.path.join(out, "affine_sigma.csv"), art.affine_sigma())
        report["affine"] = {
            "sigma_abs_dev": rep.sigma_abs_dev,
            "max_rel_dev": rep.max_rel_dev,
            "n_pairs": rep.n_pairs,
        }
    if args.model in ("pose", "both"):
        rep = art.verify_pose_wp(
            n_pairs=args.pairs,
            resolution=args.resolution,
            magnitudes=tuple(args.magnitudes),
            seed=args.seed,
        )
        mags = sorted(rep.deviation_by_magnitude)
        _columns_csv(
            os.path.join(out, "pose_deviation.csv"),
            [np.array(mags), np.array([rep.deviation_by_magnitude[m] for m in mags])],
        )
        report["pose"] = {
            "wp_max_rel_dev": rep.wp_max_rel_dev,
            "exponent": rep.exponent,
            "deviation_by_magnitude": {str(m): rep.deviation_by_magnitude[m] for m in mags},
            "n_pairs": rep.n_pairs,
        }
    _write_json(os.path.join(out, "report.json"), report)


def _montage(images: list[Image], pad: int = 2, fill: float = 1.0) -> Image:
    h = max(im.height for im in images)
    w = sum(im.width for im in images) + pad * (len(images) - 1)
    canvas = np.full((h, w), fill)
    x = 0
    for im in images:
        canvas[: im.height, x : x + im.width] = im.data
        x += im.width + pad
    return Image(canvas)


def cmd_figures(args: argparse.Namespace) -> None:
    from .image import l2_distance
    from .manifold import karcher_mean as km

    out = _outdir(args)
    report: dict = {}
    quick = args.quick
    rng = np.random.default_rng(args.seed)

    # 1) distance saturation: far disks stop getting farther
    seps = np.arange(10.0, 61.0, 10.0)
    base = disk_image(256, 256, 98.0, 128.0, 20.0, antialias=False)
    dists = [
        l2_distance(base, disk_image(256, 256, 98.0 + s, 128.0, 20.0, antialias=False))
        for s in seps
    ]
    _columns_csv(os.path.join(out, "saturation.csv"), [seps, np.array(dists)])

    # 2) cross-fade vs transport midpoint on a disk translation
    cfg = FlowConfig()
    d0 = textured_disk(128, 128, 54.0, 64.0, 20.0, seed=args.seed)
    d1 = textured_disk(128, 128, 74.0, 64.0, 20.0, seed=args.seed)
    mid_true = textured_disk(128, 128, 64.0, 64.0, 20.0, seed=args.seed)
    blend_mid = linear_blend(d0, d1, 0.5)
    flow_mid = interpolate(d0, d1, 0.5, cfg)
    report["midpoint"] = {
        "blend_error": l2_distance(blend_mid, mid_true),
        "transport_error": l2_distance(flow_mid, mid_true),
    }
    _columns_csv(
        os.path.join(out, "midpoint_errors.csv"),
        [
            np.array([report["midpoint"]["blend_error"]]),
            np.array([report["midpoint"]["transport_error"]]),
        ],
    )
    write_image(
        os.path.join(out, "midpoint_grid.pgm"),
        _montage([d0, blend_mid, flow_mid, mid_true, d1]),
        maxval=255,
    )

    # 3) transported in-between sequence on a patch translation
    texture = make_texture(192, 192, seed=args.seed + 1)
    c0 = crop_image(texture, 40.0, 48.0, 96, 96)
    c1 = crop_image(texture, 50.0, 48.0, 96, 96)
    n_steps = 3 if quick else 5
    strip = [interpolate(c0, c1, k / (n_steps - 1), cfg) for k in range(n_steps)]
    write_image(os.path.join(out, "sequence_strip.pgm"), _montage(strip), maxval=255)

    # 4) flow-metric embedding of a crop-translation grid vs the true grid
    side = 2 if quick else 3
    tex = make_texture(256, 256, seed=args.seed + 2)
    offsets = [
        (70.0 + 8.0 * i, 70.0 + 8.0 * j) for j in range(side) for i in range(side)
    ]
    crops = [crop_image(tex, ox, oy, 96, 96) for ox, oy in offsets]
    graph = build_graph(crops, cfg)
    emb = embed(flow_metric(graph), 2)
    truth = np.asarray(offsets) - np.mean(offsets, axis=0)
    _write_json(
        os.path.join(out, "embedding_report.json"),
        {
            "flow_residual": procrustes_residual(emb.coords, truth),
            "ambient_residual": procrustes_residual(embed(ambient_metric(graph), 2).coords, truth),
        },
    )
    _columns_csv(
        os.path.join(out, "embedding.csv"),
        [emb.coords[:, 0], emb.coords[:, 1], truth[:, 0], truth[:, 1]],
    )

    # 5) intrinsic mean of a jittered disk ensemble
    n_disks = 5 if quick else 9
    centers = 64.0 + rng.normal(0.0, 3.0, size=(n_disks, 2))
    disks = [
        textured_disk(128, 128, cx, cy, 18.0, seed=args.seed + 3) for cx, cy in centers
    ]
    res = km(disks, FlowConfig(alpha=0.5))
    write_image(os.path.join(out, "karcher_mean.pgm"), res.mean, maxval=255)
    write_image(
        os.path.join(out, "karcher_grid.pgm"), _montage(disks[:4] + [res.mean]), maxval=255
    )
    _columns_csv(
        os.path.join(out, "karcher_trace.csv"),
        [np.arange(1, len(res.trace) + 1), np.asarray(res.trace)],
    )
    report["karcher"] = {"iterations": res.iterations, "converged": res.converged}
    _write_json(os.path.join(out, "report.json"), report)


# --------------------------------------------------------------------------
# parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="ofmkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ofmkit {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def image_out_flags(sp):
        sp.add_argument("--format", choices=("pgm", "pfm"), default="pgm")
        sp.add_argument("--maxval", type=int, choices=(255, 65535), default=65535)

    sp = subs.add_parser("gen", help="synthesize frame sets")
    sp.add_argument("--kind", required=True, choices=("disk", "textured-disk", "crop", "disk-video"))
    sp.add_argument("--width", type=int, default=256)
    sp.add_argument("--height", type=int, default=256)
    sp.add_argument("--r", type=float, default=20.0, help="disk radius, px")
    sp.add_argument("--centers", default="grid5x5", help="gridAxB or 'x,y;x,y;...'")
    sp.add_argument("--spacing", type=float, default=10.0)
    sp.add_argument("--origin", type=_pair, default=None, help="grid center (default: canvas center)")
    sp.add_argument("--seed", type=int, default=0, help="texture seed")
    sp.add_argument("--texture-size", type=int, default=512, help="crop source side, px")
    sp.add_argument("--antialias", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--fg", type=float, default=1.0)
    sp.add_argument("--bg", type=float, default=0.0)
    sp.add_argument("--velocity", type=_pair, default=(0.0, 0.0), help="disk-video px/unit time")
    sp.add_argument("--accel", type=_pair, default=(0.0, 0.0), help="disk-video px/unit time^2")
    sp.add_argument("--dt", type=float, default=0.25, help="disk-video frame spacing")
    sp.add_argument("--count", type=int, default=13, help="disk-video frame count")
    image_out_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = subs.add_parser("flow", help="estimate flow between two frames")
    sp.add_argument("--frames", nargs=2, required=True, metavar=("A", "B"))
    sp.add_argument("--require-consistent", action="store_true")
    _add_flow_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_flow)

    sp = subs.add_parser("graph", help="build the consistent-pair flow graph")
    sp.add_argument("--inputs", nargs="+", required=True, metavar="IMG")
    _add_flow_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_graph)

    sp = subs.add_parser("metric", help="shortest-path flow metric over a frame set")
    sp.add_argument("--inputs", nargs="+", required=True, metavar="IMG")
    sp.add_argument("--ambient", action="store_true", help="also emit the pixel-L2 geodesic matrix")
    _add_flow_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_metric)

    sp = subs.add_parser("embed", help="classical MDS of a distance matrix")
    sp.add_argument("--distances", required=True, help="distance CSV")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--reference", default=None, help="ground-truth coordinates CSV")
    _add_common(sp)
    sp.set_defaults(func=cmd_embed)

    sp = subs.add_parser("interp", help="transport one frame toward another")
    sp.add_argument("--frames", nargs=2, required=True, metavar=("A", "B"))
    sp.add_argument("--t", type=float, default=0.5)
    sp.add_argument("--steps", type=int, default=None, help="emit a whole sequence instead")
    sp.add_argument("--blend", action="store_true", help="pixel cross-fade baseline instead")
    image_out_flags(sp)
    _add_flow_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_interp)

    sp = subs.add_parser("karcher", help="intrinsic mean of a frame set")
    sp.add_argument("--inputs", nargs="+", required=True, metavar="IMG")
    sp.add_argument("--step", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=0.05)
    sp.add_argument("--max-iters", type=int, default=50)
    sp.add_argument("--init", type=int, default=None, help="starting sample index (default: medoid)")
    sp.add_argument("--require-converged", action="store_true")
    image_out_flags(sp)
    _add_flow_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_karcher)

    sp = subs.add_parser("estimate", help="articulation parameters from template flows")
    sp.add_argument("--query", required=True)
    sp.add_argument("--templates", nargs="+", required=True, metavar="IMG")
    sp.add_argument("--thetas", required=True, help="per-template parameter CSV")
    sp.add_argument("--kind", required=True, choices=("translation", "affine"))
    _add_flow_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = subs.add_parser("curve", help="measure a frame curve (arc length + reach)")
    sp.add_argument("--inputs", nargs="+", required=True, metavar="IMG")
    sp.add_argument("--times", default=None, help="one time stamp per line (CSV)")
    sp.add_argument("--dt", type=float, default=1.0)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--foreground-threshold", type=float, default=None)
    _add_flow_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_curve)

    sp = subs.add_parser("fields", help="transport-field algebra on a measured curve")
    sp.add_argument("--curve", required=True, help="curve.json from the curve subcommand")
    sp.add_argument("--translate", type=float, default=None, help="constant displacement, arc units")
    sp.add_argument("--start", type=int, default=0, help="suffix start for --translate")
    sp.add_argument("--motion", default=None, help="motion CSV (t, h) to realize")
    sp.add_argument("--add", nargs=2, default=None, metavar=("A", "B"), help="saturating sum")
    sp.add_argument("--conjugate", default=None, help="reach-complement of a motion CSV")
    sp.add_argument("--approx", default=None, help="best parallel approximation of a motion CSV")
    sp.add_argument("--reach-tol", type=float, default=0.05)
    sp.add_argument("--quantize", default=None, help="snap a parallel motion CSV to the ladder")
    sp.add_argument("--n", type=int, default=1, help="ladder depth")
    sp.add_argument("--k", type=int, default=2, help="ladder branching")
    _add_common(sp)
    sp.set_defaults(func=cmd_fields)

    sp = subs.add_parser("resample", help="re-sample a curve at equal arc steps")
    sp.add_argument("--curve", required=True, help="curve.json from the curve subcommand")
    sp.add_argument("--step", type=float, required=True, help="arc step")
    image_out_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_resample)

    sp = subs.add_parser("verify-analytic", help="analytic articulation metric checks")
    sp.add_argument("--model", required=True, choices=("affine", "pose", "both"))
    sp.add_argument("--pairs", type=int, default=100)
    sp.add_argument("--resolution", type=int, default=256)
    sp.add_argument("--sigma-resolution", type=int, default=512)
    sp.add_argument("--magnitudes", type=_float_list, default=[0.01, 0.1])
    sp.add_argument("--seed", type=int, default=0)
    _add_common(sp)
    sp.set_defaults(func=cmd_verify_analytic)

    sp = subs.add_parser("figures", help="desk-scale demo bundle (grids + CSVs)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--quick", action="store_true", help="smaller ensembles")
    _add_common(sp)
    sp.set_defaults(func=cmd_figures)

    return parser


def _resolve_config(parser: _Parser, argv: list[str]) -> list[str]:
    """Inject config-file options (flags still win) before the real parse."""
    sub_names = {"gen", "flow", "graph", "metric", "embed", "interp", "karcher",
                 "estimate", "curve", "fields", "resample", "verify-analytic", "figures"}
    sub_at = next((i for i, tok in enumerate(argv) if tok in sub_names), None)
    if sub_at is None:
        return argv
    config_path = None
    rest = argv[sub_at + 1 :]
    for i, tok in enumerate(rest):
        if tok == "--config" and i + 1 < len(rest):
            config_path = rest[i + 1]
        elif tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
    if config_path is None:
        return argv
    subcommand = argv[sub_at]
    mapping = _load_mapping(config_path, subcommand)
    sub = parser._subparsers._group_actions[0].choices[subcommand]  # noqa: SLF001
    injected = _config_argv(sub, mapping, config_path)
    return argv[: sub_at + 1] + injected + rest


def main(argv: list[str] | None = None) -> int:
    import warnings

    warnings.filterwarnings("ignore", module=r"numba")  # keep stderr machine-parsable
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _resolve_config(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
    except CliError as exc:
        _emit(exc.code, str(exc))
        return exc.code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except FormatError as exc:
        _emit(3, str(exc))
        return 3
    except FileNotFoundError as exc:
        # np.loadtxt raises these with .filename unset; fall back to its text
        _emit(3, f"{exc.filename}: file not found" if exc.filename else str(exc))
        return 3
    except OSError as exc:
        _emit(3, str(exc))
        return 3
    except NumericalError as exc:
        _emit(4, str(exc))
        return 4
    except ValueError as exc:
        _emit(2, str(exc))
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
