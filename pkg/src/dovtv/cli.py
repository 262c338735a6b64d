"""Command line interface: ``dovtv <subcommand> ...``.

Subcommands: degrade, denoise, inpaint, deblur, gamma-map, metrics, bench.

Solver settings come from flags, then from an optional ``--config`` file of
``key=value`` lines, then from the :class:`~dovtv.config.SolverConfig`
defaults, in that order of precedence. Per-order settings (alpha, beta, p,
q) take comma-separated lists with one entry per derivative order.

Every command that writes files also writes a JSON run manifest. Outputs
are written only when the whole command succeeds. Exit status: 0 on
success, 1 on runtime errors, 2 on usage errors.
"""

import argparse
import itertools
import sys
import time
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import check_image
from .bregman import bregman_solve
from .color import gamma_map
from .config import SolverConfig
from .degradation import KINDS, DegradationSpec, add_opponent_noise, degrade, make_inpaint_mask_from_overlay
from .hqa import hqa_solve, initial_guess
from .io import (
    OutputSet,
    csv_text,
    file_sha256,
    gray_png_bytes,
    kernel_text,
    manifest_text,
    mask_png_bytes,
    npy_bytes,
    png_bytes,
    read_kernel,
    read_mask_png,
    read_png,
)
from .metrics import evaluate
from .operators import blur_map, mask_map, motion_kernel

SOLVERS = {"bregman": bregman_solve, "hqa": hqa_solve}
LIST_KEYS = ("alpha", "beta", "p", "q")
INT_KEYS = ("M", "max_outer", "cg_iters", "hqa_cg_iters")
BOOL_KEYS = ("hqa_jacobi",)
SETTING_KEYS = tuple(SolverConfig.field_names()) + ("solver",)
METRICS_HEADER = ["ref", "test", "psnr", "ssim", "ciede"]
BENCH_HEADER = ["kind", "image", "sigma", "params", "psnr", "psnr_std", "ssim", "ssim_std",
                "ciede", "ciede_std", "iters", "wall_time"]


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# settings


def parse_setting(key, text):
    """Parse one solver setting from its text form."""
    key = key.replace("-", "_")
    text = str(text).strip()
    if key not in SETTING_KEYS:
        raise UsageError(f"unknown setting {key!r}")
    try:
        if key == "solver":
            if text not in SOLVERS:
                raise UsageError(f"solver must be one of {sorted(SOLVERS)}, got {text!r}")
            return text
        if key in LIST_KEYS:
            values = tuple(float(v) for v in text.split(","))
            return values[0] if len(values) == 1 else values
        if key in INT_KEYS:
            return int(text)
        if key in BOOL_KEYS:
            lowered = text.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"{key} must be true or false, got {text!r}")
            return lowered in ("true", "1", "yes")
        if key == "sigma" and text.lower() in ("none", ""):
            return None
        return float(text)
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad value for {key}: {text!r}") from None


def read_config_file(path):
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    settings = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        settings[key.replace("-", "_")] = parse_setting(key, value)
    return settings


def merged_settings(args):
    """Defaults < config file < flags."""
    settings = {}
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for key in SETTING_KEYS:
        value = getattr(args, f"set_{key}", None)
        if value is not None:
            settings[key] = parse_setting(key, value)
    return settings


def build_config(settings):
    settings = dict(settings)
    solver = settings.pop("solver", "bregman")
    try:
        return solver, SolverConfig(**settings)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _add_solver_flags(parser, exclude=()):
    group = parser.add_argument_group("solver settings")
    group.add_argument("--config", help="key=value settings file (flags take precedence)")
    for key in SETTING_KEYS:
        if key in exclude:
            continue
        flag = "--" + key.replace("_", "-")
        hint = "comma-separated per-order list" if key in LIST_KEYS else None
        group.add_argument(flag, dest=f"set_{key}", metavar=key.upper(), help=hint)


def _add_run_outputs(parser):
    parser.add_argument("-o", "--output", required=True, help="restored PNG")
    parser.add_argument("--trace", help="trace CSV (default: <output>.trace.csv)")
    parser.add_argument("--manifest", help="run manifest (default: <output>.manifest.json)")
    parser.add_argument("--ref", help="clean reference PNG; enables metrics")
    parser.add_argument("--metrics-csv", help="metrics CSV (default: <output>.metrics.csv)")
    parser.add_argument("--dump-npy", help="also save the raw float result as .npy")


def _sibling(path, suffix):
    path = Path(path)
    return path.with_name(path.stem + suffix)


def _floats(text, n, name):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{name} must be {n} comma-separated numbers") from None
    if len(values) != n:
        raise UsageError(f"{name} must be {n} comma-separated numbers")
    return values


# ---------------------------------------------------------------------------
# inputs


def load_image(path):
    """PNG (8-bit sRGB) or a lossless ``.npy`` float dump."""
    path = Path(path)
    if path.suffix.lower() == ".npy":
        return check_image(np.load(path, allow_pickle=False), str(path))
    return read_png(path)


def _input_record(path):
    return {"path": str(path), "sha256": file_sha256(path)}


def _kernel_from_args(args):
    if args.kernel and args.motion:
        raise UsageError("give either --kernel or --motion, not both")
    if args.kernel:
        return read_kernel(args.kernel), {"file": _input_record(args.kernel)}
    if args.motion:
        length, angle = _floats(args.motion, 2, "--motion")
        return motion_kernel(length, angle), {"motion": [length, angle]}
    raise UsageError("a kernel is required (--kernel FILE or --motion LENGTH,ANGLE)")


def _mask_from_args(args, img):
    if args.mask and args.key_color:
        raise UsageError("give either --mask or --key-color, not both")
    if args.mask:
        mask = read_mask_png(args.mask)
        if mask.shape != img.shape[:2]:
            raise UsageError(f"mask is {mask.shape[::-1]} but the image is {img.shape[1::-1]}")
        return mask, {"file": _input_record(args.mask)}
    if args.key_color:
        key = [v / 255.0 for v in _floats(args.key_color, 3, "--key-color")]
        mask = make_inpaint_mask_from_overlay(img, key, args.key_tol / 255.0)
        return mask, {"key_color": args.key_color, "key_tol": args.key_tol}
    raise UsageError("a mask is required (--mask FILE or --key-color R,G,B)")


# ---------------------------------------------------------------------------
# commands


def _manifest(args, command, extra):
    base = {"tool": "dovtv", "version": __version__, "command": command}
    base.update(extra)
    return base


def _restore(args, command, make_K=None, make_u0=None, extra=None):
    """Shared body of the restoration commands; ``make_K`` and ``make_u0``
    build the forward operator and start image from the loaded input."""
    g = load_image(args.input)
    solver, cfg = build_config(merged_settings(args))
    ref = load_image(args.ref) if args.ref else None
    if ref is not None and ref.shape != g.shape:
        raise UsageError(f"reference shape {ref.shape} does not match input {g.shape}")
    K = make_K(g) if make_K else None
    start = make_u0(g) if make_u0 else None
    result = SOLVERS[solver](g, K=K, cfg=cfg, ground_truth=ref, u0=start)

    out = OutputSet()
    out.add(args.output, png_bytes(result.clamped))
    trace_path = args.trace or _sibling(args.output, ".trace.csv")
    out.add(trace_path, result.trace.to_csv())
    if args.dump_npy:
        out.add(args.dump_npy, npy_bytes(result.image))
    record = {
        "inputs": {"input": _input_record(args.input)},
        "solver": solver,
        "config": cfg.to_dict(),
        "n_iter": result.trace.n_iter,
        "converged": result.trace.converged,
    }
    record.update(extra or {})
    if ref is not None:
        report = evaluate(ref, result.clamped)
        print(report.format())
        record["inputs"]["ref"] = _input_record(args.ref)
        record["metrics"] = {"psnr": report.psnr, "ssim": report.ssim, "ciede": report.ciede}
        out.add(args.metrics_csv or _sibling(args.output, ".metrics.csv"),
                csv_text(METRICS_HEADER, [[str(args.ref), str(args.output), repr(report.psnr),
                                           repr(report.ssim), repr(report.ciede)]]))
    print(f"{solver}: {result.trace.n_iter} iterations, converged={result.trace.converged}")
    manifest_path = args.manifest or _sibling(args.output, ".manifest.json")
    record["outputs"] = [str(p) for p in out.paths] + [str(manifest_path)]
    out.add(manifest_path, manifest_text(_manifest(args, command, record)))
    return out


def cmd_denoise(args):
    return _restore(args, "denoise")


def cmd_inpaint(args):
    g = load_image(args.input)
    mask, mask_info = _mask_from_args(args, g)
    if not mask.any():
        raise UsageError("the mask leaves no observed pixel")
    print(f"masked pixels: {int((~mask).sum())}")
    h, w = mask.shape
    return _restore(args, "inpaint", make_K=lambda img: mask_map(mask, w, h),
                    make_u0=lambda img: initial_guess(img, mask),
                    extra={"mask": mask_info, "masked_pixels": int((~mask).sum())})


def cmd_deblur(args):
    kernel, info = _kernel_from_args(args)
    print("kernel taps:")
    print(kernel_text(kernel), end="")

    def operator(img):
        h, w = img.shape[:2]
        return blur_map(kernel, w, h)

    info["taps"] = kernel.taps.tolist()
    info["anchor"] = list(kernel.anchor)
    return _restore(args, "deblur", make_K=operator, extra={"kernel": info})


def cmd_degrade(args):
    img = load_image(args.input)
    kernel = mask = None
    details = {}
    if args.kind == "blur":
        kernel, details = _kernel_from_args(args)
    elif args.kind == "mask":
        mask, details = _mask_from_args(args, img)
    spec = DegradationSpec(args.kind, sigma_8bit=args.sigma, seed=args.seed, kernel=kernel, mask=mask)
    noisy = degrade(img, spec)

    out = OutputSet()
    out.add(args.output, png_bytes(noisy))
    lines = [f"kind={spec.kind}", f"sigma_8bit={spec.sigma_8bit!r}", f"seed={spec.seed}"]
    if kernel is not None:
        rows = ";".join(" ".join(repr(float(t)) for t in row) for row in kernel.taps)
        lines.append(f"kernel={rows}")
        lines.append(f"kernel_anchor={kernel.anchor[0]},{kernel.anchor[1]}")
    if mask is not None:
        lines.append(f"masked_pixels={int((~mask).sum())}")
        if args.mask_out:
            out.add(args.mask_out, mask_png_bytes(mask))
    out.add(args.sidecar or _sibling(args.output, ".txt"), "\n".join(lines) + "\n")
    if args.dump_npy:
        out.add(args.dump_npy, npy_bytes(noisy))
    manifest_path = args.manifest or _sibling(args.output, ".manifest.json")
    record = {"inputs": {"input": _input_record(args.input)}, "kind": spec.kind,
              "sigma_8bit": spec.sigma_8bit, "seed": spec.seed, "details": details}
    record["outputs"] = [str(p) for p in out.paths] + [str(manifest_path)]
    out.add(manifest_path, manifest_text(_manifest(args, "degrade", record)))
    return out


def cmd_gamma_map(args):
    img = load_image(args.input)
    gamma = gamma_map(img)
    out = OutputSet()
    out.add(args.output, gray_png_bytes(gamma))
    if args.dump_npy:
        out.add(args.dump_npy, npy_bytes(gamma))
    print(f"gamma: min={gamma.min():.6g} max={gamma.max():.6g} mean={gamma.mean():.6g}")
    manifest_path = args.manifest or _sibling(args.output, ".manifest.json")
    record = {"inputs": {"input": _input_record(args.input)},
              "outputs": [str(p) for p in out.paths] + [str(manifest_path)]}
    out.add(manifest_path, manifest_text(_manifest(args, "gamma-map", record)))
    return out


def cmd_metrics(args):
    ref, test = load_image(args.ref), load_image(args.test)
    report = evaluate(ref, test)
    print(report.format())
    out = OutputSet()
    if args.csv:
        out.add(args.csv, csv_text(METRICS_HEADER, [[args.ref, args.test, repr(report.psnr),
                                                     repr(report.ssim), repr(report.ciede)]]))
        manifest_path = args.manifest or _sibling(args.csv, ".manifest.json")
        record = {"inputs": {"ref": _input_record(args.ref), "test": _input_record(args.test)},
                  "outputs": [str(args.csv), str(manifest_path)]}
        out.add(manifest_path, manifest_text(_manifest(args, "metrics", record)))
    return out


def parse_grid(items):
    """``key=v1/v2/...`` entries to an ordered list of (key, values)."""
    grid = []
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"grid entry {item!r} must look like key=v1/v2")
        key, values = item.split("=", 1)
        key = key.strip().replace("-", "_")
        grid.append((key, [parse_setting(key, v) for v in values.split("/")]))
    return grid


def _format_setting(value):
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def cell_seed(base, image_name, sigma, cell):
    """Deterministic per-cell seed from (image, sigma, cell index)."""
    return base ^ zlib.crc32(f"{image_name}|{sigma!r}|{cell}".encode())


def summarize(rows):
    """Mean and population std of the metric columns over data rows."""
    arr = np.array([[r["psnr"], r["ssim"], r["ciede"]] for r in rows], dtype=np.float64)
    return arr.mean(axis=0).tolist(), arr.std(axis=0).tolist()


def cmd_bench(args):
    corpus = sorted(Path(args.corpus).glob("*.png"))
    if not corpus:
        raise UsageError(f"no PNG images in {args.corpus}")
    try:
        sigmas = [float(v) for v in args.sigma.split(",")]
    except ValueError:
        raise UsageError(f"--sigma must be comma-separated numbers, got {args.sigma!r}") from None
    base = merged_settings(args)
    grid = parse_grid(args.grid)
    keys = [k for k, _ in grid]
    cells = [dict(zip(keys, combo)) for combo in itertools.product(*[v for _, v in grid])]
    images = [(path.name, read_png(path)) for path in corpus]

    data_rows, summary_rows, table = [], [], []
    for sigma in sigmas:
        for cell_index, cell in enumerate(cells):
            settings = {**base, **cell}
            if args.noise_stop:
                settings["sigma"] = sigma
            solver, cfg = build_config(settings)
            params = ";".join(f"{k}={_format_setting(v)}" for k, v in cell.items())
            results = []
            for name, clean in images:
                seed = cell_seed(args.seed, name, sigma, cell_index)
                noisy = add_opponent_noise(clean, sigma, seed)
                t0 = time.perf_counter()
                res = SOLVERS[solver](noisy, cfg=cfg)
                wall = time.perf_counter() - t0
                rep = evaluate(clean, res.clamped)
                results.append({"psnr": rep.psnr, "ssim": rep.ssim, "ciede": rep.ciede,
                                "iters": res.trace.n_iter, "wall": wall})
                data_rows.append(["data", name, repr(sigma), params, repr(rep.psnr), "",
                                  repr(rep.ssim), "", repr(rep.ciede), "", res.trace.n_iter,
                                  repr(wall)])
            mean, std = summarize(results)
            iters = float(np.mean([r["iters"] for r in results]))
            wall = float(np.mean([r["wall"] for r in results]))
            summary_rows.append(["summary", f"n={len(results)}", repr(sigma), params,
                                 repr(mean[0]), repr(std[0]), repr(mean[1]), repr(std[1]),
                                 repr(mean[2]), repr(std[2]), repr(iters), repr(wall)])
            table.append(f"sigma={sigma:g} {params or '(base)'}: "
                         f"{mean[0]:.1f}±{std[0]:.1f}/{mean[1]:.2f}±{std[1]:.2f}/"
                         f"{mean[2]:.2f}±{std[2]:.2f}")
    print("\n".join(table))
    out = OutputSet()
    out.add(args.output, csv_text(BENCH_HEADER, data_rows + summary_rows))
    manifest_path = args.manifest or _sibling(args.output, ".manifest.json")
    record = {
        "inputs": {path.name: _input_record(path) for path in corpus},
        "sigmas": sigmas, "grid": [[k, [_format_setting(v) for v in vals]] for k, vals in grid],
        "base_settings": {k: _format_setting(v) for k, v in base.items()},
        "seed": args.seed, "noise_stop": args.noise_stop,
        "outputs": [str(args.output), str(manifest_path)],
    }
    out.add(manifest_path, manifest_text(_manifest(args, "bench", record)))
    return out


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dovtv", description="Colour image restoration with double-opponent VTV.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="add opponent noise, blur or a mask")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--kind", choices=KINDS, default="opponent_noise")
    p.add_argument("--sigma", type=float, default=0.0, help="noise std in 8-bit units")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel", help="kernel text file")
    p.add_argument("--motion", help="motion blur LENGTH,ANGLE (degrees, counter-clockwise)")
    p.add_argument("--mask", help="mask PNG (nonzero = observed)")
    p.add_argument("--key-color", help="R,G,B (0-255) of overlay pixels to mask out")
    p.add_argument("--key-tol", type=float, default=0.0, help="max-norm tolerance in 8-bit units")
    p.add_argument("--mask-out", help="write the mask as PNG")
    p.add_argument("--sidecar", help="sidecar text (default: <output>.txt)")
    p.add_argument("--manifest")
    p.add_argument("--dump-npy", help="lossless float copy of the degraded image")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("denoise", help="restore a noisy image")
    p.add_argument("input")
    _add_run_outputs(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("inpaint", help="fill masked pixels")
    p.add_argument("input")
    p.add_argument("--mask", help="mask PNG (nonzero = observed)")
    p.add_argument("--key-color", help="R,G,B (0-255) of overlay pixels to fill")
    p.add_argument("--key-tol", type=float, default=0.0)
    _add_run_outputs(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("deblur", help="non-blind deblurring")
    p.add_argument("input")
    p.add_argument("--kernel", help="kernel text file")
    p.add_argument("--motion", help="motion blur LENGTH,ANGLE")
    _add_run_outputs(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_deblur)

    p = sub.add_parser("gamma-map", help="colourfulness map as grayscale PNG")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--dump-npy")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_gamma_map)

    p = sub.add_parser("metrics", help="PSNR/SSIM/CIEDE2000 of TEST against REF")
    p.add_argument("ref")
    p.add_argument("test")
    p.add_argument("--csv")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="noise-level and parameter sweep over a PNG folder")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True, help="results CSV")
    p.add_argument("--sigma", default="20,40,60,80", help="comma-separated noise levels")
    p.add_argument("--grid", action="append", metavar="KEY=V1/V2",
                   help="parameter axis; repeat for a Cartesian grid")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--noise-stop", action="store_true",
                   help="stop with the noise-aware rule at each noise level")
    p.add_argument("--manifest")
    # --sigma is the noise grid here; see --noise-stop for the stopping rule
    _add_solver_flags(p, exclude=("sigma",))
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = args.func(args)
        out.commit()
    except UsageError as exc:
        print(f"dovtv {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"dovtv {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
