"""Command-line entry point: ``vdff simulate | reconstruct | baseline | evaluate | diagnose``.

Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.
Parameters resolve as command-line flag, then ``--config`` file
(flat ``key=value``), then built-in default.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DivergenceDetected

log = logging.getLogger("vdff")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def number(text) -> float:
    """Parse a float, also accepting fractions such as ``1/12``."""
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def window_or_off(text) -> int:
    """Window size; ``none``/``off`` map to 0, meaning the step is skipped."""
    text = str(text).strip().lower()
    return 0 if text in ("", "none", "off") else int(text)


def optional_number(text):
    text = str(text).strip().lower()
    return None if text in ("", "none", "off") else number(text)


# per subcommand: key -> (parser, default); keys double as config-file keys and flag names
SOLVER_PARAMS = {
    "alpha": (number, 0.25),
    "tau": (number, 8.0),
    "lambda0": (number, 1.0),
    "growth": (number, 1.02),
    "iters": (int, 400),
    "lambda_max": (number, 1e6),
    "depth_scale": (number, 400.0),
    "contrast_normalization": (optional_number, 80.0),
    "boundary": (str, "restoring"),
    "init_window": (int, 15),
    "init_blur": (int, 21),
    "degree": (int, 8),
}
BASELINE_PARAMS = {
    "preset": (str, "mlap1"),
    # None keeps the preset's value
    "contrast_window": (int, None),
    "median_window": (window_or_off, None),
}
SIMULATE_PARAMS = {
    "shape": (str, "cone"),
    "height": (int, 128),
    "width": (int, 128),
    "slices": (int, 15),
    "seed": (int, 0),
    "noise_a": (number, 1e-4),
    "noise_b": (number, 1e-5),
    "psf_gain": (number, 6.0),
}
EVALUATE_PARAMS = {
    "slices": (int, 15),
    "shape": (str, ""),
    "method": (str, ""),
    "params": (str, ""),
}


def resolve(params: dict, args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config file and explicit flags (highest precedence)."""
    from .io import read_keyvalue

    out = {key: default for key, (_, default) in params.items()}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file {path} not found")
        for key, value in read_keyvalue(path).items():
            key = key.replace("-", "_")
            if key not in params:
                raise UsageError(f"{path}: unknown key {key!r}")
            out[key] = params[key][0](value)
    for key, (parse, _) in params.items():
        value = getattr(args, key, None)
        if value is not None:
            out[key] = parse(value)
    return out


def add_params(parser: argparse.ArgumentParser, params: dict) -> None:
    for key in params:
        parser.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="VALUE")


def solver_config(p: dict):
    from .tv_admm import SolverConfig

    return SolverConfig(alpha=p["alpha"], tau=p["tau"], lambda0=p["lambda0"],
                        lambda_growth=p["growth"], iterations=p["iters"],
                        lambda_max=p["lambda_max"], depth_scale=p["depth_scale"],
                        contrast_normalization=p["contrast_normalization"],
                        boundary=p["boundary"], init_window=p["init_window"],
                        init_blur=p["init_blur"])


def stack_digest(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def load_input_stack(source):
    from .image_stack import load_stack, resolve_stack_paths

    paths = resolve_stack_paths(source)
    return load_stack(paths), paths


def output_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .io import write_depth_png, write_gray_png, write_manifest, write_pfm
    from .simulate import SceneSpec, make_depth, render_stack

    p = resolve(SIMULATE_PARAMS, args)
    spec = SceneSpec(shape=p["shape"], dims=(p["height"], p["width"]), n_slices=p["slices"],
                     noise_a=p["noise_a"], noise_b=p["noise_b"], psf_gain=p["psf_gain"],
                     seed=p["seed"])
    gt = make_depth(spec.shape, spec.dims)
    out = output_dir(args.out)
    stack = render_stack(spec, gt)
    # slices get their own directory so it can also be passed as a stack source
    (out / "slices").mkdir(exist_ok=True)
    width = max(3, len(str(spec.n_slices - 1)))
    names = []
    for k, image in enumerate(stack.images):
        name = f"slices/slice_{k:0{width}d}.png"
        write_gray_png(out / name, image)
        names.append(name)
    (out / "stack.txt").write_text("\n".join(names) + "\n")
    write_pfm(out / "gt.pfm", gt)
    write_depth_png(out / "gt.png", gt)
    write_manifest(out / "manifest.txt", {"command": "simulate", **p})
    log.info("wrote %d slices to %s", spec.n_slices, out)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    from .io import write_depth_png, write_manifest, write_pfm
    from .tv_admm import solve

    p = resolve(SOLVER_PARAMS, args)
    config = solver_config(p)
    stack, paths = load_input_stack(args.stack)
    out = output_dir(args.out)
    depth, diag = solve(stack, config, degree=p["degree"])
    write_pfm(out / "depth.pfm", depth)
    write_depth_png(out / "depth.png", depth)
    diag.write_csv(out / "diagnostics.csv")
    write_manifest(out / "manifest.txt", {"command": "reconstruct", "stack": args.stack,
                                          "stack.sha256": stack_digest(paths), **p})
    log.info("final energy %.6g after %d iterations", diag.energy[-1], config.iterations)
    return EXIT_OK


def cmd_baseline(args) -> int:
    from .classical import PRESETS, baseline_pipeline
    from .image_stack import check_window
    from .io import write_depth_png, write_manifest, write_pfm

    p = resolve(BASELINE_PARAMS, args)
    if p["preset"] not in PRESETS:
        raise UsageError(f"unknown preset {p['preset']!r}; expected one of {sorted(PRESETS)}")
    contrast_window, median_window = PRESETS[p["preset"]]
    if p["contrast_window"] is not None:
        contrast_window = p["contrast_window"]
    if p["median_window"] is not None:
        median_window = p["median_window"] or None
    check_window(contrast_window)
    if median_window is not None:
        check_window(median_window)
    stack, paths = load_input_stack(args.stack)
    out = output_dir(args.out)
    depth = baseline_pipeline(stack, contrast_window, median_window)
    write_pfm(out / "depth.pfm", depth)
    write_depth_png(out / "depth.png", np.clip(depth, 0.0, 1.0))
    write_manifest(out / "manifest.txt", {
        "command": "baseline", "stack": args.stack, "stack.sha256": stack_digest(paths),
        "preset": p["preset"], "contrast_window": contrast_window, "median_window": median_window,
    })
    return EXIT_OK


def cmd_evaluate(args) -> int:
    import csv

    from .io import read_pfm
    from .simulate import score

    p = resolve(EVALUATE_PARAMS, args)
    for path in (args.estimate, args.ground_truth):
        if not Path(path).is_file():
            raise UsageError(f"{path} not found")
    est, gt = read_pfm(args.estimate), read_pfm(args.ground_truth)
    if est.shape != gt.shape:
        raise UsageError(f"dimension mismatch: {est.shape} vs {gt.shape}")
    mse, rmse = score(est, gt, p["slices"], units="slices")
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if not args.no_header:
        writer.writerow(["shape", "method", "params", "MSE", "RMSE_slices"])
    writer.writerow([p["shape"], p["method"], p["params"], repr(mse), repr(rmse)])
    return EXIT_OK


def cmd_diagnose(args) -> int:
    from .io import write_csv, write_depth_png, write_manifest, write_pfm
    from .tv_admm import solve

    params = dict(SOLVER_PARAMS, alpha=(number, 1.0 / 12.0), iters=(int, 1000))
    p = resolve(params, args)
    config = solver_config(p)
    stack, paths = load_input_stack(args.stack)
    out = output_dir(args.out)
    depth, diag = solve(stack, config, degree=p["degree"])
    diag.write_csv(out / "diagnostics.csv")
    series = diag.decay_series()
    rows = zip(range(1, config.iterations + 1), *(map(repr, map(float, s)) for s in series.values()))
    write_csv(out / "decay.csv", ["iteration", *series], rows)
    write_pfm(out / "depth.pfm", depth)
    write_depth_png(out / "depth.png", depth)
    write_manifest(out / "manifest.txt", {"command": "diagnose", "stack": args.stack,
                                          "stack.sha256": stack_digest(paths), **p})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vdff", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="render a synthetic focal stack with ground truth")
    add_params(sp, SIMULATE_PARAMS)
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reconstruct", help="variational depth reconstruction")
    sp.add_argument("stack", help="image directory or manifest file")
    add_params(sp, SOLVER_PARAMS)
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("baseline", help="windowed MLAP argmax baseline")
    sp.add_argument("stack", help="image directory or manifest file")
    add_params(sp, BASELINE_PARAMS)
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("evaluate", help="score a depth map against ground truth (CSV row)")
    sp.add_argument("estimate")
    sp.add_argument("ground_truth")
    add_params(sp, EVALUATE_PARAMS)
    sp.add_argument("--config")
    sp.add_argument("--no-header", action="store_true")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("diagnose", help="long run with per-iteration decay series")
    sp.add_argument("stack", help="image directory or manifest file")
    add_params(sp, SOLVER_PARAMS)
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except DivergenceDetected as exc:
        print(f"vdff: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, OSError) as exc:
        print(f"vdff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
