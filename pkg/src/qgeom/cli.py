"""Command-line entry point: ``qgeom {prepare,quadrics,fit,eval,replay}``.

Exit codes: 0 ok, 2 usage or I/O error, 3 numerical failure during a fit.
Every command accepts ``--seed`` (default 42) and can record a run manifest
that ``qgeom replay`` re-executes with identical outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NonFiniteLoss, QGeomError
from .fit_optimizer import FitConfig, default_config, fit_points
from .losses import LOSS_NAMES, LossValue, LossWeights, prepare_target
from .mesh_core import connected_components, normalize_unit_sphere, warn_degenerate
from .mesh_io import load_mesh, load_points, save_mesh, save_points
from .metrics import DEFAULT_METRO_SAMPLES, evaluate, table_csv, table_row
from .quadrics import accumulate_vertex_quadrics, write_quadrics_csv
from .simplify import simplify_to

log = logging.getLogger("qgeom")

DEFAULT_SEED = 42
PRESETS = ("chamfer", "quadric", "chamfer+quadric", "chamfer+surface", "chamfer+normal")
ORDERS = ("split-simplify", "simplify-split")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _weight(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not np.isfinite(value) or value < 0:
        raise argparse.ArgumentTypeError(f"weight must be finite and >= 0, got {text}")
    return value


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(command, inputs, options, seed, out, config=None):
    m = {"tool": "qgeom", "version": __version__, "command": command,
         "inputs": {k: os.path.abspath(v) for k, v in inputs.items()},
         "options": options, "seed": seed, "out": os.path.abspath(out) if out else None}
    if config is not None:
        m["config"] = config.to_dict()
    return m


# --------------------------------------------------------------------- prepare

def run_prepare(mesh_path, out_dir, target_vertices=2500, split=True, order="split-simplify",
                normalize=True, fmt="off"):
    mesh = load_mesh(mesh_path)
    warn_degenerate(mesh, str(mesh_path))
    if order not in ORDERS:
        raise UsageError(f"unknown order {order!r}")

    def reduce(m):
        return simplify_to(m, target_vertices).mesh

    if not split:
        parts = [reduce(mesh)]
    elif order == "split-simplify":
        parts = [reduce(c) for c in connected_components(mesh)]
    else:
        parts = connected_components(reduce(mesh))
    if normalize:
        parts = [normalize_unit_sphere(p)[0] for p in parts]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, part in enumerate(parts):
        path = out / f"component_{i:03d}.{fmt}"
        save_mesh(part, path)
        written.append(path)
    return written


def cmd_prepare(args):
    options = {"target_vertices": args.target_vertices, "split": args.split,
               "order": args.order, "normalize": args.normalize, "format": args.format}
    written = run_prepare(args.mesh, args.out, args.target_vertices, args.split, args.order,
                          args.normalize, args.format)
    _dump_json(_manifest("prepare", {"mesh": args.mesh}, options, args.seed, args.out),
               Path(args.out) / "manifest.json")
    for path in written:
        print(path)
    return EXIT_OK


# -------------------------------------------------------------------- quadrics

def cmd_quadrics(args):
    mesh = load_mesh(args.mesh)
    warn_degenerate(mesh, str(args.mesh))
    write_quadrics_csv(accumulate_vertex_quadrics(mesh, args.area_weighted), args.out)
    if args.manifest:
        _dump_json(_manifest("quadrics", {"mesh": args.mesh},
                             {"area_weighted": args.area_weighted}, args.seed, args.out),
                   args.manifest)
    return EXIT_OK


# ------------------------------------------------------------------------- fit

def config_from_args(args):
    weights = LossWeights.from_preset(args.preset).as_dict()
    for name in LOSS_NAMES:
        override = getattr(args, f"loss_{name}")
        if override is not None:
            weights[name] = override
    try:
        weights = LossWeights(**weights)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    overrides = {"steps": args.steps, "seed": args.seed, "num_points": args.num_points,
                 "jitter_sigma": args.jitter, "init": args.init}
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.lr_decay is not None:
        overrides["lr_decay_factor"] = args.lr_decay
    if args.lr_decay_every is not None:
        overrides["lr_decay_every"] = args.lr_decay_every
    try:
        return default_config(weights, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def run_fit(mesh_path, config, out_dir, samples=DEFAULT_METRO_SAMPLES):
    """Fit, then write ``cloud.xyz``, ``trace.csv``, ``report.json`` and ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = load_mesh(mesh_path)
    warn_degenerate(mesh, str(mesh_path))
    bundle = prepare_target(mesh)
    _dump_json(_manifest("fit", {"mesh": mesh_path}, {"samples": samples}, config.seed, out, config),
               out / "manifest.json")
    try:
        trace = fit_points(bundle, config)
    except NonFiniteLoss as exc:
        if exc.trace is not None:
            (out / "trace.csv").write_text(exc.trace.to_csv())
        raise
    (out / "trace.csv").write_text(trace.to_csv())
    save_points(trace.final, out / "cloud.xyz")
    report = evaluate(np.asarray(trace.final), bundle.mesh, samples, config.seed).to_dict()
    label = "+".join(n for n in LOSS_NAMES if getattr(config.weights, n) > 0)
    report["final_loss"] = LossValue(label, float(sum(
        getattr(config.weights, n) * v for n, v in trace.final_components.items())),
        None, trace.final_components).to_dict()
    _dump_json(report, out / "report.json")
    return trace


def cmd_fit(args):
    run_fit(args.mesh, config_from_args(args), args.out, args.samples)
    return EXIT_OK


# ------------------------------------------------------------------------ eval

def run_eval(cloud_path, mesh_path, samples=DEFAULT_METRO_SAMPLES, seed=DEFAULT_SEED,
             as_csv=False, label=""):
    cloud = load_points(cloud_path)
    mesh = load_mesh(mesh_path)
    report = evaluate(np.asarray(cloud), mesh, samples, seed)
    if as_csv:
        return table_csv([table_row([report], label)])
    return report.to_json() + "\n"


def cmd_eval(args):
    text = run_eval(args.cloud, args.mesh, args.samples, args.seed, args.csv, args.label)
    sys.stdout.write(text)
    if args.manifest:
        _dump_json(_manifest("eval", {"cloud": args.cloud, "mesh": args.mesh},
                             {"samples": args.samples, "csv": args.csv, "label": args.label},
                             args.seed, None), args.manifest)
    return EXIT_OK


# ---------------------------------------------------------------------- replay

def replay(manifest_path, out=None):
    """Re-run the command recorded in a manifest; ``out`` overrides its output location."""
    try:
        m = json.loads(Path(manifest_path).read_text())
        command, inputs, options = m["command"], m["inputs"], m["options"]
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{manifest_path}: not a qgeom manifest ({exc})") from None
    target = out if out is not None else m.get("out")
    if command == "fit":
        run_fit(inputs["mesh"], FitConfig.from_dict(m["config"]), target, options["samples"])
    elif command == "prepare":
        run_prepare(inputs["mesh"], target, options["target_vertices"], options["split"],
                    options["order"], options["normalize"], options["format"])
        _dump_json(dict(m, out=os.path.abspath(target)), Path(target) / "manifest.json")
    elif command == "quadrics":
        mesh = load_mesh(inputs["mesh"])
        write_quadrics_csv(accumulate_vertex_quadrics(mesh, options["area_weighted"]), target)
    elif command == "eval":
        text = run_eval(inputs["cloud"], inputs["mesh"], options["samples"], m["seed"],
                        options["csv"], options["label"])
        if target:
            Path(target).write_text(text)
        else:
            sys.stdout.write(text)
    else:
        raise UsageError(f"unknown command {command!r} in manifest")


def cmd_replay(args):
    replay(args.manifest, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(prog="qgeom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qgeom {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed (default 42)")
        return p

    p = common(sub.add_parser("prepare", help="split, simplify and normalize a mesh"))
    p.add_argument("mesh")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--target-vertices", type=_positive_int, default=2500)
    p.add_argument("--no-split", dest="split", action="store_false",
                   help="keep the mesh as one piece")
    p.add_argument("--order", choices=ORDERS, default="split-simplify")
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--format", choices=("off", "obj", "ply"), default="off")
    p.set_defaults(func=cmd_prepare)

    p = common(sub.add_parser("quadrics", help="dump per-vertex quadric coefficients as CSV"))
    p.add_argument("mesh")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--area-weighted", action="store_true")
    p.add_argument("--manifest", help="also write a run manifest here")
    p.set_defaults(func=cmd_quadrics)

    p = common(sub.add_parser("fit", help="optimize a point cloud against a mesh"))
    p.add_argument("mesh")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", choices=PRESETS, default="chamfer")
    for name in LOSS_NAMES:
        p.add_argument(f"--loss-{name}", type=_weight, default=None, metavar="W",
                       help=f"weight of the {name} term (overrides the preset)")
    p.add_argument("--steps", type=_positive_int, default=1000)
    p.add_argument("--lr", type=float, default=None,
                   help="learning rate (default 1e-3, or 1e-4 when the quadric term is on)")
    p.add_argument("--lr-decay", type=float, default=None, help="decay factor (default 0.8)")
    p.add_argument("--lr-decay-every", type=_positive_int, default=None,
                   help="steps between decays (default 100)")
    p.add_argument("--num-points", type=_positive_int, default=2500)
    p.add_argument("--init", choices=("jittered_vertices", "uniform_sphere"),
                   default="jittered_vertices")
    p.add_argument("--jitter", type=float, default=0.05, help="initial jitter sigma")
    p.add_argument("--samples", type=_positive_int, default=DEFAULT_METRO_SAMPLES,
                   help="max points used for the Metro distance")
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("eval", help="score a point cloud against a mesh"))
    p.add_argument("cloud")
    p.add_argument("mesh")
    p.add_argument("--samples", type=_positive_int, default=DEFAULT_METRO_SAMPLES)
    p.add_argument("--csv", action="store_true", help="print a results-table CSV row")
    p.add_argument("--label", default="", help="loss column value for --csv")
    p.add_argument("--manifest", help="also write a run manifest here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the recorded output location")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"qgeom: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, QGeomError, OSError, ValueError) as exc:
        print(f"qgeom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
