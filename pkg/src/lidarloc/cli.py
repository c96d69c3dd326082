"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import pgm
from .classical import grid_search_register, x_offset_grid
from .config import Config, ConfigError, load_config
from .dataset import build_dataset, build_maps, load_dataset, save_dataset, split_dataset, to_arrays
from .errors import LidarLocError, NumericalError
from .localize import evaluate, localize
from .model import PoseValueModel
from .projector import project_depth, render_surface_depth
from .scene import load_cloud, save_cloud
from .se3 import Pose
from .training import train, write_loss_log

log = logging.getLogger("lidarloc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _path_flags(p, *keys):
    for key in keys:
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                       help=f"overrides config key '{key}'")


def build_parser():
    parser = _Parser(prog="lidarloc", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate-scene", parents=[common], help="write a synthetic garage cloud")
    _path_flags(p, "cloud", "sparse_cloud")
    p = sub.add_parser("render-dataset", parents=[common], help="render augmented pairs")
    _path_flags(p, "cloud", "sparse_cloud", "dataset")
    p = sub.add_parser("train", parents=[common], help="train on a rendered dataset")
    _path_flags(p, "dataset", "checkpoint", "loss_log")
    p = sub.add_parser("evaluate", parents=[common], help="test-split error table")
    _path_flags(p, "dataset", "checkpoint", "error_table")
    p = sub.add_parser("localize", parents=[common], help="refine a pose for one image")
    _path_flags(p, "checkpoint", "sparse_cloud", "intensity", "init_pose", "trace")
    p = sub.add_parser("baseline", parents=[common], help="NMI grid-search registration")
    _path_flags(p, "cloud", "intensity", "center_pose", "scores")
    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    return parser


def _config(args):
    cfg = Config()
    if args.config:
        cfg.update(load_config(args.config))
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg.update({k.strip(): v.strip()})
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("config", "seed", "set", "verbose", "command") and v is not None}
    cfg.update(overrides)
    return cfg


def _emit(text, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate_scene(args, cfg):
    out = cfg.require("cloud")
    dcfg = cfg.dataset(args.seed)
    dense, sparse = build_maps(dcfg)
    save_cloud(dense, out)
    print(f"wrote {len(dense)} points to {out}")
    if cfg.get("sparse_cloud"):
        save_cloud(sparse, cfg.get("sparse_cloud"))
        print(f"wrote {len(sparse)} sparse points to {cfg.get('sparse_cloud')}")


def cmd_render_dataset(args, cfg):
    cloud_path = cfg.require("cloud")
    out = cfg.require("dataset")
    dcfg = cfg.dataset(args.seed)
    dense = load_cloud(cloud_path)
    sparse = load_cloud(cfg.get("sparse_cloud")) if cfg.get("sparse_cloud") else None
    samples, _, _, _ = build_dataset(dcfg, dense, sparse)
    tr, va, te = split_dataset(samples, cfg.floats("split"), args.seed)
    save_dataset(out, {"train": tr, "val": va, "test": te})
    print(f"wrote {len(samples)} samples ({len(tr)}/{len(va)}/{len(te)}) to {out}")


def cmd_train(args, cfg):
    splits = load_dataset(cfg.require("dataset"))
    ckpt = cfg.require("checkpoint")
    tcfg = cfg.train(args.seed)
    model = PoseValueModel(seed=args.seed)
    history = train(model, to_arrays(splits["train"]), to_arrays(splits["val"]), tcfg,
                    cfg.weights())
    model.save(ckpt)
    if cfg.get("loss_log"):
        write_loss_log(cfg.get("loss_log"), history)
    last = history[-1]
    print(f"trained {len(history)} epochs: train_pose={last.train_pose:.4f} "
          f"val_pose={last.val_pose:.4f}")


def cmd_evaluate(args, cfg):
    splits = load_dataset(cfg.require("dataset"))
    model = PoseValueModel.load(cfg.require("checkpoint"))
    x, y = to_arrays(splits["test"])
    if len(x) == 0:
        raise LidarLocError("test split is empty")
    _emit(evaluate(model, x, y).to_csv(), cfg.get("error_table"))


def _intensity_and_pose(path):
    img, comments = pgm.load_intensity_pgm(path)
    return img, pgm.pose_from_comments(comments)


def cmd_localize(args, cfg):
    model = PoseValueModel.load(cfg.require("checkpoint"))
    cloud = load_cloud(cfg.require("sparse_cloud"))
    intensity, _ = _intensity_and_pose(cfg.require("intensity"))
    init = Pose.from_string(cfg.require("init_pose"))
    res = localize(intensity, cloud, init, model, cfg.camera(), cfg.clip(),
                   cfg.int("max_iters"), cfg.float("tol"), cfg.int("inpaint_iterations"))
    print(res.pose.to_string())
    print(f"confidence {res.confidence!r}")
    print(f"iterations {res.iterations_used}")
    if res.render_empty:
        print("render_empty 1")
    _emit(res.trace_csv(), cfg.get("trace"))
    if res.render_empty:
        return EXIT_DATA
    return EXIT_OK


def cmd_baseline(args, cfg):
    cloud = load_cloud(cfg.require("cloud"))
    intensity, header_pose = _intensity_and_pose(cfg.require("intensity"))
    center = cfg.get("center_pose")
    center = Pose.from_string(center) if center else header_pose
    if center is None:
        raise ConfigError("missing required key 'center_pose' (no pose in image header)")
    renderers = {"points": project_depth, "surface": render_surface_depth}
    mode = cfg.get("depth_render")
    if mode not in renderers:
        raise ConfigError(f"depth_render must be one of {sorted(renderers)}, got {mode!r}")
    grid = x_offset_grid(cfg.float("grid_extent"), cfg.float("grid_step"))
    _, scores = grid_search_register(intensity, cloud, center, grid, cfg.camera(), cfg.clip(),
                                     cfg.int("bins"), cfg.float("blur_sigma"),
                                     cfg.int("baseline_inpaint_iterations"), cfg.bool("edges"),
                                     renderers[mode])
    lines = ["dx,dy,dz,droll,dpitch,dyaw,score"]
    for d, s in zip(grid, scores):
        lines.append(",".join(repr(float(v)) for v in d.as_vector()) + f",{s!r}")
    _emit("\n".join(lines) + "\n", cfg.get("scores"))


def cmd_gradcheck(args, cfg):
    from .nn.gradcheck import check_model_loss

    worst = 0.0
    for s in range(args.seed, args.seed + cfg.int("gradcheck_seeds")):
        rng = np.random.default_rng(s)
        model = PoseValueModel(seed=s)
        x = rng.random((2, 2, 64, 96))
        y = rng.uniform(-0.1, 0.1, size=(2, 6))
        errs = check_model_loss(model, x, y, cfg.weights(), rng)
        worst = max(worst, max(errs.values()))
    print(f"max relative gradient error: {worst:.3e}")
    return EXIT_OK if worst < 1e-3 else EXIT_NUMERIC


COMMANDS = {
    "generate-scene": cmd_generate_scene,
    "render-dataset": cmd_render_dataset,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "localize": cmd_localize,
    "baseline": cmd_baseline,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        code = COMMANDS[args.command](args, cfg)
        return EXIT_OK if code is None else code
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LidarLocError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
