#!/usr/bin/env python3
"""
GelMPM Tactile Simulator - Main Entry Point
"""
import argparse
import logging
import os
import sys

# Add project root to path
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from config import APP_NAME, DEFAULT_WORKERS, LOG_FILE, OBJECTS_DIR, VERSION, get_app_info
from core import shapes
from core.bridge import run_session
from core.dataset import DENSITY_COUNTS, PressDatasetManager, compare_runs, format_summary
from core.errors import GelSimError
from core.renderer import IMAGE_SHAPE, crop_align, phong_render
from core.scene_config import SceneConfig
from data.storage import atomic_write_bytes, encode_png, read_depth, setup_logging

logger = logging.getLogger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(prog="gelmpm", description=f"{APP_NAME} {VERSION}")
    parser.add_argument("--log-file", default=None, help=f"log file (e.g. {LOG_FILE})")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")
    sub = parser.add_subparsers(dest="command", required=True)

    def scene_options(p):
        p.add_argument("--config", help="scene JSON file")
        p.add_argument("--desk", action="store_true", help="start from the desk-scale preset")

    p = sub.add_parser("dataset", help="run the press-grid dataset")
    scene_options(p)
    p.add_argument("--output", help="dataset directory")
    p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--deterministic", dest="deterministic", action="store_true", default=None)
    mode.add_argument("--fast", dest="deterministic", action="store_false")
    p.add_argument("--seed", type=int, help="indenter subsampling seed")
    p.add_argument("--objects", nargs="+", help="point-cloud files or analytic object names")
    p.add_argument("--no-resume", action="store_true", help="ignore an existing manifest")
    p.add_argument("--analytic-count", type=int, default=shapes.DEFAULT_POINT_COUNT,
                   help="points generated per analytic object before subsampling")

    p = sub.add_parser("compare", help="SSIM / PSNR / MAE between two datasets")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.add_argument("--output", help="CSV path (default DIR_A/compare.csv)")

    p = sub.add_parser("serve", help="run the co-simulation bridge")
    scene_options(p)
    endpoint = p.add_mutually_exclusive_group()
    endpoint.add_argument("--tcp", metavar="HOST:PORT")
    endpoint.add_argument("--stdio", action="store_true", default=True)
    p.add_argument("--output", help="root directory for session outputs")

    p = sub.add_parser("render", help="render a depth map file to a tactile image")
    scene_options(p)
    p.add_argument("depth", help="depth .bin file (with .json header)")
    p.add_argument("--output", required=True, help="PNG path")
    p.add_argument("--object", help="alignment table entry")

    p = sub.add_parser("print-defaults", help="print the default scene JSON")
    p.add_argument("--desk", action="store_true")

    p = sub.add_parser("generate-objects", help="write the analytic indenter corpus as PLY")
    p.add_argument("output_dir", nargs="?", default=str(OBJECTS_DIR), help=f"default {OBJECTS_DIR}")
    p.add_argument("--count", type=int, default=shapes.DEFAULT_POINT_COUNT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", nargs="+", choices=sorted(shapes.SHAPES))

    p = sub.add_parser("density-variants", help="one object at several indenter particle counts")
    scene_options(p)
    p.add_argument("object", help="point-cloud file or analytic object name")
    p.add_argument("--counts", type=int, nargs="+", default=list(DENSITY_COUNTS))
    p.add_argument("--output", help="parent directory of the n<count> datasets")
    p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    return parser


class GelMPMApp:
    """Command dispatcher"""

    def __init__(self, args):
        self.args = args

    def load_scene(self):
        args = self.args
        if getattr(args, "config", None):
            scene = SceneConfig.load(args.config)
            if args.desk:
                logger.warning("--desk ignored because --config was given")
        elif getattr(args, "desk", False):
            scene = SceneConfig.desk()
        else:
            scene = SceneConfig()

        overrides = {}
        if getattr(args, "seed", None) is not None:
            overrides["indenter"] = {"seed": args.seed}
        if getattr(args, "deterministic", None) is not None:
            overrides["deterministic"] = args.deterministic
        if getattr(args, "output", None):
            overrides["output_dir"] = args.output
        return scene.with_overrides(overrides) if overrides else scene

    def cmd_dataset(self):
        scene = self.load_scene()
        manager = PressDatasetManager(scene, analytic_count=self.args.analytic_count)
        run_dir = manager.run_press_dataset(self.args.objects, workers=self.args.workers,
                                            resume=not self.args.no_resume)
        print(run_dir)

    def cmd_compare(self):
        _, summary = compare_runs(self.args.dir_a, self.args.dir_b, self.args.output)
        for metric, text in format_summary(summary).items():
            print(f"{metric.upper():5s} {text}")

    def cmd_serve(self):
        scene = self.load_scene()
        scene.validate()
        endpoint = self.args.tcp or "stdio"
        run_session(endpoint, base_scene=scene, output_root=self.args.output)

    def cmd_render(self):
        scene = self.load_scene()
        depth = read_depth(self.args.depth)
        if depth.values.shape != IMAGE_SHAPE:
            depth = crop_align(depth, scene.alignment.lookup(self.args.object))
        image = phong_render(depth, scene.render.light_sources(), scene.render.params())
        atomic_write_bytes(self.args.output, encode_png(image))
        print(self.args.output)

    def cmd_print_defaults(self):
        scene = SceneConfig.desk() if self.args.desk else SceneConfig()
        print(scene.to_json())

    def cmd_generate_objects(self):
        written = shapes.write_object_corpus(self.args.output_dir, self.args.objects,
                                             count=self.args.count, seed=self.args.seed)
        for path in written.values():
            print(path)

    def cmd_density_variants(self):
        scene = self.load_scene()
        manager = PressDatasetManager(scene)
        result = manager.run_density_variants(self.args.object, counts=self.args.counts,
                                              workers=self.args.workers)
        for count, mae in result.items():
            print(f"n{count}: MAE {100 * mae:.2f}%")

    def run(self):
        handler = getattr(self, "cmd_" + self.args.command.replace("-", "_"))
        try:
            handler()
        except GelSimError as e:
            logger.error(f"{type(e).__name__}: {e}")
            return 2
        return 0


def main(argv=None):
    """Main application entry point"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_file, args.log_level)
    logger.debug(f"App info: {get_app_info()}")
    return GelMPMApp(args).run()


if __name__ == "__main__":
    sys.exit(main())
