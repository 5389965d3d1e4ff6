"""Command-line entry points.

Verbs run successive prefixes of the same pipeline:
    align          register image 1 onto image 0, write aligned artifacts
    build-ldi      continue through layering/inpainting, dump the layers
    render         continue through frame rendering
    export-bundle  build the point clouds and write the viewer bundle
    pipeline       everything: frames, manifest, bundle

Flags mirror config keys; --config supplies a YAML file the flags override.
Exit codes: 0 success, otherwise a distinct code per failing stage
(config=2, load=3, align=4, ldi=5, scene-flow=6, render=7, export=8).
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .pipeline import PipelineError, run_pipeline


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--image0", help="first photo (PNG)")
    p.add_argument("--image1", help="second photo (PNG)")
    p.add_argument("--disparity0", help="disparity of image 0 (PFM)")
    p.add_argument("--disparity1", help="disparity of image 1 (PFM)")
    p.add_argument("--flow01", help="forward optical flow (.flo)")
    p.add_argument("--flow10", help="backward optical flow (.flo)")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--fov", type=float, help="horizontal field of view, degrees")
    p.add_argument("--fx", type=float)
    p.add_argument("--fy", type=float)
    p.add_argument("--cx", type=float)
    p.add_argument("--cy", type=float)
    p.add_argument("--cluster-threshold", dest="cluster_threshold", type=float)
    p.add_argument("--inpaint-margin", dest="inpaint_margin", type=int)
    p.add_argument("--static-keep-fraction", dest="static_keep_fraction", type=float)
    p.add_argument("--tau", type=float, help="flow consistency threshold, px")
    p.add_argument("--beta", type=float, help="depth-contrast blend parameter")
    p.add_argument("--base-radius-px", dest="base_radius_px", type=float)
    p.add_argument("--band", type=float, help="relative splat depth band")
    p.add_argument("--alpha-z", dest="alpha_z", type=float)
    p.add_argument("--path-kind", dest="path_kind",
                   choices=["zoom", "track", "circle", "static"])
    p.add_argument("--frames", type=int)
    p.add_argument("--amplitude", type=float,
                   help="camera motion in units of median scene depth")
    p.add_argument("--time-spec", dest="time_spec",
                   choices=["linear", "sine-loop"])
    p.add_argument("--seed", type=int)
    p.add_argument("--dump-intermediates", dest="dump_intermediates",
                   action="store_const", const=True, default=None)


_CONFIG_KEYS = (
    "image0", "image1", "disparity0", "disparity1", "flow01", "flow10",
    "output_dir", "fov", "fx", "fy", "cx", "cy", "cluster_threshold",
    "inpaint_margin", "static_keep_fraction", "tau", "beta", "base_radius_px",
    "band", "alpha_z", "path_kind", "frames", "amplitude", "time_spec",
    "seed", "dump_intermediates",
)

_VERB_PLANS = {
    "align": {"last_stage": "align"},
    "build-ldi": {"last_stage": "ldi"},
    "render": {"last_stage": "render"},
    "export-bundle": {"do_render": False, "do_export": True},
    "pipeline": {},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twoshot",
        description="Space-time novel views from a near-duplicate photo pair")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, doc in (
            ("align", "register the pair and write aligned artifacts"),
            ("build-ldi", "build and dump the layered depth images"),
            ("render", "render the camera path to numbered frames"),
            ("export-bundle", "write the interactive viewer bundle"),
            ("pipeline", "run everything end to end")):
        _add_config_flags(sub.add_parser(verb, help=doc))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config,
                          **{k: getattr(args, k) for k in _CONFIG_KEYS})
    except ConfigError as exc:
        print(f"error: stage 'config' failed: {exc}", file=sys.stderr)
        return 2

    try:
        run_pipeline(cfg, **_VERB_PLANS[args.verb])
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
