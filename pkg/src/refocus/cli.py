"""Command-line entry point.

Subcommands: render, oracle, synth, eval, mask, mpi-dump, serve.  Any flag
can also come from a TOML file given with --config (one table per
subcommand); explicit command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .builder import BackgroundLayer, BackgroundSet, inpaint_disparity
from .compositor import save_stack
from .core import (
    Mask,
    RenderParams,
    image_from_png_bytes,
    load_disparity,
    load_image,
    save_disparity,
    save_image,
)
from .estimator import MpiBokehRenderer
from .metrics import evaluate
from .occlusion import OcclusionConfig, occlusion_mask_stages
from .oracle import load_scene, trace_bokeh
from .synth import DatasetConfig, generate_dataset

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


_RENDER_DEFAULTS = dict(
    gamma=2.2,
    planes=32,
    backgrounds=1,
    grad_threshold=0.05,
    min_segment=20,
    extend_iters=None,
    dilate_px=5,
    inpaint_iters=1000,
)


def _occlusion_flags(sub):
    sub.add_argument("--grad-threshold", type=float, help="depth-edge gradient threshold")
    sub.add_argument("--min-segment", type=int, help="minimum edge component size (px)")
    sub.add_argument("--extend-iters", type=int, help="mask extension iterations")
    sub.add_argument("--dilate-px", type=int, help="final mask dilation (px)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refocus",
        description="Refocusable bokeh rendering from an image and a disparity map",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    render = subs.add_parser(
        "render", argument_default=argparse.SUPPRESS, help="render bokeh end to end"
    )
    render.add_argument("--config", help="TOML file supplying flag defaults")
    render.add_argument("--image", help="all-in-focus PNG")
    render.add_argument("--disparity", help="disparity PNG (8/16-bit gray)")
    render.add_argument("--out", help="output PNG")
    render.add_argument("--blur", type=float, help="blur parameter (px per unit disparity)")
    render.add_argument("--refocus", type=float, help="refocused disparity in [0,1]")
    render.add_argument("--focus-xy", type=float, nargs=2, metavar=("X", "Y"), help="focus at image point")
    render.add_argument("--focus-snap", action="store_true", help="snap focus to nearest plane center")
    render.add_argument("--gamma", type=float, help="gamma (default 2.2)")
    render.add_argument("--planes", type=int, help="plane count (default 32)")
    render.add_argument("--hard-zones", action="store_true", help="hard disparity bins instead of soft hats")
    render.add_argument("--no-normalize", action="store_true", help="skip weight normalization")
    render.add_argument("--no-background", action="store_true", help="visible-surface-only ablation")
    render.add_argument("--background", help="externally inpainted background PNG (skips built-in inpainter)")
    render.add_argument("--backgrounds", type=int, help="inpainted background levels (default 1)")
    render.add_argument("--inpaint-iters", type=int, help="diffusion sweeps of the built-in inpainter")
    render.add_argument("--dump-stack", help="directory to dump the plane stack to")
    _occlusion_flags(render)

    oracle = subs.add_parser(
        "oracle", argument_default=argparse.SUPPRESS, help="ray-traced ground-truth bokeh"
    )
    oracle.add_argument("--config", help="TOML file supplying flag defaults")
    oracle.add_argument("--scene", help="scene JSON")
    oracle.add_argument("--out", help="output PNG")
    oracle.add_argument("--blur", type=float)
    oracle.add_argument("--refocus", type=float)
    oracle.add_argument("--gamma", type=float)
    oracle.add_argument("--rays", type=int, help="aperture samples (default 2500)")
    oracle.add_argument("--seed", type=int)

    synth = subs.add_parser(
        "synth", argument_default=argparse.SUPPRESS, help="generate a synthetic dataset"
    )
    synth.add_argument("--config", help="TOML file supplying flag defaults")
    synth.add_argument("--out", help="output directory")
    synth.add_argument("--scenes", type=int, help="number of scenes (default 10)")
    synth.add_argument("--size", type=int, help="square resolution (default 256)")
    synth.add_argument("--foregrounds", type=int, help="foreground objects per scene (default 3)")
    synth.add_argument("--mode", choices=("constant", "planar"), help="disparity mode")
    synth.add_argument("--blur", type=float, nargs="+", help="blur parameters (default 20 40 60 80)")
    synth.add_argument("--refocus", nargs="+", help="'objects' or explicit disparities")
    synth.add_argument("--gamma", type=float)
    synth.add_argument("--rays", type=int, help="aperture samples per bokeh (default 2500)")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--bg-dir", help="background asset directory")
    synth.add_argument("--fg-dir", help="foreground asset directory")

    ev = subs.add_parser(
        "eval", argument_default=argparse.SUPPRESS, help="evaluate predictions against a manifest"
    )
    ev.add_argument("--config", help="TOML file supplying flag defaults")
    ev.add_argument("--pred", help="prediction directory")
    ev.add_argument("--gt", help="ground-truth manifest.json")
    ev.add_argument("--out", help="report JSON path")
    ev.add_argument("--label", help="method label for the report")

    mask = subs.add_parser(
        "mask", argument_default=argparse.SUPPRESS, help="occlusion mask from a disparity map"
    )
    mask.add_argument("--config", help="TOML file supplying flag defaults")
    mask.add_argument("--disparity")
    mask.add_argument("--out", help="final mask PNG")
    mask.add_argument("--debug-dir", help="also write initial/cleaned/extended masks here")
    _occlusion_flags(mask)

    dump = subs.add_parser(
        "mpi-dump", argument_default=argparse.SUPPRESS, help="build a stack and dump it as PNGs"
    )
    dump.add_argument("--config", help="TOML file supplying flag defaults")
    dump.add_argument("--image")
    dump.add_argument("--disparity")
    dump.add_argument("--out-dir")
    dump.add_argument("--gamma", type=float)
    dump.add_argument("--planes", type=int)
    dump.add_argument("--hard-zones", action="store_true")
    dump.add_argument("--no-background", action="store_true")
    dump.add_argument("--backgrounds", type=int)
    dump.add_argument("--inpaint-iters", type=int)
    _occlusion_flags(dump)

    serve = subs.add_parser(
        "serve", argument_default=argparse.SUPPRESS, help="run the HTTP render service"
    )
    serve.add_argument("--config", help="TOML file supplying flag defaults")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.add_argument("--session-cap", type=int, help="LRU session capacity (default 8)")
    serve.add_argument("--max-bytes", type=int, help="upload size limit (default 32 MiB)")
    serve.add_argument("--ui-dir", help="static UI bundle to serve under /ui")

    return parser


def _merged_options(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults <- TOML section <- explicit CLI flags."""
    merged = dict(defaults)
    provided = {k: v for k, v in vars(args).items() if k != "command"}
    config_path = provided.pop("config", None)
    if config_path:
        doc = tomllib.loads(Path(config_path).read_text())
        section = doc.get(args.command.replace("-", "_"), doc)
        for key, value in section.items():
            key = key.replace("-", "_")
            merged[key] = value
    merged.update(provided)
    return merged


def _require(opts: dict, command: str, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise SystemExit(f"{command}: missing required option(s): {flags}")


def _occlusion_from(opts: dict, renderer_kwargs: dict):
    for key in ("grad_threshold", "min_segment", "extend_iters", "dilate_px"):
        if opts.get(key) is not None:
            renderer_kwargs[key] = opts[key]


def _cmd_render(args) -> int:
    opts = _merged_options(
        args,
        dict(
            _RENDER_DEFAULTS,
            image=None,
            disparity=None,
            out=None,
            blur=None,
            refocus=None,
            focus_xy=None,
            focus_snap=False,
            hard_zones=False,
            no_normalize=False,
            no_background=False,
            background=None,
            dump_stack=None,
        ),
    )
    _require(opts, "render", "image", "disparity", "out", "blur")
    if (opts["refocus"] is None) == (opts["focus_xy"] is None):
        raise SystemExit("render: give exactly one of --refocus or --focus-xy")
    image = load_image(opts["image"])
    disparity = load_disparity(opts["disparity"])
    kwargs = dict(
        n_planes=opts["planes"],
        gamma=opts["gamma"],
        soft_zones=not opts["hard_zones"],
        normalize=not opts["no_normalize"],
        n_backgrounds=opts["backgrounds"],
        use_background=not opts["no_background"],
        inpaint_iters=opts["inpaint_iters"],
    )
    _occlusion_from(opts, kwargs)
    renderer = MpiBokehRenderer(**kwargs)
    background = (
        load_image(opts["background"]) if opts.get("background") else None
    )
    renderer.fit(image, disparity, background=background)
    if opts["focus_xy"] is not None:
        refocus = renderer.focus_at(*opts["focus_xy"], snap=opts["focus_snap"])
    else:
        refocus = opts["refocus"]
    out = renderer.render(opts["blur"], refocus_disparity=refocus)
    save_image(out, opts["out"])
    if opts.get("dump_stack"):
        save_stack(renderer.stack_for_gamma(opts["gamma"]), opts["dump_stack"], opts["gamma"])
    print(f"wrote {opts['out']} (refocus d={refocus:.4f})")
    return 0


def _cmd_oracle(args) -> int:
    opts = _merged_options(
        args, dict(scene=None, out=None, blur=None, refocus=None, gamma=2.2, rays=2500, seed=0)
    )
    _require(opts, "oracle", "scene", "out", "blur", "refocus")
    scene = load_scene(opts["scene"])
    params = RenderParams(opts["blur"], opts["refocus"], gamma=opts["gamma"])
    out = trace_bokeh(scene, params, n_samples=opts["rays"], seed=opts["seed"])
    save_image(out, opts["out"])
    print(f"wrote {opts['out']}")
    return 0


def _cmd_synth(args) -> int:
    opts = _merged_options(
        args,
        dict(
            scenes=10,
            size=256,
            foregrounds=3,
            mode="constant",
            blur=[20.0, 40.0, 60.0, 80.0],
            refocus=["objects"],
            gamma=2.2,
            rays=2500,
            seed=0,
            bg_dir=None,
            fg_dir=None,
            out=None,
        ),
    )
    _require(opts, "synth", "out")
    refocus = opts["refocus"]
    if refocus == ["objects"] or refocus == "objects":
        mode, values = "objects", ()
    else:
        mode, values = "explicit", tuple(float(v) for v in refocus)
    cfg = DatasetConfig(
        n_scenes=opts["scenes"],
        resolution=(opts["size"], opts["size"]),
        n_foregrounds=opts["foregrounds"],
        disparity_mode=opts["mode"],
        blur_params=tuple(opts["blur"]),
        refocus_mode=mode,
        refocus_values=values,
        gamma=opts["gamma"],
        rays=opts["rays"],
        seed=opts["seed"],
        background_dir=opts["bg_dir"],
        foreground_dir=opts["fg_dir"],
    )
    manifest = generate_dataset(cfg, opts["out"])
    print(f"wrote {opts['out']}/manifest.json ({len(manifest['scenes'])} scenes)")
    return 0


def _cmd_eval(args) -> int:
    opts = _merged_options(args, dict(pred=None, gt=None, out=None, label="predictions"))
    _require(opts, "eval", "pred", "gt")
    report = evaluate(opts["pred"], opts["gt"], method=opts["label"])
    print(report.to_table())
    if opts.get("out"):
        Path(opts["out"]).write_text(report.to_json())
        print(f"wrote {opts['out']}")
    return 0


def _cmd_mask(args) -> int:
    opts = _merged_options(
        args,
        dict(
            grad_threshold=0.05,
            min_segment=20,
            extend_iters=16,
            dilate_px=5,
            debug_dir=None,
            disparity=None,
            out=None,
        ),
    )
    _require(opts, "mask", "disparity", "out")
    disparity = load_disparity(opts["disparity"])
    cfg = OcclusionConfig(
        grad_threshold=opts["grad_threshold"],
        min_segment=opts["min_segment"],
        extend_iters=opts["extend_iters"],
        dilate_px=opts["dilate_px"],
    )
    stages = occlusion_mask_stages(disparity, cfg)
    _save_mask(stages["final"], opts["out"])
    if opts.get("debug_dir"):
        debug = Path(opts["debug_dir"])
        for name in ("initial", "cleaned", "extended", "final"):
            _save_mask(stages[name], debug / f"mask_{name}.png")
        print(f"wrote debug masks to {debug}")
    print(f"wrote {opts['out']}")
    return 0


def _save_mask(mask: Mask, path):
    from .core import ImageBuffer

    save_image(ImageBuffer(mask.data[:, :, None]), path)


def _cmd_mpi_dump(args) -> int:
    opts = _merged_options(
        args,
        dict(
            _RENDER_DEFAULTS,
            image=None,
            disparity=None,
            out_dir=None,
            hard_zones=False,
            no_background=False,
        ),
    )
    _require(opts, "mpi-dump", "image", "disparity", "out_dir")
    image = load_image(opts["image"])
    disparity = load_disparity(opts["disparity"])
    kwargs = dict(
        n_planes=opts["planes"],
        gamma=opts["gamma"],
        soft_zones=not opts["hard_zones"],
        use_background=not opts["no_background"],
        n_backgrounds=opts["backgrounds"],
        inpaint_iters=opts["inpaint_iters"],
    )
    _occlusion_from(opts, kwargs)
    renderer = MpiBokehRenderer(**kwargs).fit(image, disparity)
    save_stack(renderer.stack_for_gamma(opts["gamma"]), opts["out_dir"], opts["gamma"])
    print(f"wrote stack to {opts['out_dir']}")
    return 0


def _cmd_serve(args) -> int:
    opts = _merged_options(
        args,
        dict(host="127.0.0.1", port=8000, session_cap=8, max_bytes=32 * 1024 * 1024, ui_dir=None),
    )
    from .service import serve

    serve(
        host=opts["host"],
        port=opts["port"],
        session_cap=opts["session_cap"],
        max_bytes=opts["max_bytes"],
        ui_dir=opts["ui_dir"],
    )
    return 0


_COMMANDS = {
    "render": _cmd_render,
    "oracle": _cmd_oracle,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "mask": _cmd_mask,
    "mpi-dump": _cmd_mpi_dump,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except (ValueError, TypeError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
