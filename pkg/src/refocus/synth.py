"""Synthetic scene and dataset generation.

Scenes are composed from one full-frame background and a few RGBA
foreground cutouts placed at random positions, each on its own planar
disparity surface.  Objects occupy disjoint disparity bands ordered
back-to-front, so scene validity holds by construction.  The generator
emits, per scene: the all-in-focus composite, the 16-bit disparity map, the
scene description (JSON + layer PNGs), and ray-traced bokeh renders over a
grid of blur parameters and refocus disparities, plus a manifest with
SHA-256 checksums of every file.

Everything is driven by a single integer seed: the same config and seed
reproduce every byte.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .core import (
    DTYPE,
    DisparityMap,
    ImageBuffer,
    RenderParams,
    save_disparity,
    save_image,
)
from .oracle import PlanarLayer, SceneSpec, composite_all_in_focus, save_scene, trace_bokeh

MANIFEST_VERSION = 1

_DISPARITY_LO = 0.04
_DISPARITY_HI = 0.96


@dataclass(frozen=True)
class DatasetConfig:
    """Recipe for a synthetic bokeh test set."""

    n_scenes: int = 10
    resolution: tuple = (256, 256)
    n_foregrounds: int = 3
    disparity_mode: str = "constant"  # "constant" | "planar"
    blur_params: tuple = (20.0, 40.0, 60.0, 80.0)
    refocus_mode: str = "objects"  # "objects" | explicit tuple of floats
    refocus_values: tuple = ()
    gamma: float = 2.2
    rays: int = 2500
    seed: int = 0
    background_dir: str | None = None
    foreground_dir: str | None = None

    def __post_init__(self):
        if self.n_scenes < 1:
            raise ValueError("n_scenes must be >= 1")
        if min(self.resolution) < 64:
            raise ValueError("resolution must be at least 64")
        if not self.blur_params:
            raise ValueError("blur_params must be nonempty")
        if self.rays < 1:
            raise ValueError("rays must be >= 1")
        if self.disparity_mode not in ("constant", "planar"):
            raise ValueError("disparity_mode must be 'constant' or 'planar'")
        if self.refocus_mode not in ("objects", "explicit"):
            raise ValueError("refocus_mode must be 'objects' or 'explicit'")
        if self.refocus_mode == "explicit" and not self.refocus_values:
            raise ValueError("explicit refocus mode needs refocus_values")
        object.__setattr__(self, "resolution", tuple(int(v) for v in self.resolution))
        object.__setattr__(
            self, "blur_params", tuple(float(v) for v in self.blur_params)
        )
        object.__setattr__(
            self, "refocus_values", tuple(float(v) for v in self.refocus_values)
        )

    def to_dict(self) -> dict:
        return {
            "n_scenes": self.n_scenes,
            "resolution": list(self.resolution),
            "n_foregrounds": self.n_foregrounds,
            "disparity_mode": self.disparity_mode,
            "blur_params": list(self.blur_params),
            "refocus_mode": self.refocus_mode,
            "refocus_values": list(self.refocus_values),
            "gamma": self.gamma,
            "rays": self.rays,
            "seed": self.seed,
        }


def bundled_asset_dirs():
    """Directories of the small CC0-style assets shipped for offline tests."""
    root = Path(__file__).parent / "assets"
    return root / "backgrounds", root / "foregrounds"


def _list_pngs(directory) -> list:
    paths = sorted(Path(directory).glob("*.png"))
    if not paths:
        raise FileNotFoundError(f"no PNG assets in {directory}")
    return paths


def _load_quantized(path) -> np.ndarray:
    """Asset as float array; values stay on the 8-bit grid."""
    img = Image.open(path)
    img.load()
    if img.mode not in ("RGB", "RGBA"):
        img = img.convert("RGBA" if "A" in img.getbands() else "RGB")
    return np.asarray(img, dtype=DTYPE) / 255.0


def _resize_quantized(arr: np.ndarray, size: tuple) -> np.ndarray:
    """Resize keeping values on the 8-bit grid (assets are 8-bit anyway)."""
    mode = "RGBA" if arr.shape[2] == 4 else "RGB"
    pil = Image.fromarray(np.rint(arr * 255.0).astype(np.uint8), mode=mode)
    pil = pil.resize(size, Image.LANCZOS)
    return np.asarray(pil, dtype=DTYPE) / 255.0


def _plane_through(center_xy, d_center, slope_xy):
    """Plane coefficients (a, b, c) with given disparity and slope at center."""
    gx, gy = slope_xy
    xc, yc = center_xy
    d_origin = d_center - gx * xc - gy * yc
    if d_origin <= 1e-6:
        raise ValueError("plane extrapolates to non-positive disparity at origin")
    c = 1.0 / d_origin
    return (-c * gx, -c * gy, c)


def _draw_plane(rng, band, size, offset, mode):
    """Draw plane coefficients whose disparity stays inside `band`."""
    lo, hi = band
    width = hi - lo
    w, h = size
    x0, y0 = offset
    xc = x0 + (w - 1) / 2.0
    yc = y0 + (h - 1) / 2.0
    d_center = rng.uniform(lo + 0.25 * width, hi - 0.25 * width)
    if mode == "constant":
        return _plane_through((xc, yc), d_center, (0.0, 0.0)), d_center
    theta = rng.uniform(0.0, 2.0 * np.pi)
    span = abs(np.cos(theta)) * (w - 1) / 2.0 + abs(np.sin(theta)) * (h - 1) / 2.0
    allowed = min(d_center - lo, hi - d_center) * 0.8
    mag = rng.uniform(0.0, 1.0) * (allowed / max(span, 1.0))
    slope = (mag * np.cos(theta), mag * np.sin(theta))
    for _ in range(8):
        try:
            return _plane_through((xc, yc), d_center, slope), d_center
        except ValueError:
            slope = (slope[0] / 2.0, slope[1] / 2.0)
    return _plane_through((xc, yc), d_center, (0.0, 0.0)), d_center


def random_scene(seed: int, cfg: DatasetConfig) -> tuple:
    """Build a random scene; returns (SceneSpec, object disparities b2f)."""
    rng = np.random.default_rng(seed)
    bg_dir, fg_dir = bundled_asset_dirs()
    backgrounds = _list_pngs(cfg.background_dir or bg_dir)
    foregrounds = _list_pngs(cfg.foreground_dir or fg_dir)
    if len(foregrounds) < 1:
        raise FileNotFoundError("need at least one foreground asset")

    w, h = cfg.resolution
    n_bands = cfg.n_foregrounds + 1
    span = (_DISPARITY_HI - _DISPARITY_LO) / n_bands
    bands = [
        (_DISPARITY_LO + k * span, _DISPARITY_LO + (k + 1) * span)
        for k in range(n_bands)
    ]

    bg_arr = _load_quantized(backgrounds[rng.integers(len(backgrounds))])
    if bg_arr.shape[2] == 4:
        bg_arr = bg_arr[:, :, :3]
    bg_arr = _resize_quantized(bg_arr, (w, h))
    bg_rgba = np.concatenate([bg_arr, np.ones((h, w, 1), dtype=DTYPE)], axis=2)
    coeffs, d_bg = _draw_plane(rng, bands[0], (w, h), (0, 0), cfg.disparity_mode)
    layers = [PlanarLayer(ImageBuffer(bg_rgba), coeffs, (0, 0), full_frame=True)]
    object_disparities = [d_bg]

    for k in range(cfg.n_foregrounds):
        arr = _load_quantized(foregrounds[rng.integers(len(foregrounds))])
        if arr.shape[2] != 4:
            raise ValueError("foreground assets must be RGBA")
        scale = rng.uniform(0.3, 0.55)
        size = max(24, int(round(min(w, h) * scale)))
        arr = _resize_quantized(arr, (size, size))
        max_x = max(0, w - size)
        max_y = max(0, h - size)
        offset = (int(rng.integers(0, max_x + 1)), int(rng.integers(0, max_y + 1)))
        coeffs, d_obj = _draw_plane(
            rng, bands[k + 1], (size, size), offset, cfg.disparity_mode
        )
        layers.append(PlanarLayer(ImageBuffer(arr), coeffs, offset))
        object_disparities.append(d_obj)

    return SceneSpec(tuple(layers), (w, h)), object_disparities


def augment_disparity(
    disp: DisparityMap,
    seed: int,
    max_noise: float = 0.02,
    max_blur: float = 2.0,
    max_morph: int = 3,
) -> DisparityMap:
    """Degrade a disparity map the way imperfect predictions are degraded.

    Seeded random magnitudes: additive Gaussian noise (sigma <= max_noise),
    Gaussian blur (sigma <= max_blur), then gray dilation or erosion
    (<= max_morph px).  All magnitudes at 0 give the identity.
    """
    rng = np.random.default_rng(seed)
    data = np.array(disp.data)
    sigma_n = rng.uniform(0.0, max_noise)
    if sigma_n > 0:
        data = data + rng.normal(0.0, sigma_n, size=data.shape)
    sigma_b = rng.uniform(0.0, max_blur)
    if sigma_b > 1e-3:
        data = ndimage.gaussian_filter(data, sigma_b, mode="nearest")
    morph = int(rng.integers(0, max_morph + 1)) if max_morph > 0 else 0
    if morph > 0:
        coords = np.arange(-morph, morph + 1)
        dx, dy = np.meshgrid(coords, coords)
        footprint = (dx * dx + dy * dy) <= morph * morph
        if rng.random() < 0.5:
            data = ndimage.grey_dilation(data, footprint=footprint)
        else:
            data = ndimage.grey_erosion(data, footprint=footprint)
    return DisparityMap(np.clip(data, 0.0, 1.0))


def _sha256(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def _refocus_points(cfg: DatasetConfig, object_disparities) -> list:
    if cfg.refocus_mode == "objects":
        return [round(float(d), 6) for d in object_disparities]
    return [round(float(d), 6) for d in cfg.refocus_values]


def generate_dataset(cfg: DatasetConfig, outdir) -> dict:
    """Generate the full dataset; returns the manifest (also written).

    Layout per scene: scene_%04d/{aif.png, disparity.png, scene.json,
    scene_layerNN.png, bokeh_A{A:g}_f{d_f:.4f}.png}.  The manifest carries
    the config echo, per-scene seeds, object disparities, and SHA-256
    checksums; it is byte-identical across runs of the same (cfg, seed).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    scenes = []
    for idx in range(cfg.n_scenes):
        scene_seed = cfg.seed * 100003 + idx
        scene, object_disparities = random_scene(scene_seed, cfg)
        scene_dir = outdir / f"scene_{idx:04d}"
        scene_dir.mkdir(parents=True, exist_ok=True)

        aif, disp = composite_all_in_focus(scene, gamma=cfg.gamma)
        save_image(aif, scene_dir / "aif.png")
        save_disparity(disp, scene_dir / "disparity.png", bit_depth=16)
        save_scene(scene, scene_dir / "scene.json")

        entries = []
        for a_val in cfg.blur_params:
            for d_f in _refocus_points(cfg, object_disparities):
                params = RenderParams(a_val, d_f, gamma=cfg.gamma)
                bokeh = trace_bokeh(scene, params, n_samples=cfg.rays, seed=scene_seed)
                name = f"bokeh_A{a_val:g}_f{d_f:.4f}.png"
                save_image(bokeh, scene_dir / name)
                entries.append({"file": name, "blur": a_val, "refocus": d_f})

        files = sorted(p.name for p in scene_dir.glob("*") if p.is_file())
        scenes.append(
            {
                "dir": scene_dir.name,
                "seed": scene_seed,
                "object_disparities": [round(float(d), 6) for d in object_disparities],
                "bokeh": entries,
                "checksums": {name: _sha256(scene_dir / name) for name in files},
            }
        )

    manifest = {
        "version": MANIFEST_VERSION,
        "config": cfg.to_dict(),
        "scenes": scenes,
    }
    tmp = outdir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    tmp.rename(outdir / "manifest.json")
    # Timing lives outside the manifest so re-runs stay byte-identical.
    (outdir / "timing.json").write_text(
        json.dumps({"elapsed_seconds": round(time.time() - started, 3)}) + "\n"
    )
    return manifest
