#!/usr/bin/env python3
"""Generate the small procedural image assets bundled for offline tests.

Run from the repository root:  python tools/make_assets.py

Backgrounds are smooth RGB textures (gradients, filtered noise, soft
checkers); foregrounds are RGBA cutouts (disk, ring, star, rounded square,
blob, capsule) with anti-aliased alpha edges.  Everything is seeded, so the
assets are reproducible.
"""

from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

ROOT = Path(__file__).resolve().parents[1]
BG_DIR = ROOT / "src" / "refocus" / "assets" / "backgrounds"
FG_DIR = ROOT / "src" / "refocus" / "assets" / "foregrounds"

BG_SIZE = 256
FG_SIZE = 128


def _save(arr, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "RGBA" if arr.shape[2] == 4 else "RGB"
    Image.fromarray(np.rint(np.clip(arr, 0, 1) * 255).astype(np.uint8), mode).save(path)
    print("wrote", path.relative_to(ROOT))


def _grid(n):
    return np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n), indexing="xy")


def backgrounds():
    x, y = _grid(BG_SIZE)
    rng = np.random.default_rng(2024)

    # two-tone diagonal gradient
    g1 = np.stack([0.2 + 0.6 * x, 0.25 + 0.5 * y, 0.6 - 0.35 * x], axis=2)
    _save(g1, BG_DIR / "bg_gradient.png")

    # smooth filtered-noise blobs
    noise = gaussian_filter(rng.random((BG_SIZE, BG_SIZE, 3)), (10, 10, 0))
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    _save(0.15 + 0.7 * noise, BG_DIR / "bg_blobs.png")

    # soft checker with gentle vignette
    checker = ((np.floor(x * 6) + np.floor(y * 6)) % 2)[..., None]
    soft = gaussian_filter(checker.astype(float), (3, 3, 0))
    base = np.array([0.75, 0.62, 0.45])[None, None, :]
    alt = np.array([0.35, 0.42, 0.55])[None, None, :]
    img = base * soft + alt * (1 - soft)
    vign = 1.0 - 0.25 * ((x - 0.5) ** 2 + (y - 0.5) ** 2) * 4
    _save(img * vign[..., None], BG_DIR / "bg_checker.png")

    # banded waves
    waves = 0.5 + 0.45 * np.sin(2 * np.pi * (3 * x + 1.5 * y))
    img = np.stack([0.3 + 0.4 * waves, 0.55 - 0.25 * waves, 0.35 + 0.3 * y], axis=2)
    _save(gaussian_filter(img, (2, 2, 0)), BG_DIR / "bg_waves.png")


def _alpha_to_rgba(alpha, color, texture=None):
    rgba = np.zeros((alpha.shape[0], alpha.shape[1], 4))
    tex = texture if texture is not None else 1.0
    rgba[:, :, :3] = np.asarray(color)[None, None, :] * tex
    rgba[:, :, 3] = alpha
    rgba[:, :, :3] *= (alpha > 0)[..., None]
    return rgba


def _aa(mask_fn, n=FG_SIZE, ss=4):
    """Supersampled coverage of an implicit region given by mask_fn(x, y)."""
    hi = n * ss
    x, y = _grid(hi)
    cov = mask_fn(x, y).astype(float)
    return cov.reshape(n, ss, n, ss).mean(axis=(1, 3))


def foregrounds():
    x, y = _grid(FG_SIZE)
    rng = np.random.default_rng(7)
    shade = 0.85 + 0.15 * gaussian_filter(rng.random((FG_SIZE, FG_SIZE, 1)), (6, 6, 0))

    disk = _aa(lambda u, v: (u - 0.5) ** 2 + (v - 0.5) ** 2 < 0.36 ** 2)
    _save(_alpha_to_rgba(disk, (0.85, 0.25, 0.2), shade), FG_DIR / "fg_disk.png")

    ring = _aa(
        lambda u, v: ((u - 0.5) ** 2 + (v - 0.5) ** 2 < 0.4 ** 2)
        & ((u - 0.5) ** 2 + (v - 0.5) ** 2 > 0.22 ** 2)
    )
    _save(_alpha_to_rgba(ring, (0.95, 0.75, 0.2), shade), FG_DIR / "fg_ring.png")

    def star(u, v):
        du, dv = u - 0.5, v - 0.5
        r = np.hypot(du, dv)
        t = np.arctan2(dv, du)
        return r < 0.18 + 0.2 * np.abs(np.cos(2.5 * t))

    _save(_alpha_to_rgba(_aa(star), (0.3, 0.7, 0.3), shade), FG_DIR / "fg_star.png")

    def rounded_square(u, v):
        du = np.maximum(np.abs(u - 0.5) - 0.28, 0)
        dv = np.maximum(np.abs(v - 0.5) - 0.28, 0)
        return np.hypot(du, dv) < 0.1

    _save(
        _alpha_to_rgba(_aa(rounded_square), (0.25, 0.45, 0.85), shade),
        FG_DIR / "fg_square.png",
    )

    def blob(u, v):
        du, dv = u - 0.5, v - 0.5
        r = np.hypot(du, dv)
        t = np.arctan2(dv, du)
        return r < 0.3 + 0.07 * np.sin(3 * t) + 0.05 * np.cos(5 * t + 1.0)

    _save(_alpha_to_rgba(_aa(blob), (0.7, 0.4, 0.75), shade), FG_DIR / "fg_blob.png")

    def capsule(u, v):
        du = np.maximum(np.abs(u - 0.5) - 0.22, 0)
        return np.hypot(du, v - 0.5) < 0.16

    _save(_alpha_to_rgba(_aa(capsule), (0.2, 0.65, 0.7), shade), FG_DIR / "fg_capsule.png")


if __name__ == "__main__":
    backgrounds()
    foregrounds()
