"""Evaluation metrics and the comparison harness.

PSNR and SSIM over full images plus their occluding-boundary variants
(psnr_ob / ssim_ob), which restrict the pixel set to a band around depth
edges of the ground-truth disparity; that band is where bokeh rendering is
actually hard.  The band construction is this artifact's own (threshold the
disparity gradients, then dilate each edge component proportionally to the
blur it can spread) and is version-tagged in reports so numbers are only
compared across runs of this artifact.

Per convention, the harness evaluates images as saved: gamma-encoded and
quantized to 8 bits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.metrics import structural_similarity

from .core import DTYPE, DisparityMap, ImageBuffer, Mask, RenderParams, load_disparity, load_image
from .occlusion import OcclusionConfig, disparity_gradient, initial_mask

BAND_VERSION = "band-v1"


def _as_mask_bool(mask: Mask | None, shape) -> np.ndarray | None:
    if mask is None:
        return None
    if mask.data.shape != shape:
        raise ValueError("mask size differs from images")
    m = mask.data > 0
    if not np.any(m):
        raise ValueError("mask selects no pixels")
    return m


def psnr(a: ImageBuffer, b: ImageBuffer, mask: Mask | None = None) -> float:
    """Peak signal-to-noise ratio in dB (peak 1.0, MSE over all channels).

    Identical inputs return math.inf.  An optional mask restricts the pixel
    set; a full mask is exactly equivalent to no mask.
    """
    if a.data.shape != b.data.shape:
        raise ValueError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    m = _as_mask_bool(mask, a.data.shape[:2])
    diff = (a.data - b.data) ** 2
    mse = float(diff[m].mean()) if m is not None else float(diff.mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim(a: ImageBuffer, b: ImageBuffer, mask: Mask | None = None) -> float:
    """Mean local SSIM (11x11 Gaussian window, sigma 1.5, K1=.01, K2=.03).

    Computed per channel and averaged; the optional mask is applied to the
    SSIM map before averaging.
    """
    if a.data.shape != b.data.shape:
        raise ValueError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    if min(a.data.shape[:2]) < 11:
        raise ValueError("images must be at least 11 pixels on each side")
    m = _as_mask_bool(mask, a.data.shape[:2])
    maps = []
    for ch in range(a.channels):
        _, smap = structural_similarity(
            a.data[:, :, ch],
            b.data[:, :, ch],
            data_range=1.0,
            gaussian_weights=True,
            sigma=1.5,
            K1=0.01,
            K2=0.03,
            use_sample_covariance=False,
            full=True,
        )
        maps.append(smap)
    smap = np.mean(maps, axis=0)
    return float(smap[m].mean()) if m is not None else float(smap.mean())


def quantize(img: ImageBuffer) -> ImageBuffer:
    """Round samples to the 8-bit grid (evaluation convention)."""
    return ImageBuffer(np.rint(img.data * 255.0) / 255.0, space=img.space)


def boundary_band(
    disparity: DisparityMap,
    params: RenderParams,
    cfg: OcclusionConfig | None = None,
) -> Mask:
    """Band around occluding boundaries of the ground-truth disparity.

    Depth edges come from thresholded disparity gradients; each connected
    edge component is dilated by max(8, ceil(blur_amount * step)) pixels,
    where step is the largest gradient magnitude on that component (the
    local disparity jump).  Empty when the map has no depth edges.
    """
    cfg = cfg or OcclusionConfig()
    grad = disparity_gradient(disparity)
    edges = initial_mask(grad, cfg.grad_threshold)
    e = edges.data > 0
    if not np.any(e):
        return Mask(np.zeros_like(disparity.data))
    labels, count = ndimage.label(e, structure=np.ones((3, 3), dtype=bool))
    magnitude = grad.magnitude()
    out = np.zeros_like(e)
    for idx in range(1, count + 1):
        comp = labels == idx
        step = float(magnitude[comp].max())
        radius = max(8, int(math.ceil(params.blur_amount * step)))
        # dilation by a disc == thresholded distance to the component
        out |= ndimage.distance_transform_edt(~comp) <= radius
    return Mask(out.astype(DTYPE))


@dataclass
class EvalReport:
    """Per-image and aggregate metrics for one method against a manifest."""

    method: str
    band_version: str = BAND_VERSION
    images: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return v

        return {
            "method": self.method,
            "band_version": self.band_version,
            "aggregates": {k: enc(v) for k, v in self.aggregates.items()},
            "images": [
                {k: enc(v) for k, v in entry.items()} for entry in self.images
            ],
            "missing": list(self.missing),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        header = f"{'image':<44} {'psnr':>8} {'ssim':>7} {'psnr_ob':>8} {'ssim_ob':>7}"
        lines = [f"method: {self.method} ({self.band_version})", header, "-" * len(header)]

        def fmt(v):
            if v is None:
                return "-"
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return f"{v:.3f}"

        for entry in self.images:
            lines.append(
                f"{entry['file']:<44} {fmt(entry['psnr']):>8} {fmt(entry['ssim']):>7} "
                f"{fmt(entry['psnr_ob']):>8} {fmt(entry['ssim_ob']):>7}"
            )
        lines.append("-" * len(header))
        agg = self.aggregates
        lines.append(
            f"{'mean':<44} {fmt(agg.get('psnr')):>8} {fmt(agg.get('ssim')):>7} "
            f"{fmt(agg.get('psnr_ob')):>8} {fmt(agg.get('ssim_ob')):>7}"
        )
        if self.missing:
            lines.append(f"missing predictions: {', '.join(self.missing)}")
        return "\n".join(lines)


def _finite_mean(values) -> float | None:
    finite = [v for v in values if v is not None and not math.isinf(v)]
    if not finite:
        return None
    return float(np.mean(finite))


def evaluate(
    pred_dir,
    manifest_path,
    method: str = "predictions",
    occlusion_cfg: OcclusionConfig | None = None,
) -> EvalReport:
    """Compare predictions (same filenames as the manifest) to ground truth.

    Missing prediction files are listed, not fatal.  Metrics follow the
    8-bit evaluation convention; boundary bands derive from each scene's
    ground-truth disparity and the blur parameter of each bokeh file.
    """
    pred_dir = Path(pred_dir)
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    gt_root = manifest_path.parent
    report = EvalReport(method=method)

    for scene in manifest["scenes"]:
        scene_dir = gt_root / scene["dir"]
        disparity = load_disparity(scene_dir / "disparity.png")
        band_cache: dict[float, Mask] = {}
        for entry in scene["bokeh"]:
            rel = f"{scene['dir']}/{entry['file']}"
            pred_path = pred_dir / rel
            if not pred_path.exists():
                report.missing.append(rel)
                continue
            gt = quantize(load_image(scene_dir / entry["file"]))
            pred = quantize(load_image(pred_path))
            blur = float(entry["blur"])
            if blur not in band_cache:
                band_cache[blur] = boundary_band(
                    disparity,
                    RenderParams(blur, float(entry["refocus"])),
                    occlusion_cfg,
                )
            band = band_cache[blur]
            empty_band = band.is_empty()
            record = {
                "file": rel,
                "psnr": psnr(gt, pred),
                "ssim": ssim(gt, pred),
                "psnr_ob": None if empty_band else psnr(gt, pred, band),
                "ssim_ob": None if empty_band else ssim(gt, pred, band),
                "band_fraction": float(band.data.mean()),
            }
            report.images.append(record)

    report.aggregates = {
        "psnr": _finite_mean([e["psnr"] for e in report.images]),
        "ssim": _finite_mean([e["ssim"] for e in report.images]),
        "psnr_ob": _finite_mean([e["psnr_ob"] for e in report.images]),
        "ssim_ob": _finite_mean([e["ssim_ob"] for e in report.images]),
        "band_fraction": _finite_mean([e["band_fraction"] for e in report.images]),
        "evaluated": len(report.images),
        "missing": len(report.missing),
    }
    return report
