"""Occlusion-mask generation from a disparity map.

Occlusion happens where disparity changes sharply, and the occluded area
lies on the side with the larger disparity.  The generator thresholds Sobel
gradients of the disparity map, removes small specks, then iteratively
advances the mask front along the gradient direction (one pixel per
iteration) by forward-splatting unit normals, and finally dilates the
result to absorb image/disparity misalignment at boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import DTYPE, DisparityMap, GradientField, Mask, RenderParams

# 8-connectivity for component analysis
_CONN8 = np.ones((3, 3), dtype=bool)

_NORM_EPS = 1e-8  # vectors shorter than this normalize to zero, not NaN


@dataclass(frozen=True)
class OcclusionConfig:
    """Tuning knobs of the occlusion-mask generator.

    grad_threshold: minimum gradient magnitude (disparity/px) marking a
        depth discontinuity.
    min_segment: connected components smaller than this many pixels are
        treated as noise and dropped.
    extend_iters: how many pixels the mask advances toward the occluder;
        should cover the widest disc a blurred foreground can spread.
    dilate_px: final safety dilation against image/disparity misalignment.
    """

    grad_threshold: float = 0.05
    min_segment: int = 20
    extend_iters: int = 16
    dilate_px: int = 5

    def __post_init__(self):
        if self.grad_threshold <= 0:
            raise ValueError("grad_threshold must be > 0")
        if self.min_segment < 0 or self.extend_iters < 0 or self.dilate_px < 0:
            raise ValueError("min_segment/extend_iters/dilate_px must be >= 0")

    @staticmethod
    def for_params(params: RenderParams, max_disparity_step: float = 1.0):
        """Config whose extension covers the blur of the given render params."""
        iters = max(8, int(np.ceil(params.blur_amount * max_disparity_step)))
        return OcclusionConfig(extend_iters=iters)


def disparity_gradient(disp: DisparityMap) -> GradientField:
    """3x3 Sobel gradient of the disparity map.

    Normalized so a step edge of height h yields magnitude h at the two
    columns (rows) adjacent to the edge; borders use replicate padding.
    """
    data = disp.data
    # Sobel = smoothing [1,2,1] across, difference [-1,0,1] along; the /4
    # makes a unit step read as a unit gradient.
    gx = ndimage.sobel(data, axis=1, mode="nearest") / 4.0
    gy = ndimage.sobel(data, axis=0, mode="nearest") / 4.0
    return GradientField(gx, gy)


def initial_mask(grad: GradientField, grad_threshold: float) -> Mask:
    """Pixels whose gradient magnitude exceeds the threshold."""
    if grad_threshold <= 0:
        raise ValueError("grad_threshold must be > 0")
    return Mask((grad.magnitude() > grad_threshold).astype(DTYPE))


def remove_short_segments(mask: Mask, grad: GradientField, min_segment: int):
    """Drop 8-connected mask components smaller than min_segment pixels.

    Removed pixels are zeroed in both the mask and the gradient field.
    """
    if min_segment < 0:
        raise ValueError("min_segment must be >= 0")
    m = mask.data > 0
    labels, count = ndimage.label(m, structure=_CONN8)
    if count == 0 or min_segment <= 1:
        return Mask(m.astype(DTYPE)), grad
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    keep = sizes >= min_segment
    kept = keep[labels]
    gx = np.where(kept, grad.gx, 0.0)
    gy = np.where(kept, grad.gy, 0.0)
    return Mask(kept.astype(DTYPE)), GradientField(gx, gy)


def _normalize(gx: np.ndarray, gy: np.ndarray):
    mag = np.hypot(gx, gy)
    scale = np.where(mag > _NORM_EPS, 1.0 / np.maximum(mag, _NORM_EPS), 0.0)
    return gx * scale, gy * scale


def forward_warp_normals(grad: GradientField, mask: Mask) -> GradientField:
    """Splat each masked pixel's unit vector one step along itself.

    Bilinear splatting; accumulated vectors are renormalized to unit length
    (zero where the sum cancels).  The result is the advancing front of the
    mask in the gradient direction.
    """
    h, w = grad.gx.shape
    src = mask.data > 0
    if not np.any(src):
        return GradientField(np.zeros((h, w)), np.zeros((h, w)))
    sy, sx = np.nonzero(src)
    vx = grad.gx[sy, sx]
    vy = grad.gy[sy, sx]
    tx = sx + vx
    ty = sy + vy
    x0 = np.floor(tx).astype(np.int64)
    y0 = np.floor(ty).astype(np.int64)
    fx = tx - x0
    fy = ty - y0
    acc_x = np.zeros((h, w), dtype=DTYPE)
    acc_y = np.zeros((h, w), dtype=DTYPE)
    for dx, dy, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + dx
        yi = y0 + dy
        ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        np.add.at(acc_x, (yi[ok], xi[ok]), (wgt * vx)[ok])
        np.add.at(acc_y, (yi[ok], xi[ok]), (wgt * vy)[ok])
    ux, uy = _normalize(acc_x, acc_y)
    return GradientField(ux, uy)


def extend_mask(mask: Mask, grad: GradientField, iters: int) -> Mask:
    """Grow the mask along increasing disparity, one pixel per iteration.

    Each iteration renormalizes the field to unit vectors, splats them one
    step forward, merges the splat outside the current mask with the field
    inside it, and re-reads the mask as the field's support.  The gradient
    is restricted to the mask's support at entry, so untouched smooth areas
    never seed growth.
    """
    if iters < 0:
        raise ValueError("iters must be >= 0")
    m = mask.data > 0
    gx = np.where(m, grad.gx, 0.0)
    gy = np.where(m, grad.gy, 0.0)
    for _ in range(iters):
        ux, uy = _normalize(gx, gy)
        support = (np.abs(ux) > 0) | (np.abs(uy) > 0)
        warped = forward_warp_normals(
            GradientField(ux, uy), Mask(support.astype(DTYPE))
        )
        keep = m.astype(DTYPE)
        gx = keep * ux + (1.0 - keep) * warped.gx
        gy = keep * uy + (1.0 - keep) * warped.gy
        m = m | (np.abs(gx) > 0) | (np.abs(gy) > 0)
    return Mask(m.astype(DTYPE))


def _disc_element(radius: int) -> np.ndarray:
    if radius <= 0:
        return np.ones((1, 1), dtype=bool)
    coords = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(coords, coords)
    return (dx * dx + dy * dy) <= radius * radius


def dilate_mask(mask: Mask, radius: int) -> Mask:
    if radius <= 0:
        return Mask((mask.data > 0).astype(DTYPE))
    grown = ndimage.binary_dilation(mask.data > 0, structure=_disc_element(radius))
    return Mask(grown.astype(DTYPE))


def occlusion_mask_stages(disp: DisparityMap, cfg: OcclusionConfig) -> dict:
    """Run the full pipeline, returning every intermediate for inspection."""
    grad = disparity_gradient(disp)
    first = initial_mask(grad, cfg.grad_threshold)
    cleaned, grad_clean = remove_short_segments(first, grad, cfg.min_segment)
    extended = extend_mask(cleaned, grad_clean, cfg.extend_iters)
    final = dilate_mask(extended, cfg.dilate_px)
    return {
        "gradient": grad,
        "initial": first,
        "cleaned": cleaned,
        "extended": extended,
        "final": final,
    }


def occlusion_mask(disp: DisparityMap, cfg: OcclusionConfig | None = None) -> Mask:
    """Binary mask of areas whose hidden background must be hallucinated."""
    cfg = cfg or OcclusionConfig()
    return occlusion_mask_stages(disp, cfg)["final"]
