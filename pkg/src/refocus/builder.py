"""Constructing plane stacks.

Two builders produce `MpiStack`s:

- `build_mpi_ideal` slices a known layered scene into disparity bins, the
  reference situation where hidden surfaces are exactly known.
- `build_mpi_heuristic` works from a single image + disparity map plus
  inpainted background images: visible surfaces are distributed over planes
  by zone weights of the disparity map, and hidden surfaces (inside
  occlusion masks, strictly behind the visible bin) take their color from
  the background images; per plane the color is the blend
  w_i * background + (1 - w_i) * image with w_i slightly dilated so
  foreground colors cannot bleed into background planes.

Zone weights are per-plane membership weights that sum to 1 per pixel.
Builders convert them to compositing alphas with the cumulative inversion
a_i = w_i / sum_{j<=i} w_j, so the over-composited visibility of plane i
equals its weight and total coverage is exactly 1 (the back-most occupied
plane closes it).

The built-in inpainter is iterative isotropic diffusion; the background
factory deliberately fills occluded regions from the background side of
each depth edge so foreground colors cannot diffuse behind themselves.  A
file-based hook for externally inpainted backgrounds exists in the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (
    DTYPE,
    LINEAR,
    DisparityMap,
    ImageBuffer,
    Mask,
    gamma_decode,
)
from .compositor import MpiPlane, MpiStack, plane_disparities
from .occlusion import dilate_mask

BLEND_DILATE_PX = 2  # slight dilation of blend maps against color leakage


@dataclass(frozen=True)
class BackgroundLayer:
    """One inpainted background: image, its disparity, and where it applies."""

    image: ImageBuffer
    disparity: DisparityMap
    mask: Mask

    def __post_init__(self):
        if (
            self.image.data.shape[:2] != self.disparity.data.shape
            or self.image.data.shape[:2] != self.mask.data.shape
        ):
            raise ValueError("background image/disparity/mask sizes differ")


@dataclass(frozen=True)
class BackgroundSet:
    """Backgrounds for hidden-surface planes, one entry per disparity level."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("background set needs at least one entry")
        object.__setattr__(self, "entries", entries)

    @property
    def count(self) -> int:
        return len(self.entries)


# --------------------------------------------------------------------------
# Diffusion inpainting
# --------------------------------------------------------------------------

def _neighbor_average(work: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Average of active 4-neighbors; inactive neighbors carry no weight."""
    spatial_pad = ((1, 1), (1, 1)) + ((0, 0),) * (work.ndim - 2)
    padded = np.pad(work, spatial_pad)
    pact = np.pad(active.astype(DTYPE), 1)
    shifts = (
        (slice(None, -2), slice(1, -1)),
        (slice(2, None), slice(1, -1)),
        (slice(1, -1), slice(None, -2)),
        (slice(1, -1), slice(2, None)),
    )
    num = np.zeros_like(work)
    cnt = np.zeros_like(pact[1:-1, 1:-1])
    for sy, sx in shifts:
        weight = pact[sy, sx]
        member = padded[sy, sx]
        num += member * (weight[:, :, None] if work.ndim == 3 else weight)
        cnt += weight
    cnt = np.maximum(cnt, 1.0)
    return num / (cnt[:, :, None] if work.ndim == 3 else cnt)


_SOR_OMEGA = 1.8  # over-relaxation factor; plain averaging would need O(w^2) sweeps


def _diffuse_fill(
    values: np.ndarray,
    fill: np.ndarray,
    walls: np.ndarray | None = None,
    iters: int = 1000,
    tol: float = 1e-4,
) -> np.ndarray:
    """Fill `fill` pixels by isotropic diffusion from the remaining pixels.

    `walls` marks pixels excluded from the diffusion entirely (neither
    sources nor filled).  Fill pixels start from their nearest source value;
    checkerboard over-relaxation sweeps of the 4-neighbor average then run
    until the relative change drops below `tol` or `iters` is exhausted.
    The fixed point is the harmonic interpolation of the source values.
    """
    if walls is not None:
        fill = fill & ~walls
    if not np.any(fill):
        return values.copy()
    sources = ~fill if walls is None else ~fill & ~walls
    if not np.any(sources):
        return values.copy()

    work = values.copy()
    # Nearest-source initialization keeps convergence fast on wide bands.
    _, nearest = ndimage.distance_transform_edt(~sources, return_indices=True)
    work[fill] = values[nearest[0][fill], nearest[1][fill]]

    # All updates live inside the fill bounding box (plus a 1-px apron).
    ys, xs = np.nonzero(fill)
    y0, y1 = max(0, ys.min() - 1), min(fill.shape[0], ys.max() + 2)
    x0, x1 = max(0, xs.min() - 1), min(fill.shape[1], xs.max() + 2)
    box = (slice(y0, y1), slice(x0, x1))
    u = work[box]
    fill_b = fill[box]
    active_b = (sources | fill)[box]
    gy, gx = np.meshgrid(np.arange(y0, y1), np.arange(x0, x1), indexing="ij")
    checker = (gy + gx) % 2 == 0
    phases = (fill_b & checker, fill_b & ~checker)

    for _ in range(iters):
        change = 0.0
        for phase in phases:
            if not np.any(phase):
                continue
            avg = _neighbor_average(u, active_b)
            old = u[phase]
            new = old + _SOR_OMEGA * (avg[phase] - old)
            u[phase] = new
            change = max(change, float(np.max(np.abs(new - old))))
        if change < tol:
            break
    work[box] = u
    return work


def inpaint(img: ImageBuffer, mask: Mask, iters: int = 1000) -> ImageBuffer:
    """Fill masked pixels by iterative diffusion from unmasked neighbors."""
    if mask.is_empty():
        return img
    filled = _diffuse_fill(np.array(img.data), mask.data > 0, iters=iters)
    return ImageBuffer(np.clip(filled, 0.0, 1.0), space=img.space)


def inpaint_disparity(disp: DisparityMap, mask: Mask, iters: int = 1000) -> DisparityMap:
    if mask.is_empty():
        return disp
    filled = _diffuse_fill(np.array(disp.data), mask.data > 0, iters=iters)
    return DisparityMap(np.clip(filled, 0.0, 1.0))


def build_backgrounds(
    image: ImageBuffer,
    disparity: DisparityMap,
    mask: Mask,
    levels: int = 1,
    iters: int = 1000,
) -> BackgroundSet | None:
    """Produce inpainted backgrounds for the occluded areas of a scene.

    The occlusion mask is split into `levels` groups by the disparity of
    each component's occluder; every group is filled by diffusion whose
    sources are restricted to the background side of the edge, and the
    filled disparity is clamped to never exceed the visible surface.
    Returns None when the mask is empty.
    """
    m = mask.data > 0
    if not np.any(m):
        return None
    labels, count = ndimage.label(m, structure=np.ones((3, 3), dtype=bool))
    occluder = np.zeros(count + 1)
    for idx in range(1, count + 1):
        occluder[idx] = float(disparity.data[labels == idx].max())
    levels = max(1, min(levels, count))
    order = np.argsort(occluder[1:], kind="stable") + 1
    groups = np.array_split(order, levels)

    entries = []
    for group in groups:
        if len(group) == 0:
            continue
        gm = np.isin(labels, group)
        ring = ndimage.binary_dilation(gm, np.ones((3, 3), dtype=bool)) & ~m
        walls = None
        if np.any(ring):
            lo = float(disparity.data[ring].min())
            hi = float(disparity.data[ring].max())
            if hi - lo > 1e-6:
                # Exclude the whole foreground side from the diffusion, so
                # fills can only come from the background around the edge.
                walls = ~gm & (disparity.data > 0.5 * (lo + hi))
        filled_img = _diffuse_fill(np.array(image.data), gm, walls, iters=iters)
        filled_d = _diffuse_fill(np.array(disparity.data), gm, walls, iters=iters)
        filled_d = np.where(gm, np.minimum(filled_d, disparity.data), disparity.data)
        entries.append(
            BackgroundLayer(
                ImageBuffer(np.clip(filled_img, 0.0, 1.0), space=image.space),
                DisparityMap(np.clip(filled_d, 0.0, 1.0)),
                Mask(gm.astype(DTYPE)),
            )
        )
    if not entries:
        return None
    return BackgroundSet(tuple(entries))


# --------------------------------------------------------------------------
# Zone weights and alphas
# --------------------------------------------------------------------------

def _cumulative_weight(t: np.ndarray, plane: int, plane_count: int) -> np.ndarray:
    """Sum of soft hat weights of planes 0..plane at hat coordinate t.

    t = d * N - 0.5 places plane centers at integers; the top plane absorbs
    everything so the total is always 1.
    """
    if plane < 0:
        return np.zeros_like(t)
    if plane >= plane_count - 1:
        return np.ones_like(t)
    return np.clip(1.0 - (t - plane), 0.0, 1.0)


def _cumulative_hard(bins: np.ndarray, plane: int, plane_count: int) -> np.ndarray:
    if plane < 0:
        return np.zeros(bins.shape, dtype=DTYPE)
    if plane >= plane_count - 1:
        return np.ones(bins.shape, dtype=DTYPE)
    return (bins <= plane).astype(DTYPE)


def _hat_coordinate(disp_data: np.ndarray, plane_count: int) -> np.ndarray:
    return disp_data * plane_count - 0.5


def visible_bins(disp: DisparityMap, plane_count: int) -> np.ndarray:
    """Hard bin index (0-based) of the visible surface per pixel."""
    return np.clip(
        np.floor(disp.data * plane_count).astype(np.int64), 0, plane_count - 1
    )


def zone_weights(disp: DisparityMap, plane_count: int, soft: bool = True) -> np.ndarray:
    """Per-plane membership weights (plane_count, H, W), summing to 1.

    Soft mode spreads each pixel over the two planes bracketing its
    disparity with triangular-hat weights centered on the plane disparities
    (i - 0.5) / N; hard mode is the indicator of the disparity bin.
    """
    n = int(plane_count)
    if n < 2:
        raise ValueError("plane_count must be >= 2")
    if soft:
        t = _hat_coordinate(disp.data, n)
        cums = [_cumulative_weight(t, i, n) for i in range(-1, n)]
    else:
        bins = visible_bins(disp, n)
        cums = [_cumulative_hard(bins, i, n) for i in range(-1, n)]
    return np.stack([hi - lo for lo, hi in zip(cums, cums[1:])])


def zone_masks(disp: DisparityMap, plane_count: int, soft: bool = True) -> list[Mask]:
    """Zone weights wrapped as Masks, back-to-front."""
    return [Mask(np.clip(wi, 0.0, 1.0)) for wi in zone_weights(disp, plane_count, soft)]


def alphas_from_weights(weights: np.ndarray) -> np.ndarray:
    """Convert per-plane visibility weights into compositing alphas.

    With a_i = w_i / sum_{j<=i} w_j (cumulative from the back), the
    over-composited contribution of plane i equals w_i / sum_j w_j and the
    back-most occupied plane is opaque.
    """
    cum = np.cumsum(weights, axis=0)
    return np.divide(weights, cum, out=np.zeros_like(weights), where=cum > 1e-12)


# --------------------------------------------------------------------------
# Builders
# --------------------------------------------------------------------------

def build_mpi_ideal(scene, plane_count: int = 32, gamma: float = 2.2) -> MpiStack:
    """Slice a known layered scene into an MPI stack by disparity bins.

    Every scene-layer texel lands on the plane whose bin contains its local
    planar disparity; texels of several layers falling into one bin are
    over-composited back-to-front within the bin.  Colors are linear.
    """
    n = int(plane_count)
    w, h = scene.canvas
    ys, xs = np.meshgrid(
        np.arange(h, dtype=DTYPE), np.arange(w, dtype=DTYPE), indexing="ij"
    )
    occupied: dict[int, list] = {}  # bin -> [premult, alpha]

    for layer in scene.layers:  # back-to-front
        linear = gamma_decode(layer.rgba, gamma)
        x0, y0 = layer.offset
        lh, lw = linear.height, linear.width
        cy = slice(max(0, y0), min(h, y0 + lh))
        cx = slice(max(0, x0), min(w, x0 + lw))
        if cy.stop <= cy.start or cx.stop <= cx.start:
            continue
        ly = slice(cy.start - y0, cy.stop - y0)
        lx = slice(cx.start - x0, cx.stop - x0)
        a_canvas = np.zeros((h, w), dtype=DTYPE)
        c_canvas = np.zeros((h, w, 3), dtype=DTYPE)
        a_canvas[cy, cx] = linear.data[ly, lx, 3]
        c_canvas[cy, cx] = linear.data[ly, lx, :3]
        bins = np.clip(
            np.floor(layer.disparity_at(xs, ys) * n).astype(np.int64), 0, n - 1
        )
        footprint = a_canvas > 0
        for i in np.unique(bins[footprint]):
            plane = occupied.setdefault(
                int(i),
                [np.zeros((h, w, 3), dtype=DTYPE), np.zeros((h, w), dtype=DTYPE)],
            )
            a_here = np.where((bins == i) & footprint, a_canvas, 0.0)[:, :, None]
            plane[0] = c_canvas * a_here + plane[0] * (1.0 - a_here)
            plane[1] = a_here[:, :, 0] + plane[1][:, :] * (1.0 - a_here[:, :, 0])

    centers = plane_disparities(n)
    planes = []
    empty_alpha = np.zeros((h, w), dtype=DTYPE)
    empty_color = np.zeros((h, w, 3), dtype=DTYPE)
    for i in range(n):
        if i in occupied:
            premult, a = occupied[i]
            color = np.divide(
                premult,
                a[:, :, None],
                out=np.zeros_like(premult),
                where=a[:, :, None] > 1e-12,
            )
        else:
            color, a = empty_color, empty_alpha
        planes.append(
            MpiPlane(
                ImageBuffer(np.clip(color, 0.0, 1.0), space=LINEAR),
                Mask(np.clip(a, 0.0, 1.0)),
                float(centers[i]),
            )
        )
    return MpiStack(tuple(planes))


def build_mpi_heuristic(
    image: ImageBuffer,
    disparity: DisparityMap,
    backgrounds: BackgroundSet | None = None,
    plane_count: int = 32,
    gamma: float = 2.2,
    soft: bool = True,
    use_background: bool = True,
) -> MpiStack:
    """Build an MPI stack from one image + disparity map (+ backgrounds).

    Visible surfaces are zone-weighted slices of the image; hidden surfaces
    take background disparity and color inside each background mask, on
    planes strictly below the visible surface's bin.  `use_background=False`
    is the visible-only ablation (equivalent to passing no backgrounds).
    """
    if image.data.shape[:2] != disparity.data.shape:
        raise ValueError("image and disparity sizes differ")
    n = int(plane_count)
    linear = image if image.space == LINEAR else gamma_decode(image, gamma)
    rgb = linear.rgb()
    h, w = disparity.data.shape

    t_vis = _hat_coordinate(disparity.data, n) if soft else None
    bins_vis = visible_bins(disparity, n)

    use_bg = use_background and backgrounds is not None
    prepared = []
    if use_bg:
        for entry in backgrounds.entries:
            m = entry.mask.data > 0
            excess = entry.disparity.data[m] - disparity.data[m]
            if excess.size and float(excess.max()) > 1.0 / n + 1e-9:
                raise ValueError(
                    "background disparity exceeds the visible surface inside "
                    f"its mask by {float(excess.max()):.4f} (tolerance 1/{n})"
                )
            bg_lin = (
                entry.image
                if entry.image.space == LINEAR
                else gamma_decode(entry.image, gamma)
            )
            t_b = _hat_coordinate(entry.disparity.data, n) if soft else None
            bins_b = visible_bins(entry.disparity, n)
            prepared.append((bg_lin.rgb(), t_b, bins_b, entry.mask.data > 0))

    centers = plane_disparities(n)
    planes = []
    base_color = ImageBuffer(np.clip(rgb, 0.0, 1.0), space=LINEAR)  # shared
    cum_vis_prev = np.zeros((h, w), dtype=DTYPE)
    cum_bg_prev = [np.zeros((h, w), dtype=DTYPE) for _ in prepared]
    for i in range(n):
        if soft:
            cum_vis = _cumulative_weight(t_vis, i, n)
        else:
            cum_vis = _cumulative_hard(bins_vis, i, n)
        weight_vis = cum_vis - cum_vis_prev
        cum_vis_prev = cum_vis
        alpha = np.divide(
            weight_vis, cum_vis, out=np.zeros_like(weight_vis), where=cum_vis > 1e-12
        )
        color = None  # None means the plain image color
        blend = None
        for k, (bg_rgb, t_b, bins_b, m) in enumerate(prepared):
            if soft:
                cum_b = _cumulative_weight(t_b, i, n)
            else:
                cum_b = _cumulative_hard(bins_b, i, n)
            weight_b = (cum_b - cum_bg_prev[k]) * m * (i < bins_vis)
            cum_bg_prev[k] = cum_b
            if not np.any(weight_b > 0):
                continue
            alpha_hid = np.divide(
                weight_b, cum_b, out=np.zeros_like(weight_b), where=cum_b > 1e-12
            )
            # Blur uses premultiplied color, so the blend map only matters
            # where this plane has alpha; dilating it past the hidden
            # support guards the rim, but it must never override pixels the
            # plane shows sharply (visible alpha), or the stack would stop
            # reproducing the input image.
            w_i = dilate_mask(Mask((weight_b > 0).astype(DTYPE)), BLEND_DILATE_PX).data
            w_i = w_i * (weight_vis <= 0)
            prev = rgb if color is None else color
            color = w_i[:, :, None] * bg_rgb + (1.0 - w_i[:, :, None]) * prev
            blend = w_i if blend is None else np.maximum(blend, w_i)
            # hidden content sits behind visible content on the same plane
            alpha = alpha + alpha_hid * (1.0 - alpha)
        planes.append(
            MpiPlane(
                base_color
                if color is None
                else ImageBuffer(np.clip(color, 0.0, 1.0), space=LINEAR),
                Mask(np.clip(alpha, 0.0, 1.0)),
                float(centers[i]),
                Mask(blend) if blend is not None else None,
            )
        )
    return MpiStack(tuple(planes))
