"""Layered bokeh renderer.

A scene is represented as a stack of fronto-parallel RGBA planes at fixed
disparities (back-to-front).  Rendering blurs each plane with a disc kernel
whose radius follows the blur-radius law for that plane's disparity, then
composites the blurred planes back-to-front.  Dividing the composite by the
identically-composited blurred coverage ("weight normalization") suppresses
the halo artifacts that plane discretization otherwise produces at depth
edges.

All plane colors are linear irradiance; the rendered output is returned
gamma-encoded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import fft as _fft

from .core import (
    DTYPE,
    LINEAR,
    DisparityMap,
    ImageBuffer,
    Mask,
    RenderParams,
    blur_radius,
    gamma_decode,
    gamma_encode,
    load_image,
    save_image,
)

EPS_NORM = 1e-4  # below this blurred coverage, normalization is skipped

_RIM_SUBSAMPLES = 32  # rim texels are area-sampled on a 32x32 subgrid
_RIM_SUBSAMPLES_LARGE = 16  # above this radius, rim weights are tiny anyway
_LARGE_RADIUS = 16.0


@dataclass(frozen=True)
class Kernel:
    """A normalized anti-aliased disc kernel."""

    radius: float
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.shape[0]


def disc_kernel(radius: float) -> Kernel:
    """Disc kernel of real-valued radius with area-coverage anti-aliasing.

    Radius 0 yields the 1x1 identity kernel.  Rim texels are weighted by the
    fraction of their unit square covered by the disc; weights sum to 1.
    """
    radius = float(radius)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0.0:
        return Kernel(0.0, np.ones((1, 1), dtype=DTYPE))
    half = int(np.ceil(radius))
    coords = np.arange(-half, half + 1, dtype=DTYPE)
    dx, dy = np.meshgrid(coords, coords)
    dist = np.hypot(dx, dy)
    corner = np.sqrt(0.5)  # texel center to texel corner
    weights = np.zeros_like(dist)
    weights[dist + corner <= radius] = 1.0
    rim = (dist + corner > radius) & (dist - corner < radius)
    if np.any(rim):
        samples = _RIM_SUBSAMPLES if radius < _LARGE_RADIUS else _RIM_SUBSAMPLES_LARGE
        sub = (np.arange(samples) + 0.5) / samples - 0.5
        sx, sy = np.meshgrid(sub, sub)
        rx = dx[rim][:, None] + sx.ravel()[None, :]
        ry = dy[rim][:, None] + sy.ravel()[None, :]
        inside = (rx * rx + ry * ry) <= radius * radius
        weights[rim] = inside.mean(axis=1)
    total = weights.sum()
    if total <= 0:
        # Degenerate sub-texel disc: fall back to the identity.
        return Kernel(radius, np.ones((1, 1), dtype=DTYPE))
    return Kernel(radius, weights / total)


@dataclass(frozen=True)
class MpiPlane:
    """One plane of the stack: linear color, alpha, optional blend weight."""

    color: ImageBuffer
    alpha: Mask
    disparity: float
    blend: Mask | None = None

    def __post_init__(self):
        if self.color.space != LINEAR:
            raise ValueError("plane colors must be linear")
        if self.color.data.shape[:2] != self.alpha.data.shape:
            raise ValueError("plane color and alpha must share dimensions")
        if not (0.0 <= self.disparity <= 1.0):
            raise ValueError("plane disparity must lie in [0, 1]")
        object.__setattr__(self, "_premult", None)

    def is_empty(self) -> bool:
        return not bool(np.any(self.alpha.data > 0))

    def premultiplied(self) -> np.ndarray:
        """color * alpha, computed once (planes are immutable)."""
        if self._premult is None:
            object.__setattr__(
                self, "_premult", self.color.data * self.alpha.data[:, :, None]
            )
        return self._premult


@dataclass(frozen=True)
class MpiStack:
    """Ordered planes, back-to-front (strictly increasing disparity)."""

    planes: tuple

    def __post_init__(self):
        planes = tuple(self.planes)
        if not planes:
            raise ValueError("stack needs at least one plane")
        d = [p.disparity for p in planes]
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("plane disparities must be strictly increasing")
        shape = planes[0].alpha.data.shape
        if any(p.alpha.data.shape != shape for p in planes):
            raise ValueError("all planes must share spatial dimensions")
        object.__setattr__(self, "planes", planes)

    @property
    def plane_count(self) -> int:
        return len(self.planes)

    @property
    def height(self) -> int:
        return self.planes[0].alpha.height

    @property
    def width(self) -> int:
        return self.planes[0].alpha.width

    def disparities(self) -> np.ndarray:
        return np.array([p.disparity for p in self.planes])


def plane_disparities(plane_count: int) -> np.ndarray:
    """Canonical plane disparities (i - 0.5) / N for i in 1..N."""
    if plane_count < 2:
        raise ValueError("plane_count must be >= 2")
    return (np.arange(1, plane_count + 1) - 0.5) / plane_count


def compose_sharp(mpi: MpiStack) -> ImageBuffer:
    """All-in-focus composite: back-to-front over-compositing of the planes.

    Computed in linear space; the result carries the linear tag and encoding
    is left to the caller.
    """
    h, w = mpi.height, mpi.width
    channels = mpi.planes[0].color.channels
    out = np.zeros((h, w, channels), dtype=DTYPE)
    transmittance = np.ones((h, w, 1), dtype=DTYPE)
    for plane in reversed(mpi.planes):  # front first, accumulate visibility
        a = plane.alpha.data[:, :, None]
        out += plane.color.data * a * transmittance
        transmittance = transmittance * (1.0 - a)
    return ImageBuffer(np.clip(out, 0.0, 1.0), space=LINEAR)


def reconstruct_disparity(mpi: MpiStack) -> DisparityMap:
    """Disparity implied by the stack: over-composite of plane disparities."""
    h, w = mpi.height, mpi.width
    out = np.zeros((h, w), dtype=DTYPE)
    transmittance = np.ones((h, w), dtype=DTYPE)
    for plane in reversed(mpi.planes):
        a = plane.alpha.data
        out += plane.disparity * a * transmittance
        transmittance = transmittance * (1.0 - a)
    return DisparityMap(np.clip(out, 0.0, 1.0))


def _convolve_same(stacked: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Zero-padded 2-D convolution along (0, 1), shared across channels.

    Runs in single precision: inputs are [0, 1] quantities and every use
    site tolerates far more error than float32 round-off.
    """
    h, w, _ = stacked.shape
    kh, kw = weights.shape
    fh = _fft.next_fast_len(h + kh - 1)
    fw = _fft.next_fast_len(w + kw - 1)
    spectrum = _fft.rfft2(
        stacked.astype(np.float32), s=(fh, fw), axes=(0, 1), workers=-1
    )
    response = _fft.rfft2(weights.astype(np.float32), s=(fh, fw), workers=-1)
    conv = _fft.irfft2(
        spectrum * response[:, :, None], s=(fh, fw), axes=(0, 1), workers=-1
    )
    y0 = (kh - 1) // 2
    x0 = (kw - 1) // 2
    return conv[y0 : y0 + h, x0 : x0 + w].astype(DTYPE)


def _support_map(kernel: Kernel, h: int, w: int) -> np.ndarray:
    """Closed form of convolve(ones((h, w)), kernel, 'same') with zeros
    outside: the kernel mass falling inside the canvas, from the kernel's
    2-D prefix sums.  Equals 1 away from the canvas border.
    """
    k = kernel.weights
    n = k.shape[0]
    half = n // 2
    prefix = np.zeros((n + 1, n + 1), dtype=DTYPE)
    prefix[1:, 1:] = k.cumsum(axis=0).cumsum(axis=1)
    ys = np.arange(h)
    xs = np.arange(w)
    r_lo = np.clip(half + ys - h + 1, 0, n)
    r_hi = np.clip(half + ys + 1, 0, n)
    c_lo = np.clip(half + xs - w + 1, 0, n)
    c_hi = np.clip(half + xs + 1, 0, n)
    return (
        prefix[r_hi[:, None], c_hi[None, :]]
        - prefix[r_lo[:, None], c_hi[None, :]]
        - prefix[r_hi[:, None], c_lo[None, :]]
        + prefix[r_lo[:, None], c_lo[None, :]]
    )


def _blur_plane(
    premult: np.ndarray, alpha: np.ndarray, kernel: Kernel, support: np.ndarray
):
    """Blur premultiplied color and alpha with the kernel.

    Zero padding, then division by the kernel's in-canvas mass so that
    image borders behave like the ray tracer's per-pixel renormalization
    over in-canvas content; interior pixels are untouched (mass 1).  The
    convolution runs on the alpha support's bounding box (plus the kernel
    apron), since both inputs vanish outside it.
    """
    if kernel.size == 1:
        return premult, alpha
    h, w = alpha.shape
    half = kernel.size // 2
    rows = np.nonzero(alpha.any(axis=1))[0]
    cols = np.nonzero(alpha.any(axis=0))[0]
    if rows.size == 0:
        return np.zeros_like(premult), np.zeros_like(alpha)
    y0 = max(0, int(rows[0]) - half)
    y1 = min(h, int(rows[-1]) + 1 + half)
    x0 = max(0, int(cols[0]) - half)
    x1 = min(w, int(cols[-1]) + 1 + half)

    opaque = float(alpha.min()) == 1.0  # bbox is then the full frame
    if opaque:
        # convolving an all-ones alpha is, by definition, the support map;
        # the division then gives exactly 1 everywhere
        stacked = premult[y0:y1, x0:x1]
    else:
        stacked = np.concatenate(
            [premult[y0:y1, x0:x1], alpha[y0:y1, x0:x1, None]], axis=2
        )
    blurred = _convolve_same(stacked, kernel.weights)
    blurred /= support[y0:y1, x0:x1, None]
    np.clip(blurred, 0.0, None, out=blurred)

    if opaque:
        out_pm = np.zeros_like(premult)
        out_pm[y0:y1, x0:x1] = blurred
        return out_pm, np.ones_like(alpha)
    out_pm = np.zeros_like(premult)
    out_a = np.zeros_like(alpha)
    out_pm[y0:y1, x0:x1] = blurred[:, :, :-1]
    out_a[y0:y1, x0:x1] = np.clip(blurred[:, :, -1], 0.0, 1.0)
    return out_pm, out_a


def render_mpi(
    mpi: MpiStack,
    params: RenderParams,
    normalize: bool = True,
    return_stats: bool = False,
):
    """Render a bokeh image from an MPI stack.

    Each plane is blurred with a disc kernel of radius
    blur_amount * |d_i - refocus_disparity| (premultiplied color and alpha
    convolved separately), the blurred planes are composited back-to-front,
    and, with `normalize`, the result is divided by the identically
    composited blurred coverage.  Pixels whose coverage falls below EPS_NORM
    keep the unnormalized value.  Output is gamma-encoded and clamped.
    """
    h, w = mpi.height, mpi.width
    channels = mpi.planes[0].color.channels
    num = np.zeros((h, w, channels), dtype=DTYPE)
    den = np.zeros((h, w), dtype=DTYPE)
    transmittance = np.ones((h, w), dtype=DTYPE)
    kernels: dict[float, tuple] = {}

    for plane in reversed(mpi.planes):  # front-to-back visibility product
        if plane.is_empty():
            continue
        radius = float(
            blur_radius(params.blur_amount, plane.disparity, params.refocus_disparity)
        )
        cached = kernels.get(radius)
        if cached is None:
            kernel = disc_kernel(radius)
            cached = kernels.setdefault(
                radius, (kernel, _support_map(kernel, h, w))
            )
        kernel, support = cached
        blurred_premult, blurred_alpha = _blur_plane(
            plane.premultiplied(), plane.alpha.data, kernel, support
        )
        num += blurred_premult * transmittance[:, :, None]
        den += blurred_alpha * transmittance
        transmittance = transmittance * (1.0 - blurred_alpha)

    if normalize:
        safe = den >= EPS_NORM
        out = np.where(safe[:, :, None], num / np.maximum(den, EPS_NORM)[:, :, None], num)
    else:
        out = num
    image = gamma_encode(
        ImageBuffer(np.clip(out, 0.0, 1.0), space=LINEAR), params.gamma
    )
    if return_stats:
        stats = {
            "coverage_min": float(den.min()),
            "coverage_mean": float(den.mean()),
            "coverage_max": float(den.max()),
            "fallback_pixels": int(np.count_nonzero(den < EPS_NORM)),
        }
        return image, stats
    return image


# --------------------------------------------------------------------------
# Debug dump: N pairs of PNGs (color, alpha) plus an index JSON.  Colors are
# stored gamma-encoded at 8 bits with the gamma recorded in the index; alpha
# is stored as 16-bit grayscale.
# --------------------------------------------------------------------------

def save_stack(mpi: MpiStack, directory, gamma: float = 2.2):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, plane in enumerate(mpi.planes, start=1):
        color_name = f"plane_{idx:03d}_color.png"
        alpha_name = f"plane_{idx:03d}_alpha.png"
        save_image(gamma_encode(plane.color, gamma), directory / color_name)
        alpha16 = np.rint(plane.alpha.data * 65535.0).astype(np.uint16)
        from PIL import Image as _PILImage

        _PILImage.fromarray(alpha16).save(directory / alpha_name)
        entries.append(
            {
                "color": color_name,
                "alpha": alpha_name,
                "disparity": plane.disparity,
            }
        )
    index = {"gamma": gamma, "planes": entries}
    (directory / "stack.json").write_text(json.dumps(index, indent=2) + "\n")


def load_stack(directory) -> MpiStack:
    directory = Path(directory)
    index = json.loads((directory / "stack.json").read_text())
    gamma = float(index["gamma"])
    planes = []
    for entry in index["planes"]:
        color = gamma_decode(load_image(directory / entry["color"]), gamma)
        alpha_img = load_image(directory / entry["alpha"])
        alpha = Mask(alpha_img.data[:, :, 0])
        planes.append(MpiPlane(color, alpha, float(entry["disparity"])))
    return MpiStack(tuple(planes))
