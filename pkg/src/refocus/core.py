"""Shared image/disparity/parameter types, PNG I/O, gamma transforms and the
blur-radius law.

Conventions used throughout the package:

- Images are (H, W, C) float64 arrays in [0, 1].  A color-space tag records
  whether samples are gamma-encoded (as stored in files) or linear
  irradiance (as required by all compositing math).
- Disparity is inverse depth normalized to [0, 1]; larger means closer to
  the camera.  Defocus of a pixel at disparity d, refocused at d_f, has
  blur radius  blur_amount * |d - d_f|  in pixels.
- All types are immutable after construction; operations return new values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .validation import (
    DTYPE,
    as_unit_array,
    check_finite_array,
    check_gamma,
    check_image_array,
    check_map_array,
    check_same_size,
)

ENCODED = "encoded"
LINEAR = "linear"


@dataclass(frozen=True)
class ImageBuffer:
    """An (H, W, C) float image in [0, 1] with a color-space tag."""

    data: np.ndarray
    space: str = ENCODED

    def __post_init__(self):
        object.__setattr__(self, "data", check_image_array(self.data))
        if self.space not in (ENCODED, LINEAR):
            raise ValueError(f"unknown color space {self.space!r}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def rgb(self) -> np.ndarray:
        """Color channels without alpha (1 or 3 channels)."""
        if self.channels in (2, 4):
            return self.data[:, :, : self.channels - 1]
        return self.data

    def alpha(self) -> np.ndarray | None:
        """Alpha channel if present, else None."""
        if self.channels in (2, 4):
            return self.data[:, :, -1]
        return None


@dataclass(frozen=True)
class DisparityMap:
    """An (H, W) float map in [0, 1]; larger value = closer to camera."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", check_map_array(self.data, "disparity"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def sample_bilinear(self, x: float, y: float) -> float:
        """Bilinear lookup at continuous pixel coordinates, clamped to edges."""
        h, w = self.data.shape
        x = min(max(float(x), 0.0), w - 1.0)
        y = min(max(float(y), 0.0), h - 1.0)
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
        fx, fy = x - x0, y - y0
        top = self.data[y0, x0] * (1 - fx) + self.data[y0, x1] * fx
        bot = self.data[y1, x0] * (1 - fx) + self.data[y1, x1] * fx
        return float(top * (1 - fy) + bot * fy)


@dataclass(frozen=True)
class Mask:
    """An (H, W) float map in [0, 1]; 0 = keep, 1 = selected."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", check_map_array(self.data, "mask"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def is_empty(self) -> bool:
        return not bool(np.any(self.data > 0))


@dataclass(frozen=True)
class GradientField:
    """Per-pixel (gx, gy) gradient vectors in disparity units per pixel."""

    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gx", check_finite_array(self.gx, "gx"))
        object.__setattr__(self, "gy", check_finite_array(self.gy, "gy"))
        if self.gx.shape != self.gy.shape:
            raise ValueError("gx and gy must share shape")

    @property
    def height(self) -> int:
        return self.gx.shape[0]

    @property
    def width(self) -> int:
        return self.gx.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.gx, self.gy)


@dataclass(frozen=True)
class RenderParams:
    """Controlling parameters of a single bokeh render.

    blur_amount: pixels of maximum blur radius per unit disparity difference.
    refocus_disparity: the disparity rendered perfectly sharp.
    gamma: exponent of the encoded-to-linear transform, in [1, 4].
    plane_count: number of depth planes used by layered rendering.
    """

    blur_amount: float
    refocus_disparity: float
    gamma: float = 2.2
    plane_count: int = 32

    def __post_init__(self):
        if self.blur_amount < 0:
            raise ValueError("blur_amount must be >= 0")
        if not (0.0 <= self.refocus_disparity <= 1.0):
            raise ValueError("refocus_disparity must lie in [0, 1]")
        check_gamma(self.gamma)
        if self.plane_count < 2:
            raise ValueError("plane_count must be >= 2")


def blur_radius(blur_amount, d, refocus_disparity):
    """Blur radius in pixels of a point at disparity `d` when the scene is
    refocused at `refocus_disparity`: blur_amount * |d - refocus_disparity|.

    Accepts scalars or arrays for `d`.
    """
    if blur_amount < 0:
        raise ValueError("blur_amount must be >= 0")
    return blur_amount * np.abs(np.asarray(d, dtype=DTYPE) - refocus_disparity)


def _pow_color(img: ImageBuffer, exponent: float, out_space: str) -> ImageBuffer:
    data = np.array(img.data)
    if img.channels in (2, 4):
        # Alpha is coverage, not irradiance: it is never gamma-mapped.
        data[:, :, :-1] = np.power(data[:, :, :-1], exponent)
    else:
        data = np.power(data, exponent)
    return ImageBuffer(data, space=out_space)


def gamma_decode(img: ImageBuffer, gamma: float) -> ImageBuffer:
    """Encoded -> linear: every color sample v becomes v ** gamma."""
    gamma = check_gamma(gamma)
    if img.space != ENCODED:
        raise ValueError("gamma_decode expects a gamma-encoded image")
    return _pow_color(img, gamma, LINEAR)


def gamma_encode(img: ImageBuffer, gamma: float) -> ImageBuffer:
    """Linear -> encoded: every color sample v becomes v ** (1 / gamma)."""
    gamma = check_gamma(gamma)
    if img.space != LINEAR:
        raise ValueError("gamma_encode expects a linear image")
    return _pow_color(img, 1.0 / gamma, ENCODED)


# --------------------------------------------------------------------------
# PNG I/O.  Color images are 8-bit; single-channel maps may be 8- or 16-bit.
# Loaded images are tagged `encoded`; disparity is geometry and carries no
# color-space tag.
# --------------------------------------------------------------------------

def _open_png(path) -> Image.Image:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise ValueError(f"cannot decode {path}: {exc}") from exc
    return img


def _to_unit_array(img: Image.Image) -> np.ndarray:
    if img.mode in ("I;16", "I;16B", "I"):
        arr = np.asarray(img, dtype=np.float64)
        return arr / 65535.0
    if img.mode not in ("L", "LA", "RGB", "RGBA"):
        img = img.convert("RGBA" if "A" in img.mode else "RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def load_image(path) -> ImageBuffer:
    """Load an 8/16-bit PNG as a gamma-encoded ImageBuffer."""
    return ImageBuffer(_to_unit_array(_open_png(path)), space=ENCODED)


def save_image(img: ImageBuffer, path):
    """Save an ImageBuffer as an 8-bit PNG (values rounded to 1/255)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    quant = np.rint(img.data * 255.0).astype(np.uint8)
    if quant.shape[2] == 1:
        pil = Image.fromarray(quant[:, :, 0], mode="L")
    elif quant.shape[2] == 2:
        pil = Image.fromarray(quant, mode="LA")
    elif quant.shape[2] == 3:
        pil = Image.fromarray(quant, mode="RGB")
    else:
        pil = Image.fromarray(quant, mode="RGBA")
    pil.save(path, format="PNG")


def image_from_png_bytes(data: bytes) -> ImageBuffer:
    """Decode PNG bytes to a gamma-encoded ImageBuffer."""
    import io

    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ValueError(f"cannot decode image bytes: {exc}") from exc
    return ImageBuffer(_to_unit_array(img), space=ENCODED)


def disparity_from_png_bytes(data: bytes) -> DisparityMap:
    """Decode PNG bytes to a DisparityMap in [0, 1]."""
    import io

    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ValueError(f"cannot decode disparity bytes: {exc}") from exc
    arr = _to_unit_array(img)
    if arr.ndim == 3:
        arr = arr[:, :, :3].mean(axis=2) if arr.shape[2] >= 3 else arr[:, :, 0]
    return DisparityMap(arr)


def image_to_png_bytes(img: ImageBuffer) -> bytes:
    """Encode an ImageBuffer as 8-bit PNG bytes."""
    import io

    quant = np.rint(img.data * 255.0).astype(np.uint8)
    mode = {1: "L", 2: "LA", 3: "RGB", 4: "RGBA"}[quant.shape[2]]
    pil = Image.fromarray(quant[:, :, 0] if mode == "L" else quant, mode=mode)
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def load_disparity(path) -> DisparityMap:
    """Load an 8/16-bit grayscale PNG as a DisparityMap in [0, 1]."""
    arr = _to_unit_array(_open_png(path))
    if arr.ndim == 3:
        if arr.shape[2] >= 3:
            # Accept color files by luma; disparity is conventionally gray.
            arr = arr[:, :, :3].mean(axis=2)
        else:
            arr = arr[:, :, 0]
    return DisparityMap(arr)


def save_disparity(disp: DisparityMap, path, bit_depth: int = 16):
    """Save a DisparityMap as an 8- or 16-bit grayscale PNG."""
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if bit_depth == 8:
        pil = Image.fromarray(np.rint(disp.data * 255.0).astype(np.uint8), mode="L")
    else:
        pil = Image.fromarray(np.rint(disp.data * 65535.0).astype(np.uint16))
    pil.save(path, format="PNG")


def save_disparity_range(path, lo: float, hi: float):
    """Sidecar recording the pre-normalization disparity range of a map."""
    Path(path).write_text(json.dumps({"min": lo, "max": hi}) + "\n")


def load_disparity_range(path) -> tuple[float, float]:
    meta = json.loads(Path(path).read_text())
    return float(meta["min"]), float(meta["max"])
