"""Ray-tracing bokeh generator for layered planar-disparity scenes.

Serves as the ground truth that layered rendering is judged against.  A
scene is a back-to-front list of RGBA layers, each lying on a planar
disparity surface d(x, y) = (1 - a*x - b*y) / c over the canvas.  For every
output pixel, rays through aperture samples (mu, nu) are walked
front-to-back; each ray deposits energy proportional to the alpha it meets
(energy splitting), so blurred near objects become semi-transparent and
reveal the occluded background.  The back-most layer is opaque and
full-frame, so rays always terminate.

The projected intersection of a ray with a layer plane lands at

    x_n = x + (1 - a*x - b*y - c*d_f) / (a*A*mu + b*A*nu + c) * A*mu

(and symmetrically for y_n).  For a fronto-parallel layer (a = b = 0) this
reduces to the familiar offset A * (d - d_f) * mu, consistent with the
blur-radius law.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    DTYPE,
    ENCODED,
    DisparityMap,
    ImageBuffer,
    RenderParams,
    gamma_decode,
    gamma_encode,
    load_image,
    save_image,
)

EPS_DEN = 1e-6  # denominators smaller than this mean ray (near-)parallel to plane
EPS_ENERGY = 1e-3  # residual ray energy below this is dropped


@dataclass(frozen=True)
class ApertureSample:
    """A point (mu, nu) within the unit-disk aperture."""

    mu: float
    nu: float

    def __post_init__(self):
        if self.mu * self.mu + self.nu * self.nu > 1.0 + 1e-9:
            raise ValueError("aperture sample must satisfy mu^2 + nu^2 <= 1")


@dataclass(frozen=True)
class PlanarLayer:
    """An RGBA layer on a planar disparity surface.

    `plane_coeffs` = (a, b, c) with c > 0 define the layer's disparity
    d(x, y) = (1 - a*x - b*y) / c in canvas pixel coordinates; `offset`
    places the layer's top-left texel at canvas position (x0, y0).
    """

    rgba: ImageBuffer
    plane_coeffs: tuple
    offset: tuple = (0, 0)
    full_frame: bool = False

    def __post_init__(self):
        if self.rgba.channels != 4:
            raise ValueError("layer image must have 4 channels (RGBA)")
        if self.rgba.space != ENCODED:
            raise ValueError("layer images are stored gamma-encoded")
        a, b, c = (float(v) for v in self.plane_coeffs)
        if c <= 0:
            raise ValueError("plane coefficient c must be > 0")
        object.__setattr__(self, "plane_coeffs", (a, b, c))
        x0, y0 = (float(v) for v in self.offset)
        if not (x0.is_integer() and y0.is_integer()):
            raise ValueError("layer offsets must be whole pixels")
        object.__setattr__(self, "offset", (int(x0), int(y0)))
        lo, hi = self._disparity_extrema()
        if lo < -1e-9 or hi > 1.0 + 1e-9:
            raise ValueError(
                f"layer disparity spans [{lo:.4f}, {hi:.4f}], outside [0, 1]"
            )

    def _disparity_extrema(self):
        # d is linear in (x, y): extrema lie on footprint corners.
        a, b, c = self.plane_coeffs
        x0, y0 = self.offset
        xs = (x0, x0 + self.rgba.width - 1)
        ys = (y0, y0 + self.rgba.height - 1)
        vals = [(1.0 - a * x - b * y) / c for x in xs for y in ys]
        return min(vals), max(vals)

    def disparity_at(self, x, y):
        a, b, c = self.plane_coeffs
        return (1.0 - a * np.asarray(x, dtype=DTYPE) - b * np.asarray(y, dtype=DTYPE)) / c


@dataclass(frozen=True)
class SceneSpec:
    """A layered scene: PlanarLayers ordered back-to-front on a canvas."""

    layers: tuple
    canvas: tuple  # (width, height)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("scene needs at least one layer")
        object.__setattr__(self, "layers", layers)
        w, h = (int(v) for v in self.canvas)
        if w < 1 or h < 1:
            raise ValueError("canvas must be at least 1x1")
        object.__setattr__(self, "canvas", (w, h))
        self._check_ordering()

    @property
    def width(self) -> int:
        return self.canvas[0]

    @property
    def height(self) -> int:
        return self.canvas[1]

    def _check_ordering(self):
        # Later (fronter) layers may not dip below earlier ones where they
        # overlap.  Disparity differences are linear, so checking the
        # overlap-rectangle corners is exact.
        for i, back in enumerate(self.layers):
            for front in self.layers[i + 1 :]:
                rect = _overlap_rect(back, front)
                if rect is None:
                    continue
                xs, ys = (rect[0], rect[2]), (rect[1], rect[3])
                diff = min(
                    front.disparity_at(x, y) - back.disparity_at(x, y)
                    for x in xs
                    for y in ys
                )
                if diff < -1e-9:
                    raise ValueError(
                        "scene layers out of order: a front layer lies behind "
                        f"a back layer by {-diff:.4g} disparity"
                    )

    def require_opaque_backdrop(self):
        back = self.layers[0]
        w, h = self.canvas
        full = (
            back.offset == (0, 0)
            and back.rgba.width == w
            and back.rgba.height == h
            and back.full_frame
        )
        if not full or float(back.rgba.data[:, :, 3].min()) < 1.0:
            raise ValueError("scene's back layer must be full-frame and opaque")


def _overlap_rect(la: PlanarLayer, lb: PlanarLayer):
    ax0, ay0 = la.offset
    bx0, by0 = lb.offset
    x0 = max(ax0, bx0)
    y0 = max(ay0, by0)
    x1 = min(ax0 + la.rgba.width - 1, bx0 + lb.rgba.width - 1)
    y1 = min(ay0 + la.rgba.height - 1, by0 + lb.rgba.height - 1)
    if x1 < x0 or y1 < y0:
        return None
    return (x0, y0, x1, y1)


# --------------------------------------------------------------------------
# Aperture sampling: stratified concentric-map samples over the unit disk,
# deterministic for a given seed, with the center ray prepended.
# --------------------------------------------------------------------------

def _concentric_map(uv: np.ndarray) -> np.ndarray:
    """Map [0,1]^2 to the unit disk, area-preserving (Shirley-Chiu)."""
    a = 2.0 * uv[:, 0] - 1.0
    b = 2.0 * uv[:, 1] - 1.0
    use_a = np.abs(a) > np.abs(b)
    r = np.where(use_a, a, b)
    ratio = np.divide(
        np.where(use_a, b, a),
        np.where(use_a, a, b),
        out=np.zeros_like(a),
        where=np.where(use_a, a, b) != 0,
    )
    phi = np.where(use_a, (np.pi / 4.0) * ratio, np.pi / 2.0 - (np.pi / 4.0) * ratio)
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)


def aperture_samples(n: int, seed: int = 0) -> list[ApertureSample]:
    """Exactly n deterministic samples inside the unit disk; first is (0,0)."""
    if n < 1:
        raise ValueError("need at least one aperture sample")
    pts = np.zeros((n, 2), dtype=DTYPE)
    if n > 1:
        m = int(np.ceil(np.sqrt(n - 1)))
        rng = np.random.default_rng(seed)
        jitter = rng.random((m * m, 2))
        gy, gx = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        cells = np.stack([gx.ravel(), gy.ravel()], axis=1)
        uv = (cells + jitter) / m
        pts[1:] = _concentric_map(uv[: n - 1])
    return [ApertureSample(float(mu), float(nu)) for mu, nu in pts]


def project_sample(x, y, coeffs, blur_amount, refocus_disparity, mu, nu):
    """Project the aperture ray (mu, nu) through pixel (x, y) onto a plane.

    Returns the landing coordinates (x_n, y_n), or None when the ray is
    (near-)parallel to the plane and the caller should skip it.
    """
    a, b, c = coeffs
    den = a * blur_amount * mu + b * blur_amount * nu + c
    if abs(den) < EPS_DEN:
        return None
    t = (1.0 - a * x - b * y - c * refocus_disparity) / den
    return (x + t * blur_amount * mu, y + t * blur_amount * nu)


def _bilinear_premult(texture: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Sample a premultiplied-RGBA texture at continuous coords; outside -> 0."""
    h, w = texture.shape[:2]
    flat = texture.reshape(-1, texture.shape[2])
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    out = np.zeros(x.shape + (texture.shape[2],), dtype=DTYPE)
    for dx, dy, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + dx
        yi = y0 + dy
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        idx = np.where(inside, yi * w + xi, 0)
        out += (wgt * inside)[..., None] * flat[idx]
    return out


def _sample_shifted(texture: np.ndarray, tx: float, ty: float, h: int, w: int):
    """Sample a texture at (x + tx, y + ty) over the integer canvas grid.

    A uniform translation keeps the bilinear weights constant across pixels,
    so sampling reduces to four shifted-rectangle adds.  Outside -> 0.
    """
    ix = int(np.floor(tx))
    iy = int(np.floor(ty))
    fx = tx - ix
    fy = ty - iy
    lh, lw = texture.shape[:2]
    out = np.zeros((h, w, texture.shape[2]), dtype=DTYPE)
    for dx, dy, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        if wgt == 0.0:
            continue
        ox = ix + dx
        oy = iy + dy
        cx0 = max(0, -ox)
        cy0 = max(0, -oy)
        cx1 = min(w, lw - ox)
        cy1 = min(h, lh - oy)
        if cx1 <= cx0 or cy1 <= cy0:
            continue
        out[cy0:cy1, cx0:cx1] += wgt * texture[cy0 + oy : cy1 + oy, cx0 + ox : cx1 + ox]
    return out


def _prepared_layers(scene: SceneSpec, gamma: float):
    """Front-to-back list of (coeffs, offset, premultiplied linear RGBA)."""
    prepared = []
    for layer in reversed(scene.layers):
        linear = gamma_decode(layer.rgba, gamma)
        alpha = linear.data[:, :, 3:4]
        premult = np.concatenate([linear.data[:, :, :3] * alpha, alpha], axis=2)
        prepared.append((layer.plane_coeffs, layer.offset, premult))
    return prepared


def trace_bokeh(
    scene: SceneSpec,
    params: RenderParams,
    n_samples: int = 2500,
    seed: int = 0,
) -> ImageBuffer:
    """Render ground-truth bokeh by backward-tracing aperture rays.

    Per pixel and aperture sample, layers are walked front-to-back; each
    valid intersection deposits weight*alpha*color and attenuates the ray by
    (1 - alpha).  The pixel value is the weighted average of all deposited
    colors, gamma-encoded on output.
    """
    scene.require_opaque_backdrop()
    samples = aperture_samples(n_samples, seed)
    layers = _prepared_layers(scene, params.gamma)

    w, h = scene.canvas
    any_planar = any(coeffs[0] != 0 or coeffs[1] != 0 for coeffs, _, _ in layers)
    if any_planar:
        ys, xs = np.meshgrid(
            np.arange(h, dtype=DTYPE), np.arange(w, dtype=DTYPE), indexing="ij"
        )
    accum_rgb = np.zeros((h, w, 3), dtype=DTYPE)
    accum_w = np.zeros((h, w), dtype=DTYPE)

    amount = params.blur_amount
    d_f = params.refocus_disparity
    for s in samples:
        weight = None  # lazily allocated; most rays hit the first layer fully
        for (a, b, c), (x0, y0), premult in layers:
            den = a * amount * s.mu + b * amount * s.nu + c
            if abs(den) < EPS_DEN:
                continue  # ray (near-)parallel to this plane
            if a == 0.0 and b == 0.0:
                # Fronto-parallel layer: the projection is a uniform shift
                # by A*(d - d_f)*(mu, nu), sampled with constant weights.
                d_plane = 1.0 / c
                tx = amount * (d_plane - d_f) * s.mu - x0
                ty = amount * (d_plane - d_f) * s.nu - y0
                sampled = _sample_shifted(premult, tx, ty, h, w)
            else:
                t = (1.0 - a * xs - b * ys - c * d_f) / den
                xn = xs + t * amount * s.mu - x0
                yn = ys + t * amount * s.nu - y0
                sampled = _bilinear_premult(premult, xn, yn)
            alpha = sampled[..., 3]
            if weight is None:
                accum_rgb += sampled[..., :3]
                accum_w += alpha
                weight = 1.0 - alpha
            else:
                accum_rgb += weight[:, :, None] * sampled[..., :3]
                accum_w += weight * alpha
                weight = weight * (1.0 - alpha)
            if float(weight.max()) < EPS_ENERGY:
                break

    rgb = accum_rgb / np.maximum(accum_w, 1e-12)[:, :, None]
    rgb[accum_w <= 0] = 0.0
    return gamma_encode(
        ImageBuffer(np.clip(rgb, 0.0, 1.0), space="linear"), params.gamma
    )


def composite_all_in_focus(scene: SceneSpec, gamma: float = 1.0):
    """All-in-focus composite and disparity of a scene.

    Colors are over-composited back-to-front in linear space (decoded with
    `gamma`, re-encoded on output); the disparity output over-composites
    each layer's planar disparity the same way.
    """
    scene.require_opaque_backdrop()
    w, h = scene.canvas
    ys, xs = np.meshgrid(np.arange(h, dtype=DTYPE), np.arange(w, dtype=DTYPE), indexing="ij")
    color = np.zeros((h, w, 3), dtype=DTYPE)
    disp = np.zeros((h, w), dtype=DTYPE)
    transmittance = np.ones((h, w), dtype=DTYPE)
    for layer in reversed(scene.layers):  # front first
        linear = gamma_decode(layer.rgba, gamma)
        x0, y0 = layer.offset
        lh, lw = linear.height, linear.width
        cy = slice(max(0, y0), min(h, y0 + lh))
        cx = slice(max(0, x0), min(w, x0 + lw))
        ly = slice(cy.start - y0, cy.stop - y0)
        lx = slice(cx.start - x0, cx.stop - x0)
        alpha = np.zeros((h, w), dtype=DTYPE)
        rgb = np.zeros((h, w, 3), dtype=DTYPE)
        alpha[cy, cx] = linear.data[ly, lx, 3]
        rgb[cy, cx] = linear.data[ly, lx, :3]
        d_layer = layer.disparity_at(xs, ys)
        color += rgb * (alpha * transmittance)[:, :, None]
        disp += d_layer * alpha * transmittance
        transmittance = transmittance * (1.0 - alpha)
    image = gamma_encode(ImageBuffer(np.clip(color, 0.0, 1.0), space="linear"), gamma)
    return image, DisparityMap(np.clip(disp, 0.0, 1.0))


# --------------------------------------------------------------------------
# Scene JSON: canvas size plus per-layer image path, plane coefficients
# (decimal strings, lossless at double precision), offset, full_frame flag.
# --------------------------------------------------------------------------

def scene_to_json(scene: SceneSpec, layer_paths: list[str]) -> dict:
    if len(layer_paths) != len(scene.layers):
        raise ValueError("need one image path per layer")
    return {
        "canvas": {"width": scene.width, "height": scene.height},
        "layers": [
            {
                "image": path,
                "plane": {
                    "a": repr(layer.plane_coeffs[0]),
                    "b": repr(layer.plane_coeffs[1]),
                    "c": repr(layer.plane_coeffs[2]),
                },
                "offset": list(layer.offset),
                "full_frame": layer.full_frame,
            }
            for layer, path in zip(scene.layers, layer_paths)
        ],
    }


def save_scene(scene: SceneSpec, path):
    """Write scene JSON plus one RGBA PNG per layer next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    for idx, layer in enumerate(scene.layers):
        name = f"{path.stem}_layer{idx:02d}.png"
        save_image(layer.rgba, path.parent / name)
        paths.append(name)
    doc = scene_to_json(scene, paths)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_scene(path) -> SceneSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValueError(f"cannot parse scene file {path}: {exc}") from exc
    try:
        canvas = (int(doc["canvas"]["width"]), int(doc["canvas"]["height"]))
        layers = []
        for entry in doc["layers"]:
            rgba = load_image(path.parent / entry["image"])
            if rgba.channels == 3:
                rgba = ImageBuffer(
                    np.concatenate(
                        [rgba.data, np.ones(rgba.data.shape[:2] + (1,), dtype=DTYPE)],
                        axis=2,
                    ),
                    space=ENCODED,
                )
            plane = entry["plane"]
            coeffs = (float(plane["a"]), float(plane["b"]), float(plane["c"]))
            layers.append(
                PlanarLayer(
                    rgba,
                    coeffs,
                    tuple(entry.get("offset", (0, 0))),
                    bool(entry.get("full_frame", False)),
                )
            )
    except KeyError as exc:
        raise ValueError(f"scene file {path} is missing field {exc}") from exc
    return SceneSpec(tuple(layers), canvas)
