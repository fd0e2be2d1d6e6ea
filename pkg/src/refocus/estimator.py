"""Scikit-learn style front door to the rendering pipeline.

`MpiBokehRenderer.fit(image, disparity)` builds the reusable scene
representation (occlusion masks, inpainted backgrounds, plane geometry);
`render`/`transform` then produce any number of bokeh images for different
blur amounts, focus points and gammas without repeating that work.  The
class follows estimator conventions (constructor stores hyperparameters
verbatim, fitted state carries a trailing underscore, `get_params` /
`set_params` work), so it composes with the usual tooling.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
from sklearn.base import BaseEstimator

from .builder import (
    BackgroundLayer,
    BackgroundSet,
    build_backgrounds,
    build_mpi_heuristic,
    inpaint_disparity,
)
from .compositor import MpiStack, reconstruct_disparity, render_mpi
from .core import DisparityMap, ImageBuffer, Mask, RenderParams
from .occlusion import OcclusionConfig, occlusion_mask
from .validation import check_gamma

_STACK_CACHE_SIZE = 4  # distinct gammas kept per fitted renderer


class MpiBokehRenderer(BaseEstimator):
    """Refocusable bokeh renderer with a fit-once / render-many lifecycle.

    Parameters
    ----------
    n_planes : number of depth planes of the scene representation.
    gamma : default encode/decode exponent; overridable per render.
    soft_zones : distribute pixels over the two bracketing planes (soft
        hats) instead of hard disparity bins.
    normalize : divide by composited blurred coverage while rendering.
    grad_threshold, min_segment, extend_iters, dilate_px : occlusion-mask
        generator knobs (see OcclusionConfig).  extend_iters=None sizes the
        mask for the worst supported blur, max(8, ceil(max_blur * step)),
        where step is the largest disparity jump in the fitted map; the
        representation then serves any later blur choice up to max_blur.
    max_blur : largest blur amount renders against this representation are
        expected to use (drives the default mask extension).
    n_backgrounds : how many disparity levels get their own inpainted
        background.
    use_background : False gives the visible-surface-only ablation.
    inpaint_iters : diffusion sweep budget of the built-in inpainter.
    """

    def __init__(
        self,
        n_planes: int = 32,
        gamma: float = 2.2,
        soft_zones: bool = True,
        normalize: bool = True,
        grad_threshold: float = 0.05,
        min_segment: int = 20,
        extend_iters: int | None = None,
        dilate_px: int = 5,
        max_blur: float = 80.0,
        n_backgrounds: int = 1,
        use_background: bool = True,
        inpaint_iters: int = 1000,
    ):
        self.n_planes = n_planes
        self.gamma = gamma
        self.soft_zones = soft_zones
        self.normalize = normalize
        self.grad_threshold = grad_threshold
        self.min_segment = min_segment
        self.extend_iters = extend_iters
        self.dilate_px = dilate_px
        self.max_blur = max_blur
        self.n_backgrounds = n_backgrounds
        self.use_background = use_background
        self.inpaint_iters = inpaint_iters

    # -- fitting ----------------------------------------------------------

    def _occlusion_config(self, disparity: DisparityMap) -> OcclusionConfig:
        if self.extend_iters is not None:
            extend = self.extend_iters
        else:
            from .occlusion import disparity_gradient

            step = float(disparity_gradient(disparity).magnitude().max())
            extend = max(8, int(np.ceil(self.max_blur * min(step, 1.0))))
        return OcclusionConfig(
            grad_threshold=self.grad_threshold,
            min_segment=self.min_segment,
            extend_iters=extend,
            dilate_px=self.dilate_px,
        )

    def fit(self, image, disparity, background=None):
        """Build the scene representation for one image + disparity pair.

        `background` optionally supplies an externally inpainted background
        image (ImageBuffer) or a full BackgroundSet, bypassing the built-in
        inpainter.
        """
        image = image if isinstance(image, ImageBuffer) else ImageBuffer(image)
        disparity = (
            disparity
            if isinstance(disparity, DisparityMap)
            else DisparityMap(disparity)
        )
        if image.data.shape[:2] != disparity.data.shape:
            raise ValueError("image and disparity must share dimensions")
        check_gamma(self.gamma)

        cfg = self._occlusion_config(disparity)
        mask = occlusion_mask(disparity, cfg)
        if isinstance(background, BackgroundSet):
            backgrounds = background
        elif isinstance(background, ImageBuffer):
            if mask.is_empty():
                backgrounds = None
            else:
                backgrounds = BackgroundSet(
                    (
                        BackgroundLayer(
                            background,
                            inpaint_disparity(disparity, mask, self.inpaint_iters),
                            mask,
                        ),
                    )
                )
        elif background is None:
            backgrounds = (
                build_backgrounds(
                    image,
                    disparity,
                    mask,
                    levels=self.n_backgrounds,
                    iters=self.inpaint_iters,
                )
                if self.use_background
                else None
            )
        else:
            raise TypeError("background must be ImageBuffer, BackgroundSet or None")

        self.image_ = image
        self.disparity_ = disparity
        self.occlusion_mask_ = mask
        self.backgrounds_ = backgrounds
        self._stacks = OrderedDict()
        return self

    def _check_fitted(self):
        if not hasattr(self, "image_"):
            raise RuntimeError("renderer is not fitted; call fit(image, disparity)")

    def stack_for_gamma(self, gamma: float) -> MpiStack:
        """The plane stack linearized at `gamma` (cached per gamma)."""
        self._check_fitted()
        gamma = check_gamma(gamma)
        stack = self._stacks.get(gamma)
        if stack is None:
            stack = build_mpi_heuristic(
                self.image_,
                self.disparity_,
                self.backgrounds_,
                plane_count=self.n_planes,
                gamma=gamma,
                soft=self.soft_zones,
                use_background=self.use_background,
            )
            self._stacks[gamma] = stack
            while len(self._stacks) > _STACK_CACHE_SIZE:
                self._stacks.popitem(last=False)
        else:
            self._stacks.move_to_end(gamma)
        return stack

    # -- rendering --------------------------------------------------------

    def focus_at(self, x: float, y: float, snap: bool = False) -> float:
        """Refocus disparity for a click at image coordinates (x, y)."""
        self._check_fitted()
        d = self.disparity_.sample_bilinear(x, y)
        if snap:
            centers = (np.arange(1, self.n_planes + 1) - 0.5) / self.n_planes
            d = float(centers[np.argmin(np.abs(centers - d))])
        return d

    def render(
        self,
        blur_amount: float,
        refocus_disparity: float | None = None,
        focus_xy: tuple | None = None,
        gamma: float | None = None,
        normalize: bool | None = None,
    ) -> ImageBuffer:
        """Render one bokeh image from the fitted representation."""
        self._check_fitted()
        if (refocus_disparity is None) == (focus_xy is None):
            raise ValueError("give exactly one of refocus_disparity or focus_xy")
        if focus_xy is not None:
            refocus_disparity = self.focus_at(*focus_xy)
        params = RenderParams(
            blur_amount,
            float(refocus_disparity),
            gamma=self.gamma if gamma is None else gamma,
            plane_count=self.n_planes,
        )
        stack = self.stack_for_gamma(params.gamma)
        return render_mpi(
            stack,
            params,
            normalize=self.normalize if normalize is None else normalize,
        )

    def transform(self, params_list) -> list:
        """Render a batch of RenderParams against the fitted representation."""
        self._check_fitted()
        out = []
        for params in params_list:
            if not isinstance(params, RenderParams):
                raise TypeError("transform expects RenderParams instances")
            stack = self.stack_for_gamma(params.gamma)
            out.append(render_mpi(stack, params, normalize=self.normalize))
        return out

    def reconstructed_disparity(self) -> DisparityMap:
        """Disparity implied by the built stack (discretization diagnostic)."""
        return reconstruct_disparity(self.stack_for_gamma(self.gamma))
