"""Refocusable bokeh rendering from an all-in-focus image and a disparity map.

The scene is represented as a stack of fronto-parallel RGBA planes at fixed
disparities; rendering blurs each plane with a disc kernel and composites
back-to-front with weight normalization, which makes blurred near objects
semi-transparent at their silhouettes and reveals the occluded background.
The package ships its own ray-tracing ground-truth generator, synthetic
dataset builder, occlusion-mask generator and evaluation metrics.
"""

from .core import (
    DisparityMap,
    GradientField,
    ImageBuffer,
    Mask,
    RenderParams,
    blur_radius,
    gamma_decode,
    gamma_encode,
    load_disparity,
    load_image,
    save_disparity,
    save_image,
)
from .compositor import (
    Kernel,
    MpiPlane,
    MpiStack,
    compose_sharp,
    disc_kernel,
    load_stack,
    plane_disparities,
    reconstruct_disparity,
    render_mpi,
    save_stack,
)
from .oracle import (
    ApertureSample,
    PlanarLayer,
    SceneSpec,
    aperture_samples,
    composite_all_in_focus,
    load_scene,
    project_sample,
    save_scene,
    trace_bokeh,
)
from .occlusion import (
    OcclusionConfig,
    disparity_gradient,
    extend_mask,
    forward_warp_normals,
    initial_mask,
    occlusion_mask,
    occlusion_mask_stages,
    remove_short_segments,
)
from .builder import (
    BackgroundLayer,
    BackgroundSet,
    alphas_from_weights,
    build_backgrounds,
    build_mpi_heuristic,
    build_mpi_ideal,
    inpaint,
    inpaint_disparity,
    zone_masks,
    zone_weights,
)
from .synth import DatasetConfig, augment_disparity, generate_dataset, random_scene
from .metrics import EvalReport, boundary_band, evaluate, psnr, quantize, ssim
from .estimator import MpiBokehRenderer

__version__ = "0.1.0"

__all__ = [
    "ApertureSample",
    "BackgroundLayer",
    "BackgroundSet",
    "DatasetConfig",
    "DisparityMap",
    "EvalReport",
    "GradientField",
    "ImageBuffer",
    "Kernel",
    "Mask",
    "MpiBokehRenderer",
    "MpiPlane",
    "MpiStack",
    "OcclusionConfig",
    "PlanarLayer",
    "RenderParams",
    "SceneSpec",
    "alphas_from_weights",
    "aperture_samples",
    "blur_radius",
    "boundary_band",
    "build_backgrounds",
    "build_mpi_heuristic",
    "build_mpi_ideal",
    "compose_sharp",
    "composite_all_in_focus",
    "disc_kernel",
    "disparity_gradient",
    "evaluate",
    "extend_mask",
    "forward_warp_normals",
    "gamma_decode",
    "gamma_encode",
    "generate_dataset",
    "initial_mask",
    "inpaint",
    "inpaint_disparity",
    "load_disparity",
    "load_image",
    "load_scene",
    "load_stack",
    "occlusion_mask",
    "occlusion_mask_stages",
    "plane_disparities",
    "project_sample",
    "psnr",
    "quantize",
    "random_scene",
    "reconstruct_disparity",
    "remove_short_segments",
    "render_mpi",
    "save_disparity",
    "save_image",
    "save_scene",
    "save_stack",
    "ssim",
    "trace_bokeh",
    "zone_masks",
    "zone_weights",
]
