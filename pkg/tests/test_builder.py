"""Stack builders, zone weights, diffusion inpainting, backgrounds."""

import numpy as np
import pytest

from refocus.builder import (
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
from refocus.compositor import compose_sharp, reconstruct_disparity
from refocus.core import DisparityMap, ImageBuffer, Mask, gamma_decode
from refocus.occlusion import OcclusionConfig, occlusion_mask
from refocus.oracle import PlanarLayer, SceneSpec, composite_all_in_focus


def _rgba(color, alpha, h, w):
    arr = np.zeros((h, w, 4))
    arr[:, :, :3] = np.asarray(color)
    arr[:, :, 3] = alpha
    return np.rint(arr * 255) / 255


def _coverage(stack):
    h, w = stack.height, stack.width
    cov = np.zeros((h, w))
    t = np.ones((h, w))
    for p in reversed(stack.planes):
        cov += p.alpha.data * t
        t = t * (1 - p.alpha.data)
    return cov


class TestInpaint:
    def test_empty_mask_identity(self):
        rng = np.random.default_rng(0)
        img = ImageBuffer(rng.random((16, 16, 3)))
        out = inpaint(img, Mask(np.zeros((16, 16))))
        assert out is img

    def test_constant_image_stays_constant(self):
        img = ImageBuffer(np.full((24, 24, 3), 0.6))
        mask = np.zeros((24, 24))
        mask[8:16, 8:16] = 1.0
        out = inpaint(img, Mask(mask), iters=500)
        assert np.abs(out.data - 0.6).max() < 1e-9

    def test_two_tone_fill_monotone_and_bounded(self):
        tone = np.zeros((48, 48, 3))
        tone[:, 24:] = 1.0
        mask = np.zeros((48, 48))
        yy, xx = np.mgrid[0:48, 0:48]
        disk = (yy - 24) ** 2 + (xx - 24) ** 2 < 10**2
        mask[disk] = 1.0
        out = inpaint(ImageBuffer(tone), Mask(mask), iters=2000)
        filled = out.data[disk]
        assert filled.min() >= -1e-9 and filled.max() <= 1.0 + 1e-9
        row = out.data[24, 13:36, 0]
        assert np.all(np.diff(row) >= -1e-3)  # monotone across the disk

    def test_unmasked_pixels_untouched(self):
        rng = np.random.default_rng(1)
        img = ImageBuffer(rng.random((20, 20, 3)))
        mask = np.zeros((20, 20))
        mask[5:9, 5:9] = 1.0
        out = inpaint(img, Mask(mask), iters=50)
        outside = mask == 0
        assert np.array_equal(out.data[outside], img.data[outside])


class TestZoneWeights:
    def test_bin_center_hits_single_plane(self):
        n = 32
        d = DisparityMap(np.full((4, 4), (17 - 0.5) / n))
        for soft in (True, False):
            w = zone_weights(d, n, soft=soft)
            assert np.allclose(w[16], 1.0)
            assert np.allclose(np.delete(w, 16, axis=0), 0.0)

    def test_bin_boundary_splits_evenly_in_soft_mode(self):
        n = 32
        d = DisparityMap(np.full((4, 4), 17 / n))
        w = zone_weights(d, n, soft=True)
        assert np.allclose(w[16], 0.5)
        assert np.allclose(w[17], 0.5)

    def test_partition_of_unity(self):
        rng = np.random.default_rng(2)
        d = DisparityMap(rng.random((32, 32)))
        for soft in (True, False):
            w = zone_weights(d, 32, soft=soft)
            assert np.abs(w.sum(axis=0) - 1.0).max() <= 1e-6

    def test_extremes_clamp_to_end_planes(self):
        d = DisparityMap(np.array([[0.0, 1.0]]))
        w = zone_weights(d, 8, soft=True)
        assert w[0, 0, 0] == pytest.approx(1.0)
        assert w[7, 0, 1] == pytest.approx(1.0)

    def test_zone_masks_wrapper(self):
        d = DisparityMap(np.full((4, 4), 0.5))
        masks = zone_masks(d, 8)
        assert len(masks) == 8
        total = sum(m.data for m in masks)
        assert np.allclose(total, 1.0)

    def test_alphas_from_weights_closes_coverage(self):
        rng = np.random.default_rng(3)
        w = zone_weights(DisparityMap(rng.random((8, 8))), 16, soft=True)
        a = alphas_from_weights(w)
        # over-composited visibility equals the weights
        t = np.ones((8, 8))
        for i in reversed(range(16)):
            vis = a[i] * t
            assert np.abs(vis - w[i]).max() < 1e-9
            t = t * (1 - a[i])
        assert np.abs(t).max() < 1e-9


class TestBuildIdeal:
    def test_constant_layer_lands_in_its_bin(self):
        arr = _rgba((0.4, 0.5, 0.6), 1.0, 8, 8)
        scene = SceneSpec(
            (PlanarLayer(ImageBuffer(arr), (0.0, 0.0, 1 / 0.515), full_frame=True),),
            (8, 8),
        )
        stack = build_mpi_ideal(scene, 32)
        nonempty = [i for i, p in enumerate(stack.planes) if not p.is_empty()]
        assert nonempty == [16]  # bin [16/32, 17/32)

    def test_two_plane_scene_reproduces_composite(self):
        bg = _rgba((0.3, 0.5, 0.2), 1.0, 32, 32)
        fg = _rgba((0.8, 0.1, 0.1), 1.0, 12, 12)
        scene = SceneSpec(
            (
                PlanarLayer(ImageBuffer(bg), (0.0, 0.0, 1 / 0.171875), full_frame=True),
                PlanarLayer(ImageBuffer(fg), (0.0, 0.0, 1 / 0.734375), offset=(9, 9)),
            ),
            (32, 32),
        )
        stack = build_mpi_ideal(scene, 32, gamma=2.2)
        nonempty = [i for i, p in enumerate(stack.planes) if not p.is_empty()]
        assert len(nonempty) == 2
        sharp = compose_sharp(stack)
        want, _ = composite_all_in_focus(scene, gamma=2.2)
        want_lin = gamma_decode(want, 2.2)
        assert np.abs(sharp.data - want_lin.data).max() <= 1e-6

    def test_ramp_layer_spans_bins_with_bounded_error(self):
        h = w = 64
        arr = _rgba((0.5, 0.5, 0.5), 1.0, h, w)
        n = 32
        # disparity ramp across exactly 3 bins: 0.40 -> 0.468 over 64 px
        # (0.40*32 = 12.8 in bin 12; 0.468*32 = 14.98 in bin 14)
        slope = 0.068 / (w - 1)
        c = 1.0 / 0.40
        a = -c * slope
        scene = SceneSpec(
            (PlanarLayer(ImageBuffer(arr), (a, 0.0, c), full_frame=True),), (w, h)
        )
        stack = build_mpi_ideal(scene, n)
        nonempty = [i for i, p in enumerate(stack.planes) if not p.is_empty()]
        assert len(nonempty) == 3
        assert nonempty == sorted(nonempty)
        _, disp = composite_all_in_focus(scene)
        rc = reconstruct_disparity(stack)
        assert np.abs(rc.data - disp.data).max() <= 1.0 / n

    def test_reconstruct_constant_map(self):
        arr = _rgba(0.5, 1.0, 8, 8)
        scene = SceneSpec(
            (PlanarLayer(ImageBuffer(arr), (0.0, 0.0, 2.0), full_frame=True),), (8, 8)
        )
        rc = reconstruct_disparity(build_mpi_ideal(scene, 32))
        assert np.abs(rc.data - 0.5).max() <= 1.0 / 32


class TestBuildHeuristic:
    def test_no_depth_edges_reproduces_image(self):
        rng = np.random.default_rng(4)
        img = ImageBuffer(np.rint(rng.random((24, 24, 3)) * 255) / 255)
        disp = DisparityMap(np.full((24, 24), 0.42))
        stack = build_mpi_heuristic(img, disp, None, 32, gamma=2.2)
        sharp = compose_sharp(stack)
        lin = gamma_decode(img, 2.2)
        assert np.abs(sharp.data - lin.data).max() <= 1e-6

    def test_coverage_always_one(self):
        rng = np.random.default_rng(5)
        img = ImageBuffer(rng.random((24, 24, 3)))
        disp = DisparityMap(rng.random((24, 24)))
        for soft in (True, False):
            stack = build_mpi_heuristic(img, disp, None, 16, soft=soft)
            assert np.abs(_coverage(stack) - 1.0).max() <= 1e-6

    def test_heuristic_with_true_background_matches_ideal_in_band(self):
        # step scene; feed the true background as the inpainted image
        h = w = 64
        rng = np.random.default_rng(6)
        bg_tex = np.rint(rng.random((h, w, 3)) * 0.4 * 255) / 255 + 0.3
        bg_tex = np.rint(bg_tex * 255) / 255
        bg = np.concatenate([bg_tex, np.ones((h, w, 1))], axis=2)
        fg = _rgba((0.9, 0.2, 0.1), 1.0, 24, 24)
        d_bg, d_fg = (6 - 0.5) / 32, (26 - 0.5) / 32
        scene = SceneSpec(
            (
                PlanarLayer(ImageBuffer(bg), (0.0, 0.0, 1 / d_bg), full_frame=True),
                PlanarLayer(ImageBuffer(fg), (0.0, 0.0, 1 / d_fg), offset=(20, 20)),
            ),
            (w, h),
        )
        aif, disp = composite_all_in_focus(scene, gamma=2.2)
        mask = occlusion_mask(disp, OcclusionConfig(extend_iters=8, dilate_px=3))
        true_bg = BackgroundSet(
            (
                BackgroundLayer(
                    ImageBuffer(bg[:, :, :3]),
                    DisparityMap(np.full((h, w), d_bg)),
                    mask,
                ),
            )
        )
        heur = build_mpi_heuristic(aif, disp, true_bg, 32, gamma=2.2)
        ideal = build_mpi_ideal(scene, 32, gamma=2.2)
        m = mask.data > 0
        diffs = []
        for hp, ip in zip(heur.planes, ideal.planes):
            pm_h = hp.color.data * hp.alpha.data[:, :, None]
            pm_i = ip.color.data * ip.alpha.data[:, :, None]
            diffs.append(((pm_h - pm_i) ** 2)[m].mean())
        rms = float(np.sqrt(np.mean(diffs)))
        assert rms <= 0.02

    def test_hidden_content_strictly_below_visible_bin(self):
        h = w = 48
        img = ImageBuffer(np.full((h, w, 3), 0.5))
        data = np.full((h, w), 0.2)
        data[16:32, 16:32] = 0.8
        disp = DisparityMap(data)
        mask = occlusion_mask(disp, OcclusionConfig(extend_iters=6, dilate_px=2))
        bgs = build_backgrounds(img, disp, mask)
        stack = build_mpi_heuristic(img, disp, bgs, 32)
        from refocus.builder import visible_bins

        b_vis = visible_bins(disp, 32)
        weights_vis = zone_weights(disp, 32)
        for i, plane in enumerate(stack.planes):
            if plane.blend is None:
                continue
            hidden = (plane.blend.data > 0) & (plane.alpha.data > 0) & (
                weights_vis[i] <= 0
            )
            assert np.all(i < b_vis[hidden])

    def test_rejects_background_closer_than_surface(self):
        h = w = 16
        img = ImageBuffer(np.full((h, w, 3), 0.5))
        disp = DisparityMap(np.full((h, w), 0.3))
        mask = np.zeros((h, w))
        mask[4:12, 4:12] = 1.0
        bad = BackgroundSet(
            (
                BackgroundLayer(
                    img, DisparityMap(np.full((h, w), 0.9)), Mask(mask)
                ),
            )
        )
        with pytest.raises(ValueError):
            build_mpi_heuristic(img, disp, bad, 32)

    def test_visible_only_ablation_matches_no_background(self):
        rng = np.random.default_rng(7)
        img = ImageBuffer(np.rint(rng.random((32, 32, 3)) * 255) / 255)
        data = np.full((32, 32), 0.2)
        data[10:22, 10:22] = 0.7
        disp = DisparityMap(data)
        mask = occlusion_mask(disp, OcclusionConfig(extend_iters=4, dilate_px=2))
        bgs = build_backgrounds(img, disp, mask)
        ablated = build_mpi_heuristic(img, disp, bgs, 16, use_background=False)
        plain = build_mpi_heuristic(img, disp, None, 16)
        for pa, pb in zip(ablated.planes, plain.planes):
            assert np.array_equal(pa.alpha.data, pb.alpha.data)
            assert np.array_equal(pa.color.data, pb.color.data)


class TestBuildBackgrounds:
    def test_empty_mask_returns_none(self):
        img = ImageBuffer(np.full((8, 8, 3), 0.5))
        disp = DisparityMap(np.full((8, 8), 0.5))
        assert build_backgrounds(img, disp, Mask(np.zeros((8, 8)))) is None

    def test_fill_comes_from_background_side(self):
        h = w = 48
        img_data = np.zeros((h, w, 3))
        img_data[:, :, 1] = 0.8  # green background
        img_data[16:32, 16:32] = (0.9, 0.0, 0.0)  # red foreground
        data = np.full((h, w), 0.2)
        data[16:32, 16:32] = 0.8
        disp = DisparityMap(data)
        mask = occlusion_mask(disp, OcclusionConfig(extend_iters=5, dilate_px=2))
        bgs = build_backgrounds(ImageBuffer(np.rint(img_data * 255) / 255), disp, mask)
        entry = bgs.entries[0]
        m = entry.mask.data > 0
        # filled area must look like background (green), not foreground red
        assert entry.image.data[:, :, 1][m].mean() > 0.5
        assert entry.image.data[:, :, 0][m].mean() < 0.3
        # background disparity never exceeds the visible surface
        assert np.all(entry.disparity.data[m] <= disp.data[m] + 1e-9)

    def test_multiple_levels_partition_by_occluder(self):
        h, w = 48, 96
        data = np.full((h, w), 0.1)
        data[8:40, 8:40] = 0.5
        data[8:40, 56:88] = 0.9
        disp = DisparityMap(data)
        img = ImageBuffer(np.full((h, w, 3), 0.5))
        mask = occlusion_mask(disp, OcclusionConfig(extend_iters=4, dilate_px=2))
        bgs = build_backgrounds(img, disp, mask, levels=2)
        assert bgs.count == 2
        union = sum(e.mask.data for e in bgs.entries)
        assert np.array_equal(union > 0, mask.data > 0)
