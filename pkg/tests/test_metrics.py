"""PSNR/SSIM, boundary bands, evaluation harness."""

import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from refocus.core import DisparityMap, ImageBuffer, Mask, RenderParams
from refocus.metrics import EvalReport, boundary_band, evaluate, psnr, quantize, ssim
from refocus.occlusion import OcclusionConfig
from refocus.synth import DatasetConfig, generate_dataset


def _img(data):
    return ImageBuffer(np.asarray(data, dtype=float))


class TestPsnr:
    def test_identical_images_is_inf(self):
        rng = np.random.default_rng(0)
        a = _img(rng.random((16, 16, 3)))
        assert math.isinf(psnr(a, a))

    def test_uniform_error_exact(self):
        a = _img(np.full((16, 16, 3), 0.5))
        b = _img(np.full((16, 16, 3), 0.6))
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_masked_mse_arithmetic(self):
        h = w = 16
        a = np.full((h, w, 3), 0.5)
        b = a.copy()
        b[: h // 2] += 0.1  # half the pixels carry error 0.1
        mask = np.zeros((h, w))
        mask[: h // 2] = 1.0
        masked = psnr(_img(a), _img(b), Mask(mask))
        unmasked = psnr(_img(a), _img(b))
        assert masked == pytest.approx(20.0, abs=1e-9)
        assert unmasked == pytest.approx(10 * math.log10(1 / 0.005), abs=1e-9)

    def test_full_mask_equals_unmasked(self):
        rng = np.random.default_rng(1)
        a = _img(rng.random((12, 12, 3)))
        b = _img(rng.random((12, 12, 3)))
        full = Mask(np.ones((12, 12)))
        assert psnr(a, b, full) == pytest.approx(psnr(a, b), abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        a = _img(rng.random((12, 12, 3)))
        b = _img(rng.random((12, 12, 3)))
        assert psnr(a, b) == pytest.approx(psnr(b, a), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            psnr(_img(np.zeros((8, 8, 3))), _img(np.zeros((8, 9, 3))))

    def test_empty_mask_rejected(self):
        a = _img(np.zeros((8, 8, 3)))
        with pytest.raises(ValueError):
            psnr(a, a, Mask(np.zeros((8, 8))))


class TestSsim:
    def test_identical_images(self):
        rng = np.random.default_rng(3)
        a = _img(rng.random((32, 32, 3)))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-9)

    def test_negative_image_anticorrelates(self):
        rng = np.random.default_rng(4)
        binary = (rng.random((48, 48, 1)) < 0.5).astype(float)
        a = _img(binary)
        b = _img(1.0 - binary)
        # interior windows see perfectly anticorrelated structure
        interior = Mask(np.pad(np.ones((28, 28)), 10))
        assert ssim(a, b, interior) < -0.8

    def test_constant_offset_golden_value(self):
        # closed-form: zero variances, luminance term only
        a = _img(np.full((32, 32, 3), 0.4))
        b = _img(np.full((32, 32, 3), 0.5))
        c1 = 0.01**2
        want = (2 * 0.4 * 0.5 + c1) / (0.4**2 + 0.5**2 + c1)
        assert ssim(a, b) == pytest.approx(want, abs=1e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        a = _img(rng.random((24, 24, 3)))
        b = _img(rng.random((24, 24, 3)))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_noise_decreases_score(self):
        rng = np.random.default_rng(6)
        base = rng.random((32, 32, 3)) * 0.6 + 0.2
        a = _img(base)
        small = _img(np.clip(base + rng.normal(0, 0.02, base.shape), 0, 1))
        large = _img(np.clip(base + rng.normal(0, 0.1, base.shape), 0, 1))
        assert ssim(a, a) > ssim(a, small) > ssim(a, large)

    def test_minimum_size_enforced(self):
        a = _img(np.zeros((8, 8, 3)))
        with pytest.raises(ValueError):
            ssim(a, a)


class TestBoundaryBand:
    def test_constant_disparity_empty(self):
        band = boundary_band(
            DisparityMap(np.full((64, 64), 0.5)), RenderParams(32.0, 0.2)
        )
        assert band.is_empty()

    def test_step_band_half_width(self):
        data = np.full((96, 96), 0.2)
        data[:, 48:] = 0.7  # step 0.5
        band = boundary_band(DisparityMap(data), RenderParams(32.0, 0.2))
        cols = np.nonzero(band.data[48])[0]
        # dilation radius = max(8, ceil(32*0.5)) = 16 around columns 47/48
        assert cols.min() == pytest.approx(47 - 16, abs=1)
        assert cols.max() == pytest.approx(48 + 16, abs=1)

    def test_band_smaller_than_image(self):
        data = np.full((96, 96), 0.2)
        data[30:60, 30:60] = 0.8
        band = boundary_band(DisparityMap(data), RenderParams(20.0, 0.2))
        assert 0 < band.data.mean() < 1.0

    def test_monotone_in_blur(self):
        data = np.full((96, 96), 0.2)
        data[30:60, 30:60] = 0.8
        d = DisparityMap(data)
        areas = [
            boundary_band(d, RenderParams(a, 0.2)).data.sum() for a in (10, 30, 60)
        ]
        assert areas[0] <= areas[1] <= areas[2]


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("gt")
    cfg = DatasetConfig(
        n_scenes=1,
        resolution=(96, 96),
        rays=8,
        blur_params=(20.0, 60.0),
        n_foregrounds=2,
        seed=12,
    )
    manifest = generate_dataset(cfg, root)
    return root, manifest


class TestEvaluate:
    def test_perfect_predictions(self, tiny_dataset, tmp_path):
        root, manifest = tiny_dataset
        report = evaluate(root, root / "manifest.json", method="copy-gt")
        assert not report.missing
        assert all(math.isinf(e["psnr"]) for e in report.images)
        assert all(e["ssim"] == pytest.approx(1.0, abs=1e-9) for e in report.images)

    def test_all_in_focus_predictions_degrade_with_blur(self, tiny_dataset, tmp_path):
        root, manifest = tiny_dataset
        pred = tmp_path / "pred_aif"
        for scene in manifest["scenes"]:
            scene_dir = pred / scene["dir"]
            scene_dir.mkdir(parents=True)
            for entry in scene["bokeh"]:
                shutil.copy(root / scene["dir"] / "aif.png", scene_dir / entry["file"])
        report = evaluate(pred, root / "manifest.json", method="aif-copy")
        by_blur = {}
        for e in report.images:
            blur = [b["blur"] for s in manifest["scenes"] for b in s["bokeh"] if f"{s['dir']}/{b['file']}" == e["file"]][0]
            by_blur.setdefault(blur, []).append(e["psnr"])
        assert np.mean(by_blur[60.0]) < np.mean(by_blur[20.0])

    def test_partial_predictions_listed(self, tiny_dataset, tmp_path):
        root, manifest = tiny_dataset
        pred = tmp_path / "pred_partial"
        scene = manifest["scenes"][0]
        scene_dir = pred / scene["dir"]
        scene_dir.mkdir(parents=True)
        first = scene["bokeh"][0]["file"]
        shutil.copy(root / scene["dir"] / first, scene_dir / first)
        report = evaluate(pred, root / "manifest.json")
        assert len(report.images) == 1
        assert len(report.missing) == len(scene["bokeh"]) - 1

    def test_report_serialization(self, tiny_dataset, tmp_path):
        root, _ = tiny_dataset
        report = evaluate(root, root / "manifest.json", method="copy-gt")
        doc = json.loads(report.to_json())
        assert doc["method"] == "copy-gt"
        assert doc["images"][0]["psnr"] == "inf"
        table = report.to_table()
        assert "psnr_ob" in table and "mean" in table


class TestQuantize:
    def test_rounds_to_8bit_grid(self):
        img = _img(np.array([[[0.1, 0.5, 0.9]]]))
        q = quantize(img)
        assert np.allclose(q.data * 255, np.rint(q.data * 255))
