"""HTTP render service: session lifecycle, rendering, errors, eviction."""

import io
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from refocus.core import (
    DisparityMap,
    ImageBuffer,
    image_from_png_bytes,
    image_to_png_bytes,
)
from refocus.service import create_app

import refocus.core as core


def _png_pair(seed=0, h=64, w=64):
    rng = np.random.default_rng(seed)
    img = ImageBuffer(np.rint(rng.random((h, w, 3)) * 255) / 255)
    data = np.full((h, w), 0.2)
    data[20:44, 20:44] = 0.8
    disp_png = io.BytesIO()
    from PIL import Image

    Image.fromarray(np.rint(data * 65535).astype(np.uint16)).save(disp_png, format="PNG")
    return image_to_png_bytes(img), disp_png.getvalue(), img


@pytest.fixture()
def client():
    app = create_app(session_cap=2)
    with TestClient(app) as c:
        yield c


def _create_session(client, seed=0, **form):
    image_png, disparity_png, img = _png_pair(seed)
    form.setdefault("inpaint_iters", 100)
    resp = client.post(
        "/session",
        files={
            "image": ("image.png", image_png, "image/png"),
            "disparity": ("disparity.png", disparity_png, "image/png"),
        },
        data={k: str(v) for k, v in form.items()},
    )
    return resp, img


class TestSessionLifecycle:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"ok": True}

    def test_create_render_lookup(self, client):
        resp, img = _create_session(client)
        assert resp.status_code == 200
        body = resp.json()
        assert body["width"] == 64 and body["height"] == 64
        sid = body["id"]

        render = client.post("/render", json={"id": sid, "A": 12.0, "d_f": 0.2})
        assert render.status_code == 200
        assert render.headers["content-type"] == "image/png"
        out = image_from_png_bytes(render.content)
        assert out.width == 64

        d = client.get("/disparity", params={"id": sid, "x": 30, "y": 30}).json()
        assert d["d"] == pytest.approx(0.8)
        d2 = client.get("/disparity", params={"id": sid, "x": 2, "y": 2}).json()
        assert d2["d"] == pytest.approx(0.2)

    def test_zero_blur_round_trips_image(self, client):
        resp, img = _create_session(client)
        sid = resp.json()["id"]
        render = client.post("/render", json={"id": sid, "A": 0.0, "d_f": 0.5})
        out = image_from_png_bytes(render.content)
        assert np.abs(out.data - img.data).max() <= 1.0 / 255.0

    def test_render_by_focus_point(self, client):
        resp, _ = _create_session(client)
        sid = resp.json()["id"]
        a = client.post("/render", json={"id": sid, "A": 10.0, "focus": {"x": 30, "y": 30}})
        b = client.post("/render", json={"id": sid, "A": 10.0, "d_f": 0.8})
        assert a.content == b.content

    def test_second_render_reuses_representation(self, client):
        resp, _ = _create_session(client, seed=5)
        sid = resp.json()["id"]
        t0 = time.perf_counter()
        client.post("/render", json={"id": sid, "A": 16.0, "d_f": 0.2})
        first = time.perf_counter() - t0
        t0 = time.perf_counter()
        client.post("/render", json={"id": sid, "A": 24.0, "d_f": 0.8})
        second = time.perf_counter() - t0
        # no rebuild: the second render must not be drastically slower
        assert second < first * 3 + 0.5

    def test_renders_do_not_mutate_session(self, client):
        resp, _ = _create_session(client)
        sid = resp.json()["id"]
        a = client.post("/render", json={"id": sid, "A": 8.0, "d_f": 0.2}).content
        client.post("/render", json={"id": sid, "A": 31.0, "d_f": 0.9, "gamma": 1.3})
        b = client.post("/render", json={"id": sid, "A": 8.0, "d_f": 0.2}).content
        assert a == b


class TestErrors:
    def test_unknown_session_404(self, client):
        resp = client.post("/render", json={"id": "nope", "A": 1.0, "d_f": 0.5})
        assert resp.status_code == 404
        assert "error" in resp.json()

    def test_evicted_session_410(self, client):
        first, _ = _create_session(client, seed=1)
        sid = first.json()["id"]
        _create_session(client, seed=2)
        _create_session(client, seed=3)  # cap is 2: first gets evicted
        resp = client.post("/render", json={"id": sid, "A": 1.0, "d_f": 0.5})
        assert resp.status_code == 410
        assert "error" in resp.json()

    def test_missing_blur_400(self, client):
        resp, _ = _create_session(client)
        sid = resp.json()["id"]
        r = client.post("/render", json={"id": sid, "d_f": 0.5})
        assert r.status_code == 400
        assert "error" in r.json()

    def test_both_focus_specs_400(self, client):
        resp, _ = _create_session(client)
        sid = resp.json()["id"]
        r = client.post(
            "/render",
            json={"id": sid, "A": 4.0, "d_f": 0.5, "focus": {"x": 1, "y": 1}},
        )
        assert r.status_code == 400

    def test_invalid_gamma_400(self, client):
        resp, _ = _create_session(client)
        sid = resp.json()["id"]
        r = client.post("/render", json={"id": sid, "A": 4.0, "d_f": 0.5, "gamma": 9.0})
        assert r.status_code == 400

    def test_dimension_mismatch_400(self, client):
        image_png, _, _ = _png_pair(0, h=64, w=64)
        _, disparity_png, _ = _png_pair(0, h=32, w=32)
        resp = client.post(
            "/session",
            files={
                "image": ("image.png", image_png, "image/png"),
                "disparity": ("disparity.png", disparity_png, "image/png"),
            },
        )
        assert resp.status_code == 400
        assert "error" in resp.json()

    def test_garbage_upload_400(self, client):
        resp = client.post(
            "/session",
            files={
                "image": ("image.png", b"not a png", "image/png"),
                "disparity": ("disparity.png", b"also not", "image/png"),
            },
        )
        assert resp.status_code == 400

    def test_payload_limit_413(self):
        app = create_app(session_cap=2, max_bytes=1024)
        with TestClient(app) as client:
            resp, _ = _create_session(client)
            assert resp.status_code == 413

    def test_malformed_json_400(self, client):
        resp = client.post("/render", json={"A": 1.0})
        assert resp.status_code == 400


class TestStaticUi:
    def test_ui_bundle_served_when_configured(self):
        from pathlib import Path

        dist = Path(__file__).resolve().parents[1] / "frontend" / "dist"
        if not (dist / "index.html").exists():
            pytest.skip("frontend bundle not built")
        app = create_app(session_cap=1, ui_dir=dist)
        with TestClient(app) as client:
            page = client.get("/ui/")
            assert page.status_code == 200
            assert "text/html" in page.headers["content-type"]
            script = client.get("/ui/main.js")
            assert script.status_code == 200
