#!/usr/bin/env python3
"""Generate the demo image/disparity pair bundled with the browser client.

Run from the repository root:  python tools/make_demo.py
"""

from pathlib import Path

from refocus.core import save_disparity, save_image
from refocus.oracle import composite_all_in_focus
from refocus.synth import DatasetConfig, random_scene

OUT = Path(__file__).resolve().parents[1] / "frontend" / "public" / "demo"


def main():
    cfg = DatasetConfig(
        n_scenes=1,
        resolution=(256, 256),
        n_foregrounds=3,
        disparity_mode="constant",
        rays=1,
        seed=0,
    )
    scene, object_disparities = random_scene(20240817, cfg)
    image, disparity = composite_all_in_focus(scene, gamma=2.2)
    OUT.mkdir(parents=True, exist_ok=True)
    save_image(image, OUT / "image.png")
    save_disparity(disparity, OUT / "disparity.png", bit_depth=16)
    print("objects at disparities:", [round(d, 4) for d in object_disparities])
    print("wrote", OUT / "image.png")
    print("wrote", OUT / "disparity.png")


if __name__ == "__main__":
    main()
