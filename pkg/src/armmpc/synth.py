"""Synthetic pinhole renders of a flat square target, with ground truth.

Used to build test fixtures: the target's bounding box, centroid and
width-based depth are known exactly from the projection, independent of the
detection pipeline.

    python -m armmpc.synth scenarios/fixtures
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from armmpc.vision import CameraModel, encode_ppm, world_to_camera

GREEN = (0, 200, 0)
RED = (220, 0, 0)


def project_square(cam: CameraModel, world_point, width: float, image_size=(640, 480)) -> dict:
    """Pixel footprint of a camera-facing square of side ``width`` centred at ``world_point``."""
    w_img, h_img = image_size
    cam = cam.with_image_size(w_img, h_img)
    X, Y, Z = world_to_camera(cam, world_point)
    if Z <= 0:
        raise ValueError(f"target {world_point} is behind the camera")
    cx, cy = cam.principal_point
    u = cx + cam.focal * X / Z
    v = cy + cam.focal * Y / Z
    P = int(round(width * cam.focal / Z))
    if P < 3:
        raise ValueError(f"target renders only {P} px wide")
    x0 = int(round(u - (P - 1) / 2.0))
    y0 = int(round(v - (P - 1) / 2.0))
    # keep a blur-radius margin so edge clamping cannot touch the target
    if x0 < 2 or y0 < 2 or x0 + P > w_img - 2 or y0 + P > h_img - 2:
        raise ValueError(f"target footprint ({x0}, {y0}, {P}) leaves the {w_img}x{h_img} frame")
    return {
        "bbox": [x0, y0, P, P],
        "centroid": [x0 + (P - 1) / 2.0, y0 + (P - 1) / 2.0],
        "pixelWidth": P,
        "depth_m": width * cam.focal / P,
        "true_depth_m": float(Z),
        "world_m": [float(c) for c in world_point],
    }


def render(image_size, squares, background=(0, 0, 0)) -> np.ndarray:
    """Paint axis-aligned boxes ``[(bbox, rgb), ...]`` onto a flat background."""
    w_img, h_img = image_size
    img = np.empty((h_img, w_img, 3), dtype=np.uint8)
    img[:] = background
    for (x0, y0, w, h), color in squares:
        img[y0:y0 + h, x0:x0 + w] = color
    return img


# Bundled fixture layout: camera calibrated with a 2 cm card at 30 cm spanning 20 px.
FIXTURE_FOCAL = 20 * 0.30 / 0.02
FIXTURE_SIZE = (320, 240)
FIXTURE_OBJECT_WIDTH = 0.01
FIXTURES = {
    "green_reachable": {"world": (0.15, 0.0, 0.11), "distractor": ((200, 150, 8, 8), RED)},
    "green_far": {"world": (0.10, -0.20, 0.05), "distractor": None},
}


def build_fixtures(outdir) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cam = CameraModel(FIXTURE_FOCAL)
    size = FIXTURE_SIZE
    truth = {}
    for name, spec in FIXTURES.items():
        t = project_square(cam, spec["world"], FIXTURE_OBJECT_WIDTH, size)
        squares = [(tuple(t["bbox"]), GREEN)]
        if spec["distractor"] is not None:
            squares.append(spec["distractor"])
        (outdir / f"{name}.ppm").write_bytes(encode_ppm(render(size, squares)))
        truth[name] = t
    (outdir / "black.ppm").write_bytes(encode_ppm(render(size, [])))
    (outdir / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return truth


if __name__ == "__main__":
    build_fixtures(sys.argv[1] if len(sys.argv) > 1 else "scenarios/fixtures")
