"""Color-blob localization from a single fixed camera.

Pipeline: box blur -> HSV threshold -> dilation -> largest 8-connected blob ->
similar-triangles depth -> pinhole back-projection -> camera-to-world.

Images are ``(height, width, 3)`` uint8 arrays; masks are boolean arrays of
shape ``(height, width)``.  Pixel (u, v) means column u, row v, with pixel
centers on integer coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from armmpc.errors import ImageFormatError, NoDetection, NonPositiveInput

DEFAULT_MOUNT_TRANSLATION = (0.10, 0.125, 0.08)
# optical axis -> world -y, image right -> world -x, image down -> world -z
DEFAULT_MOUNT_ROTATION = ((-1.0, 0.0, 0.0), (0.0, 0.0, -1.0), (0.0, -1.0, 0.0))

_PPM_HEADER = re.compile(rb"\AP6(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def read_ppm(path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"image: cannot read {path}: {exc.strerror}") from None
    return decode_ppm(data)


def decode_ppm(data: bytes) -> np.ndarray:
    m = _PPM_HEADER.match(data)
    if m is None:
        raise ImageFormatError("image: not a binary PPM (P6) header")
    width, height, maxval = (int(g) for g in m.groups())
    if width < 1 or height < 1:
        raise ImageFormatError(f"image: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"image: maxval must be 255, got {maxval}")
    body = data[m.end():]
    need = 3 * width * height
    if len(body) < need:
        raise ImageFormatError(f"image: truncated pixel data ({len(body)} of {need} bytes)")
    return np.frombuffer(body[:need], dtype=np.uint8).reshape(height, width, 3).copy()


def encode_ppm(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.uint8)
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + img.tobytes()


def write_ppm(path, img: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(img))


def box_blur(img: np.ndarray, radius: int = 1) -> np.ndarray:
    """Mean over the (2r+1)^2 window with edge clamping, rounded half up."""
    if radius < 0:
        raise ValueError(f"blur radius must be >= 0, got {radius}")
    if radius == 0:
        return np.array(img, dtype=np.uint8, copy=True)
    k = 2 * radius + 1
    padded = np.pad(np.asarray(img, dtype=np.int64), ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    cs = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1, padded.shape[2]), dtype=np.int64)
    cs[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    window = cs[k:, k:] - cs[:-k, k:] - cs[k:, :-k] + cs[:-k, :-k]
    n = k * k
    return ((2 * window + n) // (2 * n)).astype(np.uint8)


@dataclass(frozen=True)
class HsvRange:
    """Hue in degrees [0, 360); saturation and value as fractions. h_min > h_max wraps through 0."""

    h_min: float = 0.0
    h_max: float = 360.0
    s_min: float = 0.0
    s_max: float = 1.0
    v_min: float = 0.0
    v_max: float = 1.0

    def __post_init__(self):
        if not (0 <= self.h_min <= 360 and 0 <= self.h_max <= 360):
            raise ValueError(f"hue bounds must lie in [0, 360], got {self.h_min}, {self.h_max}")
        for lo, hi, name in ((self.s_min, self.s_max, "s"), (self.v_min, self.v_max, "v")):
            if not (0 <= lo <= hi <= 1):
                raise ValueError(f"{name} bounds must satisfy 0 <= min <= max <= 1, got {lo}, {hi}")

    @classmethod
    def from_opencv(cls, h_min, h_max, s_min, s_max, v_min, v_max) -> "HsvRange":
        """Convert 0-180 / 0-255 scaled bounds (OpenCV convention)."""
        return cls(2.0 * h_min, 2.0 * h_max, s_min / 255, s_max / 255, v_min / 255, v_max / 255)


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Float HSV image: H in degrees [0, 360), S and V in [0, 1]."""
    rgb = np.asarray(img, dtype=float) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    safe = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe) % 6.0,
        np.where(v == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(c > 0, 60.0 * h, 0.0) % 360.0
    return np.stack([h, s, v], axis=-1)


def rgb_to_hsv_mask(img: np.ndarray, rng: HsvRange) -> np.ndarray:
    hsv = rgb_to_hsv(img)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    if rng.h_min <= rng.h_max:
        hue_ok = (h >= rng.h_min) & (h <= rng.h_max)
    else:
        hue_ok = (h >= rng.h_min) | (h <= rng.h_max)
    return hue_ok & (s >= rng.s_min) & (s <= rng.s_max) & (v >= rng.v_min) & (v <= rng.v_max)


def dilate(mask: np.ndarray, iterations: int = 2) -> np.ndarray:
    """Binary dilation with the full 3x3 structuring element."""
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    out = np.array(mask, dtype=bool, copy=True)
    h, w = out.shape
    for _ in range(iterations):
        p = np.pad(out, 1)
        out = np.zeros_like(out)
        for dy in range(3):
            for dx in range(3):
                out |= p[dy:dy + h, dx:dx + w]
    return out


@dataclass(frozen=True)
class Detection:
    bbox: tuple  # (x, y, w, h) in pixels
    centroid: tuple  # (u, v)
    area: int

    @property
    def pixel_width(self) -> int:
        return self.bbox[2]


_EIGHT = np.ones((3, 3), dtype=bool)


def largest_component_bbox(mask: np.ndarray, measure: np.ndarray | None = None) -> Detection:
    """Bounding box of the largest 8-connected component of ``mask``.

    If ``measure`` is given (e.g. the pre-dilation mask), the box and centroid
    are taken over ``measure`` pixels inside the chosen component, so that
    dilation merges fragments without inflating the reported size.  Ties in
    area go to the component found first in raster order.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_EIGHT)
    if count == 0:
        raise NoDetection("no pixels matched the color range")
    areas = np.bincount(labels.ravel())[1:]
    best = int(np.argmax(areas)) + 1
    comp = labels == best
    if measure is not None:
        inner = comp & np.asarray(measure, dtype=bool)
        if inner.any():
            comp = inner
    rows, cols = np.nonzero(comp)
    x0, x1 = int(cols.min()), int(cols.max())
    y0, y1 = int(rows.min()), int(rows.max())
    return Detection((x0, y0, x1 - x0 + 1, y1 - y0 + 1), (float(cols.mean()), float(rows.mean())), int(comp.sum()))


def calibrate_focal(known_width: float, known_distance: float, pixel_width: float) -> float:
    """Focal length in pixels from one reference observation: F = P D / W."""
    if not (known_width > 0 and known_distance > 0 and pixel_width > 0):
        raise NonPositiveInput(
            f"calibration inputs must be positive: W={known_width}, D={known_distance}, P={pixel_width}"
        )
    return pixel_width * known_distance / known_width


def estimate_depth(focal: float, actual_width: float, pixel_width: float) -> float:
    """Range to an object of known width: D = W F / P."""
    if not (focal > 0 and actual_width > 0 and pixel_width > 0):
        raise NonPositiveInput(f"depth inputs must be positive: F={focal}, W={actual_width}, P={pixel_width}")
    return actual_width * focal / pixel_width


@dataclass(frozen=True)
class CameraModel:
    focal: float
    principal_point: tuple | None = None
    mount_translation: tuple = DEFAULT_MOUNT_TRANSLATION
    mount_rotation: tuple = DEFAULT_MOUNT_ROTATION
    image_size: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.focal > 0:
            raise ValueError(f"focal length must be positive, got {self.focal}")
        R = np.asarray(self.mount_rotation, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or np.linalg.det(R) < 0:
            raise ValueError("mount_rotation must be a proper 3x3 rotation matrix")
        object.__setattr__(self, "mount_rotation", tuple(map(tuple, R.tolist())))
        object.__setattr__(self, "mount_translation", tuple(float(v) for v in self.mount_translation))
        if self.principal_point is None and self.image_size is not None:
            w, h = self.image_size
            object.__setattr__(self, "principal_point", ((w - 1) / 2.0, (h - 1) / 2.0))

    def with_image_size(self, width: int, height: int) -> "CameraModel":
        if self.principal_point is not None:
            return self
        return CameraModel(self.focal, None, self.mount_translation, self.mount_rotation, (width, height))

    @property
    def R(self) -> np.ndarray:
        return np.array(self.mount_rotation)

    @property
    def t(self) -> np.ndarray:
        return np.array(self.mount_translation)


def pixel_to_camera(cam: CameraModel, det: Detection | tuple, depth: float) -> np.ndarray:
    """Back-project the detection centroid (or an explicit (u, v)) at range ``depth``."""
    if not depth > 0:
        raise NonPositiveInput(f"depth must be positive, got {depth}")
    if cam.principal_point is None:
        raise ValueError("camera principal point unknown; call with_image_size first")
    u, v = det.centroid if isinstance(det, Detection) else det
    cx, cy = cam.principal_point
    return np.array([(u - cx) * depth / cam.focal, (v - cy) * depth / cam.focal, depth])


def camera_to_world(cam: CameraModel, p) -> np.ndarray:
    return cam.R @ np.asarray(p, dtype=float) + cam.t


def world_to_camera(cam: CameraModel, p) -> np.ndarray:
    return cam.R.T @ (np.asarray(p, dtype=float) - cam.t)


@dataclass(frozen=True)
class Localization:
    detection: Detection
    depth: float
    camera: np.ndarray
    world: np.ndarray

    def to_record(self) -> dict:
        return {
            "bbox": list(self.detection.bbox),
            "centroid": list(self.detection.centroid),
            "pixelWidth": self.detection.pixel_width,
            "depth_m": self.depth,
            "world_m": self.world.tolist(),
        }


def locate(img: np.ndarray, rng: HsvRange, cam: CameraModel, object_width: float,
           blur_radius: int = 1, dilate_iterations: int = 2) -> Localization:
    """Run the full color/depth pipeline on one image."""
    h, w, _ = img.shape
    cam = cam.with_image_size(w, h)
    mask = rgb_to_hsv_mask(box_blur(img, blur_radius), rng)
    det = largest_component_bbox(dilate(mask, dilate_iterations), measure=mask)
    depth = estimate_depth(cam.focal, object_width, det.pixel_width)
    pc = pixel_to_camera(cam, det, depth)
    return Localization(det, depth, pc, camera_to_world(cam, pc))
