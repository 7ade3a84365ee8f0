"""Scenario configuration: one JSON document, degrees for angles, meters for lengths.

Every section is optional; missing sections fall back to the library defaults.
Errors name the offending field and are raised as :class:`ConfigError`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from armmpc.dynamics import LinkInertia, default_links
from armmpc.errors import ConfigError, NotPositiveDefinite
from armmpc.kinematics import DEFAULT_A2, DEFAULT_A3, ArmGeometry
from armmpc.linmpc import MpcWeights
from armmpc.simcore import SimConfig
from armmpc.vision import (
    DEFAULT_MOUNT_ROTATION,
    DEFAULT_MOUNT_TRANSLATION,
    CameraModel,
    HsvRange,
    calibrate_focal,
)


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: ArmGeometry
    links: tuple
    weights: MpcWeights
    sim: SimConfig
    camera: CameraModel | None = None
    hsv: HsvRange | None = None
    object_width: float | None = None
    blur_radius: int = 1
    dilate_iterations: int = 2

    def require_vision(self) -> None:
        missing = [n for n in ("camera", "hsv", "object_width") if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"config: vision commands need {', '.join(missing)}")


def _matrix(value, n: int, field: str) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    if a.shape == (n,):
        return np.diag(a)
    if a.shape == (n, n):
        return a
    raise ConfigError(f"{field}: expected {n} diagonal entries or an {n}x{n} matrix, got shape {a.shape}")


def _vec(value, n: int, field: str) -> np.ndarray:
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{field}: expected {n} numbers") from None
    if a.shape != (n,) or not np.all(np.isfinite(a)):
        raise ConfigError(f"{field}: expected {n} finite numbers, got {value!r}")
    return a


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected an object")
    return sec


def _build(field: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except NotPositiveDefinite as exc:
        raise ConfigError(f"{field}: {exc}") from None
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{field}: {exc}") from None


def parse_config(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")

    g = _section(doc, "geometry")
    limits = g.get("joint_limits_deg")
    geom_kw = {"a2": g.get("a2", DEFAULT_A2), "a3": g.get("a3", DEFAULT_A3)}
    if limits is not None:
        geom_kw["joint_limits"] = tuple(
            tuple(math.radians(v) for v in _vec(lim, 2, f"geometry.joint_limits_deg[{i}]"))
            for i, lim in enumerate(limits)
        )
    geom = _build("geometry", ArmGeometry, **geom_kw)

    links_doc = doc.get("links")
    if links_doc is None:
        links = default_links(geom)
    else:
        if not isinstance(links_doc, list) or len(links_doc) != 3:
            raise ConfigError("links: expected a list of three link objects")
        links = tuple(
            _build(
                f"links[{i}]",
                LinkInertia,
                lk["mass"],
                tuple(_vec(lk.get("centroid", (0, 0, 0)), 3, f"links[{i}].centroid")),
                tuple(map(tuple, _matrix(lk.get("inertia", [0, 0, 0]), 3, f"links[{i}].inertia"))),
            )
            for i, lk in enumerate(links_doc)
        )

    w = _section(doc, "weights")
    w_kw = {}
    if "Q" in w:
        w_kw["Q"] = _matrix(w["Q"], 6, "weights.Q")
    if "R" in w:
        w_kw["R"] = _matrix(w["R"], 3, "weights.R")
    if "P" in w:
        w_kw["P"] = _matrix(w["P"], 6, "weights.P")
    if "N" in w:
        w_kw["N"] = w["N"]
    weights = _build("weights", MpcWeights, **w_kw)

    s = _section(doc, "sim")
    sim_kw = {
        "q0": np.radians(_vec(s.get("q0_deg", (0, 0, 0)), 3, "sim.q0_deg")),
        "qd": np.radians(_vec(s.get("qd_deg", (0, 0, 0)), 3, "sim.qd_deg")),
    }
    for key in ("T", "substeps", "duration", "torque_limit", "settle_tol", "saturate"):
        if key in s:
            sim_kw[key] = s[key]
    sim = _build("sim", SimConfig, **sim_kw)

    hsv = None
    if "hsv" in doc:
        hsv = _build("hsv", HsvRange, **_section(doc, "hsv"))

    camera = None
    if "camera" in doc or "calibration" in doc:
        cal = _section(doc, "calibration")
        has_f = "F" in cal
        has_wdp = all(k in cal for k in ("W", "D", "P"))
        if has_f == has_wdp:
            raise ConfigError("calibration: supply exactly one of F or (W, D, P)")
        focal = cal["F"] if has_f else _build("calibration", calibrate_focal, cal["W"], cal["D"], cal["P"])
        c = _section(doc, "camera")
        pp = c.get("principal_point")
        camera = _build(
            "camera",
            CameraModel,
            focal,
            None if pp is None else tuple(_vec(pp, 2, "camera.principal_point")),
            tuple(_vec(c.get("mount_translation", DEFAULT_MOUNT_TRANSLATION), 3, "camera.mount_translation")),
            tuple(map(tuple, _matrix(c.get("mount_rotation", DEFAULT_MOUNT_ROTATION), 3, "camera.mount_rotation"))),
        )

    object_width = doc.get("object_width")
    if object_width is not None and not (isinstance(object_width, (int, float)) and object_width > 0):
        raise ConfigError(f"object_width: must be a positive number, got {object_width!r}")
    pipe = _section(doc, "pipeline")
    blur, iters = pipe.get("blur_radius", 1), pipe.get("dilate_iterations", 2)
    for name, val in (("pipeline.blur_radius", blur), ("pipeline.dilate_iterations", iters)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 0:
            raise ConfigError(f"{name}: must be a non-negative integer, got {val!r}")
    return ScenarioConfig(geom, tuple(links), weights, sim, camera, hsv, object_width, blur, iters)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(doc)
