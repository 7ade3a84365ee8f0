"""Command-line front end.

Exit codes: 0 success, 2 domain failure (no detection, unreachable, never
settled), 3 input error, 4 divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from armmpc.config import ScenarioConfig, load_config, parse_config
from armmpc.errors import ArmMpcError, ConfigError, Diverged, ImageFormatError, NeverSettled, NoDetection
from armmpc.kinematics import forward_kinematics, is_reachable
from armmpc.simcore import SimConfig, run_closed_loop, summarize
from armmpc.vision import locate, read_ppm

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT, EXIT_DIVERGED = 0, 2, 3, 4


def _fmt(v: float, digits: int = 9) -> str:
    r = round(float(v), digits)
    return repr(r + 0.0)  # folds -0.0


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _config(args) -> ScenarioConfig:
    return parse_config({}) if args.config is None else load_config(args.config)


def _simulate(cfg: ScenarioConfig, sim: SimConfig, out: Path) -> tuple[int, dict]:
    try:
        log = run_closed_loop(sim, cfg.geometry, cfg.links, cfg.weights)
    except Diverged as exc:
        print(f"Diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED, {"error": f"Diverged: {exc}"}
    out.write_text(log.to_csv(), encoding="utf-8")
    try:
        summary = summarize(log, sim.settle_tol).to_dict()
        code = EXIT_OK
    except NeverSettled as exc:
        tau = np.abs(np.array(log.tau))
        summary = {"settling_time": None, "error": f"NeverSettled: {exc}", "max_abs_tau": float(tau.max())}
        code = EXIT_DOMAIN
    summary["torque_limit"] = sim.torque_limit
    summary["within_torque_limit"] = summary["max_abs_tau"] <= sim.torque_limit
    return code, summary


def cmd_detect(args) -> int:
    cfg = _config(args)
    cfg.require_vision()
    img = read_ppm(args.image)
    loc = locate(img, cfg.hsv, cfg.camera, cfg.object_width, cfg.blur_radius, cfg.dilate_iterations)
    print(_dump(loc.to_record()))
    return EXIT_OK


def cmd_ik(args) -> int:
    cfg = _config(args)
    target = (args.x, args.y, args.z)
    res = is_reachable(cfg.geometry, target)
    if not res.reachable:
        print(f"unreachable {res.diagnostic}")
        return EXIT_DOMAIN
    print(" ".join(_fmt(math.degrees(v)) for v in res.q))
    print("reachable")
    return EXIT_OK


def cmd_fk(args) -> int:
    cfg = _config(args)
    q = [math.radians(v) for v in (args.q1, args.q2, args.q3)]
    p = forward_kinematics(cfg.geometry, q)[:3, 3]
    print(" ".join(_fmt(v, 12) for v in p))
    return EXIT_OK


def _summary_path(out: Path, kind: str) -> Path:
    return out.with_name(out.stem + f".{kind}.json")


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    code, summary = _simulate(cfg, cfg.sim, out)
    text = _dump(summary)
    _summary_path(out, "summary").write_text(text + "\n", encoding="utf-8")
    print(text)
    return code


def cmd_grasp(args) -> int:
    cfg = _config(args)
    cfg.require_vision()
    img = read_ppm(args.image)
    loc = locate(img, cfg.hsv, cfg.camera, cfg.object_width, cfg.blur_radius, cfg.dilate_iterations)
    res = is_reachable(cfg.geometry, loc.world)
    plan = {
        "detection": loc.to_record(),
        "targetWorld": loc.world.tolist(),
        "reachable": res.reachable,
        "diagnostic": res.diagnostic,
        "jointTarget": None if res.q is None else res.q.tolist(),
        "jointTarget_deg": None if res.q is None else [math.degrees(v) for v in res.q],
    }
    out = Path(args.out)
    code = EXIT_DOMAIN
    if res.reachable:
        sim = SimConfig(
            cfg.sim.q0, res.q, cfg.sim.T, cfg.sim.substeps, cfg.sim.duration,
            cfg.sim.torque_limit, cfg.sim.settle_tol, cfg.sim.saturate, cfg.sim.g0,
        )
        code, plan["simulation"] = _simulate(cfg, sim, out)
    text = _dump(plan)
    _summary_path(out, "plan").write_text(text + "\n", encoding="utf-8")
    print(text)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="armmpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="scenario JSON (defaults used when omitted)")
        p.set_defaults(func=fn)
        return p

    p = add("detect", cmd_detect, "locate the colored target in a PPM image")
    p.add_argument("--image", type=Path, required=True)

    p = add("ik", cmd_ik, "joint angles (deg) reaching a point (m)")
    for axis in "xyz":
        p.add_argument(f"--{axis}", type=float, required=True)

    p = add("fk", cmd_fk, "tool position (m) for joint angles (deg)")
    for j in ("q1", "q2", "q3"):
        p.add_argument(f"--{j}", type=float, required=True)

    p = add("simulate", cmd_simulate, "closed-loop MPC regulation run")
    p.add_argument("--out", type=Path, required=True, help="trajectory CSV path")

    p = add("grasp", cmd_grasp, "detect -> IK -> closed-loop run to the detected target")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="trajectory CSV path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ImageFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoDetection as exc:
        print(f"NoDetection: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ArmMpcError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
