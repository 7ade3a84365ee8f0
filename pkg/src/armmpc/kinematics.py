"""Modified-DH forward kinematics and closed-form inverse kinematics.

The arm is a yaw base joint followed by two parallel pitch joints (a planar
2R linkage rotating about the vertical axis).  Homogeneous transforms are
plain 4x4 ``numpy`` arrays and joint vectors are length-3 arrays in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from armmpc.errors import AxisSingular, LimitViolation, Unreachable

# |c3| may exceed 1 by this much from rounding before the target counts as unreachable.
C3_CLAMP_TOL = 1e-10
# |c3| this close to 1 is snapped, so a fully stretched or folded arm gives exact angles.
C3_SNAP = 1e-12
# Slack on joint limits for IK results, absorbing rounding at limit boundaries.
LIMIT_TOL = 1e-9
# Squared horizontal radius below which the target is treated as on the base axis.
AXIS_EPS2 = 1e-18

DEFAULT_A2 = 0.105
DEFAULT_A3 = 0.100
DEFAULT_LIMITS = ((-math.pi, math.pi), (0.0, math.pi), (0.0, math.pi))


@dataclass(frozen=True)
class DhRow:
    """One link transform in modified (Craig) DH form.

    ``a`` and ``alpha`` are the twist/length of the *preceding* link, i.e. the
    values that appear in the transform from frame i-1 to frame i.
    """

    a: float
    alpha: float
    d: float = 0.0
    theta_offset: float = 0.0
    joint_index: Optional[int] = None

    def __post_init__(self):
        if self.a < 0:
            raise ValueError(f"DH length a must be >= 0, got {self.a}")


def table_to_rows(table: Sequence[tuple]) -> list[DhRow]:
    """Convert a link table listing (a_i, alpha_i, d_i, actuated) per link into transforms.

    Link tables list each link's own a/alpha, while transform i uses the values
    of link i-1; the first transform therefore gets a = alpha = 0.
    """
    rows = []
    prev_a, prev_alpha = 0.0, 0.0
    joint = 0
    for a, alpha, d, actuated in table:
        rows.append(DhRow(prev_a, prev_alpha, d, 0.0, joint if actuated else None))
        if actuated:
            joint += 1
        prev_a, prev_alpha = a, alpha
    return rows


def arm_table(a2: float, a3: float) -> list[tuple]:
    """Link table for the 3-DOF arm: (a, alpha, d, actuated) for links 1..4."""
    return [
        (0.0, math.pi / 2, 0.0, True),
        (a2, 0.0, 0.0, True),
        (a3, 0.0, 0.0, True),
        (0.0, 0.0, 0.0, False),
    ]


@dataclass(frozen=True)
class ArmGeometry:
    a2: float = DEFAULT_A2
    a3: float = DEFAULT_A3
    joint_limits: tuple = DEFAULT_LIMITS
    rows: tuple = field(default=None)

    def __post_init__(self):
        if not (self.a2 > 0 and self.a3 > 0):
            raise ValueError(f"link lengths must be positive, got a2={self.a2}, a3={self.a3}")
        limits = tuple((float(lo), float(hi)) for lo, hi in self.joint_limits)
        if len(limits) != 3 or any(lo > hi for lo, hi in limits):
            raise ValueError(f"joint_limits must be three ordered intervals, got {self.joint_limits}")
        object.__setattr__(self, "joint_limits", limits)
        if self.rows is None:
            object.__setattr__(self, "rows", tuple(table_to_rows(arm_table(self.a2, self.a3))))

    @property
    def reach(self) -> tuple[float, float]:
        """Inner and outer radius of the workspace shell."""
        return abs(self.a2 - self.a3), self.a2 + self.a3

    def within_limits(self, q, tol: float = LIMIT_TOL) -> bool:
        return all(lo - tol <= qi <= hi + tol for qi, (lo, hi) in zip(q, self.joint_limits))


def link_transform(row: DhRow, q: float) -> np.ndarray:
    """Transform of frame i relative to frame i-1 for joint value ``q``."""
    th = q + row.theta_offset
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(row.alpha), np.sin(row.alpha)
    return np.array(
        [
            [ct, -st, 0.0, row.a],
            [st * ca, ct * ca, -sa, -sa * row.d],
            [st * sa, ct * sa, ca, ca * row.d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def frame_transforms(geom: ArmGeometry, q) -> list[np.ndarray]:
    """Cumulative base-to-frame transforms for frames 1..4."""
    T = np.eye(4)
    out = []
    for row in geom.rows:
        qi = 0.0 if row.joint_index is None else q[row.joint_index]
        T = T @ link_transform(row, qi)
        out.append(T)
    return out


def forward_kinematics(geom: ArmGeometry, q) -> np.ndarray:
    """End-effector pose (frame 4) in the base frame."""
    return frame_transforms(geom, q)[-1]


def fk_position(geom: ArmGeometry, q) -> np.ndarray:
    """Closed-form tool position, cheaper than chaining the four transforms."""
    q1, q2, q3 = q
    rho = geom.a2 * math.cos(q2) + geom.a3 * math.cos(q2 + q3)
    return np.array(
        [
            math.cos(q1) * rho,
            math.sin(q1) * rho,
            geom.a2 * math.sin(q2) + geom.a3 * math.sin(q2 + q3),
        ]
    )


def inverse_kinematics(geom: ArmGeometry, target, elbow: str = "up", check_limits: bool = True) -> np.ndarray:
    """Joint angles placing the tool at ``target``.

    ``elbow="up"`` picks sin(q3) >= 0, the branch used everywhere by default;
    ``"down"`` returns the mirrored elbow.  Raises :class:`Unreachable`,
    :class:`AxisSingular` or :class:`LimitViolation`.
    """
    if elbow not in ("up", "down"):
        raise ValueError(f"elbow must be 'up' or 'down', got {elbow!r}")
    px, py, pz = (float(v) for v in target)
    if not all(math.isfinite(v) for v in (px, py, pz)):
        raise ValueError(f"target must be finite, got {target}")
    a2, a3 = geom.a2, geom.a3

    c3 = (px * px + py * py + pz * pz - a2 * a2 - a3 * a3) / (2.0 * a2 * a3)
    if abs(c3) - 1.0 > C3_CLAMP_TOL:
        lo, hi = geom.reach
        raise Unreachable(
            f"target ({px:.6g}, {py:.6g}, {pz:.6g}) at radius {math.sqrt(px*px + py*py + pz*pz):.6g} m "
            f"outside workspace [{lo:.6g}, {hi:.6g}] m"
        )
    if abs(c3) > 1.0 - C3_SNAP:
        c3 = math.copysign(1.0, c3)

    r2 = px * px + py * py
    if r2 <= AXIS_EPS2:
        raise AxisSingular(f"target ({px:.6g}, {py:.6g}, {pz:.6g}) lies on the base axis; base angle undefined")

    s3 = math.sqrt(1.0 - c3 * c3)
    if elbow == "down":
        s3 = -s3
    q3 = math.atan2(s3, c3)
    q1 = math.atan2(py, px)
    r = math.sqrt(r2)
    k1 = a2 + a3 * c3
    k2 = a3 * s3
    q2 = math.atan2(pz * k1 - r * k2, r * k1 + pz * k2)

    q = np.array([q1, q2, q3])
    if check_limits and not geom.within_limits(q):
        raise LimitViolation(
            f"solution {np.degrees(q).round(4).tolist()} deg violates joint limits "
            f"{[tuple(round(math.degrees(v), 4) for v in lim) for lim in geom.joint_limits]} deg"
        )
    return q


class Reachability(NamedTuple):
    reachable: bool
    diagnostic: str
    q: Optional[np.ndarray] = None


def is_reachable(geom: ArmGeometry, target) -> Reachability:
    try:
        q = inverse_kinematics(geom, target)
    except (Unreachable, AxisSingular, LimitViolation) as exc:
        return Reachability(False, f"{type(exc).__name__}: {exc}")
    return Reachability(True, "ok", q)
