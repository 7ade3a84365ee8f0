"""Nonlinear plant integration and closed-loop MPC simulation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from armmpc.dynamics import G0, JointState, acceleration, dynamics_terms
from armmpc.errors import Diverged, NeverSettled
from armmpc.linmpc import MpcWeights, receding_horizon_step

DIVERGENCE_QDOT = 100.0
# 0.2 kg*m servo stall torque
DEFAULT_TORQUE_LIMIT = 0.2 * G0

CSV_HEADER = (
    "t", "e1", "e2", "e3", "q1", "q2", "q3", "qd1", "qd2", "qd3",
    "u1", "u2", "u3", "tau1", "tau2", "tau3", "cost",
)


@dataclass(frozen=True)
class SimConfig:
    q0: np.ndarray
    qd: np.ndarray
    T: float = 0.05
    substeps: int = 10
    duration: float = 12.0
    torque_limit: float = DEFAULT_TORQUE_LIMIT
    settle_tol: float = 0.01
    saturate: bool = False
    g0: float = G0

    def __post_init__(self):
        object.__setattr__(self, "q0", np.asarray(self.q0, dtype=float).reshape(3))
        object.__setattr__(self, "qd", np.asarray(self.qd, dtype=float).reshape(3))
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not self.torque_limit > 0:
            raise ValueError(f"torque_limit must be positive, got {self.torque_limit}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be an integer >= 1, got {self.substeps}")

    @property
    def n_ticks(self) -> int:
        return int(math.floor(self.duration / self.T + 1e-9))


@dataclass
class TrajectoryLog:
    T: float
    t: list = field(default_factory=list)
    e: list = field(default_factory=list)
    q: list = field(default_factory=list)
    qdot: list = field(default_factory=list)
    u: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    stage_cost: list = field(default_factory=list)

    def append(self, t, e, q, qdot, u, tau, cost):
        self.t.append(float(t))
        self.e.append(np.array(e, dtype=float))
        self.q.append(np.array(q, dtype=float))
        self.qdot.append(np.array(qdot, dtype=float))
        self.u.append(np.array(u, dtype=float))
        self.tau.append(np.array(tau, dtype=float))
        self.stage_cost.append(float(cost))

    def __len__(self):
        return len(self.t)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "t": np.array(self.t),
            "e": np.array(self.e).reshape(-1, 3),
            "q": np.array(self.q).reshape(-1, 3),
            "qdot": np.array(self.qdot).reshape(-1, 3),
            "u": np.array(self.u).reshape(-1, 3),
            "tau": np.array(self.tau).reshape(-1, 3),
            "cost": np.array(self.stage_cost),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(len(self)):
            row = [self.t[i], *self.e[i], *self.q[i], *self.qdot[i], *self.u[i], *self.tau[i], self.stage_cost[i]]
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _qddot(geom, links, q, qdot, tau, g0):
    state = JointState(q, qdot)
    return acceleration(dynamics_terms(geom, links, state, g0), state, tau)


def integrate_plant(geom, links, state: JointState, tau, dt: float, g0: float = G0) -> JointState:
    """One classical RK4 step of the rigid-body dynamics under constant torque."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    tau = np.asarray(tau, dtype=float)
    q, v = state.q, state.qdot
    a1 = _qddot(geom, links, q, v, tau, g0)
    q2, v2 = q + 0.5 * dt * v, v + 0.5 * dt * a1
    a2 = _qddot(geom, links, q2, v2, tau, g0)
    q3, v3 = q + 0.5 * dt * v2, v + 0.5 * dt * a2
    a3 = _qddot(geom, links, q3, v3, tau, g0)
    q4, v4 = q + dt * v3, v + dt * a3
    a4 = _qddot(geom, links, q4, v4, tau, g0)
    q_new = q + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return JointState(q_new, v_new)


def run_closed_loop(cfg: SimConfig, geom, links, w: MpcWeights) -> TrajectoryLog:
    log = TrajectoryLog(cfg.T)
    state = JointState.at_rest(cfg.q0)
    dt = cfg.T / cfg.substeps
    for k in range(cfg.n_ticks):
        step = receding_horizon_step(state, cfg.qd, geom, links, w, cfg.T, g0=cfg.g0)
        tau = step.tau
        if cfg.saturate:
            tau = np.clip(tau, -cfg.torque_limit, cfg.torque_limit)
        x = step.x
        cost = float(x @ w.Q @ x + step.u @ w.R @ step.u)
        log.append(k * cfg.T, x[:3], state.q, state.qdot, step.u, tau, cost)
        for j in range(cfg.substeps):
            state = integrate_plant(geom, links, state, tau, dt, cfg.g0)
            # checked every substep so a blow-up never reaches the next dynamics evaluation
            if not np.all(np.isfinite(state.qdot)) or np.abs(state.qdot).max() > DIVERGENCE_QDOT:
                raise Diverged(
                    f"joint speed {state.qdot} rad/s exceeded {DIVERGENCE_QDOT} rad/s at t={k * cfg.T + (j + 1) * dt:.3f} s"
                )
    return log


@dataclass(frozen=True)
class Summary:
    settling_time: float
    peak_tau: tuple
    terminal_tau: tuple
    total_cost: float
    max_abs_tau: float

    def to_dict(self) -> dict:
        return {
            "settling_time": self.settling_time,
            "peak_tau": list(self.peak_tau),
            "terminal_tau": list(self.terminal_tau),
            "total_cost": self.total_cost,
            "max_abs_tau": self.max_abs_tau,
        }


def settling_time(log: TrajectoryLog, tol: float = 0.01) -> float:
    """First logged time after which every joint error stays below ``tol``."""
    if not len(log):
        raise ValueError("empty trajectory log")
    inside = np.all(np.abs(np.array(log.e)) < tol, axis=1)
    if not inside[-1]:
        raise NeverSettled(f"joint error {log.e[-1]} still outside {tol} rad at t={log.t[-1]:.3f} s")
    outside = np.flatnonzero(~inside)
    first = 0 if outside.size == 0 else outside[-1] + 1
    return log.t[first]


def summarize(log: TrajectoryLog, tol: float = 0.01) -> Summary:
    ts = settling_time(log, tol)
    tau = np.abs(np.array(log.tau))
    return Summary(
        settling_time=ts,
        peak_tau=tuple(tau.max(axis=0).tolist()),
        terminal_tau=tuple(log.tau[-1].tolist()),
        total_cost=float(sum(log.stage_cost) * log.T),
        max_abs_tau=float(tau.max()),
    )
