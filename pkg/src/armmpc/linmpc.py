"""Condensed linear MPC: Euler discretization, prediction stacking, analytic QP solve."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from armmpc.dynamics import (
    JointState,
    dynamics_terms,
    error_state_matrices,
    input_to_torque,
)
from armmpc.errors import NotPositiveDefinite


@dataclass(frozen=True)
class DiscreteModel:
    Ad: np.ndarray
    Bd: np.ndarray
    T: float


def _check_psd(name: str, S: np.ndarray, strict: bool) -> None:
    if not np.allclose(S, S.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if strict:
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(f"NotPositiveDefinite: {name} must be positive definite") from None
    else:
        ev = np.linalg.eigvalsh(S)
        if ev.min() < -1e-12 * max(1.0, abs(ev).max()):
            raise ValueError(f"{name} must be positive semidefinite, eigenvalues {ev}")


@dataclass(frozen=True)
class MpcWeights:
    Q: np.ndarray = field(default_factory=lambda: np.diag([100.0, 100.0, 100.0, 1.0, 1.0, 1.0]))
    R: np.ndarray = field(default_factory=lambda: 0.1 * np.eye(3))
    P: np.ndarray = None
    N: int = 20

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        P = Q.copy() if self.P is None else np.atleast_2d(np.asarray(self.P, dtype=float))
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"horizon N must be an integer >= 1, got {self.N}")
        _check_psd("Q", Q, strict=False)
        _check_psd("P", P, strict=False)
        _check_psd("R", R, strict=True)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "N", int(self.N))


@dataclass(frozen=True)
class CondensedQp:
    Cstack: np.ndarray
    Fstack: np.ndarray
    Y: np.ndarray
    Mcoup: np.ndarray
    H: np.ndarray

    def cost(self, x, U) -> float:
        """0.5 x'Yx + x'Mcoup U + 0.5 U'HU, equal to the stage-sum cost."""
        x = np.asarray(x, dtype=float)
        U = np.asarray(U, dtype=float)
        return float(0.5 * x @ self.Y @ x + x @ self.Mcoup @ U + 0.5 * U @ self.H @ U)


def discretize(A, B, T: float) -> DiscreteModel:
    """Forward-Euler: Ad = I + T A, Bd = T B."""
    if not T > 0:
        raise ValueError(f"sampling period must be positive, got {T}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return DiscreteModel(np.eye(A.shape[0]) + T * A, T * B, float(T))


def build_prediction(model: DiscreteModel, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack x_k..x_{k+N} as Cstack @ x_k + Fstack @ U_k."""
    if N < 1:
        raise ValueError(f"horizon must be >= 1, got {N}")
    Ad, Bd = model.Ad, model.Bd
    nx, nu = Bd.shape
    powers = np.empty((N + 1, nx, nx))
    powers[0] = np.eye(nx)
    for i in range(N):
        powers[i + 1] = Ad @ powers[i]
    # blocks[m] = Ad^(m-1) Bd for m >= 1; blocks[0] is the zero block above the diagonal
    blocks = np.zeros((N + 1, nx, nu))
    blocks[1:] = powers[:N] @ Bd
    lag = np.arange(N + 1)[:, None] - np.arange(N)[None, :]
    Fstack = blocks[np.clip(lag, 0, N)].transpose(0, 2, 1, 3).reshape((N + 1) * nx, N * nu)
    return powers.reshape((N + 1) * nx, nx), Fstack


def condense(pred: tuple[np.ndarray, np.ndarray], w: MpcWeights) -> CondensedQp:
    """Y = 2 C'QbC, Mcoup = 2 C'QbF, H = 2 (F'QbF + Rb) with Qb = blkdiag(Q, .., Q, P)."""
    Cstack, Fstack = pred
    nx = Cstack.shape[1]
    if Cstack.shape[0] != (w.N + 1) * nx or w.Q.shape != (nx, nx):
        raise ValueError("prediction matrices and weights disagree on horizon or state size")
    # apply the block-diagonal state weight without forming it
    weights = np.concatenate([np.broadcast_to(w.Q, (w.N, nx, nx)), w.P[None]], axis=0)
    QC = np.einsum("bij,bjk->bik", weights, Cstack.reshape(w.N + 1, nx, nx)).reshape(Cstack.shape)
    QF = np.einsum("bij,bjk->bik", weights, Fstack.reshape(w.N + 1, nx, -1)).reshape(Fstack.shape)
    Y = 2.0 * Cstack.T @ QC
    Mcoup = 2.0 * Cstack.T @ QF
    H = 2.0 * (Fstack.T @ QF + np.kron(np.eye(w.N), w.R))
    return CondensedQp(Cstack, Fstack, 0.5 * (Y + Y.T), Mcoup, 0.5 * (H + H.T))


def stage_sum_cost(pred: tuple[np.ndarray, np.ndarray], w: MpcWeights, x, U) -> float:
    """Direct evaluation of sum_s (x'Qx + u'Ru) + x_N' P x_N along the stacked prediction."""
    Cstack, Fstack = pred
    nx = Cstack.shape[1]
    nu = w.R.shape[0]
    X = Cstack @ np.asarray(x, dtype=float) + Fstack @ np.asarray(U, dtype=float)
    J = 0.0
    for s in range(w.N):
        xs = X[s * nx:(s + 1) * nx]
        us = np.asarray(U, dtype=float)[s * nu:(s + 1) * nu]
        J += xs @ w.Q @ xs + us @ w.R @ us
    xN = X[w.N * nx:]
    return float(J + xN @ w.P @ xN)


def _factor(H: np.ndarray):
    try:
        return cho_factor(H, lower=True, check_finite=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("NotPositiveDefinite: condensed Hessian H failed Cholesky factorization") from None


def solve_horizon(qp: CondensedQp, x) -> np.ndarray:
    """Unconstrained minimizer U = -H^{-1} Mcoup' x."""
    return _solve(_factor(qp.H), qp, x)


def _solve(factor, qp: CondensedQp, x) -> np.ndarray:
    return -cho_solve(factor, qp.Mcoup.T @ np.asarray(x, dtype=float))


def _condition_estimate(factor) -> float:
    """Cheap lower bound on cond(H) from the Cholesky diagonal."""
    d = np.abs(np.diag(factor[0]))
    return float((d.max() / d.min()) ** 2)


class StepResult(NamedTuple):
    u: np.ndarray
    tau: np.ndarray
    predicted_cost: float
    h_condition: float
    x: np.ndarray


def receding_horizon_step(state: JointState, qd, geom, links, w: MpcWeights, T: float,
                          g0: float | None = None) -> StepResult:
    """One MPC tick: relinearize at ``state``, solve the horizon QP, apply the first input."""
    kw = {} if g0 is None else {"g0": g0}
    terms = dynamics_terms(geom, links, state, **kw)
    A, B = error_state_matrices(terms)
    model = discretize(A, B, T)
    qp = condense(build_prediction(model, w.N), w)
    x = np.concatenate([np.asarray(qd, dtype=float) - state.q, state.qdot])
    factor = _factor(qp.H)
    U = _solve(factor, qp, x)
    u = U[:B.shape[1]]
    tau = input_to_torque(terms, u)
    return StepResult(u, tau, qp.cost(x, U), _condition_estimate(factor), x)
