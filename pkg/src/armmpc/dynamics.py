"""Rigid-body dynamics of the 3-DOF arm: M(q), C(q, qdot), g(q).

Link conventions
----------------
Link 1 is the base turret (frame 1), link 2 the upper arm (frame 2) and
link 3 the forearm (frame 3).  A link's centroid is given in its own frame's
axes but measured from the link's *distal* end, so the centroid sits at
``(a_i + x_c, y_c, z_c)`` in frame i (a_1 = 0, a_2, a_3).  Inertia tensors are
about the centroid, expressed in the link frame.  Gravity acts along -z of
the base frame.

The inertia matrix is assembled from link Jacobians written in the rotating
arm plane; its partial derivatives come from differentiating those Jacobians
in closed form, so the Christoffel-symbol Coriolis matrix is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from armmpc.errors import IllConditioned
from armmpc.kinematics import ArmGeometry

G0 = 9.8
COND_LIMIT = 1e12


@dataclass(frozen=True)
class LinkInertia:
    mass: float
    centroid: tuple = (0.0, 0.0, 0.0)
    inertia: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def __post_init__(self):
        c = np.asarray(self.centroid, dtype=float)
        I = np.asarray(self.inertia, dtype=float)
        if not self.mass > 0:
            raise ValueError(f"link mass must be positive, got {self.mass}")
        if c.shape != (3,) or I.shape != (3, 3):
            raise ValueError("centroid must be a 3-vector and inertia a 3x3 matrix")
        if not np.allclose(I, I.T, rtol=0.0, atol=1e-12):
            raise ValueError("inertia tensor must be symmetric")
        ev = np.linalg.eigvalsh(I)
        scale = max(1.0, float(np.abs(ev).max()))
        if ev.min() < -1e-12 * scale:
            raise ValueError(f"inertia tensor must be positive semidefinite, eigenvalues {ev}")
        i1, i2, i3 = ev
        if i1 + i2 < i3 - 1e-12 * scale:
            raise ValueError(f"principal moments {ev} violate the triangle inequality")
        object.__setattr__(self, "centroid", tuple(c.tolist()))
        object.__setattr__(self, "inertia", tuple(map(tuple, I.tolist())))


def rod_link(mass: float, length: float) -> LinkInertia:
    """Slender rod along the link x axis with its centroid at mid-length."""
    It = mass * length * length / 12.0
    return LinkInertia(mass, (-length / 2.0, 0.0, 0.0), ((0.0, 0.0, 0.0), (0.0, It, 0.0), (0.0, 0.0, It)))


def turret_link(mass: float, radius: float, height: float) -> LinkInertia:
    """Solid cylinder spinning about the link z axis, centred on the joint."""
    Ixx = mass * (3.0 * radius * radius + height * height) / 12.0
    Izz = mass * radius * radius / 2.0
    return LinkInertia(mass, (0.0, 0.0, 0.0), ((Ixx, 0.0, 0.0), (0.0, Ixx, 0.0), (0.0, 0.0, Izz)))


def default_links(geom: ArmGeometry) -> tuple[LinkInertia, LinkInertia, LinkInertia]:
    # link 1 has zero DH length, so a rod model would leave M singular with the arm upright
    return (turret_link(0.08, 0.025, 0.03), rod_link(0.08, geom.a2), rod_link(0.06, geom.a3))


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(3)
        qd = np.asarray(self.qdot, dtype=float).reshape(3)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qd)

    @classmethod
    def at_rest(cls, q) -> "JointState":
        return cls(q, np.zeros(3))


@dataclass(frozen=True)
class DynamicsTerms:
    M: np.ndarray
    C: np.ndarray
    g: np.ndarray


def _planar_terms(geom: ArmGeometry, links, q2: float, q3: float):
    """Per-link Jacobians in the rotating (radial, vertical, normal) basis, plus partials.

    The arm plane rotates with q1, so M does not depend on q1.  Linear velocity
    of a centroid at radius rho, height h and out-of-plane offset w is
    ``(w*q1d + rho_dot) e_r + h_dot e_z - rho*q1d e_n``; angular velocity in
    link-frame axes is ``(q1d*sin(phi), q1d*cos(phi), phi_dot)`` with phi the
    link's pitch angle.
    """
    _, l2, l3 = links
    X2, Y2, Z2 = geom.a2 + l2.centroid[0], l2.centroid[1], l2.centroid[2]
    X3, Y3, Z3 = geom.a3 + l3.centroid[0], l3.centroid[1], l3.centroid[2]
    c2, s2 = math.cos(q2), math.sin(q2)
    c23, s23 = math.cos(q2 + q3), math.sin(q2 + q3)

    rho2, h2 = X2 * c2 - Y2 * s2, X2 * s2 + Y2 * c2
    rr, hr = X3 * c23 - Y3 * s23, X3 * s23 + Y3 * c23
    rho3, h3 = geom.a2 * c2 + rr, geom.a2 * s2 + hr

    Jv2 = np.array([[Z2, -h2, 0.0], [0.0, rho2, 0.0], [-rho2, 0.0, 0.0]])
    dJv2 = (np.array([[0.0, -rho2, 0.0], [0.0, -h2, 0.0], [h2, 0.0, 0.0]]), np.zeros((3, 3)))
    Jv3 = np.array([[Z3, -h3, -hr], [0.0, rho3, rr], [-rho3, 0.0, 0.0]])
    dJv3 = (
        np.array([[0.0, -rho3, -rr], [0.0, -h3, -hr], [h3, 0.0, 0.0]]),
        np.array([[0.0, -rr, -rr], [0.0, -hr, -hr], [hr, 0.0, 0.0]]),
    )
    Jw2 = np.array([[s2, 0.0, 0.0], [c2, 0.0, 0.0], [0.0, 1.0, 0.0]])
    dJw2 = np.array([[c2, 0.0, 0.0], [-s2, 0.0, 0.0], [0.0, 0.0, 0.0]])
    Jw3 = np.array([[s23, 0.0, 0.0], [c23, 0.0, 0.0], [0.0, 1.0, 1.0]])
    dJw3 = np.array([[c23, 0.0, 0.0], [-s23, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return (
        (l2.mass, np.asarray(l2.inertia), Jv2, dJv2, Jw2, (dJw2, np.zeros((3, 3)))),
        (l3.mass, np.asarray(l3.inertia), Jv3, dJv3, Jw3, (dJw3, dJw3)),
    )


def _base_yaw_inertia(links) -> float:
    l1 = links[0]
    x, y, _ = l1.centroid
    return l1.mass * (x * x + y * y) + l1.inertia[2][2]


def mass_matrix_with_partials(geom: ArmGeometry, links, q) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(M, dM)`` with ``dM[k] = dM/dq_k`` (``dM[0]`` is identically zero)."""
    _, q2, q3 = (float(v) for v in q)
    M = np.zeros((3, 3))
    dM = np.zeros((3, 3, 3))
    M[0, 0] = _base_yaw_inertia(links)
    for m, I, Jv, dJv, Jw, dJw in _planar_terms(geom, links, q2, q3):
        IJw = I @ Jw
        M += m * (Jv.T @ Jv) + Jw.T @ IJw
        for k in range(2):
            a = m * (dJv[k].T @ Jv) + dJw[k].T @ IJw
            dM[k + 1] += a + a.T
    return 0.5 * (M + M.T), dM


def mass_matrix(geom: ArmGeometry, links, q) -> np.ndarray:
    """Joint-space inertia matrix; kinetic energy is ``0.5 * qdot @ M @ qdot``."""
    return mass_matrix_with_partials(geom, links, q)[0]


def christoffel_coriolis(dM: np.ndarray, qdot) -> np.ndarray:
    """C_ij = sum_k 0.5 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) qdot_k."""
    qdot = np.asarray(qdot, dtype=float)
    t1 = np.einsum("kij,k->ij", dM, qdot)
    t2 = np.einsum("jik,k->ij", dM, qdot)
    t3 = np.einsum("ijk,k->ij", dM, qdot)
    return 0.5 * (t1 + t2 - t3)


def coriolis_matrix(geom: ArmGeometry, links, state: JointState) -> np.ndarray:
    _, dM = mass_matrix_with_partials(geom, links, state.q)
    return christoffel_coriolis(dM, state.qdot)


def gravity_vector(geom: ArmGeometry, links, q, g0: float = G0) -> np.ndarray:
    """Gravity torque vector in closed form."""
    _, q2, q3 = (float(v) for v in q)
    _, l2, l3 = links
    x2, y2 = l2.centroid[0], l2.centroid[1]
    x3, y3 = l3.centroid[0], l3.centroid[1]
    c2, s2 = math.cos(q2), math.sin(q2)
    c23, s23 = math.cos(q2 + q3), math.sin(q2 + q3)
    g3 = l3.mass * g0 * ((geom.a3 + x3) * c23 - y3 * s23)
    g2 = g0 * (
        l3.mass * (geom.a2 * c2 + (geom.a3 + x3) * c23 - y3 * s23)
        + l2.mass * ((geom.a2 + x2) * c2 - y2 * s2)
    )
    return np.array([0.0, g2, g3])


def potential_energy(geom: ArmGeometry, links, q, g0: float = G0) -> float:
    """Gravitational potential relative to the base plane (link 1 contributes a constant)."""
    _, q2, q3 = (float(v) for v in q)
    _, l2, l3 = links
    h1 = links[0].centroid[2]
    h2 = (geom.a2 + l2.centroid[0]) * math.sin(q2) + l2.centroid[1] * math.cos(q2)
    h3 = (
        geom.a2 * math.sin(q2)
        + (geom.a3 + l3.centroid[0]) * math.sin(q2 + q3)
        + l3.centroid[1] * math.cos(q2 + q3)
    )
    return g0 * (links[0].mass * h1 + l2.mass * h2 + l3.mass * h3)


def kinetic_energy(geom: ArmGeometry, links, state: JointState) -> float:
    M = mass_matrix(geom, links, state.q)
    return 0.5 * float(state.qdot @ M @ state.qdot)


def dynamics_terms(geom: ArmGeometry, links, state: JointState, g0: float = G0) -> DynamicsTerms:
    M, dM = mass_matrix_with_partials(geom, links, state.q)
    C = christoffel_coriolis(dM, state.qdot)
    return DynamicsTerms(M, C, gravity_vector(geom, links, state.q, g0))


def _check_conditioning(M: np.ndarray) -> None:
    ev = np.linalg.eigvalsh(M)
    if ev[0] <= 0 or ev[-1] > COND_LIMIT * ev[0]:
        raise IllConditioned(f"inertia matrix eigenvalues {ev} give condition number above {COND_LIMIT:g}")


def input_to_torque(terms: DynamicsTerms, u) -> np.ndarray:
    """Torque realizing the commanded joint acceleration offset ``u``: tau = M u + g."""
    return terms.M @ np.asarray(u, dtype=float) + terms.g


def acceleration(terms: DynamicsTerms, state: JointState, tau) -> np.ndarray:
    """Solve M qddot = tau - C qdot - g."""
    _check_conditioning(terms.M)
    rhs = np.asarray(tau, dtype=float) - terms.C @ state.qdot - terms.g
    return np.linalg.solve(terms.M, rhs)


def error_state_matrices(terms: DynamicsTerms) -> tuple[np.ndarray, np.ndarray]:
    """Continuous model xdot = A x + B u for x = [q_d - q, qdot] with frozen M, C."""
    _check_conditioning(terms.M)
    A = np.zeros((6, 6))
    A[:3, 3:] = -np.eye(3)
    A[3:, 3:] = -np.linalg.solve(terms.M, terms.C)
    B = np.zeros((6, 3))
    B[3:, :] = np.eye(3)
    return A, B
