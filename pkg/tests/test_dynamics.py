import math

import numpy as np
import pytest

from armmpc.dynamics import (
    G0,
    DynamicsTerms,
    JointState,
    LinkInertia,
    acceleration,
    coriolis_matrix,
    default_links,
    dynamics_terms,
    error_state_matrices,
    gravity_vector,
    input_to_torque,
    kinetic_energy,
    mass_matrix,
    potential_energy,
    rod_link,
)
from armmpc.errors import IllConditioned
from armmpc.kinematics import arm_table, frame_transforms


def random_links(rng):
    """Links with arbitrary centroid offsets and full (rotated) inertia tensors."""
    out = []
    for _ in range(3):
        ev = np.sort(rng.uniform(1e-5, 1e-4, 3))
        ev[2] = min(ev[2], ev[0] + ev[1])
        Rq, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        out.append(LinkInertia(rng.uniform(0.02, 0.2), tuple(rng.uniform(-0.03, 0.03, 3)), Rq @ np.diag(ev) @ Rq.T))
    return tuple(out)


def point_links(m1, m2, m3):
    zero = np.zeros((3, 3))
    return tuple(LinkInertia(m, (0.0, 0.0, 0.0), zero) for m in (m1, m2, m3))


# ---------------------------------------------------------------- oracles

def _vee(S):
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def link_poses(geom, links, q):
    """Centroid positions and orientations per link from the chained frame transforms."""
    frames = frame_transforms(geom, q)
    lengths = [row[0] for row in arm_table(geom.a2, geom.a3)]
    out = []
    for i, lk in enumerate(links):
        T = frames[i]
        c = np.array([lengths[i] + lk.centroid[0], lk.centroid[1], lk.centroid[2], 1.0])
        out.append(((T @ c)[:3], T[:3, :3]))
    return out


def numeric_kinetic_energy(geom, links, q, qdot, h=1e-6):
    """T from finite-difference link velocities; nothing shared with the mass-matrix code."""
    q = np.asarray(q, float)
    qdot = np.asarray(qdot, float)
    plus = link_poses(geom, links, q + h * qdot)
    minus = link_poses(geom, links, q - h * qdot)
    here = link_poses(geom, links, q)
    T = 0.0
    for lk, (pp, Rp), (pm, Rm), (_, R) in zip(links, plus, minus, here):
        v = (pp - pm) / (2 * h)
        w = _vee((Rp - Rm) / (2 * h) @ R.T)
        I_world = R @ np.asarray(lk.inertia) @ R.T
        T += 0.5 * lk.mass * v @ v + 0.5 * w @ I_world @ w
    return T


def numeric_mass_matrix(geom, links, q, s=1.0):
    """Hessian of the numeric kinetic energy in qdot (exact for a quadratic form up to rounding)."""
    M = np.empty((3, 3))
    E = np.eye(3) * s
    T = lambda v: numeric_kinetic_energy(geom, links, q, v)
    for i in range(3):
        for j in range(3):
            M[i, j] = (T(E[i] + E[j]) - T(E[i] - E[j]) - T(E[j] - E[i]) + T(-E[i] - E[j])) / (4 * s * s)
    return M


def numeric_potential(geom, links, q, g0=G0):
    return g0 * sum(lk.mass * p[2] for lk, (p, _) in zip(links, link_poses(geom, links, q)))


def point_mass_oracle(a2, a3, m2, m3, q):
    """Yaw + planar 2R with masses at the elbow and at the tip."""
    _, q2, q3 = q
    c2, c3, c23 = math.cos(q2), math.cos(q3), math.cos(q2 + q3)
    rho_e = a2 * c2
    rho_t = a2 * c2 + a3 * c23
    M = np.zeros((3, 3))
    M[0, 0] = m2 * rho_e**2 + m3 * rho_t**2
    M[1, 1] = m2 * a2**2 + m3 * (a2**2 + a3**2 + 2 * a2 * a3 * c3)
    M[1, 2] = M[2, 1] = m3 * (a3**2 + a2 * a3 * c3)
    M[2, 2] = m3 * a3**2
    return M


def random_q(rng):
    return rng.uniform([-math.pi, 0, 0], [math.pi, math.pi, math.pi])


# ---------------------------------------------------------------- link data

def test_link_validation():
    with pytest.raises(ValueError):
        LinkInertia(0.0)
    with pytest.raises(ValueError):
        LinkInertia(1.0, inertia=[[1, 0.1, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        LinkInertia(1.0, inertia=np.diag([-1.0, 1, 1]))
    with pytest.raises(ValueError):
        LinkInertia(1.0, inertia=np.diag([1.0, 1.0, 3.0]))


def test_rod_link():
    lk = rod_link(0.08, 0.105)
    assert lk.centroid == (-0.0525, 0.0, 0.0)
    assert lk.inertia[1][1] == pytest.approx(0.08 * 0.105**2 / 12)


# ---------------------------------------------------------------- mass matrix

class TestMassMatrix:
    def test_point_masses_match_closed_form(self, geom, rng):
        links = point_links(0.05, 0.08, 0.06)
        for _ in range(200):
            q = random_q(rng)
            np.testing.assert_allclose(mass_matrix(geom, links, q), point_mass_oracle(geom.a2, geom.a3, 0.08, 0.06, q),
                                       atol=1e-15, rtol=1e-12)

    def test_matches_numeric_kinetic_energy(self, geom, links, rng):
        for lk in (links, random_links(rng)):
            for _ in range(20):
                q = random_q(rng)
                M = mass_matrix(geom, lk, q)
                np.testing.assert_allclose(M, numeric_mass_matrix(geom, lk, q), atol=1e-6 * np.abs(M).max())

    def test_kinetic_energy_form(self, geom, links, rng):
        q, v = random_q(rng), rng.normal(size=3)
        assert kinetic_energy(geom, links, JointState(q, v)) == pytest.approx(numeric_kinetic_energy(geom, links, q, v), rel=1e-7)

    def test_symmetric_positive_definite(self, geom, links, rng):
        qs = rng.uniform(-2 * math.pi, 2 * math.pi, size=(10_000, 3))
        min_ev = np.inf
        for q in qs:
            M = mass_matrix(geom, links, q)
            assert np.abs(M - M.T).max() <= 1e-12
            min_ev = min(min_ev, np.linalg.eigvalsh(M)[0])
        assert min_ev > 0

    def test_independent_of_base_angle(self, geom, links):
        np.testing.assert_allclose(mass_matrix(geom, links, [0.0, 0.4, 0.9]), mass_matrix(geom, links, [2.0, 0.4, 0.9]),
                                   atol=1e-16)


# ---------------------------------------------------------------- coriolis

def _mdot(geom, links, q, qdot, h=1e-6):
    return (mass_matrix(geom, links, q + h * qdot) - mass_matrix(geom, links, q - h * qdot)) / (2 * h)


class TestCoriolis:
    def test_zero_velocity(self, geom, links):
        assert not coriolis_matrix(geom, links, JointState([0.1, 0.2, 0.3], np.zeros(3))).any()

    def test_skew_symmetry(self, geom, rng):
        for lk in (default_links(geom), random_links(rng)):
            for _ in range(50):
                q, qd = random_q(rng), rng.normal(size=3) * 3
                S = _mdot(geom, lk, q, qd) - 2 * coriolis_matrix(geom, lk, JointState(q, qd))
                v = rng.normal(size=3)
                assert abs(v @ S @ v) < 1e-9
                assert np.abs(S + S.T).max() < 1e-9

    def test_lagrange_residual(self, geom, rng):
        """With qddot = 0: C qdot = Mdot qdot - d/dq (1/2 qdot' M qdot)."""
        h = 1e-6
        for lk in (default_links(geom), random_links(rng)):
            for _ in range(20):
                q, qd = random_q(rng), rng.normal(size=3) * 2
                dTdq = np.array([
                    (0.5 * qd @ mass_matrix(geom, lk, q + h * e) @ qd - 0.5 * qd @ mass_matrix(geom, lk, q - h * e) @ qd) / (2 * h)
                    for e in np.eye(3)
                ])
                expected = _mdot(geom, lk, q, qd) @ qd - dTdq
                got = coriolis_matrix(geom, lk, JointState(q, qd)) @ qd
                np.testing.assert_allclose(got, expected, atol=1e-6 * max(1e-3, np.abs(expected).max()))


# ---------------------------------------------------------------- gravity

class TestGravity:
    def test_zero_at_upright(self, geom, links):
        np.testing.assert_allclose(gravity_vector(geom, links, [0.7, math.pi / 2, 0.0]), 0.0, atol=1e-15)

    def test_stretched_out(self, geom, links):
        _, l2, l3 = links
        x2, x3 = l2.centroid[0], l3.centroid[0]
        expected = [0.0, G0 * (l3.mass * (geom.a2 + geom.a3 + x3) + l2.mass * (geom.a2 + x2)), l3.mass * G0 * (geom.a3 + x3)]
        np.testing.assert_allclose(gravity_vector(geom, links, [0, 0, 0]), expected, rtol=1e-15)

    def test_gradient_of_potential(self, geom, rng):
        h = 1e-6
        for lk in (default_links(geom), random_links(rng)):
            for _ in range(100):
                q = random_q(rng)
                grad = np.array([(numeric_potential(geom, lk, q + h * e) - numeric_potential(geom, lk, q - h * e)) / (2 * h)
                                 for e in np.eye(3)])
                np.testing.assert_allclose(gravity_vector(geom, lk, q), grad, atol=1e-7)

    def test_potential_matches_frames(self, geom, rng):
        lk = random_links(rng)
        for _ in range(20):
            q = random_q(rng)
            assert potential_energy(geom, lk, q) == pytest.approx(numeric_potential(geom, lk, q), abs=1e-12)


# ---------------------------------------------------------------- input map and state space

def random_terms(geom, links, rng):
    return dynamics_terms(geom, links, JointState(random_q(rng), rng.normal(size=3)))


class TestInputMap:
    def test_zero_input_is_gravity(self, geom, links, rng):
        terms = random_terms(geom, links, rng)
        np.testing.assert_array_equal(input_to_torque(terms, np.zeros(3)), terms.g)

    def test_identity_terms(self):
        terms = DynamicsTerms(np.eye(3), np.zeros((3, 3)), np.zeros(3))
        np.testing.assert_array_equal(input_to_torque(terms, [1.0, -2.0, 3.0]), [1.0, -2.0, 3.0])

    def test_round_trip(self, geom, links, rng):
        for _ in range(50):
            state = JointState(random_q(rng), rng.normal(size=3))
            terms = dynamics_terms(geom, links, state)
            u = rng.normal(size=3)
            qdd = acceleration(terms, state, input_to_torque(terms, u))
            np.testing.assert_allclose(qdd, -np.linalg.solve(terms.M, terms.C @ state.qdot) + u, atol=1e-10)


class TestAcceleration:
    def test_gravity_hold(self, geom, links, rng):
        state = JointState.at_rest(random_q(rng))
        terms = dynamics_terms(geom, links, state)
        np.testing.assert_array_equal(acceleration(terms, state, terms.g), np.zeros(3))

    def test_zero_everything(self, geom, links):
        state = JointState.at_rest([0.3, 0.2, 0.1])
        terms = dynamics_terms(geom, links, state, g0=0.0)
        np.testing.assert_array_equal(acceleration(terms, state, np.zeros(3)), np.zeros(3))

    def test_residual(self, geom, links, rng):
        for _ in range(50):
            state = JointState(random_q(rng), rng.normal(size=3))
            terms = dynamics_terms(geom, links, state)
            tau = rng.normal(size=3) * 0.2
            qdd = acceleration(terms, state, tau)
            assert np.abs(terms.M @ qdd + terms.C @ state.qdot + terms.g - tau).max() < 1e-10

    def test_ill_conditioned(self):
        terms = DynamicsTerms(np.diag([1.0, 1.0, 1e-14]), np.zeros((3, 3)), np.zeros(3))
        with pytest.raises(IllConditioned):
            acceleration(terms, JointState.at_rest(np.zeros(3)), np.zeros(3))
        with pytest.raises(IllConditioned):
            error_state_matrices(terms)


class TestErrorState:
    def test_at_rest(self, geom, links):
        A, B = error_state_matrices(dynamics_terms(geom, links, JointState.at_rest([0.1, 0.5, 0.5])))
        expected = np.zeros((6, 6))
        expected[:3, 3:] = -np.eye(3)
        np.testing.assert_array_equal(A, expected)
        np.testing.assert_array_equal(B, np.vstack([np.zeros((3, 3)), np.eye(3)]))

    def test_structure_and_inverse(self, geom, links, rng):
        for _ in range(20):
            terms = random_terms(geom, links, rng)
            A, B = error_state_matrices(terms)
            assert not A[:3, :3].any() and not A[3:, :3].any() and not B[:3].any()
            np.testing.assert_allclose(-terms.M @ A[3:, 3:], terms.C, atol=1e-10)

    def test_matches_plant_in_error_coordinates(self, geom, links, rng):
        """xdot = A x + B u reproduces (-qdot, qddot) for tau = M u + g."""
        state = JointState(random_q(rng), rng.normal(size=3))
        qd = random_q(rng)
        terms = dynamics_terms(geom, links, state)
        A, B = error_state_matrices(terms)
        u = rng.normal(size=3)
        x = np.concatenate([qd - state.q, state.qdot])
        xdot = A @ x + B @ u
        np.testing.assert_allclose(xdot[:3], -state.qdot, atol=1e-15)
        np.testing.assert_allclose(xdot[3:], acceleration(terms, state, input_to_torque(terms, u)), atol=1e-10)
