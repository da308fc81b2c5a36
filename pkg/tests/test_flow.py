import math

import numpy as np
import pytest

from gammaensemble.flow import (
    ChartGeometry,
    Trajectory,
    eigen_phases,
    evolve_exact,
    evolve_numeric,
    exact_trajectory,
    fd_speed,
    isometry_drift,
    killing_identity_residual_cp1,
    max_circular_gap,
    overlap_invariants,
    path_length,
    phase_speed,
    symplectic_divergence_cp1,
    torus_dispersion,
)
from gammaensemble.geometry import HermitianObservable, PureState, expectation, fs_angle
from gammaensemble.twostate import BlochCoords, bloch_trajectory, spin_hamiltonian


@pytest.fixture
def h3():
    return HermitianObservable(np.array([[0.0, 0.3, 0.1j], [0.3, 1.0, 0.2], [-0.1j, 0.2, math.sqrt(5)]]))


@pytest.fixture
def x3():
    return PureState(np.array([0.6, 0.5 + 0.3j, -0.2 + 0.5j]))


def test_exact_evolution_is_unitary_and_composes(h3, x3):
    a = evolve_exact(h3, evolve_exact(h3, x3, 1.3), 0.9)
    b = evolve_exact(h3, x3, 2.2)
    assert a.same_point(b)
    assert evolve_exact(h3, x3, 0.0) is x3


def test_sign_convention():
    # dZ/dt = iHZ: an eigenstate picks up exp(+iEt)
    h = HermitianObservable.from_levels([-1.0, 2.0])
    z = exact_trajectory(h, PureState.basis(2, 1), [0.0, 0.5]).states
    assert z[1, 1] == pytest.approx(np.exp(1j * 2.0 * 0.5))


def test_rk4_matches_exact(h3, x3):
    traj = evolve_numeric(h3, x3, 2.0, 1e-3)
    assert traj.final.same_point(evolve_exact(h3, x3, 2.0), tol=1e-9)
    assert traj.times[-1] == 2.0


def test_rk4_step_lands_on_final_time(h3, x3):
    traj = evolve_numeric(h3, x3, 1.0, 0.3)
    assert len(traj) == 5
    assert np.allclose(np.diff(traj.times), 0.25)


@pytest.mark.parametrize("t,dt", [(1.0, 0.0), (0.0, 0.1), (-1.0, 0.1)])
def test_rk4_rejects(h3, x3, t, dt):
    with pytest.raises(ValueError):
        evolve_numeric(h3, x3, t, dt)


def test_energy_conserved(h3, x3):
    e = evolve_numeric(h3, x3, 5.0, 1e-3).energies(h3)
    assert np.max(np.abs(e - e[0])) < 1e-10


def test_overlaps_conserved(h3, x3):
    rep = overlap_invariants(h3, evolve_numeric(h3, x3, 5.0, 1e-3))
    assert rep.max_drift < 1e-10
    assert rep.initial.sum() == pytest.approx(1.0)


def test_speed_is_twice_uncertainty(h3, x3):
    assert fd_speed(h3, x3) == pytest.approx(phase_speed(h3, x3), rel=1e-6)


def test_stationary_state():
    h = HermitianObservable.from_levels([0.0, 1.0, 3.0])
    x = PureState.basis(3, 2)
    assert phase_speed(h, x) == 0.0
    assert path_length(exact_trajectory(h, x, np.linspace(0, 10, 101))) < 1e-10


def test_path_length_matches_speed(h3, x3):
    traj = exact_trajectory(h3, x3, np.linspace(0, 3, 3001))
    assert path_length(traj) == pytest.approx(3 * phase_speed(h3, x3), rel=1e-5)


def test_isometry(h3, x3):
    others = [x3, PureState(np.array([1.0, 0, 0])), PureState(np.array([0.1, 1j, 0.4]))]
    assert isometry_drift(h3, others, np.linspace(0, 10, 21)) < 1e-10


def test_spin_period():
    h = 0.7
    ham = spin_hamiltonian(h)
    x = BlochCoords(1.0, 0.4).to_state()
    assert evolve_exact(ham, x, math.pi / h).same_point(x, tol=1e-12)
    assert not evolve_exact(ham, x, math.pi / (2 * h)).same_point(x, tol=1e-3)


def test_bloch_trajectory_matches_flow():
    h, theta, phi = 0.8, 1.1, 0.3
    ham = spin_hamiltonian(h)
    x0 = bloch_trajectory(theta, phi, h, 0.0)
    for t in (0.5, 2.0, 7.3):
        assert bloch_trajectory(theta, phi, h, t).same_point(evolve_exact(ham, x0, t), tol=1e-12)
    # colatitude fixed, azimuth rotates at 2h
    a, b = BlochCoords.from_state(x0), BlochCoords.from_state(bloch_trajectory(theta, phi, h, 0.1))
    assert b.theta == pytest.approx(theta)
    assert abs(((a.phi - b.phi) % (2 * math.pi)) - 2 * h * 0.1) < 1e-12


def test_spin_energy_is_h_cos_theta():
    x = BlochCoords(0.9, 2.0).to_state()
    assert expectation(spin_hamiltonian(1.5), x) == pytest.approx(1.5 * math.cos(0.9))


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.array([[1, 0], [1, 0]]))
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0]), np.array([[2.0, 0]]))


def test_trajectory_csv(h3, x3):
    text = exact_trajectory(h3, x3, [0.0, 1.0]).to_csv(h3)
    lines = text.splitlines()
    assert lines[0] == "t,re0,im0,re1,im1,re2,im2,energy"
    assert len(lines) == 3
    assert "\r" not in text


def test_phase_coverage_grows():
    h = HermitianObservable.from_levels([0.0, 1.0, math.sqrt(2)])
    x = PureState(np.ones(3))
    short = eigen_phases(h, exact_trajectory(h, x, np.linspace(0, 20, 2001)))
    long = eigen_phases(h, exact_trajectory(h, x, np.linspace(0, 400, 40001)))
    assert torus_dispersion(long, 32) < torus_dispersion(short, 32)


def test_circular_gap():
    assert max_circular_gap([0.0, math.pi]) == pytest.approx(math.pi)
    assert max_circular_gap(np.linspace(0, 2 * np.pi, 100, endpoint=False)) == pytest.approx(2 * np.pi / 100)


# -- chart identities ---------------------------------------------------------


@pytest.mark.parametrize("theta", [0.3, 1.0, math.pi / 2, 2.5])
def test_chart_compatibility(theta):
    assert ChartGeometry(theta).compatibility_residual() < 1e-14


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 3, math.pi / 2, 2 * math.pi / 3])
@pytest.mark.parametrize("h", [0.5, 1.0, -2.0])
def test_killing_identities(h, theta):
    res = killing_identity_residual_cp1(h, theta)
    assert res.killing < 1e-8
    assert res.hamiltonian < 1e-8
    assert symplectic_divergence_cp1(h, theta) == pytest.approx(4 * h * math.cos(theta), abs=1e-8)


@pytest.mark.parametrize("theta", [0.0, math.pi])
def test_killing_rejects_poles(theta):
    with pytest.raises(ValueError):
        killing_identity_residual_cp1(1.0, theta)


def test_fs_distance_between_bloch_points():
    # CP^1 with this normalization is the unit sphere
    a, b = BlochCoords(0.4, 0.0).to_state(), BlochCoords(1.3, 0.0).to_state()
    assert fs_angle(a, b) == pytest.approx(0.9)
