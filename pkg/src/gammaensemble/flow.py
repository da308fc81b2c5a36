"""
Schrodinger evolution on quantum phase space.

The sign convention is dZ = +iHZ dt throughout, so a spin-1/2 state with
energy eigenvalues -h, +h picks up the phases exp(+-i h t).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .formats import csv_text
from .geometry import (
    HermitianObservable,
    PureState,
    _check_dims,
    energies,
    fs_angle,
    observable_variance,
)

__all__ = [
    "Trajectory",
    "OverlapReport",
    "ChartGeometry",
    "KillingResiduals",
    "evolve_exact",
    "exact_trajectory",
    "evolve_numeric",
    "phase_speed",
    "fd_speed",
    "overlap_invariants",
    "eigen_phases",
    "max_circular_gap",
    "torus_dispersion",
    "isometry_drift",
    "path_length",
    "killing_identity_residual_cp1",
    "symplectic_divergence_cp1",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim), rows normalized

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        z = np.asarray(self.states, dtype=complex)
        if t.ndim != 1 or z.ndim != 2 or z.shape[0] != t.size:
            raise ValueError("times and states must have matching lengths")
        if t.size == 0:
            raise ValueError("trajectory is empty")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.max(np.abs(np.linalg.norm(z, axis=1) - 1.0)) > 1e-10:
            raise ValueError("trajectory states must be normalized")
        t.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", z)

    def __len__(self):
        return self.times.size

    def __getitem__(self, i) -> PureState:
        return PureState(self.states[i])

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> PureState:
        return self[-1]

    def energies(self, h: HermitianObservable) -> np.ndarray:
        _check_dims(h.dim, self.dim)
        return energies(h.entries, self.states)

    def to_csv(self, h: HermitianObservable) -> str:
        header = ["t"]
        for k in range(self.dim):
            header += [f"re{k}", f"im{k}"]
        header.append("energy")
        cols = [self.times]
        for k in range(self.dim):
            cols += [self.states[:, k].real, self.states[:, k].imag]
        cols.append(self.energies(h))
        return csv_text(header, np.column_stack(cols))


def _propagator(h: HermitianObservable, t: float) -> np.ndarray:
    spec = h.spectrum
    v = spec.eigenvectors
    return (v * np.exp(1j * t * spec.eigenvalues)) @ v.conj().T


def evolve_exact(h: HermitianObservable, x0: PureState, t: float) -> PureState:
    """U(t) x0 with U(t) = exp(itH) built from the spectral decomposition."""
    _check_dims(h.dim, x0.dim)
    if t == 0:
        return x0
    return PureState(_propagator(h, t) @ x0.amplitudes)


def exact_trajectory(h: HermitianObservable, x0: PureState, times) -> Trajectory:
    _check_dims(h.dim, x0.dim)
    spec = h.spectrum
    v = spec.eigenvectors
    t = np.asarray(times, dtype=float)
    c = v.conj().T @ x0.amplitudes
    z = np.exp(1j * np.outer(t, spec.eigenvalues)) * c @ v.T
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return Trajectory(t, z)


def evolve_numeric(h: HermitianObservable, x0: PureState, t: float, dt: float) -> Trajectory:
    """Classical RK4 on dZ/dt = iHZ with renormalization after every step.

    The step is shrunk slightly if needed so that an integer number of steps
    lands exactly on `t`.
    """
    _check_dims(h.dim, x0.dim)
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if not t > 0:
        raise ValueError(f"final time must be positive, got {t}")
    n = max(1, math.ceil(t / dt - 1e-9))
    step = t / n
    a = 1j * h.entries

    out = np.empty((n + 1, h.dim), dtype=complex)
    z = x0.amplitudes.copy()
    out[0] = z
    for i in range(1, n + 1):
        k1 = a @ z
        k2 = a @ (z + 0.5 * step * k1)
        k3 = a @ (z + 0.5 * step * k2)
        k4 = a @ (z + step * k3)
        z = z + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        z /= np.linalg.norm(z)
        out[i] = z
    return Trajectory(np.linspace(0.0, t, n + 1), out)


def phase_speed(h: HermitianObservable, x: PureState) -> float:
    """Fubini-Study speed of the flow through x: twice the energy uncertainty."""
    return 2.0 * math.sqrt(observable_variance(h, x))


def fd_speed(h: HermitianObservable, x: PureState, delta: float = 1e-6) -> float:
    """Central finite-difference FS speed of the exact flow at x."""
    a = evolve_exact(h, x, -delta)
    b = evolve_exact(h, x, delta)
    return fs_angle(a, b) / (2 * delta)


def path_length(traj: Trajectory) -> float:
    """Sum of FS distances between consecutive states."""
    x, y = traj.states[1:], traj.states[:-1]
    ov = np.einsum("ta,ta->t", y.conj(), x)
    perp = np.linalg.norm(x - ov[:, None] * y, axis=1)
    return float(np.sum(2 * np.arctan2(perp, np.abs(ov))))


class OverlapReport(NamedTuple):
    initial: np.ndarray  # |<y_k|x(0)>|^2 per eigenstate
    drifts: np.ndarray  # max_t | |<y_k|x(t)>|^2 - |<y_k|x(0)>|^2 |

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drifts))


def _eigen_amplitudes(h: HermitianObservable, traj: Trajectory) -> np.ndarray:
    _check_dims(h.dim, traj.dim)
    return traj.states @ h.spectrum.eigenvectors.conj()


def overlap_invariants(h: HermitianObservable, traj: Trajectory) -> OverlapReport:
    """Drift of the eigenstate occupation probabilities along a trajectory.

    These are the angular parameters of an energy surface, which unitary
    evolution cannot change; only the relative phases move.
    """
    p = np.abs(_eigen_amplitudes(h, traj)) ** 2
    return OverlapReport(p[0].copy(), np.max(np.abs(p - p[0]), axis=0))


def eigen_phases(h: HermitianObservable, traj: Trajectory, reference: int | None = None) -> np.ndarray:
    """Relative phases arg(c_k) - arg(c_ref) in [0, 2pi) for every k != ref.

    The reference is the eigenstate with the largest initial weight unless
    given. Returns shape (len(traj), dim - 1).
    """
    c = _eigen_amplitudes(h, traj)
    if reference is None:
        reference = int(np.argmax(np.abs(c[0])))
    others = [k for k in range(traj.dim) if k != reference]
    rel = np.angle(c[:, others]) - np.angle(c[:, [reference]])
    return np.mod(rel, 2 * np.pi)


def max_circular_gap(angles) -> float:
    a = np.sort(np.mod(np.asarray(angles, dtype=float).ravel(), 2 * np.pi))
    if a.size == 0:
        return 2 * np.pi
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    return float(np.max(gaps))


def torus_dispersion(phases, resolution: int = 64) -> float:
    """Largest distance from a probe-grid point of the torus to the phase cloud.

    `phases` has shape (N, m); distances use the flat periodic metric on
    [0, 2pi)^m. Shrinks towards zero as an irrational winding fills the torus.
    """
    pts = np.mod(np.atleast_2d(np.asarray(phases, dtype=float)), 2 * np.pi)
    m = pts.shape[1]
    # boxsize requires coordinates strictly below the period
    pts = np.minimum(pts, np.nextafter(2 * np.pi, 0))
    tree = cKDTree(pts, boxsize=2 * np.pi)
    axis = (np.arange(resolution) + 0.5) * (2 * np.pi / resolution)
    probes = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    d, _ = tree.query(probes)
    return float(np.max(d))


def isometry_drift(h: HermitianObservable, states: Sequence[PureState], times) -> float:
    """Max change of any pairwise FS distance among co-evolved states."""
    base = {(i, j): fs_angle(states[i], states[j]) for i, j in itertools.combinations(range(len(states)), 2)}
    worst = 0.0
    for t in times:
        moved = [evolve_exact(h, s, t) for s in states]
        for (i, j), d0 in base.items():
            worst = max(worst, abs(fs_angle(moved[i], moved[j]) - d0))
    return worst


# -- Killing identities in the (theta, phi) chart of CP^1 -------------------


@dataclass(frozen=True)
class ChartGeometry:
    """Metric and symplectic components of the unit sphere at colatitude theta."""

    theta: float

    def __post_init__(self):
        if not 0.0 < self.theta < math.pi:
            raise ValueError("theta must lie strictly between the poles")

    def metric(self) -> np.ndarray:
        return np.diag([1.0, math.sin(self.theta) ** 2])

    def inverse_metric(self) -> np.ndarray:
        return np.diag([1.0, 1.0 / math.sin(self.theta) ** 2])

    def symplectic(self) -> np.ndarray:
        s = math.sin(self.theta)
        return np.array([[0.0, s], [-s, 0.0]])

    def symplectic_raised(self) -> np.ndarray:
        gi = self.inverse_metric()
        return gi @ self.symplectic() @ gi.T

    def compatibility_residual(self) -> float:
        """max |g^{ab} Omega_ac Omega_bd - g_cd|."""
        om = self.symplectic()
        lhs = np.einsum("ab,ac,bd->cd", self.inverse_metric(), om, om)
        return float(np.max(np.abs(lhs - self.metric())))


class KillingResiduals(NamedTuple):
    killing: float  # max |nabla_(a xi_b)|
    hamiltonian: float  # |Omega^{ab} nabla_a xi_b - 2(n+1)(H - Hbar)|


def _flow_covector(h: float, theta: float) -> np.ndarray:
    # xi^theta = 0, xi^phi = 2h; lowered with the chart metric
    chart = ChartGeometry(theta)
    return chart.metric() @ np.array([0.0, 2.0 * h])


def _covariant_derivative(h: float, theta: float, step: float) -> np.ndarray:
    """nabla_a xi_b by central differences; phi-derivatives vanish identically
    but are still taken through the same stencil."""

    def metric_at(th, ph):
        return ChartGeometry(th).metric()

    def xi_at(th, ph):
        return _flow_covector(h, th)

    def d(fn, a):
        e = np.zeros(2)
        e[a] = step
        return (fn(theta + e[0], e[1]) - fn(theta - e[0], -e[1])) / (2 * step)

    dg = np.stack([d(metric_at, a) for a in range(2)])  # dg[c, a, b] = d_c g_ab
    dxi = np.stack([d(xi_at, a) for a in range(2)])  # dxi[a, b] = d_a xi_b
    gi = ChartGeometry(theta).inverse_metric()
    # Gamma^c_ab = 1/2 g^{cd} (d_a g_db + d_b g_da - d_d g_ab)
    gamma = 0.5 * np.einsum(
        "cd,abd->cab",
        gi,
        np.einsum("adb->abd", dg) + np.einsum("bda->abd", dg) - np.einsum("dab->abd", dg),
    )
    xi = _flow_covector(h, theta)
    return dxi - np.einsum("cab,c->ab", gamma, xi)


def symplectic_divergence_cp1(h: float, theta: float, step: float = 1e-5) -> float:
    """Omega^{ab} nabla_a xi_b for the flow of H = h cos(theta)."""
    nab = _covariant_derivative(h, theta, step)
    return float(np.sum(ChartGeometry(theta).symplectic_raised() * nab))


def killing_identity_residual_cp1(h: float, theta: float, step: float = 1e-5) -> KillingResiduals:
    """Residuals of the Killing equation and of the observable-recovery
    identity for H(theta) = h cos(theta) on CP^1 (n = 1, mean eigenvalue 0)."""
    if h == 0:
        raise ValueError("h must be nonzero")
    if not 0.0 < theta < math.pi:
        raise ValueError("theta at a pole: the (theta, phi) chart is singular there")
    nab = _covariant_derivative(h, theta, step)
    killing = float(np.max(np.abs(0.5 * (nab + nab.T))))
    lhs = float(np.sum(ChartGeometry(theta).symplectic_raised() * nab))
    rhs = 2 * (1 + 1) * (h * math.cos(theta) - 0.0)
    return KillingResiduals(killing, abs(lhs - rhs))
