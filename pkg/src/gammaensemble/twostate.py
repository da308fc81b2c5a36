"""
Closed forms for a spin one-half particle (a general two-level system).

Conventions: the pole P is the +h eigenstate, the antipole is the -h
eigenstate, and colatitude theta is measured down from the pole, so a state
at theta has energy h cos(theta). Temperatures enter through beta = 1/(kT).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .formats import csv_text
from .geometry import DensityMatrix, HermitianObservable, PureState

__all__ = [
    "TwoLevelSystem",
    "BlochCoords",
    "ClosedForms",
    "ThermoCurve",
    "antipode",
    "spin_hamiltonian",
    "bloch_trajectory",
    "gamma_populations",
    "gibbs_populations",
    "spin_gamma_closed_forms",
    "spin_conventional_closed_forms",
    "spin_energy_pdf",
    "thermo_curves",
]

_SERIES_CUTOFF = 1e-6
_NORTH = PureState(np.array([1.0, 0.0]))


def antipode(pole: PureState) -> PureState:
    """The orthogonal state eps^{ab} conj(P)_b = (conj(P1), -conj(P0))."""
    if pole.dim != 2:
        raise ValueError("antipode is defined for two-level states only")
    p = pole.amplitudes
    return PureState(np.array([p[1].conjugate(), -p[0].conjugate()]))


@dataclass(frozen=True, eq=False)
class TwoLevelSystem:
    e0: float
    e1: float
    pole: PureState = _NORTH

    def __post_init__(self):
        if not self.e1 > self.e0:
            raise ValueError("need e1 > e0")
        if self.pole.dim != 2:
            raise ValueError("pole must be a two-level state")

    @property
    def antipole(self) -> PureState:
        return antipode(self.pole)

    @property
    def h(self) -> float:
        return 0.5 * (self.e1 - self.e0)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.e1 + self.e0)

    def hamiltonian(self) -> HermitianObservable:
        base = spin_hamiltonian(self.h, self.pole).entries
        return HermitianObservable(base + self.midpoint * np.eye(2))

    def density_matrix(self, ground: float) -> DensityMatrix:
        """ground * |antipole><antipole| + (1 - ground) * |pole><pole|."""
        p = self.pole.amplitudes
        q = self.antipole.amplitudes
        return DensityMatrix(ground * np.outer(q, q.conj()) + (1 - ground) * np.outer(p, p.conj()))


@dataclass(frozen=True)
class BlochCoords:
    """Colatitude from the pole and azimuth of a CP^1 point.

    The state is cos(theta/2) P + exp(i phi) sin(theta/2) Pbar.
    """

    theta: float
    phi: float

    def to_state(self, pole: PureState = _NORTH) -> PureState:
        p, q = pole.amplitudes, antipode(pole).amplitudes
        return PureState(math.cos(self.theta / 2) * p + np.exp(1j * self.phi) * math.sin(self.theta / 2) * q)

    @classmethod
    def from_state(cls, x: PureState, pole: PureState = _NORTH) -> "BlochCoords":
        a = np.vdot(pole.amplitudes, x.amplitudes)
        b = np.vdot(antipode(pole).amplitudes, x.amplitudes)
        theta = 2 * math.atan2(abs(b), abs(a))
        phi = float(np.mod(np.angle(b) - np.angle(a), 2 * np.pi)) if abs(a) * abs(b) > 0 else 0.0
        return cls(theta, phi)


def spin_hamiltonian(h: float, pole: PureState = _NORTH) -> HermitianObservable:
    """h (2 |P><P| - I): eigenvalues +h on the pole, -h on the antipole."""
    if pole.dim != 2:
        raise ValueError("spin Hamiltonian needs a two-level pole")
    p = pole.amplitudes
    return HermitianObservable(h * (2 * np.outer(p, p.conj()) - np.eye(2)))


def bloch_trajectory(theta: float, phi: float, h: float, t: float, pole: PureState = _NORTH) -> PureState:
    """cos(theta/2) e^{i(ht+phi)} P + sin(theta/2) e^{-i(ht+phi)} Pbar.

    Here phi is the phase of the explicit solution; the azimuth of the state
    on the sphere is -2(ht + phi), which turns at angular velocity 2h.
    """
    p, q = pole.amplitudes, antipode(pole).amplitudes
    ph = h * t + phi
    return PureState(math.cos(theta / 2) * np.exp(1j * ph) * p + math.sin(theta / 2) * np.exp(-1j * ph) * q)


# -- thermal closed forms -------------------------------------------------------


def _excited_gamma(a: float) -> float:
    """Excited population 1/a + 1/(1 - e^a), a = beta (E1 - E0)."""
    if abs(a) < _SERIES_CUTOFF:
        return 0.5 - a / 12.0
    if a > 0:
        # 1/(1 - e^a) = -e^{-a} / (1 - e^{-a})
        return 1.0 / a - math.exp(-a) / -math.expm1(-a)
    return 1.0 / a + 1.0 / -math.expm1(a)


def gamma_populations(e0: float, e1: float, beta: float) -> tuple[float, float]:
    """(ground, excited) populations of the canonical Gamma density matrix."""
    if e1 == e0:
        return 0.5, 0.5
    excited = _excited_gamma(beta * (e1 - e0))
    return 1.0 - excited, excited


def gibbs_populations(e0: float, e1: float, beta: float) -> tuple[float, float]:
    a = beta * (e1 - e0)
    # logistic in a, written to avoid overflow
    if a >= 0:
        excited = math.exp(-a) / (1 + math.exp(-a))
    else:
        excited = 1 / (1 + math.exp(a))
    return 1.0 - excited, excited


class ClosedForms(NamedTuple):
    Z: float
    E: float
    C: float
    density_matrix: DensityMatrix  # energy eigenbasis, ground state first


def _diag_dm(ground: float, excited: float) -> DensityMatrix:
    return DensityMatrix(np.diag([ground, excited]))


def _gamma_energy(h: float, beta: float) -> float:
    x = beta * h
    if abs(x) < _SERIES_CUTOFF:
        return -h * x / 3.0
    return 1.0 / beta - h / math.tanh(x)


def _gamma_heat_capacity(h: float, beta: float, k: float) -> float:
    x = abs(beta * h)
    if x < 1e-4:
        return k * x * x / 3.0
    if x > 350:
        return k
    return k * (1.0 - (x / math.sinh(x)) ** 2)


def spin_gamma_closed_forms(h: float, beta: float, k: float = 1.0) -> ClosedForms:
    """Canonical Gamma-ensemble for levels -h, +h.

    Z = 4 pi sinh(beta h)/(beta h), E = 1/beta - h coth(beta h) and
    C = k (1 - x^2 / sinh^2 x) with x = beta h, which tends to k as T -> 0.
    """
    if h == 0:
        return ClosedForms(4 * math.pi, 0.0, 0.0, _diag_dm(0.5, 0.5))
    x = beta * h
    if abs(x) < _SERIES_CUTOFF:
        z = 4 * math.pi * (1 + x * x / 6)
    elif abs(x) < 700:
        z = 4 * math.pi * math.sinh(x) / x
    else:
        z = math.inf
    g, e = gamma_populations(-abs(h), abs(h), beta)
    return ClosedForms(z, _gamma_energy(abs(h), beta), _gamma_heat_capacity(h, beta, k), _diag_dm(g, e))


def spin_conventional_closed_forms(h: float, beta: float, k: float = 1.0) -> ClosedForms:
    """Gibbs ensemble for levels -h, +h: Z = 2 cosh(beta h), E = -h tanh(beta h)."""
    if h == 0:
        return ClosedForms(2.0, 0.0, 0.0, _diag_dm(0.5, 0.5))
    x = abs(beta * h)
    z = 2 * math.cosh(beta * h) if x < 700 else math.inf
    c = 0.0 if x > 350 else k * (x / math.cosh(x)) ** 2
    g, e = gibbs_populations(-abs(h), abs(h), beta)
    return ClosedForms(z, -abs(h) * math.tanh(beta * abs(h)), c, _diag_dm(g, e))


def spin_energy_pdf(h: float, beta: float, energy: float) -> float:
    """p(E) = beta exp(-beta E) / (2 sinh(beta h)) on [-h, h], zero outside."""
    if abs(energy) > h:
        return 0.0
    if beta == 0:
        return 1.0 / (2 * h)
    if beta < 0:
        return spin_energy_pdf(h, -beta, -energy)
    # beta exp(-beta (E + h)) / (1 - exp(-2 beta h))
    return beta * math.exp(-beta * (energy + h)) / -math.expm1(-2 * beta * h)


@dataclass(frozen=True, eq=False)
class ThermoCurve:
    """Energy and heat capacity against temperature for both ensembles."""

    T: np.ndarray
    E_gamma: np.ndarray
    E_conventional: np.ndarray
    C_gamma: np.ndarray
    C_conventional: np.ndarray

    def rows(self):
        return np.column_stack([self.T, self.E_gamma, self.E_conventional, self.C_gamma, self.C_conventional])

    def to_csv(self) -> str:
        return csv_text(["T", "E_gamma", "E_conventional", "C_gamma", "C_conventional"], self.rows())


def thermo_curves(h: float, k: float, temperatures) -> ThermoCurve:
    t = np.asarray(temperatures, dtype=float)
    if np.any(t <= 0):
        raise ValueError("temperatures must be positive")
    g = [spin_gamma_closed_forms(h, 1.0 / (k * x), k) for x in t]
    c = [spin_conventional_closed_forms(h, 1.0 / (k * x), k) for x in t]
    return ThermoCurve(
        t,
        np.array([r.E for r in g]),
        np.array([r.E for r in c]),
        np.array([r.C for r in g]),
        np.array([r.C for r in c]),
    )
