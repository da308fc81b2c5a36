"""
Microcanonical and canonical Gamma-ensembles on CP^n.

Every phase-space integral here is an average over Fubini-Study uniform
samples scaled by the total volume ``(4 pi)^n / n!``, the normalization for
which CP^1 has area 4 pi. Density matrices, energy densities, E and C do not
depend on this constant; only Z and the state density do.

The closed-form ``simplex_*`` functions are independent oracles for the
Monte Carlo estimators. They rest on the fact that the eigenbasis
occupation probabilities of an FS-uniform state are uniform on the simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import DegenerateSpectrumError, EstimationError
from .formats import csv_text, encode_value
from .geometry import DensityMatrix, HermitianObservable, energies, iter_fs_uniform

__all__ = [
    "McParams",
    "EnsembleEstimate",
    "DensityEstimate",
    "EnergyDensity",
    "VolumeGradient",
    "BathComposition",
    "ThermoRow",
    "phase_space_volume",
    "simplex_exp_moment",
    "log_simplex_exp_moment",
    "simplex_populations",
    "simplex_state_density",
    "simplex_volume_fraction",
    "canonical_partition",
    "canonical_density_matrix",
    "conventional_gibbs_dm",
    "state_density",
    "volume_below",
    "microcanonical_dm",
    "volume_derivatives",
    "microcanonical_dm_via_volume",
    "canonical_energy_pdf",
    "mixture_density_matrix",
    "convolve_densities",
    "bath_composition",
    "log_derivative",
    "thermodynamics",
]

MIN_SHELL_SAMPLES = 100
MIN_ESS = 100.0


def phase_space_volume(n: int) -> float:
    """Fubini-Study volume of CP^n, (4 pi)^n / n!."""
    return (4 * math.pi) ** n / math.factorial(n)


@dataclass(frozen=True)
class McParams:
    """Monte Carlo settings.

    ``shell_width`` and ``bandwidth`` default to 1% and 2% of the spectral
    range when left as None.
    """

    samples: int = 1_000_000
    seed: int = 0
    chunks: int = 1
    shell_width: float | None = None
    bandwidth: float | None = None

    def __post_init__(self):
        if self.samples < 1000:
            raise ValueError(f"samples must be at least 1000, got {self.samples}")
        if self.chunks < 1:
            raise ValueError(f"chunks must be positive, got {self.chunks}")
        if self.shell_width is not None and not self.shell_width > 0:
            raise ValueError("shell_width must be positive")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    def shell(self, spread: float) -> float:
        return self.shell_width if self.shell_width is not None else 0.01 * spread

    def kernel_width(self, spread: float) -> float:
        return self.bandwidth if self.bandwidth is not None else 0.02 * spread

    def stream(self, dim: int, block: int = 1 << 16):
        return iter_fs_uniform(dim, self.samples, self.seed, self.chunks, block)


@dataclass(frozen=True)
class EnsembleEstimate:
    """A Monte Carlo result.

    For complex matrix values, ``std_error`` is complex as well: its real
    and imaginary parts are the standard errors of the real and imaginary
    parts of each entry.
    """

    value: float | np.ndarray
    std_error: float | np.ndarray
    samples_used: int
    seed: int
    chunks: int = 1
    ess: float | None = None

    def to_dict(self) -> dict:
        out = {
            "value": encode_value(self.value),
            "std_error": encode_value(self.std_error),
            "samples": self.samples_used,
            "seed": self.seed,
            "chunks": self.chunks,
        }
        if self.ess is not None:
            out["ess"] = float(self.ess)
        return out


class DensityEstimate(NamedTuple):
    matrix: DensityMatrix
    estimate: EnsembleEstimate  # raw estimate before projection
    energy: EnsembleEstimate


@dataclass(frozen=True, eq=False)
class EnergyDensity:
    """A density tabulated on an increasing energy grid (probability or state density)."""

    grid: np.ndarray
    density: np.ndarray
    std_error: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if g.ndim != 1 or g.shape != d.shape or g.size < 2:
            raise ValueError("grid and density must be matching 1-d arrays of length >= 2")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(d < 0):
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "density", d)
        if self.std_error is not None:
            object.__setattr__(self, "std_error", np.asarray(self.std_error, dtype=float))

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        d = np.diff(self.grid)
        return bool(np.all(np.abs(d - d[0]) <= rtol * abs(d[0])))

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.density, self.grid) / self.integral())

    def __call__(self, energy):
        return np.interp(energy, self.grid, self.density, left=0.0, right=0.0)

    def normalized(self) -> "EnergyDensity":
        total = self.integral()
        se = None if self.std_error is None else self.std_error / total
        return EnergyDensity(self.grid, self.density / total, se)

    def to_csv(self) -> str:
        se = self.std_error if self.std_error is not None else np.zeros_like(self.density)
        return csv_text(["energy", "density", "std_error"], np.column_stack([self.grid, self.density, se]))


class _Moments:
    """Running sums for self-normalized weighted means of vector-valued samples."""

    def __init__(self):
        self.n = 0
        self.sw = 0.0
        self.sw2 = 0.0
        self.swf = self.sw2f = self.sw2f2 = 0.0

    def add(self, w: np.ndarray, f: np.ndarray):
        w2 = w * w
        self.n += w.size
        self.sw += float(w.sum())
        self.sw2 += float(w2.sum())
        self.swf = self.swf + w @ f
        self.sw2f = self.sw2f + w2 @ f
        self.sw2f2 = self.sw2f2 + w2 @ (f * f)

    def mean(self):
        return self.swf / self.sw

    def std_error(self):
        # delta-method variance of sum(w f) / sum(w)
        m = self.mean()
        var = (self.sw2f2 - 2 * m * self.sw2f + m * m * self.sw2) / self.sw**2
        return np.sqrt(np.clip(var, 0.0, None))

    def ess(self) -> float:
        return self.sw**2 / self.sw2 if self.sw2 > 0 else 0.0


def _projector_features(z: np.ndarray) -> np.ndarray:
    """Rows [Re Pi.ravel(), Im Pi.ravel()] for a batch of amplitude rows."""
    pi = np.einsum("na,nb->nab", z, z.conj()).reshape(z.shape[0], -1)
    return np.concatenate([pi.real, pi.imag], axis=1)


def _matrix_from_features(v: np.ndarray, dim: int) -> np.ndarray:
    k = dim * dim
    return (v[:k] + 1j * v[k:]).reshape(dim, dim)


def _energy_shift(h: HermitianObservable, beta: float) -> float:
    # makes every Boltzmann weight <= 1
    spec = h.spectrum
    return spec.e_min if beta >= 0 else spec.e_max


# -- closed-form simplex oracles ---------------------------------------------


def _check_distinct(levels: np.ndarray):
    scale = max(1.0, float(np.max(np.abs(levels))))
    if levels.size < 2 or np.min(np.diff(levels)) <= 1e-9 * scale:
        raise DegenerateSpectrumError(
            "closed-form simplex oracle needs pairwise distinct eigenvalues; "
            "use the Monte Carlo estimators for degenerate spectra"
        )


def _log_exp_divided_mean(a: np.ndarray) -> float:
    """log of n! * exp[a_0, ..., a_n] via the exponential of a bidiagonal matrix.

    Valid for repeated nodes; used where partial fractions lose accuracy.
    """
    n = a.size - 1
    m = float(np.max(a))
    mat = np.diag(a - m) + np.diag(np.ones(n), 1)
    top = expm(mat)[0, n]
    return m + math.log(math.factorial(n) * top)


def log_simplex_exp_moment(levels: Sequence[float], beta: float) -> float:
    """log of the mean of exp(-beta sum_k p_k E_k) over the uniform simplex."""
    e = np.sort(np.asarray(levels, dtype=float))
    _check_distinct(e)
    if beta == 0:
        return 0.0
    a = -beta * e
    n = e.size - 1
    if abs(beta) * np.min(np.diff(e)) < 0.1:
        return _log_exp_divided_mean(a)
    m = float(np.max(a))
    total = 0.0
    for k in range(n + 1):
        denom = np.prod([a[k] - a[j] for j in range(n + 1) if j != k])
        total += math.exp(a[k] - m) / denom
    return m + math.log(math.factorial(n) * total)


def simplex_exp_moment(levels: Sequence[float], beta: float) -> float:
    """n! sum_k exp(-beta E_k) / prod_{j != k} beta (E_j - E_k).

    This is the FS-uniform average of exp(-beta H(x)), so the canonical
    partition function is ``phase_space_volume(n) * simplex_exp_moment``.
    Partial fractions are used when the scaled gaps are large; otherwise the
    divided difference comes from a matrix exponential, which also covers
    the beta -> 0 limit.
    """
    return math.exp(log_simplex_exp_moment(levels, beta))


def simplex_populations(levels: Sequence[float], beta: float) -> np.ndarray:
    """Eigenbasis populations of the canonical Gamma density matrix, in closed form.

    Weighting the uniform simplex by p_k is the same as duplicating node k
    in the divided difference, which gives
    rho_kk = M(levels with E_k repeated) / ((n+1) M(levels)).
    """
    e = np.asarray(levels, dtype=float)
    order = np.argsort(e)
    e = e[order]
    _check_distinct(e)
    dim = e.size
    if beta == 0:
        return np.full(dim, 1.0 / dim)
    a = -beta * e
    base = _log_exp_divided_mean(a)
    pops = np.array([
        math.exp(_log_exp_divided_mean(np.sort(np.append(a, a[k]))) - base) / dim for k in range(dim)
    ])
    out = np.empty(dim)
    out[order] = pops / pops.sum()
    return out


def simplex_state_density(levels: Sequence[float], energy: float) -> float:
    """Probability density of H(x) at `energy` under the FS-uniform law.

    The law of sum_k p_k E_k for uniform p is the B-spline with knots E_k:
    n sum_k (E_k - E)_+^{n-1} / prod_{j != k} (E_k - E_j).
    Multiply by ``phase_space_volume(n)`` for the state density.
    """
    e = np.sort(np.asarray(levels, dtype=float))
    _check_distinct(e)
    if energy <= e[0] or energy >= e[-1]:
        return 0.0
    n = e.size - 1
    total = 0.0
    for k in range(n + 1):
        x = e[k] - energy
        if x <= 0:
            continue
        total += x ** (n - 1) / np.prod([e[k] - e[j] for j in range(n + 1) if j != k])
    return float(max(0.0, n * total))


def simplex_volume_fraction(levels: Sequence[float], energy: float) -> float:
    """Fraction of CP^n with H(x) <= energy."""
    e = np.sort(np.asarray(levels, dtype=float))
    _check_distinct(e)
    if energy <= e[0]:
        return 0.0
    if energy >= e[-1]:
        return 1.0
    n = e.size - 1
    total = 0.0
    for k in range(n + 1):
        x = e[k] - energy
        if x <= 0:
            continue
        total += x**n / np.prod([e[k] - e[j] for j in range(n + 1) if j != k])
    return float(min(1.0, max(0.0, 1.0 - total)))


# -- canonical ensemble ---------------------------------------------------------


def canonical_partition(h: HermitianObservable, beta: float, mc: McParams) -> EnsembleEstimate:
    """Z(beta) = V_n * <exp(-beta H(x))>_FS."""
    n = h.dim - 1
    shift = _energy_shift(h, beta)
    sw = sw2 = 0.0
    count = 0
    for z in mc.stream(h.dim):
        w = np.exp(-beta * (energies(h.entries, z) - shift))
        sw += float(w.sum())
        sw2 += float(w @ w)
        count += w.size
    mean = sw / count
    var = max(0.0, (sw2 - count * mean * mean) / (count - 1))
    scale = phase_space_volume(n) * math.exp(-beta * shift)
    return EnsembleEstimate(scale * mean, scale * math.sqrt(var / count), count, mc.seed, mc.chunks)


def _weighted_projector_estimate(h, mc, weight_fn, what: str) -> _Moments:
    acc = _Moments()
    for z in mc.stream(h.dim, block=1 << 14):
        e = energies(h.entries, z)
        w = weight_fn(e)
        f = np.concatenate([_projector_features(z), e[:, None]], axis=1)
        acc.add(w, f)
    ess = acc.ess()
    if ess < MIN_ESS:
        raise EstimationError(
            f"{what}: effective sample size {ess:.1f} is below {MIN_ESS:.0f}; "
            "increase samples or reduce |beta|"
        )
    return acc


def _density_estimate(acc: _Moments, dim: int, used: int, mc: McParams, ess=None) -> DensityEstimate:
    k = dim * dim
    m, se = acc.mean(), acc.std_error()
    raw = _matrix_from_features(m[: 2 * k], dim)
    raw_se = _matrix_from_features(se[: 2 * k], dim)
    est = EnsembleEstimate(raw, raw_se, used, mc.seed, mc.chunks, ess)
    energy = EnsembleEstimate(float(m[-1]), float(se[-1]), used, mc.seed, mc.chunks, ess)
    return DensityEstimate(DensityMatrix.nearest(raw), est, energy)


def canonical_density_matrix(h: HermitianObservable, beta: float, mc: McParams) -> DensityEstimate:
    """Density matrix of the canonical Gamma-distribution exp(-beta H(x)) / Z.

    Self-normalized importance sampling with the FS-uniform proposal. The
    returned ``energy`` is the ensemble mean of H(x).
    """
    shift = _energy_shift(h, beta)
    acc = _weighted_projector_estimate(
        h, mc, lambda e: np.exp(-beta * (e - shift)), "canonical density matrix"
    )
    return _density_estimate(acc, h.dim, acc.n, mc, acc.ess())


def mixture_density_matrix(h: HermitianObservable, beta: float, mc: McParams, shells: int = 200) -> DensityEstimate:
    """Canonical matrix rebuilt as a p(eps)-weighted mixture of microcanonical ones.

    The spectral range is cut into `shells` equal energy shells; each shell
    contributes its microcanonical projector average with weight
    Omega(eps_j) exp(-beta eps_j) evaluated at the shell center.
    """
    spec = h.spectrum
    edges = np.linspace(spec.e_min, spec.e_max, shells + 1)
    centers = 0.5 * (edges[1:] + edges[:-1])
    shift = _energy_shift(h, beta)

    def weights(e):
        j = np.clip(np.searchsorted(edges, e, side="right") - 1, 0, shells - 1)
        return np.exp(-beta * (centers[j] - shift))

    acc = _weighted_projector_estimate(h, mc, weights, "mixture density matrix")
    return _density_estimate(acc, h.dim, acc.n, mc, acc.ess())


def conventional_gibbs_dm(h: HermitianObservable, beta: float) -> DensityMatrix:
    """exp(-beta H) / tr exp(-beta H), the Boltzmann mixture of eigenprojectors."""
    spec = h.spectrum
    w = np.exp(-beta * (spec.eigenvalues - _energy_shift(h, beta)))
    w /= w.sum()
    v = spec.eigenvectors
    return DensityMatrix((v * w) @ v.conj().T)


# -- microcanonical ensemble ----------------------------------------------------


def _epanechnikov(u: np.ndarray, b: float) -> np.ndarray:
    x = u / b
    return np.where(np.abs(x) < 1.0, 0.75 * (1.0 - x * x) / b, 0.0)


def _reflected_kernel(e: np.ndarray, grid: np.ndarray, b: float, lo: float, hi: float) -> np.ndarray:
    # mirror images at the spectral edges keep all mass inside [lo, hi]
    d = e[:, None] - grid[None, :]
    k = _epanechnikov(d, b)
    k += _epanechnikov((2 * lo - e)[:, None] - grid[None, :], b)
    k += _epanechnikov((2 * hi - e)[:, None] - grid[None, :], b)
    return k


def _kde(h: HermitianObservable, grid: np.ndarray, mc: McParams, beta: float = 0.0) -> tuple[_Moments, float]:
    spec = h.spectrum
    b = mc.kernel_width(spec.spread)
    shift = _energy_shift(h, beta)
    acc = _Moments()
    for z in mc.stream(h.dim, block=1 << 13):
        e = energies(h.entries, z)
        w = np.exp(-beta * (e - shift)) if beta != 0 else np.ones_like(e)
        acc.add(w, _reflected_kernel(e, grid, b, spec.e_min, spec.e_max))
    return acc


def state_density(h: HermitianObservable, energy: float, mc: McParams) -> EnsembleEstimate:
    """Omega(E): kernel-smoothed phase-space volume per unit energy.

    An Epanechnikov kernel, reflected at both ends of the spectrum, stands
    in for delta(H(x) - E). Energies outside the spectrum give exactly zero.
    """
    spec = h.spectrum
    if energy < spec.e_min or energy > spec.e_max:
        return EnsembleEstimate(0.0, 0.0, 0, mc.seed, mc.chunks)
    acc = _kde(h, np.array([float(energy)]), mc)
    vol = phase_space_volume(h.dim - 1)
    n = acc.n
    m = float(acc.mean()[0])
    # unweighted: std error of a plain sample mean
    var = max(0.0, float(acc.sw2f2[0]) / n - m * m) * n / (n - 1)
    return EnsembleEstimate(vol * m, vol * math.sqrt(var / n), n, mc.seed, mc.chunks)


def volume_below(h: HermitianObservable, energy: float, mc: McParams) -> EnsembleEstimate:
    """W(E): phase-space volume of {x : H(x) <= E}."""
    vol = phase_space_volume(h.dim - 1)
    spec = h.spectrum
    if energy < spec.e_min:
        return EnsembleEstimate(0.0, 0.0, mc.samples, mc.seed, mc.chunks)
    if energy >= spec.e_max:
        return EnsembleEstimate(vol, 0.0, mc.samples, mc.seed, mc.chunks)
    hits = n = 0
    for z in mc.stream(h.dim):
        hits += int(np.count_nonzero(energies(h.entries, z) <= energy))
        n += z.shape[0]
    p = hits / n
    return EnsembleEstimate(vol * p, vol * math.sqrt(p * (1 - p) / n), n, mc.seed, mc.chunks)


def microcanonical_dm(h: HermitianObservable, energy: float, mc: McParams) -> DensityEstimate:
    """Average projector over the energy shell [E - dE/2, E + dE/2]."""
    spec = h.spectrum
    width = mc.shell(spec.spread)
    lo, hi = energy - width / 2, energy + width / 2
    if hi < spec.e_min or lo > spec.e_max:
        raise ValueError(f"shell [{lo}, {hi}] does not meet the spectrum [{spec.e_min}, {spec.e_max}]")
    acc = _Moments()
    for z in mc.stream(h.dim, block=1 << 15):
        e = energies(h.entries, z)
        sel = (e >= lo) & (e <= hi)
        if np.any(sel):
            f = np.concatenate([_projector_features(z[sel]), e[sel, None]], axis=1)
            acc.add(np.ones(f.shape[0]), f)
    if acc.n < MIN_SHELL_SAMPLES:
        raise EstimationError(
            f"only {acc.n} samples fell in the shell around E={energy}; "
            "widen the shell or draw more samples"
        )
    return _density_estimate(acc, h.dim, acc.n, mc)


@dataclass(frozen=True, eq=False)
class VolumeGradient:
    """Finite-difference derivatives of W(E) with respect to the Hamiltonian.

    ``entries[a, b]`` is dW/dH_ba assembled from the Hermitian directions;
    ``shift`` is dW/d(mean eigenvalue), the derivative under a uniform shift.
    """

    entries: np.ndarray
    shift: EnsembleEstimate
    h_step: float


def volume_derivatives(h: HermitianObservable, energy: float, mc: McParams, h_step: float = 1e-3) -> VolumeGradient:
    """Central differences of W(E) along Hermitian basis directions.

    Common random numbers: every perturbed W is counted on the same sample
    stream, so only samples whose energy crosses E under the perturbation
    contribute.
    """
    if not h_step > 0:
        raise ValueError("h_step must be positive")
    if h.spectrum.is_degenerate():
        raise DegenerateSpectrumError("volume-derivative route requires a nondegenerate spectrum")
    dim = h.dim
    diag = [(a, a) for a in range(dim)]
    off = [(a, b) for a in range(dim) for b in range(a + 1, dim)]
    ndir = 1 + len(diag) + 2 * len(off)
    s1 = np.zeros(ndir)
    s2 = np.zeros(ndir)
    n = 0
    for z in mc.stream(dim):
        e = energies(h.entries, z)
        pi_ab = [z[:, a] * z[:, b].conj() for a, b in off]
        # perturbation directions D evaluated on each sample: D(x) = tr(D Pi(x))
        d = [np.ones_like(e)]
        d += [np.abs(z[:, a]) ** 2 for a, _ in diag]
        d += [2 * p.real for p in pi_ab]
        d += [2 * p.imag for p in pi_ab]
        for i, di in enumerate(d):
            flip = (e + h_step * di <= energy).astype(float) - (e - h_step * di <= energy)
            s1[i] += flip.sum()
            s2[i] += flip @ flip
        n += e.size
    vol = phase_space_volume(dim - 1)
    mean = s1 / n
    se = np.sqrt(np.clip(s2 / n - mean**2, 0.0, None) / (n - 1))
    grad = vol * mean / (2 * h_step)
    grad_se = vol * se / (2 * h_step)

    g = np.zeros((dim, dim), dtype=complex)
    for i, (a, _) in enumerate(diag):
        g[a, a] = grad[1 + i]
    base = 1 + len(diag)
    for i, (a, b) in enumerate(off):
        # Pi_ab = (d/dRe + i d/dIm) / 2
        val = 0.5 * (grad[base + i] + 1j * grad[base + len(off) + i])
        g[a, b] = val
        g[b, a] = np.conj(val)
    shift = EnsembleEstimate(float(grad[0]), float(grad_se[0]), n, mc.seed, mc.chunks)
    return VolumeGradient(g, shift, h_step)


def microcanonical_dm_via_volume(h: HermitianObservable, energy: float, mc: McParams, h_step: float = 1e-3) -> DensityMatrix:
    """(dW/dHbar)^{-1} dW/dH, from finite differences of the volume below E."""
    grad = volume_derivatives(h, energy, mc, h_step)
    if grad.shift.value == 0.0:
        raise EstimationError(f"no samples cross E={energy} under the shift; the shell has zero measure")
    m = grad.entries / grad.shift.value
    tr = np.trace(m).real
    if tr <= 0:
        raise EstimationError("volume derivatives too noisy to form a density matrix")
    return DensityMatrix.nearest(m / tr)


# -- energy distributions and heat-bath composition ---------------------------


def canonical_energy_pdf(
    h: HermitianObservable, beta: float, mc: McParams, grid: np.ndarray | None = None, points: int = 201
) -> EnergyDensity:
    """p(eps) = Omega(eps) exp(-beta eps) / Z as a weighted kernel density."""
    spec = h.spectrum
    if grid is None:
        grid = np.linspace(spec.e_min, spec.e_max, points)
    grid = np.asarray(grid, dtype=float)
    acc = _kde(h, grid, mc, beta)
    if acc.ess() < MIN_ESS:
        raise EstimationError(
            f"canonical energy density: effective sample size {acc.ess():.1f} is below {MIN_ESS:.0f}"
        )
    dens = np.asarray(acc.mean())
    se = np.asarray(acc.std_error())
    total = float(np.trapezoid(dens, grid))
    return EnergyDensity(grid, dens / total, se / total)


def _require_compatible(a: EnergyDensity, b: EnergyDensity):
    if not (a.is_uniform() and b.is_uniform()):
        raise ValueError("energy grids must be uniformly spaced")
    if abs(a.spacing - b.spacing) > 1e-9 * max(a.spacing, b.spacing):
        raise ValueError(f"grid spacings differ: {a.spacing} vs {b.spacing}")


def _trapezoid_weights(n: int, spacing: float) -> np.ndarray:
    w = np.full(n, spacing)
    w[0] = w[-1] = spacing / 2
    return w


def convolve_densities(omega1: EnergyDensity, omega2: EnergyDensity) -> EnergyDensity:
    """State density of the composite system: int Omega1(E - eps) Omega2(eps) d eps."""
    _require_compatible(omega1, omega2)
    d = omega1.spacing
    conv = np.convolve(omega1.density, omega2.density * _trapezoid_weights(omega2.grid.size, d))
    grid = omega1.grid[0] + omega2.grid[0] + d * np.arange(conv.size)
    return EnergyDensity(grid, conv)


class BathComposition(NamedTuple):
    omega_total: float  # Omega_{1.2}(E_total)
    conditional: EnergyDensity  # p(E_2) on omega2's grid


def bath_composition(omega1: EnergyDensity, omega2: EnergyDensity, e_total: float) -> BathComposition:
    """Energy distribution of system II given the combined energy E_total.

    p(E2) = Omega1(E_total - E2) Omega2(E2) / Omega_{1.2}(E_total), with the
    convolution integral done by the trapezoidal rule on omega2's grid.
    """
    _require_compatible(omega1, omega2)
    g2 = omega2.grid
    integrand = omega1(e_total - g2) * omega2.density
    total = float(np.trapezoid(integrand, g2))
    if total <= 0:
        raise ValueError(f"E_total={e_total} is outside the support of the composite system")
    return BathComposition(total, EnergyDensity(g2, integrand / total))


def log_derivative(omega: EnergyDensity, energy: float, step: float | None = None) -> float:
    """d ln Omega / dE at `energy`: the microcanonical inverse temperature."""
    step = omega.spacing if step is None else step
    lo, hi = omega(energy - step), omega(energy + step)
    if lo <= 0 or hi <= 0:
        raise ValueError(f"density vanishes near E={energy}")
    return float((math.log(hi) - math.log(lo)) / (2 * step))


# -- thermodynamic summaries --------------------------------------------------


class ThermoRow(NamedTuple):
    beta: float
    Z: float
    E: float
    C: float
    S: float  # ln(Omega(E) * delta_E)
    S_canonical: float  # ln Z + beta E
    beta_check: float  # dS_canonical/dE, equals beta
    beta_micro: float  # dS/dE of the Boltzmann entropy at E
    delta_E: float


def thermodynamics(
    h: HermitianObservable, beta_grid: Sequence[float], mc: McParams | None = None, k: float = 1.0
) -> list[ThermoRow]:
    """Z, E, C and entropies over a grid of inverse temperatures.

    Nondegenerate spectra use the closed-form simplex oracles; degenerate
    ones fall back to Monte Carlo with one common sample set, so ln Z is a
    smooth function of beta and finite differences stay meaningful.
    """
    betas = np.asarray(beta_grid, dtype=float)
    if betas.ndim != 1 or betas.size == 0 or np.any(betas <= 0):
        raise ValueError("beta grid must be a nonempty list of positive values")
    if np.any(np.diff(betas) <= 0):
        raise ValueError("beta grid must be strictly increasing")
    if betas.size > 1 and np.any(np.diff(betas) > 0.1 * betas[:-1]):
        raise ValueError("beta grid too coarse: spacing must not exceed 0.1 * beta")

    mc = mc or McParams()
    spec = h.spectrum
    levels = spec.eigenvalues
    n = h.dim - 1
    log_vol = math.log(phase_space_volume(n))
    delta_e = mc.shell(spec.spread)

    if not spec.is_degenerate():

        def log_z(b):
            return log_vol + log_simplex_exp_moment(levels, b)

        def omega(e):
            return math.exp(log_vol) * simplex_state_density(levels, e)

        eta = 1e-4 * spec.spread
    else:
        e_samples = np.concatenate([energies(h.entries, z) for z in mc.stream(h.dim)])
        e0 = spec.e_min
        grid_pts = np.linspace(spec.e_min, spec.e_max, 401)
        kde = _reflected_kernel_mean(e_samples, grid_pts, mc.kernel_width(spec.spread), spec.e_min, spec.e_max)
        omega_tab = EnergyDensity(grid_pts, math.exp(log_vol) * kde)

        def log_z(b):
            x = -b * (e_samples - e0)
            return log_vol - b * e0 + math.log(np.mean(np.exp(x)))

        def omega(e):
            return float(omega_tab(e))

        eta = mc.kernel_width(spec.spread)

    def energy_at(b):
        d = 1e-4 * b
        return -(log_z(b + d) - log_z(b - d)) / (2 * d)

    rows = []
    for b in betas:
        lz = log_z(b)
        e = energy_at(b)
        d = 1e-3 * b
        c = k * b * b * (log_z(b + d) - 2 * lz + log_z(b - d)) / (d * d)
        om = omega(e)
        s = math.log(om * delta_e) if om > 0 else -math.inf
        lo, hi = omega(e - eta), omega(e + eta)
        beta_micro = (math.log(hi) - math.log(lo)) / (2 * eta) if lo > 0 and hi > 0 else math.nan
        s_can = lz + b * e
        d2 = 1e-3 * b
        e_hi, e_lo = energy_at(b + d2), energy_at(b - d2)
        s_hi = log_z(b + d2) + (b + d2) * e_hi
        s_lo = log_z(b - d2) + (b - d2) * e_lo
        beta_check = (s_hi - s_lo) / (e_hi - e_lo)
        rows.append(ThermoRow(float(b), math.exp(lz), e, c, s, s_can, beta_check, beta_micro, delta_e))
    return rows


def _reflected_kernel_mean(e, grid, b, lo, hi, block: int = 1 << 13) -> np.ndarray:
    total = np.zeros(grid.size)
    for i in range(0, e.size, block):
        total += _reflected_kernel(e[i : i + block], grid, b, lo, hi).sum(axis=0)
    return total / e.size
