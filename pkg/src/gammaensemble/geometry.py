"""
Complex projective space primitives.

Pure states are points of CP^n stored as normalized amplitude vectors; the
global phase is carried along but never used by any physical quantity.
Distances use the Fubini-Study normalization in which orthogonal states are
a distance pi apart, so CP^1 is the unit sphere.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np

__all__ = [
    "PureState",
    "HermitianObservable",
    "Spectrum",
    "DensityMatrix",
    "fs_angle",
    "transition_probability",
    "projector",
    "expectation",
    "observable_variance",
    "eigendecompose",
    "sample_fs_uniform",
    "iter_fs_uniform",
    "chunk_sizes",
    "energies",
    "HERMITIAN_TOL",
    "SPECTRAL_TOL",
]

HERMITIAN_TOL = 1e-12
SPECTRAL_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    """A point of CP^n, i.e. a ray of C^{n+1}.

    The amplitudes are normalized on construction. Use :meth:`same_point`
    rather than ``==`` to compare states, since states differing by a global
    phase are the same point.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.amplitudes, dtype=complex)
        if z.ndim != 1:
            raise ValueError("amplitudes must be one-dimensional")
        if z.size < 2:
            raise ValueError(f"dimension must be at least 2, got {z.size}")
        norm = np.linalg.norm(z)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("amplitude vector must be finite and nonzero")
        object.__setattr__(self, "amplitudes", _readonly(z / norm))

    @classmethod
    def basis(cls, dim: int, k: int) -> "PureState":
        z = np.zeros(dim, dtype=complex)
        z[k] = 1.0
        return cls(z)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def canonical(self) -> "PureState":
        """Same point with the first nonzero amplitude made real and positive."""
        z = self.amplitudes
        k = int(np.argmax(np.abs(z) > 1e-15))
        return PureState(z * (abs(z[k]) / z[k]))

    def same_point(self, other: "PureState", tol: float = 1e-10) -> bool:
        return transition_probability(self, other) >= 1.0 - tol

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __repr__(self):
        return f"PureState({np.array2string(self.amplitudes, precision=6)})"


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are the eigenstates y_k

    @property
    def mean_eigenvalue(self) -> float:
        return float(np.sum(self.eigenvalues) / self.eigenvalues.size)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def e_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def e_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def spread(self) -> float:
        return self.e_max - self.e_min

    def state(self, k: int) -> PureState:
        return PureState(self.eigenvectors[:, k])

    def min_gap(self) -> float:
        if self.dim < 2:
            return math.inf
        return float(np.min(np.diff(self.eigenvalues)))

    def is_degenerate(self, rtol: float = 1e-9) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.eigenvalues))))
        return self.min_gap() <= rtol * scale

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True, eq=False)
class HermitianObservable:
    """Hermitian operator on C^{n+1}; Hamiltonians carry energy units."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"observable must be a square matrix, got shape {a.shape}")
        if a.shape[0] < 2:
            raise ValueError("observable dimension must be at least 2")
        if not np.all(np.isfinite(a)):
            raise ValueError("observable entries must be finite")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL * scale:
            raise ValueError("observable is not Hermitian")
        object.__setattr__(self, "entries", _readonly(0.5 * (a + a.conj().T)))

    @classmethod
    def from_levels(cls, levels) -> "HermitianObservable":
        """Diagonal observable whose eigenbasis is the standard basis."""
        return cls(np.diag(np.asarray(levels, dtype=float)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def spectrum(self) -> Spectrum:
        return eigendecompose(self)

    def __repr__(self):
        return f"HermitianObservable(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {a.shape}")
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        a = 0.5 * (a + a.conj().T)
        if abs(np.trace(a).real - 1.0) > SPECTRAL_TOL:
            raise ValueError(f"density matrix trace is {np.trace(a).real!r}, not 1")
        if np.linalg.eigvalsh(a)[0] < -SPECTRAL_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "entries", _readonly(a))

    @classmethod
    def nearest(cls, matrix) -> "DensityMatrix":
        """Project onto density matrices: Hermitize, clip negative eigenvalues, renormalize."""
        a = np.asarray(matrix, dtype=complex)
        a = 0.5 * (a + a.conj().T)
        w, v = np.linalg.eigh(a)
        w = np.clip(w, 0.0, None)
        if w.sum() <= 0:
            raise ValueError("matrix has no positive part to project onto")
        w /= w.sum()
        return cls((v * w) @ v.conj().T)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def populations(self, observable: HermitianObservable | None = None) -> np.ndarray:
        """Diagonal in the eigenbasis of `observable` (ascending energy), or as stored."""
        if observable is None:
            return np.diag(self.entries).real.copy()
        v = observable.spectrum.eigenvectors
        return np.einsum("ak,ab,bk->k", v.conj(), self.entries, v).real

    def in_basis(self, observable: HermitianObservable) -> np.ndarray:
        v = observable.spectrum.eigenvectors
        return v.conj().T @ self.entries @ v

    def expectation(self, observable: HermitianObservable) -> float:
        return float(np.trace(observable.entries @ self.entries).real)

    def __repr__(self):
        return f"DensityMatrix({np.array2string(self.entries, precision=6)})"


def _check_dims(a: int, b: int):
    if a != b:
        raise ValueError(f"dimension mismatch: {a} vs {b}")


def transition_probability(x: PureState, y: PureState) -> float:
    """|<x|y>|^2 for normalized states."""
    _check_dims(x.dim, y.dim)
    k = abs(np.vdot(x.amplitudes, y.amplitudes)) ** 2
    return float(min(1.0, k))


def fs_angle(x: PureState, y: PureState) -> float:
    """Fubini-Study distance theta in [0, pi], with kappa = cos^2(theta/2).

    Computed as 2*atan2(|x_perp|, |<y|x>|) so that nearby states keep full
    relative precision.
    """
    _check_dims(x.dim, y.dim)
    ov = np.vdot(y.amplitudes, x.amplitudes)
    perp = np.linalg.norm(x.amplitudes - ov * y.amplitudes)
    return float(2.0 * math.atan2(perp, abs(ov)))


def projector(x: PureState) -> DensityMatrix:
    z = x.amplitudes
    return DensityMatrix(np.outer(z, z.conj()))


def expectation(a: HermitianObservable, x: PureState) -> float:
    """tr(A Pi(x)); for a Hamiltonian this is the phase-space function H(x)."""
    _check_dims(a.dim, x.dim)
    z = x.amplitudes
    return float(np.vdot(z, a.entries @ z).real)


def observable_variance(a: HermitianObservable, x: PureState) -> float:
    _check_dims(a.dim, x.dim)
    z = x.amplitudes
    az = a.entries @ z
    # ||(A - <A>) z||^2 avoids the cancellation in <A^2> - <A>^2
    r = az - np.vdot(z, az).real * z
    return float(np.vdot(r, r).real)


def energies(matrix: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    """Vectorized expectation values for a batch of normalized rows."""
    return np.einsum("na,ab,nb->n", amplitudes.conj(), matrix, amplitudes, optimize=True).real


def eigendecompose(a: HermitianObservable) -> Spectrum:
    """Ascending eigenvalues with phase-fixed, deterministically ordered eigenvectors.

    Each eigenvector is phase-normalized (first significant entry real
    positive). Within a group of tied eigenvalues the vectors are ordered
    lexicographically by the (real, imag) parts of their entries.
    """
    m = np.asarray(a.entries if isinstance(a, HermitianObservable) else a, dtype=complex)
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(m)))):
        raise ValueError("cannot eigendecompose a non-Hermitian matrix")
    w, v = np.linalg.eigh(m)
    for k in range(v.shape[1]):
        col = v[:, k]
        j = int(np.argmax(np.abs(col) > 1e-12))
        v[:, k] = col * (abs(col[j]) / col[j])

    scale = max(1.0, float(np.max(np.abs(w))))
    order = []
    start = 0
    for stop in range(1, w.size + 1):
        if stop == w.size or w[stop] - w[start] > 1e-12 * scale:
            group = list(range(start, stop))
            group.sort(key=lambda k: tuple(c for z in v[:, k] for c in (-z.real, -z.imag)))
            order.extend(group)
            start = stop
    v = v[:, order]
    w = w[order]

    spec = Spectrum(eigenvalues=_readonly(w), eigenvectors=_readonly(v))
    if np.max(np.abs(spec.reconstruct() - m)) > SPECTRAL_TOL * scale:
        raise ArithmeticError("eigendecomposition residual exceeds tolerance")
    return spec


# -- Fubini-Study uniform sampling ------------------------------------------


def chunk_sizes(count: int, chunks: int) -> list[int]:
    base, extra = divmod(count, chunks)
    return [base + (1 if i < extra else 0) for i in range(chunks)]


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _draw(rng: np.random.Generator, dim: int, n: int) -> np.ndarray:
    g = rng.standard_normal((n, 2 * dim))
    z = g[:, :dim] + 1j * g[:, dim:]
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z


def _validate_sampling(dim, count, chunks):
    if dim < 2:
        raise ValueError(f"dim must be at least 2, got {dim}")
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if chunks < 1:
        raise ValueError(f"chunks must be positive, got {chunks}")


def iter_fs_uniform(
    dim: int, count: int, seed: int, chunks: int = 1, block: int = 1 << 16
) -> Iterator[np.ndarray]:
    """Yield FS-uniform amplitude rows in blocks of at most `block` rows.

    Chunk i draws from its own stream seeded by (seed, i); blocks follow
    chunk order, so the concatenation does not depend on `block`.
    """
    _validate_sampling(dim, count, chunks)
    for i, n in enumerate(chunk_sizes(count, chunks)):
        rng = _chunk_rng(seed, i)
        while n > 0:
            m = min(n, block)
            yield _draw(rng, dim, m)
            n -= m


def sample_fs_uniform(
    dim: int, count: int, seed: int, chunks: int = 1, workers: int = 1
) -> np.ndarray:
    """Draw `count` states uniformly from CP^{dim-1}.

    Returns an array of shape (count, dim) whose rows are normalized
    amplitude vectors. Complex Gaussian vectors are normalized, which gives
    the unique unitarily invariant measure. With ``workers > 1`` the chunks
    are generated on a thread pool; the output is bit-identical to the
    serial result.
    """
    _validate_sampling(dim, count, chunks)
    sizes = chunk_sizes(count, chunks)

    def one(i):
        return _draw(_chunk_rng(seed, i), dim, sizes[i])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(chunks)))
    else:
        parts = [one(i) for i in range(chunks)]
    return np.concatenate(parts, axis=0)
