import math

import numpy as np
import pytest
from scipy import integrate

from gammaensemble.ensembles import (
    EnergyDensity,
    McParams,
    bath_composition,
    canonical_density_matrix,
    canonical_energy_pdf,
    canonical_partition,
    conventional_gibbs_dm,
    convolve_densities,
    log_derivative,
    log_simplex_exp_moment,
    microcanonical_dm,
    microcanonical_dm_via_volume,
    mixture_density_matrix,
    phase_space_volume,
    simplex_exp_moment,
    simplex_populations,
    simplex_state_density,
    simplex_volume_fraction,
    state_density,
    thermodynamics,
    volume_below,
    volume_derivatives,
)
from gammaensemble.errors import DegenerateSpectrumError, EstimationError
from gammaensemble.geometry import HermitianObservable, energies, sample_fs_uniform

# Frozen oracles: simplex averages of exp(-sum p_k E_k) computed by adaptive
# quadrature over the simplex (scipy dblquad / tplquad, tolerance 1e-13).
QUAD_DIM3 = 0.399576400893728  # levels (0, 1, 2)
QUAD_DIM4 = 0.21266513278985086  # levels (0, 1, 2, 4)
QUAD_POPS_DIM3 = (0.4206735942077923, 0.3226062253230682, 0.25672018046913947)

MC = McParams(samples=200_000, seed=7)


def within(est, ref, k=3.0):
    return abs(est.value - ref) <= k * est.std_error


def test_volume_convention():
    assert phase_space_volume(1) == pytest.approx(4 * math.pi)
    assert phase_space_volume(2) == pytest.approx(8 * math.pi**2)


def test_mc_params_validation():
    with pytest.raises(ValueError):
        McParams(samples=10)
    with pytest.raises(ValueError):
        McParams(shell_width=0.0)
    assert McParams().shell(2.0) == pytest.approx(0.02)
    assert McParams(bandwidth=0.1).kernel_width(2.0) == 0.1


# -- closed-form oracles ------------------------------------------------------


def test_oracle_two_level():
    # mean of exp(-beta E) over E uniform on [-1, 1] is sinh(beta)/beta
    assert simplex_exp_moment([-1, 1], 1.0) == pytest.approx(math.sinh(1.0), rel=1e-13)
    assert simplex_exp_moment([-1, 1], 3.0) == pytest.approx(math.sinh(3.0) / 3.0, rel=1e-13)


def test_oracle_against_quadrature():
    assert simplex_exp_moment([0, 1, 2], 1.0) == pytest.approx(QUAD_DIM3, rel=1e-10)
    assert simplex_exp_moment([0, 1, 2, 4], 1.0) == pytest.approx(QUAD_DIM4, rel=1e-10)
    assert simplex_populations([0, 1, 2], 1.0) == pytest.approx(QUAD_POPS_DIM3, rel=1e-9)


def test_oracle_quadrature_other_beta():
    e = np.array([0.0, 0.7, 1.9])

    def f(p1, p0):
        return math.exp(-2.5 * (p0 * e[0] + p1 * e[1] + (1 - p0 - p1) * e[2]))

    ref = 2 * integrate.dblquad(f, 0, 1, 0, lambda p0: 1 - p0, epsabs=1e-13, epsrel=1e-12)[0]
    assert simplex_exp_moment(e, 2.5) == pytest.approx(ref, rel=1e-9)


def test_oracle_order_and_shift_invariance():
    a = simplex_exp_moment([2, 0, 1], 1.0)
    assert a == pytest.approx(QUAD_DIM3, rel=1e-12)
    # shifting all levels by c multiplies by exp(-beta c)
    assert simplex_exp_moment([5, 6, 7], 1.0) == pytest.approx(QUAD_DIM3 * math.exp(-5), rel=1e-10)


def test_oracle_routes_agree_across_switch():
    # gap*beta straddling the partial-fraction threshold
    lv = [0.0, 1.0, 2.0, 3.5]
    below = log_simplex_exp_moment(lv, 0.0999)
    above = log_simplex_exp_moment(lv, 0.1001)
    mid = log_simplex_exp_moment(lv, 0.1)
    assert below < mid < above or below > mid > above
    assert abs(above - below) < 1e-3


def test_oracle_high_temperature_limit():
    assert simplex_exp_moment([0, 1, 2], 1e-12) == pytest.approx(1.0, abs=1e-11)
    assert simplex_exp_moment([0, 1, 2], 0.0) == 1.0
    assert np.allclose(simplex_populations([0, 1, 2], 0.0), 1 / 3)


def test_oracle_large_beta_stable():
    v = log_simplex_exp_moment([0, 1, 2], 500.0)
    # dominated by the ground corner: n! / (beta^2 * 1 * 2)
    assert v == pytest.approx(math.log(2 / (500.0**2 * 2)), abs=1e-2)


def test_oracle_refuses_degenerate():
    with pytest.raises(DegenerateSpectrumError):
        simplex_exp_moment([0, 0, 1], 1.0)
    with pytest.raises(DegenerateSpectrumError):
        simplex_populations([1, 1], 1.0)


def test_populations_ordered_like_input():
    p = simplex_populations([2, 0, 1], 1.0)
    assert p == pytest.approx([QUAD_POPS_DIM3[2], QUAD_POPS_DIM3[0], QUAD_POPS_DIM3[1]], rel=1e-9)


def test_state_density_oracle_integrates():
    lv = [0.0, 1.0, 2.0, 4.0]
    tot = integrate.quad(lambda e: simplex_state_density(lv, e), 0, 4, points=[1, 2], limit=200)[0]
    assert tot == pytest.approx(1.0, abs=1e-9)
    assert simplex_volume_fraction(lv, 1.5) == pytest.approx(
        integrate.quad(lambda e: simplex_state_density(lv, e), 0, 1.5, points=[1])[0], abs=1e-9
    )


def test_state_density_oracle_against_mc():
    lv = [0.0, 1.0, 2.0]
    e = energies(np.diag(lv), sample_fs_uniform(3, 200_000, seed=3))
    assert np.mean(e <= 0.8) == pytest.approx(simplex_volume_fraction(lv, 0.8), abs=4e-3)
    hist, edges = np.histogram(e, bins=20, range=(0, 2), density=True)
    mids = 0.5 * (edges[1:] + edges[:-1])
    ref = np.array([simplex_state_density(lv, m) for m in mids])
    assert np.max(np.abs(hist - ref)) < 0.05


# -- canonical ---------------------------------------------------------------


def test_partition_two_level():
    est = canonical_partition(HermitianObservable.from_levels([-1, 1]), 1.0, MC)
    assert within(est, 4 * math.pi * math.sinh(1.0))
    assert est.samples_used == MC.samples


def test_partition_negative_beta():
    h = HermitianObservable.from_levels([0.0, 1.0, 2.0])
    est = canonical_partition(h, -1.0, MC)
    assert within(est, phase_space_volume(2) * simplex_exp_moment([0, 1, 2], -1.0))


def test_partition_chunks_reproducible():
    h = HermitianObservable.from_levels([0.0, 1.0, 2.0])
    mc = McParams(samples=50_000, seed=1, chunks=4)
    a, b = canonical_partition(h, 1.0, mc), canonical_partition(h, 1.0, mc)
    assert a.value == b.value and a.std_error == b.std_error


def test_canonical_dm_matches_oracle_nondiagonal_basis():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    h = HermitianObservable(q @ np.diag([0.0, 1.0, 2.0]) @ q.conj().T)
    res = canonical_density_matrix(h, 1.0, MC)
    pops = res.matrix.populations(h)
    ref = simplex_populations([0, 1, 2], 1.0)
    se = np.abs(h.spectrum.eigenvectors.conj().T @ res.estimate.std_error.real @ h.spectrum.eigenvectors).diagonal()
    assert np.all(np.abs(pops - ref) < 5 * np.maximum(se, 1e-3))
    # off-diagonal in the eigenbasis vanish
    off = res.matrix.in_basis(h) - np.diag(np.diag(res.matrix.in_basis(h)))
    assert np.max(np.abs(off)) < 0.01


def test_canonical_dm_ess_guard():
    h = HermitianObservable.from_levels([0.0, 1.0, 2.0])
    with pytest.raises(EstimationError, match="effective sample size"):
        canonical_density_matrix(h, 5000.0, McParams(samples=2000))


def test_gibbs_dm():
    rho = conventional_gibbs_dm(HermitianObservable.from_levels([-1, 1]), 1.0)
    assert rho.populations()[0] == pytest.approx(1 / (1 + math.exp(-2)))
    huge = conventional_gibbs_dm(HermitianObservable.from_levels([-1, 1]), 1e4)
    assert huge.populations()[0] == 1.0


def test_gamma_less_polarized_than_gibbs():
    h = HermitianObservable.from_levels([0.0, 1.0, 2.0])
    for b in (0.5, 1, 3):
        assert simplex_populations([0, 1, 2], b)[0] < conventional_gibbs_dm(h, b).populations()[0]


# -- microcanonical --------------------------------------------------------------


def test_state_density_spin_is_flat():
    h = HermitianObservable.from_levels([-1, 1])
    for e in (-0.99, 0.0, 0.6):
        est = state_density(h, e, MC)
        assert within(est, 2 * math.pi, 4)
    assert state_density(h, 1.5, MC).value == 0.0


def test_state_density_dim3():
    h = HermitianObservable.from_levels([0.0, 1.0, 2.0])
    est = state_density(h, 0.5, McParams(samples=200_000, seed=2, bandwidth=0.01))
    ref = phase_space_volume(2) * simplex_state_density([0, 1, 2], 0.5)
    assert abs(est.value - ref) < 4 * est.std_error + 0.01 * ref


def test_volume_below():
    h = HermitianObservable.from_levels([0.0, 1.0, 2.0])
    est = volume_below(h, 0.8, MC)
    assert within(est, phase_space_volume(2) * simplex_volume_fraction([0, 1, 2], 0.8))
    assert volume_below(h, -1, MC).value == 0.0
    assert volume_below(h, 3, MC).value == phase_space_volume(2)


@pytest.mark.parametrize("e", [-0.5, 0.0, 0.5])
def test_microcanonical_two_state(e):
    h = HermitianObservable.from_levels([-1, 1])
    res = microcanonical_dm(h, e, MC)
    se = res.estimate.std_error.real
    # levels (-1, 1) in the standard basis: ground first
    assert abs(res.estimate.value[0, 0].real - (1 - e) / 2) < 3 * se[0, 0]
    assert abs(res.energy.value - e) < 0.01


def test_microcanonical_too_few_samples():
    h = HermitianObservable.from_levels([-1, 1])
    with pytest.raises(EstimationError):
        microcanonical_dm(h, 0.0, McParams(samples=1000, shell_width=1e-5))
    with pytest.raises(ValueError):
        microcanonical_dm(h, 3.0, MC)


def test_volume_route_shift_equals_state_density():
    h = HermitianObservable.from_levels([0.0, 1.0, 2.0])
    g = volume_derivatives(h, 0.7, McParams(samples=400_000, seed=4), h_step=2e-3)
    ref = phase_space_volume(2) * simplex_state_density([0, 1, 2], 0.7)
    assert abs(g.shift.value) == pytest.approx(ref, rel=0.05)


def test_volume_route_matches_shell():
    h = HermitianObservable(np.array([[-0.5, 0.5j], [-0.5j, 0.5]]))
    mc = McParams(samples=400_000, seed=5)
    a = microcanonical_dm_via_volume(h, 0.2, mc, h_step=5e-3)
    b = microcanonical_dm(h, 0.2, mc).matrix
    assert np.max(np.abs(a.entries - b.entries)) < 0.03


def test_volume_route_refuses_degenerate():
    with pytest.raises(DegenerateSpectrumError):
        volume_derivatives(HermitianObservable.from_levels([0, 0, 1]), 0.5, MC)


def test_mixture_identity():
    h = HermitianObservable.from_levels([0.0, 1.0, 2.0])
    mix = mixture_density_matrix(h, 1.0, MC, shells=400)
    ref = simplex_populations([0, 1, 2], 1.0)
    assert np.max(np.abs(mix.matrix.populations() - ref)) < 0.005


# -- energy densities and bath ----------------------------------------------------


def test_energy_pdf_two_level():
    h = HermitianObservable.from_levels([-1, 1])
    pdf = canonical_energy_pdf(h, 1.0, MC, points=101)
    assert pdf.integral() == pytest.approx(1.0)
    exact = np.exp(-pdf.grid) / (2 * math.sinh(1.0))
    # reflection flattens the slope within one bandwidth (0.04) of each edge
    inner = np.abs(pdf.grid) < 0.95
    assert np.max(np.abs(pdf.density - exact)[inner]) < 0.02
    assert np.max(np.abs(pdf.density - exact)) < 0.05
    assert pdf.mean() == pytest.approx(1 / 1.0 - 1 / math.tanh(1.0), abs=3e-3)


def test_energy_density_container():
    d = EnergyDensity(np.linspace(0, 1, 11), np.ones(11))
    assert d.is_uniform() and d.spacing == pytest.approx(0.1)
    assert d.integral() == pytest.approx(1.0)
    assert d(2.0) == 0.0
    assert d.to_csv().splitlines()[0] == "energy,density,std_error"
    with pytest.raises(ValueError):
        EnergyDensity(np.array([0, 0]), np.ones(2))
    with pytest.raises(ValueError):
        EnergyDensity(np.array([0, 1]), np.array([1, -1]))


def test_convolution_of_uniforms_is_triangle():
    g = np.linspace(-1, 1, 2001)
    u = EnergyDensity(g, np.full(g.size, 0.5))
    tri = convolve_densities(u, u)
    assert tri.grid[0] == pytest.approx(-2) and tri.grid[-1] == pytest.approx(2)
    assert tri(0.0) == pytest.approx(0.5, abs=1e-3)
    assert tri(1.0) == pytest.approx(0.25, abs=1e-3)
    assert tri.integral() == pytest.approx(1.0, abs=1e-3)


def test_convolution_grid_mismatch():
    a = EnergyDensity(np.linspace(0, 1, 11), np.ones(11))
    b = EnergyDensity(np.linspace(0, 1, 21), np.ones(21))
    with pytest.raises(ValueError):
        convolve_densities(a, b)


def test_bath_exponential_limit():
    # Omega_1 exactly exponential: conditional law is exactly Boltzmann
    g = np.linspace(-5, 5, 2001)
    bath = EnergyDensity(g, np.exp(0.8 * g))
    small = EnergyDensity(np.linspace(-1, 1, 401), np.full(401, 2 * math.pi))
    comp = bath_composition(bath, small, 0.0)
    assert log_derivative(bath, 0.0) == pytest.approx(0.8, rel=1e-5)
    q = np.exp(-0.8 * small.grid)
    q /= np.trapezoid(q, small.grid)
    assert np.max(np.abs(comp.conditional.density - q)) < 1e-4


def test_bath_outside_support():
    g = np.linspace(-1, 1, 101)
    u = EnergyDensity(g, np.ones(101))
    with pytest.raises(ValueError):
        bath_composition(u, u, 5.0)


# -- thermodynamics ---------------------------------------------------------------


def test_thermodynamics_closed_form_two_level():
    h = HermitianObservable.from_levels([-1, 1])
    rows = thermodynamics(h, [0.95, 1.0, 1.05])
    r = rows[1]
    assert r.Z == pytest.approx(4 * math.pi * math.sinh(1.0), rel=1e-10)
    assert r.E == pytest.approx(1 - 1 / math.tanh(1.0), abs=1e-7)
    assert r.C == pytest.approx(1 - 1 / math.sinh(1.0) ** 2, abs=1e-5)
    assert r.beta_check == pytest.approx(1.0, abs=1e-6)
    # flat state density: Boltzmann entropy has zero slope
    assert r.beta_micro == pytest.approx(0.0, abs=1e-6)


def test_thermodynamics_degenerate_uses_mc():
    h = HermitianObservable.from_levels([0.0, 0.0, 1.0])
    rows = thermodynamics(h, [1.0], McParams(samples=100_000, seed=1))
    # degenerate limit of the oracle
    ref = simplex_exp_moment([0.0, 1e-5, 1.0], 1.0) * phase_space_volume(2)
    assert rows[0].Z == pytest.approx(ref, rel=0.01)
    assert rows[0].beta_check == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("grid", [[1.0, 2.0], [], [-1.0], [1.0, 0.95]])
def test_thermodynamics_grid_checks(grid):
    with pytest.raises(ValueError):
        thermodynamics(HermitianObservable.from_levels([-1, 1]), grid)
