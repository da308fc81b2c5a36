"""Microcanonical and canonical ensembles on the quantum phase space CP^n."""

__version__ = "0.1.0"

from .errors import DegenerateSpectrumError, EstimationError, HamiltonianFormatError
from .geometry import (
    DensityMatrix,
    HermitianObservable,
    PureState,
    Spectrum,
    eigendecompose,
    expectation,
    fs_angle,
    observable_variance,
    projector,
    sample_fs_uniform,
    transition_probability,
)
from .ensembles import (
    EnergyDensity,
    EnsembleEstimate,
    McParams,
    canonical_density_matrix,
    canonical_partition,
    conventional_gibbs_dm,
    microcanonical_dm,
    microcanonical_dm_via_volume,
    state_density,
    thermodynamics,
    volume_below,
)
from .flow import Trajectory, evolve_exact, evolve_numeric, phase_speed
from .twostate import spin_conventional_closed_forms, spin_gamma_closed_forms, spin_hamiltonian
