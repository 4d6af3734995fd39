"""semiphase: semiclassical Schrodinger propagation and phase-space measures.

Core pieces: periodic spectral grids, split-operator propagators for scalar /
matrix / weakly nonlinear dynamics, Wigner and Husimi diagnostics with
two-scale statistics, Hamiltonian ray and particle transport with
avoided-crossing branching, the reduced Landau-Zener model, and 1D scattering
oracles. Named experiments live in semiphase.scenarios and behind the
`semiphase` command-line tool.
"""

__version__ = "0.1.0"

from .fields import (
    ConicalPotential,
    EvenPotential1D,
    GaussianProfile,
    ScalarPotential,
    TimeDependentPotential,
    WaveField,
    apply_projector,
    build_wave_packet,
    build_wkb_data,
    eigenframe_at,
    harmonic_potential,
)
from .grids import SpatialGrid, forward_spectral, inverse_spectral, l2_norm, l2_norm_sq
from .phasespace import (
    Observable,
    PhaseSpaceDensity,
    TwoScaleHistogram,
    density_moment,
    eps_oscillatory_fraction,
    gaussian_observable,
    husimi,
    mode_masses,
    pair_observable,
    two_scale_histogram,
    wigner_slice,
)
from .propagate import (
    EvolutionResult,
    HamiltonianSpec,
    Nonlinearity,
    StrangPropagator,
    kinetic_half_step,
    nonlinear_step,
    potential_step_matrix,
    potential_step_scalar,
    strang_evolve,
)
from .rays import (
    CrossingGeometry,
    ParticleEnsemble,
    RayPotential,
    TwoModeDynamics,
    detect_crossing,
    flow_mode,
    flow_scalar,
    solve_eikonal,
    transfer_probability,
    transport_ensemble,
    wkb_field,
)
from .crossing import (
    CrossingExperimentConfig,
    NormalFormState,
    PacketSpec,
    TransferMatrix,
    extract_transfer,
    measure_transfer_curve,
    predict_out_masses,
    run_crossing_experiment,
    solve_normal_form,
    transfer_amplitude_theory,
)
from .scattering import (
    ScatteringCoefficients,
    ScatteringResult,
    caustic_profile_map,
    first_order_scattering,
    nls_scattering,
    potential_scattering_1d,
    transfer_matrix_reflection,
)
