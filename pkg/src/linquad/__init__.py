"""Gaussian and quasi-Gaussian states under linear constraints and quadratic Hamiltonians."""
from .symplectic import (
    ConstraintPlane,
    GaugeSurface,
    Subspace,
    find_gauge_surface,
    is_isotropic,
    omega_matrix,
    pairing_constant,
    skew_complement,
    standard_form,
    symplectic_form,
    triple_decompose,
)
from .polynomial import DegreeCapError, Polynomial
from .states import (
    GaussianState,
    InvalidStateError,
    QuasiGaussianState,
    make_gaussian,
    omega_op_apply,
    omega_product_apply,
    quadratic_op_apply,
    weyl_apply,
)
from .germs import (
    ComplexGerm,
    GermError,
    check_germ,
    germ_to_matrix,
    h_germ,
    h_germ_to_matrix,
    r_perp_and_r_minus,
    s_germ,
)
from .inner import (
    DiracGaussian,
    constrained_norm,
    dirac_from_germ,
    dirac_inner_product,
    dirac_project,
    gaussian_equivalent,
    gaussian_inner_product,
    gaussian_norm_closed_form,
    null_reduce,
    residual_norm,
)
from .dynamics import (
    BranchTrackingError,
    IncompatibleHamiltonian,
    QuadraticHamiltonian,
    ReducedSpace,
    check_compatibility,
    circ_product,
    classical_flow,
    evolve_gaussian,
    evolve_quasi_gaussian,
    oscillator,
    reduce_hamiltonian,
)
from .stability import (
    ModeSet,
    StabilityReport,
    UnstableSystemError,
    analyze_stability,
    candidate_germs,
    excited_state,
    extract_modes,
    germ_from_modes,
    ground_state,
    verify_eigen,
)

__version__ = "0.1.0"
