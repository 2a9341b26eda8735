"""Forward and inverse spectral solvers for matrix Sturm-Liouville
operators on the half-line.

The forward side computes Jost solutions, the characteristic matrix and the
Weyl matrix; the spectral side extracts eigenvalues, residues and the
continuous density; two constructive inverse solvers recover the potential
and boundary coefficient from finite pole prescriptions or from
self-adjoint spectral data, with round-trip verification harnesses.
"""

from .config import DEFAULT, RunConfig, config_from_env
from .forward import (
    JostFamily,
    RegularSolution,
    SolutionSample,
    characteristic_matrix,
    delta,
    jost,
    jost_many,
    solve_regular,
    weyl_matrix,
    weyl_matrix_adjoint,
    weyl_solution,
    wronskian_bracket,
)
from .integrate import backend
from .inverse_finite import (
    MainSystem,
    PolePrescription,
    PrescribedPole,
    Reconstruction,
    assemble,
    reconstruct,
    solve_at,
)
from .inverse_selfadjoint import build_data, reconstruct_sd, solve_main
from .kernel import KernelEvaluation, ModelFamily, kernel, kernel_quotient
from .model import (
    PotentialSpec,
    Problem,
    SpectralPoint,
    evaluate_potential,
    evaluate_potential_many,
    is_hermitian,
    lambda_to_rho,
    mat_norm,
    square_matrix,
    zero_potential,
)
from .spectral import (
    SpectralData,
    SpReport,
    continuous_density,
    continuous_density_many,
    extract_spectral_data,
    find_eigenvalues,
    gauss_rho_grid,
    residue,
    validate_class_sp,
    weyl_from_spectral_data,
)
from .verify import (
    RoundTripReport,
    check_xi_unitarity,
    random_hermitian_problem,
    roundtrip_finite,
    roundtrip_selfadjoint,
)

__version__ = "0.1.0"
