"""Finite element solver for the (p,q)-Laplacian eigenvalue problem with
Steklov-type boundary weight.

The threshold eigenvalue comes from :func:`compute_lambda1`; eigenfunctions
for a prescribed ``lam`` from :func:`solve`. :mod:`pqsteklov.verify` turns the
structural statements about the spectrum into executable checks.
"""

from .cone import ShiftResult, normalize_to_C1, random_cone_point, shift_to_cone
from .descent import SolverConfig
from .eigensolver import EigenResult, nehari_scale, reduced_energy, solve, solve_direct, solve_nehari
from .errors import (
    DegenerateDirectionError,
    GenerationFailureError,
    InfeasibleDirectionError,
    InvalidArgumentError,
    InvalidProblemError,
    NoFeasibleStartError,
    PQSteklovError,
    SingularGradientError,
    UnsupportedProblemError,
)
from .functionals import (
    J_lambda,
    J_mu,
    L_lambda,
    ProblemSpec,
    SmoothingConfig,
    constraint_value,
    grad_energy,
    grad_grad_energy,
    grad_J_lambda,
    grad_weighted_qnorm,
    node_weights,
    weighted_qnorm,
)
from .mesh import Mesh, generate_interval, generate_unit_square, read_mesh, write_mesh
from .rayleigh import Lambda1Result, compute_lambda1, lambda_tilde_quotient, rayleigh_quotient
from .verify import (
    VerificationReport,
    check_lambda_tilde_equality,
    check_p_independence,
    check_spectrum_structure,
    weak_form_residual,
)

__version__ = "0.1.0"
