"""MCARMA processes as sums of multivariate Ornstein-Uhlenbeck processes.

Matrix-polynomial machinery (right solvents, block Vandermonde matrices,
matrix residues), the OU-sum decomposition of multivariate CARMA models,
exact sampled VARMA(p, p-1) parameters, and exact-in-distribution path
simulation for Monte-Carlo verification.
"""

from .exceptions import CertificationError, ModelFileError
from .matpoly import (
    LambdaMatrix,
    LatentPair,
    Solvent,
    SolventSet,
    certify_solvent_set,
    coeffs_from_solvents,
    companion_matrix,
    default_grouping,
    latent_roots,
    linear_factorization,
    solvent_set,
    solvents_from_latents,
    vandermonde,
)
from .rational import (
    PartialFraction,
    RationalLeftMatrix,
    check_irreducible,
    eval_partial_fraction,
    residues,
)
from .mcarma import (
    McarmaModel,
    OuDecomposition,
    StateSpace,
    build_state_space,
    decompose,
    kernel,
    stationary_acvf,
    stationary_state_covariance,
)
from .sampling import (
    SampledVarma,
    fit_ma,
    innovation_gramians,
    noise_acvf,
    sampled_varma,
    varma_ar,
)
from .sim import (
    DriverSpec,
    PathGrid,
    attach_noise,
    empirical_acvf,
    extract_noise,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "CertificationError",
    "DriverSpec",
    "LambdaMatrix",
    "LatentPair",
    "McarmaModel",
    "ModelFileError",
    "OuDecomposition",
    "PartialFraction",
    "PathGrid",
    "RationalLeftMatrix",
    "SampledVarma",
    "Solvent",
    "SolventSet",
    "StateSpace",
    "attach_noise",
    "build_state_space",
    "certify_solvent_set",
    "check_irreducible",
    "coeffs_from_solvents",
    "companion_matrix",
    "decompose",
    "default_grouping",
    "empirical_acvf",
    "eval_partial_fraction",
    "extract_noise",
    "fit_ma",
    "innovation_gramians",
    "kernel",
    "latent_roots",
    "linear_factorization",
    "noise_acvf",
    "residues",
    "sampled_varma",
    "simulate",
    "solvent_set",
    "solvents_from_latents",
    "stationary_acvf",
    "stationary_state_covariance",
    "vandermonde",
    "varma_ar",
]
