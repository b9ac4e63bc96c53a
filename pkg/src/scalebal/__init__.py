"""Finite-precision matrix scaling and balancing with a query-metered oracle."""

from .errors import *  # noqa: F401,F403
from .fixedpoint import FixedPoint, FixedVector, format_fixed, parse_fixed
from .oracle import SparseMatrix, TargetMarginals, load_matrix, load_targets
from .estimators import BackendKind, EstimatorBackend, approx_scaling_factor, estimate_total_mass, test_scaling
from .sinkhorn import (
    InstanceMeta,
    SinkhornParams,
    derive_params_full,
    derive_params_positive,
    derive_params_random,
    run_full_sinkhorn,
    run_positive_sinkhorn,
    run_randomized_sinkhorn,
)
from .osborne import OsborneParams, check_balanced, derive_params_osborne, run_random_osborne
from .instances import build_gadget_instance, decode_descriptor, gadget_matrices

__version__ = "0.1.0"
